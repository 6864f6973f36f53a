use std::f64::consts::PI;

use proptest::prelude::*;
use xnet_core::autodiff::gradcheck::{
    reverse_error, second_order_error, Composite, OpCase, GRAD_TOL, SECOND_TOL,
};
use xnet_core::metrics::metrics_from_slices;
use xnet_core::models::bspline::{clamped_knots, nonzero_basis};
use xnet_core::models::{cauchy_eval, CauchyParams, Head, Lstm};
use xnet_core::optim::{Adam, AdamConfig};
use xnet_core::targets::{builtin_target, make_windows, MinMax, Split, TargetName};
use xnet_core::{SeedRng, Tensor};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn reverse_mode_matches_central_differences(seed in any::<u64>()) {
        for case in OpCase::ALL {
            let err = reverse_error(case, &mut SeedRng::new(seed), None).unwrap();
            prop_assert!(err <= GRAD_TOL, "{}: {err:e}", case.name());
        }
    }

    #[test]
    fn nested_duals_match_second_differences(seed in any::<u64>()) {
        for case in Composite::ALL {
            let err = second_order_error(case, &mut SeedRng::new(seed)).unwrap();
            prop_assert!(err <= SECOND_TOL, "{}: {err:e}", case.name());
        }
    }

    #[test]
    fn cauchy_response_decays(
        l1 in -10.0..10.0f64,
        l2 in -10.0..10.0f64,
        d in 1e-3..50.0f64,
        scale in 1.0..1e3f64,
        sign in prop::bool::ANY,
    ) {
        let p = CauchyParams::new(l1, l2, d).unwrap();
        let z = 1e4 * d.max(1.0) * scale * if sign { 1.0 } else { -1.0 };
        let bound = 1e-3 * (l1.abs() + l2.abs()) / d;
        prop_assert!(cauchy_eval(z, &p).abs() <= bound);
    }

    #[test]
    fn bspline_partition_of_unity(grid in 1usize..300, degree in 1usize..6, u in 0.0..1.0f64) {
        let knots = clamped_knots(-1.0, 1.0, grid, degree).unwrap();
        let x = -1.0 + 2.0 * u;
        let (_, vals) = nonzero_basis(&knots, degree, x);
        let s: f64 = vals.iter().sum();
        prop_assert!((s - 1.0).abs() <= 1e-12, "sum {s}");
        prop_assert!(vals.iter().all(|v| *v >= -1e-15));
    }

    #[test]
    fn metric_identities(pairs in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 1..200)) {
        let (p, a): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let m = metrics_from_slices(&p, &a, 0.0).unwrap();
        prop_assert!(m.identities_hold(), "{m:?}");
        prop_assert!((m.rmse - m.mse.sqrt()).abs() <= 1e-12 * m.rmse.max(1.0));
    }

    #[test]
    fn lstm_cell_growth_is_bounded(seed in any::<u64>(), scale in 0.1..20.0f64) {
        let mut rng = SeedRng::new(seed);
        let lstm = Lstm::new(3, 6, Head::Affine, &mut rng).unwrap();
        let params: Vec<Tensor> = lstm.params().iter().map(|t| t.map(|v| v * scale)).collect();
        let mut h = Tensor::zeros(&[4, 6]);
        let mut c = rng.uniform_tensor(&[4, 6], -3.0, 3.0);
        for _ in 0..5 {
            let x = rng.uniform_tensor(&[4, 3], -5.0, 5.0);
            let (h2, c2) = Lstm::step(&params, &x, &h, &c).unwrap();
            for (new, old) in c2.data().iter().zip(c.data()) {
                prop_assert!(new.abs() <= old.abs() + 1.0 + 1e-12);
            }
            prop_assert!(h2.data().iter().all(|v| v.abs() <= 1.0));
            h = h2;
            c = c2;
        }
    }

    #[test]
    fn windows_never_leak_test_targets(
        len in 8usize..300,
        t in 1usize..12,
        frac in 0.3..0.95f64,
        normalize in prop::bool::ANY,
    ) {
        prop_assume!(t + 1 < len);
        let series: Vec<f64> = (0..len).map(|i| (i as f64 * 0.37).sin() + i as f64 * 0.01).collect();
        let split = Split::Fraction(frac);
        let Ok(ds) = make_windows(&series, t, split, normalize) else {
            return Ok(());
        };
        let train_len = split.train_len(len).unwrap();
        for row in ds.train_range() {
            let target = ds.target_index[row];
            prop_assert!(target < train_len);
            prop_assert!(target >= t);
        }
        for row in ds.test_range() {
            prop_assert!(ds.target_index[row] >= train_len);
        }
        for row in 0..ds.len() {
            let target = ds.target_index[row];
            for k in 0..t {
                let v = ds.windows.data()[row * t + k];
                let raw = series[target - t + k];
                let want = ds.norm.map_or(raw, |n| n.forward(raw));
                prop_assert_eq!(v.to_bits(), want.to_bits());
            }
        }
    }

    #[test]
    fn min_max_round_trip(values in prop::collection::vec(-1e4..1e4f64, 2..50)) {
        let n = MinMax::fit(&values);
        for v in values {
            prop_assert!((n.inverse(n.forward(v)) - v).abs() <= 1e-9 * v.abs().max(1.0));
        }
    }

    #[test]
    fn adam_updates_stay_finite(
        grads in prop::collection::vec(-1e12..1e12f64, 1..20),
        lr in 1e-6..1.0f64,
    ) {
        let n = grads.len();
        let mut params = vec![Tensor::zeros(&[1, n])];
        let g = vec![Tensor::new(vec![1, n], grads).unwrap()];
        let mut adam = Adam::new(AdamConfig::default(), &params);
        for _ in 0..3 {
            adam.step(&mut params, &g, lr, &["p".to_string()], &[false]).unwrap();
        }
        prop_assert!(params[0].all_finite());
        prop_assert_eq!(adam.t(), 3);
    }

    #[test]
    fn targets_match_oracle_expressions(seed in any::<u64>()) {
        let mut rng = SeedRng::new(seed);
        type Oracle = fn(&[f64]) -> f64;
        let oracles: [(TargetName, usize, Oracle); 5] = [
            (TargetName::Heaviside, 1, |x| if x[0] > 0.0 { 1.0 } else { 0.0 }),
            (TargetName::ExpSin2d, 2, |x| ((PI * x[0]).sin() + x[1].powi(2)).exp()),
            (TargetName::Xy, 2, |x| x[0] * x[1]),
            (TargetName::Exp4d, 4, |x| {
                (0.5 * (PI * (x[0].powi(2) + x[1].powi(2))).sin() + 0.5 * x[2] * x[3]).exp()
            }),
            (TargetName::Exp100d, 100, |x| {
                (x.iter().map(|v| (0.5 * PI * v).sin().powi(2)).sum::<f64>() / 100.0).exp()
            }),
        ];
        for (name, dim, oracle) in oracles {
            let t = builtin_target(name);
            prop_assert_eq!(t.input_dim, dim);
            for _ in 0..10 {
                let x: Vec<f64> = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
                let (a, b) = (t.eval(&x), oracle(&x));
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{name}: {a} vs {b}");
            }
        }
    }
}

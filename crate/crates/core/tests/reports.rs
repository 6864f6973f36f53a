use xnet_core::fit::{run_fit, FitConfig, FitModel};
use xnet_core::models::{Head, XNetInit};
use xnet_core::optim::{AdamConfig, LrSchedule, TrainConfig};
use xnet_core::report::{emit_report, RunReport};
use xnet_core::targets::{
    builtin_target, generate_series, sample_dataset, SeriesSpec, Split, TargetName,
};
use xnet_core::timeseries::{compare_models, ForecastConfig};

fn varpro_fit() -> FitConfig {
    FitConfig {
        target: TargetName::ExpSin2d,
        n_train: 300,
        n_test: 200,
        model: FitModel::Xnet {
            units: 16,
            init: XNetInit::default(),
        },
        ridge: Some(1e-10),
        train: Some(TrainConfig {
            iterations: 60,
            adam: AdamConfig {
                lr: 1e-2,
                ..Default::default()
            },
            schedule: LrSchedule::Cosine { final_factor: 0.1 },
            log_every: 5,
            refit_every: 3,
        }),
        eval_grid: Some(20),
    }
}

#[test]
fn fit_reports_are_bit_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = run_fit("det", &varpro_fit(), 5).unwrap().report;
    let b = run_fit("det", &varpro_fit(), 5).unwrap().report;
    assert_eq!(a.without_timing(), b.without_timing());
    assert!(a.metrics_consistent());
    let path = emit_report(&mut a, dir.path(), &[]).unwrap();
    let back = RunReport::load(&path).unwrap();
    assert_eq!(back, a);
    let c = run_fit("det", &varpro_fit(), 6).unwrap().report;
    assert_ne!(a.metrics.mse.to_bits(), c.metrics.mse.to_bits());
}

#[test]
fn report_records_config_seed_and_references() {
    let out = run_fit("snap", &varpro_fit(), 9).unwrap();
    let r = &out.report;
    assert_eq!(r.seed, 9);
    assert_eq!(r.config["target"], "exp_sin_2d");
    assert_eq!(r.config["train"]["iterations"], 60);
    assert!(!r.references.is_empty());
    assert!(r.references.iter().all(|x| x.note.contains("not computed")));
    assert!(r.extra.contains_key("grid"));
    assert_eq!(r.history.last().unwrap().0, 60);
}

#[test]
fn forecast_comparison_is_bit_identical() {
    let series = generate_series(&SeriesSpec {
        noise: 0.01,
        length: 60,
        seed: 3,
        ..SeriesSpec::default()
    })
    .unwrap();
    let train = TrainConfig {
        iterations: 30,
        log_every: 10,
        ..Default::default()
    };
    let cfgs = vec![
        ForecastConfig {
            label: "LSTM".into(),
            window: 5,
            hidden: 4,
            head: Head::Affine,
            normalize: false,
            head_ridge: None,
            train: train.clone(),
        },
        ForecastConfig {
            label: "XLSTM".into(),
            window: 5,
            hidden: 4,
            head: Head::Xnet {
                units: 6,
                init: XNetInit::default(),
            },
            normalize: false,
            head_ridge: Some(1e-8),
            train: TrainConfig {
                refit_every: 5,
                ..train
            },
        },
    ];
    let a = compare_models(
        &series,
        Split::Fraction(0.8),
        &cfgs,
        1,
        Some("series_noise_0"),
    )
    .unwrap();
    let b = compare_models(
        &series,
        Split::Fraction(0.8),
        &cfgs,
        1,
        Some("series_noise_0"),
    )
    .unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!(x.predicted, y.predicted);
        assert_eq!(x.history, y.history);
        assert_eq!(x.metrics.mse.to_bits(), y.metrics.mse.to_bits());
        assert!(x.metrics.identities_hold());
    }
    assert_eq!(a.predictions_table().rows.len(), a.rows[0].actual.len());
}

/// Kolmogorov-Smirnov statistic of `xs` against Uniform(lo, hi).
fn ks_uniform(mut xs: Vec<f64>, lo: f64, hi: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = (x - lo) / (hi - lo);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn samples_are_uniform_per_axis() {
    let t = builtin_target(TargetName::Exp4d);
    let (train, _) = sample_dataset(&t, 100_000, 1, 17).unwrap();
    // 1% critical value of the one-sample KS statistic for large n.
    let crit = 1.628 / (100_000f64).sqrt();
    for axis in 0..4 {
        let xs: Vec<f64> = (0..train.len()).map(|i| train.x.get(i, axis)).collect();
        assert!(xs.iter().all(|x| (-1.0..=1.0).contains(x)));
        let d = ks_uniform(xs, -1.0, 1.0);
        assert!(d < crit, "axis {axis}: D = {d}, critical {crit}");
    }
}

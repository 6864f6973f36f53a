//! Physics-informed solver for `v_xx + v_yy = f` on `[-1, 1]^2` with zero
//! boundary values, where `f = -2 pi^2 sin(pi x) sin(pi y)`.
//!
//! The loss is `alpha * loss_i + loss_b` with `loss_i` the mean squared PDE
//! residual at interior points and `loss_b` the mean squared boundary value.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::autodiff::{laplacian, Array, Dual};
use crate::error::{Error, Result};
use crate::linalg::ridge_solve;
use crate::metrics::{metrics_from_slices, Metrics};
use crate::models::{AnyModel, Mlp, XNet, XNetInit, XNET_LINEAR, XNET_PARAM_NAMES};
use crate::optim::{train, Refit, Schedule, TrainConfig, TrainOutcome};
use crate::reference::references_for;
use crate::report::{RunReport, Table};
use crate::rng::SeedRng;
use crate::tensor::Tensor;

pub fn poisson_rhs(x: f64, y: f64) -> f64 {
    -2.0 * PI * PI * (PI * x).sin() * (PI * y).sin()
}

pub fn exact_solution(x: f64, y: f64) -> f64 {
    (PI * x).sin() * (PI * y).sin()
}

#[derive(Debug, Clone, Copy)]
pub struct PinnProblem {
    pub rhs: fn(f64, f64) -> f64,
    /// Used for evaluation only.
    pub exact: Option<fn(f64, f64) -> f64>,
    pub n_interior: usize,
    pub n_boundary: usize,
    pub alpha: f64,
}

impl PinnProblem {
    pub fn poisson(n_interior: usize, n_boundary: usize, alpha: f64) -> Result<Self> {
        let p = Self {
            rhs: poisson_rhs,
            exact: Some(exact_solution),
            n_interior,
            n_boundary,
            alpha,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_interior == 0 || self.n_boundary == 0 {
            return Err(Error::invalid("collocation counts must be positive"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::invalid(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Fixed collocation points with the right-hand side at the interior ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Collocation {
    pub interior: Tensor,
    pub boundary: Tensor,
    pub rhs: Tensor,
}

/// Interior points uniform in the open square; boundary points on an edge
/// picked uniformly (all edges have equal length), uniform along it.
pub fn sample_collocation(problem: &PinnProblem, seed: u64) -> Result<Collocation> {
    problem.validate()?;
    let mut rng = SeedRng::new(seed);
    let mut open = || loop {
        let v = rng.uniform(-1.0, 1.0);
        if v.abs() < 1.0 {
            break v;
        }
    };
    let mut interior = Vec::with_capacity(2 * problem.n_interior);
    for _ in 0..problem.n_interior {
        interior.push(open());
        interior.push(open());
    }
    let mut rng = SeedRng::new(seed).split();
    let mut boundary = Vec::with_capacity(2 * problem.n_boundary);
    for _ in 0..problem.n_boundary {
        let edge = rng.index(4);
        let t = rng.uniform(-1.0, 1.0);
        let side = if edge % 2 == 0 { -1.0 } else { 1.0 };
        if edge < 2 {
            boundary.extend([side, t]);
        } else {
            boundary.extend([t, side]);
        }
    }
    let rhs = interior
        .chunks(2)
        .map(|p| (problem.rhs)(p[0], p[1]))
        .collect();
    Ok(Collocation {
        interior: Tensor::new(vec![problem.n_interior, 2], interior)?,
        boundary: Tensor::new(vec![problem.n_boundary, 2], boundary)?,
        rhs: Tensor::column(rhs),
    })
}

/// A model usable in the PINN loss: values and input Laplacian, both `[N, 1]`.
pub trait PinnModel {
    fn values<A: Array>(&self, p: &[A], x: &A) -> Result<A>;
    fn laplacian<A: Array>(&self, p: &[A], x: &A) -> Result<A>;
}

pub struct XNetPinn;

impl PinnModel for XNetPinn {
    fn values<A: Array>(&self, p: &[A], x: &A) -> Result<A> {
        XNet::forward(p, x)
    }

    fn laplacian<A: Array>(&self, p: &[A], x: &A) -> Result<A> {
        XNet::laplacian(p, x)
    }
}

/// MLP whose Laplacian comes from nested duals.
pub struct MlpPinn;

impl PinnModel for MlpPinn {
    fn values<A: Array>(&self, p: &[A], x: &A) -> Result<A> {
        Mlp::forward(p, x)
    }

    fn laplacian<A: Array>(&self, p: &[A], x: &A) -> Result<A> {
        let lifted: Vec<Dual<Dual<A>>> = p
            .iter()
            .map(|t| Dual::constant(Dual::constant(t.clone())))
            .collect();
        laplacian(x, |xd| Mlp::forward(&lifted, xd))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PinnLossParts<A> {
    pub loss_i: A,
    pub loss_b: A,
    pub total: A,
}

pub fn pinn_loss<A: Array, M: PinnModel>(
    model: &M,
    p: &[A],
    problem: &PinnProblem,
    colloc: &Collocation,
) -> Result<PinnLossParts<A>> {
    let anchor = p
        .first()
        .ok_or_else(|| Error::invalid("model has no parameters"))?;
    let xi = anchor.lift(colloc.interior.clone());
    let xb = anchor.lift(colloc.boundary.clone());
    let f = anchor.lift(colloc.rhs.clone());
    let loss_i = model.laplacian(p, &xi)?.sub(&f)?.square().mean();
    let loss_b = model.values(p, &xb)?.square().mean();
    let total = loss_i.scale(problem.alpha).add(&loss_b)?;
    Ok(PinnLossParts {
        loss_i,
        loss_b,
        total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Backend {
    Xnet {
        units: usize,
        #[serde(default)]
        init: XNetInit,
    },
    Mlp {
        widths: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinnConfig {
    pub backend: Backend,
    #[serde(default = "default_interior")]
    pub n_interior: usize,
    #[serde(default = "default_boundary")]
    pub n_boundary: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Points per axis of the evaluation grid.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Relative ridge for the XNet linear solve; `None` trains every parameter with Adam.
    #[serde(default)]
    pub ridge: Option<f64>,
    #[serde(default = "default_pinn_train")]
    pub train: TrainConfig,
}

fn default_interior() -> usize {
    2500
}
fn default_boundary() -> usize {
    200
}
fn default_alpha() -> f64 {
    0.01
}
fn default_grid() -> usize {
    100
}
fn default_pinn_train() -> TrainConfig {
    TrainConfig {
        iterations: 20_000,
        log_every: 100,
        ..Default::default()
    }
}

impl PinnConfig {
    pub fn validate(&self) -> Result<()> {
        self.problem()?;
        self.train.validate()?;
        if self.ridge.is_some() && self.train.refit_every == 0 {
            return Err(Error::invalid(
                "train.refit_every must be positive when ridge is set",
            ));
        }
        if self.grid < 2 {
            return Err(Error::invalid(
                "evaluation grid needs at least 2 points per axis",
            ));
        }
        match &self.backend {
            Backend::Xnet { units: 0, .. } => Err(Error::invalid("XNet needs at least one unit")),
            Backend::Mlp { widths } if widths.first() != Some(&2) || widths.last() != Some(&1) => {
                Err(Error::invalid(format!(
                    "PINN MLP must map 2 -> 1, got widths {widths:?}"
                )))
            }
            Backend::Mlp { .. } if self.ridge.is_some() => {
                Err(Error::invalid("ridge applies to the XNet backend only"))
            }
            _ => Ok(()),
        }
    }

    pub fn problem(&self) -> Result<PinnProblem> {
        PinnProblem::poisson(self.n_interior, self.n_boundary, self.alpha)
    }

    pub fn label(&self) -> String {
        match &self.backend {
            Backend::Xnet { units, .. } => format!("XNet ({units})"),
            Backend::Mlp { widths } => format!("PINN {widths:?}").replace(", ", ","),
        }
    }
}

pub struct PinnOutcome {
    pub model: AnyModel,
    pub loss: PinnLossParts<f64>,
    pub train: TrainOutcome,
    /// Error against the exact solution on the evaluation grid.
    pub metrics: Metrics,
    /// `x, y, predicted, exact, difference` per grid point.
    pub field: Table,
    pub report: RunReport,
}

/// Uniform `n x n` grid on `[-1, 1]^2` including the edges, `y` fastest.
pub fn eval_grid(n: usize) -> Tensor {
    let h = 2.0 / (n - 1) as f64;
    let mut data = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for j in 0..n {
            data.extend([-1.0 + h * i as f64, -1.0 + h * j as f64]);
        }
    }
    Tensor::from_parts(vec![n * n, 2], data)
}

/// Stacks `sqrt(alpha / n_i) * laplacian design` over `sqrt(1 / n_b) * boundary design`
/// so that the least-squares residual equals the PINN loss.
fn xnet_refit(
    net: &mut XNet,
    problem: &PinnProblem,
    colloc: &Collocation,
    ridge: f64,
) -> Result<()> {
    let li = net.laplacian_design_matrix(&colloc.interior)?;
    let lb = net.design_matrix(&colloc.boundary)?;
    let si = (problem.alpha / problem.n_interior as f64).sqrt();
    let sb = (1.0 / problem.n_boundary as f64).sqrt();
    let cols = li.cols();
    let mut data: Vec<f64> = li.data().iter().map(|v| v * si).collect();
    data.extend(lb.data().iter().map(|v| v * sb));
    let mut y: Vec<f64> = colloc.rhs.data().iter().map(|v| v * si).collect();
    y.extend(std::iter::repeat_n(0.0, problem.n_boundary));
    let design = Tensor::new(vec![problem.n_interior + problem.n_boundary, cols], data)?;
    let beta = ridge_solve(&design, &y, ridge)?;
    net.set_linear_params(&beta)
}

pub fn solve_poisson(experiment: &str, cfg: &PinnConfig, seed: u64) -> Result<PinnOutcome> {
    cfg.validate()?;
    let problem = cfg.problem()?;
    let colloc = sample_collocation(&problem, seed)?;
    let mut rng = SeedRng::new(seed).split().split();
    let (model, train_out, loss) = match &cfg.backend {
        Backend::Xnet { units, init } => {
            let mut net = XNet::new(2, *units, init, &mut rng)?;
            let names: Vec<String> = XNET_PARAM_NAMES.iter().map(|s| s.to_string()).collect();
            let mut params = net.params().to_vec();
            let out = match cfg.ridge {
                Some(ridge) => {
                    let mut frozen = vec![false; names.len()];
                    for i in XNET_LINEAR {
                        frozen[i] = true;
                    }
                    let mut refit = |p: &mut [Tensor]| -> Result<()> {
                        let mut n = XNet::from_params(p.to_vec())?;
                        xnet_refit(&mut n, &problem, &colloc, ridge)?;
                        p.clone_from_slice(n.params());
                        Ok(())
                    };
                    let refit: &mut Refit = &mut refit;
                    let sched = Schedule {
                        names,
                        frozen,
                        refit: Some(refit),
                    };
                    train(&mut params, &cfg.train, sched, |_, v, _| {
                        Ok(pinn_loss(&XNetPinn, v, &problem, &colloc)?.total)
                    })?
                }
                None => train(
                    &mut params,
                    &cfg.train,
                    Schedule::adam_only(names),
                    |_, v, _| Ok(pinn_loss(&XNetPinn, v, &problem, &colloc)?.total),
                )?,
            };
            net = XNet::from_params(params)?;
            let loss = pinn_loss(&XNetPinn, net.params(), &problem, &colloc)?;
            (AnyModel::Xnet(net), out, loss)
        }
        Backend::Mlp { widths } => {
            let net = Mlp::new(widths, &mut rng)?;
            let names = net.param_names();
            let mut params = net.into_params();
            let out = train(
                &mut params,
                &cfg.train,
                Schedule::adam_only(names),
                |_, v, _| Ok(pinn_loss(&MlpPinn, v, &problem, &colloc)?.total),
            )?;
            let net = Mlp::from_params(widths, params)?;
            let loss = pinn_loss(&MlpPinn, net.params(), &problem, &colloc)?;
            (AnyModel::Mlp(net), out, loss)
        }
    };
    let loss = PinnLossParts {
        loss_i: loss.loss_i.item()?,
        loss_b: loss.loss_b.item()?,
        total: loss.total.item()?,
    };

    let grid = eval_grid(cfg.grid);
    let pred = match &model {
        AnyModel::Xnet(m) => m.predict(&grid)?,
        AnyModel::Mlp(m) => m.predict(&grid)?,
        AnyModel::Lstm(_) => unreachable!("PINN backends are XNet or MLP"),
    };
    let exact = problem.exact.unwrap_or(exact_solution);
    let truth: Vec<f64> = grid.data().chunks(2).map(|p| exact(p[0], p[1])).collect();
    let metrics = metrics_from_slices(pred.data(), &truth, train_out.wall_time_s)?;

    let mut field = Table::new("field", &["x", "y", "predicted", "exact", "difference"]);
    for ((p, v), t) in grid.data().chunks(2).zip(pred.data()).zip(&truth) {
        field.push(vec![p[0], p[1], *v, *t, v - t]);
    }

    let mut report = RunReport::new(
        experiment,
        "pinn",
        seed,
        serde_json::to_value(cfg)?,
        metrics,
    );
    report.history = train_out.history.clone();
    report.values.insert("loss_i".into(), loss.loss_i);
    report.values.insert("loss_b".into(), loss.loss_b);
    report.values.insert("loss_total".into(), loss.total);
    report.values.insert(
        "param_count".into(),
        model.params().iter().map(Tensor::len).sum::<usize>() as f64,
    );
    report.references = references_for("pinn");
    Ok(PinnOutcome {
        model,
        loss,
        train: train_out,
        metrics,
        field,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{directional_derivative, ScalarField};
    use crate::optim::AdamConfig;

    /// `sin(pi x) sin(pi y)` expressed through array ops; ignores parameters.
    struct Exact;

    impl Exact {
        fn eval<A: Array>(x: &A) -> Result<A> {
            let ex = x.lift(Tensor::column(vec![PI, 0.0]));
            let ey = x.lift(Tensor::column(vec![0.0, PI]));
            x.matmul(&ex)?.sin().mul(&x.matmul(&ey)?.sin())
        }
    }

    impl PinnModel for Exact {
        fn values<A: Array>(&self, _: &[A], x: &A) -> Result<A> {
            Self::eval(x)
        }

        fn laplacian<A: Array>(&self, _: &[A], x: &A) -> Result<A> {
            laplacian(x, |xd| Self::eval(xd))
        }
    }

    impl ScalarField for Exact {
        fn eval<A: Array>(&self, x: &A) -> Result<A> {
            Self::eval(x)
        }
    }

    fn small() -> (PinnProblem, Collocation) {
        let p = PinnProblem::poisson(300, 40, 0.01).unwrap();
        let c = sample_collocation(&p, 3).unwrap();
        (p, c)
    }

    #[test]
    fn rhs_and_solution_values() {
        assert_eq!(poisson_rhs(0.0, 0.0), 0.0);
        assert!((poisson_rhs(0.5, 0.5) + 19.739_208_8).abs() < 1e-7);
        assert!((exact_solution(0.5, 0.5) - 1.0).abs() < 1e-15);
        for t in [-1.0, -0.3, 0.2, 1.0] {
            assert!(poisson_rhs(1.0, t).abs() < 1e-14);
            assert!(exact_solution(t, -1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn laplacian_of_exact_solution_is_rhs() {
        let mut rng = SeedRng::new(11);
        for _ in 0..100 {
            let (x, y) = (rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
            let pt = Tensor::row(vec![x, y]);
            let lap = directional_derivative(&Exact, &pt, &Tensor::row(vec![1.0, 0.0]), 2).unwrap()
                + directional_derivative(&Exact, &pt, &Tensor::row(vec![0.0, 1.0]), 2).unwrap();
            assert!((lap - poisson_rhs(x, y)).abs() < 1e-6);
        }
    }

    #[test]
    fn collocation_geometry() {
        let (p, c) = small();
        assert_eq!(c.interior.shape(), [p.n_interior, 2]);
        assert!(c
            .interior
            .data()
            .chunks(2)
            .all(|q| q[0].abs().max(q[1].abs()) < 1.0));
        assert!(c
            .boundary
            .data()
            .chunks(2)
            .all(|q| q[0].abs().max(q[1].abs()) == 1.0));
        assert_eq!(c, sample_collocation(&p, 3).unwrap());
    }

    #[test]
    fn zero_model_has_only_interior_loss() {
        let (p, c) = small();
        let zero: Vec<Tensor> = XNet::new(2, 4, &XNetInit::default(), &mut SeedRng::new(0))
            .unwrap()
            .params()
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if [2, 3, 5].contains(&i) {
                    Tensor::zeros(t.shape())
                } else {
                    t.clone()
                }
            })
            .collect();
        let parts = pinn_loss(&XNetPinn, &zero, &p, &c).unwrap();
        assert_eq!(parts.loss_b.item().unwrap(), 0.0);
        let mean_f2 = c.rhs.data().iter().map(|f| f * f).sum::<f64>() / p.n_interior as f64;
        assert!((parts.loss_i.item().unwrap() - mean_f2).abs() < 1e-12 * mean_f2);
        assert!(mean_f2 > 0.0);
    }

    #[test]
    fn exact_model_has_zero_loss() {
        let (p, c) = small();
        let dummy = [Tensor::scalar(0.0)];
        let parts = pinn_loss(&Exact, &dummy, &p, &c).unwrap();
        assert!(parts.total.item().unwrap() < 1e-20, "{:?}", parts.total);
    }

    #[test]
    fn total_is_linear_in_alpha() {
        let (mut p, c) = small();
        let m = XNet::new(2, 5, &XNetInit::default(), &mut SeedRng::new(2)).unwrap();
        let a = pinn_loss(&XNetPinn, m.params(), &p, &c).unwrap();
        assert_eq!(
            a.total.item().unwrap(),
            p.alpha * a.loss_i.item().unwrap() + a.loss_b.item().unwrap()
        );
        p.alpha *= 2.0;
        let b = pinn_loss(&XNetPinn, m.params(), &p, &c).unwrap();
        let diff = b.total.item().unwrap() - a.total.item().unwrap();
        assert!((diff - 0.01 * a.loss_i.item().unwrap()).abs() < 1e-12 * b.total.item().unwrap());
    }

    #[test]
    fn refit_solves_the_loss_exactly() {
        let (p, c) = small();
        let mut m = XNet::new(2, 12, &XNetInit::default(), &mut SeedRng::new(4)).unwrap();
        xnet_refit(&mut m, &p, &c, 1e-14).unwrap();
        let base = pinn_loss(&XNetPinn, m.params(), &p, &c)
            .unwrap()
            .total
            .item()
            .unwrap();
        // Any perturbation of a linear coefficient can only increase the loss.
        for i in [2, 3, 5] {
            let mut q = m.params().to_vec();
            q[i].data_mut()[0] += 1e-3;
            let l = pinn_loss(&XNetPinn, &q, &p, &c)
                .unwrap()
                .total
                .item()
                .unwrap();
            assert!(l >= base * (1.0 - 1e-9), "{l} < {base}");
        }
    }

    #[test]
    fn mlp_laplacian_matches_finite_differences() {
        let m = Mlp::new(&[2, 6, 6, 1], &mut SeedRng::new(5)).unwrap();
        let x = SeedRng::new(6).uniform_tensor(&[20, 2], -0.9, 0.9);
        let lap = MlpPinn.laplacian(m.params(), &x).unwrap();
        let h = 1e-4;
        let f = |pts: Vec<f64>| {
            m.predict(&Tensor::new(vec![1, 2], pts).unwrap())
                .unwrap()
                .data()[0]
        };
        for (i, q) in x.data().chunks(2).enumerate() {
            let c = f(q.to_vec());
            let fd = (f(vec![q[0] + h, q[1]])
                + f(vec![q[0] - h, q[1]])
                + f(vec![q[0], q[1] + h])
                + f(vec![q[0], q[1] - h])
                - 4.0 * c)
                / (h * h);
            let ad = lap.data()[i];
            assert!((ad - fd).abs() / ad.abs().max(1.0) < 1e-5, "{ad} vs {fd}");
        }
    }

    #[test]
    fn short_runs_decrease_loss_and_are_deterministic() {
        let cfg = PinnConfig {
            backend: Backend::Xnet {
                units: 8,
                init: XNetInit::default(),
            },
            n_interior: 200,
            n_boundary: 40,
            alpha: 0.01,
            grid: 10,
            ridge: Some(1e-12),
            train: TrainConfig {
                iterations: 20,
                adam: AdamConfig {
                    lr: 1e-2,
                    ..Default::default()
                },
                log_every: 5,
                refit_every: 5,
                ..Default::default()
            },
        };
        let a = solve_poisson("t", &cfg, 9).unwrap();
        let b = solve_poisson("t", &cfg, 9).unwrap();
        assert_eq!(a.report.without_timing(), b.report.without_timing());
        assert_eq!(a.field.rows.len(), 100);
        assert!(a.report.metrics_consistent());
        let mlp = PinnConfig {
            backend: Backend::Mlp {
                widths: vec![2, 8, 1],
            },
            ridge: None,
            ..cfg
        };
        let m = solve_poisson("m", &mlp, 9).unwrap();
        assert!(m.train.history.last().unwrap().1 < m.train.history[0].1);
    }
}

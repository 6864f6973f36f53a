//! Finite-difference checks for every differentiable op.
//!
//! Reverse-mode gradients are compared against central differences with step
//! `1e-5`, and nested-dual second directional derivatives against the
//! three-point second difference with step `1e-4`. Errors are measured as
//! `|a - b| / max(1, |a|, |b|)`.

use crate::autodiff::{cauchy_basis_elementary, second_directional, Array, Dual, Graph};
use crate::error::Result;
use crate::rng::SeedRng;
use crate::tensor::Tensor;

pub const GRAD_STEP: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-6;
pub const SECOND_STEP: f64 = 1e-4;
pub const SECOND_TOL: f64 = 1e-5;

/// Result of one named check, aggregated over all seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    pub max_err: f64,
    pub tol: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.max_err <= self.tol
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if !(a.is_finite() && b.is_finite()) {
        return f64::INFINITY;
    }
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Reverse-mode cases. Each reduces its op's output to a scalar through a
/// fixed random weighting so every output element contributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpCase {
    Neg,
    Scale,
    AddScalar,
    Sin,
    Cos,
    Exp,
    Tanh,
    Sigmoid,
    Softplus,
    Square,
    Recip,
    Powi,
    Relu,
    Add,
    AddRow,
    Sub,
    Mul,
    MulRow,
    Div,
    MatMul,
    Sum,
    Mean,
    ConcatCols,
    CauchyBasis,
    CauchyLaplacian,
    Composite,
}

impl OpCase {
    pub const ALL: [OpCase; 26] = [
        OpCase::Neg,
        OpCase::Scale,
        OpCase::AddScalar,
        OpCase::Sin,
        OpCase::Cos,
        OpCase::Exp,
        OpCase::Tanh,
        OpCase::Sigmoid,
        OpCase::Softplus,
        OpCase::Square,
        OpCase::Recip,
        OpCase::Powi,
        OpCase::Relu,
        OpCase::Add,
        OpCase::AddRow,
        OpCase::Sub,
        OpCase::Mul,
        OpCase::MulRow,
        OpCase::Div,
        OpCase::MatMul,
        OpCase::Sum,
        OpCase::Mean,
        OpCase::ConcatCols,
        OpCase::CauchyBasis,
        OpCase::CauchyLaplacian,
        OpCase::Composite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpCase::Neg => "neg",
            OpCase::Scale => "scale",
            OpCase::AddScalar => "add_scalar",
            OpCase::Sin => "sin",
            OpCase::Cos => "cos",
            OpCase::Exp => "exp",
            OpCase::Tanh => "tanh",
            OpCase::Sigmoid => "sigmoid",
            OpCase::Softplus => "softplus",
            OpCase::Square => "square",
            OpCase::Recip => "recip",
            OpCase::Powi => "powi",
            OpCase::Relu => "relu",
            OpCase::Add => "add",
            OpCase::AddRow => "add (row broadcast)",
            OpCase::Sub => "sub",
            OpCase::Mul => "mul",
            OpCase::MulRow => "mul (row broadcast)",
            OpCase::Div => "div",
            OpCase::MatMul => "matmul",
            OpCase::Sum => "sum",
            OpCase::Mean => "mean",
            OpCase::ConcatCols => "concat_cols",
            OpCase::CauchyBasis => "cauchy_basis",
            OpCase::CauchyLaplacian => "cauchy_laplacian",
            OpCase::Composite => "5-parameter composite",
        }
    }

    /// Random operands for this case; values stay inside each op's smooth domain.
    pub fn inputs(self, rng: &mut SeedRng) -> Vec<Tensor> {
        let mut u = |shape: &[usize]| rng.uniform_tensor(shape, -2.0, 2.0);
        match self {
            OpCase::Recip | OpCase::Powi => vec![away_from_zero(u(&[3, 2]), 0.5)],
            OpCase::Relu => vec![away_from_zero(u(&[3, 2]), 0.1)],
            OpCase::Add | OpCase::Sub | OpCase::Mul => vec![u(&[3, 2]), u(&[3, 2])],
            OpCase::AddRow | OpCase::MulRow => vec![u(&[3, 2]), u(&[1, 2])],
            OpCase::Div => vec![u(&[3, 2]), away_from_zero(u(&[3, 2]), 0.5)],
            OpCase::MatMul => vec![u(&[3, 4]), u(&[4, 2])],
            OpCase::ConcatCols => vec![u(&[3, 2]), u(&[3, 1])],
            OpCase::CauchyBasis | OpCase::CauchyLaplacian => {
                let d = u(&[1, 3]).map(|v| 0.5 + v.abs() / 2.0);
                vec![
                    u(&[5, 2]),
                    u(&[2, 3]),
                    u(&[1, 3]),
                    u(&[1, 3]),
                    u(&[1, 3]),
                    d,
                ]
            }
            OpCase::Composite => vec![u(&[4, 2]), u(&[2, 3]), u(&[1, 3]), u(&[3, 1]), u(&[1, 1])],
            _ => vec![u(&[3, 2])],
        }
    }

    /// Scalar objective built from this case's op.
    pub fn eval<A: Array>(self, xs: &[A], weights: &Tensor) -> Result<A> {
        let x = &xs[0];
        let out = match self {
            OpCase::Neg => x.neg(),
            OpCase::Scale => x.scale(-1.7),
            OpCase::AddScalar => x.add_scalar(0.3).square(),
            OpCase::Sin => x.sin(),
            OpCase::Cos => x.cos(),
            OpCase::Exp => x.exp(),
            OpCase::Tanh => x.tanh(),
            OpCase::Sigmoid => x.sigmoid(),
            OpCase::Softplus => x.softplus(),
            OpCase::Square => x.square(),
            OpCase::Recip => x.recip(),
            OpCase::Powi => x.powi(3).add(&x.powi(-2))?,
            OpCase::Relu => x.relu()?,
            OpCase::Add | OpCase::AddRow => x.add(&xs[1])?.square(),
            OpCase::Sub => x.sub(&xs[1])?.square(),
            OpCase::Mul | OpCase::MulRow => x.mul(&xs[1])?,
            OpCase::Div => x.div(&xs[1])?,
            OpCase::MatMul => x.matmul(&xs[1])?,
            OpCase::Sum => x.square().sum().square(),
            OpCase::Mean => x.cos().mean().square(),
            OpCase::ConcatCols => A::concat_cols(&[x.clone(), xs[1].square()])?,
            OpCase::CauchyBasis => x.cauchy_basis(&xs[1], &xs[2], &xs[3], &xs[4], &xs[5])?,
            OpCase::CauchyLaplacian => {
                x.cauchy_laplacian(&xs[1], &xs[2], &xs[3], &xs[4], &xs[5])?
            }
            OpCase::Composite => x
                .matmul(&xs[1])?
                .add(&xs[2])?
                .tanh()
                .matmul(&xs[3])?
                .add(&xs[4])?
                .sin(),
        };
        if out.shape().iter().product::<usize>() == 1 {
            return Ok(out.sum());
        }
        Ok(out.mul(&out.lift(weights.clone()))?.sum())
    }
}

fn away_from_zero(t: Tensor, margin: f64) -> Tensor {
    t.map(|v| if v >= 0.0 { v + margin } else { v - margin })
}

fn output_weights(case: OpCase, inputs: &[Tensor], rng: &mut SeedRng) -> Tensor {
    rng.uniform_tensor(&probe_shape(case, inputs), -1.0, 1.0)
}

/// Shape of the op output before reduction.
fn probe_shape(case: OpCase, inputs: &[Tensor]) -> Vec<usize> {
    let x = &inputs[0];
    match case {
        OpCase::MatMul => vec![x.rows(), inputs[1].cols()],
        OpCase::ConcatCols => vec![x.rows(), x.cols() + inputs[1].cols()],
        OpCase::CauchyBasis | OpCase::CauchyLaplacian | OpCase::Composite => vec![x.rows(), 1],
        OpCase::Sum | OpCase::Mean => vec![1],
        _ => x.shape().to_vec(),
    }
}

/// Worst relative error between reverse-mode and central-difference gradients
/// of `case` at one random draw.
pub fn reverse_error(case: OpCase, rng: &mut SeedRng, fault: Option<&'static str>) -> Result<f64> {
    let inputs = case.inputs(rng);
    let weights = output_weights(case, &inputs, rng);
    let g = Graph::new();
    if let Some(op) = fault {
        g.inject_fault(op);
    }
    let vars = g.params(&inputs);
    let loss = case.eval(&vars, &weights)?;
    let grads = g.backward(loss)?;
    let mut worst = 0.0f64;
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads.wrt(*v);
        for j in 0..inputs[i].len() {
            let fd = central_difference(&inputs, i, j, |xs| case.eval(xs, &weights)?.item())?;
            worst = worst.max(rel_err(analytic.data()[j], fd));
        }
    }
    Ok(worst)
}

fn central_difference(
    inputs: &[Tensor],
    i: usize,
    j: usize,
    f: impl Fn(&[Tensor]) -> Result<f64>,
) -> Result<f64> {
    let mut xs = inputs.to_vec();
    let x0 = inputs[i].data()[j];
    xs[i].data_mut()[j] = x0 + GRAD_STEP;
    let fp = f(&xs)?;
    xs[i].data_mut()[j] = x0 - GRAD_STEP;
    let fm = f(&xs)?;
    Ok((fp - fm) / (2.0 * GRAD_STEP))
}

/// Composite scalar functions of a `[1, 2]` point for the second-order suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Composite {
    SinExp,
    TanhLayer,
    Rational,
    SigmoidSoftplus,
    CauchyUnit,
    CauchyFused,
}

impl Composite {
    pub const ALL: [Composite; 6] = [
        Composite::SinExp,
        Composite::TanhLayer,
        Composite::Rational,
        Composite::SigmoidSoftplus,
        Composite::CauchyUnit,
        Composite::CauchyFused,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Composite::SinExp => "sin * exp",
            Composite::TanhLayer => "tanh layer",
            Composite::Rational => "rational",
            Composite::SigmoidSoftplus => "sigmoid + softplus",
            Composite::CauchyUnit => "one-unit Cauchy network",
            Composite::CauchyFused => "fused Cauchy sum",
        }
    }

    pub fn params(self, rng: &mut SeedRng) -> Vec<Tensor> {
        let mut u = |shape: &[usize]| rng.uniform_tensor(shape, -2.0, 2.0);
        match self {
            Composite::SinExp | Composite::Rational | Composite::SigmoidSoftplus => {
                vec![u(&[2, 1])]
            }
            Composite::TanhLayer => vec![u(&[2, 3]), u(&[1, 3]), u(&[3, 1])],
            Composite::CauchyUnit | Composite::CauchyFused => {
                let k = if self == Composite::CauchyUnit { 1 } else { 4 };
                let d = u(&[1, k]).map(|v| 0.5 + v.abs() / 2.0);
                vec![u(&[2, k]), u(&[1, k]), u(&[1, k]), u(&[1, k]), d]
            }
        }
    }

    pub fn eval<A: Array>(self, x: &A, params: &[Tensor]) -> Result<A> {
        let p: Vec<A> = params.iter().map(|t| x.lift(t.clone())).collect();
        let out = match self {
            Composite::SinExp => x.sin().sum().mul(&x.matmul(&p[0])?.exp())?,
            Composite::TanhLayer => x.matmul(&p[0])?.add(&p[1])?.tanh().matmul(&p[2])?,
            Composite::Rational => {
                let s = x.matmul(&p[0])?;
                s.square()
                    .add_scalar(1.0)
                    .recip()
                    .mul(&s.powi(3))?
                    .div(&s.square().add_scalar(2.0))?
            }
            Composite::SigmoidSoftplus => {
                let s = x.matmul(&p[0])?;
                s.sigmoid().add(&x.softplus().sum())?.mul(&x.cos().sum())?
            }
            Composite::CauchyUnit => cauchy_basis_elementary(x, &p[0], &p[1], &p[2], &p[3], &p[4])?,
            Composite::CauchyFused => x.cauchy_basis(&p[0], &p[1], &p[2], &p[3], &p[4])?,
        };
        Ok(out.sum())
    }
}

/// Relative error between the nested-dual `dir^T H dir` and the second
/// difference at one random point and direction.
pub fn second_order_error(case: Composite, rng: &mut SeedRng) -> Result<f64> {
    let params = case.params(rng);
    let x = rng.uniform_tensor(&[1, 2], -2.0, 2.0);
    let dir = rng.uniform_tensor(&[1, 2], -1.0, 1.0);
    let dual =
        second_directional(&x, &dir, |p: &Dual<Dual<Tensor>>| case.eval(p, &params))?.item()?;
    let at = |t: f64| -> Result<f64> {
        let shifted = x.zip_with(&dir, "axpy", |a, b| a + t * b)?;
        case.eval(&shifted, &params)?.item()
    };
    let h = SECOND_STEP;
    let fd = (at(h)? - 2.0 * at(0.0)? + at(-h)?) / (h * h);
    Ok(rel_err(dual, fd))
}

/// Relative error between the fused Laplacian kernel and the nested-dual
/// Laplacian of the elementary composition.
pub fn fused_laplacian_error(rng: &mut SeedRng) -> Result<f64> {
    let params = Composite::CauchyFused.params(rng);
    let x = rng.uniform_tensor(&[6, 2], -2.0, 2.0);
    let p = &params;
    let fused = x.cauchy_laplacian(&p[0], &p[1], &p[2], &p[3], &p[4])?;
    let nested = crate::autodiff::laplacian(&x, |xd| {
        let q: Vec<_> = p.iter().map(|t| xd.lift(t.clone())).collect();
        cauchy_basis_elementary(xd, &q[0], &q[1], &q[2], &q[3], &q[4])
    })?;
    Ok(fused
        .data()
        .iter()
        .zip(nested.data())
        .map(|(a, b)| rel_err(*a, *b))
        .fold(0.0, f64::max))
}

/// Runs every check over `seeds` random draws. `fault` negates the backward
/// rule of the named op, which must then show up as a failure.
pub fn run_all(seeds: u64, fault: Option<&'static str>) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for case in OpCase::ALL {
        let mut worst = 0.0f64;
        for seed in 0..seeds {
            let mut rng = SeedRng::new(seed);
            worst = worst.max(reverse_error(case, &mut rng, fault)?);
        }
        checks.push(Check {
            suite: "reverse",
            name: case.name(),
            max_err: worst,
            tol: GRAD_TOL,
        });
    }
    for case in Composite::ALL {
        let mut worst = 0.0f64;
        for seed in 0..seeds {
            let mut rng = SeedRng::new(seed);
            worst = worst.max(second_order_error(case, &mut rng)?);
        }
        checks.push(Check {
            suite: "second-order",
            name: case.name(),
            max_err: worst,
            tol: SECOND_TOL,
        });
    }
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        worst = worst.max(fused_laplacian_error(&mut SeedRng::new(seed))?);
    }
    checks.push(Check {
        suite: "second-order",
        name: "fused Laplacian vs nested duals",
        max_err: worst,
        tol: SECOND_TOL,
    });
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for c in run_all(5, None).unwrap() {
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn sin_fault_is_caught_by_name() {
        let failed: Vec<_> = run_all(2, Some("sin"))
            .unwrap()
            .into_iter()
            .filter(|c| !c.passed())
            .collect();
        assert!(failed.iter().any(|c| c.name == "sin"));
        assert!(failed
            .iter()
            .all(|c| c.name == "sin" || c.name == "5-parameter composite"));
    }
}

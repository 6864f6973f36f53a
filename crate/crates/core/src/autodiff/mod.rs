//! Automatic differentiation: a reverse-mode graph over tensors and nestable
//! forward-mode duals for derivatives with respect to inputs.

mod array;
mod dual;
pub mod gradcheck;
mod graph;
pub(crate) mod kernels;

pub use array::{cauchy_basis_elementary, Array};
pub use dual::Dual;
pub use graph::{sigmoid, softplus, Gradients, Graph, Var};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A scalar-valued function that can be evaluated on any [`Array`].
pub trait ScalarField {
    fn eval<A: Array>(&self, x: &A) -> Result<A>;
}

/// Seeds `x` with direction `dir` in both tangent slots of a nested dual.
pub fn seed_second<A: Array>(x: &A, dir: &A) -> Dual<Dual<A>> {
    Dual::variable(
        Dual::variable(x.clone(), dir.clone()),
        Dual::constant(dir.clone()),
    )
}

/// `dir^T H dir` for the function `f`, evaluated at `x` through nested duals.
pub fn second_directional<A: Array>(
    x: &A,
    dir: &A,
    f: impl FnOnce(&Dual<Dual<A>>) -> Result<Dual<Dual<A>>>,
) -> Result<A> {
    let out = f(&seed_second(x, dir))?;
    let zeros = out.re.re.lift(Tensor::zeros(&out.re.re.shape()));
    // A tangent that never met the primal can still have the broadcast row shape.
    match out.eps.and_then(|e| e.eps) {
        Some(v) => zeros.add(&v),
        None => Ok(zeros),
    }
}

/// Row-wise Laplacian of `f` at the rows of `x` (`[N, D]`), summing second
/// directional derivatives along each coordinate axis.
pub fn laplacian<A: Array>(
    x: &A,
    f: impl Fn(&Dual<Dual<A>>) -> Result<Dual<Dual<A>>>,
) -> Result<A> {
    let shape = x.shape();
    let dim = match shape.as_slice() {
        [_, d] => *d,
        _ => {
            return Err(Error::invalid(format!(
                "laplacian expects [N, D] input, got {shape:?}"
            )))
        }
    };
    let mut total: Option<A> = None;
    for axis in 0..dim {
        let mut e = vec![0.0; dim];
        e[axis] = 1.0;
        let dir = x.lift(Tensor::row(e));
        let term = second_directional(x, &dir, &f)?;
        total = Some(match total {
            Some(t) => t.add(&term)?,
            None => term,
        });
    }
    total.ok_or_else(|| Error::invalid("laplacian of zero-dimensional input"))
}

/// Directional derivative of `f` at `x` along `dir`: `grad f . dir` for
/// `order == 1`, `dir^T H dir` for `order == 2`.
pub fn directional_derivative<F: ScalarField + ?Sized>(
    f: &F,
    x: &Tensor,
    dir: &Tensor,
    order: u8,
) -> Result<f64> {
    if x.shape() != dir.shape() {
        return Err(Error::Shape {
            op: "directional_derivative",
            lhs: x.shape().to_vec(),
            rhs: dir.shape().to_vec(),
        });
    }
    let scalar = |t: Option<Tensor>| -> Result<f64> {
        match t {
            Some(t) => t.item(),
            None => Ok(0.0),
        }
    };
    match order {
        1 => {
            let out = f.eval(&Dual::variable(x.clone(), dir.clone()))?;
            scalar(out.eps)
        }
        2 => {
            let out = f.eval(&seed_second(x, dir))?;
            scalar(out.eps.and_then(|e| e.eps))
        }
        _ => Err(Error::invalid(format!(
            "derivative order must be 1 or 2, got {order}"
        ))),
    }
}

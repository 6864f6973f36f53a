//! The numeric interface shared by eager tensors, graph variables and duals.
//!
//! Models are written once against [`Array`] and then evaluated eagerly
//! ([`Tensor`]), recorded for reverse mode ([`Var`]), or pushed through
//! forward-mode [`Dual`] numbers (nested to get second derivatives).

use crate::autodiff::dual::Dual;
use crate::autodiff::graph::{check_cauchy_shapes, sigmoid, softplus, Var};
use crate::autodiff::kernels::{self, CauchyArgs};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub trait Array: Clone + Sized {
    fn shape(&self) -> Vec<usize>;

    /// Embeds a constant tensor in the same context as `self`.
    fn lift(&self, value: Tensor) -> Self;

    fn add(&self, other: &Self) -> Result<Self>;
    fn sub(&self, other: &Self) -> Result<Self>;
    fn mul(&self, other: &Self) -> Result<Self>;
    fn div(&self, other: &Self) -> Result<Self>;
    fn matmul(&self, other: &Self) -> Result<Self>;

    fn neg(&self) -> Self;
    fn scale(&self, c: f64) -> Self;
    fn add_scalar(&self, c: f64) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn tanh(&self) -> Self;
    fn sigmoid(&self) -> Self;
    fn softplus(&self) -> Self;
    fn square(&self) -> Self;
    fn recip(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn relu(&self) -> Result<Self>;

    fn sum(&self) -> Self;
    fn mean(&self) -> Self;
    fn concat_cols(parts: &[Self]) -> Result<Self>;

    /// `sum_k (l1_k z + l2_k) / (z^2 + d_k^2)` with `z = self . w + b`,
    /// returned as `[N, 1]`. Per-unit operands are `[1, K]` rows.
    ///
    /// The default composes elementary ops; tensors and graph variables
    /// override it with a fused kernel.
    fn cauchy_basis(&self, w: &Self, b: &Self, l1: &Self, l2: &Self, d: &Self) -> Result<Self> {
        cauchy_basis_elementary(self, w, b, l1, l2, d)
    }

    /// Input-space Laplacian of [`Array::cauchy_basis`], `[N, 1]`.
    ///
    /// The default sums nested-dual second directional derivatives along
    /// each coordinate axis.
    fn cauchy_laplacian(&self, w: &Self, b: &Self, l1: &Self, l2: &Self, d: &Self) -> Result<Self> {
        let lift = |v: &Self| Dual::constant(Dual::constant(v.clone()));
        let (w2, b2, l12, l22, d2) = (lift(w), lift(b), lift(l1), lift(l2), lift(d));
        crate::autodiff::laplacian(self, |x| {
            cauchy_basis_elementary(x, &w2, &b2, &l12, &l22, &d2)
        })
    }
}

/// Reference composition of [`Array::cauchy_basis`] from elementary ops.
pub fn cauchy_basis_elementary<A: Array>(x: &A, w: &A, b: &A, l1: &A, l2: &A, d: &A) -> Result<A> {
    let z = x.matmul(w)?.add(b)?;
    let u = z.square().add(&d.square())?.recip();
    let phi = z.mul(l1)?.add(l2)?.mul(&u)?;
    let k = w.shape().get(1).copied().unwrap_or(1);
    phi.matmul(&x.lift(Tensor::ones(&[k, 1])))
}

impl Array for Tensor {
    fn shape(&self) -> Vec<usize> {
        Tensor::shape(self).to_vec()
    }

    fn lift(&self, value: Tensor) -> Self {
        value
    }

    fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    fn div(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "div", |a, b| a / b)
    }

    fn matmul(&self, other: &Self) -> Result<Self> {
        Tensor::matmul(self, other)
    }

    fn neg(&self) -> Self {
        self.map(|v| -v)
    }

    fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    fn add_scalar(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    fn sin(&self) -> Self {
        self.map(f64::sin)
    }

    fn cos(&self) -> Self {
        self.map(f64::cos)
    }

    fn exp(&self) -> Self {
        self.map(f64::exp)
    }

    fn tanh(&self) -> Self {
        self.map(f64::tanh)
    }

    fn sigmoid(&self) -> Self {
        self.map(sigmoid)
    }

    fn softplus(&self) -> Self {
        self.map(softplus)
    }

    fn square(&self) -> Self {
        self.map(|v| v * v)
    }

    fn recip(&self) -> Self {
        self.map(|v| 1.0 / v)
    }

    fn powi(&self, n: i32) -> Self {
        self.map(|v| v.powi(n))
    }

    fn relu(&self) -> Result<Self> {
        Ok(self.map(|v| v.max(0.0)))
    }

    fn sum(&self) -> Self {
        Tensor::scalar(Tensor::sum(self))
    }

    fn mean(&self) -> Self {
        Tensor::scalar(Tensor::mean(self))
    }

    fn concat_cols(parts: &[Self]) -> Result<Self> {
        Tensor::concat_cols(parts)
    }

    fn cauchy_basis(&self, w: &Self, b: &Self, l1: &Self, l2: &Self, d: &Self) -> Result<Self> {
        check_cauchy_shapes(self, w, [b, l1, l2, d])?;
        Ok(kernels::cauchy_basis_forward(&CauchyArgs {
            x: self,
            w,
            b: b.data(),
            l1: l1.data(),
            l2: l2.data(),
            d: d.data(),
        }))
    }

    fn cauchy_laplacian(&self, w: &Self, b: &Self, l1: &Self, l2: &Self, d: &Self) -> Result<Self> {
        check_cauchy_shapes(self, w, [b, l1, l2, d])?;
        Ok(kernels::cauchy_laplacian_forward(&CauchyArgs {
            x: self,
            w,
            b: b.data(),
            l1: l1.data(),
            l2: l2.data(),
            d: d.data(),
        }))
    }
}

impl<'g> Array for Var<'g> {
    fn shape(&self) -> Vec<usize> {
        Var::shape(self)
    }

    fn lift(&self, value: Tensor) -> Self {
        self.graph().constant(value)
    }

    fn add(&self, other: &Self) -> Result<Self> {
        Var::add(self, other)
    }

    fn sub(&self, other: &Self) -> Result<Self> {
        Var::sub(self, other)
    }

    fn mul(&self, other: &Self) -> Result<Self> {
        Var::mul(self, other)
    }

    fn div(&self, other: &Self) -> Result<Self> {
        Var::div(self, other)
    }

    fn matmul(&self, other: &Self) -> Result<Self> {
        Var::matmul(self, other)
    }

    fn neg(&self) -> Self {
        Var::neg(self)
    }

    fn scale(&self, c: f64) -> Self {
        Var::scale(self, c)
    }

    fn add_scalar(&self, c: f64) -> Self {
        Var::add_scalar(self, c)
    }

    fn sin(&self) -> Self {
        Var::sin(self)
    }

    fn cos(&self) -> Self {
        Var::cos(self)
    }

    fn exp(&self) -> Self {
        Var::exp(self)
    }

    fn tanh(&self) -> Self {
        Var::tanh(self)
    }

    fn sigmoid(&self) -> Self {
        Var::sigmoid(self)
    }

    fn softplus(&self) -> Self {
        Var::softplus(self)
    }

    fn square(&self) -> Self {
        Var::square(self)
    }

    fn recip(&self) -> Self {
        Var::recip(self)
    }

    fn powi(&self, n: i32) -> Self {
        Var::powi(self, n)
    }

    fn relu(&self) -> Result<Self> {
        Ok(Var::relu(self))
    }

    fn sum(&self) -> Self {
        Var::sum(self)
    }

    fn mean(&self) -> Self {
        Var::mean(self)
    }

    fn concat_cols(parts: &[Self]) -> Result<Self> {
        Var::concat_cols(parts)
    }

    fn cauchy_basis(&self, w: &Self, b: &Self, l1: &Self, l2: &Self, d: &Self) -> Result<Self> {
        Var::cauchy_basis(self, w, b, l1, l2, d)
    }

    fn cauchy_laplacian(&self, w: &Self, b: &Self, l1: &Self, l2: &Self, d: &Self) -> Result<Self> {
        Var::cauchy_laplacian(self, w, b, l1, l2, d)
    }
}

impl<T: Array> Array for Dual<T> {
    fn shape(&self) -> Vec<usize> {
        self.re.shape()
    }

    fn lift(&self, value: Tensor) -> Self {
        Dual::constant(self.re.lift(value))
    }

    fn add(&self, other: &Self) -> Result<Self> {
        Ok(Dual::new(
            self.re.add(&other.re)?,
            opt_add(&self.eps, &other.eps)?,
        ))
    }

    fn sub(&self, other: &Self) -> Result<Self> {
        let eps = match (&self.eps, &other.eps) {
            (Some(a), Some(b)) => Some(a.sub(b)?),
            (Some(a), None) => Some(a.clone()),
            (None, Some(b)) => Some(b.neg()),
            (None, None) => None,
        };
        Ok(Dual::new(self.re.sub(&other.re)?, eps))
    }

    fn mul(&self, other: &Self) -> Result<Self> {
        let left = other.eps.as_ref().map(|e| self.re.mul(e)).transpose()?;
        let right = self.eps.as_ref().map(|e| e.mul(&other.re)).transpose()?;
        Ok(Dual::new(self.re.mul(&other.re)?, opt_add(&left, &right)?))
    }

    fn div(&self, other: &Self) -> Result<Self> {
        let q = self.re.div(&other.re)?;
        let num = match (&self.eps, &other.eps) {
            (Some(a), Some(b)) => Some(a.sub(&q.mul(b)?)?),
            (Some(a), None) => Some(a.clone()),
            (None, Some(b)) => Some(q.mul(b)?.neg()),
            (None, None) => None,
        };
        let eps = num.map(|n| n.div(&other.re)).transpose()?;
        Ok(Dual::new(q, eps))
    }

    fn matmul(&self, other: &Self) -> Result<Self> {
        let other_eps = other.full_eps()?;
        let left = other_eps.as_ref().map(|e| self.re.matmul(e)).transpose()?;
        let right = self.eps.as_ref().map(|e| e.matmul(&other.re)).transpose()?;
        Ok(Dual::new(
            self.re.matmul(&other.re)?,
            opt_add(&left, &right)?,
        ))
    }

    fn neg(&self) -> Self {
        Dual::new(self.re.neg(), self.eps.as_ref().map(T::neg))
    }

    fn scale(&self, c: f64) -> Self {
        Dual::new(self.re.scale(c), self.eps.as_ref().map(|e| e.scale(c)))
    }

    fn add_scalar(&self, c: f64) -> Self {
        Dual::new(self.re.add_scalar(c), self.eps.clone())
    }

    fn sin(&self) -> Self {
        self.chain(self.re.sin(), || self.re.cos())
    }

    fn cos(&self) -> Self {
        self.chain(self.re.cos(), || self.re.sin().neg())
    }

    fn exp(&self) -> Self {
        let y = self.re.exp();
        let dy = y.clone();
        self.chain(y, || dy)
    }

    fn tanh(&self) -> Self {
        let y = self.re.tanh();
        let dy = || y.square().neg().add_scalar(1.0);
        let eps = self.eps.as_ref().map(|e| dy().mul(e).expect("same shape"));
        Dual::new(y.clone(), eps)
    }

    fn sigmoid(&self) -> Self {
        let y = self.re.sigmoid();
        let eps = self.eps.as_ref().map(|e| {
            let dy = y.mul(&y.neg().add_scalar(1.0)).expect("same shape");
            dy.mul(e).expect("same shape")
        });
        Dual::new(y, eps)
    }

    fn softplus(&self) -> Self {
        self.chain(self.re.softplus(), || self.re.sigmoid())
    }

    fn square(&self) -> Self {
        self.chain(self.re.square(), || self.re.scale(2.0))
    }

    fn recip(&self) -> Self {
        let y = self.re.recip();
        let eps = self
            .eps
            .as_ref()
            .map(|e| y.square().neg().mul(e).expect("same shape"));
        Dual::new(y, eps)
    }

    fn powi(&self, n: i32) -> Self {
        let y = self.re.powi(n);
        let eps = match n {
            0 => None,
            1 => self.eps.clone(),
            _ => self.eps.as_ref().map(|e| {
                self.re
                    .powi(n - 1)
                    .scale(n as f64)
                    .mul(e)
                    .expect("same shape")
            }),
        };
        Dual::new(y, eps)
    }

    fn relu(&self) -> Result<Self> {
        Err(Error::Unsupported("relu"))
    }

    fn sum(&self) -> Self {
        let eps = self.eps.as_ref().map(|e| {
            let repeat = numel(&self.re.shape()) / numel(&e.shape());
            e.sum().scale(repeat as f64)
        });
        Dual::new(self.re.sum(), eps)
    }

    fn mean(&self) -> Self {
        Dual::new(self.re.mean(), self.eps.as_ref().map(T::mean))
    }

    fn concat_cols(parts: &[Self]) -> Result<Self> {
        let re: Vec<T> = parts.iter().map(|p| p.re.clone()).collect();
        let re = T::concat_cols(&re)?;
        if parts.iter().all(|p| p.eps.is_none()) {
            return Ok(Dual::constant(re));
        }
        let eps = parts
            .iter()
            .map(|p| match p.full_eps()? {
                Some(e) => Ok(e),
                None => Ok(p.re.lift(Tensor::zeros(&p.re.shape()))),
            })
            .collect::<Result<Vec<T>>>()?;
        Ok(Dual::new(re, Some(T::concat_cols(&eps)?)))
    }
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn opt_add<T: Array>(a: &Option<T>, b: &Option<T>) -> Result<Option<T>> {
    Ok(match (a, b) {
        (Some(a), Some(b)) => Some(a.add(b)?),
        (Some(a), None) => Some(a.clone()),
        (None, Some(b)) => Some(b.clone()),
        (None, None) => None,
    })
}

impl<T: Array> Dual<T> {
    /// `f(re) + eps f'(re)` for an elementwise `f` with derivative `df`.
    fn chain(&self, y: T, df: impl FnOnce() -> T) -> Self {
        let eps = self
            .eps
            .as_ref()
            .map(|e| df().mul(e).expect("tangent broadcasts against primal"));
        Dual::new(y, eps)
    }

    /// Tangent materialized at the primal's shape (tangents may be stored as
    /// a single broadcast row).
    fn full_eps(&self) -> Result<Option<T>> {
        match &self.eps {
            Some(e) if e.shape() != self.re.shape() => {
                Ok(Some(e.add(&self.re.lift(Tensor::zeros(&self.re.shape())))?))
            }
            other => Ok(other.clone()),
        }
    }
}

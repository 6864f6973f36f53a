//! Define-by-run reverse-mode differentiation.
//!
//! A [`Graph`] records every operation applied to its [`Var`] handles. Node ids
//! are assigned in creation order, so creation order is a valid topological
//! order and [`Graph::backward`] simply walks the ids in reverse.

use std::cell::{Cell, RefCell};
use std::rc::Rc;

use crate::autodiff::kernels::{self, CauchyArgs, CauchyGrads};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Scale(usize, f64),
    AddScalar(usize),
    Sin(usize),
    Cos(usize),
    Exp(usize),
    Tanh(usize),
    Sigmoid(usize),
    Softplus(usize),
    Square(usize),
    Recip(usize),
    Powi(usize, i32),
    Relu(usize),
    MatMul(usize, usize),
    Sum(usize),
    Mean(usize),
    ConcatCols(Vec<usize>),
    CauchyBasis([usize; 6]),
    CauchyLaplacian([usize; 6]),
}

impl Op {
    fn tag(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Neg(..) => "neg",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::Sin(..) => "sin",
            Op::Cos(..) => "cos",
            Op::Exp(..) => "exp",
            Op::Tanh(..) => "tanh",
            Op::Sigmoid(..) => "sigmoid",
            Op::Softplus(..) => "softplus",
            Op::Square(..) => "square",
            Op::Recip(..) => "recip",
            Op::Powi(..) => "powi",
            Op::Relu(..) => "relu",
            Op::MatMul(..) => "matmul",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
            Op::ConcatCols(..) => "concat_cols",
            Op::CauchyBasis(..) => "cauchy_basis",
            Op::CauchyLaplacian(..) => "cauchy_laplacian",
        }
    }
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Rc<Tensor>,
    requires_grad: bool,
}

/// Recorded computation. Rebuilt for every training step.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
    fault: Cell<Option<&'static str>>,
}

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy)]
pub struct Var<'g> {
    graph: &'g Graph,
    id: usize,
}

/// Parameter gradients produced by [`Graph::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `var`; zeros when the loss does
    /// not depend on it.
    pub fn wrt(&self, var: Var<'_>) -> Tensor {
        match &self.grads[var.id] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[var.id]),
        }
    }

    pub fn wrt_all(&self, vars: &[Var<'_>]) -> Vec<Tensor> {
        vars.iter().map(|v| self.wrt(*v)).collect()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Leaf that receives a gradient.
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push(Op::Leaf, value, true)
    }

    /// Leaf treated as a constant.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(Op::Leaf, value, false)
    }

    pub fn params(&self, values: &[Tensor]) -> Vec<Var<'_>> {
        values.iter().map(|t| self.param(t.clone())).collect()
    }

    /// Negates the backward rule of every op tagged `op`. Used to check that
    /// the gradient checker catches a broken derivative.
    #[doc(hidden)]
    pub fn inject_fault(&self, op: &'static str) {
        self.fault.set(Some(op));
    }

    fn push(&self, op: Op, value: Tensor, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            op,
            value: Rc::new(value),
            requires_grad,
        });
        Var {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    fn value(&self, id: usize) -> Rc<Tensor> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    fn requires(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    fn record(&self, op: Op, value: Tensor, inputs: &[usize]) -> Var<'_> {
        let requires = inputs.iter().any(|&i| self.requires(i));
        self.push(op, value, requires)
    }

    /// Reverse pass from a scalar `loss`. Does not mutate the graph, so
    /// repeated calls return identical gradients.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let loss_val = &nodes[loss.id].value;
        if loss_val.len() != 1 {
            return Err(Error::NonScalarLoss(loss_val.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.id + 1];
        grads[loss.id] = Some(Tensor::full(loss_val.shape(), 1.0));
        let fault = self.fault.get();

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                grads[id] = Some(g);
                continue;
            }
            let mut pending: Vec<(usize, Tensor)> = Vec::with_capacity(2);
            let mut send = |to: usize, t: Tensor| {
                if nodes[to].requires_grad {
                    pending.push((to, t));
                }
            };
            let val = |i: usize| -> &Tensor { &nodes[i].value };
            let out = &node.value;
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::Add(a, b) => {
                    send(*a, g.clone());
                    send(*b, g);
                }
                Op::Sub(a, b) => {
                    send(*a, g.clone());
                    send(*b, g.map(|v| -v));
                }
                Op::Mul(a, b) => {
                    send(*a, g.zip_with(val(*b), "mul", |x, y| x * y)?);
                    send(*b, g.zip_with(val(*a), "mul", |x, y| x * y)?);
                }
                Op::Div(a, b) => {
                    send(*a, g.zip_with(val(*b), "div", |x, y| x / y)?);
                    let q = out.zip_with(val(*b), "div", |x, y| x / y)?;
                    send(*b, g.zip_with(&q, "div", |x, y| -x * y)?);
                }
                Op::Neg(a) => send(*a, g.map(|v| -v)),
                Op::Scale(a, c) => send(*a, g.map(|v| v * c)),
                Op::AddScalar(a) => send(*a, g),
                Op::Sin(a) => send(*a, zip(&g, val(*a), |gv, x| gv * x.cos())),
                Op::Cos(a) => send(*a, zip(&g, val(*a), |gv, x| -gv * x.sin())),
                Op::Exp(a) => send(*a, zip(&g, out, |gv, y| gv * y)),
                Op::Tanh(a) => send(*a, zip(&g, out, |gv, y| gv * (1.0 - y * y))),
                Op::Sigmoid(a) => send(*a, zip(&g, out, |gv, y| gv * y * (1.0 - y))),
                Op::Softplus(a) => send(*a, zip(&g, val(*a), |gv, x| gv * sigmoid(x))),
                Op::Square(a) => send(*a, zip(&g, val(*a), |gv, x| 2.0 * gv * x)),
                Op::Recip(a) => send(*a, zip(&g, out, |gv, y| -gv * y * y)),
                Op::Powi(a, n) => {
                    let n = *n;
                    send(*a, zip(&g, val(*a), |gv, x| gv * n as f64 * x.powi(n - 1)))
                }
                Op::Relu(a) => send(*a, zip(&g, val(*a), |gv, x| if x > 0.0 { gv } else { 0.0 })),
                Op::MatMul(a, b) => {
                    let (va, vb) = (val(*a), val(*b));
                    let (m, k, n) = (va.rows(), va.cols(), vb.cols());
                    if nodes[*a].requires_grad {
                        let mut ga = vec![0.0; m * k];
                        crate::tensor::gemm(
                            m,
                            n,
                            k,
                            g.data(),
                            false,
                            vb.data(),
                            true,
                            &mut ga,
                            0.0,
                        );
                        send(*a, Tensor::from_parts(vec![m, k], ga));
                    }
                    if nodes[*b].requires_grad {
                        let mut gb = vec![0.0; k * n];
                        crate::tensor::gemm(
                            k,
                            m,
                            n,
                            va.data(),
                            true,
                            g.data(),
                            false,
                            &mut gb,
                            0.0,
                        );
                        send(*b, Tensor::from_parts(vec![k, n], gb));
                    }
                }
                Op::Sum(a) => send(*a, Tensor::full(val(*a).shape(), g.data()[0])),
                Op::Mean(a) => {
                    let va = val(*a);
                    send(*a, Tensor::full(va.shape(), g.data()[0] / va.len() as f64))
                }
                Op::ConcatCols(parts) => {
                    let rows = g.rows();
                    let width = g.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let c = val(p).cols();
                        let mut piece = Vec::with_capacity(rows * c);
                        for i in 0..rows {
                            piece.extend_from_slice(
                                &g.data()[i * width + offset..i * width + offset + c],
                            );
                        }
                        offset += c;
                        send(p, Tensor::from_parts(vec![rows, c], piece));
                    }
                }
                Op::CauchyBasis(ids) | Op::CauchyLaplacian(ids) => {
                    let args = CauchyArgs {
                        x: val(ids[0]),
                        w: val(ids[1]),
                        b: val(ids[2]).data(),
                        l1: val(ids[3]).data(),
                        l2: val(ids[4]).data(),
                        d: val(ids[5]).data(),
                    };
                    let needs = ids.map(|i| nodes[i].requires_grad);
                    let grads = if matches!(node.op, Op::CauchyBasis(_)) {
                        kernels::cauchy_basis_backward(&args, g.data(), needs)
                    } else {
                        kernels::cauchy_laplacian_backward(&args, g.data(), needs)
                    };
                    let CauchyGrads { x, w, b, l1, l2, d } = grads;
                    for (slot, part) in ids.iter().zip([x, w, b, l1, l2, d]) {
                        if let Some(data) = part {
                            let shape = val(*slot).shape().to_vec();
                            send(*slot, Tensor::from_parts(shape, data));
                        }
                    }
                }
            }
            let flip = fault == Some(node.op.tag());
            for (to, t) in pending {
                let t = t.reduce_to(nodes[to].value.shape());
                let t = if flip { t.map(|v| -v) } else { t };
                match &mut grads[to] {
                    Some(acc) => {
                        for (a, v) in acc.data_mut().iter_mut().zip(t.data()) {
                            *a += v;
                        }
                    }
                    slot => *slot = Some(t),
                }
            }
        }
        let shapes = nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        grads.resize(nodes.len(), None);
        // Only leaves keep their gradients.
        for (i, slot) in grads.iter_mut().enumerate() {
            if !matches!(nodes[i].op, Op::Leaf) {
                *slot = None;
            }
        }
        Ok(Gradients { grads, shapes })
    }
}

fn zip(g: &Tensor, x: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    debug_assert_eq!(g.len(), x.len());
    let data = g
        .data()
        .iter()
        .zip(x.data())
        .map(|(&a, &b)| f(a, b))
        .collect();
    Tensor::from_parts(x.shape().to_vec(), data)
}

/// Overflow-safe logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Overflow-safe `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

impl<'g> Var<'g> {
    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Rc<Tensor> {
        self.graph.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.graph.nodes.borrow()[self.id].value.shape().to_vec()
    }

    fn same_graph(&self, other: &Var<'g>) {
        assert!(
            std::ptr::eq(self.graph, other.graph),
            "variables from different graphs"
        );
    }

    fn binary(
        &self,
        other: &Var<'g>,
        op: fn(usize, usize) -> Op,
        tag: &'static str,
        f: fn(f64, f64) -> f64,
    ) -> Result<Var<'g>> {
        self.same_graph(other);
        let (a, b) = (self.value(), other.value());
        let out = a.zip_with(&b, tag, f)?;
        Ok(self
            .graph
            .record(op(self.id, other.id), out, &[self.id, other.id]))
    }

    fn unary(&self, op: Op, f: impl Fn(f64) -> f64) -> Var<'g> {
        let out = self.value().map(f);
        self.graph.record(op, out, &[self.id])
    }

    pub fn add(&self, other: &Var<'g>) -> Result<Var<'g>> {
        self.binary(other, Op::Add, "add", |x, y| x + y)
    }

    pub fn sub(&self, other: &Var<'g>) -> Result<Var<'g>> {
        self.binary(other, Op::Sub, "sub", |x, y| x - y)
    }

    pub fn mul(&self, other: &Var<'g>) -> Result<Var<'g>> {
        self.binary(other, Op::Mul, "mul", |x, y| x * y)
    }

    pub fn div(&self, other: &Var<'g>) -> Result<Var<'g>> {
        self.binary(other, Op::Div, "div", |x, y| x / y)
    }

    pub fn neg(&self) -> Var<'g> {
        self.unary(Op::Neg(self.id), |x| -x)
    }

    pub fn scale(&self, c: f64) -> Var<'g> {
        self.unary(Op::Scale(self.id, c), |x| c * x)
    }

    pub fn add_scalar(&self, c: f64) -> Var<'g> {
        self.unary(Op::AddScalar(self.id), |x| x + c)
    }

    pub fn sin(&self) -> Var<'g> {
        self.unary(Op::Sin(self.id), f64::sin)
    }

    pub fn cos(&self) -> Var<'g> {
        self.unary(Op::Cos(self.id), f64::cos)
    }

    pub fn exp(&self) -> Var<'g> {
        self.unary(Op::Exp(self.id), f64::exp)
    }

    pub fn tanh(&self) -> Var<'g> {
        self.unary(Op::Tanh(self.id), f64::tanh)
    }

    pub fn sigmoid(&self) -> Var<'g> {
        self.unary(Op::Sigmoid(self.id), sigmoid)
    }

    pub fn softplus(&self) -> Var<'g> {
        self.unary(Op::Softplus(self.id), softplus)
    }

    pub fn square(&self) -> Var<'g> {
        self.unary(Op::Square(self.id), |x| x * x)
    }

    pub fn recip(&self) -> Var<'g> {
        self.unary(Op::Recip(self.id), |x| 1.0 / x)
    }

    pub fn powi(&self, n: i32) -> Var<'g> {
        self.unary(Op::Powi(self.id, n), move |x| x.powi(n))
    }

    pub fn relu(&self) -> Var<'g> {
        self.unary(Op::Relu(self.id), |x| x.max(0.0))
    }

    pub fn matmul(&self, other: &Var<'g>) -> Result<Var<'g>> {
        self.same_graph(other);
        let out = self.value().matmul(&other.value())?;
        Ok(self
            .graph
            .record(Op::MatMul(self.id, other.id), out, &[self.id, other.id]))
    }

    pub fn sum(&self) -> Var<'g> {
        let s = self.value().sum();
        self.graph
            .record(Op::Sum(self.id), Tensor::scalar(s), &[self.id])
    }

    pub fn mean(&self) -> Var<'g> {
        let s = self.value().mean();
        self.graph
            .record(Op::Mean(self.id), Tensor::scalar(s), &[self.id])
    }

    pub fn concat_cols(parts: &[Var<'g>]) -> Result<Var<'g>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("concat_cols of zero tensors"))?;
        let values: Vec<Tensor> = parts.iter().map(|p| (*p.value()).clone()).collect();
        let out = Tensor::concat_cols(&values)?;
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        Ok(first.graph.record(Op::ConcatCols(ids.clone()), out, &ids))
    }

    fn fused(&self, rest: [&Var<'g>; 5], laplacian: bool) -> Result<Var<'g>> {
        let [w, b, l1, l2, d] = rest;
        let vals = [self, w, b, l1, l2, d].map(|v| v.value());
        check_cauchy_shapes(&vals[0], &vals[1], [&vals[2], &vals[3], &vals[4], &vals[5]])?;
        let args = CauchyArgs {
            x: &vals[0],
            w: &vals[1],
            b: vals[2].data(),
            l1: vals[3].data(),
            l2: vals[4].data(),
            d: vals[5].data(),
        };
        let ids = [self.id, w.id, b.id, l1.id, l2.id, d.id];
        let (op, out) = if laplacian {
            (
                Op::CauchyLaplacian(ids),
                kernels::cauchy_laplacian_forward(&args),
            )
        } else {
            (Op::CauchyBasis(ids), kernels::cauchy_basis_forward(&args))
        };
        Ok(self.graph.record(op, out, &ids))
    }

    /// Fused `sum_k (l1_k z + l2_k) / (z^2 + d_k^2)` with `z = self . w + b`.
    pub fn cauchy_basis(
        &self,
        w: &Var<'g>,
        b: &Var<'g>,
        l1: &Var<'g>,
        l2: &Var<'g>,
        d: &Var<'g>,
    ) -> Result<Var<'g>> {
        self.fused([w, b, l1, l2, d], false)
    }

    /// Fused input-space Laplacian of [`Var::cauchy_basis`].
    pub fn cauchy_laplacian(
        &self,
        w: &Var<'g>,
        b: &Var<'g>,
        l1: &Var<'g>,
        l2: &Var<'g>,
        d: &Var<'g>,
    ) -> Result<Var<'g>> {
        self.fused([w, b, l1, l2, d], true)
    }
}

/// Validates operands of the fused Cauchy kernels: `x` is `[N, D]`, `w` is
/// `[D, K]`, and the four per-unit vectors hold `K` entries each.
pub(crate) fn check_cauchy_shapes(x: &Tensor, w: &Tensor, units: [&Tensor; 4]) -> Result<()> {
    let bad = |lhs: &Tensor, rhs: &Tensor| Error::Shape {
        op: "cauchy_basis",
        lhs: lhs.shape().to_vec(),
        rhs: rhs.shape().to_vec(),
    };
    if x.shape().len() != 2 || w.shape().len() != 2 || x.cols() != w.rows() {
        return Err(bad(x, w));
    }
    let k = w.cols();
    for u in units {
        if u.len() != k {
            return Err(bad(w, u));
        }
    }
    Ok(())
}

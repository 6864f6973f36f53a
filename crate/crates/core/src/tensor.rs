//! Dense row-major `f64` arrays.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense n-dimensional array of `f64`, stored row-major.
///
/// `shape.iter().product() == data.len()` always holds. An empty shape is a
/// scalar with one element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// How a binary elementwise op lines up its operands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Broadcast {
    Same,
    /// Right operand has one element.
    ScalarRhs,
    /// Left operand has one element.
    ScalarLhs,
    /// Right operand is a single row repeated along the leading axis.
    RowRhs(usize),
    /// Left operand is a single row repeated along the leading axis.
    RowLhs(usize),
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn is_row_of(small: &[usize], big: &[usize]) -> bool {
    if big.is_empty() {
        return false;
    }
    let rest = &big[1..];
    small == rest || (small.len() == big.len() && small[0] == 1 && &small[1..] == rest)
}

/// Resolves leading-axis broadcasting between two shapes.
pub(crate) fn broadcast(
    op: &'static str,
    lhs: &[usize],
    rhs: &[usize],
) -> Result<(Vec<usize>, Broadcast)> {
    if lhs == rhs {
        return Ok((lhs.to_vec(), Broadcast::Same));
    }
    let (nl, nr) = (numel(lhs), numel(rhs));
    if nr == 1 && lhs.len() >= rhs.len() {
        return Ok((lhs.to_vec(), Broadcast::ScalarRhs));
    }
    if nl == 1 && rhs.len() >= lhs.len() {
        return Ok((rhs.to_vec(), Broadcast::ScalarLhs));
    }
    if is_row_of(rhs, lhs) {
        return Ok((lhs.to_vec(), Broadcast::RowRhs(nr)));
    }
    if is_row_of(lhs, rhs) {
        return Ok((rhs.to_vec(), Broadcast::RowLhs(nl)));
    }
    Err(Error::Shape {
        op,
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    })
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected = numel(&shape);
        if expected != data.len() {
            return Err(Error::Size {
                shape,
                expected,
                got: data.len(),
            });
        }
        Ok(Tensor { shape, data })
    }

    /// Like [`Tensor::new`] but also rejects NaN and infinities.
    pub fn checked(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Self::new(shape, data)
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(numel(&shape), data.len());
        Tensor { shape, data }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; numel(shape)],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    /// Column vector of shape `[n, 1]`.
    pub fn column(values: Vec<f64>) -> Self {
        Tensor {
            shape: vec![values.len(), 1],
            data: values,
        }
    }

    /// Row vector of shape `[1, n]`.
    pub fn row(values: Vec<f64>) -> Self {
        Tensor {
            shape: vec![1, values.len()],
            data: values,
        }
    }

    /// Builds a `[rows.len(), width]` matrix; every row must have `width` entries.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * width);
        for r in rows {
            if r.len() != width {
                return Err(Error::Shape {
                    op: "from_rows",
                    lhs: vec![width],
                    rhs: vec![r.len()],
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Tensor {
            shape: vec![rows.len(), width],
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Rows of a 2-D tensor (or the leading extent in general).
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    /// Product of all trailing extents.
    pub fn cols(&self) -> usize {
        if self.shape.is_empty() {
            1
        } else {
            self.shape[1..].iter().product()
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols() + col]
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// The single element of a one-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() == 1 {
            Ok(self.data[0])
        } else {
            Err(Error::NonScalarLoss(self.shape.clone()))
        }
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        if numel(&shape) != self.data.len() {
            return Err(Error::Size {
                expected: numel(&shape),
                shape,
                got: self.data.len(),
            });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise binary op with leading-axis broadcasting.
    pub fn zip_with(
        &self,
        other: &Tensor,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (shape, mode) = broadcast(op, &self.shape, &other.shape)?;
        Ok(Tensor::from_parts(
            shape,
            zip_data(&self.data, &other.data, mode, f),
        ))
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Matrix product of two 2-D tensors.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.dims2("matmul", other)?;
        let (k2, n) = other.dims2("matmul", self)?;
        if k != k2 {
            return Err(Error::Shape {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            &self.data,
            false,
            &other.data,
            false,
            &mut out,
            0.0,
        );
        Ok(Tensor::from_parts(vec![m, n], out))
    }

    pub fn transpose(&self) -> Result<Tensor> {
        let (m, n) = self.dims2("transpose", self)?;
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Ok(Tensor::from_parts(vec![n, m], out))
    }

    /// Column `j` of a 2-D tensor as a `[rows, 1]` tensor.
    pub fn column_at(&self, j: usize) -> Tensor {
        let c = self.cols();
        Tensor::column((0..self.rows()).map(|i| self.data[i * c + j]).collect())
    }

    /// Concatenates 2-D tensors with equal row counts along the column axis.
    pub fn concat_cols(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("concat_cols of zero tensors"))?;
        let rows = first.rows();
        for p in parts {
            if p.shape.len() != 2 || p.rows() != rows {
                return Err(Error::Shape {
                    op: "concat_cols",
                    lhs: first.shape.clone(),
                    rhs: p.shape.clone(),
                });
            }
        }
        let width: usize = parts.iter().map(Tensor::cols).sum();
        let mut data = Vec::with_capacity(rows * width);
        for i in 0..rows {
            for p in parts {
                let c = p.cols();
                data.extend_from_slice(&p.data[i * c..(i + 1) * c]);
            }
        }
        Ok(Tensor::from_parts(vec![rows, width], data))
    }

    /// Sums a broadcast result back down to `shape` (inverse of leading-axis broadcast).
    pub(crate) fn reduce_to(&self, shape: &[usize]) -> Tensor {
        if self.shape == shape {
            return self.clone();
        }
        let n = numel(shape);
        if n == 1 {
            return Tensor::from_parts(shape.to_vec(), vec![self.sum()]);
        }
        let mut out = vec![0.0; n];
        for chunk in self.data.chunks_exact(n) {
            for (o, v) in out.iter_mut().zip(chunk) {
                *o += v;
            }
        }
        Tensor::from_parts(shape.to_vec(), out)
    }

    fn dims2(&self, op: &'static str, other: &Tensor) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [m, n] => Ok((*m, *n)),
            _ => Err(Error::Shape {
                op,
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            }),
        }
    }
}

pub(crate) fn zip_data(
    a: &[f64],
    b: &[f64],
    mode: Broadcast,
    f: impl Fn(f64, f64) -> f64,
) -> Vec<f64> {
    match mode {
        Broadcast::Same => a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect(),
        Broadcast::ScalarRhs => {
            let y = b[0];
            a.iter().map(|&x| f(x, y)).collect()
        }
        Broadcast::ScalarLhs => {
            let x = a[0];
            b.iter().map(|&y| f(x, y)).collect()
        }
        Broadcast::RowRhs(n) => a
            .chunks_exact(n)
            .flat_map(|row| row.iter().zip(b).map(|(&x, &y)| f(x, y)))
            .collect(),
        Broadcast::RowLhs(n) => b
            .chunks_exact(n)
            .flat_map(|row| a.iter().zip(row).map(|(&x, &y)| f(x, y)))
            .collect(),
    }
}

/// `c = beta * c + op(a) * op(b)` for row-major buffers; `a` is `m x k`
/// (after the optional transpose), `b` is `k x n`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    c: &mut [f64],
    beta: f64,
) {
    if m == 0 || n == 0 {
        return;
    }
    // Row/column strides of the logical (post-transpose) operands.
    let (rsa, csa) = if a_t {
        (1, m as isize)
    } else {
        (k as isize, 1)
    };
    let (rsb, csb) = if b_t {
        (1, k as isize)
    } else {
        (n as isize, 1)
    };
    // SAFETY: the buffers hold at least m*k, k*n and m*n elements and the
    // strides above stay within them.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

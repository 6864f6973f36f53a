//! Fused kernels for sums of Cauchy units.
//!
//! Both kernels evaluate, for each row `x_n` of `x`,
//!
//! ```text
//! z_nk = x_n . w_k + b_k
//! phi(z) = (l1_k z + l2_k) / (z^2 + d_k^2)
//! ```
//!
//! and reduce over the unit axis `k`. `cauchy_basis` returns `sum_k phi(z_nk)`;
//! `cauchy_laplacian` returns the input-space Laplacian `sum_k |w_k|^2 phi''(z_nk)`.
//! Rows are processed in fixed-size blocks so the `[N, K]` pre-activation is
//! never materialized in full, and every reduction runs in a fixed order.

use crate::tensor::{gemm, Tensor};

const ROW_BLOCK: usize = 128;

/// Borrowed operands of a fused Cauchy kernel.
pub(crate) struct CauchyArgs<'a> {
    pub x: &'a Tensor,
    pub w: &'a Tensor,
    pub b: &'a [f64],
    pub l1: &'a [f64],
    pub l2: &'a [f64],
    pub d: &'a [f64],
}

/// Gradients of a fused kernel, one slot per operand in `CauchyArgs` order.
#[derive(Default)]
pub(crate) struct CauchyGrads {
    pub x: Option<Vec<f64>>,
    pub w: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub l1: Option<Vec<f64>>,
    pub l2: Option<Vec<f64>>,
    pub d: Option<Vec<f64>>,
}

impl CauchyArgs<'_> {
    fn dims(&self) -> (usize, usize, usize) {
        (self.x.rows(), self.x.cols(), self.w.cols())
    }

    /// `z = x[rows] . w + b` into `buf` (row-major, `rows.len() x K`).
    fn preactivation(&self, r0: usize, r1: usize, buf: &mut [f64]) {
        let (_, dim, k) = self.dims();
        let rows = r1 - r0;
        let xb = &self.x.data()[r0 * dim..r1 * dim];
        for row in buf[..rows * k].chunks_exact_mut(k) {
            row.copy_from_slice(self.b);
        }
        gemm(
            rows,
            dim,
            k,
            xb,
            false,
            self.w.data(),
            false,
            &mut buf[..rows * k],
            1.0,
        );
    }

    fn squared_norms(&self) -> Vec<f64> {
        let (_, dim, k) = self.dims();
        let w = self.w.data();
        (0..k)
            .map(|j| (0..dim).map(|e| w[e * k + j] * w[e * k + j]).sum())
            .collect()
    }
}

pub(crate) fn cauchy_basis_forward(a: &CauchyArgs) -> Tensor {
    let (n, _, k) = a.dims();
    let mut out = vec![0.0; n];
    let mut z = vec![0.0; ROW_BLOCK * k];
    for r0 in (0..n).step_by(ROW_BLOCK) {
        let r1 = (r0 + ROW_BLOCK).min(n);
        a.preactivation(r0, r1, &mut z);
        for (i, zrow) in z[..(r1 - r0) * k].chunks_exact(k).enumerate() {
            let mut acc = 0.0;
            for j in 0..k {
                let zz = zrow[j];
                acc += (a.l1[j] * zz + a.l2[j]) / (zz * zz + a.d[j] * a.d[j]);
            }
            out[r0 + i] = acc;
        }
    }
    Tensor::from_parts(vec![n, 1], out)
}

/// `needs` flags follow `CauchyArgs` order: x, w, b, l1, l2, d.
pub(crate) fn cauchy_basis_backward(a: &CauchyArgs, g: &[f64], needs: [bool; 6]) -> CauchyGrads {
    let (n, dim, k) = a.dims();
    let mut gx = needs[0].then(|| vec![0.0; n * dim]);
    let mut gw = needs[1].then(|| vec![0.0; dim * k]);
    let mut gb = vec![0.0; k];
    let mut gl1 = vec![0.0; k];
    let mut gl2 = vec![0.0; k];
    let mut gd = vec![0.0; k];
    let mut z = vec![0.0; ROW_BLOCK * k];
    for r0 in (0..n).step_by(ROW_BLOCK) {
        let r1 = (r0 + ROW_BLOCK).min(n);
        let rows = r1 - r0;
        a.preactivation(r0, r1, &mut z);
        // Overwrite z with dL/dz in place.
        for (i, zrow) in z[..rows * k].chunks_exact_mut(k).enumerate() {
            let gi = g[r0 + i];
            for j in 0..k {
                let zz = zrow[j];
                let d = a.d[j];
                let u = 1.0 / (zz * zz + d * d);
                let phi = (a.l1[j] * zz + a.l2[j]) * u;
                gl1[j] += gi * zz * u;
                gl2[j] += gi * u;
                gd[j] -= gi * 2.0 * d * phi * u;
                let dz = gi * u * (a.l1[j] - 2.0 * zz * phi);
                gb[j] += dz;
                zrow[j] = dz;
            }
        }
        let dz = &z[..rows * k];
        if let Some(gw) = gw.as_mut() {
            let xb = &a.x.data()[r0 * dim..r1 * dim];
            gemm(dim, rows, k, xb, true, dz, false, gw, 1.0);
        }
        if let Some(gx) = gx.as_mut() {
            gemm(
                rows,
                k,
                dim,
                dz,
                false,
                a.w.data(),
                true,
                &mut gx[r0 * dim..r1 * dim],
                0.0,
            );
        }
    }
    CauchyGrads {
        x: gx,
        w: gw,
        b: needs[2].then_some(gb),
        l1: needs[3].then_some(gl1),
        l2: needs[4].then_some(gl2),
        d: needs[5].then_some(gd),
    }
}

/// Second z-derivatives of the two Cauchy components `z u` and `u`,
/// `u = 1 / (z^2 + d^2)`.
#[inline(always)]
fn second_derivatives(z: f64, d: f64) -> (f64, f64, f64) {
    let z2 = z * z;
    let d2 = d * d;
    let u = 1.0 / (z2 + d2);
    let u3 = u * u * u;
    (
        2.0 * z * (z2 - 3.0 * d2) * u3,
        (6.0 * z2 - 2.0 * d2) * u3,
        u,
    )
}

pub(crate) fn cauchy_laplacian_forward(a: &CauchyArgs) -> Tensor {
    let (n, _, k) = a.dims();
    let s = a.squared_norms();
    let mut out = vec![0.0; n];
    let mut z = vec![0.0; ROW_BLOCK * k];
    for r0 in (0..n).step_by(ROW_BLOCK) {
        let r1 = (r0 + ROW_BLOCK).min(n);
        a.preactivation(r0, r1, &mut z);
        for (i, zrow) in z[..(r1 - r0) * k].chunks_exact(k).enumerate() {
            let mut acc = 0.0;
            for j in 0..k {
                let (a2, b2, _) = second_derivatives(zrow[j], a.d[j]);
                acc += s[j] * (a.l1[j] * a2 + a.l2[j] * b2);
            }
            out[r0 + i] = acc;
        }
    }
    Tensor::from_parts(vec![n, 1], out)
}

pub(crate) fn cauchy_laplacian_backward(
    a: &CauchyArgs,
    g: &[f64],
    needs: [bool; 6],
) -> CauchyGrads {
    let (n, dim, k) = a.dims();
    let s = a.squared_norms();
    let mut gx = needs[0].then(|| vec![0.0; n * dim]);
    let mut gw = needs[1].then(|| vec![0.0; dim * k]);
    let mut gb = vec![0.0; k];
    let mut gl1 = vec![0.0; k];
    let mut gl2 = vec![0.0; k];
    let mut gd = vec![0.0; k];
    // sum_n g_n phi''(z_nk), feeds the |w_k|^2 factor of the w gradient.
    let mut gs = vec![0.0; k];
    let mut z = vec![0.0; ROW_BLOCK * k];
    for r0 in (0..n).step_by(ROW_BLOCK) {
        let r1 = (r0 + ROW_BLOCK).min(n);
        let rows = r1 - r0;
        a.preactivation(r0, r1, &mut z);
        for (i, zrow) in z[..rows * k].chunks_exact_mut(k).enumerate() {
            let gi = g[r0 + i];
            for j in 0..k {
                let zz = zrow[j];
                let d = a.d[j];
                let (a2, b2, u) = second_derivatives(zz, d);
                let z2 = zz * zz;
                let d2 = d * d;
                let u4 = (u * u) * (u * u);
                let a3 = -6.0 * (z2 * z2 - 6.0 * z2 * d2 + d2 * d2) * u4;
                let b3 = 24.0 * zz * (d2 - z2) * u4;
                let da2 = d * b3;
                let db2 = 8.0 * d * (d2 - 5.0 * z2) * u4;
                let (l1, l2) = (a.l1[j], a.l2[j]);
                let gsj = gi * s[j];
                gl1[j] += gsj * a2;
                gl2[j] += gsj * b2;
                gd[j] += gsj * (l1 * da2 + l2 * db2);
                gs[j] += gi * (l1 * a2 + l2 * b2);
                let dz = gsj * (l1 * a3 + l2 * b3);
                gb[j] += dz;
                zrow[j] = dz;
            }
        }
        let dz = &z[..rows * k];
        if let Some(gw) = gw.as_mut() {
            let xb = &a.x.data()[r0 * dim..r1 * dim];
            gemm(dim, rows, k, xb, true, dz, false, gw, 1.0);
        }
        if let Some(gx) = gx.as_mut() {
            gemm(
                rows,
                k,
                dim,
                dz,
                false,
                a.w.data(),
                true,
                &mut gx[r0 * dim..r1 * dim],
                0.0,
            );
        }
    }
    if let Some(gw) = gw.as_mut() {
        let w = a.w.data();
        for e in 0..dim {
            for j in 0..k {
                gw[e * k + j] += 2.0 * w[e * k + j] * gs[j];
            }
        }
    }
    CauchyGrads {
        x: gx,
        w: gw,
        b: needs[2].then_some(gb),
        l1: needs[3].then_some(gl1),
        l2: needs[4].then_some(gl2),
        d: needs[5].then_some(gd),
    }
}

/// Design matrix of the per-unit linear coefficients, `[N, 2K + 1]`.
///
/// Columns are `z u` for each unit, then `u`, then a constant column, so that
/// `design . [l1, l2, c0]` reproduces `c0 + cauchy_basis`. With `laplacian`
/// set, unit columns hold `|w_k|^2` times the second z-derivatives instead and
/// the constant column is zero.
pub(crate) fn cauchy_design(a: &CauchyArgs, laplacian: bool) -> Tensor {
    let (n, _, k) = a.dims();
    let s = a.squared_norms();
    let width = 2 * k + 1;
    let mut out = vec![0.0; n * width];
    let mut z = vec![0.0; ROW_BLOCK * k];
    for r0 in (0..n).step_by(ROW_BLOCK) {
        let r1 = (r0 + ROW_BLOCK).min(n);
        a.preactivation(r0, r1, &mut z);
        for (i, zrow) in z[..(r1 - r0) * k].chunks_exact(k).enumerate() {
            let row = &mut out[(r0 + i) * width..(r0 + i + 1) * width];
            for j in 0..k {
                let zz = zrow[j];
                let d = a.d[j];
                if laplacian {
                    let (a2, b2, _) = second_derivatives(zz, d);
                    row[j] = s[j] * a2;
                    row[k + j] = s[j] * b2;
                } else {
                    let u = 1.0 / (zz * zz + d * d);
                    row[j] = zz * u;
                    row[k + j] = u;
                }
            }
            row[2 * k] = if laplacian { 0.0 } else { 1.0 };
        }
    }
    Tensor::from_parts(vec![n, width], out)
}

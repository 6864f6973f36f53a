//! Regularized linear least squares.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::tensor::{gemm, Tensor};

/// Minimizes `|phi beta - y|^2 + r |beta|^2` with `r = ridge * mean(diag(G))`,
/// where `G` is whichever Gram matrix is smaller. For `p <= n` the normal
/// equations are solved in the primal form; otherwise `beta = phi^T alpha`
/// with `(phi phi^T + r I) alpha = y`.
pub fn ridge_solve(phi: &Tensor, y: &[f64], ridge: f64) -> Result<Vec<f64>> {
    let (n, p) = match phi.shape() {
        [n, p] => (*n, *p),
        s => {
            return Err(Error::invalid(format!(
                "design matrix must be 2-D, got {s:?}"
            )))
        }
    };
    if y.len() != n {
        return Err(Error::Shape {
            op: "ridge_solve",
            lhs: phi.shape().to_vec(),
            rhs: vec![y.len()],
        });
    }
    if n == 0 || p == 0 {
        return Err(Error::invalid("least squares on an empty design matrix"));
    }
    let a = phi.data();
    if p <= n {
        let mut gram = vec![0.0; p * p];
        gemm(p, n, p, a, true, a, false, &mut gram, 0.0);
        let mut rhs = vec![0.0; p];
        gemm(p, n, 1, a, true, y, false, &mut rhs, 0.0);
        solve_spd(p, &mut gram, &rhs, ridge)
    } else {
        let mut gram = vec![0.0; n * n];
        gemm(n, p, n, a, false, a, true, &mut gram, 0.0);
        let alpha = solve_spd(n, &mut gram, y, ridge)?;
        let mut beta = vec![0.0; p];
        gemm(p, n, 1, a, true, &alpha, false, &mut beta, 0.0);
        Ok(beta)
    }
}

/// Solves `(G + r I) x = rhs` for a symmetric positive semi-definite `G`.
fn solve_spd(m: usize, gram: &mut [f64], rhs: &[f64], ridge: f64) -> Result<Vec<f64>> {
    let scale = (0..m).map(|i| gram[i * m + i]).sum::<f64>() / m as f64;
    let shift = ridge * scale.max(f64::MIN_POSITIVE);
    for i in 0..m {
        gram[i * m + i] += shift;
    }
    let g = Mat::from_fn(m, m, |i, j| gram[i * m + j]);
    let mut x = Mat::from_fn(m, 1, |i, _| rhs[i]);
    match g.llt(Side::Lower) {
        Ok(llt) => llt.solve_in_place(x.as_mut()),
        Err(_) => g.partial_piv_lu().solve_in_place(x.as_mut()),
    }
    let out: Vec<f64> = (0..m).map(|i| x[(i, 0)]).collect();
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::invalid(format!(
            "singular {m}x{m} least-squares system (ridge {ridge:e})"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_coefficients_overdetermined() {
        let phi = Tensor::from_rows(&[
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![1.0, 2.0],
            vec![1.0, 3.0],
        ])
        .unwrap();
        let y = [1.0, 3.0, 5.0, 7.0];
        let beta = ridge_solve(&phi, &y, 1e-14).unwrap();
        assert!(
            (beta[0] - 1.0).abs() < 1e-10 && (beta[1] - 2.0).abs() < 1e-10,
            "{beta:?}"
        );
    }

    #[test]
    fn underdetermined_interpolates() {
        let phi = Tensor::from_rows(&[vec![1.0, 2.0, 0.5], vec![0.0, 1.0, -1.0]]).unwrap();
        let y = [3.0, -1.0];
        let beta = ridge_solve(&phi, &y, 1e-12).unwrap();
        let fit = phi.matmul(&Tensor::column(beta)).unwrap();
        assert!((fit.data()[0] - 3.0).abs() < 1e-9 && (fit.data()[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_mismatched_target() {
        let phi = Tensor::zeros(&[3, 2]);
        assert!(ridge_solve(&phi, &[1.0], 1e-8).is_err());
    }
}

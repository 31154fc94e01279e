//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Condition number above which an information matrix is inverted through
/// the pseudo-inverse instead of a Cholesky solve.
pub const COND_LIMIT: f64 = 1e10;

/// Relative eigenvalue cutoff used by the pseudo-inverse.
pub const PINV_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSolve {
    pub value: f64,
    pub cond: f64,
    pub pseudo_inverse: bool,
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Ratio of largest to smallest absolute eigenvalue of a symmetric matrix.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    let eig = SymmetricEigen::new(symmetrize(a));
    cond_from(&eig.eigenvalues)
}

fn cond_from(ev: &DVector<f64>) -> f64 {
    let max = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = ev.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Pseudo-inverse built from the positive eigenvalues above
/// `PINV_RTOL * max|lambda|`; everything else is dropped.
pub fn positive_pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.nrows();
    if d == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(symmetrize(a));
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = DMatrix::zeros(d, d);
    if max == 0.0 {
        return out;
    }
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > PINV_RTOL * max {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) / lam;
        }
    }
    out
}

/// `tr(A^-1 B)` for the information pair of PIIC.
///
/// A must be symmetric positive definite; a singular or indefinite A is an
/// error reporting its condition number. A positive definite but badly
/// conditioned A is inverted through the pseudo-inverse and flagged.
pub fn trace_inv_product(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &'static str) -> Result<TraceSolve> {
    check_square(a, b)?;
    if a.nrows() == 0 {
        return Ok(TraceSolve { value: 0.0, cond: 1.0, pseudo_inverse: false });
    }
    let eig = SymmetricEigen::new(symmetrize(a));
    let cond = cond_from(&eig.eigenvalues);
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if !(min > 0.0) || !cond.is_finite() {
        return Err(Error::Singular { what, cond });
    }
    if cond > COND_LIMIT {
        let value = (positive_pinv(a) * b).trace();
        return Ok(TraceSolve { value, cond, pseudo_inverse: true });
    }
    let chol = symmetrize(a).cholesky().ok_or(Error::Singular { what, cond })?;
    let value = chol.solve(b).trace();
    Ok(TraceSolve { value, cond, pseudo_inverse: false })
}

/// `tr(A^+ B)` that never fails: singular, indefinite or badly conditioned A
/// falls back to the positive-part pseudo-inverse and is flagged.
pub fn trace_inv_product_lenient(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<TraceSolve> {
    check_square(a, b)?;
    if a.nrows() == 0 {
        return Ok(TraceSolve { value: 0.0, cond: 1.0, pseudo_inverse: false });
    }
    let eig = SymmetricEigen::new(symmetrize(a));
    let cond = cond_from(&eig.eigenvalues);
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if min > 0.0 && cond <= COND_LIMIT {
        if let Some(chol) = symmetrize(a).cholesky() {
            return Ok(TraceSolve { value: chol.solve(b).trace(), cond, pseudo_inverse: false });
        }
    }
    Ok(TraceSolve { value: (positive_pinv(a) * b).trace(), cond, pseudo_inverse: true })
}

fn check_square(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() || b.nrows() != b.ncols() || a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "trace of inverse product needs equal square matrices, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("information matrix entry".into()));
    }
    Ok(())
}

/// Numerically stable `log(1 + exp(x))`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log sum_s w_s exp(l_s)` with weights summing to one.
pub fn weighted_log_mean_exp(values: impl Iterator<Item = f64> + Clone, weights: Option<&[f64]>) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    let sum: f64 = match weights {
        Some(w) => values.zip(w).map(|(l, &w)| w * (l - max).exp()).sum(),
        None => {
            let mut count = 0usize;
            let s: f64 = values
                .map(|l| {
                    count += 1;
                    (l - max).exp()
                })
                .sum();
            s / count as f64
        }
    };
    max + sum.ln()
}

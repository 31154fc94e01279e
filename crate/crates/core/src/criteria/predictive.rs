//! Pointwise predictive quantities: `log E_w[f(z_i | theta)^a_i]`, posterior
//! moments of `log f(z_i | theta)`, WAIC and DIC.

use crate::error::{Error, Result};
use crate::inference::{Posterior, PosteriorForm, SampleSet};
use crate::linalg::weighted_log_mean_exp;
use crate::models::{dot, Dataset, LikelihoodModel};
use crate::par;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Moments of `log f(z_i | theta)` under the posterior for one row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowMoments {
    /// `log E[f(z_i | theta)]`.
    pub log_pred: f64,
    pub mean: f64,
    pub var: f64,
}

fn check(post: &Posterior, data: &Dataset) -> Result<()> {
    post.model.check_data(data)?;
    if post.p() != data.p() {
        return Err(Error::Dimension(format!("posterior has {} coefficients, data has {}", post.p(), data.p())));
    }
    Ok(())
}

/// Mean and variance of `x'theta` under a Gaussian posterior.
fn gaussian_eta(mean: &nalgebra::DVector<f64>, cov: &nalgebra::DMatrix<f64>, x: &[f64]) -> (f64, f64) {
    let p = x.len();
    let m = dot(mean.as_slice(), x);
    let mut v = 0.0;
    for j in 0..p {
        if x[j] == 0.0 {
            continue;
        }
        let row: f64 = (0..p).map(|k| cov[(j, k)] * x[k]).sum();
        v += x[j] * row;
    }
    (m, v.max(0.0))
}

fn sigma2_of(post: &Posterior) -> Result<f64> {
    match post.model {
        LikelihoodModel::LinearGaussian { sigma2 } => Ok(sigma2),
        LikelihoodModel::LogisticBinomial { .. } => {
            Err(Error::InvalidInput("Gaussian posterior form only arises for the linear-Gaussian model".into()))
        }
    }
}

/// `log E_w[exp(a * log f(z_i | theta))]` for a Gaussian posterior; `a = 1`
/// gives the predictive density `N(y; x'mu, sigma2 + x'Sigma x)`.
fn gaussian_powered_log_pred(sigma2: f64, y: f64, m: f64, v: f64, a: f64) -> f64 {
    let d = y - m;
    -0.5 * a * (LN_2PI + sigma2.ln()) - 0.5 * (1.0 + a * v / sigma2).ln() - a * d * d / (2.0 * (sigma2 + a * v))
}

/// Per-draw log-likelihoods for one row.
pub(crate) fn row_logliks(model: &LikelihoodModel, samples: &SampleSet, x: &[f64], y: f64) -> Vec<f64> {
    let c = model.log_normalizer(y);
    (0..samples.len()).map(|s| c + model.log_kernel(y, dot(samples.draw(s), x))).collect()
}

/// `log E_w[f(z_row | theta)^a]` where `a` is the row's likelihood exponent
/// (`None` means 1).
pub(crate) fn powered_log_pred(post: &Posterior, x: &[f64], y: f64, a: f64, row: usize) -> Result<f64> {
    let out = match &post.form {
        PosteriorForm::Gaussian { mean, cov } => {
            let (m, v) = gaussian_eta(mean, cov, x);
            gaussian_powered_log_pred(sigma2_of(post)?, y, m, v, a)
        }
        PosteriorForm::Samples(s) => {
            let ll = row_logliks(&post.model, s, x, y);
            let w = s.weights();
            weighted_log_mean_exp(ll.iter().map(|l| a * l), w.as_deref())
        }
    };
    if out == f64::NEG_INFINITY {
        return Err(Error::Underflow { row });
    }
    if !out.is_finite() {
        return Err(Error::NonFinite(format!("predictive log-density at row {row}")));
    }
    Ok(out)
}

/// `log f(z_row | z; xi) = log E_w[f(z_row | theta)]`.
pub fn predictive_logdens(post: &Posterior, data: &Dataset, row: usize) -> Result<f64> {
    check(post, data)?;
    if row >= data.n() {
        return Err(Error::Dimension(format!("row {row} out of range")));
    }
    powered_log_pred(post, data.row(row), data.y(row), 1.0, row)
}

/// Predictive log-densities for every row of `data`.
pub fn predictive_logdens_rows(post: &Posterior, data: &Dataset) -> Result<Vec<f64>> {
    powered_log_pred_rows(post, data, None)
}

pub(crate) fn powered_log_pred_rows(post: &Posterior, data: &Dataset, exponents: Option<&[f64]>) -> Result<Vec<f64>> {
    check(post, data)?;
    if let Some(e) = exponents {
        if e.len() != data.n() {
            return Err(Error::Dimension("one exponent per row required".into()));
        }
    }
    par::try_map_indices(data.n(), |i| {
        powered_log_pred(post, data.row(i), data.y(i), exponents.map_or(1.0, |e| e[i]), i)
    })
}

/// `sum_i log f(z_i | z; xi)`.
pub fn lppd(post: &Posterior, data: &Dataset) -> Result<f64> {
    Ok(predictive_logdens_rows(post, data)?.iter().sum())
}

/// Predictive density and posterior mean/variance of `log f(z_i | theta)` for every row.
pub fn row_moments(post: &Posterior, data: &Dataset) -> Result<Vec<RowMoments>> {
    check(post, data)?;
    match &post.form {
        PosteriorForm::Gaussian { mean, cov } => {
            let sigma2 = sigma2_of(post)?;
            Ok((0..data.n())
                .map(|i| {
                    let (m, v) = gaussian_eta(mean, cov, data.row(i));
                    let d = data.y(i) - m;
                    RowMoments {
                        log_pred: gaussian_powered_log_pred(sigma2, data.y(i), m, v, 1.0),
                        mean: -0.5 * (LN_2PI + sigma2.ln()) - (d * d + v) / (2.0 * sigma2),
                        var: (2.0 * d * d * v + v * v) / (2.0 * sigma2 * sigma2),
                    }
                })
                .collect())
        }
        PosteriorForm::Samples(s) => {
            let w = s.weights();
            par::try_map_indices(data.n(), |i| {
                let ll = row_logliks(&post.model, s, data.row(i), data.y(i));
                let log_pred = weighted_log_mean_exp(ll.iter().copied(), w.as_deref());
                if log_pred == f64::NEG_INFINITY {
                    return Err(Error::Underflow { row: i });
                }
                let (mean, var) = weighted_mean_var(&ll, w.as_deref());
                Ok(RowMoments { log_pred, mean, var })
            })
        }
    }
}

pub(crate) fn weighted_mean_var(v: &[f64], w: Option<&[f64]>) -> (f64, f64) {
    match w {
        Some(w) => {
            let mean: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
            let var: f64 = v.iter().zip(w).map(|(a, b)| b * (a - mean) * (a - mean)).sum();
            (mean, var)
        }
        None => {
            let k = v.len() as f64;
            let mean = v.iter().sum::<f64>() / k;
            let var = v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / k;
            (mean, var)
        }
    }
}

/// WAIC split into its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaicParts {
    pub lppd: f64,
    pub penalty: f64,
    pub value: f64,
}

pub fn waic_parts(post: &Posterior, data: &Dataset) -> Result<WaicParts> {
    let rows = row_moments(post, data)?;
    let lppd: f64 = rows.iter().map(|r| r.log_pred).sum();
    let penalty: f64 = rows.iter().map(|r| r.var).sum();
    let value = -lppd + penalty;
    if !value.is_finite() {
        return Err(Error::NonFinite("WAIC".into()));
    }
    Ok(WaicParts { lppd, penalty, value })
}

/// `-sum_i log E[f(z_i | theta)] + sum_i Var[log f(z_i | theta)]`.
pub fn waic(post: &Posterior, data: &Dataset) -> Result<f64> {
    Ok(waic_parts(post, data)?.value)
}

/// `sum_i log f(z_i | E[theta]) - 2 sum_i E[log f(z_i | theta)]`.
pub fn dic(post: &Posterior, data: &Dataset) -> Result<f64> {
    let rows = row_moments(post, data)?;
    let mean = post.mean();
    let plug_in: f64 = (0..data.n()).map(|i| post.model.log_density(data.y(i), dot(data.row(i), &mean))).sum();
    let value = plug_in - 2.0 * rows.iter().map(|r| r.mean).sum::<f64>();
    if !value.is_finite() {
        return Err(Error::NonFinite("DIC".into()));
    }
    Ok(value)
}

//! The Fisher-type pair `(I1, I2)` at the MAP point and PIIC.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::predictive::powered_log_pred_rows;
use crate::error::{Error, Result};
use crate::inference::{ActiveSet, Posterior};
use crate::linalg::{trace_inv_product, TraceSolve};
use crate::models::{dot, Dataset, LikelihoodModel, ParameterPoint, PriorSpec};

/// `I1 = -(1/n) sum_i d2 log g(z_i, theta_hat)` and
/// `I2 = (1/n) sum_i s_i s_i'` with `s_i = d log g(z_i, theta_hat)`, restricted
/// to the active coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherPair {
    pub i1: DMatrix<f64>,
    pub i2: DMatrix<f64>,
    pub active: ActiveSet,
}

/// Row weighting used by the inverse-probability-weighted variants. The
/// standard criteria use unit weights and a single treatment.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RowWeights<'a> {
    /// Exponent on `f(z_i | theta)` in the posterior and in `I1`.
    pub lik: Option<&'a [f64]>,
    /// Weight on `s_i s_i'` in `I2`.
    pub score: Option<&'a [f64]>,
    /// Number of treatment arms sharing the prior.
    pub treatments: usize,
}

impl RowWeights<'_> {
    pub const UNIT: RowWeights<'static> = RowWeights { lik: None, score: None, treatments: 1 };
}

pub fn fisher_pair(
    model: &LikelihoodModel,
    prior: &PriorSpec,
    data: &Dataset,
    theta_hat: &ParameterPoint,
    active: Option<&ActiveSet>,
) -> Result<FisherPair> {
    fisher_pair_weighted(model, prior, data, theta_hat, active, RowWeights::UNIT)
}

pub(crate) fn fisher_pair_weighted(
    model: &LikelihoodModel,
    prior: &PriorSpec,
    data: &Dataset,
    theta_hat: &ParameterPoint,
    active: Option<&ActiveSet>,
    weights: RowWeights<'_>,
) -> Result<FisherPair> {
    model.check_data(data)?;
    let theta = theta_hat.as_slice();
    let p = data.p();
    if theta.len() != p || prior.p() != p {
        return Err(Error::Dimension("MAP point, prior and data disagree on p".into()));
    }
    let active = match active {
        Some(a) => a.clone(),
        None => ActiveSet::all(p),
    };
    let (pg, ph) = prior.grad_hess_diag(theta, Some(&active))?;
    let idx = active.indices();
    let k = idx.len();
    let n = data.n() as f64;
    let c = prior.exponent(data.n());
    let share = 1.0 / (prior.n0 as f64 * weights.treatments as f64);
    let mut i1 = DMatrix::zeros(k, k);
    let mut i2 = DMatrix::zeros(k, k);
    let mut s = DVector::zeros(k);
    for i in 0..data.n() {
        let x = data.row(i);
        let (d1, d2) = model.eta_derivatives(data.y(i), dot(x, theta));
        let a = weights.lik.map_or(1.0, |w| w[i]);
        let b = weights.score.map_or(1.0, |w| w[i]);
        for (u, &j) in idx.iter().enumerate() {
            s[u] = d1 * x[j] + share * pg[j];
        }
        for u in 0..k {
            let xu = x[idx[u]];
            for v in 0..k {
                i1[(u, v)] -= a * d2 * xu * x[idx[v]];
                i2[(u, v)] += b * s[u] * s[v];
            }
        }
    }
    for (u, &j) in idx.iter().enumerate() {
        i1[(u, u)] -= c * ph[j];
    }
    i1 /= n;
    i2 /= n;
    if i1.iter().chain(i2.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("information matrix".into()));
    }
    Ok(FisherPair { i1, i2, active })
}

impl FisherPair {
    /// `tr(I1^-1 I2)`.
    pub fn penalty(&self) -> Result<TraceSolve> {
        trace_inv_product(&self.i1, &self.i2, "I1")
    }
}

/// `tr(I1^-1 I2)` over the active block of full `p x p` matrices; entries
/// outside the block are never read.
pub fn active_penalty(i1: &DMatrix<f64>, i2: &DMatrix<f64>, active: &ActiveSet) -> Result<TraceSolve> {
    let p = active.p();
    if i1.shape() != (p, p) || i2.shape() != (p, p) {
        return Err(Error::Dimension(format!("information matrices must be {p} x {p}")));
    }
    let idx = active.indices();
    let a = DMatrix::from_fn(idx.len(), idx.len(), |u, v| i1[(idx[u], idx[v])]);
    let b = DMatrix::from_fn(idx.len(), idx.len(), |u, v| i2[(idx[u], idx[v])]);
    trace_inv_product(&a, &b, "I1")
}

/// PIIC split into its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiicValue {
    pub value: f64,
    /// `sum_i log f(z_i | z; xi)` under the posterior passed in (restricted in
    /// the sparse case).
    pub lppd: f64,
    pub penalty: f64,
    pub cond: f64,
    pub pseudo_inverse: bool,
}

/// `-sum_i log f(z_i | z; xi) + tr(I1^-1 I2)`. Pass the restricted posterior
/// and the restricted pair for the sparse criterion.
pub fn piic(post: &Posterior, data: &Dataset, fisher: &FisherPair) -> Result<PiicValue> {
    piic_weighted(post, data, fisher, None)
}

pub(crate) fn piic_weighted(
    post: &Posterior,
    data: &Dataset,
    fisher: &FisherPair,
    exponents: Option<&[f64]>,
) -> Result<PiicValue> {
    let lppd: f64 = powered_log_pred_rows(post, data, exponents)?.iter().sum();
    let t = fisher.penalty()?;
    let value = -lppd + t.value;
    if !value.is_finite() {
        return Err(Error::NonFinite("PIIC".into()));
    }
    Ok(PiicValue { value, lppd, penalty: t.value, cond: t.cond, pseudo_inverse: t.pseudo_inverse })
}

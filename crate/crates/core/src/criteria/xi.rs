//! Derivatives of the predictive density with respect to the prior
//! hyperparameters, the pair `(J1, J2)` and PIIC2.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::fisher::{PiicValue, RowWeights};
use super::predictive::{powered_log_pred, row_logliks};
use crate::error::{invalid, Error, Result};
use crate::inference::{conjugate_posterior_weighted, Posterior, PosteriorForm, SampleSet};
use crate::linalg::{symmetrize, trace_inv_product_lenient, TraceSolve};
use crate::models::{dot, Dataset, LikelihoodModel, PriorFamily};
use crate::par;

/// Finite-difference step for hyperparameter `xi`: `rel * (1 + |xi|)`, capped
/// at `xi / 2` so that `xi - h` stays inside the parameter space.
pub fn fd_step(xi: f64, rel: f64) -> f64 {
    (rel * (1.0 + xi.abs())).min(0.5 * xi)
}

/// Relative step used for the finite differences behind `J1`.
pub const J1_REL_STEP: f64 = 1e-3;

/// `d log f(z_row | z; xi) / d xi` (one entry per group).
///
/// Sample-based posteriors use the covariance identity
/// `E_w[f_i (u - E_w u)] / E_w[f_i]` with `u = (n/n0) d log pi / d xi`;
/// closed-form posteriors are differentiated analytically.
pub fn xi_score(post: &Posterior, data: &Dataset, row: usize) -> Result<Vec<f64>> {
    if row >= data.n() {
        return Err(Error::Dimension(format!("row {row} out of range")));
    }
    Ok(xi_scores_impl(post, data, Some(row))?.remove(0))
}

/// [`xi_score`] for every row.
pub fn xi_scores(post: &Posterior, data: &Dataset) -> Result<Vec<Vec<f64>>> {
    xi_scores_impl(post, data, None)
}

fn xi_scores_impl(post: &Posterior, data: &Dataset, only: Option<usize>) -> Result<Vec<Vec<f64>>> {
    post.model.check_data(data)?;
    if post.p() != data.p() {
        return Err(Error::Dimension("posterior and data disagree on p".into()));
    }
    let rows: Vec<usize> = match only {
        Some(r) => vec![r],
        None => (0..data.n()).collect(),
    };
    let q = post.prior.q();
    if post.prior.family == PriorFamily::Flat {
        return Ok(vec![vec![0.0; q]; rows.len()]);
    }
    match &post.form {
        PosteriorForm::Gaussian { mean, cov } => {
            let LikelihoodModel::LinearGaussian { sigma2 } = post.model else {
                return invalid("Gaussian posterior form needs the linear-Gaussian model");
            };
            let prior = &post.prior;
            let c = prior.exponent(data.n());
            let p = data.p();
            Ok(par::map_indices(rows.len(), |r| {
                let i = rows[r];
                let x = data.row(i);
                // a = Sigma x; d mu / d zeta_g = (c / zeta_g^2) Sigma E_g mu and
                // d (x'Sigma x) / d zeta_g = (c / zeta_g^2) sum_{j in g} a_j^2.
                let a: Vec<f64> = (0..p).map(|j| (0..p).map(|k| cov[(j, k)] * x[k]).sum()).collect();
                let m = dot(mean.as_slice(), x);
                let v: f64 = dot(&a, x).max(0.0);
                let s2 = sigma2 + v;
                let resid = data.y(i) - m;
                let mut out = vec![0.0; q];
                let mut dm = vec![0.0; q];
                let mut dv = vec![0.0; q];
                for j in 0..p {
                    let g = prior.groups[j];
                    let f = c / (prior.xi[g] * prior.xi[g]);
                    dm[g] += f * a[j] * mean[j];
                    dv[g] += f * a[j] * a[j];
                }
                for g in 0..q {
                    out[g] = -0.5 * dv[g] / s2 + resid * dm[g] / s2 + resid * resid * dv[g] / (2.0 * s2 * s2);
                }
                out
            }))
        }
        PosteriorForm::Samples(s) => {
            let c = post.prior.exponent(data.n());
            let u: Vec<Vec<f64>> =
                (0..s.len()).map(|k| post.prior.xi_gradient(s.draw(k)).into_iter().map(|v| c * v).collect()).collect();
            let w = s.weights();
            let ubar = weighted_vec_mean(&u, w.as_deref(), q);
            par::try_map_indices(rows.len(), |r| {
                let i = rows[r];
                let ll = row_logliks(&post.model, s, data.row(i), data.y(i));
                let max = ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if !max.is_finite() {
                    return Err(Error::Underflow { row: i });
                }
                let mut num = vec![0.0; q];
                let mut den = 0.0;
                for (k, l) in ll.iter().enumerate() {
                    let om = w.as_ref().map_or(1.0, |w| w[k]) * (l - max).exp();
                    den += om;
                    for g in 0..q {
                        num[g] += om * (u[k][g] - ubar[g]);
                    }
                }
                Ok(num.into_iter().map(|v| v / den).collect())
            })
        }
    }
}

fn weighted_vec_mean(u: &[Vec<f64>], w: Option<&[f64]>, q: usize) -> Vec<f64> {
    let mut out = vec![0.0; q];
    for (k, uk) in u.iter().enumerate() {
        let wk = w.map_or(1.0, |w| w[k]);
        for g in 0..q {
            out[g] += wk * uk[g];
        }
    }
    if w.is_none() {
        out.iter_mut().for_each(|v| *v /= u.len() as f64);
    }
    out
}

/// The same posterior target at hyperparameters `xi`.
///
/// Closed-form posteriors are recomputed. Sample-based posteriors are
/// importance-reweighted by `pi(theta; xi')^(n/n0) / pi(theta; xi)^(n/n0)`,
/// which targets the perturbed posterior exactly with the same draws.
pub fn perturb_posterior(post: &Posterior, data: &Dataset, xi: &[f64]) -> Result<Posterior> {
    let prior = post.prior.with_xi(xi)?;
    match &post.form {
        PosteriorForm::Gaussian { .. } => {
            conjugate_posterior_weighted(&post.model, &prior, data, post.lik_weights.as_deref(), post.active.as_ref())
        }
        PosteriorForm::Samples(s) => {
            let c = prior.exponent(data.n());
            let extra = (0..s.len())
                .map(|k| {
                    let t = s.draw(k);
                    Ok(c * (prior.log_density(t)? - post.prior.log_density(t)?))
                })
                .collect::<Result<Vec<f64>>>()?;
            let reweighted: SampleSet = s.reweighted(&extra)?;
            Ok(Posterior { form: PosteriorForm::Samples(reweighted), prior, ..post.clone() })
        }
    }
}

/// Central finite differences of `log f(z_row | z; xi)` over `xi`, using
/// `factory` to build the posterior at each perturbed `xi`.
pub fn xi_score_fd_with<F>(factory: F, xi: &[f64], data: &Dataset, row: usize, rel_step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Posterior>,
{
    let mut out = Vec::with_capacity(xi.len());
    for k in 0..xi.len() {
        let h = rel_step * xi[k];
        let mut up = xi.to_vec();
        let mut dn = xi.to_vec();
        up[k] += h;
        dn[k] -= h;
        let fp = factory(&up)?;
        let fm = factory(&dn)?;
        let lp = powered_log_pred(&fp, data.row(row), data.y(row), 1.0, row)?;
        let lm = powered_log_pred(&fm, data.row(row), data.y(row), 1.0, row)?;
        out.push((lp - lm) / (2.0 * h));
    }
    Ok(out)
}

/// [`xi_score_fd_with`] using [`perturb_posterior`] as the factory.
pub fn xi_score_fd(post: &Posterior, data: &Dataset, row: usize, rel_step: f64) -> Result<Vec<f64>> {
    xi_score_fd_with(|xi| perturb_posterior(post, data, xi), &post.prior.xi, data, row, rel_step)
}

/// `J1 = -(1/n) sum_i d2 log f(z_i | z; xi) / d xi d xi'` and
/// `J2 = (1/n) sum_i s_i s_i'` at the selected `xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct JPair {
    pub j1: DMatrix<f64>,
    pub j2: DMatrix<f64>,
    pub steps: Vec<f64>,
}

impl JPair {
    /// `tr(J1^+ J2)`; falls back to the pseudo-inverse when `J1` is singular,
    /// indefinite or badly conditioned.
    pub fn penalty(&self) -> Result<TraceSolve> {
        trace_inv_product_lenient(&self.j1, &self.j2)
    }
}

/// `(J1, J2)` for the posterior at the selected hyperparameters.
pub fn j_pair(post: &Posterior, data: &Dataset) -> Result<JPair> {
    j_pair_weighted(post, data, RowWeights::UNIT)
}

pub(crate) fn j_pair_weighted(post: &Posterior, data: &Dataset, weights: RowWeights<'_>) -> Result<JPair> {
    let q = post.prior.q();
    let n = data.n() as f64;
    let xi = post.prior.xi.clone();
    let base = xi_scores(post, data)?;
    let mut j2 = DMatrix::zeros(q, q);
    for (i, s) in base.iter().enumerate() {
        let b = weights.score.map_or(1.0, |w| w[i]);
        for u in 0..q {
            for v in 0..q {
                j2[(u, v)] += b * s[u] * s[v];
            }
        }
    }
    j2 /= n;
    let steps: Vec<f64> = xi.iter().map(|&x| fd_step(x, J1_REL_STEP)).collect();
    let mut j1 = DMatrix::zeros(q, q);
    for k in 0..q {
        let mut up = xi.clone();
        let mut dn = xi.clone();
        up[k] += steps[k];
        dn[k] -= steps[k];
        let sp = xi_scores(&perturb_posterior(post, data, &up)?, data)?;
        let sm = xi_scores(&perturb_posterior(post, data, &dn)?, data)?;
        for i in 0..data.n() {
            let a = weights.lik.map_or(1.0, |w| w[i]);
            for u in 0..q {
                j1[(u, k)] -= a * (sp[i][u] - sm[i][u]) / (2.0 * steps[k]);
            }
        }
    }
    j1 /= n;
    let j1 = symmetrize(&j1);
    if j1.iter().chain(j2.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("J pair".into()));
    }
    Ok(JPair { j1, j2, steps })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piic2Value {
    pub value: f64,
    pub penalty_xi: f64,
    pub pseudo_inverse: bool,
}

/// `PIIC(xi_hat) + tr(J1^-1 J2)`.
pub fn piic2(piic: &PiicValue, jpair: &JPair) -> Result<Piic2Value> {
    let t = jpair.penalty()?;
    let value = piic.value + t.value;
    if !value.is_finite() {
        return Err(Error::NonFinite("PIIC2".into()));
    }
    Ok(Piic2Value { value, penalty_xi: t.value, pseudo_inverse: t.pseudo_inverse })
}

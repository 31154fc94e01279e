//! Marginal structural models fitted by inverse probability weighting.
//!
//! Treatment `h` has outcome model `f(y | theta^(h))` with its own block of
//! coefficients, `theta^(h) = theta[h*k..(h+1)*k]`, acting on an outcome
//! design `w_i` (an intercept by default). Internally the problem becomes a
//! weighted regression on the block-expanded design: row `i` carries `w_i`
//! in the block of its observed treatment and zeros elsewhere, with
//! likelihood exponent `a_i = 1 / e^(t_i)(x_i)` and score weight
//! `b_i = 1 / e^(t_i)(x_i)^2`. With one treatment and unit propensities every
//! operation runs the same code as its standard counterpart with unit
//! weights, so the results agree bit for bit.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::criteria::{
    fisher_pair_weighted, j_pair_weighted, piic2, piic_weighted, powered_log_pred_rows, FisherPair, JPair, Piic2Value,
    PiicValue, RowWeights,
};
use crate::error::{invalid, Error, Result};
use crate::inference::{
    map_fit_weighted, posterior_at_weighted, restricted_posterior_weighted, ActiveSet, Posterior, SamplerConfig,
};
use crate::linalg::sigmoid;
use crate::models::{Dataset, LikelihoodModel, ParameterPoint, PriorFamily, PriorSpec, ResponseKind};
use crate::rng::rng_for;

/// Lower bound applied to propensity values.
pub const PROPENSITY_FLOOR: f64 = 0.01;

/// Multinomial-logit propensity model: `e^(h)(x) = softmax_h(c_h0 + c_h' x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityTable {
    /// One row per treatment: intercept followed by one slope per confounder.
    pub coef: Vec<Vec<f64>>,
}

impl PropensityTable {
    /// Assignment probabilities that do not depend on the confounders.
    pub fn constant(probs: &[f64], s: usize) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
            return invalid("constant propensities must lie in (0, 1]");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return invalid(format!("constant propensities sum to {total}, not 1"));
        }
        Ok(PropensityTable {
            coef: probs.iter().map(|p| std::iter::once(p.ln()).chain(std::iter::repeat_n(0.0, s)).collect()).collect(),
        })
    }

    pub fn treatments(&self) -> usize {
        self.coef.len()
    }

    fn validate(&self, h: usize, s: usize) -> Result<()> {
        if self.coef.len() != h || self.coef.iter().any(|c| c.len() != s + 1) {
            return Err(Error::Dimension(format!("propensity table must be {h} x {}", s + 1)));
        }
        if self.coef.iter().flatten().any(|v| !v.is_finite()) {
            return invalid("propensity coefficients must be finite");
        }
        Ok(())
    }

    /// Unclipped probabilities for every treatment.
    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let eta: Vec<f64> =
            self.coef.iter().map(|c| c[0] + c[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).collect();
        let max = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = eta.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = e.iter().sum();
        e.into_iter().map(|v| v / total).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PropensitySpec {
    Known {
        table: PropensityTable,
    },
    /// Multinomial-logistic maximum likelihood on the assignments.
    Fitted,
}

/// Observed treatments, outcomes and confounders for a marginal structural model.
#[derive(Debug, Clone)]
pub struct MsmDataset {
    treatment: Vec<usize>,
    y: Vec<f64>,
    x: Vec<f64>,
    s: usize,
    h: usize,
    k: usize,
    design: Vec<f64>,
    response: ResponseKind,
    table: PropensityTable,
    fitted: bool,
    expanded: Dataset,
    lik_weights: Vec<f64>,
    score_weights: Vec<f64>,
    clipped: usize,
}

impl MsmDataset {
    /// `treatment[i]` is the 0-based observed treatment; `x` holds `s`
    /// confounders per row (row-major); `design` holds `k` outcome-design
    /// values per row, or `None` for an intercept-only model.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        treatment: Vec<usize>,
        y: Vec<f64>,
        x: Vec<f64>,
        s: usize,
        h: usize,
        design: Option<(Vec<f64>, usize)>,
        response: ResponseKind,
        propensity: PropensitySpec,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 || h == 0 {
            return invalid("MSM dataset needs rows and at least one treatment");
        }
        if treatment.len() != n || x.len() != n * s {
            return Err(Error::Dimension("treatment, outcome and confounder rows disagree".into()));
        }
        if let Some(&t) = treatment.iter().find(|&&t| t >= h) {
            return invalid(format!("treatment label {t} outside 0..{h}"));
        }
        for hh in 0..h {
            if !treatment.contains(&hh) {
                return Err(Error::TreatmentUnobserved(hh));
            }
        }
        let (design, k) = design.unwrap_or_else(|| (vec![1.0; n], 1));
        if k == 0 || design.len() != n * k {
            return Err(Error::Dimension("outcome design must have k > 0 values per row".into()));
        }
        let (table, fitted) = match propensity {
            PropensitySpec::Known { table } => (table, false),
            PropensitySpec::Fitted => (fit_propensity(&treatment, &x, s, h)?, true),
        };
        table.validate(h, s)?;
        let p = h * k;
        let mut xe = vec![0.0; n * p];
        for i in 0..n {
            let t = treatment[i];
            xe[i * p + t * k..i * p + (t + 1) * k].copy_from_slice(&design[i * k..(i + 1) * k]);
        }
        let expanded = Dataset::from_row_major(n, p, xe, y.clone(), response)?;
        let clip = AtomicUsize::new(0);
        let mut lik_weights = Vec::with_capacity(n);
        let mut score_weights = Vec::with_capacity(n);
        for i in 0..n {
            let e = clipped_propensity(&table, &x[i * s..(i + 1) * s], treatment[i], &clip);
            lik_weights.push(1.0 / e);
            score_weights.push(1.0 / (e * e));
        }
        Ok(MsmDataset {
            treatment,
            y,
            x,
            s,
            h,
            k,
            design,
            response,
            table,
            fitted,
            expanded,
            lik_weights,
            score_weights,
            clipped: clip.into_inner(),
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn treatments(&self) -> usize {
        self.h
    }

    pub fn block_size(&self) -> usize {
        self.k
    }

    pub fn confounders(&self, i: usize) -> &[f64] {
        &self.x[i * self.s..(i + 1) * self.s]
    }

    pub fn treatment(&self, i: usize) -> usize {
        self.treatment[i]
    }

    pub fn outcome_design(&self, i: usize) -> &[f64] {
        &self.design[i * self.k..(i + 1) * self.k]
    }

    pub fn response(&self) -> ResponseKind {
        self.response
    }

    pub fn propensity_table(&self) -> &PropensityTable {
        &self.table
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted
    }

    /// Block-expanded regression dataset over all `H * k` coefficients.
    pub fn expanded(&self) -> &Dataset {
        &self.expanded
    }

    /// `t_i / e^(t_i)(x_i)` for every row.
    pub fn lik_weights(&self) -> &[f64] {
        &self.lik_weights
    }

    /// `t_i / e^(t_i)(x_i)^2` for every row.
    pub fn score_weights(&self) -> &[f64] {
        &self.score_weights
    }

    /// Number of observed-treatment propensities raised to the floor.
    pub fn clipped_count(&self) -> usize {
        self.clipped
    }

    /// `t_i^(h) / e^(h)(x_i)`: zero for treatments not received.
    pub fn ipw_weight(&self, row: usize, h: usize) -> f64 {
        if self.treatment[row] == h {
            self.lik_weights[row]
        } else {
            0.0
        }
    }

    pub(crate) fn row_weights(&self) -> RowWeights<'_> {
        RowWeights { lik: Some(&self.lik_weights), score: Some(&self.score_weights), treatments: self.h }
    }
}

fn clipped_propensity(table: &PropensityTable, x: &[f64], h: usize, clip: &AtomicUsize) -> f64 {
    let e = table.probabilities(x)[h];
    if e < PROPENSITY_FLOOR {
        clip.fetch_add(1, Ordering::Relaxed);
        PROPENSITY_FLOOR
    } else {
        e
    }
}

/// `e^(h)(x_row)`, floored at [`PROPENSITY_FLOOR`].
pub fn propensity_eval(data: &MsmDataset, row: usize, h: usize) -> Result<f64> {
    if row >= data.n() || h >= data.h {
        return Err(Error::Dimension(format!("row {row} or treatment {h} out of range")));
    }
    let e = data.table.probabilities(data.confounders(row))[h];
    Ok(e.max(PROPENSITY_FLOOR))
}

/// Multinomial-logistic MLE with treatment 0 as the reference class. A
/// ridge of 1e-8 keeps the Newton system solvable under separation.
pub fn fit_propensity(treatment: &[usize], x: &[f64], s: usize, h: usize) -> Result<PropensityTable> {
    let n = treatment.len();
    let d = s + 1;
    if h == 1 {
        return Ok(PropensityTable { coef: vec![vec![0.0; d]] });
    }
    let m = (h - 1) * d;
    let row = |i: usize| -> Vec<f64> { std::iter::once(1.0).chain(x[i * s..(i + 1) * s].iter().copied()).collect() };
    let table_of = |beta: &[f64]| PropensityTable {
        coef: std::iter::once(vec![0.0; d]).chain(beta.chunks(d).map(<[f64]>::to_vec)).collect(),
    };
    let nll = |beta: &[f64]| -> f64 {
        let t = table_of(beta);
        let mut f = 0.0;
        for i in 0..n {
            f -= t.probabilities(&x[i * s..(i + 1) * s])[treatment[i]].max(1e-300).ln();
        }
        f + 0.5e-8 * beta.iter().map(|b| b * b).sum::<f64>()
    };
    let mut beta = vec![0.0; m];
    let mut f_cur = nll(&beta);
    for _ in 0..200 {
        let t = table_of(&beta);
        let mut grad = DVector::<f64>::zeros(m);
        let mut hess = DMatrix::<f64>::zeros(m, m);
        for i in 0..n {
            let z = row(i);
            let pr = t.probabilities(&z[1..]);
            for a in 1..h {
                let ra = if treatment[i] == a { 1.0 } else { 0.0 };
                for u in 0..d {
                    grad[(a - 1) * d + u] -= (ra - pr[a]) * z[u];
                }
                for b in 1..h {
                    let cab = pr[a] * (if a == b { 1.0 } else { 0.0 } - pr[b]);
                    for u in 0..d {
                        for v in 0..d {
                            hess[((a - 1) * d + u, (b - 1) * d + v)] += cab * z[u] * z[v];
                        }
                    }
                }
            }
        }
        for j in 0..m {
            grad[j] += 1e-8 * beta[j];
            hess[(j, j)] += 1e-8;
        }
        let step = hess
            .cholesky()
            .ok_or_else(|| Error::NonIdentifiable("propensity Newton system is singular".into()))?
            .solve(&grad);
        let mut t_step = 1.0;
        let mut moved = false;
        for _ in 0..50 {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b - t_step * s).collect();
            let f_new = nll(&cand);
            if f_new <= f_cur {
                let change = cand.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                beta = cand;
                f_cur = f_new;
                moved = change > 1e-10;
                break;
            }
            t_step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok(table_of(&beta))
}

fn check_prior(prior: &PriorSpec, data: &MsmDataset) -> Result<()> {
    if prior.p() != data.h * data.k {
        return Err(Error::Dimension(format!(
            "prior covers {} coefficients, the MSM has {} treatments x {} design columns",
            prior.p(),
            data.h,
            data.k
        )));
    }
    Ok(())
}

/// Maximiser of `sum_i a_i log f(y_i | theta^(t_i)) + (n / n0) log pi(theta; xi)`.
pub fn ipw_map_estimate(model: &LikelihoodModel, prior: &PriorSpec, data: &MsmDataset) -> Result<ParameterPoint> {
    check_prior(prior, data)?;
    Ok(map_fit_weighted(model, prior, &data.expanded, Some(&data.lik_weights))?.theta)
}

/// Posterior under the inverse-probability-weighted target.
pub fn ipw_posterior(
    model: &LikelihoodModel,
    prior: &PriorSpec,
    data: &MsmDataset,
    config: &SamplerConfig,
) -> Result<Posterior> {
    check_prior(prior, data)?;
    posterior_at_weighted(model, prior, &data.expanded, Some(&data.lik_weights), config)
}

/// Weighted posterior restricted to `active` (Laplace priors).
pub fn ipw_restricted_posterior(
    model: &LikelihoodModel,
    prior: &PriorSpec,
    data: &MsmDataset,
    theta_hat: &ParameterPoint,
    active: &ActiveSet,
    config: &SamplerConfig,
) -> Result<Posterior> {
    check_prior(prior, data)?;
    restricted_posterior_weighted(model, prior, &data.expanded, Some(&data.lik_weights), theta_hat, active, config)
}

/// `log E_w[f(y_row | theta^(t_row))^(1 / e^(t_row)(x_row))]`.
pub fn ipw_predictive_logdens(post: &Posterior, data: &MsmDataset, row: usize) -> Result<f64> {
    if row >= data.n() {
        return Err(Error::Dimension(format!("row {row} out of range")));
    }
    Ok(ipw_predictive_logdens_rows(post, data)?[row])
}

pub fn ipw_predictive_logdens_rows(post: &Posterior, data: &MsmDataset) -> Result<Vec<f64>> {
    powered_log_pred_rows(post, &data.expanded, Some(&data.lik_weights))
}

/// Information pair with `a_i = t/e` in `I1` and `b_i = t/e^2` in `I2`; the
/// prior enters each row's score with share `1 / (n0 H)`.
pub fn ipw_fisher_pair(
    model: &LikelihoodModel,
    prior: &PriorSpec,
    data: &MsmDataset,
    theta_hat: &ParameterPoint,
    active: Option<&ActiveSet>,
) -> Result<FisherPair> {
    check_prior(prior, data)?;
    fisher_pair_weighted(model, prior, &data.expanded, theta_hat, active, data.row_weights())
}

/// `-sum_i ipw_predictive_logdens + tr(I1^-1 I2)` with the weighted pair.
/// For a restricted posterior the pair is taken on its active set.
pub fn piic_ip(post: &Posterior, data: &MsmDataset, theta_hat: &ParameterPoint) -> Result<PiicValue> {
    let fisher = ipw_fisher_pair(&post.model, &post.prior, data, theta_hat, post.active.as_ref())?;
    piic_weighted(post, &data.expanded, &fisher, Some(&data.lik_weights))
}

/// Weighted `(J1, J2)`: `a_i` on the second-derivative terms, `b_i` on the
/// outer products of the hyperparameter scores.
pub fn ipw_j_pair(post: &Posterior, data: &MsmDataset) -> Result<JPair> {
    j_pair_weighted(post, &data.expanded, data.row_weights())
}

pub fn piic2_ip(piic_ip_value: &PiicValue, jpair: &JPair) -> Result<Piic2Value> {
    piic2(piic_ip_value, jpair)
}

/// PIIC_IP at the prior's hyperparameters, sparse for Laplace priors.
pub fn piic_ip_at(
    model: &LikelihoodModel,
    prior: &PriorSpec,
    data: &MsmDataset,
    config: &SamplerConfig,
) -> Result<(PiicValue, ParameterPoint, Posterior)> {
    let theta_hat = ipw_map_estimate(model, prior, data)?;
    let post = if prior.family == PriorFamily::Laplace {
        let active = ActiveSet::from_point(&theta_hat);
        if active.len() < theta_hat.len() {
            ipw_restricted_posterior(model, prior, data, &theta_hat, &active, config)?
        } else {
            ipw_posterior(model, prior, data, config)?
        }
    } else {
        ipw_posterior(model, prior, data, config)?
    };
    let value = piic_ip(&post, data, &theta_hat)?;
    Ok((value, theta_hat, post))
}

/// Data-generating process for MSM simulations: confounders `x ~ N(0, I_s)`,
/// assignment from `assignment`, potential outcomes
/// `y^(h) = mu_h + gamma'x + noise_sd * N(0, 1)` (Gaussian) or
/// `Binomial(m, logistic(mu_h + gamma'x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsmSimulation {
    pub n: usize,
    pub mu: Vec<f64>,
    pub gamma: Vec<f64>,
    #[serde(default = "one")]
    pub noise_sd: f64,
    #[serde(default)]
    pub binomial_m: Option<u32>,
    pub assignment: PropensityTable,
}

fn one() -> f64 {
    1.0
}

impl MsmSimulation {
    pub fn generate(&self, seed: u64, propensity: PropensitySpec) -> Result<MsmDataset> {
        let h = self.mu.len();
        let s = self.gamma.len();
        self.assignment.validate(h, s)?;
        if self.n == 0 {
            return invalid("simulation needs n > 0");
        }
        let mut rng = rng_for(seed, &[0x004d_534d]);
        let mut t = Vec::with_capacity(self.n);
        let mut y = Vec::with_capacity(self.n);
        let mut x = Vec::with_capacity(self.n * s);
        for _ in 0..self.n {
            let xi: Vec<f64> = (0..s).map(|_| StandardNormal.sample(&mut rng)).collect();
            let probs = self.assignment.probabilities(&xi);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut ti = h - 1;
            for (hh, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    ti = hh;
                    break;
                }
            }
            let eta = self.mu[ti] + self.gamma.iter().zip(&xi).map(|(a, b)| a * b).sum::<f64>();
            let yi = match self.binomial_m {
                None => {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    eta + self.noise_sd * z
                }
                Some(m) => {
                    let pr = sigmoid(eta);
                    (0..m).filter(|_| rng.random::<f64>() < pr).count() as f64
                }
            };
            t.push(ti);
            y.push(yi);
            x.extend(xi);
        }
        let response = match self.binomial_m {
            None => ResponseKind::Gaussian,
            Some(m) => ResponseKind::Binomial { m },
        };
        MsmDataset::new(t, y, x, s, h, None, response, propensity)
    }

    /// Marginal mean outcome under each treatment (Gaussian case: `mu_h`).
    pub fn marginal_means(&self) -> Vec<f64> {
        self.mu.clone()
    }
}

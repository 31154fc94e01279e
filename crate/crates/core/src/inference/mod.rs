//! Posterior computation: MAP estimates, conjugate Gaussian posteriors,
//! adaptive random-walk Metropolis and active-set restriction.

mod conjugate;
mod map;
mod mcmc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::models::{Dataset, LikelihoodModel, ParameterPoint, PriorFamily, PriorSpec};

pub use conjugate::{conjugate_posterior, restricted_conjugate_posterior};
pub use map::{map_estimate, MapFit};
pub use mcmc::{mcmc_sample, SamplerConfig};

pub(crate) use conjugate::conjugate_posterior_weighted;
pub(crate) use map::map_fit_weighted;
pub(crate) use mcmc::mcmc_sample_weighted;

/// Sorted indices of the nonzero coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveSet {
    indices: Vec<usize>,
    p: usize,
}

impl ActiveSet {
    pub fn new(mut indices: Vec<usize>, p: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&j) = indices.iter().find(|&&j| j >= p) {
            return Err(Error::Dimension(format!("active index {j} out of range for p = {p}")));
        }
        Ok(ActiveSet { indices, p })
    }

    pub fn all(p: usize) -> Self {
        ActiveSet { indices: (0..p).collect(), p }
    }

    /// Coordinates of `theta` that are exactly nonzero.
    pub fn from_point(theta: &ParameterPoint) -> Self {
        let s = theta.as_slice();
        ActiveSet { indices: (0..s.len()).filter(|&j| s[j] != 0.0).collect(), p: s.len() }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    pub fn mask(&self) -> Vec<bool> {
        (0..self.p).map(|j| self.contains(j)).collect()
    }
}

/// MCMC run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub acceptance_rate: f64,
    pub chain_length: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub proposal_scales: Vec<f64>,
}

/// Posterior draws, optionally carrying unnormalised log importance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    p: usize,
    draws: Vec<f64>,
    log_weights: Option<Vec<f64>>,
    pub chain: Option<ChainMeta>,
}

impl SampleSet {
    pub fn new(p: usize, draws: Vec<f64>, log_weights: Option<Vec<f64>>) -> Result<Self> {
        if p == 0 || draws.is_empty() || !draws.len().is_multiple_of(p) {
            return Err(Error::Dimension(format!("{} values do not form draws of length {p}", draws.len())));
        }
        if draws.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("posterior draw".into()));
        }
        if let Some(w) = &log_weights {
            if w.len() != draws.len() / p {
                return Err(Error::Dimension("one log weight per draw required".into()));
            }
            if w.iter().any(|v| v.is_nan() || *v == f64::INFINITY) || w.iter().all(|v| *v == f64::NEG_INFINITY) {
                return invalid("log weights must be finite for at least one draw");
            }
        }
        Ok(SampleSet { p, draws, log_weights, chain: None })
    }

    /// Weighted draw set from explicit weights (must be nonnegative, not all zero).
    pub fn weighted(p: usize, draws: Vec<f64>, weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return invalid("sample weights must be nonnegative and finite");
        }
        Self::new(p, draws, Some(weights.iter().map(|w| w.ln()).collect()))
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.draws.len() / self.p
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn draw(&self, s: usize) -> &[f64] {
        &self.draws[s * self.p..(s + 1) * self.p]
    }

    pub fn draws(&self) -> &[f64] {
        &self.draws
    }

    pub fn log_weights(&self) -> Option<&[f64]> {
        self.log_weights.as_deref()
    }

    /// Normalised weights, or `None` when all draws weigh the same.
    pub fn weights(&self) -> Option<Vec<f64>> {
        self.log_weights.as_ref().map(|lw| {
            let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = lw.iter().map(|v| (v - max).exp()).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|v| v / total).collect()
        })
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        match self.weights() {
            Some(w) => {
                for (s, ws) in w.iter().enumerate() {
                    for (o, v) in out.iter_mut().zip(self.draw(s)) {
                        *o += ws * v;
                    }
                }
            }
            None => {
                for s in 0..self.len() {
                    for (o, v) in out.iter_mut().zip(self.draw(s)) {
                        *o += v;
                    }
                }
                let k = self.len() as f64;
                out.iter_mut().for_each(|o| *o /= k);
            }
        }
        out
    }

    /// Same draws with `extra[s]` added to each log weight.
    pub fn reweighted(&self, extra: &[f64]) -> Result<SampleSet> {
        if extra.len() != self.len() {
            return Err(Error::Dimension("one log-weight increment per draw required".into()));
        }
        let lw = match &self.log_weights {
            Some(lw) => lw.iter().zip(extra).map(|(a, b)| a + b).collect(),
            None => extra.to_vec(),
        };
        let mut out = SampleSet::new(self.p, self.draws.clone(), Some(lw))?;
        out.chain = self.chain.clone();
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PosteriorForm {
    Gaussian { mean: DVector<f64>, cov: DMatrix<f64> },
    Samples(SampleSet),
}

/// A posterior over the coefficients together with the target that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub form: PosteriorForm,
    pub map_point: ParameterPoint,
    pub model: LikelihoodModel,
    pub prior: PriorSpec,
    /// Per-row likelihood exponents (inverse-probability weights); `None` means 1.
    pub lik_weights: Option<Vec<f64>>,
    /// Set when the posterior is restricted to an active set.
    pub active: Option<ActiveSet>,
    /// Set when the active set was empty and the posterior is the point mass at zero.
    pub degenerate: bool,
}

impl Posterior {
    pub fn xi_used(&self) -> &[f64] {
        &self.prior.xi
    }

    pub fn p(&self) -> usize {
        self.map_point.len()
    }

    pub fn mean(&self) -> Vec<f64> {
        match &self.form {
            PosteriorForm::Gaussian { mean, .. } => mean.iter().copied().collect(),
            PosteriorForm::Samples(s) => s.mean(),
        }
    }

    pub fn samples(&self) -> Option<&SampleSet> {
        match &self.form {
            PosteriorForm::Samples(s) => Some(s),
            PosteriorForm::Gaussian { .. } => None,
        }
    }

    pub fn acceptance_rate(&self) -> Option<f64> {
        self.samples().and_then(|s| s.chain.as_ref()).map(|c| c.acceptance_rate)
    }
}

/// Posterior at the prior's current hyperparameters: closed form when the
/// prior is conjugate, MCMC otherwise.
pub fn posterior_at(
    model: &LikelihoodModel,
    prior: &PriorSpec,
    data: &Dataset,
    config: &SamplerConfig,
) -> Result<Posterior> {
    posterior_at_weighted(model, prior, data, None, config)
}

pub(crate) fn posterior_at_weighted(
    model: &LikelihoodModel,
    prior: &PriorSpec,
    data: &Dataset,
    weights: Option<&[f64]>,
    config: &SamplerConfig,
) -> Result<Posterior> {
    if prior.is_conjugate_with(model) {
        conjugate_posterior_weighted(model, prior, data, weights, None)
    } else {
        let fit = map_fit_weighted(model, prior, data, weights)?;
        mcmc_sample_weighted(model, prior, data, weights, &fit.theta, None, config)
    }
}

/// Posterior with the coefficients outside `active` pinned to zero.
///
/// `theta_hat` initialises the chain; an empty active set gives the point
/// mass at zero, flagged as degenerate.
pub fn restricted_posterior(
    model: &LikelihoodModel,
    prior: &PriorSpec,
    data: &Dataset,
    theta_hat: &ParameterPoint,
    active: &ActiveSet,
    config: &SamplerConfig,
) -> Result<Posterior> {
    restricted_posterior_weighted(model, prior, data, None, theta_hat, active, config)
}

pub(crate) fn restricted_posterior_weighted(
    model: &LikelihoodModel,
    prior: &PriorSpec,
    data: &Dataset,
    weights: Option<&[f64]>,
    theta_hat: &ParameterPoint,
    active: &ActiveSet,
    config: &SamplerConfig,
) -> Result<Posterior> {
    let p = data.p();
    if active.p() != p || theta_hat.len() != p {
        return Err(Error::Dimension("active set, MAP point and data disagree on p".into()));
    }
    if active.is_empty() {
        let zeros = ParameterPoint::zeros(p);
        return Ok(Posterior {
            form: PosteriorForm::Samples(SampleSet::new(p, vec![0.0; p], None)?),
            map_point: zeros,
            model: *model,
            prior: prior.clone(),
            lik_weights: weights.map(<[f64]>::to_vec),
            active: Some(active.clone()),
            degenerate: true,
        });
    }
    if prior.is_conjugate_with(model) {
        return conjugate_posterior_weighted(model, prior, data, weights, Some(active));
    }
    let mut init = theta_hat.as_slice().to_vec();
    for (j, v) in init.iter_mut().enumerate() {
        if !active.contains(j) {
            *v = 0.0;
        }
    }
    let init = ParameterPoint::new(init)?;
    mcmc_sample_weighted(model, prior, data, weights, &init, Some(active), config)
}

/// Fit the MAP point, then sample the posterior restricted to its active set
/// (Laplace priors) or the full posterior (other families).
pub fn sparse_posterior(
    model: &LikelihoodModel,
    prior: &PriorSpec,
    data: &Dataset,
    config: &SamplerConfig,
) -> Result<(ParameterPoint, ActiveSet, Posterior)> {
    let theta_hat = map_estimate(model, prior, data)?;
    let active = match prior.family {
        PriorFamily::Laplace => ActiveSet::from_point(&theta_hat),
        _ => ActiveSet::all(data.p()),
    };
    let post = restricted_posterior(model, prior, data, &theta_hat, &active, config)?;
    Ok((theta_hat, active, post))
}

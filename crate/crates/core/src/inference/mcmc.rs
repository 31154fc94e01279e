//! Componentwise adaptive random-walk Metropolis.
//!
//! Each sweep proposes `theta_j + s_j * N(0, 1)` for every free coordinate.
//! During burn-in the scales `s_j` are tuned in batches towards the target
//! acceptance rate; afterwards they are frozen so the kept chain is a
//! proper Markov chain. The linear-Gaussian log-likelihood is tracked through
//! sufficient statistics and the logistic one through the cached linear
//! predictor, so one proposal costs O(1) and O(n) respectively.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ActiveSet, ChainMeta, Posterior, PosteriorForm, SampleSet};
use crate::error::{invalid, Error, Result};
use crate::inference::map::gaussian_normal_equations;
use crate::linalg::softplus;
use crate::models::{dot, Dataset, LikelihoodModel, ParameterPoint, PriorFamily, PriorSpec};
use crate::rng::rng_from;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Total sweeps, burn-in included.
    pub chain_length: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub target_accept: f64,
    /// Sweeps per adaptation batch during burn-in.
    pub adapt_batch: usize,
    /// Post-burn-in acceptance rates outside `[min_accept, max_accept]` are errors.
    pub min_accept: f64,
    pub max_accept: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            chain_length: 50_000,
            burn_in: 10_000,
            thin: 4,
            seed: 0,
            target_accept: 0.44,
            adapt_batch: 25,
            min_accept: 0.1,
            max_accept: 0.6,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        SamplerConfig { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 || self.adapt_batch == 0 {
            return invalid("thin and adapt_batch must be positive");
        }
        if self.chain_length <= self.burn_in {
            return invalid(format!("chain_length ({}) must exceed burn_in ({})", self.chain_length, self.burn_in));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return invalid("target_accept must lie in (0, 1)");
        }
        if !(self.min_accept <= self.max_accept) {
            return invalid("min_accept must not exceed max_accept");
        }
        Ok(())
    }

    pub fn kept_draws(&self) -> usize {
        (self.chain_length - self.burn_in).div_ceil(self.thin)
    }
}

pub fn mcmc_sample(
    model: &LikelihoodModel,
    prior: &PriorSpec,
    data: &Dataset,
    init: &ParameterPoint,
    config: &SamplerConfig,
) -> Result<Posterior> {
    mcmc_sample_weighted(model, prior, data, None, init, None, config)
}

enum LikState {
    Gaussian {
        // X'WX / sigma2 (row-major) and X'W(y - X theta) / sigma2.
        gram: Vec<f64>,
        rhs: Vec<f64>,
        resid: Vec<f64>,
    },
    Logistic {
        m: f64,
        cols: Vec<f64>,
        wy_x: Vec<f64>,
        w: Vec<f64>,
        eta: Vec<f64>,
        sp: Vec<f64>,
    },
}

impl LikState {
    fn new(model: &LikelihoodModel, data: &Dataset, weights: Option<&[f64]>, theta: &[f64]) -> Self {
        let n = data.n();
        let p = data.p();
        match *model {
            LikelihoodModel::LinearGaussian { sigma2 } => {
                let (g, b) = gaussian_normal_equations(data, weights, sigma2);
                let gram: Vec<f64> = (0..p * p).map(|k| g[(k / p, k % p)]).collect();
                let rhs: Vec<f64> = b.iter().copied().collect();
                let mut s = LikState::Gaussian { gram, rhs, resid: vec![0.0; p] };
                s.resync(theta);
                s
            }
            LikelihoodModel::LogisticBinomial { m } => {
                let w: Vec<f64> = (0..n).map(|i| weights.map_or(1.0, |w| w[i])).collect();
                let mut cols = vec![0.0; n * p];
                let mut wy_x = vec![0.0; p];
                for i in 0..n {
                    let x = data.row(i);
                    for j in 0..p {
                        cols[j * n + i] = x[j];
                        wy_x[j] += w[i] * data.y(i) * x[j];
                    }
                }
                let eta: Vec<f64> = (0..n).map(|i| dot(data.row(i), theta)).collect();
                let sp = eta.iter().map(|&e| softplus(e)).collect();
                LikState::Logistic { m: m as f64, cols, wy_x, w, eta, sp }
            }
        }
    }

    fn resync(&mut self, theta: &[f64]) {
        if let LikState::Gaussian { gram, rhs, resid } = self {
            let p = rhs.len();
            for j in 0..p {
                resid[j] = rhs[j] - dot(&gram[j * p..(j + 1) * p], theta);
            }
        }
    }

    /// Change in the weighted log-likelihood when `theta_j` moves by `delta`.
    #[inline]
    fn delta(&self, j: usize, delta: f64, scratch: &mut [f64]) -> f64 {
        match self {
            LikState::Gaussian { gram, resid, rhs } => {
                let p = rhs.len();
                delta * resid[j] - 0.5 * delta * delta * gram[j * p + j]
            }
            LikState::Logistic { m, cols, wy_x, w, eta, sp } => {
                let n = eta.len();
                let col = &cols[j * n..(j + 1) * n];
                let mut acc = 0.0;
                for i in 0..n {
                    let xi = col[i];
                    if xi == 0.0 {
                        scratch[i] = sp[i];
                        continue;
                    }
                    let s = softplus(eta[i] + delta * xi);
                    scratch[i] = s;
                    acc += w[i] * (s - sp[i]);
                }
                delta * wy_x[j] - m * acc
            }
        }
    }

    fn accept(&mut self, j: usize, delta: f64, scratch: &[f64]) {
        match self {
            LikState::Gaussian { gram, resid, .. } => {
                let p = resid.len();
                for k in 0..p {
                    resid[k] -= delta * gram[k * p + j];
                }
            }
            LikState::Logistic { cols, eta, sp, .. } => {
                let n = eta.len();
                let col = &cols[j * n..(j + 1) * n];
                for i in 0..n {
                    eta[i] += delta * col[i];
                }
                sp.copy_from_slice(scratch);
            }
        }
    }

    /// Curvature of the log-likelihood along coordinate `j`, for initial scales.
    fn curvature(&self, j: usize) -> f64 {
        match self {
            LikState::Gaussian { gram, rhs, .. } => gram[j * rhs.len() + j],
            LikState::Logistic { m, cols, w, eta, .. } => {
                let n = eta.len();
                (0..n)
                    .map(|i| {
                        let pr = crate::linalg::sigmoid(eta[i]);
                        w[i] * m * pr * (1.0 - pr) * cols[j * n + i] * cols[j * n + i]
                    })
                    .sum()
            }
        }
    }
}

#[inline]
fn prior_delta(prior: &PriorSpec, j: usize, old: f64, new: f64) -> f64 {
    let xi = prior.xi[prior.groups[j]];
    match prior.family {
        PriorFamily::Normal => -0.5 * (new * new - old * old) / xi,
        PriorFamily::Laplace => -xi * (new.abs() - old.abs()),
        PriorFamily::Flat => 0.0,
    }
}

pub(crate) fn mcmc_sample_weighted(
    model: &LikelihoodModel,
    prior: &PriorSpec,
    data: &Dataset,
    weights: Option<&[f64]>,
    init: &ParameterPoint,
    active: Option<&ActiveSet>,
    config: &SamplerConfig,
) -> Result<Posterior> {
    config.validate()?;
    model.check_data(data)?;
    let p = data.p();
    if init.len() != p || prior.p() != p {
        return Err(Error::Dimension("initial point, prior and data disagree on p".into()));
    }
    let free: Vec<usize> = match active {
        Some(a) => a.indices().to_vec(),
        None => (0..p).collect(),
    };
    if free.is_empty() {
        return invalid("sampler needs at least one free coordinate");
    }
    let c = prior.exponent(data.n());
    let mut theta = init.as_slice().to_vec();
    let mut state = LikState::new(model, data, weights, &theta);
    let mut scratch = vec![0.0; data.n()];
    let mut scales: Vec<f64> = free
        .iter()
        .map(|&j| {
            let mut h = state.curvature(j);
            if prior.family == PriorFamily::Normal {
                h += c / prior.xi[prior.groups[j]];
            }
            if h > 0.0 && h.is_finite() {
                (2.4 / h.sqrt()).clamp(1e-8, 1e4)
            } else {
                1.0
            }
        })
        .collect();
    let mut batch_accepts = vec![0usize; free.len()];
    let mut batch = 0usize;
    let mut kept_accepts = 0usize;
    let mut kept_proposals = 0usize;
    let mut draws = Vec::with_capacity(config.kept_draws() * p);
    let mut rng = rng_from(config.seed);

    for sweep in 0..config.chain_length {
        let burning = sweep < config.burn_in;
        for (k, &j) in free.iter().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.random();
            let delta = scales[k] * z;
            let old = theta[j];
            let new = old + delta;
            let log_ratio = state.delta(j, delta, &mut scratch) + c * prior_delta(prior, j, old, new);
            let accepted = u.ln() < log_ratio;
            if accepted {
                state.accept(j, delta, &scratch);
                theta[j] = new;
            }
            if burning {
                batch_accepts[k] += accepted as usize;
            } else {
                kept_accepts += accepted as usize;
                kept_proposals += 1;
            }
        }
        if sweep % 64 == 63 {
            state.resync(&theta);
        }
        if burning && (sweep + 1) % config.adapt_batch == 0 {
            batch += 1;
            let step = 3.0 / (batch as f64).sqrt();
            for (k, acc) in batch_accepts.iter_mut().enumerate() {
                let rate = *acc as f64 / config.adapt_batch as f64;
                scales[k] = (scales[k] * (step * (rate - config.target_accept)).exp()).clamp(1e-10, 1e6);
                *acc = 0;
            }
        }
        if !burning && (sweep - config.burn_in).is_multiple_of(config.thin) {
            draws.extend_from_slice(&theta);
        }
    }

    let rate = kept_accepts as f64 / kept_proposals as f64;
    if !(rate >= config.min_accept && rate <= config.max_accept) {
        return Err(Error::AcceptanceRate { rate, lo: config.min_accept, hi: config.max_accept });
    }
    let mut samples = SampleSet::new(p, draws, None)?;
    samples.chain = Some(ChainMeta {
        acceptance_rate: rate,
        chain_length: config.chain_length,
        burn_in: config.burn_in,
        thin: config.thin,
        seed: config.seed,
        proposal_scales: scales,
    });
    Ok(Posterior {
        form: PosteriorForm::Samples(samples),
        map_point: init.clone(),
        model: *model,
        prior: prior.clone(),
        lik_weights: weights.map(<[f64]>::to_vec),
        active: active.cloned(),
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{conjugate_posterior, map_estimate};
    use crate::models::ResponseKind;

    fn small_config(seed: u64) -> SamplerConfig {
        SamplerConfig { chain_length: 30_000, burn_in: 5_000, thin: 2, seed, ..SamplerConfig::default() }
    }

    #[test]
    fn gaussian_chain_matches_conjugate_moments() {
        let rows = [vec![1.0, 0.3], vec![0.2, -1.0], vec![-0.7, 0.5], vec![1.1, 0.9], vec![0.4, -0.2]];
        let data = Dataset::new(&rows, vec![0.5, 1.0, -0.2, 1.4, 0.1], ResponseKind::Gaussian).unwrap();
        let model = LikelihoodModel::LinearGaussian { sigma2: 0.6 };
        let prior = PriorSpec::shared(PriorFamily::Normal, 2, 5, 1.3).unwrap();
        let exact = conjugate_posterior(&model, &prior, &data).unwrap();
        let PosteriorForm::Gaussian { mean, cov } = &exact.form else { panic!() };
        let post = mcmc_sample(&model, &prior, &data, &exact.map_point, &small_config(3)).unwrap();
        let s = post.samples().unwrap();
        let m = s.mean();
        for j in 0..2 {
            let sd = cov[(j, j)].sqrt();
            assert!((m[j] - mean[j]).abs() < 0.05 * sd + 0.02, "mean {j}: {} vs {}", m[j], mean[j]);
            let var = (0..s.len()).map(|k| (s.draw(k)[j] - m[j]).powi(2)).sum::<f64>() / s.len() as f64;
            assert!((var / cov[(j, j)] - 1.0).abs() < 0.1, "var {j}: {var} vs {}", cov[(j, j)]);
        }
        let rate = post.acceptance_rate().unwrap();
        assert!((0.3..0.55).contains(&rate), "{rate}");
    }

    #[test]
    fn same_seed_same_chain() {
        let data =
            Dataset::new(&[vec![1.0], vec![0.5], vec![-1.0]], vec![2.0, 1.0, 0.0], ResponseKind::Binomial { m: 3 })
                .unwrap();
        let model = LikelihoodModel::LogisticBinomial { m: 3 };
        let prior = PriorSpec::shared(PriorFamily::Laplace, 1, 3, 1.0).unwrap();
        let init = map_estimate(&model, &prior, &data).unwrap();
        let cfg = SamplerConfig { chain_length: 2_000, burn_in: 500, ..small_config(11) };
        let a = mcmc_sample(&model, &prior, &data, &init, &cfg).unwrap();
        let b = mcmc_sample(&model, &prior, &data, &init, &cfg).unwrap();
        assert_eq!(a, b);
        let c = mcmc_sample(&model, &prior, &data, &init, &cfg.with_seed(12)).unwrap();
        assert_ne!(a.samples().unwrap().draws(), c.samples().unwrap().draws());
    }

    #[test]
    fn tiny_prior_variance_concentrates_at_origin() {
        let data =
            Dataset::new(&[vec![1.0], vec![0.5], vec![-1.0]], vec![2.0, 1.0, 0.0], ResponseKind::Gaussian).unwrap();
        let model = LikelihoodModel::LinearGaussian { sigma2: 1.0 };
        let prior = PriorSpec::shared(PriorFamily::Normal, 1, 3, 1e-6).unwrap();
        let post = mcmc_sample(&model, &prior, &data, &ParameterPoint::zeros(1), &small_config(5)).unwrap();
        let s = post.samples().unwrap();
        let max = (0..s.len()).map(|k| s.draw(k)[0].abs()).fold(0.0, f64::max);
        assert!(max < 0.01, "{max}");
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SamplerConfig { chain_length: 10, burn_in: 10, ..SamplerConfig::default() };
        assert!(cfg.validate().is_err());
    }
}

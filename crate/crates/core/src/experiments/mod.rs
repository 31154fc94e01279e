//! Simulation harness comparing criterion-driven hyperparameter selection.
//!
//! Each replication draws a dataset from a known truth, selects `xi` by
//! minimising WAIC and PIIC (with one shared hyperparameter and with one per
//! coefficient block), fits the posterior at each selection and scores its
//! predictive density on fresh draws from the truth.

pub mod diabetes;
pub mod tables;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Binomial, Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::criteria::{j_pair, piic2, piic_at, predictive_logdens_rows, waic_at};
use crate::error::{invalid, Error, Result};
use crate::hyperopt::{minimize_criterion, XiSearchSpace};
use crate::inference::{posterior_at, Posterior, PosteriorForm, SampleSet, SamplerConfig};
use crate::linalg::sigmoid;
use crate::models::{Dataset, LikelihoodModel, PriorFamily, PriorSpec, ResponseKind};
use crate::par::{map_indices_with, Execution};
use crate::rng::{derive_seed, rng_from, Rng};

const TAG_DATA: u64 = 1;
const TAG_MCMC: u64 = 2;
const TAG_RISK: u64 = 3;

/// Equality tolerance for the "equal" bucket of a rate triple.
pub const RATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum NoiseLaw {
    Normal { variance: f64 },
    StudentT { dof: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Logit,
    Probit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Truth {
    Linear { noise: NoiseLaw },
    Binomial { m: u32, link: Link },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// One hyperparameter shared by all coefficients.
    One,
    /// One hyperparameter per third of the coefficients.
    Three,
}

impl Grouping {
    pub fn q(self) -> usize {
        match self {
            Grouping::One => 1,
            Grouping::Three => 3,
        }
    }
}

/// How the noise variance of a linear-Gaussian fit is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaPolicy {
    /// True variance for normal noise, residual-variance plug-in otherwise.
    Auto,
    /// `RSS / (n - p)` from ordinary least squares.
    ResidualVariance,
    Fixed(f64),
}

fn default_groupings() -> Vec<Grouping> {
    vec![Grouping::One, Grouping::Three]
}

fn default_replications() -> usize {
    100
}

fn default_risk_draws() -> usize {
    10_000
}

fn default_sigma() -> SigmaPolicy {
    SigmaPolicy::Auto
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    pub p: usize,
    /// `(theta1, theta2, theta3)`, each repeated over a block of `p / 3` coefficients.
    pub theta_pattern: [f64; 3],
    pub truth: Truth,
    pub prior_family: PriorFamily,
    #[serde(default = "default_groupings")]
    pub groupings: Vec<Grouping>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_risk_draws")]
    pub risk_draws: usize,
    /// Cap on posterior draws used for the risk's predictive density (thinned evenly).
    #[serde(default)]
    pub risk_posterior_draws: Option<usize>,
    pub seed: u64,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub search: XiSearchSpace,
    #[serde(default = "default_sigma")]
    pub sigma2: SigmaPolicy,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || !self.p.is_multiple_of(3) {
            return invalid(format!("p = {} must be a positive multiple of 3", self.p));
        }
        if self.n == 0 || self.replications == 0 || self.risk_draws == 0 {
            return invalid("n, replications and risk_draws must be positive");
        }
        if self.groupings.is_empty() {
            return invalid("at least one grouping is required");
        }
        if self.theta_pattern.iter().any(|v| !v.is_finite()) {
            return invalid("theta pattern must be finite");
        }
        match self.truth {
            Truth::Linear { noise: NoiseLaw::Normal { variance } } if !(variance > 0.0) => {
                return invalid("noise variance must be positive")
            }
            Truth::Linear { noise: NoiseLaw::StudentT { dof } } if !(dof > 0.0) => {
                return invalid("t degrees of freedom must be positive")
            }
            Truth::Binomial { m: 0, .. } => return invalid("binomial m must be positive"),
            _ => {}
        }
        if let SigmaPolicy::Fixed(s) = self.sigma2 {
            if !(s > 0.0) {
                return invalid("fixed sigma2 must be positive");
            }
        }
        self.sampler.validate()?;
        for g in &self.groupings {
            self.search.validate(g.q())?;
        }
        Ok(())
    }

    pub fn theta_star(&self) -> Vec<f64> {
        let block = self.p / 3;
        (0..self.p).map(|j| self.theta_pattern[j / block]).collect()
    }
}

/// The data-generating law of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueModel {
    pub theta: Vec<f64>,
    pub truth: Truth,
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

impl TrueModel {
    pub fn response(&self) -> ResponseKind {
        match self.truth {
            Truth::Linear { .. } => ResponseKind::Gaussian,
            Truth::Binomial { m, .. } => ResponseKind::Binomial { m },
        }
    }

    fn success_prob(link: Link, eta: f64) -> f64 {
        match link {
            Link::Logit => sigmoid(eta),
            Link::Probit => std_normal_cdf(eta),
        }
    }

    /// Draws `n` rows: covariates `N(0, 1)`, then the response, row by row.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Result<Dataset> {
        let p = self.theta.len();
        let mut x = Vec::with_capacity(n * p);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
            let eta: f64 = row.iter().zip(&self.theta).map(|(a, b)| a * b).sum();
            y.push(self.draw_response(eta, rng)?);
            x.extend(row);
        }
        Dataset::from_row_major(n, p, x, y, self.response())
    }

    fn draw_response(&self, eta: f64, rng: &mut Rng) -> Result<f64> {
        Ok(match self.truth {
            Truth::Linear { noise: NoiseLaw::Normal { variance } } => {
                let z: f64 = rng.sample(StandardNormal);
                eta + variance.sqrt() * z
            }
            Truth::Linear { noise: NoiseLaw::StudentT { dof } } => {
                let t = StudentT::new(dof).map_err(|e| Error::InvalidInput(e.to_string()))?;
                eta + t.sample(rng)
            }
            Truth::Binomial { m, link } => {
                let pr = Self::success_prob(link, eta);
                Binomial::new(m as u64, pr).map_err(|e| Error::InvalidInput(e.to_string()))?.sample(rng) as f64
            }
        })
    }

    /// True log density of `y` at covariates `x`.
    pub fn log_density(&self, x: &[f64], y: f64) -> f64 {
        let eta: f64 = x.iter().zip(&self.theta).map(|(a, b)| a * b).sum();
        match self.truth {
            Truth::Linear { noise: NoiseLaw::Normal { variance } } => {
                LikelihoodModel::LinearGaussian { sigma2: variance }.log_density(y, eta)
            }
            Truth::Linear { noise: NoiseLaw::StudentT { dof } } => {
                let t = statrs::distribution::StudentsT::new(0.0, 1.0, dof).expect("validated dof");
                statrs::distribution::Continuous::ln_pdf(&t, y - eta)
            }
            Truth::Binomial { m, link } => {
                let (pr, qr) = (Self::success_prob(link, eta), Self::success_prob(link, -eta));
                let fails = m as f64 - y;
                let mut lp = statrs::function::factorial::ln_binomial(m as u64, y as u64);
                if y > 0.0 {
                    lp += y * pr.ln();
                }
                if fails > 0.0 {
                    lp += fails * qr.ln();
                }
                lp
            }
        }
    }
}

/// Dataset of replication `rep` and the law it was drawn from.
pub fn generate_dataset(config: &ScenarioConfig, rep: usize) -> Result<(Dataset, TrueModel)> {
    config.validate()?;
    let truth = TrueModel { theta: config.theta_star(), truth: config.truth };
    let mut rng = rng_from(derive_seed(config.seed, &[rep as u64, TAG_DATA]));
    Ok((truth.sample(config.n, &mut rng)?, truth))
}

/// `RSS / (n - p)` of the least-squares fit.
pub fn residual_variance(data: &Dataset) -> Result<f64> {
    let (n, p) = (data.n(), data.p());
    if n <= p {
        return invalid(format!("residual variance needs n > p, got n = {n}, p = {p}"));
    }
    let x = data.design();
    let y = nalgebra::DVector::from_column_slice(data.responses());
    let xtx: DMatrix<f64> = x.transpose() * &x;
    let beta = xtx
        .cholesky()
        .ok_or_else(|| Error::NonIdentifiable("least-squares design is singular".into()))?
        .solve(&(x.transpose() * &y));
    let rss = (y - x * beta).norm_squared();
    Ok(rss / (n - p) as f64)
}

/// Working model fitted in a scenario.
pub fn fitted_model(config: &ScenarioConfig, data: &Dataset) -> Result<LikelihoodModel> {
    Ok(match config.truth {
        Truth::Binomial { m, .. } => LikelihoodModel::LogisticBinomial { m },
        Truth::Linear { noise } => {
            let sigma2 = match (config.sigma2, noise) {
                (SigmaPolicy::Fixed(s), _) => s,
                (SigmaPolicy::Auto, NoiseLaw::Normal { variance }) => variance,
                _ => residual_variance(data)?,
            };
            LikelihoodModel::LinearGaussian { sigma2 }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    /// Mean of `-log f(z | data; xi_hat)` over the fresh draws.
    pub risk: f64,
    /// Mean of `log f_true(z) - log f(z | data; xi_hat)`.
    pub kl: f64,
    pub std_error: f64,
    pub draws: usize,
}

/// `M` fresh draws from the truth, generated from `seed`.
pub fn fresh_draws(truth: &TrueModel, m: usize, seed: u64) -> Result<Dataset> {
    truth.sample(m, &mut rng_from(seed))
}

/// Posterior with at most `cap` draws, thinned evenly.
fn thinned(post: &Posterior, cap: Option<usize>) -> Result<Posterior> {
    let (Some(cap), PosteriorForm::Samples(s)) = (cap, &post.form) else {
        return Ok(post.clone());
    };
    if s.len() <= cap || s.log_weights().is_some() {
        return Ok(post.clone());
    }
    let step = s.len().div_ceil(cap);
    let draws: Vec<f64> = (0..s.len()).step_by(step).flat_map(|k| s.draw(k).to_vec()).collect();
    let mut out = SampleSet::new(s.p(), draws, None)?;
    out.chain = s.chain.clone();
    Ok(Posterior { form: PosteriorForm::Samples(out), ..post.clone() })
}

/// Risk of `post` on pre-drawn fresh data.
pub fn risk_on(truth: &TrueModel, post: &Posterior, fresh: &Dataset) -> Result<RiskEstimate> {
    let lp = predictive_logdens_rows(post, fresh)?;
    let m = lp.len() as f64;
    let risk = -lp.iter().sum::<f64>() / m;
    let var = lp.iter().map(|l| (-l - risk).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    let kl = (0..fresh.n()).map(|i| truth.log_density(fresh.row(i), fresh.y(i)) - lp[i]).sum::<f64>() / m;
    Ok(RiskEstimate { risk, kl, std_error: (var / m).sqrt(), draws: fresh.n() })
}

/// Monte Carlo estimate of `E[-log f(z | data; xi_hat)]` over `m` fresh draws.
pub fn kl_risk(truth: &TrueModel, post: &Posterior, m: usize, seed: u64) -> Result<RiskEstimate> {
    if m == 0 {
        return invalid("risk needs at least one draw");
    }
    risk_on(truth, post, &fresh_draws(truth, m, seed)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmRecord {
    /// `waic1`, `piic1`, `waic2` or `piic2`.
    pub arm: String,
    pub groups: usize,
    pub xi_hat: Vec<f64>,
    pub criterion_value: f64,
    /// PIIC2 at the selected `xi` (PIIC arms only).
    pub piic2: Option<f64>,
    pub active_set: Vec<usize>,
    pub risk: f64,
    pub kl: f64,
    pub risk_std_error: f64,
    pub evaluations: usize,
    pub dataset_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub dataset_hash: String,
    pub arms: Vec<ArmRecord>,
}

impl ReplicationRecord {
    pub fn arm(&self, name: &str) -> Option<&ArmRecord> {
        self.arms.iter().find(|a| a.arm == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RateTriple {
    pub less: usize,
    pub equal: usize,
    pub greater: usize,
}

impl RateTriple {
    pub fn total(&self) -> usize {
        self.less + self.equal + self.greater
    }

    /// Counts replications where `a` is below, within [`RATE_TOL`] of, or above `b`.
    pub fn from_pairs(pairs: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut t = RateTriple::default();
        for (a, b) in pairs {
            if (a - b).abs() <= RATE_TOL {
                t.equal += 1;
            } else if a < b {
                t.less += 1;
            } else {
                t.greater += 1;
            }
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanRisk {
    pub risk: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub config: ScenarioConfig,
    pub mean: BTreeMap<String, MeanRisk>,
    pub rate1: Option<RateTriple>,
    pub rate2: Option<RateTriple>,
    pub completed: usize,
    pub failures: usize,
    pub failure_messages: Vec<String>,
    pub replications: Vec<ReplicationRecord>,
}

fn arm_name(criterion: &str, grouping: Grouping) -> String {
    format!("{criterion}{}", if grouping == Grouping::One { 1 } else { 2 })
}

/// One replication: both criteria under every configured grouping, on the
/// same dataset and the same fresh draws.
pub fn run_replication(config: &ScenarioConfig, rep: usize) -> Result<ReplicationRecord> {
    let (data, truth) = generate_dataset(config, rep)?;
    let hash = data.content_hash();
    let model = fitted_model(config, &data)?;
    let sampler = config.sampler.with_seed(derive_seed(config.seed, &[rep as u64, TAG_MCMC]));
    let fresh = fresh_draws(&truth, config.risk_draws, derive_seed(config.seed, &[rep as u64, TAG_RISK]))?;
    let mut arms = Vec::new();
    for &grouping in &config.groupings {
        let q = grouping.q();
        let base = PriorSpec::blocks(config.prior_family, config.p, q, data.n(), vec![1.0; q])?;

        let waic_search =
            minimize_criterion(|xi| waic_at(&model, &base.with_xi(xi)?, &data, &sampler), q, &config.search, &[])?;
        let prior_w = base.with_xi(&waic_search.xi_hat)?;
        let post_w = posterior_at(&model, &prior_w, &data, &sampler)?;
        let r = risk_on(&truth, &thinned(&post_w, config.risk_posterior_draws)?, &fresh)?;
        let active_w = crate::inference::ActiveSet::from_point(&post_w.map_point).indices().to_vec();
        arms.push(ArmRecord {
            arm: arm_name("waic", grouping),
            groups: q,
            xi_hat: waic_search.xi_hat.clone(),
            criterion_value: waic_search.value,
            piic2: None,
            active_set: active_w,
            risk: r.risk,
            kl: r.kl,
            risk_std_error: r.std_error,
            evaluations: waic_search.trace.len(),
            dataset_hash: hash.clone(),
        });

        let piic_search = minimize_criterion(
            |xi| Ok(piic_at(&model, &base.with_xi(xi)?, &data, &sampler)?.piic.value),
            q,
            &config.search,
            &[],
        )?;
        let prior_p = base.with_xi(&piic_search.xi_hat)?;
        let fit = piic_at(&model, &prior_p, &data, &sampler)?;
        let post_p = posterior_at(&model, &prior_p, &data, &sampler)?;
        let jp = j_pair(&post_p, &data)?;
        let p2 = piic2(&fit.piic, &jp)?;
        let r = risk_on(&truth, &thinned(&post_p, config.risk_posterior_draws)?, &fresh)?;
        arms.push(ArmRecord {
            arm: arm_name("piic", grouping),
            groups: q,
            xi_hat: piic_search.xi_hat.clone(),
            criterion_value: piic_search.value,
            piic2: Some(p2.value),
            active_set: fit.active.indices().to_vec(),
            risk: r.risk,
            kl: r.kl,
            risk_std_error: r.std_error,
            evaluations: piic_search.trace.len(),
            dataset_hash: hash.clone(),
        });
    }
    Ok(ReplicationRecord { replication: rep, dataset_hash: hash, arms })
}

/// Runs every replication (concurrently with the `parallel` feature),
/// excludes failed replications with a count, and aggregates.
pub fn run_comparison(config: &ScenarioConfig) -> Result<ComparisonRow> {
    run_comparison_with(Execution::Auto, config)
}

pub fn run_comparison_with(exec: Execution, config: &ScenarioConfig) -> Result<ComparisonRow> {
    config.validate()?;
    let results = map_indices_with(exec, config.replications, |rep| run_replication(config, rep));
    let mut replications = Vec::new();
    let mut failure_messages = Vec::new();
    for (rep, r) in results.into_iter().enumerate() {
        match r {
            Ok(rec) => replications.push(rec),
            Err(e) => failure_messages.push(format!("replication {rep}: {e}")),
        }
    }
    Ok(aggregate(config.clone(), replications, failure_messages))
}

fn aggregate(
    config: ScenarioConfig,
    replications: Vec<ReplicationRecord>,
    failure_messages: Vec<String>,
) -> ComparisonRow {
    let mut mean = BTreeMap::new();
    if !replications.is_empty() {
        for arm in replications[0].arms.iter().map(|a| a.arm.clone()) {
            let k = replications.len() as f64;
            let (mut risk, mut kl) = (0.0, 0.0);
            for rec in &replications {
                let a = rec.arm(&arm).expect("every replication runs the same arms");
                risk += a.risk;
                kl += a.kl;
            }
            mean.insert(arm, MeanRisk { risk: risk / k, kl: kl / k });
        }
    }
    let rate = |a: &str, b: &str| -> Option<RateTriple> {
        if !mean.contains_key(a) || !mean.contains_key(b) {
            return None;
        }
        Some(RateTriple::from_pairs(replications.iter().map(|r| (r.arm(a).unwrap().risk, r.arm(b).unwrap().risk))))
    };
    let rate1 = rate("waic1", "piic1");
    let rate2 = rate("waic2", "piic2");
    ComparisonRow {
        config,
        completed: replications.len(),
        failures: failure_messages.len(),
        failure_messages,
        mean,
        rate1,
        rate2,
        replications,
    }
}

/// Minimised WAIC under `grouping`.
pub fn minimized_waic(
    model: &LikelihoodModel,
    family: PriorFamily,
    data: &Dataset,
    grouping: Grouping,
    sampler: &SamplerConfig,
    search: &XiSearchSpace,
) -> Result<f64> {
    let q = grouping.q();
    let base = PriorSpec::blocks(family, data.p(), q, data.n(), vec![1.0; q])?;
    Ok(minimize_criterion(|xi| waic_at(model, &base.with_xi(xi)?, data, sampler), q, search, &[])?.value)
}

//! Sparse linear regression on the 442-patient diabetes data, split into 13
//! disjoint subsets of 34, with `xi` chosen per subset by WAIC and by PIIC
//! under two Laplace rate groups.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::residual_variance;
use crate::criteria::{j_pair, piic2, piic_at, waic_at};
use crate::error::{Error, Result};
use crate::hyperopt::{minimize_criterion, XiSearchSpace};
use crate::inference::{map_estimate, posterior_at, ActiveSet, SamplerConfig};
use crate::models::{ColumnScale, Dataset, LikelihoodModel, PriorFamily, PriorSpec};
use crate::par::{map_indices_with, Execution};
use crate::rng::{derive_seed, rng_for};

pub const DIABETES_N: usize = 442;
pub const DIABETES_P: usize = 10;
pub const COLUMNS: [&str; DIABETES_P] = ["age", "sex", "bmi", "map", "tc", "ldl", "hdl", "tch", "ltg", "glu"];

const TAG_SPLIT: u64 = 11;
const TAG_MCMC: u64 = 12;

fn default_splits() -> usize {
    13
}

fn default_true() -> bool {
    true
}

fn default_groups() -> Vec<usize> {
    vec![0, 0, 0, 0, 1, 1, 1, 1, 1, 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiabetesConfig {
    pub seed: u64,
    #[serde(default = "default_splits")]
    pub splits: usize,
    /// Standardize covariates on all rows before splitting.
    #[serde(default = "default_true")]
    pub standardize: bool,
    /// Rate group of each covariate.
    #[serde(default = "default_groups")]
    pub groups: Vec<usize>,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub search: XiSearchSpace,
}

impl DiabetesConfig {
    pub fn new(seed: u64) -> Self {
        DiabetesConfig {
            seed,
            splits: default_splits(),
            standardize: true,
            groups: default_groups(),
            sampler: SamplerConfig::default(),
            search: XiSearchSpace::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub xi_hat: Vec<f64>,
    /// Minimised criterion (WAIC, or PIIC for the PIIC arm).
    pub criterion_value: f64,
    /// PIIC2 at the selected `xi` (PIIC arm only).
    pub piic2: Option<f64>,
    /// MAP estimate at the selected `xi`; unselected coefficients are exactly 0.
    pub estimate: Vec<f64>,
    pub active_set: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub split: usize,
    pub rows: Vec<usize>,
    pub sigma2: f64,
    pub waic2: Selection,
    pub piic2: Selection,
}

impl SplitReport {
    pub fn active_sets_differ(&self) -> bool {
        self.waic2.active_set != self.piic2.active_set
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiabetesReport {
    pub config: DiabetesConfig,
    pub column_scales: Option<Vec<ColumnScale>>,
    pub response_mean: f64,
    pub splits: Vec<SplitReport>,
}

impl DiabetesReport {
    /// One `(label, estimates)` row per split and criterion.
    pub fn table(&self) -> Vec<(String, Vec<f64>)> {
        self.splits
            .iter()
            .flat_map(|s| {
                [
                    (format!("{} WAIC2", s.split + 1), s.waic2.estimate.clone()),
                    (format!("{} PIIC2", s.split + 1), s.piic2.estimate.clone()),
                ]
            })
            .collect()
    }

    pub fn splits_with_different_active_sets(&self) -> usize {
        self.splits.iter().filter(|s| s.active_sets_differ()).count()
    }
}

/// Seeded partition of `0..n` into `k` disjoint sorted blocks of `n / k`.
pub fn partition(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k == 0 || !n.is_multiple_of(k) {
        return Err(Error::InvalidInput(format!("{n} rows do not split into {k} equal parts")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(seed, &[TAG_SPLIT]));
    Ok(idx
        .chunks(n / k)
        .map(|c| {
            let mut c = c.to_vec();
            c.sort_unstable();
            c
        })
        .collect())
}

pub fn diabetes_workflow(data: &Dataset, config: &DiabetesConfig) -> Result<DiabetesReport> {
    diabetes_workflow_with(Execution::Auto, data, config)
}

pub fn diabetes_workflow_with(exec: Execution, data: &Dataset, config: &DiabetesConfig) -> Result<DiabetesReport> {
    if data.n() != DIABETES_N || data.p() != DIABETES_P {
        return Err(Error::Dimension(format!(
            "diabetes data must be {DIABETES_N} x {DIABETES_P}, got {} x {}",
            data.n(),
            data.p()
        )));
    }
    config.sampler.validate()?;
    let q = config.groups.iter().max().map_or(0, |g| g + 1);
    config.search.validate(q)?;
    let (scaled, column_scales) = if config.standardize {
        let (d, s) = data.standardized()?;
        (d, Some(s))
    } else {
        (data.clone(), None)
    };
    let (prepared, response_mean) = scaled.centered_response()?;
    let parts = partition(DIABETES_N, config.splits, config.seed)?;
    let splits = map_indices_with(exec, parts.len(), |k| fit_split(&prepared, &parts[k], k, q, config))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(DiabetesReport { config: config.clone(), column_scales, response_mean, splits })
}

fn fit_split(all: &Dataset, rows: &[usize], split: usize, q: usize, config: &DiabetesConfig) -> Result<SplitReport> {
    let data = all.select_rows(rows)?;
    let sigma2 = residual_variance(&data)?;
    let model = LikelihoodModel::LinearGaussian { sigma2 };
    let base = PriorSpec::new(PriorFamily::Laplace, config.groups.clone(), data.n(), vec![1.0; q])?;
    let sampler = config.sampler.with_seed(derive_seed(config.seed, &[split as u64, TAG_MCMC]));

    let w = minimize_criterion(|xi| waic_at(&model, &base.with_xi(xi)?, &data, &sampler), q, &config.search, &[])?;
    let theta_w = map_estimate(&model, &base.with_xi(&w.xi_hat)?, &data)?;
    let waic2 = Selection {
        xi_hat: w.xi_hat,
        criterion_value: w.value,
        piic2: None,
        active_set: ActiveSet::from_point(&theta_w).indices().to_vec(),
        estimate: theta_w.into_vec(),
    };

    let s = minimize_criterion(
        |xi| Ok(piic_at(&model, &base.with_xi(xi)?, &data, &sampler)?.piic.value),
        q,
        &config.search,
        &[],
    )?;
    let prior = base.with_xi(&s.xi_hat)?;
    let fit = piic_at(&model, &prior, &data, &sampler)?;
    let full = posterior_at(&model, &prior, &data, &sampler)?;
    let total = piic2(&fit.piic, &j_pair(&full, &data)?)?;
    let piic2 = Selection {
        xi_hat: s.xi_hat,
        criterion_value: s.value,
        piic2: Some(total.value),
        active_set: fit.active.indices().to_vec(),
        estimate: fit.theta_hat.into_vec(),
    };
    Ok(SplitReport { split, rows: rows.to_vec(), sigma2, waic2, piic2 })
}

//! Run configuration read from `--config`, with command-line overrides.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use piic::causal::MsmSimulation;
use piic::experiments::{Grouping, ScenarioConfig};
use piic::hyperopt::XiSearchSpace;
use piic::inference::SamplerConfig;
use piic::models::PriorFamily;
use serde::{Deserialize, Serialize};

use crate::error::{config, CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every stochastic step derives its stream from it.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub search: XiSearchSpace,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub analyze: Option<AnalyzeConfig>,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub causal_sim: Option<CausalSimConfig>,
    #[serde(default)]
    pub diabetes: Option<DiabetesRun>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Dic,
    Waic,
    Piic,
    Piic2,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [Criterion::Dic, Criterion::Waic, Criterion::Piic, Criterion::Piic2];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Dic => "dic",
            Criterion::Waic => "waic",
            Criterion::Piic => "piic",
            Criterion::Piic2 => "piic2",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown criterion '{s}' (expected dic, waic, piic or piic2)"))
    }
}

/// Observation model for `analyze`. A Gaussian fit without `sigma2` uses the
/// least-squares residual variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    LinearGaussian {
        #[serde(default)]
        sigma2: Option<f64>,
    },
    LogisticBinomial {
        m: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub family: PriorFamily,
    /// Hyperparameter group of each coefficient; one shared group by default.
    #[serde(default)]
    pub groups: Option<Vec<usize>>,
    /// Prior sample size; defaults to the number of rows.
    #[serde(default)]
    pub n0: Option<usize>,
}

impl PriorConfig {
    pub fn groups_for(&self, p: usize) -> CliResult<Vec<usize>> {
        match &self.groups {
            None => Ok(vec![0; p]),
            Some(g) if g.len() == p => Ok(g.clone()),
            Some(g) => config(format!("prior.groups has {} entries for {p} coefficients", g.len())),
        }
    }
}

fn default_response() -> String {
    "y".to_string()
}

fn default_criteria() -> Vec<Criterion> {
    Criterion::ALL.to_vec()
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub data: PathBuf,
    #[serde(default = "default_response")]
    pub response: String,
    /// Covariate columns in order; every other column by default.
    #[serde(default)]
    pub covariates: Option<Vec<String>>,
    #[serde(default)]
    pub standardize: bool,
    pub model: ModelConfig,
    pub prior: PriorConfig,
    #[serde(default = "default_criteria")]
    pub criteria: Vec<Criterion>,
    /// Compare closed-form and sampled criteria (conjugate configurations).
    #[serde(default)]
    pub cross_check: bool,
}

fn default_replications() -> usize {
    100
}

fn default_risk_draws() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// Preset table (1, 2 or 3).
    #[serde(default)]
    pub table: Option<u8>,
    /// Row indices of the preset table; all rows by default.
    #[serde(default)]
    pub rows: Option<Vec<usize>>,
    /// Explicit scenarios, run after the preset rows.
    #[serde(default)]
    pub scenarios: Vec<ScenarioConfig>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_risk_draws")]
    pub risk_draws: usize,
    #[serde(default)]
    pub risk_posterior_draws: Option<usize>,
    /// Restricts the hyperparameter groupings of preset rows.
    #[serde(default)]
    pub groupings: Option<Vec<Grouping>>,
}

fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CausalSimConfig {
    pub simulation: MsmSimulation,
    /// Estimate the propensities instead of using the assignment table.
    #[serde(default)]
    pub fitted_propensity: bool,
    pub prior: PriorConfig,
    /// Outcome variance of the Gaussian fit; `noise_sd^2` by default.
    #[serde(default)]
    pub sigma2: Option<f64>,
    #[serde(default = "default_one")]
    pub replications: usize,
    #[serde(default)]
    pub piic2: bool,
}

fn default_splits() -> usize {
    13
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiabetesRun {
    pub data: PathBuf,
    #[serde(default = "default_response")]
    pub response: String,
    #[serde(default = "default_splits")]
    pub splits: usize,
    #[serde(default = "default_true")]
    pub standardize: bool,
    #[serde(default)]
    pub groups: Option<Vec<usize>>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub criteria: Option<Vec<Criterion>>,
    pub cross_check: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Simulate,
    CausalSim,
    Diabetes,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Simulate => "simulate",
            Command::CausalSim => "causal-sim",
            Command::Diabetes => "diabetes",
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    /// Reads the file, applies overrides, resolves relative input paths
    /// against the config's directory and checks the invariants for `command`.
    pub fn load(path: &Path, command: Command, overrides: &Overrides) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.apply(overrides);
        cfg.resolve_paths(base);
        cfg.validate(command)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.out.is_some() {
            self.out = o.out.clone();
        }
        if let Some(a) = self.analyze.as_mut() {
            if let Some(c) = &o.criteria {
                a.criteria = c.clone();
            }
            a.cross_check |= o.cross_check;
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(a) = self.analyze.as_mut() {
            fix(&mut a.data);
        }
        if let Some(d) = self.diabetes.as_mut() {
            fix(&mut d.data);
        }
    }

    pub fn seed(&self) -> CliResult<u64> {
        self.seed.ok_or_else(|| CliError::Config("config: no seed given (set \"seed\" or pass --seed)".into()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn validate(&self, command: Command) -> CliResult<()> {
        self.seed()?;
        self.sampler.validate().map_err(|e| CliError::Config(format!("sampler: {e}")))?;
        let missing = |what: &str| CliError::Config(format!("config: no \"{what}\" section for {}", command.name()));
        let exists = |p: &Path| {
            if p.is_file() {
                Ok(())
            } else {
                config(format!("input file {} does not exist", p.display()))
            }
        };
        match command {
            Command::Analyze => {
                let a = self.analyze.as_ref().ok_or_else(|| missing("analyze"))?;
                exists(&a.data)?;
                if a.criteria.is_empty() {
                    return config("analyze: no criteria requested");
                }
                let unique: BTreeSet<_> = a.criteria.iter().collect();
                if unique.len() != a.criteria.len() {
                    return config("analyze: criteria listed twice");
                }
            }
            Command::Simulate => {
                let s = self.simulate.as_ref().ok_or_else(|| missing("simulate"))?;
                if s.table.is_none() && s.scenarios.is_empty() {
                    return config("simulate: give a preset table or explicit scenarios");
                }
                if s.rows.is_some() && s.table.is_none() {
                    return config("simulate: rows need a preset table");
                }
                if s.replications == 0 || s.risk_draws == 0 {
                    return config("simulate: replications and risk_draws must be positive");
                }
            }
            Command::CausalSim => {
                let c = self.causal_sim.as_ref().ok_or_else(|| missing("causal_sim"))?;
                if c.replications == 0 {
                    return config("causal_sim: replications must be positive");
                }
            }
            Command::Diabetes => {
                let d = self.diabetes.as_ref().ok_or_else(|| missing("diabetes"))?;
                exists(&d.data)?;
            }
        }
        Ok(())
    }
}

pub fn parse_criteria(s: &str) -> Result<Vec<Criterion>, String> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(Criterion::from_str).collect()
}

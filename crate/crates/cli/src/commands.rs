//! The four subcommands. Each returns its report, table and summary; nothing
//! here touches the output directory.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::path::PathBuf;

use piic::causal::{ipw_j_pair, ipw_posterior, piic2_ip, piic_ip_at, PropensitySpec};
use piic::criteria::{dic, evaluate, fisher_pair, piic, piic_at, waic_at, waic_parts, CriterionReport};
use piic::experiments::diabetes::{diabetes_workflow, DiabetesConfig, DiabetesReport};
use piic::experiments::tables::{table, ReportedCells, RunSettings, TableRow};
use piic::experiments::{residual_variance, run_comparison, ComparisonRow, Link, NoiseLaw, ScenarioConfig, Truth};
use piic::hyperopt::minimize_criterion;
use piic::inference::{map_estimate, mcmc_sample, posterior_at};
use piic::models::{LikelihoodModel, PriorFamily, PriorSpec, ResponseKind};
use piic::rng::derive_seed;
use serde::{Deserialize, Serialize};

use crate::config::{Criterion, ModelConfig, RunConfig};
use crate::error::{config, tagged, CliError, CliResult};
use crate::ingest::{ingest_csv, ColumnInfo, Schema};
use crate::output::{fixed, opt_fixed, to_json, Table};

const TAG_SAMPLER: u64 = 0x5341;
const TAG_CAUSAL: u64 = 0x4341;

/// Relative tolerance of the closed-form versus sampled cross-check.
pub const CROSS_CHECK_TOL: f64 = 1e-2;

pub struct Outcome {
    pub report: Vec<u8>,
    pub table: Table,
    pub summary: String,
    pub inputs: Vec<PathBuf>,
    /// Numerical failure detected after the outputs were assembled.
    pub failure: Option<CliError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub path: String,
    pub n: usize,
    pub p: usize,
    pub response: String,
    pub columns: Vec<ColumnInfo>,
    pub content_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub minimum: f64,
    pub grid_evaluations: usize,
    pub simplex_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub criterion: Criterion,
    /// Criterion whose minimum fixed `xi_hat` (PIIC2 is reported at the PIIC optimum).
    pub selected_by: Criterion,
    pub xi_hat: Vec<f64>,
    pub value: f64,
    /// Hyperparameter penalty `tr(J1^-1 J2)`, present for PIIC2.
    pub j_penalty: Option<f64>,
    /// `None` when the prior has no free hyperparameter.
    pub search: Option<SearchSummary>,
    pub report: CriterionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheckEntry {
    pub criterion: Criterion,
    pub quantity: String,
    pub closed_form: f64,
    pub sampled: f64,
    pub rel_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub applicable: bool,
    pub tolerance: f64,
    pub entries: Vec<CrossCheckEntry>,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub dataset: DatasetSummary,
    pub model: LikelihoodModel,
    pub prior: PriorSpec,
    pub selections: Vec<Selection>,
    pub cross_check: Option<CrossCheck>,
}

fn criterion_value(r: &CriterionReport, c: Criterion) -> f64 {
    match c {
        Criterion::Dic => r.dic,
        Criterion::Waic => r.waic,
        Criterion::Piic => r.piic,
        Criterion::Piic2 => r.piic2.unwrap_or(f64::NAN),
    }
}

pub fn analyze(cfg: &RunConfig) -> CliResult<Outcome> {
    let a = cfg.analyze.as_ref().ok_or_else(|| CliError::Config("config: no \"analyze\" section".into()))?;
    let seed = cfg.seed()?;
    let kind = match a.model {
        ModelConfig::LinearGaussian { .. } => ResponseKind::Gaussian,
        ModelConfig::LogisticBinomial { m } => ResponseKind::Binomial { m },
    };
    let schema =
        Schema { response: a.response.clone(), covariates: a.covariates.clone(), standardize: a.standardize, kind };
    let ing = ingest_csv(&a.data, &schema)?;
    let data = &ing.data;
    let model = match a.model {
        ModelConfig::LinearGaussian { sigma2: Some(s) } => LikelihoodModel::LinearGaussian { sigma2: s },
        ModelConfig::LinearGaussian { sigma2: None } => {
            LikelihoodModel::LinearGaussian { sigma2: residual_variance(data).map_err(tagged("models"))? }
        }
        ModelConfig::LogisticBinomial { m } => LikelihoodModel::LogisticBinomial { m },
    };
    model.validate().map_err(tagged("models"))?;
    let groups = a.prior.groups_for(data.p())?;
    let q = groups.iter().max().map_or(0, |g| g + 1);
    let n0 = a.prior.n0.unwrap_or(data.n());
    let base = PriorSpec::new(a.prior.family, groups, n0, vec![1.0; q]).map_err(tagged("models"))?;
    let searched = base.family != PriorFamily::Flat;
    if searched {
        cfg.search.validate(q).map_err(tagged("hyperopt"))?;
    }
    let sampler = cfg.sampler.with_seed(derive_seed(seed, &[TAG_SAMPLER]));

    let mut searches: BTreeMap<Criterion, (Vec<f64>, Option<SearchSummary>)> = BTreeMap::new();
    let mut selections = Vec::new();
    for &criterion in &a.criteria {
        let by = if criterion == Criterion::Piic2 { Criterion::Piic } else { criterion };
        if let Entry::Vacant(e) = searches.entry(by) {
            let found = if searched {
                let objective = |xi: &[f64]| -> piic::Result<f64> {
                    let prior = base.with_xi(xi)?;
                    match by {
                        Criterion::Dic => dic(&posterior_at(&model, &prior, data, &sampler)?, data),
                        Criterion::Waic => waic_at(&model, &prior, data, &sampler),
                        _ => Ok(piic_at(&model, &prior, data, &sampler)?.piic.value),
                    }
                };
                let r = minimize_criterion(objective, q, &cfg.search, &[]).map_err(tagged("hyperopt"))?;
                let summary = SearchSummary {
                    minimum: r.value,
                    grid_evaluations: r.grid_evaluations,
                    simplex_evaluations: r.simplex_evaluations,
                };
                (r.xi_hat, Some(summary))
            } else {
                (base.xi.clone(), None)
            };
            e.insert(found);
        }
        let (xi_hat, search) = searches[&by].clone();
        let prior = base.with_xi(&xi_hat).map_err(tagged("models"))?;
        let report =
            evaluate(&model, &prior, data, &sampler, criterion == Criterion::Piic2).map_err(tagged("criteria"))?;
        selections.push(Selection {
            criterion,
            selected_by: by,
            xi_hat,
            value: criterion_value(&report, criterion),
            j_penalty: report.penalty_xi,
            search,
            report,
        });
    }

    let cross_check = if a.cross_check { Some(cross_check(&model, &base, data, &sampler, &selections)?) } else { None };
    let failure = match &cross_check {
        Some(c) if c.applicable && !c.agree => Some(CliError::Failure(format!(
            "cross-check: closed-form and sampled criteria differ by more than {CROSS_CHECK_TOL}"
        ))),
        _ => None,
    };

    let report = AnalyzeReport {
        dataset: DatasetSummary {
            path: a.data.display().to_string(),
            n: data.n(),
            p: data.p(),
            response: a.response.clone(),
            columns: ing.columns.clone(),
            content_hash: data.content_hash(),
        },
        model,
        prior: base,
        selections,
        cross_check,
    };
    let mut table = Table::new(&[
        "criterion",
        "selected_by",
        "xi_hat",
        "value",
        "dic",
        "waic",
        "piic",
        "piic2",
        "penalty_theta",
        "j_penalty",
        "active_set",
    ]);
    let mut summary = format!("analyze: n={} p={} {:?} prior\n", data.n(), data.p(), report.prior.family);
    for s in &report.selections {
        let xi: Vec<String> = s.xi_hat.iter().map(|v| format!("{v:.4e}")).collect();
        let active: Vec<String> = s.report.active_set.iter().map(usize::to_string).collect();
        table.push(vec![
            s.criterion.to_string(),
            s.selected_by.to_string(),
            xi.join(";"),
            fixed(s.value, 3),
            fixed(s.report.dic, 3),
            fixed(s.report.waic, 3),
            fixed(s.report.piic, 3),
            opt_fixed(s.report.piic2, 3),
            fixed(s.report.penalty_theta, 3),
            opt_fixed(s.j_penalty, 3),
            active.join(";"),
        ]);
        summary.push_str(&format!(
            "  {:<6} {:>12.3}  xi_hat=[{}]  active={}/{}\n",
            s.criterion.name(),
            s.value,
            xi.join(", "),
            s.report.active_set.len(),
            data.p()
        ));
    }
    if let Some(c) = &report.cross_check {
        if c.applicable {
            let worst = c.entries.iter().map(|e| e.rel_diff).fold(0.0, f64::max);
            let verdict = if c.agree { "agree" } else { "DISAGREE" };
            summary.push_str(&format!("  cross-check: {verdict} (max rel diff {worst:.2e}, tol {CROSS_CHECK_TOL})\n"));
        } else {
            summary.push_str("  cross-check: skipped, prior is not conjugate with the model\n");
        }
    }
    Ok(Outcome { report: to_json(&report)?, table, summary, inputs: vec![a.data.clone()], failure })
}

fn cross_check(
    model: &LikelihoodModel,
    base: &PriorSpec,
    data: &piic::models::Dataset,
    sampler: &piic::inference::SamplerConfig,
    selections: &[Selection],
) -> CliResult<CrossCheck> {
    if !base.is_conjugate_with(model) {
        return Ok(CrossCheck { applicable: false, tolerance: CROSS_CHECK_TOL, entries: Vec::new(), agree: true });
    }
    let mut entries = Vec::new();
    for s in selections {
        let prior = base.with_xi(&s.xi_hat).map_err(tagged("models"))?;
        let exact = posterior_at(model, &prior, data, sampler).map_err(tagged("inference"))?;
        let map = map_estimate(model, &prior, data).map_err(tagged("inference"))?;
        let sampled = mcmc_sample(model, &prior, data, &map, sampler).map_err(tagged("inference"))?;
        let fisher = fisher_pair(model, &prior, data, &map, None).map_err(tagged("criteria"))?;
        let quantities = |post: &piic::inference::Posterior| -> piic::Result<[(&'static str, f64); 4]> {
            let w = waic_parts(post, data)?;
            Ok([
                ("lppd", w.lppd),
                ("waic", w.value),
                ("dic", dic(post, data)?),
                ("piic", piic(post, data, &fisher)?.value),
            ])
        };
        let a = quantities(&exact).map_err(tagged("criteria"))?;
        let b = quantities(&sampled).map_err(tagged("criteria"))?;
        for ((name, x), (_, y)) in a.into_iter().zip(b) {
            entries.push(CrossCheckEntry {
                criterion: s.criterion,
                quantity: name.to_string(),
                closed_form: x,
                sampled: y,
                rel_diff: (x - y).abs() / x.abs().max(f64::MIN_POSITIVE),
            });
        }
    }
    let agree = entries.iter().all(|e| e.rel_diff <= CROSS_CHECK_TOL);
    Ok(CrossCheck { applicable: true, tolerance: CROSS_CHECK_TOL, entries, agree })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedRow {
    pub label: String,
    pub table: Option<u8>,
    pub row: Option<usize>,
    /// Published cells of the preset row.
    pub reported: Option<ReportedCells>,
    pub result: ComparisonRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub rows: Vec<SimulatedRow>,
}

fn truth_label(t: &Truth) -> String {
    match *t {
        Truth::Linear { noise: NoiseLaw::Normal { variance } } => format!("N(0,{variance})"),
        Truth::Linear { noise: NoiseLaw::StudentT { dof } } => format!("t({dof})"),
        Truth::Binomial { m, link } => format!("m={m} {}", if link == Link::Logit { "logit" } else { "probit" }),
    }
}

fn scenario_label(s: &ScenarioConfig) -> String {
    let [a, b, c] = s.theta_pattern;
    format!("n={} p={} theta=({a},{b},{c}) {}", s.n, s.p, truth_label(&s.truth))
}

type Job = (String, Option<u8>, Option<usize>, Option<ReportedCells>, ScenarioConfig);

pub fn simulate(cfg: &RunConfig) -> CliResult<Outcome> {
    let sc = cfg.simulate.as_ref().ok_or_else(|| CliError::Config("config: no \"simulate\" section".into()))?;
    let seed = cfg.seed()?;
    let settings = RunSettings {
        replications: sc.replications,
        risk_draws: sc.risk_draws,
        risk_posterior_draws: sc.risk_posterior_draws,
        seed,
        sampler: cfg.sampler.clone(),
        search: cfg.search.clone(),
    };
    let mut jobs: Vec<Job> = Vec::new();
    if let Some(k) = sc.table {
        let Some(rows): Option<Vec<TableRow>> = table(k) else {
            return config(format!("simulate: no preset table {k} (expected 1, 2 or 3)"));
        };
        let picked: Vec<usize> = sc.rows.clone().unwrap_or_else(|| (0..rows.len()).collect());
        for i in picked {
            let Some(row) = rows.get(i) else {
                return config(format!("simulate: table {k} has no row {i} (rows 0..{})", rows.len()));
            };
            let mut s = row.scenario(&settings);
            if let Some(g) = &sc.groupings {
                s.groupings = g.clone();
            }
            jobs.push((row.label(), Some(k), Some(i), Some(row.reported), s));
        }
    }
    for s in &sc.scenarios {
        let s = ScenarioConfig { seed, ..s.clone() };
        jobs.push((scenario_label(&s), None, None, None, s));
    }
    for (_, _, _, _, s) in &jobs {
        s.validate().map_err(tagged("experiments"))?;
    }

    let mut rows = Vec::new();
    let mut failure = None;
    for (label, table, row, reported, s) in jobs {
        let result = run_comparison(&s).map_err(tagged("experiments"))?;
        if result.completed == 0 && failure.is_none() {
            let msg = result.failure_messages.first().cloned().unwrap_or_default();
            failure = Some(CliError::Failure(format!("experiments: {label}: every replication failed ({msg})")));
        }
        rows.push(SimulatedRow { label, table, row, reported, result });
    }

    let mut out = Table::new(&[
        "label",
        "n",
        "p",
        "truth",
        "prior",
        "replications",
        "completed",
        "waic1",
        "piic1",
        "rate1",
        "waic2",
        "piic2",
        "rate2",
        "paper_waic1",
        "paper_piic1",
        "paper_rate1",
        "paper_waic2",
        "paper_piic2",
        "paper_rate2",
    ]);
    let mut summary = String::from("simulate: mean KL risk (WAIC1 PIIC1 | WAIC2 PIIC2)\n");
    for r in &rows {
        let c = &r.result.config;
        let risk = |arm: &str| r.result.mean.get(arm).map(|m| m.risk);
        let rate = |t: Option<piic::experiments::RateTriple>| {
            t.map(|t| format!("{}/{}/{}", t.less, t.equal, t.greater)).unwrap_or_default()
        };
        let paper_rate = |v: [usize; 3]| format!("{}/{}/{}", v[0], v[1], v[2]);
        let paper = r.reported;
        out.push(vec![
            r.label.clone(),
            c.n.to_string(),
            c.p.to_string(),
            truth_label(&c.truth),
            format!("{:?}", c.prior_family).to_lowercase(),
            c.replications.to_string(),
            r.result.completed.to_string(),
            opt_fixed(risk("waic1"), 3),
            opt_fixed(risk("piic1"), 3),
            rate(r.result.rate1),
            opt_fixed(risk("waic2"), 3),
            opt_fixed(risk("piic2"), 3),
            rate(r.result.rate2),
            opt_fixed(paper.map(|p| p.waic1), 3),
            opt_fixed(paper.map(|p| p.piic1), 3),
            paper.map(|p| paper_rate(p.rate1)).unwrap_or_default(),
            opt_fixed(paper.map(|p| p.waic2), 3),
            opt_fixed(paper.map(|p| p.piic2), 3),
            paper.map(|p| paper_rate(p.rate2)).unwrap_or_default(),
        ]);
        summary.push_str(&format!(
            "  {:<40} {:>8} {:>8} | {:>8} {:>8}  ({} of {} replications)\n",
            r.label,
            opt_fixed(risk("waic1"), 3),
            opt_fixed(risk("piic1"), 3),
            opt_fixed(risk("waic2"), 3),
            opt_fixed(risk("piic2"), 3),
            r.result.completed,
            c.replications
        ));
    }
    let report = SimulateReport { rows };
    Ok(Outcome { report: to_json(&report)?, table: out, summary, inputs: Vec::new(), failure })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalReplication {
    pub replication: usize,
    pub seed: u64,
    pub propensity_fitted: bool,
    /// Rows whose propensity was raised to the floor.
    pub clipped: usize,
    pub xi_hat: Vec<f64>,
    pub piic_ip: f64,
    pub lppd: f64,
    pub penalty_theta: f64,
    pub piic2_ip: Option<f64>,
    pub penalty_xi: Option<f64>,
    pub theta_hat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalReport {
    pub model: LikelihoodModel,
    pub prior_family: PriorFamily,
    pub true_marginal_means: Vec<f64>,
    pub replications: Vec<CausalReplication>,
    pub failures: Vec<String>,
}

pub fn causal_sim(cfg: &RunConfig) -> CliResult<Outcome> {
    let c = cfg.causal_sim.as_ref().ok_or_else(|| CliError::Config("config: no \"causal_sim\" section".into()))?;
    let seed = cfg.seed()?;
    let sim = &c.simulation;
    let model = match sim.binomial_m {
        Some(m) => LikelihoodModel::LogisticBinomial { m },
        None => LikelihoodModel::LinearGaussian { sigma2: c.sigma2.unwrap_or(sim.noise_sd * sim.noise_sd) },
    };
    model.validate().map_err(tagged("models"))?;
    let p = sim.mu.len();
    let groups = c.prior.groups_for(p)?;
    let q = groups.iter().max().map_or(0, |g| g + 1);
    let n0 = c.prior.n0.unwrap_or(sim.n);
    let base = PriorSpec::new(c.prior.family, groups, n0, vec![1.0; q]).map_err(tagged("models"))?;
    let searched = base.family != PriorFamily::Flat;
    if searched {
        cfg.search.validate(q).map_err(tagged("hyperopt"))?;
    }

    let mut replications = Vec::new();
    let mut failures = Vec::new();
    for rep in 0..c.replications {
        let rep_seed = derive_seed(seed, &[TAG_CAUSAL, rep as u64]);
        let spec = if c.fitted_propensity {
            PropensitySpec::Fitted
        } else {
            PropensitySpec::Known { table: sim.assignment.clone() }
        };
        let data = match sim.generate(rep_seed, spec) {
            Ok(d) => d,
            Err(e) if e.is_input_error() && rep == 0 => return Err(tagged("causal")(e)),
            Err(e) => {
                failures.push(format!("replication {rep}: {e}"));
                continue;
            }
        };
        let sampler = cfg.sampler.with_seed(derive_seed(rep_seed, &[TAG_SAMPLER]));
        let fit = || -> piic::Result<CausalReplication> {
            let xi_hat = if searched {
                let objective = |xi: &[f64]| Ok(piic_ip_at(&model, &base.with_xi(xi)?, &data, &sampler)?.0.value);
                minimize_criterion(objective, q, &cfg.search, &[])?.xi_hat
            } else {
                base.xi.clone()
            };
            let prior = base.with_xi(&xi_hat)?;
            let (value, theta_hat, _) = piic_ip_at(&model, &prior, &data, &sampler)?;
            let (piic2_value, penalty_xi) = if c.piic2 {
                let full = ipw_posterior(&model, &prior, &data, &sampler)?;
                let v = piic2_ip(&value, &ipw_j_pair(&full, &data)?)?;
                (Some(v.value), Some(v.penalty_xi))
            } else {
                (None, None)
            };
            Ok(CausalReplication {
                replication: rep,
                seed: rep_seed,
                propensity_fitted: data.is_fitted(),
                clipped: data.clipped_count(),
                xi_hat,
                piic_ip: value.value,
                lppd: value.lppd,
                penalty_theta: value.penalty,
                piic2_ip: piic2_value,
                penalty_xi,
                theta_hat: theta_hat.into_vec(),
            })
        };
        match fit() {
            Ok(r) => replications.push(r),
            Err(e) if e.is_input_error() => return Err(tagged("causal")(e)),
            Err(e) => failures.push(format!("replication {rep}: {e}")),
        }
    }
    let failure = replications.is_empty().then(|| {
        CliError::Failure(format!(
            "causal: every replication failed ({})",
            failures.first().cloned().unwrap_or_default()
        ))
    });

    let mut header = vec!["replication", "seed", "clipped", "piic_ip", "penalty_theta", "piic2_ip", "penalty_xi"];
    let names: Vec<String> = (0..p).map(|h| format!("theta_{h}")).collect();
    header.extend(names.iter().map(String::as_str));
    let mut table = Table::new(&header);
    for r in &replications {
        let mut row = vec![
            r.replication.to_string(),
            r.seed.to_string(),
            r.clipped.to_string(),
            fixed(r.piic_ip, 3),
            fixed(r.penalty_theta, 3),
            opt_fixed(r.piic2_ip, 3),
            opt_fixed(r.penalty_xi, 3),
        ];
        row.extend(r.theta_hat.iter().map(|v| fixed(*v, 3)));
        table.push(row);
    }
    let mut summary = format!(
        "causal-sim: {} of {} replications, {} treatments, {} propensities\n",
        replications.len(),
        c.replications,
        p,
        if c.fitted_propensity { "fitted" } else { "known" }
    );
    if !replications.is_empty() {
        let k = replications.len() as f64;
        let mean: Vec<String> =
            (0..p).map(|h| fixed(replications.iter().map(|r| r.theta_hat[h]).sum::<f64>() / k, 3)).collect();
        let truth: Vec<String> = sim.marginal_means().iter().map(|v| fixed(*v, 3)).collect();
        summary.push_str(&format!("  mean MAP [{}], true means [{}]\n", mean.join(", "), truth.join(", ")));
    }
    let report = CausalReport {
        model,
        prior_family: base.family,
        true_marginal_means: sim.marginal_means(),
        replications,
        failures,
    };
    Ok(Outcome { report: to_json(&report)?, table, summary, inputs: Vec::new(), failure })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiabetesOutput {
    pub dataset: DatasetSummary,
    pub splits_with_different_active_sets: usize,
    pub report: DiabetesReport,
}

pub fn diabetes(cfg: &RunConfig) -> CliResult<Outcome> {
    let d = cfg.diabetes.as_ref().ok_or_else(|| CliError::Config("config: no \"diabetes\" section".into()))?;
    let seed = cfg.seed()?;
    let schema =
        Schema { response: d.response.clone(), covariates: None, standardize: false, kind: ResponseKind::Gaussian };
    let ing = ingest_csv(&d.data, &schema)?;
    let mut dc = DiabetesConfig::new(seed);
    dc.splits = d.splits;
    dc.standardize = d.standardize;
    if let Some(g) = &d.groups {
        dc.groups = g.clone();
    }
    dc.sampler = cfg.sampler.clone();
    dc.search = cfg.search.clone();
    let report = diabetes_workflow(&ing.raw, &dc).map_err(tagged("diabetes"))?;

    let names: Vec<String> = ing.columns.iter().map(|c| c.name.clone()).collect();
    let mut header = vec!["split"];
    header.extend(names.iter().map(String::as_str));
    let mut table = Table::new(&header);
    for (label, est) in report.table() {
        let mut row = vec![label];
        row.extend(est.iter().map(|v| fixed(*v, 2)));
        table.push(row);
    }
    let differ = report.splits_with_different_active_sets();
    let zeros: usize = report.table().iter().map(|(_, e)| e.iter().filter(|v| **v == 0.0).count()).sum();
    let summary = format!(
        "diabetes: {} splits of {}, active sets differ on {differ}, {zeros} exact zeros in the {}x{} table\n",
        report.splits.len(),
        ing.raw.n() / report.splits.len().max(1),
        table.rows.len(),
        names.len()
    );
    let columns = match &report.column_scales {
        Some(s) => names.iter().zip(s).map(|(n, s)| ColumnInfo { name: n.clone(), scale: Some(*s) }).collect(),
        None => ing.columns.clone(),
    };
    let out = DiabetesOutput {
        dataset: DatasetSummary {
            path: d.data.display().to_string(),
            n: ing.raw.n(),
            p: ing.raw.p(),
            response: d.response.clone(),
            columns,
            content_hash: ing.raw.content_hash(),
        },
        splits_with_different_active_sets: differ,
        report,
    };
    Ok(Outcome { report: to_json(&out)?, table, summary, inputs: vec![d.data.clone()], failure: None })
}

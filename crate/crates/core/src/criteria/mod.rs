//! Information criteria on top of a fitted posterior: DIC, WAIC, PIIC (dense
//! and sparse) and PIIC2.

mod fisher;
mod predictive;
mod xi;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::inference::{map_fit_weighted, posterior_at, restricted_posterior, ActiveSet, Posterior, SamplerConfig};
use crate::models::{Dataset, LikelihoodModel, ParameterPoint, PriorFamily, PriorSpec};

pub use fisher::{active_penalty, fisher_pair, piic, FisherPair, PiicValue};
pub use predictive::{
    dic, lppd, predictive_logdens, predictive_logdens_rows, row_moments, waic, waic_parts, RowMoments, WaicParts,
};
pub use xi::{
    fd_step, j_pair, perturb_posterior, piic2, xi_score, xi_score_fd, xi_score_fd_with, xi_scores, JPair, Piic2Value,
    J1_REL_STEP,
};

pub(crate) use fisher::{fisher_pair_weighted, piic_weighted, RowWeights};
pub(crate) use predictive::powered_log_pred_rows;
pub(crate) use xi::j_pair_weighted;

/// PIIC at one hyperparameter value, together with the pieces it was built from.
#[derive(Debug, Clone)]
pub struct PiicFit {
    pub piic: PiicValue,
    pub theta_hat: ParameterPoint,
    pub active: ActiveSet,
    /// Posterior used for the predictive term (restricted for Laplace priors).
    pub posterior: Posterior,
    pub map_converged: bool,
}

/// PIIC at the prior's hyperparameters. Laplace priors use the sparse form:
/// predictive densities from the posterior restricted to the MAP active set
/// and the information pair on that set.
pub fn piic_at(model: &LikelihoodModel, prior: &PriorSpec, data: &Dataset, config: &SamplerConfig) -> Result<PiicFit> {
    let fit = map_fit_weighted(model, prior, data, None)?;
    let theta_hat = fit.theta;
    let active = match prior.family {
        PriorFamily::Laplace => ActiveSet::from_point(&theta_hat),
        _ => ActiveSet::all(data.p()),
    };
    let posterior = if prior.family == PriorFamily::Laplace && active.len() < data.p() {
        restricted_posterior(model, prior, data, &theta_hat, &active, config)?
    } else {
        posterior_at(model, prior, data, config)?
    };
    let fisher = fisher_pair(model, prior, data, &theta_hat, Some(&active))?;
    let value = piic(&posterior, data, &fisher)?;
    Ok(PiicFit { piic: value, theta_hat, active, posterior, map_converged: fit.converged })
}

/// WAIC of the full posterior at the prior's hyperparameters.
pub fn waic_at(model: &LikelihoodModel, prior: &PriorSpec, data: &Dataset, config: &SamplerConfig) -> Result<f64> {
    waic(&posterior_at(model, prior, data, config)?, data)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub acceptance_rate: Option<f64>,
    pub restricted_acceptance_rate: Option<f64>,
    pub information_condition: f64,
    pub information_pseudo_inverse: bool,
    pub j_pseudo_inverse: Option<bool>,
    pub empty_active_set: bool,
    pub map_converged: bool,
}

/// All criteria at one hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub dic: f64,
    pub waic: f64,
    pub piic: f64,
    pub piic2: Option<f64>,
    /// `sum_i log f(z_i | z; xi)` under the full posterior.
    pub lppd: f64,
    /// Same under the restricted posterior (sparse case only).
    pub lppd_active: Option<f64>,
    pub penalty_theta: f64,
    pub penalty_xi: Option<f64>,
    pub active_set: Vec<usize>,
    pub xi: Vec<f64>,
    pub map_point: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// Evaluates every criterion at `prior.xi`; PIIC2 terms are added when
/// `with_piic2` is set.
pub fn evaluate(
    model: &LikelihoodModel,
    prior: &PriorSpec,
    data: &Dataset,
    config: &SamplerConfig,
    with_piic2: bool,
) -> Result<CriterionReport> {
    let full = posterior_at(model, prior, data, config)?;
    let w = waic_parts(&full, data)?;
    let d = dic(&full, data)?;
    let sparse = piic_at(model, prior, data, config)?;
    let restricted = sparse.active.len() < data.p();
    let (piic2_value, penalty_xi, j_pinv) = if with_piic2 {
        let jp = j_pair(&full, data)?;
        let v = piic2(&sparse.piic, &jp)?;
        (Some(v.value), Some(v.penalty_xi), Some(v.pseudo_inverse))
    } else {
        (None, None, None)
    };
    Ok(CriterionReport {
        dic: d,
        waic: w.value,
        piic: sparse.piic.value,
        piic2: piic2_value,
        lppd: w.lppd,
        lppd_active: restricted.then_some(sparse.piic.lppd),
        penalty_theta: sparse.piic.penalty,
        penalty_xi,
        active_set: sparse.active.indices().to_vec(),
        xi: prior.xi.clone(),
        map_point: sparse.theta_hat.as_slice().to_vec(),
        diagnostics: Diagnostics {
            acceptance_rate: full.acceptance_rate(),
            restricted_acceptance_rate: if restricted { sparse.posterior.acceptance_rate() } else { None },
            information_condition: sparse.piic.cond,
            information_pseudo_inverse: sparse.piic.pseudo_inverse,
            j_pseudo_inverse: j_pinv,
            empty_active_set: sparse.active.is_empty(),
            map_converged: sparse.map_converged,
        },
    })
}

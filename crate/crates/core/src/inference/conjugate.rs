//! Closed-form posterior for normal and flat priors with a known-variance Gaussian likelihood.

use nalgebra::{DMatrix, DVector};

use super::{ActiveSet, Posterior, PosteriorForm};
use crate::error::{invalid, Error, Result};
use crate::inference::map::gaussian_normal_equations;
use crate::models::{Dataset, LikelihoodModel, ParameterPoint, PriorFamily, PriorSpec};

/// `N(mean, cov)` with `cov = (X'X / sigma2 + D)^-1`, `mean = cov X'y / sigma2`
/// and `D = diag((n / n0) / zeta_g)` (zero for a flat prior).
pub fn conjugate_posterior(model: &LikelihoodModel, prior: &PriorSpec, data: &Dataset) -> Result<Posterior> {
    conjugate_posterior_weighted(model, prior, data, None, None)
}

/// Conjugate posterior with coefficients outside `active` fixed at zero.
pub fn restricted_conjugate_posterior(
    model: &LikelihoodModel,
    prior: &PriorSpec,
    data: &Dataset,
    active: &ActiveSet,
) -> Result<Posterior> {
    conjugate_posterior_weighted(model, prior, data, None, Some(active))
}

pub(crate) fn conjugate_posterior_weighted(
    model: &LikelihoodModel,
    prior: &PriorSpec,
    data: &Dataset,
    weights: Option<&[f64]>,
    active: Option<&ActiveSet>,
) -> Result<Posterior> {
    if !prior.is_conjugate_with(model) {
        return invalid("closed-form posterior needs a normal or flat prior and a linear-Gaussian likelihood");
    }
    model.check_data(data)?;
    let p = data.p();
    if prior.p() != p {
        return Err(Error::Dimension(format!("prior covers {} coefficients, data has {p}", prior.p())));
    }
    let LikelihoodModel::LinearGaussian { sigma2 } = *model else { unreachable!() };
    let (g, b) = gaussian_normal_equations(data, weights, sigma2);
    let c = prior.exponent(data.n());
    let idx: Vec<usize> = match active {
        Some(a) => a.indices().to_vec(),
        None => (0..p).collect(),
    };
    let k = idx.len();
    let mut prec = DMatrix::from_fn(k, k, |a, b2| g[(idx[a], idx[b2])]);
    if prior.family == PriorFamily::Normal {
        for (a, &j) in idx.iter().enumerate() {
            prec[(a, a)] += c / prior.xi[prior.groups[j]];
        }
    }
    let rhs = DVector::from_iterator(k, idx.iter().map(|&j| b[j]));
    let chol =
        prec.cholesky().ok_or_else(|| Error::NonIdentifiable("posterior precision is not positive definite".into()))?;
    let cov_a = chol.inverse();
    let mean_a = &cov_a * rhs;
    let mut mean = DVector::zeros(p);
    let mut cov = DMatrix::zeros(p, p);
    for (a, &j) in idx.iter().enumerate() {
        mean[j] = mean_a[a];
        for (b2, &l) in idx.iter().enumerate() {
            cov[(j, l)] = cov_a[(a, b2)];
        }
    }
    let map_point = ParameterPoint::new(mean.iter().copied().collect())?;
    Ok(Posterior {
        form: PosteriorForm::Gaussian { mean, cov },
        map_point,
        model: *model,
        prior: prior.clone(),
        lik_weights: weights.map(<[f64]>::to_vec),
        active: active.cloned(),
        degenerate: false,
    })
}

//! Datasets, likelihoods, priors and the per-observation log-density
//! `log g(z_i, theta; xi) = log f(z_i | theta) + log pi(theta; xi) / n0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::function::factorial::ln_binomial;

use crate::error::{invalid, Error, Result};
use crate::inference::ActiveSet;
use crate::linalg::{sigmoid, softplus};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseKind {
    Gaussian,
    Binomial { m: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub mean: f64,
    pub sd: f64,
}

/// Rows of covariates and responses, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    response: ResponseKind,
}

impl Dataset {
    pub fn new(rows: &[Vec<f64>], y: Vec<f64>, response: ResponseKind) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Dimension("covariate rows have unequal lengths".into()));
        }
        Self::from_row_major(rows.len(), p, rows.concat(), y, response)
    }

    pub fn from_row_major(n: usize, p: usize, x: Vec<f64>, y: Vec<f64>, response: ResponseKind) -> Result<Self> {
        if n == 0 {
            return invalid("dataset needs at least one row");
        }
        if p == 0 {
            return invalid("dataset needs at least one covariate");
        }
        if x.len() != n * p || y.len() != n {
            return Err(Error::Dimension(format!(
                "expected {n}x{p} covariates and {n} responses, got {} and {}",
                x.len(),
                y.len()
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite covariate at row {}, column {}", i / p, i % p));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite response at row {i}"));
        }
        if let ResponseKind::Binomial { m } = response {
            if m == 0 {
                return invalid("binomial trials m must be positive");
            }
            if let Some(i) = y.iter().position(|&v| v < 0.0 || v > m as f64 || v.fract() != 0.0) {
                return invalid(format!("response {} at row {i} is not an integer in [0, {m}]", y[i]));
            }
        }
        Ok(Dataset { n, p, x, y, response })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn response(&self) -> ResponseKind {
        self.response
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.y[i]
    }

    pub fn responses(&self) -> &[f64] {
        &self.y
    }

    pub fn covariates(&self) -> &[f64] {
        &self.x
    }

    pub fn design(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.p, &self.x)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        let mut x = Vec::with_capacity(rows.len() * self.p);
        let mut y = Vec::with_capacity(rows.len());
        for &i in rows {
            if i >= self.n {
                return Err(Error::Dimension(format!("row {i} out of range")));
            }
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        Dataset::from_row_major(rows.len(), self.p, x, y, self.response)
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<Dataset> {
        if let Some(&j) = cols.iter().find(|&&j| j >= self.p) {
            return Err(Error::Dimension(format!("column {j} out of range")));
        }
        let x =
            (0..self.n).flat_map(|i| cols.iter().map(move |&j| (i, j))).map(|(i, j)| self.x[i * self.p + j]).collect();
        Dataset::from_row_major(self.n, cols.len(), x, self.y.clone(), self.response)
    }

    /// Covariates shifted to mean 0 and scaled to unit (population) variance,
    /// with the constants used.
    pub fn standardized(&self) -> Result<(Dataset, Vec<ColumnScale>)> {
        let n = self.n as f64;
        let mut scales = Vec::with_capacity(self.p);
        for j in 0..self.p {
            let mean = (0..self.n).map(|i| self.x[i * self.p + j]).sum::<f64>() / n;
            let var = (0..self.n).map(|i| (self.x[i * self.p + j] - mean).powi(2)).sum::<f64>() / n;
            if !(var > 0.0) {
                return invalid(format!("zero variance column {j}"));
            }
            scales.push(ColumnScale { mean, sd: var.sqrt() });
        }
        let x = self
            .x
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let s = scales[k % self.p];
                (v - s.mean) / s.sd
            })
            .collect();
        Ok((Dataset::from_row_major(self.n, self.p, x, self.y.clone(), self.response)?, scales))
    }

    /// Gaussian responses shifted to mean 0, with the mean removed.
    pub fn centered_response(&self) -> Result<(Dataset, f64)> {
        if self.response != ResponseKind::Gaussian {
            return invalid("only Gaussian responses can be centred");
        }
        let mean = self.y.iter().sum::<f64>() / self.n as f64;
        let y = self.y.iter().map(|v| v - mean).collect();
        Ok((Dataset::from_row_major(self.n, self.p, self.x.clone(), y, self.response)?, mean))
    }

    /// SHA-256 over the shape, response kind and the bit patterns of every value.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        h.update((self.p as u64).to_le_bytes());
        match self.response {
            ResponseKind::Gaussian => h.update([0u8]),
            ResponseKind::Binomial { m } => {
                h.update([1u8]);
                h.update(m.to_le_bytes());
            }
        }
        for v in self.x.iter().chain(&self.y) {
            h.update(v.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Observation model `f(y | x, theta)` through the linear predictor `x'theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LikelihoodModel {
    /// `y ~ N(x'theta, sigma2)` with known variance.
    LinearGaussian { sigma2: f64 },
    /// `y ~ Binomial(m, logistic(x'theta))`.
    LogisticBinomial { m: u32 },
}

impl LikelihoodModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LikelihoodModel::LinearGaussian { sigma2 } if !(sigma2 > 0.0 && sigma2.is_finite()) => {
                invalid(format!("noise variance must be positive, got {sigma2}"))
            }
            LikelihoodModel::LogisticBinomial { m: 0 } => invalid("binomial trials m must be positive"),
            _ => Ok(()),
        }
    }

    pub fn check_data(&self, data: &Dataset) -> Result<()> {
        self.validate()?;
        match (self, data.response()) {
            (LikelihoodModel::LinearGaussian { .. }, ResponseKind::Gaussian) => Ok(()),
            (LikelihoodModel::LogisticBinomial { m }, ResponseKind::Binomial { m: dm }) if *m == dm => Ok(()),
            (model, kind) => invalid(format!("model {model:?} cannot score {kind:?} responses")),
        }
    }

    /// Terms of `log f` that do not depend on the linear predictor.
    pub fn log_normalizer(&self, y: f64) -> f64 {
        match *self {
            LikelihoodModel::LinearGaussian { sigma2 } => -0.5 * (LN_2PI + sigma2.ln()),
            LikelihoodModel::LogisticBinomial { m } => ln_binomial(m as u64, y as u64),
        }
    }

    /// `log f(y | eta) - log_normalizer(y)`.
    #[inline]
    pub fn log_kernel(&self, y: f64, eta: f64) -> f64 {
        match *self {
            LikelihoodModel::LinearGaussian { sigma2 } => {
                let r = y - eta;
                -0.5 * r * r / sigma2
            }
            LikelihoodModel::LogisticBinomial { m } => y * eta - m as f64 * softplus(eta),
        }
    }

    pub fn log_density(&self, y: f64, eta: f64) -> f64 {
        self.log_normalizer(y) + self.log_kernel(y, eta)
    }

    /// First and second derivatives of `log f` with respect to `eta`.
    pub fn eta_derivatives(&self, y: f64, eta: f64) -> (f64, f64) {
        match *self {
            LikelihoodModel::LinearGaussian { sigma2 } => ((y - eta) / sigma2, -1.0 / sigma2),
            LikelihoodModel::LogisticBinomial { m } => {
                let pr = sigmoid(eta);
                let m = m as f64;
                (y - m * pr, -m * pr * (1.0 - pr))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorFamily {
    /// `theta_j ~ N(0, zeta_g)`; the hyperparameter is the variance.
    Normal,
    /// `theta_j ~ Laplace(rate xi_g)`: density `xi/2 exp(-xi |theta|)`.
    Laplace,
    /// Constant density that does not depend on the hyperparameters.
    Flat,
}

/// Prior family, group map `j -> g`, prior sample size `n0` and the
/// hyperparameters `xi` (one per group).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub family: PriorFamily,
    pub groups: Vec<usize>,
    pub n0: usize,
    pub xi: Vec<f64>,
}

impl PriorSpec {
    pub fn new(family: PriorFamily, groups: Vec<usize>, n0: usize, xi: Vec<f64>) -> Result<Self> {
        let spec = PriorSpec { family, groups, n0, xi };
        spec.validate()?;
        Ok(spec)
    }

    /// One hyperparameter shared by all `p` coefficients.
    pub fn shared(family: PriorFamily, p: usize, n0: usize, xi: f64) -> Result<Self> {
        Self::new(family, vec![0; p], n0, vec![xi])
    }

    /// `q` contiguous, equally sized groups (`p` must be divisible by `q`).
    pub fn blocks(family: PriorFamily, p: usize, q: usize, n0: usize, xi: Vec<f64>) -> Result<Self> {
        if q == 0 || !p.is_multiple_of(q) {
            return invalid(format!("cannot split {p} coefficients into {q} equal groups"));
        }
        let size = p / q;
        Self::new(family, (0..p).map(|j| j / size).collect(), n0, xi)
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return invalid("prior needs at least one coefficient");
        }
        if self.n0 == 0 {
            return invalid("prior sample size n0 must be positive");
        }
        let q = self.xi.len();
        if q == 0 {
            return invalid("prior needs at least one hyperparameter");
        }
        if let Some(j) = self.groups.iter().position(|&g| g >= q) {
            return invalid(format!("coefficient {j} maps to group {} but only {q} groups exist", self.groups[j]));
        }
        for g in 0..q {
            if !self.groups.contains(&g) {
                return invalid(format!("group {g} has no coefficients"));
            }
        }
        if let Some(x) = self.xi.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return invalid(format!("hyperparameters must be positive and finite, got {x}"));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.groups.len()
    }

    pub fn q(&self) -> usize {
        self.xi.len()
    }

    pub fn with_xi(&self, xi: &[f64]) -> Result<Self> {
        if xi.len() != self.q() {
            return Err(Error::Dimension(format!("expected {} hyperparameters, got {}", self.q(), xi.len())));
        }
        Self::new(self.family, self.groups.clone(), self.n0, xi.to_vec())
    }

    pub fn with_n0(&self, n0: usize) -> Result<Self> {
        Self::new(self.family, self.groups.clone(), n0, self.xi.clone())
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.q()];
        for &g in &self.groups {
            sizes[g] += 1;
        }
        sizes
    }

    /// Exponent `n / n0` applied to the prior at dataset level.
    pub fn exponent(&self, n: usize) -> f64 {
        n as f64 / self.n0 as f64
    }

    /// True when the posterior is Gaussian in closed form for this model.
    pub fn is_conjugate_with(&self, model: &LikelihoodModel) -> bool {
        self.family != PriorFamily::Laplace && matches!(model, LikelihoodModel::LinearGaussian { .. })
    }

    /// Log prior density of coordinate `j` at value `t`.
    #[inline]
    pub fn coord_log_density(&self, j: usize, t: f64) -> f64 {
        let xi = self.xi[self.groups[j]];
        match self.family {
            PriorFamily::Normal => -0.5 * (LN_2PI + xi.ln()) - 0.5 * t * t / xi,
            PriorFamily::Laplace => (0.5 * xi).ln() - xi * t.abs(),
            PriorFamily::Flat => 0.0,
        }
    }

    pub fn log_density(&self, theta: &[f64]) -> Result<f64> {
        self.check_len(theta)?;
        Ok((0..theta.len()).map(|j| self.coord_log_density(j, theta[j])).sum())
    }

    /// Diagonal gradient and Hessian of `log pi` at `theta`. Laplace kinks
    /// (`theta_j = 0`) need a mask; masked-out coordinates are reported as 0.
    pub fn grad_hess_diag(&self, theta: &[f64], active: Option<&ActiveSet>) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_len(theta)?;
        let p = theta.len();
        let mut grad = vec![0.0; p];
        let mut hess = vec![0.0; p];
        for j in 0..p {
            if active.is_some_and(|a| !a.contains(j)) {
                continue;
            }
            let xi = self.xi[self.groups[j]];
            match self.family {
                PriorFamily::Normal => {
                    grad[j] = -theta[j] / xi;
                    hess[j] = -1.0 / xi;
                }
                PriorFamily::Laplace => {
                    if theta[j] == 0.0 {
                        return Err(Error::KinkWithoutMask { index: j });
                    }
                    grad[j] = -xi * theta[j].signum();
                }
                PriorFamily::Flat => {}
            }
        }
        Ok((grad, hess))
    }

    /// `d log pi(theta; xi) / d xi_g` for each group, on the natural scale
    /// (variance for the normal family, rate for Laplace).
    pub fn xi_gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.q()];
        for (j, &t) in theta.iter().enumerate() {
            let g = self.groups[j];
            let xi = self.xi[g];
            out[g] += match self.family {
                PriorFamily::Normal => -0.5 / xi + 0.5 * t * t / (xi * xi),
                PriorFamily::Laplace => 1.0 / xi - t.abs(),
                PriorFamily::Flat => 0.0,
            };
        }
        out
    }

    fn check_len(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.p() {
            return Err(Error::Dimension(format!("prior covers {} coefficients, theta has {}", self.p(), theta.len())));
        }
        Ok(())
    }
}

/// A finite coefficient vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterPoint(Vec<f64>);

impl ParameterPoint {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if let Some(j) = theta.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("theta[{j}] = {}", theta[j])));
        }
        Ok(ParameterPoint(theta))
    }

    pub fn zeros(p: usize) -> Self {
        ParameterPoint(vec![0.0; p])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims(model: &LikelihoodModel, data: &Dataset, theta: &[f64]) -> Result<()> {
    model.check_data(data)?;
    if theta.len() != data.p() {
        return Err(Error::Dimension(format!("data has {} covariates, theta has {}", data.p(), theta.len())));
    }
    Ok(())
}

/// `log f(z_i | theta)` for every row.
pub fn log_likelihood_rows(model: &LikelihoodModel, data: &Dataset, theta: &[f64]) -> Result<Vec<f64>> {
    check_dims(model, data, theta)?;
    Ok((0..data.n()).map(|i| model.log_density(data.y(i), dot(data.row(i), theta))).collect())
}

pub fn log_likelihood(model: &LikelihoodModel, data: &Dataset, theta: &[f64]) -> Result<f64> {
    Ok(log_likelihood_rows(model, data, theta)?.iter().sum())
}

/// `log g(z_i, theta; xi) = log f(z_i | theta) + log pi(theta; xi) / n0`.
pub fn log_g(model: &LikelihoodModel, prior: &PriorSpec, data: &Dataset, row: usize, theta: &[f64]) -> Result<f64> {
    check_dims(model, data, theta)?;
    if row >= data.n() {
        return Err(Error::Dimension(format!("row {row} out of range")));
    }
    let lf = model.log_density(data.y(row), dot(data.row(row), theta));
    Ok(lf + prior.log_density(theta)? / prior.n0 as f64)
}

/// `sum_i log g(z_i, theta; xi) = sum_i log f(z_i | theta) + (n / n0) log pi(theta; xi)`.
pub fn log_g_total(model: &LikelihoodModel, prior: &PriorSpec, data: &Dataset, theta: &[f64]) -> Result<f64> {
    let lf = log_likelihood(model, data, theta)?;
    Ok(lf + prior.exponent(data.n()) * prior.log_density(theta)?)
}

/// Gradient and Hessian of `log g(z_row, theta; xi)` in theta. With an
/// active set the result covers only the active coordinates, in order.
pub fn score_and_hessian(
    model: &LikelihoodModel,
    prior: &PriorSpec,
    data: &Dataset,
    row: usize,
    theta: &[f64],
    active: Option<&ActiveSet>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_dims(model, data, theta)?;
    if row >= data.n() {
        return Err(Error::Dimension(format!("row {row} out of range")));
    }
    let (pg, ph) = prior.grad_hess_diag(theta, active)?;
    let idx: Vec<usize> = match active {
        Some(a) => a.indices().to_vec(),
        None => (0..theta.len()).collect(),
    };
    let x = data.row(row);
    let (d1, d2) = model.eta_derivatives(data.y(row), dot(x, theta));
    let inv_n0 = 1.0 / prior.n0 as f64;
    let k = idx.len();
    let grad = DVector::from_iterator(k, idx.iter().map(|&j| d1 * x[j] + inv_n0 * pg[j]));
    let mut hess = DMatrix::zeros(k, k);
    for (a, &j) in idx.iter().enumerate() {
        for (b, &l) in idx.iter().enumerate() {
            hess[(a, b)] = d2 * x[j] * x[l];
        }
        hess[(a, a)] += inv_n0 * ph[j];
    }
    Ok((grad, hess))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy() -> Dataset {
        Dataset::new(&[vec![1.0, 0.5], vec![-0.3, 2.0], vec![0.7, -1.1]], vec![0.4, 1.2, -0.8], ResponseKind::Gaussian)
            .unwrap()
    }

    #[test]
    fn gaussian_log_density_example() {
        let m = LikelihoodModel::LinearGaussian { sigma2: 1.0 };
        let d = Dataset::new(&[vec![1.0]], vec![1.0], ResponseKind::Gaussian).unwrap();
        let lf = log_likelihood(&m, &d, &[0.0]).unwrap();
        assert_relative_eq!(lf, -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5, max_relative = 1e-12);
    }

    #[test]
    fn laplace_log_g_example() {
        let m = LikelihoodModel::LinearGaussian { sigma2: 1.0 };
        let d = Dataset::new(&[vec![1.0]], vec![1.0], ResponseKind::Gaussian).unwrap();
        let prior = PriorSpec::shared(PriorFamily::Laplace, 1, 1, 1.0).unwrap();
        let g = log_g(&m, &prior, &d, 0, &[1.0]).unwrap();
        let expected = -0.5 * (2.0 * std::f64::consts::PI).ln() + 0.5f64.ln() - 1.0;
        assert_relative_eq!(g, expected, max_relative = 1e-12);
    }

    #[test]
    fn binomial_density_sums_to_one() {
        let m = LikelihoodModel::LogisticBinomial { m: 5 };
        let total: f64 = (0..=5).map(|y| m.log_density(y as f64, 0.3).exp()).sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn log_g_total_uses_prior_exponent() {
        let m = LikelihoodModel::LinearGaussian { sigma2: 0.7 };
        let d = toy();
        let prior = PriorSpec::shared(PriorFamily::Normal, 2, 2, 1.5).unwrap();
        let theta = [0.3, -0.2];
        let by_row: f64 = (0..3).map(|i| log_g(&m, &prior, &d, i, &theta).unwrap()).sum();
        assert_relative_eq!(by_row, log_g_total(&m, &prior, &d, &theta).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn score_matches_finite_differences() {
        let d =
            Dataset::new(&[vec![1.0, 0.5], vec![-0.3, 2.0]], vec![3.0, 1.0], ResponseKind::Binomial { m: 4 }).unwrap();
        let m = LikelihoodModel::LogisticBinomial { m: 4 };
        let prior = PriorSpec::shared(PriorFamily::Normal, 2, 2, 2.0).unwrap();
        let theta = [0.4, -0.25];
        let (g, h) = score_and_hessian(&m, &prior, &d, 1, &theta, None).unwrap();
        let eps = 1e-6;
        for j in 0..2 {
            let mut tp = theta;
            let mut tm = theta;
            tp[j] += eps;
            tm[j] -= eps;
            let fd = (log_g(&m, &prior, &d, 1, &tp).unwrap() - log_g(&m, &prior, &d, 1, &tm).unwrap()) / (2.0 * eps);
            assert_relative_eq!(g[j], fd, max_relative = 1e-6);
            let (gp, _) = score_and_hessian(&m, &prior, &d, 1, &tp, None).unwrap();
            let (gm, _) = score_and_hessian(&m, &prior, &d, 1, &tm, None).unwrap();
            for k in 0..2 {
                assert_relative_eq!(h[(k, j)], (gp[k] - gm[k]) / (2.0 * eps), max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn laplace_kink_requires_mask() {
        let m = LikelihoodModel::LinearGaussian { sigma2: 1.0 };
        let d = toy();
        let prior = PriorSpec::shared(PriorFamily::Laplace, 2, 3, 1.0).unwrap();
        let err = score_and_hessian(&m, &prior, &d, 0, &[0.0, 1.0], None).unwrap_err();
        assert_eq!(err, Error::KinkWithoutMask { index: 0 });
        let active = ActiveSet::new(vec![1], 2).unwrap();
        let (g, h) = score_and_hessian(&m, &prior, &d, 0, &[0.0, 1.0], Some(&active)).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(h.shape(), (1, 1));
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        assert!(PriorSpec::shared(PriorFamily::Normal, 2, 2, 0.0).is_err());
        assert!(PriorSpec::new(PriorFamily::Normal, vec![0, 2], 2, vec![1.0, 1.0]).is_err());
        assert!(Dataset::new(&[vec![1.0]], vec![1.5], ResponseKind::Binomial { m: 3 }).is_err());
        assert!(Dataset::new(&[vec![f64::NAN]], vec![1.0], ResponseKind::Gaussian).is_err());
        let m = LikelihoodModel::LogisticBinomial { m: 3 };
        assert!(m.check_data(&toy()).is_err());
    }

    #[test]
    fn xi_gradient_matches_finite_differences() {
        let theta = [0.4, -1.3, 0.2];
        for family in [PriorFamily::Normal, PriorFamily::Laplace] {
            let prior = PriorSpec::new(family, vec![0, 1, 1], 3, vec![0.8, 1.7]).unwrap();
            let grad = prior.xi_gradient(&theta);
            for g in 0..2 {
                let eps = 1e-6;
                let mut up = prior.xi.clone();
                let mut dn = prior.xi.clone();
                up[g] += eps;
                dn[g] -= eps;
                let fd = (prior.with_xi(&up).unwrap().log_density(&theta).unwrap()
                    - prior.with_xi(&dn).unwrap().log_density(&theta).unwrap())
                    / (2.0 * eps);
                assert_relative_eq!(grad[g], fd, max_relative = 1e-6);
            }
        }
    }
}

//! MAP estimation of `sum_i w_i log f(z_i | theta) + (n / n0) log pi(theta; xi)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::softplus;
use crate::models::{dot, Dataset, LikelihoodModel, ParameterPoint, PriorFamily, PriorSpec};

const TOL: f64 = 1e-8;
const MAX_SWEEPS: usize = 10_000;
const MAX_NEWTON: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct MapFit {
    pub theta: ParameterPoint,
    pub iterations: usize,
    /// False when the sweep budget ran out before the change fell below tolerance.
    pub converged: bool,
}

pub fn map_estimate(model: &LikelihoodModel, prior: &PriorSpec, data: &Dataset) -> Result<ParameterPoint> {
    Ok(map_fit_weighted(model, prior, data, None)?.theta)
}

pub(crate) fn map_fit_weighted(
    model: &LikelihoodModel,
    prior: &PriorSpec,
    data: &Dataset,
    weights: Option<&[f64]>,
) -> Result<MapFit> {
    model.check_data(data)?;
    if prior.p() != data.p() {
        return Err(Error::Dimension(format!("prior covers {} coefficients, data has {}", prior.p(), data.p())));
    }
    if let Some(w) = weights {
        if w.len() != data.n() || w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput("need one finite nonnegative weight per row".into()));
        }
    }
    let c = prior.exponent(data.n());
    match (*model, prior.family) {
        (LikelihoodModel::LinearGaussian { sigma2 }, PriorFamily::Normal | PriorFamily::Flat) => {
            let (mut g, b) = gaussian_normal_equations(data, weights, sigma2);
            if prior.family == PriorFamily::Normal {
                for j in 0..data.p() {
                    g[(j, j)] += c / prior.xi[prior.groups[j]];
                }
            }
            let theta =
                g.cholesky().ok_or_else(|| Error::NonIdentifiable("normal equations are singular".into()))?.solve(&b);
            Ok(MapFit { theta: ParameterPoint::new(theta.iter().copied().collect())?, iterations: 1, converged: true })
        }
        (LikelihoodModel::LinearGaussian { sigma2 }, PriorFamily::Laplace) => {
            let (g, b) = gaussian_normal_equations(data, weights, sigma2);
            let lambda: Vec<f64> = prior.groups.iter().map(|&k| c * prior.xi[k]).collect();
            lasso_coordinate_descent(&g, &b, &lambda)
        }
        (LikelihoodModel::LogisticBinomial { m }, family) => proximal_newton(data, weights, m as f64, prior, family, c),
    }
}

/// `(X'WX / sigma2, X'Wy / sigma2)`.
pub(crate) fn gaussian_normal_equations(
    data: &Dataset,
    weights: Option<&[f64]>,
    sigma2: f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let p = data.p();
    let mut g = DMatrix::zeros(p, p);
    let mut b = DVector::zeros(p);
    for i in 0..data.n() {
        let w = weights.map_or(1.0, |w| w[i]) / sigma2;
        let x = data.row(i);
        let y = data.y(i);
        for j in 0..p {
            let wx = w * x[j];
            b[j] += wx * y;
            for k in 0..=j {
                g[(j, k)] += wx * x[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            g[(k, j)] = g[(j, k)];
        }
    }
    (g, b)
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Minimises `theta'G theta / 2 - b'theta + sum_j lambda_j |theta_j|` by cyclic
/// coordinate descent starting from zero.
pub(crate) fn lasso_coordinate_descent(g: &DMatrix<f64>, b: &DVector<f64>, lambda: &[f64]) -> Result<MapFit> {
    let p = b.len();
    let mut theta = vec![0.0; p];
    let mut r: Vec<f64> = b.iter().copied().collect();
    for sweep in 1..=MAX_SWEEPS {
        let mut max_change = 0.0f64;
        for j in 0..p {
            let gjj = g[(j, j)];
            let new = if gjj > 0.0 { soft_threshold(r[j] + gjj * theta[j], lambda[j]) / gjj } else { 0.0 };
            let delta = new - theta[j];
            if delta != 0.0 {
                for k in 0..p {
                    r[k] -= delta * g[(k, j)];
                }
                theta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < TOL {
            return Ok(MapFit { theta: ParameterPoint::new(theta)?, iterations: sweep, converged: true });
        }
    }
    if lambda.iter().all(|l| *l < 1e-12) && g.clone().cholesky().is_none() {
        return Err(Error::NonIdentifiable("vanishing penalty with a singular design".into()));
    }
    Ok(MapFit { theta: ParameterPoint::new(theta)?, iterations: MAX_SWEEPS, converged: false })
}

/// Negative log posterior kernel for the logistic model.
fn logistic_objective(
    data: &Dataset,
    weights: Option<&[f64]>,
    m: f64,
    ridge: &[f64],
    lambda: &[f64],
    theta: &[f64],
) -> f64 {
    let mut f = 0.0;
    for i in 0..data.n() {
        let w = weights.map_or(1.0, |w| w[i]);
        let eta = dot(data.row(i), theta);
        f -= w * (data.y(i) * eta - m * softplus(eta));
    }
    for j in 0..theta.len() {
        f += 0.5 * ridge[j] * theta[j] * theta[j] + lambda[j] * theta[j].abs();
    }
    f
}

/// Damped (proximal) Newton for the logistic-binomial model. Each step
/// minimises the local quadratic model plus the L1 term by coordinate
/// descent, then backtracks on the exact objective.
fn proximal_newton(
    data: &Dataset,
    weights: Option<&[f64]>,
    m: f64,
    prior: &PriorSpec,
    family: PriorFamily,
    c: f64,
) -> Result<MapFit> {
    let p = data.p();
    let mut ridge = vec![0.0; p];
    let mut lambda = vec![0.0; p];
    for j in 0..p {
        let xi = prior.xi[prior.groups[j]];
        match family {
            PriorFamily::Normal => ridge[j] = c / xi,
            PriorFamily::Laplace => lambda[j] = c * xi,
            PriorFamily::Flat => {}
        }
    }
    let sparse = family == PriorFamily::Laplace;
    let mut theta = vec![0.0; p];
    let mut f_cur = logistic_objective(data, weights, m, &ridge, &lambda, &theta);
    let mut last_change = f64::INFINITY;
    for iter in 1..=MAX_NEWTON {
        let mut grad = DVector::zeros(p);
        let mut hess = DMatrix::zeros(p, p);
        for i in 0..data.n() {
            let w = weights.map_or(1.0, |w| w[i]);
            let x = data.row(i);
            let (d1, d2) = LikelihoodModel::LogisticBinomial { m: m as u32 }.eta_derivatives(data.y(i), dot(x, &theta));
            for j in 0..p {
                grad[j] -= w * d1 * x[j];
                for k in 0..=j {
                    hess[(j, k)] -= w * d2 * x[j] * x[k];
                }
            }
        }
        for j in 0..p {
            grad[j] += ridge[j] * theta[j];
            hess[(j, j)] += ridge[j];
            for k in 0..j {
                hess[(k, j)] = hess[(j, k)];
            }
        }
        let target = if sparse {
            quadratic_l1_step(&hess, &grad, &theta, &lambda)
        } else {
            let step = damped_solve(&hess, &grad)?;
            theta.iter().zip(step.iter()).map(|(t, s)| t - s).collect()
        };
        let dir: Vec<f64> = target.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let predicted: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum::<f64>()
            + (0..p).map(|j| lambda[j] * (target[j].abs() - theta[j].abs())).sum::<f64>();
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            let f_new = logistic_objective(data, weights, m, &ridge, &lambda, &cand);
            if f_new <= f_cur + 1e-4 * t * predicted.min(0.0) {
                accepted = Some((cand, f_new));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, f_new)) = accepted else {
            return finish(theta, iter, true);
        };
        last_change = cand.iter().zip(&theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        theta = cand;
        f_cur = f_new;
        if !f_cur.is_finite() || theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("logistic MAP iterate".into()));
        }
        if last_change < TOL {
            return finish(theta, iter, true);
        }
    }
    if sparse {
        return finish(theta, MAX_NEWTON, false);
    }
    Err(Error::NonConvergence { solver: "newton MAP", iterations: MAX_NEWTON, last_change })
}

fn finish(theta: Vec<f64>, iterations: usize, converged: bool) -> Result<MapFit> {
    Ok(MapFit { theta: ParameterPoint::new(theta)?, iterations, converged })
}

fn damped_solve(h: &DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        return Ok(ch.solve(g));
    }
    let p = h.nrows();
    let mut mu = 1e-10 * (h.trace().abs() / p as f64 + 1.0);
    for _ in 0..25 {
        let damped = h + DMatrix::identity(p, p) * mu;
        if let Some(ch) = damped.cholesky() {
            return Ok(ch.solve(g));
        }
        mu *= 10.0;
    }
    Err(Error::NonIdentifiable("Newton system is singular".into()))
}

/// Minimiser over `z` of `g'(z - theta) + (z - theta)'H(z - theta)/2 + sum lambda_j |z_j|`.
fn quadratic_l1_step(h: &DMatrix<f64>, g: &DVector<f64>, theta: &[f64], lambda: &[f64]) -> Vec<f64> {
    let p = theta.len();
    // Linear coefficient of the quadratic in z: H theta - g.
    let b: Vec<f64> = (0..p).map(|j| (0..p).map(|k| h[(j, k)] * theta[k]).sum::<f64>() - g[j]).collect();
    let mut z = theta.to_vec();
    let mut r: Vec<f64> = (0..p).map(|j| b[j] - (0..p).map(|k| h[(j, k)] * z[k]).sum::<f64>()).collect();
    for _ in 0..1000 {
        let mut max_change = 0.0f64;
        for j in 0..p {
            let hjj = h[(j, j)];
            let new = if hjj > 0.0 { soft_threshold(r[j] + hjj * z[j], lambda[j]) / hjj } else { 0.0 };
            let delta = new - z[j];
            if delta != 0.0 {
                for k in 0..p {
                    r[k] -= delta * h[(k, j)];
                }
                z[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < 1e-12 {
            break;
        }
    }
    z
}

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use piic::models::{Dataset, ResponseKind};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `y = X theta + sigma * e` with standard normal covariates.
pub fn linear_data(seed: u64, n: usize, theta: &[f64], sigma2: f64) -> Dataset {
    let mut r = rng(seed);
    let p = theta.len();
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|_| r.sample(StandardNormal)).collect();
        let e: f64 = r.sample(StandardNormal);
        y.push(row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() + sigma2.sqrt() * e);
        x.extend(row);
    }
    Dataset::from_row_major(n, p, x, y, ResponseKind::Gaussian).unwrap()
}

/// Binomial(m, logistic(x'theta)) responses.
pub fn logistic_data(seed: u64, n: usize, theta: &[f64], m: u32) -> Dataset {
    let mut r = rng(seed);
    let p = theta.len();
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|_| r.sample(StandardNormal)).collect();
        let eta: f64 = row.iter().zip(theta).map(|(a, b)| a * b).sum();
        let pr = 1.0 / (1.0 + (-eta).exp());
        y.push((0..m).filter(|_| r.random::<f64>() < pr).count() as f64);
        x.extend(row);
    }
    Dataset::from_row_major(n, p, x, y, ResponseKind::Binomial { m }).unwrap()
}

/// Posterior of `theta` under `y ~ N(X theta, sigma2)`, `theta_j ~ N(0, zeta_j)`
/// raised to `c`, by explicit matrix inversion.
pub fn conjugate_oracle(data: &Dataset, sigma2: f64, zeta: &[f64], c: f64) -> (DVector<f64>, DMatrix<f64>) {
    let x = data.design();
    let y = DVector::from_column_slice(data.responses());
    let mut prec = x.transpose() * &x / sigma2;
    for j in 0..zeta.len() {
        prec[(j, j)] += c / zeta[j];
    }
    let cov = prec.try_inverse().unwrap();
    let mean = &cov * (x.transpose() * y / sigma2);
    (mean, cov)
}

pub fn normal_logpdf(y: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln()) - (y - mean).powi(2) / (2.0 * var)
}

/// Gauss-Hermite nodes and weights for `int e^{-t^2} f(t) dt` (Golub-Welsch).
pub fn gauss_hermite(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::zeros(k, k);
    for i in 1..k {
        let b = (i as f64 / 2.0).sqrt();
        jac[(i, i - 1)] = b;
        jac[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> =
        (0..k).map(|i| (eig.eigenvalues[i], std::f64::consts::PI.sqrt() * eig.eigenvectors[(0, i)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// `E[g(eta)]` for `eta ~ N(m, v)` by 50-node Gauss-Hermite quadrature.
pub fn normal_expectation(m: f64, v: f64, g: impl Fn(f64) -> f64) -> f64 {
    let (t, w) = gauss_hermite(50);
    let s = (2.0 * v).sqrt();
    t.iter().zip(&w).map(|(ti, wi)| wi * g(m + s * ti)).sum::<f64>() / std::f64::consts::PI.sqrt()
}

/// Per-row moments of `log f(y_i | theta)` under a Gaussian posterior on
/// `theta`: (log E f, E log f, Var log f), by quadrature over `eta = x'theta`.
pub fn quadrature_row(x: &[f64], y: f64, sigma2: f64, mean: &DVector<f64>, cov: &DMatrix<f64>) -> (f64, f64, f64) {
    let xv = DVector::from_column_slice(x);
    let m = xv.dot(mean);
    let v = (xv.transpose() * cov * &xv)[(0, 0)].max(0.0);
    let logf = |eta: f64| normal_logpdf(y, eta, sigma2);
    let ef = normal_expectation(m, v, |eta| logf(eta).exp());
    let e1 = normal_expectation(m, v, logf);
    let e2 = normal_expectation(m, v, |eta| logf(eta).powi(2));
    (ef.ln(), e1, e2 - e1 * e1)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

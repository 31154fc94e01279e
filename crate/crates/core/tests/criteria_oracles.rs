mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use piic::criteria::{
    dic, fisher_pair, j_pair, lppd, piic, piic2, piic_at, predictive_logdens, predictive_logdens_rows, row_moments,
    waic, waic_parts, xi_score, xi_score_fd, xi_score_fd_with, JPair, PiicValue,
};
use piic::inference::{
    conjugate_posterior, map_estimate, mcmc_sample, ActiveSet, Posterior, PosteriorForm, SampleSet, SamplerConfig,
};
use piic::models::{
    log_likelihood_rows, Dataset, LikelihoodModel, ParameterPoint, PriorFamily, PriorSpec, ResponseKind,
};

const GAUSS: LikelihoodModel = LikelihoodModel::LinearGaussian { sigma2: 1.0 };

fn point_mass(model: LikelihoodModel, prior: PriorSpec, theta: &[f64], copies: usize) -> Posterior {
    let draws: Vec<f64> = (0..copies).flat_map(|_| theta.to_vec()).collect();
    Posterior {
        form: PosteriorForm::Samples(SampleSet::new(theta.len(), draws, None).unwrap()),
        map_point: ParameterPoint::new(theta.to_vec()).unwrap(),
        model,
        prior,
        lik_weights: None,
        active: None,
        degenerate: false,
    }
}

/// `d/dzeta log f(z_row | z; zeta)` for a shared normal-prior variance,
/// differentiated by hand through the closed-form posterior.
fn analytic_xi_score(data: &Dataset, sigma2: f64, zeta: f64, c: f64, row: usize) -> f64 {
    let p = data.p();
    let (mu, cov) = conjugate_oracle(data, sigma2, &vec![zeta; p], c);
    let k = c / (zeta * zeta);
    let dcov = &cov * &cov * k;
    let dmu = &cov * &mu * k;
    let x = DVector::from_column_slice(data.row(row));
    let y = data.y(row);
    let m = x.dot(&mu);
    let v = sigma2 + (x.transpose() * &cov * &x)[(0, 0)];
    let dm = x.dot(&dmu);
    let dv = (x.transpose() * dcov * &x)[(0, 0)];
    -dv / (2.0 * v) + (y - m) * dm / v + (y - m).powi(2) * dv / (2.0 * v * v)
}

#[test]
fn gauss_hermite_integrates_normal_moments() {
    assert!((normal_expectation(1.0, 2.0, |t| t * t) - 3.0).abs() < 1e-12);
    assert!((normal_expectation(0.0, 1.0, |t| t.powi(4)) - 3.0).abs() < 1e-10);
}

#[test]
fn scalar_predictive_example() {
    let data = Dataset::new(&[vec![1.0]], vec![1.0], ResponseKind::Gaussian).unwrap();
    let prior = PriorSpec::shared(PriorFamily::Normal, 1, 1, 1.0).unwrap();
    let post = conjugate_posterior(&GAUSS, &prior, &data).unwrap();
    let expected = -0.5 * (3.0 * std::f64::consts::PI).ln() - 1.0 / 12.0;
    assert!((predictive_logdens(&post, &data, 0).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn point_mass_posterior_reduces_every_criterion_to_the_plug_in_loglik() {
    let data = linear_data(3, 8, &[1.0, -0.5], 1.0);
    let prior = PriorSpec::shared(PriorFamily::Normal, 2, 8, 1.0).unwrap();
    let theta = [0.3, 0.7];
    let post = point_mass(GAUSS, prior, &theta, 5);
    let ll: f64 = log_likelihood_rows(&GAUSS, &data, &theta).unwrap().iter().sum();
    for (i, lp) in predictive_logdens_rows(&post, &data).unwrap().iter().enumerate() {
        let li = log_likelihood_rows(&GAUSS, &data, &theta).unwrap()[i];
        assert!((lp - li).abs() < 1e-12);
    }
    assert!((waic(&post, &data).unwrap() + ll).abs() < 1e-10);
    assert!((dic(&post, &data).unwrap() + ll).abs() < 1e-10);
}

#[test]
fn analytic_waic_and_dic_match_quadrature() {
    for seed in 0..5 {
        let data = linear_data(seed, 15, &[1.0, 0.5, -1.0], 1.5);
        let prior = PriorSpec::shared(PriorFamily::Normal, 3, 15, 0.8).unwrap();
        let model = LikelihoodModel::LinearGaussian { sigma2: 1.5 };
        let post = conjugate_posterior(&model, &prior, &data).unwrap();
        let (mean, cov) = conjugate_oracle(&data, 1.5, &[0.8; 3], 1.0);
        let (mut lp, mut pen, mut e1) = (0.0, 0.0, 0.0);
        for i in 0..data.n() {
            let (a, b, v) = quadrature_row(data.row(i), data.y(i), 1.5, &mean, &cov);
            lp += a;
            e1 += b;
            pen += v;
        }
        let plug: f64 = log_likelihood_rows(&model, &data, mean.as_slice()).unwrap().iter().sum();
        assert!(rel_err(waic(&post, &data).unwrap(), -lp + pen) < 1e-8);
        assert!(rel_err(lppd(&post, &data).unwrap(), lp) < 1e-8);
        assert!(rel_err(dic(&post, &data).unwrap(), plug - 2.0 * e1) < 1e-8);
    }
}

#[test]
fn sample_based_predictive_within_three_standard_errors() {
    let data = linear_data(11, 12, &[1.0, -1.0, 0.5], 1.0);
    let prior = PriorSpec::shared(PriorFamily::Normal, 3, 12, 1.0).unwrap();
    let exact = conjugate_posterior(&GAUSS, &prior, &data).unwrap();
    let init = map_estimate(&GAUSS, &prior, &data).unwrap();
    let cfg = SamplerConfig { seed: 5, ..SamplerConfig::default() };
    let post = mcmc_sample(&GAUSS, &prior, &data, &init, &cfg).unwrap();
    let samples = post.samples().unwrap();
    for i in 0..data.n() {
        let dens: Vec<f64> = (0..samples.len())
            .map(|s| {
                GAUSS.log_density(data.y(i), data.row(i).iter().zip(samples.draw(s)).map(|(a, b)| a * b).sum()).exp()
            })
            .collect();
        let mean = dens.iter().sum::<f64>() / dens.len() as f64;
        let sd = (dens.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / dens.len() as f64).sqrt();
        // Batch means absorb the chain's autocorrelation.
        let batches = 50;
        let size = dens.len() / batches;
        let bm: Vec<f64> =
            (0..batches).map(|b| dens[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64).collect();
        let bvar = bm.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
        let se = (bvar / batches as f64).sqrt().max(sd / (dens.len() as f64).sqrt()) / mean;
        let a = predictive_logdens(&exact, &data, i).unwrap();
        let b = predictive_logdens(&post, &data, i).unwrap();
        assert!((a - b).abs() < 3.0 * se, "row {i}: {a} vs {b}, se {se}");
    }
}

#[test]
fn waic_is_invariant_to_sample_order() {
    let data = linear_data(2, 10, &[1.0, 2.0], 1.0);
    let prior = PriorSpec::shared(PriorFamily::Laplace, 2, 10, 0.5).unwrap();
    let init = map_estimate(&GAUSS, &prior, &data).unwrap();
    let cfg = SamplerConfig { chain_length: 4000, burn_in: 1000, thin: 3, ..SamplerConfig::default() };
    let post = mcmc_sample(&GAUSS, &prior, &data, &init, &cfg).unwrap();
    let s = post.samples().unwrap();
    let rev: Vec<f64> = (0..s.len()).rev().flat_map(|k| s.draw(k).to_vec()).collect();
    let reversed = Posterior { form: PosteriorForm::Samples(SampleSet::new(2, rev, None).unwrap()), ..post.clone() };
    let a = waic(&post, &data).unwrap();
    let b = waic(&reversed, &data).unwrap();
    assert!((a - b).abs() < 1e-9 * a.abs());
}

#[test]
fn row_moments_are_consistent_with_waic_parts() {
    let data = linear_data(4, 9, &[0.5, 0.5], 2.0);
    let prior = PriorSpec::shared(PriorFamily::Normal, 2, 9, 2.0).unwrap();
    let model = LikelihoodModel::LinearGaussian { sigma2: 2.0 };
    let post = conjugate_posterior(&model, &prior, &data).unwrap();
    let rows = row_moments(&post, &data).unwrap();
    let parts = waic_parts(&post, &data).unwrap();
    let lp: f64 = rows.iter().map(|r| r.log_pred).sum();
    let pen: f64 = rows.iter().map(|r| r.var).sum();
    assert!((lp - parts.lppd).abs() < 1e-10);
    assert!((pen - parts.penalty).abs() < 1e-10);
    assert!((parts.value - (-parts.lppd + parts.penalty)).abs() < 1e-12);
}

#[test]
fn fisher_pair_hand_case_intercept_only() {
    let y = vec![0.3, -1.2, 2.0, 0.7, 1.1];
    let rows: Vec<Vec<f64>> = y.iter().map(|_| vec![1.0]).collect();
    let data = Dataset::new(&rows, y.clone(), ResponseKind::Gaussian).unwrap();
    let prior = PriorSpec::shared(PriorFamily::Flat, 1, 5, 1.0).unwrap();
    let theta_hat = map_estimate(&GAUSS, &prior, &data).unwrap();
    let ybar = y.iter().sum::<f64>() / 5.0;
    assert!((theta_hat.as_slice()[0] - ybar).abs() < 1e-12);
    let pair = fisher_pair(&GAUSS, &prior, &data, &theta_hat, None).unwrap();
    let i2 = y.iter().map(|v| (v - ybar).powi(2)).sum::<f64>() / 5.0;
    assert!((pair.i1[(0, 0)] - 1.0).abs() < 1e-12);
    assert!((pair.i2[(0, 0)] - i2).abs() < 1e-12);
}

#[test]
fn laplace_i1_on_active_set_is_the_likelihood_block() {
    let data = linear_data(8, 20, &[2.0, 0.0, -1.0, 0.0], 1.0);
    let prior = PriorSpec::shared(PriorFamily::Laplace, 4, 20, 3.0).unwrap();
    let theta_hat = map_estimate(&GAUSS, &prior, &data).unwrap();
    let active = ActiveSet::from_point(&theta_hat);
    assert!(!active.is_empty() && active.len() < 4);
    let pair = fisher_pair(&GAUSS, &prior, &data, &theta_hat, Some(&active)).unwrap();
    let x = data.design();
    let gram = x.transpose() * x / 20.0;
    for (u, &a) in active.indices().iter().enumerate() {
        for (v, &b) in active.indices().iter().enumerate() {
            assert!((pair.i1[(u, v)] - gram[(a, b)]).abs() < 1e-12);
        }
    }
}

#[test]
fn empty_active_set_gives_zero_penalty_and_the_null_loglik() {
    let data = linear_data(1, 10, &[0.2, -0.1], 1.0);
    let prior = PriorSpec::shared(PriorFamily::Laplace, 2, 10, 500.0).unwrap();
    let fit = piic_at(&GAUSS, &prior, &data, &SamplerConfig::default()).unwrap();
    assert!(fit.active.is_empty());
    let null: f64 = log_likelihood_rows(&GAUSS, &data, &[0.0, 0.0]).unwrap().iter().sum();
    assert_eq!(fit.piic.penalty, 0.0);
    assert!((fit.piic.value + null).abs() < 1e-12);
}

#[test]
fn piic_approaches_waic_under_a_vague_prior() {
    let mut gaps = Vec::new();
    for n in [50, 200, 800] {
        let mut gap = 0.0;
        for seed in 0..20 {
            let data = linear_data(100 + seed, n, &[1.0, -0.5, 0.25], 1.0);
            let prior = PriorSpec::shared(PriorFamily::Normal, 3, n, 1e6).unwrap();
            let fit = piic_at(&GAUSS, &prior, &data, &SamplerConfig::default()).unwrap();
            let w = waic(&conjugate_posterior(&GAUSS, &prior, &data).unwrap(), &data).unwrap();
            gap += (fit.piic.value - w).abs() / 20.0;
        }
        gaps.push(gap);
    }
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn xi_score_matches_hand_derivative_of_the_conjugate_predictive() {
    for seed in 0..10 {
        let n = 10 + seed as usize;
        let data = linear_data(seed, n, &[1.0, -2.0], 1.0);
        let zeta = 0.3 + 0.2 * seed as f64;
        let prior = PriorSpec::shared(PriorFamily::Normal, 2, n, zeta).unwrap();
        let post = conjugate_posterior(&GAUSS, &prior, &data).unwrap();
        for row in 0..n {
            let got = xi_score(&post, &data, row).unwrap()[0];
            let want = analytic_xi_score(&data, 1.0, zeta, 1.0, row);
            assert!(rel_err(got, want) < 1e-3 || (got - want).abs() < 1e-12, "seed {seed} row {row}: {got} vs {want}");
        }
    }
}

#[test]
fn flat_prior_has_zero_xi_score_and_zero_j_pair() {
    let data = linear_data(5, 12, &[1.0, 1.0], 1.0);
    let prior = PriorSpec::shared(PriorFamily::Flat, 2, 12, 1.0).unwrap();
    let post = conjugate_posterior(&GAUSS, &prior, &data).unwrap();
    assert_eq!(xi_score(&post, &data, 0).unwrap(), vec![0.0]);
    let jp = j_pair(&post, &data).unwrap();
    assert!(jp.j1.iter().chain(jp.j2.iter()).all(|v| *v == 0.0));
    assert_eq!(jp.penalty().unwrap().value, 0.0);
}

#[test]
fn xi_score_fd_over_fresh_conjugate_posteriors() {
    let data = linear_data(9, 14, &[0.5, 1.5, -1.0], 1.0);
    let base = PriorSpec::shared(PriorFamily::Normal, 3, 14, 0.7).unwrap();
    let post = conjugate_posterior(&GAUSS, &base, &data).unwrap();
    let factory = |xi: &[f64]| conjugate_posterior(&GAUSS, &base.with_xi(xi).unwrap(), &data);
    for row in 0..14 {
        let id = xi_score(&post, &data, row).unwrap()[0];
        let fresh = xi_score_fd_with(factory, &[0.7], &data, row, 1e-4).unwrap()[0];
        let reweighted = xi_score_fd(&post, &data, row, 1e-4).unwrap()[0];
        assert!(rel_err(fresh, id) < 1e-4, "row {row}: {fresh} vs {id}");
        assert!(rel_err(reweighted, id) < 1e-4);
    }
}

#[test]
fn j_pair_matches_hand_derivatives_in_the_conjugate_case() {
    let n = 30;
    let data = linear_data(21, n, &[1.0, 0.5, -0.5], 1.0);
    let zeta = 0.6;
    let prior = PriorSpec::shared(PriorFamily::Normal, 3, n, zeta).unwrap();
    let post = conjugate_posterior(&GAUSS, &prior, &data).unwrap();
    let jp = j_pair(&post, &data).unwrap();
    let h = 1e-5 * zeta;
    let (mut j1, mut j2) = (0.0, 0.0);
    for row in 0..n {
        let d = analytic_xi_score(&data, 1.0, zeta, 1.0, row);
        let d2 = (analytic_xi_score(&data, 1.0, zeta + h, 1.0, row)
            - analytic_xi_score(&data, 1.0, zeta - h, 1.0, row))
            / (2.0 * h);
        j2 += d * d / n as f64;
        j1 -= d2 / n as f64;
    }
    assert!(rel_err(jp.j2[(0, 0)], j2) < 2e-2, "{} vs {j2}", jp.j2[(0, 0)]);
    assert!(rel_err(jp.j1[(0, 0)], j1) < 2e-2, "{} vs {j1}", jp.j1[(0, 0)]);
    assert!(jp.j2[(0, 0)] >= 0.0);
}

#[test]
fn piic2_adds_the_hyperparameter_penalty() {
    let base = PiicValue { value: 10.0, lppd: -8.0, penalty: 2.0, cond: 1.0, pseudo_inverse: false };
    let zero = JPair { j1: DMatrix::zeros(1, 1), j2: DMatrix::zeros(1, 1), steps: vec![1e-3] };
    assert_eq!(piic2(&base, &zero).unwrap().value, 10.0);
    let scalar =
        JPair { j1: DMatrix::from_element(1, 1, 2.0), j2: DMatrix::from_element(1, 1, 4.0), steps: vec![1e-3] };
    let v = piic2(&base, &scalar).unwrap();
    assert!((v.value - 12.0).abs() < 1e-12);
    assert!((v.penalty_xi - 2.0).abs() < 1e-12);
}

/// With `xi` the prior variance, `sum_i s_i = lambda theta_hat` at the MAP
/// (`lambda = c / zeta`) leaves a mean xi-score that adds `2 J1(lambda)` to the
/// curvature, so `tr(J1^-1 J2)` tends to 1/3 rather than the 1 obtained in the
/// precision parametrization.
#[test]
fn hyperparameter_penalty_large_n_limit_in_the_variance_parametrization() {
    let n = 500;
    let mut total = 0.0;
    for seed in 0..20 {
        let data = linear_data(300 + seed, n, &[1.0, -1.0, 0.5], 1.0);
        let space = piic::hyperopt::XiSearchSpace { grid_points: 13, ..Default::default() };
        let search = piic::hyperopt::minimize_criterion(
            |xi| {
                let prior = PriorSpec::shared(PriorFamily::Normal, 3, n, xi[0])?;
                Ok(piic_at(&GAUSS, &prior, &data, &SamplerConfig::default())?.piic.value)
            },
            1,
            &space,
            &[],
        )
        .unwrap();
        let prior = PriorSpec::shared(PriorFamily::Normal, 3, n, search.xi_hat[0]).unwrap();
        let post = conjugate_posterior(&GAUSS, &prior, &data).unwrap();
        total += j_pair(&post, &data).unwrap().penalty().unwrap().value / 20.0;
    }
    assert!((total - 1.0 / 3.0).abs() < 0.1 / 3.0, "mean xi penalty {total}");
}

#[test]
fn dense_piic_uses_the_full_pair() {
    let data = linear_data(6, 20, &[1.0, 2.0, 3.0], 1.0);
    let prior = PriorSpec::shared(PriorFamily::Normal, 3, 20, 2.0).unwrap();
    let theta_hat = map_estimate(&GAUSS, &prior, &data).unwrap();
    let post = conjugate_posterior(&GAUSS, &prior, &data).unwrap();
    let pair = fisher_pair(&GAUSS, &prior, &data, &theta_hat, None).unwrap();
    let v = piic(&post, &data, &pair).unwrap();
    let oracle_i1 = (data.design().transpose() * data.design() + DMatrix::identity(3, 3) / 2.0) / 20.0;
    assert!((pair.i1.clone() - oracle_i1).abs().max() < 1e-12);
    let tr = (pair.i1.clone().try_inverse().unwrap() * &pair.i2).trace();
    assert!((v.value - (-lppd(&post, &data).unwrap() + tr)).abs() < 1e-10);
}

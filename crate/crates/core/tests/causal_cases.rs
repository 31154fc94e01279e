mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use piic::causal::{
    ipw_fisher_pair, ipw_j_pair, ipw_map_estimate, ipw_posterior, ipw_predictive_logdens_rows, piic2_ip, piic_ip,
    piic_ip_at, propensity_eval, MsmDataset, MsmSimulation, PropensitySpec, PropensityTable,
};
use piic::criteria::{j_pair, piic2, piic_at, predictive_logdens_rows};
use piic::inference::{map_estimate, posterior_at, ActiveSet, SamplerConfig};
use piic::models::{Dataset, LikelihoodModel, PriorFamily, PriorSpec, ResponseKind};
use rand::Rng;
use rand_distr::StandardNormal;

const GAUSS: LikelihoodModel = LikelihoodModel::LinearGaussian { sigma2: 1.0 };

fn sampler(seed: u64) -> SamplerConfig {
    SamplerConfig { chain_length: 4000, burn_in: 1000, thin: 2, seed, ..SamplerConfig::default() }
}

fn single_arm(data: &Dataset) -> MsmDataset {
    let table = PropensityTable::constant(&[1.0], 0).unwrap();
    MsmDataset::new(
        vec![0; data.n()],
        data.responses().to_vec(),
        vec![],
        0,
        1,
        Some((data.covariates().to_vec(), data.p())),
        data.response(),
        PropensitySpec::Known { table },
    )
    .unwrap()
}

fn reduction_case(seed: u64) -> (LikelihoodModel, PriorSpec, Dataset) {
    let theta = [1.0, 0.0, -0.5, 0.3];
    match seed % 3 {
        0 => (GAUSS, PriorSpec::shared(PriorFamily::Normal, 4, 20, 0.7).unwrap(), linear_data(seed, 20, &theta, 1.0)),
        1 => (
            GAUSS,
            PriorSpec::blocks(PriorFamily::Laplace, 4, 2, 20, vec![0.8, 2.5]).unwrap(),
            linear_data(seed, 20, &theta, 1.0),
        ),
        _ => (
            LikelihoodModel::LogisticBinomial { m: 5 },
            PriorSpec::shared(PriorFamily::Laplace, 4, 20, 1.5).unwrap(),
            logistic_data(seed, 20, &theta, 5),
        ),
    }
}

#[test]
fn single_arm_unit_propensity_reduces_bit_for_bit() {
    for seed in 0..6 {
        let (model, prior, data) = reduction_case(seed);
        let msm = single_arm(&data);
        let config = sampler(seed);
        let std_fit = piic_at(&model, &prior, &data, &config).unwrap();
        let (ip, theta_ip, post_ip) = piic_ip_at(&model, &prior, &msm, &config).unwrap();
        assert_eq!(theta_ip.as_slice(), map_estimate(&model, &prior, &data).unwrap().as_slice());
        assert_eq!(ip.value.to_bits(), std_fit.piic.value.to_bits(), "seed {seed}");
        assert_eq!(ip.penalty.to_bits(), std_fit.piic.penalty.to_bits());

        let full = posterior_at(&model, &prior, &data, &config).unwrap();
        let full_ip = ipw_posterior(&model, &prior, &msm, &config).unwrap();
        let a = predictive_logdens_rows(&full, &data).unwrap();
        let b = ipw_predictive_logdens_rows(&full_ip, &msm).unwrap();
        assert!(a.iter().zip(&b).all(|(u, v)| u.to_bits() == v.to_bits()));

        let p2 = piic2(&std_fit.piic, &j_pair(&full, &data).unwrap()).unwrap();
        let p2_ip = piic2_ip(&ip, &ipw_j_pair(&full_ip, &msm).unwrap()).unwrap();
        assert_eq!(p2.value.to_bits(), p2_ip.value.to_bits(), "seed {seed}");
        let again = piic_ip(&post_ip, &msm, &theta_ip).unwrap();
        assert_eq!(again.value.to_bits(), ip.value.to_bits());
    }
}

/// Two arms with intercept-only outcomes and one confounder. Row 0 and row 1
/// are in arm 0 with propensities 1/2 and 1/4, row 2 in arm 1 with 1/2, so the
/// likelihood weights are (2, 4, 2) and the score weights (4, 16, 4).
fn hand_msm() -> MsmDataset {
    let table = PropensityTable { coef: vec![vec![0.0, -(3.0f64).ln()], vec![0.0, 0.0]] };
    MsmDataset::new(
        vec![0, 0, 1],
        vec![1.0, 2.5, -0.5],
        vec![0.0, 1.0, 0.0],
        1,
        2,
        None,
        ResponseKind::Gaussian,
        PropensitySpec::Known { table },
    )
    .unwrap()
}

#[test]
fn weighted_information_pair_matches_hand_sums() {
    let msm = hand_msm();
    assert!((msm.lik_weights()[0] - 2.0).abs() < 1e-12);
    assert!((msm.lik_weights()[1] - 4.0).abs() < 1e-12);
    assert!((msm.score_weights()[1] - 16.0).abs() < 1e-12);

    let (zeta, n0) = (2.0, 3);
    let prior = PriorSpec::shared(PriorFamily::Normal, 2, n0, zeta).unwrap();
    let theta = ipw_map_estimate(&GAUSS, &prior, &msm).unwrap();
    let (n, c, share) = (3.0, 1.0, 1.0 / 6.0);
    let t0 = (2.0 * 1.0 + 4.0 * 2.5) / (6.0 + c / zeta);
    let t1 = (2.0 * -0.5) / (2.0 + c / zeta);
    assert!((theta.as_slice()[0] - t0).abs() < 1e-12);
    assert!((theta.as_slice()[1] - t1).abs() < 1e-12);

    let fp = ipw_fisher_pair(&GAUSS, &prior, &msm, &theta, None).unwrap();
    let i1_00 = (6.0 + c / zeta) / n;
    let i1_11 = (2.0 + c / zeta) / n;
    let s = [
        [1.0 - t0 - share * t0 / zeta, -share * t1 / zeta],
        [2.5 - t0 - share * t0 / zeta, -share * t1 / zeta],
        [-share * t0 / zeta, -0.5 - t1 - share * t1 / zeta],
    ];
    let b = [4.0, 16.0, 4.0];
    let i2 = |u: usize, v: usize| (0..3).map(|i| b[i] * s[i][u] * s[i][v]).sum::<f64>() / n;
    assert!(rel_err(fp.i1[(0, 0)], i1_00) < 1e-12);
    assert!(rel_err(fp.i1[(1, 1)], i1_11) < 1e-12);
    assert_eq!(fp.i1[(0, 1)], 0.0);
    for (u, v) in [(0, 0), (0, 1), (1, 1)] {
        assert!(rel_err(fp.i2[(u, v)], i2(u, v)) < 1e-12, "I2[{u},{v}]");
    }
}

fn two_arm_data(seed: u64, n: usize, probs: [f64; 2]) -> MsmDataset {
    let mut r = rng(seed);
    let mut t = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let arm = i % 2;
        t.push(arm);
        let z: f64 = r.sample(StandardNormal);
        y.push(if arm == 0 { 0.5 } else { -0.3 } + z);
    }
    let table = PropensityTable::constant(&probs, 0).unwrap();
    MsmDataset::new(t, y, vec![], 0, 2, None, ResponseKind::Gaussian, PropensitySpec::Known { table }).unwrap()
}

#[test]
fn halving_propensities_quadruples_score_weights_and_raises_the_penalty() {
    let prior = PriorSpec::shared(PriorFamily::Normal, 2, 40, 1.0).unwrap();
    let block = ActiveSet::new(vec![0], 2).unwrap();
    for seed in 0..5 {
        let base = two_arm_data(seed, 40, [0.5, 0.5]);
        let halved = two_arm_data(seed, 40, [0.25, 0.75]);
        for i in (0..40).step_by(2) {
            assert!(rel_err(halved.score_weights()[i], 4.0 * base.score_weights()[i]) < 1e-12);
        }
        let pen = |d: &MsmDataset| {
            let theta = ipw_map_estimate(&GAUSS, &prior, d).unwrap();
            ipw_fisher_pair(&GAUSS, &prior, d, &theta, Some(&block)).unwrap().penalty().unwrap().value
        };
        let (a, b) = (pen(&base), pen(&halved));
        assert!(b > a, "seed {seed}: {b} <= {a}");
    }
}

#[test]
fn unit_double_weights_match_unweighted_fit_with_halved_prior_exponent() {
    for family in [PriorFamily::Normal, PriorFamily::Laplace] {
        for seed in 0..5 {
            let msm = two_arm_data(100 + seed, 30, [0.5, 0.5]);
            assert!(msm.lik_weights().iter().all(|&w| (w - 2.0).abs() < 1e-12));
            let prior = PriorSpec::shared(family, 2, 15, 0.5).unwrap();
            let weighted = ipw_map_estimate(&GAUSS, &prior, &msm).unwrap();
            let expanded = msm.expanded().clone();
            let halved = map_estimate(&GAUSS, &prior.with_n0(30).unwrap(), &expanded).unwrap();
            let plain = map_estimate(&GAUSS, &prior, &expanded).unwrap();
            for j in 0..2 {
                assert!((weighted.as_slice()[j] - halved.as_slice()[j]).abs() < 1e-8);
            }
            let shift: f64 = (0..2).map(|j| (weighted.as_slice()[j] - plain.as_slice()[j]).abs()).sum();
            assert!(shift > 1e-4, "{family:?} seed {seed}: weighting did not move the fit");
        }
    }
}

#[test]
fn fitted_balanced_propensity_approaches_one_half() {
    let sim = MsmSimulation {
        n: 2000,
        mu: vec![0.0, 1.0],
        gamma: vec![0.5],
        noise_sd: 1.0,
        binomial_m: None,
        assignment: PropensityTable::constant(&[0.5, 0.5], 1).unwrap(),
    };
    let data = sim.generate(7, PropensitySpec::Fitted).unwrap();
    assert!(data.is_fitted());
    for i in 0..data.n() {
        let e = propensity_eval(&data, i, 0).unwrap();
        assert!((e - 0.5).abs() < 0.05, "row {i}: {e}");
    }
}

#[test]
fn ipw_map_recovers_marginal_means_under_confounding() {
    let sim = MsmSimulation {
        n: 2000,
        mu: vec![0.0, 1.0],
        gamma: vec![1.0],
        noise_sd: 1.0,
        binomial_m: None,
        assignment: PropensityTable { coef: vec![vec![0.0, 0.0], vec![0.0, 1.0]] },
    };
    let prior = PriorSpec::shared(PriorFamily::Normal, 2, 2000, 1e3).unwrap();
    let mut bias = [0.0; 2];
    let mut naive = [0.0; 2];
    for seed in 0..20 {
        let data = sim.generate(seed, PropensitySpec::Known { table: sim.assignment.clone() }).unwrap();
        let theta = ipw_map_estimate(&GAUSS, &prior, &data).unwrap();
        for h in 0..2 {
            bias[h] += (theta.as_slice()[h] - sim.mu[h]) / 20.0;
            let rows: Vec<usize> = (0..data.n()).filter(|&i| data.treatment(i) == h).collect();
            let mean = rows.iter().map(|&i| data.expanded().y(i)).sum::<f64>() / rows.len() as f64;
            naive[h] += (mean - sim.mu[h]) / 20.0;
        }
    }
    for h in 0..2 {
        assert!(bias[h].abs() < 0.05, "arm {h}: bias {}", bias[h]);
        assert!(naive[h].abs() > 0.2, "arm {h}: design is not confounded");
    }
}

/// Closed-form weighted posterior by explicit inversion, then the
/// unpowered predictive log-density of every row.
fn weighted_rows(msm: &MsmDataset, zeta: f64, c: f64) -> Vec<f64> {
    let data = msm.expanded();
    let x = data.design();
    let a = DMatrix::from_diagonal(&DVector::from_column_slice(msm.lik_weights()));
    let y = DVector::from_column_slice(data.responses());
    let mut prec = x.transpose() * &a * &x;
    for j in 0..data.p() {
        prec[(j, j)] += c / zeta;
    }
    let cov = prec.try_inverse().unwrap();
    let mean = &cov * (x.transpose() * &a * y);
    (0..data.n())
        .map(|i| {
            let xi = DVector::from_column_slice(data.row(i));
            normal_logpdf(data.y(i), xi.dot(&mean), 1.0 + (xi.transpose() * &cov * &xi)[(0, 0)])
        })
        .collect()
}

#[test]
fn weighted_j_pair_matches_finite_difference_oracle() {
    for seed in 0..4 {
        let table = PropensityTable { coef: vec![vec![0.0, 0.0], vec![0.2, 0.8]] };
        let sim = MsmSimulation {
            n: 60,
            mu: vec![0.5, 1.0],
            gamma: vec![0.7],
            noise_sd: 1.0,
            binomial_m: None,
            assignment: table.clone(),
        };
        let msm = sim.generate(seed, PropensitySpec::Known { table }).unwrap();
        let (zeta, n0) = (0.4, 20);
        let c = 60.0 / n0 as f64;
        let prior = PriorSpec::shared(PriorFamily::Normal, 2, n0, zeta).unwrap();
        let post = ipw_posterior(&GAUSS, &prior, &msm, &SamplerConfig::default()).unwrap();
        let jp = ipw_j_pair(&post, &msm).unwrap();

        let h = 1e-4 * zeta;
        let (up, mid, dn) =
            (weighted_rows(&msm, zeta + h, c), weighted_rows(&msm, zeta, c), weighted_rows(&msm, zeta - h, c));
        let n = 60.0;
        let (mut j1, mut j2) = (0.0, 0.0);
        for i in 0..60 {
            let d1 = (up[i] - dn[i]) / (2.0 * h);
            let d2 = (up[i] - 2.0 * mid[i] + dn[i]) / (h * h);
            j1 -= msm.lik_weights()[i] * d2 / n;
            j2 += msm.score_weights()[i] * d1 * d1 / n;
        }
        assert!(rel_err(jp.j2[(0, 0)], j2) < 2e-2, "seed {seed}: J2 {} vs {j2}", jp.j2[(0, 0)]);
        assert!(rel_err(jp.j1[(0, 0)], j1) < 2e-2, "seed {seed}: J1 {} vs {j1}", jp.j1[(0, 0)]);
    }
}

#[test]
fn frozen_prior_has_no_xi_penalty() {
    let msm = two_arm_data(3, 30, [0.5, 0.5]);
    let prior = PriorSpec::shared(PriorFamily::Flat, 2, 30, 1.0).unwrap();
    let post = ipw_posterior(&GAUSS, &prior, &msm, &SamplerConfig::default()).unwrap();
    let theta = ipw_map_estimate(&GAUSS, &prior, &msm).unwrap();
    let base = piic_ip(&post, &msm, &theta).unwrap();
    let jp = ipw_j_pair(&post, &msm).unwrap();
    let v = piic2_ip(&base, &jp).unwrap();
    assert_eq!(v.penalty_xi, 0.0);
    assert_eq!(v.value, base.value);
}

mod common;

use common::*;
use nalgebra::DMatrix;
use piic::experiments::RateTriple;
use piic::inference::{map_estimate, ActiveSet};
use piic::linalg::trace_inv_product;
use piic::models::{
    log_g, log_g_total, log_likelihood_rows, Dataset, LikelihoodModel, ParameterPoint, PriorFamily, PriorSpec,
    ResponseKind,
};
use proptest::prelude::*;

const GAUSS: LikelihoodModel = LikelihoodModel::LinearGaussian { sigma2: 1.0 };

fn theta_strategy(p: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-3.0..3.0f64, p)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn lasso_map_satisfies_the_optimality_conditions(seed in 0u64..10_000, rate in 0.05..5.0f64, n0 in 5usize..60) {
        let data = linear_data(seed, 25, &[1.5, 0.0, -0.7, 0.2, 0.0], 1.0);
        let prior = PriorSpec::shared(PriorFamily::Laplace, 5, n0, rate).unwrap();
        let theta = map_estimate(&GAUSS, &prior, &data).unwrap();
        let t = theta.as_slice();
        let c = prior.exponent(data.n());
        let x = data.design();
        let fitted = &x * nalgebra::DVector::from_column_slice(t);
        for j in 0..5 {
            let g: f64 = (0..data.n()).map(|i| x[(i, j)] * (data.y(i) - fitted[i])).sum();
            let bound = c * rate;
            if t[j] == 0.0 {
                prop_assert!(g.abs() <= bound * (1.0 + 1e-6) + 1e-6, "coord {j}: |{g}| > {bound}");
            } else {
                prop_assert!((g - bound * t[j].signum()).abs() <= 1e-6 * (1.0 + bound), "coord {j}: {g} vs {bound}");
            }
        }
    }

    #[test]
    fn rate_triples_partition_the_replications(pairs in proptest::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 0..200), ties in 0usize..20) {
        let mut all = pairs.clone();
        all.extend((0..ties).map(|k| (k as f64, k as f64)));
        let r = RateTriple::from_pairs(all.iter().copied());
        prop_assert_eq!(r.total(), all.len());
        prop_assert!(r.equal >= ties);
        let swapped = RateTriple::from_pairs(all.iter().map(|&(a, b)| (b, a)));
        prop_assert_eq!((swapped.less, swapped.equal, swapped.greater), (r.greater, r.equal, r.less));
    }

    #[test]
    fn active_sets_are_sorted_unique_and_match_nonzeros(theta in proptest::collection::vec(prop_oneof![Just(0.0), -2.0..2.0f64], 1..12)) {
        let a = ActiveSet::from_point(&ParameterPoint::new(theta.clone()).unwrap());
        prop_assert!(a.indices().windows(2).all(|w| w[0] < w[1]));
        for (j, &t) in theta.iter().enumerate() {
            prop_assert_eq!(a.contains(j), t != 0.0);
        }
        let mut shuffled: Vec<usize> = a.indices().iter().rev().copied().chain(a.indices().iter().copied()).collect();
        let third = shuffled.len() / 3;
        shuffled.rotate_left(third);
        prop_assert_eq!(ActiveSet::new(shuffled, theta.len()).unwrap(), a);
    }

    #[test]
    fn log_prior_coordinates_peak_at_zero(t in -50.0..50.0f64, xi in 1e-3..1e3f64) {
        for family in [PriorFamily::Normal, PriorFamily::Laplace, PriorFamily::Flat] {
            let prior = PriorSpec::shared(family, 1, 10, xi).unwrap();
            prop_assert!(prior.coord_log_density(0, 0.0) >= prior.coord_log_density(0, t));
        }
    }

    #[test]
    fn normal_prior_log_g_has_constant_curvature(seed in 0u64..1000, a in theta_strategy(3), b in theta_strategy(3), dir in theta_strategy(3), zeta in 0.1..10.0f64) {
        let data = linear_data(seed, 15, &[0.5, -1.0, 0.3], 1.0);
        let prior = PriorSpec::shared(PriorFamily::Normal, 3, 15, zeta).unwrap();
        let h = 0.5;
        let second = |base: &[f64]| {
            let at = |s: f64| {
                let t: Vec<f64> = base.iter().zip(&dir).map(|(u, d)| u + s * d).collect();
                log_g_total(&GAUSS, &prior, &data, &t).unwrap()
            };
            (at(h) - 2.0 * at(0.0) + at(-h)) / (h * h)
        };
        let (sa, sb) = (second(&a), second(&b));
        let quad: f64 = {
            let x = data.design();
            let xd = &x * nalgebra::DVector::from_column_slice(&dir);
            -xd.norm_squared() - dir.iter().map(|d| d * d).sum::<f64>() / zeta
        };
        prop_assert!((sa - sb).abs() <= 1e-6 * (1.0 + quad.abs()));
        prop_assert!((sa - quad).abs() <= 1e-6 * (1.0 + quad.abs()));
    }

    #[test]
    fn prior_enters_each_row_with_weight_one_over_n0(seed in 0u64..1000, theta in theta_strategy(4), n0 in 1usize..200, xi in 0.1..5.0f64) {
        let data = linear_data(seed, 12, &[1.0, 0.0, -1.0, 0.5], 1.0);
        for family in [PriorFamily::Normal, PriorFamily::Laplace] {
            let prior = PriorSpec::shared(family, 4, n0, xi).unwrap();
            let rows = log_likelihood_rows(&GAUSS, &data, &theta).unwrap();
            let lp = prior.log_density(&theta).unwrap();
            let mut total = 0.0;
            for (i, r) in rows.iter().enumerate() {
                let g = log_g(&GAUSS, &prior, &data, i, &theta).unwrap();
                prop_assert!((g - (r + lp / n0 as f64)).abs() <= 1e-10 * (1.0 + g.abs()));
                total += g;
            }
            let whole = log_g_total(&GAUSS, &prior, &data, &theta).unwrap();
            prop_assert!((whole - total).abs() <= 1e-9 * (1.0 + whole.abs()));
            prop_assert_eq!(prior.exponent(data.n()), 12.0 / n0 as f64);
        }
    }

    #[test]
    fn dataset_hash_tracks_every_value(seed in 0u64..1000, row in 0usize..10, col in 0usize..3, bump in prop_oneof![Just(1e-12), Just(-1.0), Just(3.5)]) {
        let data = linear_data(seed, 10, &[1.0, 2.0, 3.0], 1.0);
        let same = linear_data(seed, 10, &[1.0, 2.0, 3.0], 1.0);
        prop_assert_eq!(data.content_hash(), same.content_hash());
        let mut x = data.covariates().to_vec();
        x[row * 3 + col] += bump;
        let moved = Dataset::from_row_major(10, 3, x, data.responses().to_vec(), ResponseKind::Gaussian).unwrap();
        prop_assert_ne!(data.content_hash(), moved.content_hash());
        let mut y = data.responses().to_vec();
        y[row] += bump;
        let moved = Dataset::from_row_major(10, 3, data.covariates().to_vec(), y, ResponseKind::Gaussian).unwrap();
        prop_assert_ne!(data.content_hash(), moved.content_hash());
    }

    #[test]
    fn trace_of_a_matrix_against_itself_is_its_dimension(entries in proptest::collection::vec(-1.0..1.0f64, 36), k in 1usize..7) {
        let m = DMatrix::from_iterator(6, 6, entries.into_iter()).view((0, 0), (k, k)).into_owned();
        let a = &m * m.transpose() + DMatrix::identity(k, k) * 0.5;
        let t = trace_inv_product(&a, &a, "A").unwrap();
        prop_assert!((t.value - k as f64).abs() < 1e-9);
    }
}

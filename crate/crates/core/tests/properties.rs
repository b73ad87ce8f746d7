mod common;

use proptest::prelude::*;
use userreg::eval::rmse_with;
use userreg::{build_interest_sets, ModelKind, Rating};

use common::*;

/// Distinct (user, item) pairs with half-star ratings in [1, 5].
fn triples() -> impl Strategy<Value = (usize, usize, Vec<Rating>)> {
    (1usize..8, 1usize..8).prop_flat_map(|(m, n)| {
        proptest::collection::btree_map((0..m, 0..n), 2u32..=10, 1..=m * n).prop_map(move |cells| {
            let ratings = cells
                .into_iter()
                .map(|((u, i), half)| Rating::new(u, i, half as f64 / 2.0))
                .collect();
            (m, n, ratings)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tab_file_round_trip((_m, _n, ratings) in triples()) {
        prop_assert_eq!(round_trip(&ratings), Ok(()));
    }

    #[test]
    fn split_partitions_and_is_deterministic(
        (m, n, ratings) in triples(),
        frac in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        prop_assert_eq!(split_partition(&dataset(m, n, ratings), frac, seed), Ok(()));
    }

    #[test]
    fn interest_sets_are_strictly_above_user_mean((m, n, ratings) in triples()) {
        let sets = build_interest_sets(&dataset(m, n, ratings.clone()));
        prop_assert_eq!(interest_strictness(m, &ratings, &sets), Ok(()));
    }

    #[test]
    fn constant_user_has_empty_interest(n in 1usize..10, half in 2u32..=10) {
        let ratings = (0..n).map(|i| Rating::new(0, i, half as f64 / 2.0)).collect();
        let sets = build_interest_sets(&dataset(1, n, ratings));
        prop_assert!(sets.items(0).is_empty());
    }

    #[test]
    fn rmse_ignores_test_order((m, n, ratings) in triples(), seed in any::<u64>()) {
        prop_assert_eq!(rmse_order_invariance(m, n, ratings, seed), Ok(()));
    }

    #[test]
    fn fitted_parameters_are_finite(
        seed in 0u64..1000,
        kind_index in 0usize..5,
        beta in 0.0f64..20.0,
    ) {
        prop_assert_eq!(finite_after_fit(seed, ModelKind::ALL[kind_index], beta), Ok(()));
    }

    #[test]
    fn exact_gradient_descent_never_increases_objective(
        seed in 0u64..1000,
        kind_index in 0usize..5,
    ) {
        prop_assert_eq!(monotone_descent(seed, ModelKind::ALL[kind_index]), Ok(()));
    }

    #[test]
    fn rmse_of_the_mean_predictor(values in proptest::collection::vec(2u32..=10, 1..20)) {
        let ratings: Vec<Rating> = values.iter().enumerate().map(|(i, &h)| Rating::new(0, i, h as f64 / 2.0)).collect();
        let data = dataset(1, values.len(), ratings);
        let mean = data.global_mean().unwrap();
        let var = data.triples().iter().map(|t| (t.value - mean).powi(2)).sum::<f64>() / data.len() as f64;
        let got = rmse_with(|_, _| mean, &data).unwrap();
        prop_assert!((got - var.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn user_factors_collapse_onto_interest_mean_as_beta_grows() {
    for seed in [3u64, 11, 29] {
        if let Err(e) = beta_shrinkage(seed) {
            panic!("seed {seed}: {e}");
        }
    }
}

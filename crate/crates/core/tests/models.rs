use approx::assert_abs_diff_eq;
use userreg::eval::rmse;
use userreg::gradcheck::{check_model, finite_diff_gradient, InstanceSize, PASS_THRESHOLD};
use userreg::models::{fit_from, gradients, objective, predict};
use userreg::synthetic::{random_instance, rank_one};
use userreg::{
    build_interest_sets, fit, init_params, Error, InterestSets, ModelKind, ModelParams, PenaltyScaling,
    Rating, RatingDataset, RatingScale, TrainConfig,
};

fn small_config() -> TrainConfig {
    TrainConfig {
        d: 3,
        gamma: 0.01,
        max_iters: 300,
        ..Default::default()
    }
}

#[test]
fn beta_zero_userreg_is_bit_identical_to_biasedmf() {
    for seed in 0..5 {
        let data = random_instance(7, 6, 0.5, seed);
        let config = TrainConfig {
            beta: 0.0,
            seed,
            ..small_config()
        };
        let a = fit(&data, &config, ModelKind::UserReg).unwrap();
        let b = fit(&data, &config, ModelKind::BiasedMf).unwrap();
        for block in ModelParams::blocks(ModelKind::BiasedMf) {
            let (x, y) = (a.params.block(*block), b.params.block(*block));
            assert!(x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
        assert_eq!(a.objective_trace, b.objective_trace);
        assert_eq!(rmse(&a, &data).unwrap().to_bits(), rmse(&b, &data).unwrap().to_bits());
    }
}

#[test]
fn fit_is_deterministic_for_a_seed() {
    let data = random_instance(6, 6, 0.5, 4);
    for kind in ModelKind::ALL {
        let a = fit(&data, &small_config(), kind).unwrap();
        let b = fit(&data, &small_config(), kind).unwrap();
        assert_eq!(a.params, b.params, "{kind}");
    }
}

#[test]
fn mf_recovers_a_rank_one_matrix() {
    let data = rank_one(12, 10, 5);
    let config = TrainConfig {
        d: 1,
        lambda: 0.0,
        gamma: 0.01,
        max_iters: 20_000,
        rel_tol: 1e-14,
        init_scale: Some(0.5),
        clamp_predictions: false,
        ..Default::default()
    };
    let model = fit(&data, &config, ModelKind::Mf).unwrap();
    assert!(rmse(&model, &data).unwrap() < 1e-4);
}

#[test]
fn pmf_and_mf_share_one_objective() {
    let data = random_instance(5, 5, 0.6, 9);
    let a = fit(&data, &small_config(), ModelKind::Mf).unwrap();
    let b = fit(&data, &small_config(), ModelKind::Pmf).unwrap();
    assert_eq!(a.params.user_factors, b.params.user_factors);
    assert_eq!(a.objective_trace, b.objective_trace);
}

#[test]
fn divergence_names_the_learning_rate() {
    let data = random_instance(6, 6, 0.7, 1);
    let config = TrainConfig {
        gamma: 50.0,
        ..small_config()
    };
    match fit(&data, &config, ModelKind::BiasedMf) {
        Err(e @ Error::Diverged { .. }) => {
            assert!(e.to_string().contains("5e1"), "{e}");
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn zero_iterations_return_the_initial_parameters() {
    let data = random_instance(4, 4, 0.5, 2);
    let config = TrainConfig {
        max_iters: 0,
        ..small_config()
    };
    let model = fit(&data, &config, ModelKind::UserReg).unwrap();
    assert_eq!(model.params, init_params(&data, &config, ModelKind::UserReg));
    assert_eq!(model.iterations_run, 0);
    assert_eq!(model.objective_trace.len(), 1);
}

#[test]
fn fixed_iterations_ignore_tolerance() {
    let data = random_instance(4, 4, 0.5, 2);
    let config = TrainConfig {
        max_iters: 50,
        rel_tol: 0.5,
        fixed_iterations: true,
        ..small_config()
    };
    assert_eq!(fit(&data, &config, ModelKind::SvdPlusPlus).unwrap().iterations_run, 50);
    let loose = TrainConfig {
        fixed_iterations: false,
        ..config
    };
    assert!(fit(&data, &loose, ModelKind::SvdPlusPlus).unwrap().iterations_run < 50);
}

#[test]
fn cold_start_falls_back_to_biases() {
    // User 2 and item 2 have no training ratings.
    let data = RatingDataset::from_triples(
        3,
        3,
        vec![
            Rating::new(0, 0, 5.0),
            Rating::new(0, 1, 3.0),
            Rating::new(1, 0, 4.0),
            Rating::new(1, 1, 1.0),
        ],
        RatingScale::movielens(),
    )
    .unwrap();
    let model = fit(&data, &small_config(), ModelKind::BiasedMf).unwrap();
    let p = &model.params;
    assert_eq!(model.predict(2, 2), p.mu);
    assert_eq!(model.predict(0, 2), p.mu + p.user_bias[0]);
    assert_eq!(model.predict(2, 1), p.mu + p.item_bias[1]);
    let mf = fit(&data, &small_config(), ModelKind::Mf).unwrap();
    // Unclamped MF has nothing to fall back on; clamped it sits at the scale floor.
    assert_eq!(mf.predict(2, 2), 1.0);
}

#[test]
fn predictions_are_clamped_only_when_asked() {
    let data = RatingDataset::from_triples(1, 1, vec![Rating::new(0, 0, 5.0)], RatingScale::movielens()).unwrap();
    let mut params = init_params(&data, &small_config(), ModelKind::BiasedMf);
    params.user_bias[0] = 3.0;
    let raw = predict(&params, ModelKind::BiasedMf, 0, 0, None);
    assert!(raw > 5.0);
    for (clamp, expected) in [(true, 5.0), (false, raw)] {
        let config = TrainConfig {
            max_iters: 0,
            clamp_predictions: clamp,
            ..small_config()
        };
        let model = fit_from(&data, params.clone(), &config, ModelKind::BiasedMf).unwrap();
        assert_abs_diff_eq!(model.predict(0, 0), expected, epsilon = 1e-12);
    }
}

#[test]
fn svdpp_prediction_matches_hand_computation() {
    let data = random_instance(3, 4, 0.5, 6);
    let config = TrainConfig {
        d: 2,
        ..small_config()
    };
    let mut params = init_params(&data, &config, ModelKind::SvdPlusPlus);
    params.user_bias = vec![0.1, -0.2, 0.3];
    params.item_bias = vec![0.05, 0.0, -0.1, 0.2];
    let y = params.implicit.clone().unwrap();
    for u in 0..3 {
        let (items, _) = data.user_row(u);
        let norm = 1.0 / (items.len() as f64).sqrt();
        for i in 0..4 {
            let mut user_vec = params.user_factors.row(u).to_vec();
            for &j in items {
                for (k, v) in user_vec.iter_mut().enumerate() {
                    *v += norm * y.row(j as usize)[k];
                }
            }
            let q = params.item_factors.row(i);
            let expected = params.mu
                + params.user_bias[u]
                + params.item_bias[i]
                + user_vec.iter().zip(q).map(|(a, b)| a * b).sum::<f64>();
            let z: Vec<f64> = (0..2)
                .map(|k| items.iter().map(|&j| norm * y.row(j as usize)[k]).sum())
                .collect();
            let got = predict(&params, ModelKind::SvdPlusPlus, u, i, Some(&z));
            assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
        }
    }
}

/// Direct transcription of the UserReg objective, independent of the
/// library's evaluator.
fn userreg_objective_by_hand(
    params: &ModelParams,
    data: &RatingDataset,
    sets: &InterestSets,
    lambda: f64,
    beta: f64,
) -> f64 {
    let d = params.dim();
    let mut total = 0.0;
    for t in data.triples() {
        let (u, i) = (t.user as usize, t.item as usize);
        let dot: f64 = (0..d)
            .map(|k| params.user_factors.row(u)[k] * params.item_factors.row(i)[k])
            .sum();
        let e = dot + params.mu + params.user_bias[u] + params.item_bias[i] - t.value;
        total += 0.5 * e * e;
    }
    let mut penalty = params.user_factors.squared_norm() + params.item_factors.squared_norm();
    penalty += params.user_bias.iter().map(|b| b * b).sum::<f64>();
    penalty += params.item_bias.iter().map(|b| b * b).sum::<f64>();
    total += 0.5 * lambda * penalty;
    for u in 0..data.num_users() {
        let items = sets.items(u);
        if items.is_empty() {
            continue;
        }
        let gap: f64 = (0..d)
            .map(|k| {
                let centre =
                    items.iter().map(|&j| params.item_factors.row(j as usize)[k]).sum::<f64>() / items.len() as f64;
                (params.user_factors.row(u)[k] - centre).powi(2)
            })
            .sum();
        total += 0.5 * beta * gap;
    }
    total
}

#[test]
fn userreg_objective_matches_independent_transcription() {
    for seed in 0..10 {
        let data = random_instance(5, 4, 0.6, seed);
        let sets = build_interest_sets(&data);
        let config = TrainConfig {
            d: 3,
            lambda: 0.3,
            beta: 2.5,
            seed,
            penalty: PenaltyScaling::PerEntity,
            ..Default::default()
        };
        let mut params = init_params(&data, &config, ModelKind::UserReg);
        params.user_bias.iter_mut().enumerate().for_each(|(u, b)| *b = 0.1 * u as f64);
        params.item_bias.iter_mut().enumerate().for_each(|(i, b)| *b = -0.05 * i as f64);
        let lib = objective(&params, &data, &sets, &config, ModelKind::UserReg);
        let hand = userreg_objective_by_hand(&params, &data, &sets, 0.3, 2.5);
        assert_abs_diff_eq!(lib, hand, epsilon = 1e-10 * hand.abs());
    }
}

#[test]
fn gradients_match_finite_differences_for_every_penalty_scaling() {
    for penalty in [
        PenaltyScaling::PerEntity,
        PenaltyScaling::PerRating,
        PenaltyScaling::PerRatingFactors,
    ] {
        for penalty_exponent in [1.0, 0.75] {
            for kind in ModelKind::ALL {
                for seed in 0..4 {
                    let config = TrainConfig {
                        d: 2,
                        beta: 1.5,
                        implicit_penalty: 3.0,
                        exact_q_gradient: true,
                        penalty,
                        penalty_exponent,
                        ..Default::default()
                    };
                    let size = InstanceSize {
                        seed,
                        ..Default::default()
                    };
                    let report = check_model(kind, &config, size).unwrap();
                    assert!(
                        report.passed(),
                        "{kind} {penalty:?}^{penalty_exponent} seed {seed}: {report:?}"
                    );
                }
            }
        }
    }
}

#[test]
fn penalty_exponent_reweights_factor_rows_by_rating_count() {
    let data = random_instance(6, 5, 0.6, 3);
    let sets = build_interest_sets(&data);
    let base = TrainConfig {
        d: 2,
        lambda: 0.4,
        beta: 1.0,
        penalty: PenaltyScaling::PerRatingFactors,
        ..Default::default()
    };
    let params = init_params(&data, &base, ModelKind::UserReg);
    let at = |penalty, penalty_exponent| {
        let config = TrainConfig {
            penalty,
            penalty_exponent,
            ..base.clone()
        };
        objective(&params, &data, &sets, &config, ModelKind::UserReg)
    };
    let once = at(PenaltyScaling::PerEntity, 1.0);
    assert_abs_diff_eq!(at(PenaltyScaling::PerRatingFactors, 0.0), once, epsilon = 1e-12);

    let e = 0.75;
    let sq = |row: &[f64]| row.iter().map(|v| v * v).sum::<f64>();
    let mut extra = 0.0;
    for u in 0..data.num_users() {
        let c = data.user_row(u).0.len() as f64;
        extra += (c.powf(e) - 1.0) * sq(params.user_factors.row(u));
    }
    for i in 0..data.num_items() {
        let c = data.item_col(i).0.len() as f64;
        extra += (c.powf(e) - 1.0) * sq(params.item_factors.row(i));
    }
    let got = at(PenaltyScaling::PerRatingFactors, e);
    assert_abs_diff_eq!(got - once, 0.5 * 0.4 * extra, epsilon = 1e-10 * got.abs());
}

#[test]
fn finite_difference_error_shrinks_with_step() {
    // exp(3x) has a large third derivative, so truncation error dominates
    // round-off over this range of steps.
    let x = 1.0f64;
    let exact = 3.0 * (3.0 * x).exp();
    let err = |h: f64| {
        let g = userreg::gradcheck::central_difference(|v| (3.0 * v[0]).exp(), &[x], h).unwrap();
        userreg::gradcheck::relative_error(g[0], exact)
    };
    let (e3, e4, e5) = (err(1e-3), err(1e-4), err(1e-5));
    assert!(e4 < e3 && e5 < e4, "{e3} {e4} {e5}");
    // Second-order convergence: a tenfold smaller step cuts the error ~100x.
    assert!(e3 / e4 > 50.0, "{e3} {e4}");
}

#[test]
fn objective_gradient_error_is_at_round_off_for_default_step() {
    let data = random_instance(4, 4, 0.6, 3);
    let sets = build_interest_sets(&data);
    let config = TrainConfig {
        d: 2,
        beta: 2.0,
        exact_q_gradient: true,
        ..Default::default()
    };
    let params = userreg::gradcheck::random_params(&data, &config, ModelKind::UserReg);
    let analytic = gradients(&params, &data, &sets, &config, ModelKind::UserReg);
    let fd = finite_diff_gradient(
        |p| objective(p, &data, &sets, &config, ModelKind::UserReg),
        &params,
        ModelParams::blocks(ModelKind::UserReg),
        userreg::gradcheck::DEFAULT_STEP,
    )
    .unwrap();
    for b in ModelParams::blocks(ModelKind::UserReg) {
        for (a, f) in analytic.block(*b).iter().zip(fd.block(*b)) {
            assert!(userreg::gradcheck::relative_error(*a, *f) < PASS_THRESHOLD, "{b:?}");
        }
    }
}

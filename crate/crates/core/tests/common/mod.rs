//! Property checks shared by the proptest suite and the acceptance run.
//! Each returns `Err` with a description of the first violation.

#![allow(dead_code)]

use std::collections::HashSet;
use std::io::Cursor;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use userreg::eval::rmse;
use userreg::io::parse_ratings;
use userreg::synthetic::random_instance;
use userreg::{
    build_interest_sets, fit, split, DatasetFormat, InterestSets, ModelKind, ModelParams, Rating,
    RatingDataset, RatingScale, SplitSpec, TrainConfig,
};

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// Random distinct (user, item) cells with half-star ratings.
pub fn random_triples(seed: u64) -> (usize, usize, Vec<Rating>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(1..8);
    let n = rng.gen_range(1..8);
    let mut cells: Vec<(usize, usize)> = (0..m).flat_map(|u| (0..n).map(move |i| (u, i))).collect();
    cells.shuffle(&mut rng);
    let keep = rng.gen_range(1..=cells.len());
    let ratings = cells[..keep]
        .iter()
        .map(|&(u, i)| Rating::new(u, i, rng.gen_range(2..=10) as f64 / 2.0))
        .collect();
    (m, n, ratings)
}

pub fn dataset(m: usize, n: usize, ratings: Vec<Rating>) -> RatingDataset {
    RatingDataset::from_triples(m, n, ratings, RatingScale::movielens()).unwrap()
}

fn sorted(data: &RatingDataset) -> Vec<(u32, u32, u64)> {
    let mut v: Vec<_> = data
        .triples()
        .iter()
        .map(|t| (t.user, t.item, t.value.to_bits()))
        .collect();
    v.sort_unstable();
    v
}

/// Writing ratings in the tab layout and parsing them back preserves every
/// (user, item, rating) under the external IDs.
pub fn round_trip(ratings: &[Rating]) -> Check {
    let text: String = ratings
        .iter()
        .map(|r| format!("{}\t{}\t{}\t0\n", r.user + 1, r.item + 1, r.value))
        .collect();
    let parsed = parse_ratings(Cursor::new(text), &DatasetFormat::MovielensTab, RatingScale::movielens())
        .map_err(|e| e.to_string())?
        .dataset;
    ensure!(parsed.len() == ratings.len(), "{} ratings became {}", ratings.len(), parsed.len());
    let seen: HashSet<(String, String, u64)> = parsed
        .triples()
        .iter()
        .map(|t| {
            (
                parsed.user_ids().external(t.user as usize).unwrap().to_string(),
                parsed.item_ids().external(t.item as usize).unwrap().to_string(),
                t.value.to_bits(),
            )
        })
        .collect();
    for r in ratings {
        let key = ((r.user + 1).to_string(), (r.item + 1).to_string(), r.value.to_bits());
        ensure!(seen.contains(&key), "rating {r:?} lost");
    }
    Ok(())
}

/// Train and test partition the data, have the promised sizes, keep the ID
/// space and repeat exactly for a fixed seed.
pub fn split_partition(data: &RatingDataset, frac: f64, seed: u64) -> Check {
    let spec = SplitSpec::new(frac, seed);
    let (train, test) = split(data, &spec).map_err(|e| e.to_string())?;
    let expected = (frac * data.len() as f64).round() as usize;
    ensure!(train.len() == expected, "train has {} ratings, expected {expected}", train.len());
    let mut union = sorted(&train);
    union.extend(sorted(&test));
    union.sort_unstable();
    ensure!(union == sorted(data), "train and test do not partition the data");
    ensure!(
        (train.num_users(), test.num_items()) == (data.num_users(), data.num_items()),
        "ID space changed"
    );
    let (train2, test2) = split(data, &spec).map_err(|e| e.to_string())?;
    ensure!(
        train.triples() == train2.triples() && test.triples() == test2.triples(),
        "split is not deterministic"
    );
    Ok(())
}

/// I(u) holds exactly the items rated strictly above the user's mean.
pub fn interest_strictness(m: usize, ratings: &[Rating], sets: &InterestSets) -> Check {
    for u in 0..m {
        let mine: Vec<&Rating> = ratings.iter().filter(|r| r.user as usize == u).collect();
        let mut expected: Vec<u32> = Vec::new();
        if !mine.is_empty() {
            let mean = mine.iter().map(|r| r.value).sum::<f64>() / mine.len() as f64;
            expected = mine.iter().filter(|r| r.value > mean).map(|r| r.item).collect();
            expected.sort_unstable();
        }
        ensure!(sets.items(u) == &expected[..], "user {u}: {:?} != {expected:?}", sets.items(u));
    }
    Ok(())
}

/// Fitted parameters, objective trace and predictions are all finite.
pub fn finite_after_fit(seed: u64, kind: ModelKind, beta: f64) -> Check {
    let data = random_instance(6, 7, 0.5, seed);
    let config = TrainConfig {
        d: 3,
        beta,
        gamma: 0.01,
        max_iters: 200,
        seed,
        ..Default::default()
    };
    let model = fit(&data, &config, kind).map_err(|e| e.to_string())?;
    ensure!(model.params.all_finite(), "{kind}: non-finite parameters");
    ensure!(
        model.objective_trace.iter().all(|v| v.is_finite()),
        "{kind}: non-finite objective"
    );
    for u in 0..6 {
        for i in 0..7 {
            ensure!(model.predict(u, i).is_finite(), "{kind}: non-finite prediction");
        }
    }
    Ok(())
}

/// RMSE does not depend on the order of the test ratings.
pub fn rmse_order_invariance(m: usize, n: usize, ratings: Vec<Rating>, seed: u64) -> Check {
    let data = dataset(m, n, ratings.clone());
    let config = TrainConfig {
        d: 2,
        max_iters: 20,
        gamma: 0.01,
        ..Default::default()
    };
    let model = fit(&data, &config, ModelKind::UserReg).map_err(|e| e.to_string())?;
    let mut shuffled = ratings;
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let other = dataset(m, n, shuffled);
    let a = rmse(&model, &data).map_err(|e| e.to_string())?;
    let b = rmse(&model, &other).map_err(|e| e.to_string())?;
    ensure!((a - b).abs() <= 1e-12 * a.max(1.0), "{a} vs {b}");
    Ok(())
}

/// Mean distance between each user's factor and the mean factor of the
/// items in their interest set.
pub fn interest_gap(params: &ModelParams, sets: &InterestSets) -> f64 {
    let d = params.dim();
    let mut total = 0.0;
    let mut users = 0;
    for u in 0..sets.num_users() {
        let items = sets.items(u);
        if items.is_empty() {
            continue;
        }
        let mut centre = vec![0.0; d];
        for &i in items {
            for (c, q) in centre.iter_mut().zip(params.item_factors.row(i as usize)) {
                *c += q / items.len() as f64;
            }
        }
        let dist: f64 = params
            .user_factors
            .row(u)
            .iter()
            .zip(&centre)
            .map(|(p, c)| (p - c).powi(2))
            .sum::<f64>()
            .sqrt();
        total += dist;
        users += 1;
    }
    total / users as f64
}

pub const SHRINKAGE_BETAS: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];

/// As beta grows, each user's factor approaches the mean factor of their
/// liked items, at rate roughly 1/beta. Returns the gaps.
pub fn beta_shrinkage(seed: u64) -> Result<Vec<f64>, String> {
    let data = random_instance(8, 8, 0.6, seed);
    let sets = build_interest_sets(&data);
    let mut gaps = Vec::new();
    for beta in SHRINKAGE_BETAS {
        let config = TrainConfig {
            d: 3,
            beta,
            gamma: 0.2 / (beta + 20.0),
            max_iters: 40_000,
            rel_tol: 1e-13,
            seed,
            ..Default::default()
        };
        let model = fit(&data, &config, ModelKind::UserReg).map_err(|e| e.to_string())?;
        gaps.push(interest_gap(&model.params, &sets));
    }
    ensure!(gaps.windows(2).all(|w| w[1] < w[0]), "gaps not decreasing: {gaps:?}");
    ensure!(gaps[3] < 0.02 * gaps[0], "gap at beta=1000 too large: {gaps:?}");
    let ratio = gaps[2] / gaps[3];
    ensure!(ratio > 5.0 && ratio < 20.0, "not O(1/beta): {gaps:?}");
    Ok(gaps)
}

/// With exact gradients and a small step the objective never increases.
pub fn monotone_descent(seed: u64, kind: ModelKind) -> Check {
    let data = random_instance(5, 5, 0.6, seed);
    let config = TrainConfig {
        d: 2,
        beta: 3.0,
        gamma: 0.005,
        max_iters: 300,
        fixed_iterations: true,
        exact_q_gradient: true,
        seed,
        ..Default::default()
    };
    let model = fit(&data, &config, kind).map_err(|e| e.to_string())?;
    for w in model.objective_trace.windows(2) {
        ensure!(w[1] <= w[0] * (1.0 + 1e-12), "{kind}: {} -> {}", w[0], w[1]);
    }
    Ok(())
}

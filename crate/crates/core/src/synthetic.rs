//! Seeded synthetic rating data for checks, probes and tests.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Rating, RatingDataset, RatingScale};

/// Small random instance: every user rates at least two items (with two
/// distinct ratings when possible) and each remaining pair is observed with
/// probability `density`. Ratings are integers in 1..=5.
pub fn random_instance(num_users: usize, num_items: usize, density: f64, seed: u64) -> RatingDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triples = Vec::new();
    for u in 0..num_users {
        let forced: HashSet<usize> = sample(&mut rng, num_items, num_items.min(2))
            .into_iter()
            .collect();
        let mut first: Option<f64> = None;
        for i in 0..num_items {
            if forced.contains(&i) || rng.gen_bool(density) {
                let mut r = rng.gen_range(1..=5) as f64;
                match first {
                    None => first = Some(r),
                    Some(f) if f == r => r = if r < 5.0 { r + 1.0 } else { r - 1.0 },
                    _ => {}
                }
                triples.push(Rating::new(u, i, r));
            }
        }
    }
    RatingDataset::from_triples(num_users, num_items, triples, RatingScale::movielens())
        .expect("generated triples are unique and in scale")
}

/// Dataset for per-iteration cost probes: each user rates exactly
/// `ratings_per_user` distinct items, `liked_per_user` of them with 4 or 5 and
/// the rest with 1 or 2, so every interest set has exactly `liked_per_user`
/// items when `liked_per_user < ratings_per_user`.
pub fn scaling_dataset(
    num_users: usize,
    num_items: usize,
    ratings_per_user: usize,
    liked_per_user: usize,
    seed: u64,
) -> RatingDataset {
    assert!(ratings_per_user <= num_items);
    assert!(liked_per_user <= ratings_per_user);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triples = Vec::with_capacity(num_users * ratings_per_user);
    for u in 0..num_users {
        let items = sample(&mut rng, num_items, ratings_per_user);
        for (k, i) in items.into_iter().enumerate() {
            let r = if k < liked_per_user {
                rng.gen_range(4..=5)
            } else {
                rng.gen_range(1..=2)
            };
            triples.push(Rating::new(u, i, r as f64));
        }
    }
    RatingDataset::from_triples(num_users, num_items, triples, RatingScale::movielens())
        .expect("generated triples are unique and in scale")
}

/// Fully observed `r_ui = 5 * a_u * b_i` with `a, b` in `[0.5, 1)`: an exact
/// rank-one matrix inside the 1..5 scale.
pub fn rank_one(num_users: usize, num_items: usize, seed: u64) -> RatingDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..num_users).map(|_| rng.gen_range(0.5..1.0)).collect();
    let b: Vec<f64> = (0..num_items).map(|_| rng.gen_range(0.5..1.0)).collect();
    let mut triples = Vec::new();
    for (u, au) in a.iter().enumerate() {
        for (i, bi) in b.iter().enumerate() {
            triples.push(Rating::new(u, i, 5.0 * au * bi));
        }
    }
    RatingDataset::from_triples(num_users, num_items, triples, RatingScale::movielens())
        .expect("generated triples are unique and in scale")
}

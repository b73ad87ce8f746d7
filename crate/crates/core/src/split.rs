//! Seeded train/test partitions.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::RatingDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitPolicy {
    /// Uniform shuffle of all ratings.
    #[default]
    RandomByRating,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    #[serde(default)]
    pub policy: SplitPolicy,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Self {
        Self {
            train_fraction,
            seed,
            policy: SplitPolicy::RandomByRating,
        }
    }

    /// Spec for repeat `r` of a multi-run experiment: seed `seed + r`.
    pub fn for_repeat(&self, repeat: usize) -> Self {
        Self {
            seed: self.seed.wrapping_add(repeat as u64),
            ..*self
        }
    }
}

/// Partitions `data` into train and test sets.
///
/// The ratings are shuffled with a Fisher-Yates pass driven by ChaCha8
/// seeded from `spec.seed`; the first `round(train_fraction * len)` go to
/// train. Both halves keep the full user and item ID space, so users or
/// items that only occur in test stay addressable.
pub fn split(data: &RatingDataset, spec: &SplitSpec) -> Result<(RatingDataset, RatingDataset)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must lie in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let cut = (spec.train_fraction * n as f64).round() as usize;
    let (train_idx, test_idx) = order.split_at(cut);
    let mut train_idx = train_idx.to_vec();
    let mut test_idx = test_idx.to_vec();
    // Keep file order within each half.
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((data.subset(&train_idx)?, data.subset(&test_idx)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Rating, RatingScale};

    fn grid(m: usize, n: usize) -> RatingDataset {
        let mut t = Vec::new();
        for u in 0..m {
            for i in 0..n {
                t.push(Rating::new(u, i, (1 + (u + i) % 5) as f64));
            }
        }
        RatingDataset::from_triples(m, n, t, RatingScale::movielens()).unwrap()
    }

    #[test]
    fn cardinality_and_partition() {
        let d = grid(10, 10);
        let (train, test) = split(&d, &SplitSpec::new(0.9, 7)).unwrap();
        assert_eq!((train.len(), test.len()), (90, 10));
        assert_eq!(train.num_users(), 10);
        assert_eq!(test.num_items(), 10);
        let mut all: Vec<_> = train
            .triples()
            .iter()
            .chain(test.triples())
            .map(|t| (t.user, t.item))
            .collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 100);
    }

    #[test]
    fn deterministic_per_seed() {
        let d = grid(8, 9);
        let a = split(&d, &SplitSpec::new(0.5, 3)).unwrap();
        let b = split(&d, &SplitSpec::new(0.5, 3)).unwrap();
        assert_eq!(a.1.triples(), b.1.triples());
        let c = split(&d, &SplitSpec::new(0.5, 4)).unwrap();
        assert_ne!(a.1.triples(), c.1.triples());
    }

    #[test]
    fn rejects_bad_fraction() {
        let d = grid(2, 2);
        for f in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(split(&d, &SplitSpec::new(f, 1)).is_err());
        }
    }
}

//! Per-user interest sets: the items a user rated above a threshold.

use serde::{Deserialize, Serialize};

use crate::dataset::RatingDataset;

/// Which mean a rating must exceed for its item to count as "liked".
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterestThreshold {
    /// The user's own mean training rating.
    #[default]
    UserMean,
    /// The global mean over all training ratings.
    GlobalMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterestSets {
    ptr: Vec<usize>,
    items: Vec<u32>,
    per_user_mean: Vec<f64>,
}

impl InterestSets {
    /// No user has any interest; used by models that ignore interest sets.
    pub fn empty(num_users: usize) -> Self {
        Self {
            ptr: vec![0; num_users + 1],
            items: Vec::new(),
            per_user_mean: vec![f64::NAN; num_users],
        }
    }

    pub fn num_users(&self) -> usize {
        self.per_user_mean.len()
    }

    /// Sorted item indices in I(u).
    pub fn items(&self, user: usize) -> &[u32] {
        &self.items[self.ptr[user]..self.ptr[user + 1]]
    }

    /// Mean training rating of `user`; NaN when the user has no ratings.
    pub fn user_mean(&self, user: usize) -> f64 {
        self.per_user_mean[user]
    }

    pub fn total(&self) -> usize {
        self.items.len()
    }

    /// Number of users with non-empty I(u).
    pub fn users_with_interest(&self) -> usize {
        (0..self.num_users())
            .filter(|&u| !self.items(u).is_empty())
            .count()
    }

    /// For each item, the users whose interest set contains it (ascending).
    pub fn inverse(&self, num_items: usize) -> (Vec<usize>, Vec<u32>) {
        let mut ptr = vec![0usize; num_items + 1];
        for &i in &self.items {
            ptr[i as usize + 1] += 1;
        }
        for i in 0..num_items {
            ptr[i + 1] += ptr[i];
        }
        let mut fill = ptr.clone();
        let mut users = vec![0u32; self.items.len()];
        for u in 0..self.num_users() {
            for &i in self.items(u) {
                users[fill[i as usize]] = u as u32;
                fill[i as usize] += 1;
            }
        }
        (ptr, users)
    }
}

/// I(u) = { i in R_u : r_ui > mean of u's ratings }.
pub fn build_interest_sets(data: &RatingDataset) -> InterestSets {
    build_interest_sets_with(data, InterestThreshold::UserMean)
}

pub fn build_interest_sets_with(data: &RatingDataset, threshold: InterestThreshold) -> InterestSets {
    let global = data.global_mean().unwrap_or(f64::NAN);
    let mut ptr = Vec::with_capacity(data.num_users() + 1);
    let mut items = Vec::new();
    let mut per_user_mean = Vec::with_capacity(data.num_users());
    ptr.push(0);
    for u in 0..data.num_users() {
        let (rated, ratings) = data.user_row(u);
        let mean = if ratings.is_empty() {
            f64::NAN
        } else {
            ratings.iter().sum::<f64>() / ratings.len() as f64
        };
        per_user_mean.push(mean);
        let cut = match threshold {
            InterestThreshold::UserMean => mean,
            InterestThreshold::GlobalMean => global,
        };
        // NaN cut admits nothing.
        items.extend(
            rated
                .iter()
                .zip(ratings)
                .filter(|&(_, &r)| r > cut)
                .map(|(&i, _)| i),
        );
        ptr.push(items.len());
    }
    InterestSets {
        ptr,
        items,
        per_user_mean,
    }
}

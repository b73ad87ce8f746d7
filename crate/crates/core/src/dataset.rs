//! Sparse rating storage with user-major and item-major indexes.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingScale {
    pub min_rating: f64,
    pub max_rating: f64,
}

impl RatingScale {
    pub fn new(min_rating: f64, max_rating: f64) -> Result<Self> {
        if !(min_rating < max_rating) || !min_rating.is_finite() || !max_rating.is_finite() {
            return Err(Error::InvalidScale {
                min: min_rating,
                max: max_rating,
            });
        }
        Ok(Self {
            min_rating,
            max_rating,
        })
    }

    /// MovieLens 1..5 stars.
    pub fn movielens() -> Self {
        Self {
            min_rating: 1.0,
            max_rating: 5.0,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.min_rating && value <= self.max_rating
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.min_rating, self.max_rating)
    }
}

/// Bijection between raw dataset identifiers and dense indices `0..len`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    external: Vec<String>,
    index: HashMap<String, u32>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Dense identity map `"0".."len-1"`, used for synthetic data.
    pub fn identity(len: usize) -> Self {
        let mut map = Self::new();
        for k in 0..len {
            map.get_or_insert(&k.to_string());
        }
        map
    }

    pub fn get_or_insert(&mut self, external: &str) -> usize {
        if let Some(&idx) = self.index.get(external) {
            return idx as usize;
        }
        let idx = self.external.len() as u32;
        self.external.push(external.to_owned());
        self.index.insert(external.to_owned(), idx);
        idx as usize
    }

    pub fn internal(&self, external: &str) -> Option<usize> {
        self.index.get(external).map(|&i| i as usize)
    }

    pub fn external(&self, internal: usize) -> Option<&str> {
        self.external.get(internal).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.external.len()
    }

    pub fn is_empty(&self) -> bool {
        self.external.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub user: u32,
    pub item: u32,
    pub value: f64,
}

impl Rating {
    pub fn new(user: usize, item: usize, value: f64) -> Self {
        Self {
            user: user as u32,
            item: item as u32,
            value,
        }
    }
}

/// Observed ratings over `num_users x num_items`, indexed both ways.
///
/// Rows of the user index are sorted by item, columns of the item index by
/// user. `item_pos` maps every item-major entry back to its position in the
/// user-major arrays so per-rating buffers can be shared between the two.
#[derive(Debug, Clone)]
pub struct RatingDataset {
    num_users: usize,
    num_items: usize,
    triples: Vec<Rating>,
    scale: RatingScale,
    users: Arc<IdMap>,
    items: Arc<IdMap>,

    user_ptr: Vec<usize>,
    user_items: Vec<u32>,
    user_ratings: Vec<f64>,

    item_ptr: Vec<usize>,
    item_users: Vec<u32>,
    item_ratings: Vec<f64>,
    item_pos: Vec<u32>,
}

impl RatingDataset {
    /// Builds a dataset over `num_users x num_items` with identity ID maps.
    pub fn from_triples(
        num_users: usize,
        num_items: usize,
        triples: Vec<Rating>,
        scale: RatingScale,
    ) -> Result<Self> {
        Self::with_ids(
            Arc::new(IdMap::identity(num_users)),
            Arc::new(IdMap::identity(num_items)),
            triples,
            scale,
        )
    }

    pub fn with_ids(
        users: Arc<IdMap>,
        items: Arc<IdMap>,
        triples: Vec<Rating>,
        scale: RatingScale,
    ) -> Result<Self> {
        let num_users = users.len();
        let num_items = items.len();
        for (k, t) in triples.iter().enumerate() {
            if t.user as usize >= num_users || t.item as usize >= num_items {
                return Err(Error::Parse {
                    line: k + 1,
                    message: format!(
                        "index ({}, {}) outside {}x{}",
                        t.user, t.item, num_users, num_items
                    ),
                });
            }
            if !scale.contains(t.value) {
                return Err(Error::OutOfScale {
                    line: k + 1,
                    value: t.value,
                    min: scale.min_rating,
                    max: scale.max_rating,
                });
            }
        }

        let mut user_ptr = vec![0usize; num_users + 1];
        for t in &triples {
            user_ptr[t.user as usize + 1] += 1;
        }
        for u in 0..num_users {
            user_ptr[u + 1] += user_ptr[u];
        }
        let mut order: Vec<u32> = (0..triples.len() as u32).collect();
        order.sort_unstable_by_key(|&k| {
            let t = &triples[k as usize];
            (t.user, t.item)
        });
        let mut user_items = Vec::with_capacity(triples.len());
        let mut user_ratings = Vec::with_capacity(triples.len());
        for w in order.windows(2) {
            let (a, b) = (&triples[w[0] as usize], &triples[w[1] as usize]);
            if a.user == b.user && a.item == b.item {
                return Err(Error::Parse {
                    line: w[1] as usize + 1,
                    message: format!("duplicate pair ({}, {})", b.user, b.item),
                });
            }
        }
        for &k in &order {
            let t = &triples[k as usize];
            user_items.push(t.item);
            user_ratings.push(t.value);
        }

        let mut item_ptr = vec![0usize; num_items + 1];
        for t in &triples {
            item_ptr[t.item as usize + 1] += 1;
        }
        for i in 0..num_items {
            item_ptr[i + 1] += item_ptr[i];
        }
        let mut fill = item_ptr.clone();
        let mut item_users = vec![0u32; triples.len()];
        let mut item_ratings = vec![0.0; triples.len()];
        let mut item_pos = vec![0u32; triples.len()];
        // Walking the user-major arrays in order leaves every column sorted by user.
        for u in 0..num_users {
            for k in user_ptr[u]..user_ptr[u + 1] {
                let i = user_items[k] as usize;
                let slot = fill[i];
                fill[i] += 1;
                item_users[slot] = u as u32;
                item_ratings[slot] = user_ratings[k];
                item_pos[slot] = k as u32;
            }
        }

        Ok(Self {
            num_users,
            num_items,
            triples,
            scale,
            users,
            items,
            user_ptr,
            user_items,
            user_ratings,
            item_ptr,
            item_users,
            item_ratings,
            item_pos,
        })
    }

    /// A dataset over the same ID space holding `triples[k]` for each `k` in `indices`.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let triples = indices.iter().map(|&k| self.triples[k]).collect();
        Self::with_ids(
            Arc::clone(&self.users),
            Arc::clone(&self.items),
            triples,
            self.scale,
        )
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[Rating] {
        &self.triples
    }

    pub fn scale(&self) -> RatingScale {
        self.scale
    }

    pub fn user_ids(&self) -> &IdMap {
        &self.users
    }

    pub fn item_ids(&self) -> &IdMap {
        &self.items
    }

    /// Items rated by `user` (ascending) with their ratings.
    pub fn user_row(&self, user: usize) -> (&[u32], &[f64]) {
        let span = self.user_ptr[user]..self.user_ptr[user + 1];
        (&self.user_items[span.clone()], &self.user_ratings[span])
    }

    /// Users who rated `item` (ascending), their ratings, and each entry's
    /// position in the user-major arrays.
    pub fn item_col(&self, item: usize) -> (&[u32], &[f64], &[u32]) {
        let span = self.item_ptr[item]..self.item_ptr[item + 1];
        (
            &self.item_users[span.clone()],
            &self.item_ratings[span.clone()],
            &self.item_pos[span],
        )
    }

    /// Offset of `user`'s row in the user-major arrays.
    pub fn user_offset(&self, user: usize) -> usize {
        self.user_ptr[user]
    }

    pub fn user_count(&self, user: usize) -> usize {
        self.user_ptr[user + 1] - self.user_ptr[user]
    }

    pub fn item_count(&self, item: usize) -> usize {
        self.item_ptr[item + 1] - self.item_ptr[item]
    }

    /// Number of users with at least one rating.
    pub fn active_users(&self) -> usize {
        (0..self.num_users).filter(|&u| self.user_count(u) > 0).count()
    }

    /// Number of items with at least one rating.
    pub fn active_items(&self) -> usize {
        (0..self.num_items).filter(|&i| self.item_count(i) > 0).count()
    }

    /// Triples rebuilt from the user-major index, in (user, item) order.
    pub fn iter_by_user(&self) -> impl Iterator<Item = Rating> + '_ {
        (0..self.num_users).flat_map(move |u| {
            let (items, ratings) = self.user_row(u);
            items
                .iter()
                .zip(ratings)
                .map(move |(&i, &r)| Rating::new(u, i as usize, r))
        })
    }

    /// Triples rebuilt from the item-major index, in (item, user) order.
    pub fn iter_by_item(&self) -> impl Iterator<Item = Rating> + '_ {
        (0..self.num_items).flat_map(move |i| {
            let (users, ratings, _) = self.item_col(i);
            users
                .iter()
                .zip(ratings)
                .map(move |(&u, &r)| Rating::new(u as usize, i, r))
        })
    }

    pub fn global_mean(&self) -> Result<f64> {
        global_mean(self)
    }
}

/// Arithmetic mean of every rating in `data`.
pub fn global_mean(data: &RatingDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let sum: f64 = data.triples.iter().map(|t| t.value).sum();
    Ok(sum / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<Rating>) -> Vec<(u32, u32, u64)> {
        v.sort_by_key(|t| (t.user, t.item));
        v.into_iter()
            .map(|t| (t.user, t.item, t.value.to_bits()))
            .collect()
    }

    #[test]
    fn scale_rejects_inverted_bounds() {
        assert!(RatingScale::new(5.0, 1.0).is_err());
        assert!(RatingScale::new(1.0, 1.0).is_err());
        assert!(RatingScale::new(0.5, 4.0).is_ok());
    }

    #[test]
    fn id_map_is_dense_and_invertible() {
        let mut ids = IdMap::new();
        for raw in ["196", "186", "22", "196"] {
            ids.get_or_insert(raw);
        }
        assert_eq!(ids.len(), 3);
        for k in 0..ids.len() {
            assert_eq!(ids.internal(ids.external(k).unwrap()), Some(k));
        }
        assert_eq!(ids.internal("999"), None);
    }

    #[test]
    fn global_mean_examples() {
        let s = RatingScale::movielens();
        let d = RatingDataset::from_triples(
            1,
            2,
            vec![Rating::new(0, 0, 3.0), Rating::new(0, 1, 5.0)],
            s,
        )
        .unwrap();
        assert_eq!(d.global_mean().unwrap(), 4.0);

        let s = RatingScale::new(0.5, 4.0).unwrap();
        let d = RatingDataset::from_triples(1, 1, vec![Rating::new(0, 0, 2.5)], s).unwrap();
        assert_eq!(d.global_mean().unwrap(), 2.5);

        let d = RatingDataset::from_triples(1, 1, vec![], s).unwrap();
        assert!(matches!(d.global_mean(), Err(Error::EmptyDataset)));
    }

    #[test]
    fn rejects_duplicates_and_out_of_scale() {
        let s = RatingScale::movielens();
        let dup = vec![Rating::new(0, 0, 3.0), Rating::new(0, 0, 4.0)];
        assert!(RatingDataset::from_triples(1, 1, dup, s).is_err());
        let bad = vec![Rating::new(0, 0, 6.0)];
        assert!(matches!(
            RatingDataset::from_triples(1, 1, bad, s),
            Err(Error::OutOfScale { .. })
        ));
    }

    #[test]
    fn indexes_invert_each_other() {
        let s = RatingScale::movielens();
        let triples = vec![
            Rating::new(2, 1, 4.0),
            Rating::new(0, 1, 3.0),
            Rating::new(0, 0, 5.0),
            Rating::new(1, 2, 1.0),
            Rating::new(2, 0, 2.0),
        ];
        let d = RatingDataset::from_triples(3, 3, triples.clone(), s).unwrap();
        assert_eq!(sorted(d.iter_by_user().collect()), sorted(triples.clone()));
        assert_eq!(sorted(d.iter_by_item().collect()), sorted(triples));
        let (users, _, pos) = d.item_col(1);
        assert_eq!(users, &[0, 2]);
        for (&u, &p) in users.iter().zip(pos) {
            let off = d.user_offset(u as usize);
            let (items, _) = d.user_row(u as usize);
            assert_eq!(items[p as usize - off], 1);
        }
    }
}

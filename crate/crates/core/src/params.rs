//! Model parameters and their initialisation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::RatingDataset;
use crate::models::{ModelKind, TrainConfig};

/// Dense row-major `rows x dim` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FactorMatrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn from_fn(rows: usize, dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * dim);
        for r in 0..rows {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { rows, dim, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// User factors `P`, `m x d`.
    pub user_factors: FactorMatrix,
    /// Item factors `Q`, `n x d`.
    pub item_factors: FactorMatrix,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    /// Global mean, fixed at initialisation.
    pub mu: f64,
    /// Implicit-feedback factors `y`, `n x d`; SVD++ only.
    pub implicit: Option<FactorMatrix>,
}

/// Trainable parameter blocks, in update order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    UserBias,
    ItemBias,
    UserFactors,
    ItemFactors,
    Implicit,
}

impl Block {
    pub const ALL: [Block; 5] = [
        Block::UserBias,
        Block::ItemBias,
        Block::UserFactors,
        Block::ItemFactors,
        Block::Implicit,
    ];
}

impl ModelParams {
    pub fn zeros(num_users: usize, num_items: usize, d: usize, kind: ModelKind) -> Self {
        Self {
            user_factors: FactorMatrix::zeros(num_users, d),
            item_factors: FactorMatrix::zeros(num_items, d),
            user_bias: vec![0.0; num_users],
            item_bias: vec![0.0; num_items],
            mu: 0.0,
            implicit: (kind == ModelKind::SvdPlusPlus).then(|| FactorMatrix::zeros(num_items, d)),
        }
    }

    pub fn num_users(&self) -> usize {
        self.user_bias.len()
    }

    pub fn num_items(&self) -> usize {
        self.item_bias.len()
    }

    pub fn dim(&self) -> usize {
        self.user_factors.dim()
    }

    /// The blocks a model of `kind` trains.
    pub fn blocks(kind: ModelKind) -> &'static [Block] {
        match kind {
            ModelKind::Mf | ModelKind::Pmf => &[Block::UserFactors, Block::ItemFactors],
            ModelKind::BiasedMf | ModelKind::UserReg => &[
                Block::UserBias,
                Block::ItemBias,
                Block::UserFactors,
                Block::ItemFactors,
            ],
            ModelKind::SvdPlusPlus => &Block::ALL,
        }
    }

    /// Flat view of one block; empty if the block is absent.
    pub fn block(&self, block: Block) -> &[f64] {
        match block {
            Block::UserBias => &self.user_bias,
            Block::ItemBias => &self.item_bias,
            Block::UserFactors => self.user_factors.as_slice(),
            Block::ItemFactors => self.item_factors.as_slice(),
            Block::Implicit => self.implicit.as_ref().map_or(&[], |y| y.as_slice()),
        }
    }

    pub fn block_mut(&mut self, block: Block) -> &mut [f64] {
        match block {
            Block::UserBias => &mut self.user_bias,
            Block::ItemBias => &mut self.item_bias,
            Block::UserFactors => self.user_factors.as_mut_slice(),
            Block::ItemFactors => self.item_factors.as_mut_slice(),
            Block::Implicit => self
                .implicit
                .as_mut()
                .map_or(&mut [], |y| y.as_mut_slice()),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.mu.is_finite()
            && Block::ALL
                .iter()
                .all(|&b| self.block(b).iter().all(|x| x.is_finite()))
    }
}

/// Seeded uniform factors in `(-s, s)` with `s = config.init_scale()`, zero
/// biases, and `mu` set to the mean training rating (unused by unbiased kinds).
pub fn init_params(data: &RatingDataset, config: &TrainConfig, kind: ModelKind) -> ModelParams {
    let d = config.d;
    let scale = config.init_scale();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut draw = |_: usize, _: usize| {
        if scale == 0.0 {
            0.0
        } else {
            rng.gen_range(-scale..scale)
        }
    };
    let user_factors = FactorMatrix::from_fn(data.num_users(), d, &mut draw);
    let item_factors = FactorMatrix::from_fn(data.num_items(), d, &mut draw);
    let implicit = (kind == ModelKind::SvdPlusPlus)
        .then(|| FactorMatrix::from_fn(data.num_items(), d, &mut draw));
    let mu = data.global_mean().unwrap_or(0.0);
    ModelParams {
        user_factors,
        item_factors,
        user_bias: vec![0.0; data.num_users()],
        item_bias: vec![0.0; data.num_items()],
        mu,
        implicit,
    }
}

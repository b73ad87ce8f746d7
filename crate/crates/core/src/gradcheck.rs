//! Central finite-difference oracle for the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::RatingDataset;
use crate::error::{Error, Result};
use crate::interest::{build_interest_sets_with, InterestSets};
use crate::models::{gradients, interest_cross_term, objective, Gradients, ModelKind, TrainConfig};
use crate::params::{init_params, Block, ModelParams};
use crate::synthetic::random_instance;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const PASS_THRESHOLD: f64 = 1e-5;

/// `|a - b| / max(1, |a|, |b|)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Central differences `(f(x + h e_k) - f(x - h e_k)) / 2h` for every coordinate.
pub fn central_difference(
    mut f: impl FnMut(&[f64]) -> f64,
    x: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let orig = probe[k];
        probe[k] = orig + step;
        let up = f(&probe);
        probe[k] = orig - step;
        let down = f(&probe);
        probe[k] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFiniteProbe { index: k });
        }
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

/// Central-difference gradient of `f` over every entry of `blocks`; other
/// blocks of the result are zero.
pub fn finite_diff_gradient(
    mut f: impl FnMut(&ModelParams) -> f64,
    params: &ModelParams,
    blocks: &[Block],
    step: f64,
) -> Result<Gradients> {
    if !(step > 0.0) {
        return Err(Error::InvalidConfig(format!("step must be > 0, got {step}")));
    }
    if !f(params).is_finite() {
        return Err(Error::NonFiniteProbe { index: 0 });
    }
    let mut out = params.clone();
    for b in Block::ALL {
        out.block_mut(b).fill(0.0);
    }
    out.mu = 0.0;
    let mut probe = params.clone();
    let mut index = 0;
    for &block in blocks {
        for k in 0..params.block(block).len() {
            let orig = probe.block(block)[k];
            probe.block_mut(block)[k] = orig + step;
            let up = f(&probe);
            probe.block_mut(block)[k] = orig - step;
            let down = f(&probe);
            probe.block_mut(block)[k] = orig;
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::NonFiniteProbe { index });
            }
            out.block_mut(block)[k] = (up - down) / (2.0 * step);
            index += 1;
        }
    }
    Ok(out)
}

fn max_block_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| relative_error(x, y))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    /// Item-factor gradient without the interest-set term.
    Truncated,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceSize {
    pub num_users: usize,
    pub num_items: usize,
    pub density: f64,
    pub seed: u64,
}

impl Default for InstanceSize {
    fn default() -> Self {
        Self {
            num_users: 4,
            num_items: 4,
            density: 0.6,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockError {
    pub block: Block,
    pub max_relative_error: f64,
    /// Whether the analytic gradient is meant to equal the true derivative here.
    pub in_scope: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub kind: ModelKind,
    pub mode: GradientMode,
    pub num_users: usize,
    pub num_items: usize,
    pub d: usize,
    pub seed: u64,
    pub step: f64,
    pub threshold: f64,
    pub blocks: Vec<BlockError>,
    /// Truncated UserReg only: max relative error between
    /// `fd - analytic` on the item factors and the omitted interest-set term.
    pub cross_term_residual: Option<f64>,
    /// Largest entry of the omitted interest-set term.
    pub cross_term_magnitude: Option<f64>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.blocks
            .iter()
            .filter(|b| b.in_scope)
            .all(|b| b.max_relative_error < self.threshold)
            && self.cross_term_residual.map_or(true, |r| r < self.threshold)
    }

    pub fn error(&self, block: Block) -> Option<f64> {
        self.blocks
            .iter()
            .find(|b| b.block == block)
            .map(|b| b.max_relative_error)
    }
}

/// Compares analytic and finite-difference gradients for given data and parameters.
pub fn check_params(
    kind: ModelKind,
    config: &TrainConfig,
    train: &RatingDataset,
    interest: &InterestSets,
    params: &ModelParams,
    step: f64,
) -> Result<GradCheckReport> {
    let blocks = ModelParams::blocks(kind);
    let analytic = gradients(params, train, interest, config, kind);
    let numeric = finite_diff_gradient(
        |p| objective(p, train, interest, config, kind),
        params,
        blocks,
        step,
    )?;
    let truncated_userreg =
        kind == ModelKind::UserReg && !config.exact_q_gradient && config.beta != 0.0;
    let report_blocks = blocks
        .iter()
        .map(|&b| BlockError {
            block: b,
            max_relative_error: max_block_error(analytic.block(b), numeric.block(b)),
            in_scope: !(truncated_userreg && b == Block::ItemFactors),
        })
        .collect();

    let (cross_term_residual, cross_term_magnitude) = if truncated_userreg {
        let cross = interest_cross_term(params, interest, config.beta);
        let gap: Vec<f64> = numeric
            .item_factors
            .as_slice()
            .iter()
            .zip(analytic.item_factors.as_slice())
            .map(|(n, a)| n - a)
            .collect();
        let magnitude = cross.as_slice().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        (Some(max_block_error(&gap, cross.as_slice())), Some(magnitude))
    } else {
        (None, None)
    };

    Ok(GradCheckReport {
        kind,
        mode: if config.exact_q_gradient {
            GradientMode::Exact
        } else {
            GradientMode::Truncated
        },
        num_users: train.num_users(),
        num_items: train.num_items(),
        d: config.d,
        seed: config.seed,
        step,
        threshold: PASS_THRESHOLD,
        blocks: report_blocks,
        cross_term_residual,
        cross_term_magnitude,
    })
}

/// Random parameters for probing: factors from the seeded initialiser and
/// biases uniform in `(-0.5, 0.5)` so every block is away from zero.
pub fn random_params(train: &RatingDataset, config: &TrainConfig, kind: ModelKind) -> ModelParams {
    let mut params = init_params(
        train,
        &TrainConfig {
            init_scale: Some(0.8),
            ..config.clone()
        },
        kind,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED);
    for b in params.user_bias.iter_mut().chain(params.item_bias.iter_mut()) {
        *b = rng.gen_range(-0.5..0.5);
    }
    params
}

/// Runs the check on a seeded random instance.
pub fn check_model(kind: ModelKind, config: &TrainConfig, size: InstanceSize) -> Result<GradCheckReport> {
    config.validate()?;
    let train = random_instance(size.num_users, size.num_items, size.density, size.seed);
    let interest = if kind == ModelKind::UserReg {
        build_interest_sets_with(&train, config.interest_threshold)
    } else {
        InterestSets::empty(train.num_users())
    };
    let cfg = TrainConfig {
        seed: size.seed,
        ..config.clone()
    };
    let params = random_params(&train, &cfg, kind);
    check_params(kind, &cfg, &train, &interest, &params, DEFAULT_STEP)
}

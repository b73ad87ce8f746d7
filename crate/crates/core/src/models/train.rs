use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{RatingDataset, RatingScale};
use crate::error::{Error, Result};
use crate::interest::{build_interest_sets_with, InterestSets};
use crate::models::objective::{Evaluator, Gradients};
use crate::models::{ModelKind, TrainConfig};
use crate::params::{dot, init_params, FactorMatrix, ModelParams};

/// Objective growth over its running minimum that counts as divergence.
const DIVERGENCE_FACTOR: f64 = 10.0;

/// Raw prediction from parameters, without cold-start handling or clamping.
///
/// `implicit_sum` is SVD++'s `|R_u|^{-1/2} sum_{j in R_u} y_j` for `user`;
/// `None` (or an empty R_u) contributes nothing.
pub fn predict(
    params: &ModelParams,
    kind: ModelKind,
    user: usize,
    item: usize,
    implicit_sum: Option<&[f64]>,
) -> f64 {
    let pu = params.user_factors.row(user);
    let qi = params.item_factors.row(item);
    let mut score = dot(pu, qi);
    if kind == ModelKind::SvdPlusPlus {
        if let Some(z) = implicit_sum {
            score += dot(z, qi);
        }
    }
    if kind.has_biases() {
        score += params.mu + params.user_bias[user] + params.item_bias[item];
    }
    score
}

/// `|R_u|^{-1/2} sum_{j in R_u} y_j` for every user, zero rows for empty R_u.
pub fn implicit_sums(params: &ModelParams, train: &RatingDataset) -> Option<FactorMatrix> {
    let y = params.implicit.as_ref()?;
    let mut out = FactorMatrix::zeros(train.num_users(), y.dim());
    for u in 0..train.num_users() {
        let (items, _) = train.user_row(u);
        if items.is_empty() {
            continue;
        }
        let row = out.row_mut(u);
        for &j in items {
            for (o, x) in row.iter_mut().zip(y.row(j as usize)) {
                *o += x;
            }
        }
        let norm = 1.0 / (items.len() as f64).sqrt();
        row.iter_mut().for_each(|o| *o *= norm);
    }
    Some(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub params: ModelParams,
    pub config: TrainConfig,
    /// Objective before each update, plus the value at the returned parameters.
    pub objective_trace: Vec<f64>,
    pub iterations_run: usize,
    pub train_seconds: f64,
    scale: RatingScale,
    user_seen: Vec<bool>,
    item_seen: Vec<bool>,
    implicit_sums: Option<FactorMatrix>,
}

impl TrainedModel {
    fn new(
        kind: ModelKind,
        params: ModelParams,
        config: TrainConfig,
        train: &RatingDataset,
        objective_trace: Vec<f64>,
        iterations_run: usize,
        train_seconds: f64,
    ) -> Self {
        let implicit_sums = implicit_sums(&params, train);
        Self {
            kind,
            config,
            objective_trace,
            iterations_run,
            train_seconds,
            scale: train.scale(),
            user_seen: (0..train.num_users()).map(|u| train.user_count(u) > 0).collect(),
            item_seen: (0..train.num_items()).map(|i| train.item_count(i) > 0).collect(),
            implicit_sums,
            params,
        }
    }

    /// Predicted rating. Users or items without training ratings contribute
    /// neither factors nor bias; the result is clipped to the rating scale
    /// when `clamp_predictions` is set.
    pub fn predict(&self, user: usize, item: usize) -> f64 {
        let user_ok = self.user_seen.get(user).copied().unwrap_or(false);
        let item_ok = self.item_seen.get(item).copied().unwrap_or(false);
        let score = if user_ok && item_ok {
            let z = self.implicit_sums.as_ref().map(|z| z.row(user));
            predict(&self.params, self.kind, user, item, z)
        } else if self.kind.has_biases() {
            let mut s = self.params.mu;
            if user_ok {
                s += self.params.user_bias[user];
            }
            if item_ok {
                s += self.params.item_bias[item];
            }
            s
        } else {
            0.0
        };
        if self.config.clamp_predictions {
            self.scale.clamp(score)
        } else {
            score
        }
    }

    pub fn seconds_per_iteration(&self) -> f64 {
        self.train_seconds / self.iterations_run.max(1) as f64
    }
}

fn interest_for(train: &RatingDataset, config: &TrainConfig, kind: ModelKind) -> InterestSets {
    if kind == ModelKind::UserReg {
        build_interest_sets_with(train, config.interest_threshold)
    } else {
        InterestSets::empty(train.num_users())
    }
}

/// Full-batch gradient descent from seeded initial parameters.
pub fn fit(train: &RatingDataset, config: &TrainConfig, kind: ModelKind) -> Result<TrainedModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let params = init_params(train, config, kind);
    fit_from(train, params, config, kind)
}

/// Full-batch gradient descent from the given parameters.
///
/// Every iteration evaluates all gradient blocks at the current parameters,
/// then applies `x <- x - gamma * grad` to `b_u`, `b_i`, `P`, `Q` (and `y`).
/// Stops when the relative objective change drops below `rel_tol` (unless
/// `fixed_iterations`) or after `max_iters` updates.
pub fn fit_from(
    train: &RatingDataset,
    mut params: ModelParams,
    config: &TrainConfig,
    kind: ModelKind,
) -> Result<TrainedModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let interest = interest_for(train, config, kind);
    let started = Instant::now();
    let mut evaluator = Evaluator::new(train, &interest, config, kind);
    let mut grads: Gradients =
        ModelParams::zeros(params.num_users(), params.num_items(), config.d, kind);
    let mut trace = Vec::with_capacity(config.max_iters + 1);
    let mut best = f64::INFINITY;
    let mut iterations = 0;

    loop {
        let value = evaluator.evaluate(&params, Some(&mut grads));
        if !value.is_finite() || value > DIVERGENCE_FACTOR * best {
            return Err(Error::Diverged {
                iteration: iterations,
                objective: value,
                gamma: config.gamma,
            });
        }
        best = best.min(value);
        trace.push(value);

        if iterations >= config.max_iters {
            break;
        }
        if !config.fixed_iterations && trace.len() >= 2 {
            let prev = trace[trace.len() - 2];
            let change = (value - prev).abs();
            if change == 0.0 || change / prev.abs() < config.rel_tol {
                break;
            }
        }

        for &block in ModelParams::blocks(kind) {
            let g = grads.block(block);
            for (x, dx) in params.block_mut(block).iter_mut().zip(g) {
                *x -= config.gamma * dx;
            }
        }
        iterations += 1;
    }

    let seconds = started.elapsed().as_secs_f64();
    debug_assert!(params.all_finite());
    Ok(TrainedModel::new(
        kind,
        params,
        config.clone(),
        train,
        trace,
        iterations,
        seconds,
    ))
}

//! Training objectives and their analytic gradients.
//!
//! All objectives use the half-squared-error convention:
//!
//! * MF / PMF: `1/2 sum_K e^2 + lambda/2 sum_K (|P_u|^2 + |Q_i|^2)`, so each
//!   factor row is penalised once per observed rating.
//! * BiasedMF: `1/2 sum_K e^2 + lambda/2 (|P|^2 + |Q|^2 + |b_u|^2 + |b_i|^2)`.
//! * UserReg: BiasedMF plus `beta/2 sum_u |P_u - mean_{j in I(u)} Q_j|^2`
//!   over users with non-empty I(u).
//! * SVD++: BiasedMF with the implicit term in the prediction and
//!   `implicit_penalty * |y|^2` added to the penalty.
//!
//! `e_ui` is always `prediction - rating`.

use crate::dataset::RatingDataset;
use crate::interest::InterestSets;
use crate::models::{ModelKind, PenaltyScaling, TrainConfig};
use crate::params::{dot, FactorMatrix, ModelParams};

/// Gradient with respect to every trainable block, shaped like the parameters.
/// `mu` is not trained and its slot is always zero.
pub type Gradients = ModelParams;

/// Reusable evaluator for one training problem. Holds per-rating and per-user
/// scratch space so repeated evaluations during training do not allocate.
pub struct Evaluator<'a> {
    train: &'a RatingDataset,
    interest: &'a InterestSets,
    config: &'a TrainConfig,
    kind: ModelKind,
    residuals: Vec<f64>,
    // SVD++: P_u + |R_u|^{-1/2} sum y_j, and |R_u|^{-1/2} sum_i e_ui Q_i.
    effective_user: FactorMatrix,
    implicit_push: FactorMatrix,
    // UserReg: P_u - mean_{j in I(u)} Q_j, zero rows for empty I(u).
    interest_gap: FactorMatrix,
    interest_inverse: Option<(Vec<usize>, Vec<u32>)>,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        train: &'a RatingDataset,
        interest: &'a InterestSets,
        config: &'a TrainConfig,
        kind: ModelKind,
    ) -> Self {
        let d = config.d;
        let m = train.num_users();
        let svdpp = kind == ModelKind::SvdPlusPlus;
        let userreg = kind == ModelKind::UserReg;
        Self {
            train,
            interest,
            config,
            kind,
            residuals: vec![0.0; train.len()],
            effective_user: FactorMatrix::zeros(if svdpp { m } else { 0 }, d),
            implicit_push: FactorMatrix::zeros(if svdpp { m } else { 0 }, d),
            interest_gap: FactorMatrix::zeros(if userreg { m } else { 0 }, d),
            interest_inverse: (userreg && config.exact_q_gradient)
                .then(|| interest.inverse(train.num_items())),
        }
    }

    /// Penalty multiplicity `(factors, bias)` for a row with `count` ratings.
    fn weights(&self, count: usize) -> (f64, f64) {
        let scaled = match self.config.penalty_exponent {
            e if e == 1.0 => count as f64,
            e => (count as f64).powf(e),
        };
        if !self.kind.has_biases() {
            return (scaled, 0.0);
        }
        match self.config.penalty {
            PenaltyScaling::PerEntity => (1.0, 1.0),
            PenaltyScaling::PerRating => (scaled, scaled),
            PenaltyScaling::PerRatingFactors => (scaled, 1.0),
        }
    }

    fn uses_interest(&self) -> bool {
        self.kind == ModelKind::UserReg && self.config.beta != 0.0
    }

    /// Objective at `params`; fills `grads` when given.
    pub fn evaluate(&mut self, params: &ModelParams, mut grads: Option<&mut Gradients>) -> f64 {
        let d = self.config.d;
        let lambda = self.config.lambda;
        let beta = self.config.beta;
        let biased = self.kind.has_biases();
        let svdpp = self.kind == ModelKind::SvdPlusPlus;
        let train = self.train;
        let p = &params.user_factors;
        let q = &params.item_factors;

        let mut squared_error = 0.0;
        let mut penalty = 0.0;
        let mut interest_term = 0.0;
        let mut g_row = vec![0.0; d];
        let mut mean_q = vec![0.0; d];

        if let Some(g) = grads.as_deref_mut() {
            g.mu = 0.0;
        }

        for u in 0..train.num_users() {
            let (items, ratings) = train.user_row(u);
            let offset = train.user_offset(u);
            let pu = p.row(u);

            let user_vec: &[f64] = if svdpp {
                let y = params.implicit.as_ref().expect("SVD++ parameters carry y");
                let eff = self.effective_user.row_mut(u);
                eff.fill(0.0);
                if !items.is_empty() {
                    for &j in items {
                        for (e, yj) in eff.iter_mut().zip(y.row(j as usize)) {
                            *e += yj;
                        }
                    }
                    let norm = 1.0 / (items.len() as f64).sqrt();
                    eff.iter_mut().for_each(|e| *e *= norm);
                }
                for (e, x) in eff.iter_mut().zip(pu) {
                    *e += x;
                }
                self.effective_user.row(u)
            } else {
                pu
            };

            let bias_u = if biased { params.mu + params.user_bias[u] } else { 0.0 };
            let mut residual_sum = 0.0;
            g_row.fill(0.0);
            for (k, (&i, &r)) in items.iter().zip(ratings).enumerate() {
                let i = i as usize;
                let qi = q.row(i);
                let mut pred = dot(user_vec, qi);
                if biased {
                    pred += bias_u + params.item_bias[i];
                }
                let e = pred - r;
                self.residuals[offset + k] = e;
                squared_error += e * e;
                residual_sum += e;
                if grads.is_some() {
                    for (g, x) in g_row.iter_mut().zip(qi) {
                        *g += e * x;
                    }
                }
            }

            let (user_weight, user_bias_weight) = self.weights(items.len());
            penalty += user_weight * dot(pu, pu);
            if biased {
                penalty += user_bias_weight * params.user_bias[u] * params.user_bias[u];
            }

            let mut has_gap = false;
            if self.uses_interest() {
                let liked = self.interest.items(u);
                let gap = self.interest_gap.row_mut(u);
                if liked.is_empty() {
                    gap.fill(0.0);
                } else {
                    mean_q.fill(0.0);
                    for &j in liked {
                        for (a, x) in mean_q.iter_mut().zip(q.row(j as usize)) {
                            *a += x;
                        }
                    }
                    let inv = 1.0 / liked.len() as f64;
                    for ((g, a), x) in gap.iter_mut().zip(&mean_q).zip(pu) {
                        *g = x - a * inv;
                    }
                    interest_term += dot(gap, gap);
                    has_gap = true;
                }
            }

            if let Some(g) = grads.as_deref_mut() {
                let reg = lambda * user_weight;
                g.user_bias[u] = if biased {
                    residual_sum + lambda * user_bias_weight * params.user_bias[u]
                } else {
                    0.0
                };
                let gp = g.user_factors.row_mut(u);
                for ((out, data), x) in gp.iter_mut().zip(&g_row).zip(pu) {
                    *out = data + reg * x;
                }
                if has_gap {
                    for (out, gap) in gp.iter_mut().zip(self.interest_gap.row(u)) {
                        *out += beta * gap;
                    }
                }
                if svdpp {
                    let push = self.implicit_push.row_mut(u);
                    let norm = if items.is_empty() {
                        0.0
                    } else {
                        1.0 / (items.len() as f64).sqrt()
                    };
                    for (out, data) in push.iter_mut().zip(&g_row) {
                        *out = data * norm;
                    }
                }
            }
        }

        for i in 0..train.num_items() {
            let qi = q.row(i);
            let (item_weight, item_bias_weight) = self.weights(train.item_count(i));
            let qi_sq = dot(qi, qi);
            if svdpp {
                let y = params.implicit.as_ref().expect("SVD++ parameters carry y");
                let yi = y.row(i);
                penalty += self.config.implicit_penalty * item_weight * dot(yi, yi);
            }
            penalty += item_weight * qi_sq;
            if biased {
                penalty += item_bias_weight * params.item_bias[i] * params.item_bias[i];
            }
        }

        if let Some(g) = grads.as_deref_mut() {
            for i in 0..train.num_items() {
                let (users, _, pos) = train.item_col(i);
                let qi = q.row(i);
                g_row.fill(0.0);
                let mut residual_sum = 0.0;
                for (&u, &k) in users.iter().zip(pos) {
                    let e = self.residuals[k as usize];
                    residual_sum += e;
                    let user_vec = if svdpp {
                        self.effective_user.row(u as usize)
                    } else {
                        p.row(u as usize)
                    };
                    for (gq, x) in g_row.iter_mut().zip(user_vec) {
                        *gq += e * x;
                    }
                }
                let (item_weight, item_bias_weight) = self.weights(users.len());
                let reg = lambda * item_weight;
                g.item_bias[i] = if biased {
                    residual_sum + lambda * item_bias_weight * params.item_bias[i]
                } else {
                    0.0
                };
                let gq = g.item_factors.row_mut(i);
                for ((out, data), x) in gq.iter_mut().zip(&g_row).zip(qi) {
                    *out = data + reg * x;
                }
                if let (Some((ptr, fans)), true) = (&self.interest_inverse, self.uses_interest()) {
                    for &u in &fans[ptr[i]..ptr[i + 1]] {
                        let u = u as usize;
                        let inv = 1.0 / self.interest.items(u).len() as f64;
                        for (out, gap) in gq.iter_mut().zip(self.interest_gap.row(u)) {
                            *out -= beta * inv * gap;
                        }
                    }
                }
                if svdpp {
                    let y = params.implicit.as_ref().expect("SVD++ parameters carry y");
                    let gy = g
                        .implicit
                        .as_mut()
                        .expect("SVD++ gradients carry y")
                        .row_mut(i);
                    gy.fill(0.0);
                    for &u in users {
                        for (out, push) in gy.iter_mut().zip(self.implicit_push.row(u as usize)) {
                            *out += push;
                        }
                    }
                    let reg_y = reg * self.config.implicit_penalty;
                    for (out, x) in gy.iter_mut().zip(y.row(i)) {
                        *out += reg_y * x;
                    }
                }
            }
        }

        0.5 * squared_error + 0.5 * lambda * penalty + 0.5 * beta * interest_term
    }
}

/// Objective value of `params` on `train`.
pub fn objective(
    params: &ModelParams,
    train: &RatingDataset,
    interest: &InterestSets,
    config: &TrainConfig,
    kind: ModelKind,
) -> f64 {
    Evaluator::new(train, interest, config, kind).evaluate(params, None)
}

/// Analytic gradients of the objective. For UserReg the item-factor block
/// omits the interest-set term unless `config.exact_q_gradient` is set.
pub fn gradients(
    params: &ModelParams,
    train: &RatingDataset,
    interest: &InterestSets,
    config: &TrainConfig,
    kind: ModelKind,
) -> Gradients {
    let mut grads = ModelParams::zeros(params.num_users(), params.num_items(), params.dim(), kind);
    Evaluator::new(train, interest, config, kind).evaluate(params, Some(&mut grads));
    grads
}

/// The part of the exact item-factor gradient that the default UserReg
/// gradient leaves out:
/// `-beta sum_{u : i in I(u)} |I(u)|^{-1} (P_u - mean_{j in I(u)} Q_j)`.
pub fn interest_cross_term(
    params: &ModelParams,
    interest: &InterestSets,
    beta: f64,
) -> FactorMatrix {
    let d = params.dim();
    let mut out = FactorMatrix::zeros(params.num_items(), d);
    let mut gap = vec![0.0; d];
    for u in 0..interest.num_users() {
        let liked = interest.items(u);
        if liked.is_empty() {
            continue;
        }
        let inv = 1.0 / liked.len() as f64;
        gap.copy_from_slice(params.user_factors.row(u));
        for &j in liked {
            for (g, x) in gap.iter_mut().zip(params.item_factors.row(j as usize)) {
                *g -= inv * x;
            }
        }
        for &j in liked {
            for (o, g) in out.row_mut(j as usize).iter_mut().zip(&gap) {
                *o -= beta * inv * g;
            }
        }
    }
    out
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interest::InterestThreshold;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Plain factorization, `P_u . Q_i`, L2 weight applied per observed rating.
    Mf,
    /// MAP estimate of the Gaussian model; same objective as `Mf`.
    Pmf,
    /// Factors plus global mean and user/item biases.
    BiasedMf,
    /// BiasedMF with implicit factors summed over each user's rated items.
    #[serde(rename = "svdpp")]
    SvdPlusPlus,
    /// BiasedMF whose user factors are pulled toward the mean factor of liked items.
    UserReg,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Mf,
        ModelKind::Pmf,
        ModelKind::BiasedMf,
        ModelKind::SvdPlusPlus,
        ModelKind::UserReg,
    ];

    pub fn has_biases(self) -> bool {
        !matches!(self, ModelKind::Mf | ModelKind::Pmf)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mf => "mf",
            ModelKind::Pmf => "pmf",
            ModelKind::BiasedMf => "biasedmf",
            ModelKind::SvdPlusPlus => "svdpp",
            ModelKind::UserReg => "userreg",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mf" => Ok(ModelKind::Mf),
            "pmf" => Ok(ModelKind::Pmf),
            "biasedmf" | "biased-mf" | "biasedsvd" => Ok(ModelKind::BiasedMf),
            "svdpp" | "svd++" => Ok(ModelKind::SvdPlusPlus),
            "userreg" => Ok(ModelKind::UserReg),
            other => Err(Error::InvalidConfig(format!("unknown model kind '{other}'"))),
        }
    }
}

/// Hyperparameters for full-batch training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Number of latent factors.
    pub d: usize,
    /// L2 weight on factors and biases.
    pub lambda: f64,
    /// Weight of the pull from `P_u` toward the mean factor of I(u). UserReg only.
    pub beta: f64,
    /// Learning rate.
    pub gamma: f64,
    pub max_iters: usize,
    /// Stop once `|O_t - O_{t-1}| / O_{t-1}` falls below this.
    pub rel_tol: f64,
    /// Run exactly `max_iters` updates, ignoring `rel_tol`.
    pub fixed_iterations: bool,
    pub seed: u64,
    /// Half-width of the uniform factor initialisation; `None` means `1/sqrt(d)`.
    pub init_scale: Option<f64>,
    /// Add the interest-set term to the item-factor gradient, making it the
    /// exact derivative of the UserReg objective.
    pub exact_q_gradient: bool,
    pub clamp_predictions: bool,
    pub interest_threshold: InterestThreshold,
    pub penalty: PenaltyScaling,
    /// Under the per-rating scalings (and always for MF/PMF) a row with `c`
    /// ratings is penalised `c^penalty_exponent` times.
    pub penalty_exponent: f64,
    /// Multiplier on `lambda` for the SVD++ implicit factors.
    pub implicit_penalty: f64,
}

/// How often each row's L2 penalty is counted in the biased objectives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyScaling {
    /// Once per user and once per item.
    #[default]
    PerEntity,
    /// `c^penalty_exponent` times for a row with `c` observed ratings.
    PerRating,
    /// Factor rows as `PerRating`, biases once.
    PerRatingFactors,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            d: 10,
            lambda: 0.1,
            beta: 12.0,
            gamma: 5e-4,
            max_iters: 500,
            rel_tol: 1e-5,
            fixed_iterations: false,
            seed: 42,
            init_scale: None,
            exact_q_gradient: false,
            clamp_predictions: true,
            interest_threshold: InterestThreshold::UserMean,
            penalty: PenaltyScaling::PerEntity,
            penalty_exponent: 1.0,
            implicit_penalty: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn init_scale(&self) -> f64 {
        self.init_scale
            .unwrap_or_else(|| 1.0 / (self.d.max(1) as f64).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.d == 0 {
            return bad("d must be at least 1".into());
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return bad(format!("beta must be >= 0, got {}", self.beta));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return bad(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if !(self.rel_tol > 0.0) {
            return bad(format!("rel_tol must be > 0, got {}", self.rel_tol));
        }
        if !(self.penalty_exponent >= 0.0) || !self.penalty_exponent.is_finite() {
            return bad(format!(
                "penalty_exponent must be >= 0, got {}",
                self.penalty_exponent
            ));
        }
        if !(self.implicit_penalty >= 0.0) || !self.implicit_penalty.is_finite() {
            return bad(format!(
                "implicit_penalty must be >= 0, got {}",
                self.implicit_penalty
            ));
        }
        if let Some(s) = self.init_scale {
            if !(s >= 0.0) || !s.is_finite() {
                return bad(format!("init_scale must be >= 0, got {s}"));
            }
        }
        Ok(())
    }
}

//! Flag definitions, the optional TOML config file, and their resolution
//! into a `TrainConfig` (flags over file over defaults).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use userreg::{DatasetFormat, InterestThreshold, ModelKind, PenaltyScaling, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    /// Tab-separated `user item rating timestamp`.
    Ml100k,
    /// `user::item::rating::timestamp`.
    Ml1m,
    /// Comma-separated `user,item,rating`.
    Csv,
}

impl FormatArg {
    pub fn to_format(self, header: bool) -> DatasetFormat {
        match self {
            FormatArg::Ml100k => DatasetFormat::MovielensTab,
            FormatArg::Ml1m => DatasetFormat::MovielensDoubleColon,
            FormatArg::Csv => DatasetFormat::csv(header),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Mf,
    Pmf,
    Biasedmf,
    Svdpp,
    Userreg,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Mf => ModelKind::Mf,
            ModelArg::Pmf => ModelKind::Pmf,
            ModelArg::Biasedmf => ModelKind::BiasedMf,
            ModelArg::Svdpp => ModelKind::SvdPlusPlus,
            ModelArg::Userreg => ModelKind::UserReg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PenaltyArg {
    Entity,
    Rating,
    Factors,
}

impl From<PenaltyArg> for PenaltyScaling {
    fn from(p: PenaltyArg) -> Self {
        match p {
            PenaltyArg::Entity => PenaltyScaling::PerEntity,
            PenaltyArg::Rating => PenaltyScaling::PerRating,
            PenaltyArg::Factors => PenaltyScaling::PerRatingFactors,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ThresholdArg {
    UserMean,
    GlobalMean,
}

impl From<ThresholdArg> for InterestThreshold {
    fn from(t: ThresholdArg) -> Self {
        match t {
            ThresholdArg::UserMean => InterestThreshold::UserMean,
            ThresholdArg::GlobalMean => InterestThreshold::GlobalMean,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Ratings file.
    #[arg(long)]
    pub data: PathBuf,
    /// File layout [default: ml100k].
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// The CSV file starts with a header line.
    #[arg(long)]
    pub header: bool,
}

impl DataArgs {
    pub fn format(&self, file: &FileConfig) -> FormatArg {
        self.format.or(file.format).unwrap_or(FormatArg::Ml100k)
    }
}

/// Training hyperparameters. Unset flags fall back to the config file, then
/// to the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct HyperArgs {
    /// TOML file with default settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of latent factors.
    #[arg(long)]
    pub d: Option<usize>,
    /// L2 penalty weight [default: 0.1]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Weight of the interest-set term [default: 12]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Learning rate.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Upper bound on gradient steps [default: 500]
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Stop when the relative objective change falls below this [default: 1e-5]
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Run exactly --max-iters updates.
    #[arg(long)]
    pub fixed_iterations: bool,
    /// Base seed for splits and initialisation.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Std-dev of the initial factors [default: 1/sqrt(d)]
    #[arg(long)]
    pub init_scale: Option<f64>,
    /// Use the exact item-factor gradient for UserReg.
    #[arg(long)]
    pub exact_q_grad: bool,
    /// Do not clip predictions to the rating scale.
    #[arg(long)]
    pub no_clamp: bool,
    /// How the L2 penalty is counted for biased models.
    #[arg(long, value_enum)]
    pub penalty: Option<PenaltyArg>,
    /// Per-rating penalties count a row with c ratings c^EXP times.
    #[arg(long, value_name = "EXP")]
    pub penalty_exponent: Option<f64>,
    /// Multiplier on lambda for the SVD++ implicit factors.
    #[arg(long)]
    pub implicit_penalty: Option<f64>,
    /// What a user's liked items must exceed [default: user-mean]
    #[arg(long, value_enum)]
    pub interest_threshold: Option<ThresholdArg>,
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<ModelKind>,
    pub format: Option<FormatArg>,
    pub train_frac: Option<f64>,
    pub repeats: Option<usize>,
    pub betas: Option<Vec<f64>>,
    pub ratios: Option<Vec<f64>>,
    pub models: Option<Vec<ModelKind>>,
    pub d: Option<usize>,
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub max_iters: Option<usize>,
    pub rel_tol: Option<f64>,
    pub fixed_iterations: Option<bool>,
    pub seed: Option<u64>,
    pub init_scale: Option<f64>,
    pub exact_q_gradient: Option<bool>,
    pub clamp_predictions: Option<bool>,
    pub interest_threshold: Option<InterestThreshold>,
    pub penalty: Option<PenaltyScaling>,
    pub penalty_exponent: Option<f64>,
    pub implicit_penalty: Option<f64>,
}

/// Config-file problems get their own exit code.
#[derive(Debug, thiserror::Error)]
#[error("config file {path}: {message}")]
pub struct ConfigFileError {
    pub path: PathBuf,
    pub message: String,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| userreg::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        toml::from_str(&text)
            .map_err(|e| ConfigFileError {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
            .context("reading settings")
    }

    pub fn load_opt(path: Option<&Path>) -> anyhow::Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}

/// Layers flags over the file over `base`.
pub fn resolve(flags: &HyperArgs, file: &FileConfig, base: TrainConfig) -> TrainConfig {
    fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>, base: T) -> T {
        flag.clone().or_else(|| file.clone()).unwrap_or(base)
    }
    fn switch(flag: bool, file: Option<bool>, base: bool) -> bool {
        flag || file.unwrap_or(base)
    }
    TrainConfig {
        d: pick(&flags.d, &file.d, base.d),
        lambda: pick(&flags.lambda, &file.lambda, base.lambda),
        beta: pick(&flags.beta, &file.beta, base.beta),
        gamma: pick(&flags.gamma, &file.gamma, base.gamma),
        max_iters: pick(&flags.max_iters, &file.max_iters, base.max_iters),
        rel_tol: pick(&flags.rel_tol, &file.rel_tol, base.rel_tol),
        fixed_iterations: switch(flags.fixed_iterations, file.fixed_iterations, base.fixed_iterations),
        seed: pick(&flags.seed, &file.seed, base.seed),
        init_scale: flags.init_scale.or(file.init_scale).or(base.init_scale),
        exact_q_gradient: switch(flags.exact_q_grad, file.exact_q_gradient, base.exact_q_gradient),
        clamp_predictions: if flags.no_clamp {
            false
        } else {
            file.clamp_predictions.unwrap_or(base.clamp_predictions)
        },
        interest_threshold: pick(
            &flags.interest_threshold.map(Into::into),
            &file.interest_threshold,
            base.interest_threshold,
        ),
        penalty: pick(&flags.penalty.map(Into::into), &file.penalty, base.penalty),
        penalty_exponent: pick(&flags.penalty_exponent, &file.penalty_exponent, base.penalty_exponent),
        implicit_penalty: pick(&flags.implicit_penalty, &file.implicit_penalty, base.implicit_penalty),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file: FileConfig = toml::from_str("lambda = 0.3\nbeta = 4.0\nclamp_predictions = false").unwrap();
        let flags = HyperArgs {
            beta: Some(8.0),
            ..Default::default()
        };
        let c = resolve(&flags, &file, TrainConfig::default());
        assert_eq!(c.beta, 8.0);
        assert_eq!(c.lambda, 0.3);
        assert!(!c.clamp_predictions);
        assert_eq!(c.d, TrainConfig::default().d);
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("lamda = 0.3").is_err());
    }

    #[test]
    fn enum_values_in_file() {
        let file: FileConfig =
            toml::from_str("model = \"svdpp\"\npenalty = \"per-entity\"\ninterest_threshold = \"global-mean\"")
                .unwrap();
        assert_eq!(file.model, Some(ModelKind::SvdPlusPlus));
        assert_eq!(file.penalty, Some(PenaltyScaling::PerEntity));
    }
}

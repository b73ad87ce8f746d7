//! Latent-factor rating prediction.
//!
//! Implements UserReg, a biased matrix factorization whose user factors are
//! regularised toward the mean factor of the items each user rated above
//! their own average, next to the MF/PMF, BiasedMF and SVD++ baselines. All
//! models train by full-batch gradient descent and share one evaluation
//! harness.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod interest;
pub mod io;
pub mod models;
pub mod params;
pub mod report;
pub mod split;
pub mod synthetic;

pub use dataset::{global_mean, IdMap, Rating, RatingDataset, RatingScale};
pub use error::{Error, Result};
pub use interest::{build_interest_sets, build_interest_sets_with, InterestSets, InterestThreshold};
pub use io::{load_dataset, DatasetFormat, Delimiter};
pub use eval::{rmse, run_experiment, run_experiment_on, EvalReport};
pub use models::{fit, ModelKind, PenaltyScaling, TrainConfig, TrainedModel};
pub use report::RunManifest;
pub use params::{init_params, Block, FactorMatrix, ModelParams};
pub use split::{split, SplitSpec};

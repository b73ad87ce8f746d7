//! RMSE, repeat-averaged experiments, timing and scaling probes.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::RatingDataset;
use crate::error::{Error, Result};
use crate::io::{file_checksum, load_dataset, DatasetFormat};
use crate::models::{fit, ModelKind, TrainConfig, TrainedModel};
use crate::report::RunManifest;
use crate::split::{split, SplitSpec};
use crate::synthetic::scaling_dataset;

/// Root mean squared error of `model` over every pair in `test`, cold-start
/// pairs included.
pub fn rmse(model: &TrainedModel, test: &RatingDataset) -> Result<f64> {
    rmse_with(|u, i| model.predict(u, i), test)
}

/// RMSE of an arbitrary predictor.
pub fn rmse_with(mut predict: impl FnMut(usize, usize) -> f64, test: &RatingDataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let sum: f64 = test
        .triples()
        .iter()
        .map(|t| {
            let e = t.value - predict(t.user as usize, t.item as usize);
            e * e
        })
        .sum();
    Ok((sum / test.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub source: String,
    pub num_users: usize,
    pub num_items: usize,
    pub num_ratings: usize,
    /// Hex SHA-256 of the source file, when loaded from disk.
    pub checksum: Option<String>,
}

impl DatasetDescriptor {
    pub fn of(data: &RatingDataset, source: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            num_users: data.num_users(),
            num_items: data.num_items(),
            num_ratings: data.len(),
            checksum: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub repeat: usize,
    pub split_seed: u64,
    pub init_seed: u64,
    pub rmse: f64,
    pub train_seconds: f64,
    pub iterations: usize,
    pub seconds_per_iteration: f64,
    pub final_objective: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: ModelKind,
    pub config: TrainConfig,
    pub split: SplitSpec,
    pub dataset: DatasetDescriptor,
    pub repeats: Vec<RepeatResult>,
    pub mean_rmse: f64,
    pub mean_seconds_per_iteration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
}

#[derive(Serialize)]
struct ReportRow<'a> {
    row: &'a str,
    kind: ModelKind,
    repeat: Option<usize>,
    split_seed: Option<u64>,
    init_seed: Option<u64>,
    rmse: f64,
    train_seconds: f64,
    iterations: Option<usize>,
    seconds_per_iteration: f64,
}

impl EvalReport {
    pub fn rmses(&self) -> Vec<f64> {
        self.repeats.iter().map(|r| r.rmse).collect()
    }

    /// One `repeat` row per repeat followed by a `mean` row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.repeats {
            w.serialize(ReportRow {
                row: "repeat",
                kind: self.kind,
                repeat: Some(r.repeat),
                split_seed: Some(r.split_seed),
                init_seed: Some(r.init_seed),
                rmse: r.rmse,
                train_seconds: r.train_seconds,
                iterations: Some(r.iterations),
                seconds_per_iteration: r.seconds_per_iteration,
            })
            .map_err(csv_error)?;
        }
        w.serialize(ReportRow {
            row: "mean",
            kind: self.kind,
            repeat: None,
            split_seed: None,
            init_seed: None,
            rmse: self.mean_rmse,
            train_seconds: mean(self.repeats.iter().map(|r| r.train_seconds)),
            iterations: None,
            seconds_per_iteration: self.mean_seconds_per_iteration,
        })
        .map_err(csv_error)?;
        w.flush().map_err(|e| Error::Io {
            path: "<csv>".into(),
            source: e,
        })
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidConfig(format!("csv emission failed: {e}"))
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Loads `path` once and runs [`run_experiment_on`].
pub fn run_experiment(
    path: impl AsRef<Path>,
    format: &DatasetFormat,
    kind: ModelKind,
    config: &TrainConfig,
    split_spec: &SplitSpec,
    repeats: usize,
) -> Result<EvalReport> {
    let path = path.as_ref();
    let data = load_dataset(path, format, crate::RatingScale::movielens())?;
    let mut descriptor = DatasetDescriptor::of(&data, path.display().to_string());
    descriptor.checksum = Some(file_checksum(path)?);
    run_experiment_on(&data, descriptor, kind, config, split_spec, repeats)
}

/// Repeat `r` splits with seed `split.seed + r` and initialises with
/// `config.seed + r`, then fits and scores on the held-out part.
pub fn run_experiment_on(
    data: &RatingDataset,
    dataset: DatasetDescriptor,
    kind: ModelKind,
    config: &TrainConfig,
    split_spec: &SplitSpec,
    repeats: usize,
) -> Result<EvalReport> {
    if repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }
    config.validate()?;
    let mut rows = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let row = run_repeat(data, kind, config, split_spec, r).map_err(|e| Error::Repeat {
            repeat: r,
            source: Box::new(e),
        })?;
        log::info!(
            "{kind} repeat {r}: rmse {:.5} after {} iterations ({:.2}s)",
            row.rmse,
            row.iterations,
            row.train_seconds
        );
        rows.push(row);
    }
    Ok(EvalReport {
        kind,
        config: config.clone(),
        split: *split_spec,
        dataset,
        mean_rmse: mean(rows.iter().map(|r| r.rmse)),
        mean_seconds_per_iteration: mean(rows.iter().map(|r| r.seconds_per_iteration)),
        repeats: rows,
        manifest: None,
    })
}

fn run_repeat(
    data: &RatingDataset,
    kind: ModelKind,
    config: &TrainConfig,
    split_spec: &SplitSpec,
    r: usize,
) -> Result<RepeatResult> {
    let spec = split_spec.for_repeat(r);
    let (train, test) = split(data, &spec)?;
    let cfg = TrainConfig {
        seed: config.seed.wrapping_add(r as u64),
        ..config.clone()
    };
    let model = fit(&train, &cfg, kind)?;
    Ok(RepeatResult {
        repeat: r,
        split_seed: spec.seed,
        init_seed: cfg.seed,
        rmse: rmse(&model, &test)?,
        train_seconds: model.train_seconds,
        iterations: model.iterations_run,
        seconds_per_iteration: model.seconds_per_iteration(),
        final_objective: *model.objective_trace.last().unwrap_or(&f64::NAN),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub kind: ModelKind,
    pub train_fraction: f64,
    pub seconds: f64,
    pub iterations: usize,
    pub seconds_per_iteration: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingTable {
    pub d: usize,
    pub iterations: usize,
    pub rows: Vec<TimingRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
}

impl TimingTable {
    pub fn seconds(&self, kind: ModelKind, train_fraction: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.kind == kind && r.train_fraction == train_fraction)
            .map(|r| r.seconds)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(out, &self.rows)
    }
}

fn write_rows<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "<csv>".into(),
        source: e,
    })
}

/// Wall-clock of the fit call for each kind and training ratio, with the
/// same split and exactly `config.max_iters` updates for every kind.
pub fn timing_comparison(
    data: &RatingDataset,
    kinds: &[ModelKind],
    config: &TrainConfig,
    train_fractions: &[f64],
    split_seed: u64,
) -> Result<TimingTable> {
    let mut distinct = kinds.to_vec();
    distinct.sort_by_key(|k| k.as_str());
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::InvalidConfig(
            "timing comparison needs at least two model kinds".into(),
        ));
    }
    let cfg = TrainConfig {
        fixed_iterations: true,
        ..config.clone()
    };
    let mut rows = Vec::new();
    for &fraction in train_fractions {
        let (train, _) = split(data, &SplitSpec::new(fraction, split_seed))?;
        for &kind in kinds {
            let model = fit(&train, &cfg, kind)?;
            assert_eq!(model.iterations_run, cfg.max_iters, "timing runs use equal iteration counts");
            log::info!(
                "timing {kind} at {fraction}: {:.3}s for {} iterations",
                model.train_seconds,
                model.iterations_run
            );
            rows.push(TimingRow {
                kind,
                train_fraction: fraction,
                seconds: model.train_seconds,
                iterations: model.iterations_run,
                seconds_per_iteration: model.seconds_per_iteration(),
            });
        }
    }
    Ok(TimingTable {
        d: cfg.d,
        iterations: cfg.max_iters,
        rows,
        manifest: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub mean_rmse: f64,
    pub rmses: Vec<f64>,
}

#[derive(Serialize)]
struct SweepCsvRow {
    beta: f64,
    mean_rmse: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepTable {
    pub split: SplitSpec,
    pub config: TrainConfig,
    pub rows: Vec<SweepRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
}

impl SweepTable {
    /// Row with the lowest mean RMSE; the first one on ties.
    pub fn best(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .fold(None, |best: Option<&SweepRow>, r| match best {
                Some(b) if b.mean_rmse <= r.mean_rmse => Some(b),
                _ => Some(r),
            })
    }

    pub fn rmse_at(&self, beta: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.beta == beta).map(|r| r.mean_rmse)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let rows: Vec<SweepCsvRow> = self
            .rows
            .iter()
            .map(|r| SweepCsvRow {
                beta: r.beta,
                mean_rmse: r.mean_rmse,
            })
            .collect();
        write_rows(out, &rows)
    }
}

/// One UserReg experiment per `beta`, everything else fixed.
pub fn beta_sweep(
    data: &RatingDataset,
    split_spec: &SplitSpec,
    betas: &[f64],
    config: &TrainConfig,
    repeats: usize,
) -> Result<SweepTable> {
    if let Some(b) = betas.iter().find(|b| !(**b >= 0.0)) {
        return Err(Error::InvalidConfig(format!("beta values must be >= 0, got {b}")));
    }
    let mut rows = Vec::with_capacity(betas.len());
    for &beta in betas {
        let cfg = TrainConfig {
            beta,
            ..config.clone()
        };
        let report = run_experiment_on(
            data,
            DatasetDescriptor::of(data, "sweep"),
            ModelKind::UserReg,
            &cfg,
            split_spec,
            repeats,
        )?;
        log::info!("beta {beta}: mean rmse {:.5}", report.mean_rmse);
        rows.push(SweepRow {
            beta,
            mean_rmse: report.mean_rmse,
            rmses: report.rmses(),
        });
    }
    Ok(SweepTable {
        split: *split_spec,
        config: config.clone(),
        rows,
        manifest: None,
    })
}

/// Ordinary least squares `y = slope * x + intercept` with its R².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub num_users: usize,
    pub num_ratings: usize,
    pub seconds_per_iteration: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingReport {
    pub kind: ModelKind,
    pub ratings_per_user: usize,
    pub liked_per_user: usize,
    pub points: Vec<ScalingPoint>,
    pub fit: LinearFit,
}

/// Per-iteration time on synthetic data with a fixed number of ratings and
/// liked items per user, one point per user count. Each point is the fastest
/// of `trials` fixed-length fits.
pub fn scaling_probe(
    kind: ModelKind,
    user_counts: &[usize],
    num_items: usize,
    ratings_per_user: usize,
    liked_per_user: usize,
    config: &TrainConfig,
    trials: usize,
) -> Result<ScalingReport> {
    let cfg = TrainConfig {
        fixed_iterations: true,
        ..config.clone()
    };
    let mut points = Vec::with_capacity(user_counts.len());
    for &m in user_counts {
        let data = scaling_dataset(m, num_items, ratings_per_user, liked_per_user, config.seed);
        let mut best = f64::INFINITY;
        for _ in 0..trials.max(1) {
            best = best.min(fit(&data, &cfg, kind)?.seconds_per_iteration());
        }
        points.push(ScalingPoint {
            num_users: m,
            num_ratings: data.len(),
            seconds_per_iteration: best,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.num_users as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.seconds_per_iteration).collect();
    let fit = linear_fit(&xs, &ys)
        .ok_or_else(|| Error::InvalidConfig("scaling probe needs two distinct sizes".into()))?;
    Ok(ScalingReport {
        kind,
        ratings_per_user,
        liked_per_user,
        points,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Rating, RatingScale};

    fn pair() -> RatingDataset {
        RatingDataset::from_triples(
            1,
            2,
            vec![Rating::new(0, 0, 3.0), Rating::new(0, 1, 5.0)],
            RatingScale::movielens(),
        )
        .unwrap()
    }

    #[test]
    fn constant_predictor() {
        assert_eq!(rmse_with(|_, _| 4.0, &pair()).unwrap(), 1.0);
    }

    #[test]
    fn perfect_predictor() {
        let d = pair();
        assert_eq!(rmse_with(|_, i| [3.0, 5.0][i], &d).unwrap(), 0.0);
    }

    #[test]
    fn empty_test_set_is_an_error() {
        let d = pair().subset(&[]).unwrap();
        assert!(matches!(rmse_with(|_, _| 0.0, &d), Err(Error::EmptyDataset)));
    }

    #[test]
    fn exact_line() {
        let f = linear_fit(&[1.0, 2.0, 4.0], &[3.0, 5.0, 9.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn best_prefers_first_on_ties() {
        let row = |beta, mean_rmse| SweepRow {
            beta,
            mean_rmse,
            rmses: vec![mean_rmse],
        };
        let t = SweepTable {
            split: SplitSpec::new(0.9, 1),
            config: TrainConfig::default(),
            rows: vec![row(0.0, 0.95), row(1.0, 0.93), row(2.0, 0.93)],
            manifest: None,
        };
        assert_eq!(t.best().unwrap().beta, 1.0);
    }
}

mod config;

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use userreg::eval::{beta_sweep, timing_comparison, DatasetDescriptor};
use userreg::gradcheck::{check_model, GradCheckReport, GradientMode, InstanceSize};
use userreg::io::file_checksum;
use userreg::report::{write_json, write_with};
use userreg::{
    load_dataset, run_experiment_on, Block, Error, ModelKind, RatingDataset, RatingScale, RunManifest,
    SplitSpec, TrainConfig,
};

use config::{resolve, ConfigFileError, DataArgs, FileConfig, FormatArg, HyperArgs, ModelArg, PenaltyArg};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_MISSING_FILE: u8 = 3;
const EXIT_BAD_DATA: u8 = 4;
const EXIT_BAD_CONFIG: u8 = 5;
const EXIT_DIVERGED: u8 = 6;
const EXIT_GRADCHECK: u8 = 7;

#[derive(Parser)]
#[command(name = "userreg", version, about = "Train and evaluate latent-factor rating models")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model over repeated random splits and report test RMSE.
    Train(TrainArgs),
    /// Compare analytic gradients with finite differences on a synthetic instance.
    Gradcheck(GradcheckArgs),
    /// Training wall-clock per model and training ratio at a fixed iteration count.
    Bench(BenchArgs),
    /// UserReg test RMSE over a grid of beta values.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model to fit [default: userreg]
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Fraction of ratings used for training [default: 0.9]
    #[arg(long)]
    train_frac: Option<f64>,
    /// Independent splits, seeded seed, seed + 1, ... [default: 1]
    #[arg(long)]
    repeats: Option<usize>,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Directory for report.json and report.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, value_enum, default_value = "userreg")]
    model: ModelArg,
    #[arg(long)]
    exact_q_grad: bool,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    #[arg(long, value_enum)]
    penalty: Option<PenaltyArg>,
    #[arg(long, default_value_t = 1.0)]
    penalty_exponent: f64,
    #[arg(long, default_value_t = 1.0)]
    implicit_penalty: f64,
    #[arg(long, default_value_t = 4)]
    users: usize,
    #[arg(long, default_value_t = 4)]
    items: usize,
    /// Probability that each extra user-item pair is rated.
    #[arg(long, default_value_t = 0.6)]
    density: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Number of instances, seeded `seed`, `seed + 1`, ...
    #[arg(long, default_value_t = 1)]
    instances: usize,
    /// Write the reports as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Models to time [default: userreg,svdpp]
    #[arg(long, value_enum, value_delimiter = ',')]
    models: Vec<ModelArg>,
    /// Training ratios [default: 0.5,0.7,0.9]
    #[arg(long, value_delimiter = ',')]
    ratios: Vec<f64>,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Directory for timing.csv and timing.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated grid [default: 0,1,2,4,8,16,32,64]
    #[arg(long, value_delimiter = ',')]
    betas: Vec<f64>,
    /// Fraction of ratings used for training [default: 0.9]
    #[arg(long)]
    train_frac: Option<f64>,
    /// Repeats per beta [default: 1]
    #[arg(long)]
    repeats: Option<usize>,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Directory for sweep.csv and sweep.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
#[error("gradient check failed for {0}")]
struct GradcheckFailed(String);

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<GradcheckFailed>() {
            return EXIT_GRADCHECK;
        }
        if cause.is::<ConfigFileError>() {
            return EXIT_BAD_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return library_code(e);
        }
    }
    EXIT_FAILURE
}

fn library_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => EXIT_MISSING_FILE,
        Error::Parse { .. } | Error::OutOfScale { .. } | Error::EmptyDataset => EXIT_BAD_DATA,
        Error::InvalidConfig(_) | Error::InvalidScale { .. } => EXIT_BAD_CONFIG,
        Error::Diverged { .. } => EXIT_DIVERGED,
        Error::Repeat { source, .. } => library_code(source),
        _ => EXIT_FAILURE,
    }
}

struct Loaded {
    data: RatingDataset,
    descriptor: DatasetDescriptor,
}

fn load(args: &DataArgs, file: &FileConfig) -> anyhow::Result<Loaded> {
    let format = args.format(file).to_format(args.header);
    let data = load_dataset(&args.data, &format, RatingScale::movielens())?;
    let mut descriptor = DatasetDescriptor::of(&data, args.data.display().to_string());
    descriptor.checksum = Some(file_checksum(&args.data)?);
    log::info!(
        "loaded {} ratings from {} users and {} items",
        data.len(),
        data.num_users(),
        data.num_items()
    );
    Ok(Loaded { data, descriptor })
}

fn manifest(
    subcommand: &str,
    settings: &impl Serialize,
    descriptor: &DatasetDescriptor,
    seed: u64,
) -> anyhow::Result<RunManifest> {
    Ok(RunManifest::new(
        subcommand,
        settings,
        descriptor.checksum.clone(),
        seed,
    )?)
}

fn emit(
    out: Option<&Path>,
    stem: &str,
    value: &impl Serialize,
    csv: impl FnOnce(std::fs::File) -> userreg::Result<()>,
) -> anyhow::Result<()> {
    if let Some(dir) = out {
        write_json(dir.join(format!("{stem}.json")), value)?;
        write_with(dir.join(format!("{stem}.csv")), csv)?;
        println!("wrote {}/{stem}.json and {stem}.csv", dir.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainSettings<'a> {
    data: &'a Path,
    format: FormatArg,
    model: ModelKind,
    train_frac: f64,
    repeats: usize,
    train: &'a TrainConfig,
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let file = FileConfig::load_opt(args.hyper.config.as_deref())?;
    let config = resolve(&args.hyper, &file, TrainConfig::default());
    let kind = args
        .model
        .map(ModelKind::from)
        .or(file.model)
        .unwrap_or(ModelKind::UserReg);
    let train_frac = args.train_frac.or(file.train_frac).unwrap_or(0.9);
    let repeats = args.repeats.or(file.repeats).unwrap_or(1);
    config.validate()?;

    let loaded = load(&args.data, &file)?;
    let spec = SplitSpec::new(train_frac, config.seed);
    let mut report = run_experiment_on(&loaded.data, loaded.descriptor.clone(), kind, &config, &spec, repeats)?;
    let settings = TrainSettings {
        data: &args.data.data,
        format: args.data.format(&file),
        model: kind,
        train_frac,
        repeats,
        train: &config,
    };
    report.manifest = Some(manifest("train", &settings, &loaded.descriptor, config.seed)?);

    for r in &report.repeats {
        println!(
            "repeat {}  rmse {:.5}  iterations {}  seconds {:.2}",
            r.repeat, r.rmse, r.iterations, r.train_seconds
        );
    }
    println!("{kind} mean rmse {:.5} over {repeats} repeat(s)", report.mean_rmse);
    emit(args.out.as_deref(), "report", &report, |f| report.write_csv(f))
}

fn block_name(b: Block) -> &'static str {
    match b {
        Block::UserBias => "user_bias",
        Block::ItemBias => "item_bias",
        Block::UserFactors => "user_factors",
        Block::ItemFactors => "item_factors",
        Block::Implicit => "implicit",
    }
}

fn print_gradcheck(r: &GradCheckReport, out: &mut impl Write) -> io::Result<()> {
    let mode = match (r.kind, r.mode) {
        (ModelKind::UserReg, GradientMode::Exact) => " exact",
        (ModelKind::UserReg, GradientMode::Truncated) => " default-q-gradient",
        _ => "",
    };
    writeln!(
        out,
        "{}{mode} m={} n={} d={} seed={} step={:e}",
        r.kind, r.num_users, r.num_items, r.d, r.seed, r.step
    )?;
    for b in &r.blocks {
        let status = match (b.in_scope, b.max_relative_error < r.threshold) {
            (false, _) => "not checked",
            (true, true) => "ok",
            (true, false) => "FAIL",
        };
        writeln!(out, "  {:<13} {:.3e}  {status}", block_name(b.block), b.max_relative_error)?;
    }
    if let (Some(res), Some(mag)) = (r.cross_term_residual, r.cross_term_magnitude) {
        writeln!(
            out,
            "  item_factors gap vs omitted interest term: {res:.3e} (term magnitude {mag:.3e})"
        )?;
    }
    Ok(())
}

fn cmd_gradcheck(args: GradcheckArgs) -> anyhow::Result<()> {
    let kind = ModelKind::from(args.model);
    let config = TrainConfig {
        d: args.d,
        lambda: args.lambda,
        beta: args.beta,
        exact_q_gradient: args.exact_q_grad,
        penalty_exponent: args.penalty_exponent,
        implicit_penalty: args.implicit_penalty,
        penalty: args.penalty.map(Into::into).unwrap_or_default(),
        ..TrainConfig::default()
    };
    if args.instances == 0 {
        bail!(Error::InvalidConfig("--instances must be at least 1".into()));
    }
    let mut reports = Vec::with_capacity(args.instances);
    let stdout = io::stdout();
    for k in 0..args.instances {
        let size = InstanceSize {
            num_users: args.users,
            num_items: args.items,
            density: args.density,
            seed: args.seed + k as u64,
        };
        let report = check_model(kind, &config, size)?;
        print_gradcheck(&report, &mut stdout.lock())?;
        reports.push(report);
    }
    if let Some(path) = &args.out {
        write_json(path, &reports)?;
    }
    if kind == ModelKind::UserReg && !args.exact_q_grad && args.beta != 0.0 {
        eprintln!(
            "warning: the default UserReg item-factor gradient omits the interest-set term; \
             pass --exact-q-grad to train on the exact gradient"
        );
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        return Err(GradcheckFailed(format!("{kind} on {failed} of {} instance(s)", reports.len())).into());
    }
    println!("pass");
    Ok(())
}

#[derive(Serialize)]
struct BenchSettings<'a> {
    data: &'a Path,
    models: &'a [ModelKind],
    ratios: &'a [f64],
    train: &'a TrainConfig,
}

fn cmd_bench(args: BenchArgs) -> anyhow::Result<()> {
    let file = FileConfig::load_opt(args.hyper.config.as_deref())?;
    let base = TrainConfig {
        d: 5,
        max_iters: 50,
        ..TrainConfig::default()
    };
    let config = resolve(&args.hyper, &file, base);
    config.validate()?;
    let kinds: Vec<ModelKind> = if !args.models.is_empty() {
        args.models.iter().map(|&m| m.into()).collect()
    } else {
        file.models
            .clone()
            .unwrap_or_else(|| vec![ModelKind::UserReg, ModelKind::SvdPlusPlus])
    };
    let ratios = if !args.ratios.is_empty() {
        args.ratios.clone()
    } else {
        file.ratios.clone().unwrap_or_else(|| vec![0.5, 0.7, 0.9])
    };
    let loaded = load(&args.data, &file)?;
    let mut table = timing_comparison(&loaded.data, &kinds, &config, &ratios, config.seed)?;
    let settings = BenchSettings {
        data: &args.data.data,
        models: &kinds,
        ratios: &ratios,
        train: &config,
    };
    table.manifest = Some(manifest("bench", &settings, &loaded.descriptor, config.seed)?);
    println!("model,train_fraction,seconds,iterations");
    for r in &table.rows {
        println!("{},{},{:.4},{}", r.kind, r.train_fraction, r.seconds, r.iterations);
    }
    emit(args.out.as_deref(), "timing", &table, |f| table.write_csv(f))
}

#[derive(Serialize)]
struct SweepSettings<'a> {
    data: &'a Path,
    betas: &'a [f64],
    train_frac: f64,
    repeats: usize,
    train: &'a TrainConfig,
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let file = FileConfig::load_opt(args.hyper.config.as_deref())?;
    let config = resolve(&args.hyper, &file, TrainConfig::default());
    config.validate()?;
    let betas = if !args.betas.is_empty() {
        args.betas.clone()
    } else {
        file.betas
            .clone()
            .unwrap_or_else(|| vec![0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0])
    };
    let train_frac = args.train_frac.or(file.train_frac).unwrap_or(0.9);
    let repeats = args.repeats.or(file.repeats).unwrap_or(1);
    let loaded = load(&args.data, &file)?;
    let spec = SplitSpec::new(train_frac, config.seed);
    let mut table = beta_sweep(&loaded.data, &spec, &betas, &config, repeats)?;
    let settings = SweepSettings {
        data: &args.data.data,
        betas: &betas,
        train_frac,
        repeats,
        train: &config,
    };
    table.manifest = Some(manifest("sweep", &settings, &loaded.descriptor, config.seed)?);
    println!("beta,mean_rmse");
    for r in &table.rows {
        println!("{},{:.5}", r.beta, r.mean_rmse);
    }
    emit(args.out.as_deref(), "sweep", &table, |f| table.write_csv(f))
        .context("writing sweep results")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_code_mapping() {
        let code = |e: anyhow::Error| exit_code(&e);
        assert_eq!(code(GradcheckFailed("x".into()).into()), EXIT_GRADCHECK);
        let diverged = Error::Diverged {
            iteration: 3,
            objective: f64::INFINITY,
            gamma: 1.0,
        };
        let nested = Error::Repeat {
            repeat: 2,
            source: Box::new(diverged),
        };
        assert_eq!(code(anyhow::Error::new(nested).context("training")), EXIT_DIVERGED);
        assert_eq!(code(Error::EmptyDataset.into()), EXIT_BAD_DATA);
        assert_eq!(code(anyhow::anyhow!("other")), EXIT_FAILURE);
    }
}

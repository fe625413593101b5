mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use shared_lasso::lasso::LassoOptions;
use shared_lasso::Error;

/// Data-shared lasso pipeline.
///
/// CSV outputs use `.` decimals, LF line endings and fixed column orders:
///
///   mse.csv        model,weights,all,<group...>
///   table1.csv     group,full_mse,reduced_mse,full_features,reduced_features
///   table6.csv     penalty,removal_type,all_pct,<group>_pct...,coef_removed
///   sweep.csv      gamma,threshold,mse
///   stability tsv  feature_id<TAB>token<TAB>count<TAB>proportion
///
/// Exit status: 0 success, 1 i/o, 2 usage, 3 configuration, 4 data,
/// 5 convergence.
#[derive(Debug, Parser)]
#[command(name = "shared-lasso", version, verbatim_doc_comment)]
struct Cli {
    /// Master seed; every random stage derives its own stream from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "SHARED_LASSO_THREADS")]
    threads: Option<usize>,

    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Tokenize a review corpus and write the train/test design.
    Featurize(FeaturizeArgs),
    /// Fit pooled, separate or data-shared models and report test MSE.
    Fit(FitArgs),
    /// Bootstrapped lasso (bls) or data-shared lasso (bsls) feature reduction.
    Bootstrap(BootstrapArgs),
    /// Sweep the global soft threshold over a fitted model.
    Denoise(DenoiseArgs),
    /// Shared/per-group active set algebra and removal effects.
    Subgroups(SubgroupArgs),
    /// Pooled/separate/data-shared comparison and the weight-scheme table.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
struct FeaturizeArgs {
    /// Corpus root containing train/{pos,neg} and test/{pos,neg}.
    #[arg(long)]
    corpus: PathBuf,
    /// Genre sidecar TSV: `review_id<TAB>genre1,genre2,...`.
    #[arg(long)]
    genres: Option<PathBuf>,
    /// Group reviews by genre (requires --genres).
    #[arg(long)]
    grouped: bool,
    /// Genres of interest in priority order.
    #[arg(long, value_delimiter = ',', default_value = "drama,comedy,horror")]
    genre_priority: Vec<String>,
    #[arg(long, default_value_t = shared_lasso::corpus::DEFAULT_MIN_DOC_FREQ)]
    min_doc_freq: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Model {
    Pooled,
    Separate,
    Dsl,
}

#[derive(Debug, Args, Serialize)]
struct FitArgs {
    /// Featurized data directory.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "dsl")]
    model: Model,
    /// Weight scheme for dsl; repeat for several, or `all` for every
    /// built-in scheme. `custom:r1,r2,...` gives explicit weights.
    #[arg(long, default_value = "sqrt_third")]
    weights: Vec<String>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum BootstrapMode {
    Bls,
    Bsls,
}

#[derive(Debug, Args, Serialize)]
struct BootstrapArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "bls")]
    mode: BootstrapMode,
    /// Replicates.
    #[arg(short = 'B', long = "replicates", default_value_t = 100)]
    replicates: usize,
    /// Rows per resample and group (defaults to the group size).
    #[arg(long)]
    resample_size: Option<usize>,
    /// Weight scheme for bsls.
    #[arg(long, default_value = "sqrt_third")]
    weights: String,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct DenoiseArgs {
    /// Fit document written by `fit`.
    #[arg(long)]
    fit: PathBuf,
    /// Data directory the fit was trained on.
    #[arg(long)]
    data: PathBuf,
    /// Noise level, or `auto` for the training residual standard deviation.
    #[arg(long, default_value = "auto")]
    sigma: String,
    /// Sample size in the threshold (defaults to the training row count).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum RemovalArg {
    /// Drop the features and re-select lambda by cross-validation.
    Refit,
    /// Drop the features and refit at the baseline lambda.
    ReuseLambda,
    /// Zero the features' coefficients without refitting.
    ZeroOnly,
}

#[derive(Debug, Args, Serialize)]
struct SubgroupArgs {
    #[arg(long)]
    data: PathBuf,
    /// Weight schemes; `all` selects the seven schemes of the removal study.
    #[arg(long, default_value = "all")]
    weights: Vec<String>,
    #[arg(long, value_enum, default_value = "refit")]
    removal: RemovalArg,
    /// Shorthand for `--removal zero-only`.
    #[arg(long)]
    zero_only: bool,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ReportArgs {
    #[arg(long)]
    data: PathBuf,
    /// Scheme used for the data-shared row of the model comparison.
    #[arg(long, default_value = "sqrt_third")]
    weights: String,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
struct SolverArgs {
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 100)]
    grid_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lambda_min_ratio: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iterations: usize,
    #[arg(long, default_value_t = 1e-7)]
    tolerance: f64,
    /// Scale penalty factors by column standard deviation.
    #[arg(long)]
    standardize_penalty: bool,
}

impl SolverArgs {
    fn options(&self) -> LassoOptions {
        LassoOptions {
            lambda_grid_size: self.grid_size,
            lambda_min_ratio: self.lambda_min_ratio,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            cv_folds: self.folds,
            fit_intercept: true,
            standardize_penalty: self.standardize_penalty,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 1,
        Error::Config(_) => 3,
        Error::Data(_) | Error::Structural(_) => 4,
        Error::NotConverged { .. } => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(3);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(3);
        }
    }

    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

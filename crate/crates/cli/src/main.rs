//! `aoa`: train models, compute dissimilarity index grids and areas of
//! applicability, and run simulation catalogues from the command line.

mod commands;
mod folds;

use std::path::PathBuf;
use std::process::ExitCode;

use aoa_core::AoaError;
use clap::{Args, Parser, Subcommand};

use folds::FoldSpec;

#[derive(Debug, Parser)]
#[command(name = "aoa", version, about = "Dissimilarity index and area of applicability for spatial prediction models")]
struct Cli {
    /// Master seed for every random step; falls back to AOA_SEED, then 42.
    #[arg(long, global = true, env = "AOA_SEED")]
    seed: Option<u64>,

    /// Cap on worker threads.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// More log output on stderr (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Only warnings and errors on stderr.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ForestArgs {
    /// Trees per forest.
    #[arg(long, default_value_t = 500)]
    trees: usize,
    /// Minimum node size; smaller nodes become leaves.
    #[arg(long, default_value_t = 5)]
    min_node_size: usize,
    /// Predictor columns to use (comma-separated); default all.
    #[arg(long, value_delimiter = ',')]
    predictors: Vec<String>,
}

#[derive(Debug, Args)]
struct FoldArgs {
    /// Fold source: `random:k=10`, `cluster:col=NAME` or `file:col=NAME`.
    /// May be repeated; file beats cluster beats random. Without it, a
    /// `fold` column is used if present, then `cluster`, then random 10-fold.
    #[arg(long = "folds", value_name = "SPEC")]
    folds: Vec<FoldSpec>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tune mtry by cross-validation, train the final forest and write the
    /// model, importance CSV and CV report.
    Train {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        importance: Option<PathBuf>,
        #[arg(long)]
        cv_report: Option<PathBuf>,
        /// Candidate mtry values; default 2..p in steps of 2 (or all p if < 2).
        #[arg(long, value_delimiter = ',')]
        mtry: Vec<usize>,
        #[command(flatten)]
        forest: ForestArgs,
        #[command(flatten)]
        folds: FoldArgs,
    },
    /// Out-of-bag permutation importance of a trained model.
    Importance {
        #[arg(long)]
        model: PathBuf,
        /// The model's training samples.
        #[arg(long)]
        samples: PathBuf,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validate a forest with fixed settings.
    Cv {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        mtry: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        forest: ForestArgs,
        #[command(flatten)]
        folds: FoldArgs,
    },
    /// Predictions (and optionally the ensemble standard deviation) for a
    /// directory of predictor grids.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Directory of `.asc` grids named after the predictors.
        #[arg(long)]
        grids: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        sd: Option<PathBuf>,
    },
    /// Dissimilarity index grid, plus fold-aware training DI.
    Di {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        grids: PathBuf,
        /// Importance weights from this model (permutation importance).
        #[arg(long, required_unless_present = "weights")]
        model: Option<PathBuf>,
        /// Expert weights CSV with `predictor,weight` columns; overrides --model.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        training_di: Option<PathBuf>,
        #[command(flatten)]
        folds: FoldArgs,
    },
    /// Threshold a DI grid at a quantile of the training DI.
    Aoa {
        #[arg(long)]
        di: PathBuf,
        #[arg(long)]
        training_di: PathBuf,
        #[arg(long, default_value_t = aoa_core::aoa::DEFAULT_QUANTILE)]
        quantile: f64,
        /// Mask grid: 1 inside, 0 outside, nodata where DI is missing.
        #[arg(long)]
        out: PathBuf,
        /// Also write a DI heatmap with outside cells masked.
        #[arg(long)]
        heatmap: Option<PathBuf>,
    },
    /// Run a scenario catalogue and write the threshold calibration table.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the config's quantile list.
        #[arg(long, value_delimiter = ',')]
        quantiles: Vec<f64>,
    },
    /// Run a scenario catalogue and write every artifact per scenario.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Also write PPM heatmaps.
        #[arg(long)]
        heatmaps: bool,
    },
    /// RMSE, Pearson r and R² of a prediction grid against a truth grid.
    Metrics {
        #[arg(long)]
        prediction: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Restrict to cells where this grid is 1 (an AOA mask).
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Restrict to cells where the mask is 0 instead.
        #[arg(long, requires = "mask")]
        outside: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a grid as a PPM image.
    Heatmap {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, default_value = "viridis")]
        palette: String,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(AoaError),
}

impl From<AoaError> for CliError {
    fn from(e: AoaError) -> Self {
        CliError::Data(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

const DEFAULT_SEED: u64 = 42;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Warn,
        (false, 0) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }

    match commands::run(cli.command, cli.seed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

//! Command-line front end: simulation, spectra, capacity curves, eigentask
//! export, the classification demo, and the verification suite.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "eigentask",
    version,
    about = "Shot-noise-aware capacity and eigentask analysis of simulated physical feature generators"
)]
struct Cli {
    /// Master seed; every stream derives from it. Overrides the config's
    /// `seed` field and the EIGENTASK_SEED environment variable.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Cap the worker thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct FeatureInput {
    /// Feature matrix CSV written by `simulate`.
    #[arg(long)]
    features: PathBuf,

    /// Metadata sidecar; defaults to `<features>.meta.json` next to the CSV.
    #[arg(long)]
    sidecar: Option<PathBuf>,

    /// Noise model of the generator behind the features.
    #[arg(long, default_value = "multinomial")]
    model: String,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample shot records and measured features for a configured generator.
    Simulate {
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// NSR spectrum, eigentask coefficients and K_c table from features.
    Spectrum {
        #[command(flatten)]
        input: FeatureInput,
        /// Apply the finite-shot eigenvalue correction.
        #[arg(long)]
        correct_shots: bool,
        /// Use the Gram-free SVD route instead of the Gram-matrix route.
        #[arg(long)]
        gram_free: bool,
        /// Shot budgets for the K_c table.
        #[arg(long, default_value = "1,10,100,1000,10000", value_delimiter = ',')]
        s_list: Vec<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Capacity curve C_T(S) from a spectrum CSV.
    Rec {
        #[arg(long)]
        spectrum: PathBuf,
        #[arg(long, default_value = "1,10,100,1000,10000", value_delimiter = ',')]
        s_list: Vec<u64>,
        #[arg(long, default_value = "out/rec.csv")]
        out: PathBuf,
    },
    /// Tabulate noisy eigentasks over the feature ensemble.
    Eigentasks {
        #[command(flatten)]
        input: FeatureInput,
        #[arg(long)]
        gram_free: bool,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Eigentask-learning accuracy sweep on the reference classification task.
    Classify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Closed-form 2-design spectrum and capacity curve.
    Twodesign {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = "1,10,100,1000,10000", value_delimiter = ',')]
        s_list: Vec<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Run the verification suite and report pass/fail per criterion.
    Verify {
        /// Run only the sub-minute subset.
        #[arg(long)]
        quick: bool,
    },
}

fn exit_code_for(err: &eigentask::Error) -> u8 {
    match err {
        eigentask::Error::Numerical(_) => 2,
        eigentask::Error::Io(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: setting thread pool: {e}");
            return ExitCode::from(1);
        }
    }

    let result = match cli.command {
        Command::Simulate { config, out_dir } => commands::simulate(&config, &out_dir, cli.seed),
        Command::Spectrum { input, correct_shots, gram_free, s_list, out_dir } => {
            commands::spectrum(&input.features, input.sidecar.as_deref(), &input.model, correct_shots, gram_free, &s_list, &out_dir)
        }
        Command::Rec { spectrum, s_list, out } => commands::rec(&spectrum, &s_list, &out),
        Command::Eigentasks { input, gram_free, out_dir } => {
            commands::eigentasks(&input.features, input.sidecar.as_deref(), &input.model, gram_free, &out_dir)
        }
        Command::Classify { config, out_dir } => commands::classify(&config, &out_dir, cli.seed),
        Command::Twodesign { k, s_list, out_dir } => commands::twodesign(k, &s_list, &out_dir),
        Command::Verify { quick } => commands::verify(quick),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

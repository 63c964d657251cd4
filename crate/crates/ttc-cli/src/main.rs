// SPDX-License-Identifier: Apache-2.0

//! `ttc`: generate object-exchange markets, run the exact trading
//! procedure, and estimate cores spectrally; includes the seeded
//! experiment harness behind `bench`, `noise`, and `timing`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ttc_cli::baseline::BaselineError;
use ttc_cli::experiment::{
    aggregate, records_to_csv, run_accuracy, run_noise_sweep, run_timing, speedup_lines,
    ConventionArg, ExperimentConfig, ModeArg, NoiseModel, SolverArg,
};
use ttc_cli::io::{
    dense_to_csv, estimate_to_json, outcome_to_json, read_profile, write_profile, FileFormat,
    IoError,
};
use ttc_core::{
    build_scores, generate_random, ground_truth_core, identify_core_iterative, identify_core_topk,
    normalize_rows, randomized_rank1, right_singular_power, run_ttc, smooth_truncated,
    stationary_power, CoreIdError, MarkovError, ScoreMode, SolverOptions, SpectralError, TtcError,
};

#[derive(Parser)]
#[command(
    name = "ttc",
    version,
    about = "Exact and spectral core identification for object-exchange markets"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Base seed for generation and randomized solves.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Spectral summary to score from.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,

    /// Score orientation.
    #[arg(long, global = true, value_enum)]
    convention: Option<ConventionArg>,

    /// Estimated core size; defaults to the exact core's size.
    #[arg(long, global = true)]
    k: Option<usize>,

    /// Profile file format; inferred from the extension when omitted.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    /// Write primary output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl FormatArg {
    fn to_io(self) -> FileFormat {
        match self {
            FormatArg::Json => FileFormat::Json,
            FormatArg::Csv => FileFormat::Csv,
        }
    }
}

#[derive(Args)]
struct HarnessFlags {
    /// Market sizes, comma separated.
    #[arg(long = "n", value_delimiter = ',')]
    n: Option<Vec<usize>>,

    /// Truncate every preference list to this length.
    #[arg(long)]
    l: Option<usize>,

    /// Trials per grid point.
    #[arg(long)]
    trials: Option<usize>,

    /// Spectral summaries to run, comma separated.
    #[arg(long, value_delimiter = ',', value_enum)]
    modes: Option<Vec<ModeArg>>,

    /// Score orientations to report, comma separated.
    #[arg(long, value_delimiter = ',', value_enum)]
    conventions: Option<Vec<ConventionArg>>,

    /// Spectral solver for the harness.
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,

    /// JSON file mirroring the experiment config; explicit flags win.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Emit NaN time columns so reruns are byte-identical.
    #[arg(long)]
    no_times: bool,

    /// Write the aggregate table here.
    #[arg(long)]
    aggregate_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a random market profile.
    Gen {
        /// Number of agents.
        #[arg(long)]
        n: usize,
        /// Truncate every preference list to this length.
        #[arg(long)]
        l: Option<usize>,
    },
    /// Run the exact trading procedure on a profile file.
    Ttc {
        /// Profile to read.
        #[arg(long)]
        profile: PathBuf,
    },
    /// Emit the row-stochastic preference matrix as dense CSV.
    Matrix {
        /// Profile to read.
        #[arg(long)]
        profile: PathBuf,
        /// Smoothing constant for unlisted pairs (default 1e-6 / n).
        #[arg(long, conflicts_with = "no_smooth")]
        eps: Option<f64>,
        /// Skip smoothing entirely.
        #[arg(long)]
        no_smooth: bool,
    },
    /// Estimate the core spectrally from a profile file.
    Core {
        /// Profile to read.
        #[arg(long)]
        profile: PathBuf,
        /// Re-solve after extracting each member instead of one shot.
        #[arg(long)]
        iterative: bool,
        /// Spectral solver for the one-shot estimate.
        #[arg(long, value_enum)]
        solver: Option<SolverArg>,
    },
    /// Sweep market sizes and report estimate accuracy as CSV.
    Bench {
        #[command(flatten)]
        flags: HarnessFlags,
    },
    /// Sweep noise levels and report estimate stability as CSV.
    Noise {
        #[command(flatten)]
        flags: HarnessFlags,
        /// Noise levels in [0,1], comma separated.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        /// Which perturbation to apply.
        #[arg(long, value_enum)]
        noise_model: Option<NoiseModel>,
    },
    /// Time each solve path and report medians as CSV.
    Timing {
        #[command(flatten)]
        flags: HarnessFlags,
        /// Skip the dense factorization baseline.
        #[arg(long)]
        no_baseline: bool,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    File(#[from] IoError),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Ttc(#[from] TtcError),
    #[error("{0}")]
    Markov(#[from] MarkovError),
    #[error("{0}")]
    Spectral(#[from] SpectralError),
    #[error("{0}")]
    CoreId(#[from] CoreIdError),
    #[error("{0}")]
    Baseline(#[from] BaselineError),
    #[error("{0}")]
    Harness(ttc_cli::experiment::HarnessError),
}

impl From<ttc_cli::experiment::HarnessError> for CliError {
    fn from(e: ttc_cli::experiment::HarnessError) -> Self {
        use ttc_cli::experiment::HarnessError as H;
        match e {
            H::BadConfig(msg) => CliError::Config(msg),
            other => CliError::Harness(other),
        }
    }
}

impl From<ttc_core::ProfileError> for CliError {
    fn from(e: ttc_core::ProfileError) -> Self {
        CliError::File(IoError::Profile(e))
    }
}

impl CliError {
    /// 1 for usage and file problems, 2 for solver-level failures.
    fn exit_code(&self) -> u8 {
        match self {
            CliError::File(_) | CliError::Config(_) => 1,
            CliError::Ttc(_)
            | CliError::Markov(_)
            | CliError::Spectral(_)
            | CliError::CoreId(_)
            | CliError::Baseline(_)
            | CliError::Harness(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code: u8 = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Writes `content` to `--out` or stdout.
fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            fs::write(path, content).map_err(|source| {
                CliError::File(IoError::File { path: path.display().to_string(), source })
            })?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn write_named(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content).map_err(|source| {
        CliError::File(IoError::File { path: path.display().to_string(), source })
    })?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Builds the smoothed row-stochastic chain a profile induces.
fn chain(
    profile: &ttc_core::PreferenceProfile,
) -> Result<ttc_core::StochasticMatrix, MarkovError> {
    normalize_rows(&smooth_truncated(&build_scores(profile)?, None)?)
}

fn harness_config(
    flags: &HarnessFlags,
    seed: Option<u64>,
    k: Option<usize>,
) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &flags.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| {
                CliError::File(IoError::File { path: path.display().to_string(), source })
            })?;
            serde_json::from_str(&text).map_err(|e| {
                CliError::Config(format!("{}: invalid config: {e}", path.display()))
            })?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(n) = &flags.n {
        cfg.n_values = n.clone();
    }
    if flags.l.is_some() {
        cfg.l = flags.l;
    }
    if let Some(trials) = flags.trials {
        cfg.trials = trials;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(modes) = &flags.modes {
        cfg.modes = modes.clone();
    }
    if let Some(conventions) = &flags.conventions {
        cfg.conventions = conventions.clone();
    }
    if let Some(solver) = flags.solver {
        cfg.solver = solver;
    }
    if k.is_some() {
        cfg.k = k;
    }
    if flags.no_times {
        cfg.record_times = false;
    }
    Ok(cfg)
}

fn emit_harness_output(
    records_csv: String,
    aggregate_csv: String,
    out: &Option<PathBuf>,
    aggregate_out: &Option<PathBuf>,
) -> Result<(), CliError> {
    emit(out, &records_csv)?;
    match (aggregate_out, out) {
        (Some(path), _) => write_named(path, &aggregate_csv)?,
        // Raw rows went to a file, so stdout is free for the table.
        (None, Some(_)) => print!("{aggregate_csv}"),
        // Raw rows own stdout; don't interleave a second CSV.
        (None, None) => {}
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed.unwrap_or(42);
    let mode = cli.mode.unwrap_or(ModeArg::Singular).to_core();
    let convention = cli
        .convention
        .unwrap_or(ConventionArg::Example)
        .to_core();
    let format = cli.format.map(FormatArg::to_io);

    match &cli.cmd {
        Cmd::Gen { n, l } => {
            let l = l.unwrap_or(*n);
            let profile = generate_random(*n, l, seed)?;
            match &cli.out {
                Some(path) => {
                    write_profile(path, &profile, format)?;
                    eprintln!("wrote {} ({} agents, lists of {l})", path.display(), n);
                }
                None => {
                    let text = match format.unwrap_or(FileFormat::Json) {
                        FileFormat::Json => ttc_cli::io::profile_to_json(&profile),
                        FileFormat::Csv => ttc_cli::io::profile_to_csv(&profile)?,
                    };
                    print!("{text}");
                }
            }
            Ok(())
        }
        Cmd::Ttc { profile } => {
            let p = read_profile(profile, format)?;
            let outcome = run_ttc(&p)?;
            let core = ground_truth_core(&outcome);
            emit(&cli.out, &outcome_to_json(&outcome))?;
            eprintln!(
                "{} agents, {} rounds; core ({} members): {:?}",
                p.n(),
                outcome.rounds(),
                core.k(),
                core.members()
            );
            Ok(())
        }
        Cmd::Matrix { profile, eps, no_smooth } => {
            let p = read_profile(profile, format)?;
            let scores = build_scores(&p)?;
            let scores = if *no_smooth {
                scores
            } else {
                smooth_truncated(&scores, *eps)?
            };
            let m = normalize_rows(&scores)?;
            emit(&cli.out, &dense_to_csv(m.n(), &m.to_dense()))?;
            Ok(())
        }
        Cmd::Core { profile, iterative, solver } => {
            let p = read_profile(profile, format)?;
            let m = chain(&p)?;
            let k = match cli.k {
                Some(k) => k,
                None => {
                    let outcome = run_ttc(&p)?;
                    ground_truth_core(&outcome).k()
                }
            };
            let estimate = if *iterative {
                identify_core_iterative(&m, mode, convention, k, &SolverOptions::default())?
            } else {
                let opts = SolverOptions::default();
                let solved = match (mode, solver.unwrap_or(SolverArg::Power)) {
                    (ScoreMode::Stationary, _) => stationary_power(&m, &opts)?,
                    (ScoreMode::RightSingular, SolverArg::Power) => {
                        right_singular_power(&m, &opts)?
                    }
                    (ScoreMode::RightSingular, SolverArg::Randomized) => randomized_rank1(
                        &m,
                        ttc_core::spectral::DEFAULT_OVERSAMPLE,
                        ttc_core::spectral::DEFAULT_POWER_STEPS,
                        seed,
                        &opts,
                    )?,
                };
                identify_core_topk(&solved, convention, k)?
            };
            emit(&cli.out, &estimate_to_json(&estimate))?;
            eprintln!(
                "estimated core ({} members, {} scores, {} convention): {:?}",
                estimate.members.len(),
                estimate.mode.as_str(),
                estimate.convention.as_str(),
                estimate.members
            );
            Ok(())
        }
        Cmd::Bench { flags } => {
            let cfg = harness_config(flags, cli.seed, cli.k)?;
            let records = run_accuracy(&cfg)?;
            let failures = records.iter().filter(|r| r.precision.is_nan()).count();
            let agg = aggregate(&records)?;
            let records_csv = records_to_csv(&records)?;
            let agg_csv = records_to_csv(&agg)?;
            emit_harness_output(records_csv, agg_csv, &cli.out, &flags.aggregate_out)?;
            eprintln!(
                "{} rows across {} grid points ({} solver failures)",
                records.len(),
                agg.len(),
                failures
            );
            Ok(())
        }
        Cmd::Noise { flags, levels, noise_model } => {
            let mut cfg = harness_config(flags, cli.seed, cli.k)?;
            if let Some(levels) = levels {
                cfg.noise_levels = levels.clone();
            }
            if let Some(model) = noise_model {
                cfg.noise_model = *model;
            }
            let records = run_noise_sweep(&cfg)?;
            let failures = records.iter().filter(|r| r.precision.is_nan()).count();
            let agg = aggregate(&records)?;
            let records_csv = records_to_csv(&records)?;
            let agg_csv = records_to_csv(&agg)?;
            emit_harness_output(records_csv, agg_csv, &cli.out, &flags.aggregate_out)?;
            eprintln!(
                "{} rows across {} grid points ({} solver failures)",
                records.len(),
                agg.len(),
                failures
            );
            Ok(())
        }
        Cmd::Timing { flags, no_baseline } => {
            let mut cfg = harness_config(flags, cli.seed, cli.k)?;
            if *no_baseline {
                cfg.include_baseline = false;
            }
            let records = run_timing(&cfg)?;
            emit(&cli.out, &records_to_csv(&records)?)?;
            for line in speedup_lines(&records) {
                eprintln!("{line}");
            }
            Ok(())
        }
    }
}

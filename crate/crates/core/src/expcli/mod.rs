//! Experiment configuration, dataset handling, replication orchestration and
//! the `msc` command line.
//!
//! Output files, under the configured `out` directory:
//!
//! - `trace_NNN.csv`, one per replication: header row, then `iteration`, one
//!   column per parameter, `grad_norm`, `ess`, `max_weight`, `sticky`.
//! - `summary.json`: the result-relevant configuration, one entry per
//!   replication (sorted by index) and an `aggregate` block. Keys are
//!   emitted in sorted order, so reruns are byte-identical.
//! - `config.txt`: the resolved configuration in `key = value` form; it can
//!   be passed back through `--config` to reproduce the run.

mod config;
mod data;
mod experiments;
pub mod kernelcheck;

pub use config::{CheckTarget, Estimator, Experiment, ExperimentConfig, ProposalChoice};
pub use data::{load_csv_dataset, read_trace_csv, split_train_test, write_trace_csv, SplitSpec};
pub use experiments::{
    mean_std, run_experiment, subset_instance, ExperimentOutcome, SubsetInstance, SKEW_NORMAL,
    SUBSET_MIN_GAP,
};

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// Exit status for malformed flags or configuration.
pub const EXIT_USAGE: i32 = 1;
/// Exit status for failures while running.
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "msc", about = "Markovian score climbing experiments", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a Gaussian to a skew-normal target.
    Skewnormal {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        kernel: KernelArgs,
    },
    /// Bayesian probit regression over repeated train/test splits.
    Probit {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        kernel: KernelArgs,
        /// Training fraction of every split.
        #[arg(long)]
        train_fraction: Option<String>,
    },
    /// Stochastic volatility: twisted proposals and parameters by MSC with ML.
    Stochvol {
        #[command(flatten)]
        common: CommonArgs,
        /// Length of the simulated series (ignored with --dataset).
        #[arg(long)]
        series_len: Option<String>,
        /// Particles per final log-marginal-likelihood estimate.
        #[arg(long)]
        eval_samples: Option<String>,
        /// Independent sweeps per log-marginal-likelihood estimate.
        #[arg(long)]
        eval_sweeps: Option<String>,
    },
    /// Subset-average likelihood SGD against the enumerated perturbed posterior.
    Subsetavg {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        kernel: KernelArgs,
        /// Mini-batch size m.
        #[arg(long)]
        subset_size: Option<String>,
    },
    /// Invariance suites for the CIS and conditional SMC kernels.
    Kernelcheck {
        #[command(flatten)]
        common: CommonArgs,
        /// conjugate, lgssm or all.
        #[arg(long)]
        target: Option<String>,
    },
}

/// Flags shared by every subcommand. Values are parsed by the same code as
/// configuration files, so both accept identical spellings.
#[derive(Args, Debug)]
struct CommonArgs {
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    iters: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    /// msc-cis, msc-csmc, snis or subset-avg.
    #[arg(long)]
    estimator: Option<String>,
    /// rm[:a,b,gamma] or adam[:lr[,beta1,beta2,eps]].
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    replications: Option<String>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<String>,
    /// Keep every n-th iteration in traces (0 = automatic).
    #[arg(long)]
    thin: Option<String>,
    /// Fraction of final iterates averaged into reported parameters.
    #[arg(long)]
    tail: Option<String>,
    /// `key = value` file; its entries override command-line flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct KernelArgs {
    /// CIS proposal: adaptive or prior.
    #[arg(long)]
    proposal: Option<String>,
    /// retained or rao-blackwell.
    #[arg(long)]
    gradient: Option<String>,
}

impl CommonArgs {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("seed", &self.seed),
            ("iters", &self.iters),
            ("samples", &self.samples),
            ("estimator", &self.estimator),
            ("schedule", &self.schedule),
            ("replications", &self.replications),
            ("dataset", &self.dataset),
            ("out", &self.out),
            ("workers", &self.workers),
            ("thin", &self.thin),
            ("tail", &self.tail),
        ]
    }
}

impl KernelArgs {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![("proposal", &self.proposal), ("gradient", &self.gradient)]
    }
}

fn resolve(cmd: &Command) -> crate::Result<ExperimentConfig> {
    let (experiment, common, mut extra) = match cmd {
        Command::Skewnormal { common, kernel } => (Experiment::SkewNormal, common, kernel.pairs()),
        Command::Probit {
            common,
            kernel,
            train_fraction,
        } => {
            let mut p = kernel.pairs();
            p.push(("train_fraction", train_fraction));
            (Experiment::Probit, common, p)
        }
        Command::Stochvol {
            common,
            series_len,
            eval_samples,
            eval_sweeps,
        } => (
            Experiment::StochVol,
            common,
            vec![
                ("series_len", series_len),
                ("eval_samples", eval_samples),
                ("eval_sweeps", eval_sweeps),
            ],
        ),
        Command::Subsetavg {
            common,
            kernel,
            subset_size,
        } => {
            let mut p = kernel.pairs();
            p.push(("subset_size", subset_size));
            (Experiment::SubsetAvg, common, p)
        }
        Command::Kernelcheck { common, target } => {
            (Experiment::KernelCheck, common, vec![("target", target)])
        }
    };
    let mut cfg = ExperimentConfig::new(experiment);
    extra.extend(common.pairs());
    for (key, value) in extra {
        if let Some(v) = value {
            cfg.apply(key, v)
                .map_err(|e| crate::Error::arg(format!("--{}: {e}", key.replace('_', "-"))))?;
        }
    }
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| crate::Error::arg(format!("--config {}: {e}", path.display())))?;
        cfg.apply_kv(&text)?;
        if cfg.experiment != experiment {
            return Err(crate::Error::arg(format!(
                "config file is for {}, not {}",
                cfg.experiment, experiment
            )));
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Entry point of the `msc` binary. `argv[0]` is the program name.
///
/// Returns [`EXIT_OK`], [`EXIT_USAGE`] for bad flags or configuration, or
/// [`EXIT_RUNTIME`] when the experiment itself fails.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match resolve(&cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match run_experiment(&cfg) {
        Ok(outcome) => {
            let mut out = std::io::stdout().lock();
            let _ = write!(out, "{}", outcome.report);
            if !outcome.report.ends_with('\n') {
                let _ = writeln!(out);
            }
            if outcome.failed_replications > 0 {
                let _ = writeln!(
                    out,
                    "{} replication(s) failed; see summary",
                    outcome.failed_replications
                );
            }
            let _ = writeln!(out, "wrote {}", outcome.summary_path.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

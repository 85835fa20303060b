//! Command-line front end: graph files, JSON configs and CSV/JSON reports around
//! `probcut-core`.

pub mod commands;
pub mod config;
pub mod io;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use probcut_core::graph::WeightMode;

use commands::bounds::{BoundsConfig, InstanceSpec};
use commands::cluster::ClusterConfig;
use commands::concentration::ConcentrationConfig;
use commands::gen::GenConfig;
use commands::gradcheck::GradcheckConfig;
use config::{load, CommonArgs};
use io::format_labels;
use report::emit;

/// Exit code when a certified check fails.
pub const EXIT_VIOLATION: i32 = 1;
/// Exit code for configuration, input and runtime errors.
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "probcut", version, about = "Probabilistic graph-cut bounds, checks and clustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Ratio,
    Normalized,
}

impl From<ModeArg> for WeightMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Ratio => WeightMode::Ratio,
            ModeArg::Normalized => WeightMode::Normalized,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reciprocal expectation versus every closed-form bound, with validity flags.
    Bounds {
        #[command(flatten)]
        common: CommonArgs,
        /// Slack on certified inequalities; a negative value forces failures (self-test).
        #[arg(long, allow_negative_numbers = true)]
        tolerance: Option<f64>,
        /// Adds one instance with these comma-separated probabilities.
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1.0, requires = "alphas")]
        q: f64,
        #[arg(long, default_value_t = 1.0, requires = "alphas")]
        beta: f64,
    },
    /// Analytic derivatives against finite differences.
    Gradcheck {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Coverage and bias of the minibatch envelope estimator.
    Concentration {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Optimize a clustering and write the trace and final labels.
    Cluster {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        /// Final labels, one per line.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Write a synthetic graph (`--format csv` gives edge_tsv).
    Gen {
        #[command(flatten)]
        common: CommonArgs,
        /// Planted labels, one per line.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
}

/// Runs a command and returns the process exit code.
pub fn execute(cli: Cli) -> anyhow::Result<i32> {
    let outcome = match cli.command {
        Command::Bounds { common, tolerance, alphas, q, beta } => {
            let mut cfg: BoundsConfig = load(&common)?;
            if let Some(t) = tolerance {
                cfg.tolerance = t;
            }
            if let Some(alphas) = alphas {
                cfg.instances.push(InstanceSpec { q, alphas, beta: Some(beta), betas: None });
            }
            let out = commands::bounds::run(&cfg)?;
            (out, cfg.run)
        }
        Command::Gradcheck { common } => {
            let cfg: GradcheckConfig = load(&common)?;
            (commands::gradcheck::run(&cfg)?, cfg.run)
        }
        Command::Concentration { common, trials } => {
            let mut cfg: ConcentrationConfig = load(&common)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            (commands::concentration::run(&cfg)?, cfg.run)
        }
        Command::Cluster { common, graph, mode, k, steps, labels } => {
            let mut cfg: ClusterConfig = load(&common)?;
            if graph.is_some() {
                cfg.graph = graph;
            }
            if let Some(m) = mode {
                cfg.mode = m.into();
            }
            if let Some(k) = k {
                cfg.optimize.k = k;
            }
            if let Some(s) = steps {
                cfg.optimize.steps = s;
            }
            if labels.is_some() {
                cfg.labels_out = labels;
            }
            commands::cluster::resolve(&mut cfg)?;
            let out = commands::cluster::run(&cfg)?;
            if let Some(path) = &cfg.labels_out {
                emit(&format_labels(&out.labels), Some(path))?;
            }
            eprintln!("{}", out.summary(&cfg.mode));
            (out.outcome, cfg.run)
        }
        Command::Gen { common, labels } => {
            let mut cfg: GenConfig = load(&common)?;
            if labels.is_some() {
                cfg.labels_out = labels;
            }
            let (text, planted) = commands::gen::run(&cfg)?;
            emit(&text, cfg.run.out.as_deref())?;
            if let Some(path) = &cfg.labels_out {
                let planted = planted.ok_or_else(|| anyhow::anyhow!("this generator has no planted labels"))?;
                emit(&format_labels(&planted), Some(path))?;
            }
            return Ok(0);
        }
    };
    let (out, run) = outcome;
    emit(&out.report.render(run.format), run.out.as_deref())?;
    if out.violations > 0 {
        eprintln!("{} check(s) failed", out.violations);
        return Ok(EXIT_VIOLATION);
    }
    Ok(0)
}

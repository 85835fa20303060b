//! `cluster`: optimizes soft assignments on a loaded or generated graph.
//!
//! The report is the trace; columns (frozen): step, j, u, gamma, discrete_cut, tau.
//! Final hard labels go to `labels_out`, one per line.

use std::path::PathBuf;

use probcut_core::graph::{adjusted_rand_index, graphcut_discrete, Graph, WeightMode};
use probcut_core::objective::ObjectiveConfig;
use probcut_core::optimize::{optimize, OptimizeParams};
use serde::{Deserialize, Serialize};

use super::gen::GenSpec;
use super::Outcome;
use crate::config::{require_seed, CommandConfig, RunOptions};
use crate::io::{read_graph, read_labels, GraphFormat};
use crate::report::Report;

pub const COLUMNS: &[&str] = &["step", "j", "u", "gamma", "discrete_cut", "tau"];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub run: RunOptions,
    /// Graph file; takes precedence over `generate`.
    pub graph: Option<PathBuf>,
    pub graph_format: Option<GraphFormat>,
    pub generate: Option<GenSpec>,
    pub mode: WeightMode,
    pub objective: ObjectiveConfig,
    /// `optimize.seed` is replaced by the run seed.
    pub optimize: OptimizeParams,
    #[serde(skip_serializing)]
    pub labels_out: Option<PathBuf>,
    /// Reference labels for the adjusted Rand index; generated graphs supply their own.
    pub planted: Option<PathBuf>,
}

impl CommandConfig for ClusterConfig {
    fn run(&self) -> &RunOptions {
        &self.run
    }
    fn run_mut(&mut self) -> &mut RunOptions {
        &mut self.run
    }
}

pub struct ClusterOutcome {
    pub outcome: Outcome,
    pub labels: Vec<usize>,
    pub final_cut: f64,
    pub ari: Option<f64>,
}

impl ClusterOutcome {
    pub fn summary(&self, mode: &WeightMode) -> String {
        let name = match mode {
            WeightMode::Ratio => "RatioCut",
            WeightMode::Normalized => "NCut",
            WeightMode::Custom(_) => "GraphCut",
        };
        match self.ari {
            Some(ari) => format!("final discrete {name} = {}; ARI = {ari}", self.final_cut),
            None => format!("final discrete {name} = {}", self.final_cut),
        }
    }
}

/// Fills `optimize.seed` from the run seed.
pub fn resolve(cfg: &mut ClusterConfig) -> anyhow::Result<()> {
    cfg.optimize.seed = require_seed(&cfg.run, "cluster")?;
    Ok(())
}

pub fn run(cfg: &ClusterConfig) -> anyhow::Result<ClusterOutcome> {
    let seed = require_seed(&cfg.run, "cluster")?;
    anyhow::ensure!(cfg.optimize.seed == seed, "call resolve() first");
    let (g, planted): (Graph, Option<Vec<usize>>) = match (&cfg.graph, &cfg.generate) {
        (Some(path), _) => (read_graph(path, cfg.graph_format, cfg.mode.clone())?, None),
        (None, Some(spec)) => {
            let (g, labels) = spec.build(Some(seed))?;
            (g.with_mode(cfg.mode.clone())?, labels)
        }
        (None, None) => anyhow::bail!("give a graph file (--graph) or a `generate` spec"),
    };
    let planted = match &cfg.planted {
        Some(path) => Some(read_labels(path)?),
        None => planted,
    };
    let result = optimize(&g, &cfg.objective, &cfg.optimize)?;
    let hard = result.state.p().argmax();
    let final_cut = graphcut_discrete(&g, &hard)?;
    let ari = planted.map(|p| adjusted_rand_index(&hard.labels, &p)).transpose()?;

    let mut report = Report::new("cluster", cfg, Some(seed), COLUMNS);
    for row in &result.trace {
        report.push(vec![
            row.step.into(),
            row.j.into(),
            row.u.into(),
            row.gamma.into(),
            row.discrete_cut.into(),
            row.tau.into(),
        ]);
    }
    Ok(ClusterOutcome { outcome: Outcome { report, violations: 0 }, labels: hard.labels, final_cut, ari })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(spec: GenSpec, steps: usize) -> ClusterConfig {
        let mut c = ClusterConfig {
            run: RunOptions { seed: Some(1), ..Default::default() },
            generate: Some(spec),
            optimize: OptimizeParams { steps, ..Default::default() },
            ..Default::default()
        };
        resolve(&mut c).unwrap();
        c
    }

    #[test]
    fn two_cliques_are_separated() {
        let out = run(&cfg(GenSpec::Cliques { sizes: vec![6, 6] }, 200)).unwrap();
        assert_eq!(out.final_cut, 0.0);
        assert_eq!(out.ari, Some(1.0));
    }

    #[test]
    fn zero_steps_reports_initial_state() {
        let out = run(&cfg(GenSpec::Cliques { sizes: vec![4, 4] }, 0)).unwrap();
        assert_eq!(out.outcome.report.rows.len(), 1);
    }

    #[test]
    fn needs_a_graph() {
        let mut c = ClusterConfig { run: RunOptions { seed: Some(1), ..Default::default() }, ..Default::default() };
        resolve(&mut c).unwrap();
        assert!(run(&c).is_err());
    }
}

//! `concentration`: coverage and bias of the minibatch plug-in envelope.
//!
//! Columns (frozen): setting_id, n, delta, bound, empirical_exceed_rate, empirical_bias,
//! q, beta, m, population, bias_bound, bias_tolerance, coverage_ok, bias_ok.
//! Setting `s` draws its trials from seed `master + s`, so both deltas share samples.

use probcut_core::concentration::{coverage, ConcentrationParams};
use probcut_core::rng;
use serde::{Deserialize, Serialize};

use super::Outcome;
use crate::config::{require_seed, CommandConfig, RunOptions};
use crate::report::Report;

pub const COLUMNS: &[&str] = &[
    "setting_id",
    "n",
    "delta",
    "bound",
    "empirical_exceed_rate",
    "empirical_bias",
    "q",
    "beta",
    "m",
    "population",
    "bias_bound",
    "bias_tolerance",
    "coverage_ok",
    "bias_ok",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Setting {
    pub q: f64,
    pub beta: f64,
    pub alphas: Vec<f64>,
    /// Batch size.
    pub n: usize,
    /// Envelope degree; the population size when absent.
    #[serde(default)]
    pub m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcentrationConfig {
    pub run: RunOptions,
    /// Explicit settings; when empty, `random_settings` are drawn from the seed.
    pub settings: Vec<Setting>,
    pub random_settings: usize,
    pub population_max: usize,
    pub n_max: usize,
    pub deltas: Vec<f64>,
    pub trials: usize,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        Self {
            run: RunOptions::default(),
            settings: Vec::new(),
            random_settings: 20,
            population_max: 40,
            n_max: 100,
            deltas: vec![0.05, 0.01],
            trials: 10_000,
        }
    }
}

impl CommandConfig for ConcentrationConfig {
    fn run(&self) -> &RunOptions {
        &self.run
    }
    fn run_mut(&mut self) -> &mut RunOptions {
        &mut self.run
    }
}

fn random_settings(cfg: &ConcentrationConfig, seed: u64) -> anyhow::Result<Vec<Setting>> {
    anyhow::ensure!(cfg.population_max >= 1 && cfg.n_max >= 1, "population_max and n_max must be positive");
    let mut r = rng::stream(seed, u64::MAX);
    Ok((0..cfg.random_settings)
        .map(|_| {
            let size = 1 + rng::index(&mut r, cfg.population_max);
            let sparse = rng::unit(&mut r) < 0.3;
            let alphas = (0..size)
                .map(|_| if sparse && rng::unit(&mut r) < 0.5 { 0.0 } else { rng::unit(&mut r) })
                .collect();
            Setting {
                q: rng::uniform(&mut r, 0.5, 5.0),
                beta: rng::uniform(&mut r, 0.2, 2.0),
                alphas,
                n: 1 + rng::index(&mut r, cfg.n_max),
                m: None,
            }
        })
        .collect())
}

pub fn run(cfg: &ConcentrationConfig) -> anyhow::Result<Outcome> {
    let seed = require_seed(&cfg.run, "concentration")?;
    anyhow::ensure!(cfg.trials >= 1000, "trials must be at least 1000");
    let settings = if cfg.settings.is_empty() { random_settings(cfg, seed)? } else { cfg.settings.clone() };
    let mut report = Report::new("concentration", cfg, Some(seed), COLUMNS);
    let mut violations = 0;
    for (id, s) in settings.iter().enumerate() {
        for &delta in &cfg.deltas {
            let mut params = ConcentrationParams::new(s.q, s.beta, s.alphas.clone(), s.n, delta)
                .map_err(|e| anyhow::anyhow!("setting {id}: {e}"))?;
            if let Some(m) = s.m {
                params.m = m;
            }
            let cov = coverage(&params, cfg.trials, seed.wrapping_add(id as u64))?;
            let coverage_ok = cov.exceed_rate <= delta;
            let bias_ok = cov.bias.within();
            violations += usize::from(!coverage_ok) + usize::from(!bias_ok);
            report.push(vec![
                id.into(),
                s.n.into(),
                delta.into(),
                cov.bound.into(),
                cov.exceed_rate.into(),
                cov.bias.empirical_bias.into(),
                s.q.into(),
                s.beta.into(),
                params.m.into(),
                s.alphas.len().into(),
                cov.bias.bound.into(),
                cov.bias.tolerance.into(),
                coverage_ok.into(),
                bias_ok.into(),
            ]);
        }
    }
    Ok(Outcome { report, violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_settings_pass() {
        let cfg = ConcentrationConfig {
            run: RunOptions { seed: Some(4), ..Default::default() },
            random_settings: 3,
            trials: 2000,
            ..Default::default()
        };
        let out = run(&cfg).unwrap();
        assert_eq!(out.report.rows.len(), 6);
        assert_eq!(out.violations, 0);
    }

    #[test]
    fn needs_seed() {
        assert!(run(&ConcentrationConfig::default()).is_err());
    }
}

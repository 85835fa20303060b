//! `gradcheck`: analytic derivatives against central finite differences.
//!
//! Columns (frozen): check, id, detail, max_rel_error, ok.
//! Relative error is `|a - f| / max(|a|, |f|, 1e-2)`.

use probcut_core::envelope::{h_envelope, h_envelope_grad};
use probcut_core::gap::{a_tilde, second_diff_forward, weighted_stats, weighted_stats_grad, KernelChoice, OmegaSpec};
use probcut_core::graph::WeightMode;
use probcut_core::objective::{AssignmentState, MeanField, Objective, ObjectiveConfig};
use probcut_core::rng;
use serde::{Deserialize, Serialize};

use super::{random_graph, rel_err, Outcome};
use crate::config::{require_seed, CommandConfig, RunOptions};
use crate::report::Report;

pub const COLUMNS: &[&str] = &["check", "id", "detail", "max_rel_error", "ok"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub run: RunOptions,
    /// Random instances per check.
    pub instances: usize,
    /// Largest envelope degree; 0 is included.
    pub m_max: usize,
    pub n_max: usize,
    /// Largest cluster count; 1 is included.
    pub k_max: usize,
    pub tolerance: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self { run: RunOptions::default(), instances: 20, m_max: 16, n_max: 12, k_max: 4, tolerance: 1e-5 }
    }
}

impl CommandConfig for GradcheckConfig {
    fn run(&self) -> &RunOptions {
        &self.run
    }
    fn run_mut(&mut self) -> &mut RunOptions {
        &mut self.run
    }
}

fn central<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

pub fn run(cfg: &GradcheckConfig) -> anyhow::Result<Outcome> {
    let seed = require_seed(&cfg.run, "gradcheck")?;
    anyhow::ensure!(cfg.n_max >= 2 && cfg.k_max >= 1, "need n_max >= 2 and k_max >= 1");
    let mut report = Report::new("gradcheck", cfg, Some(seed), COLUMNS);
    let mut violations = 0;
    let mut record = |check: &str, id: usize, detail: String, err: f64| {
        let ok = err <= cfg.tolerance;
        if !ok {
            violations += 1;
        }
        report.push(vec![check.into(), id.into(), detail.into(), err.into(), ok.into()]);
    };

    let mut r = rng::stream(seed, 0);
    let h = 1e-6;
    for id in 0..cfg.instances {
        let q = rng::uniform(&mut r, 0.25, 10.0);
        let beta = rng::uniform(&mut r, 0.1, 5.0);
        let m = rng::index(&mut r, cfg.m_max + 1);
        let a = rng::uniform(&mut r, 0.05, 0.95);
        let detail = format!("q={q} beta={beta} m={m} alpha_bar={a}");
        let an = h_envelope_grad(q, beta, a, m)?;
        let fd = central(|x| h_envelope(q, beta, x, m).unwrap(), a, h);
        record("h_envelope_grad", id, detail.clone(), rel_err(an, fd));
        let an = a_tilde(q, beta, a, m)?;
        let fd = central(|x| second_diff_forward(q, beta, x, m).unwrap(), a, h);
        record("a_tilde", id, detail, rel_err(an, fd));
    }

    let omegas = [OmegaSpec::Uniform, OmegaSpec::BernoulliVariance, OmegaSpec::Power(1.5)];
    for id in 0..cfg.instances {
        let len = 1 + rng::index(&mut r, 10);
        let alphas: Vec<f64> = (0..len).map(|_| rng::uniform(&mut r, 0.05, 0.95)).collect();
        let omega = omegas[id % omegas.len()];
        let mut worst: f64 = 0.0;
        for i in 0..len {
            let (dmu, dvar) = weighted_stats_grad(&alphas, omega, i)?;
            let at = |x: f64| {
                let mut v = alphas.clone();
                v[i] = x;
                weighted_stats(&v, omega)
            };
            worst = worst.max(rel_err(dmu, central(|x| at(x).mu, alphas[i], h)));
            worst = worst.max(rel_err(dvar, central(|x| at(x).var, alphas[i], h)));
        }
        record("weighted_stats_grad", id, format!("len={len} omega={omega:?}"), worst);
    }

    let kernels = [KernelChoice::Auto, KernelChoice::ForwardHeuristic];
    let rhos = [0.0, 0.5, 2.0];
    for id in 0..cfg.instances {
        let n = 2 + rng::index(&mut r, cfg.n_max - 1);
        let k = 1 + rng::index(&mut r, cfg.k_max);
        let mode = if id % 2 == 0 { WeightMode::Ratio } else { WeightMode::Normalized };
        let g = random_graph(&mut r, n, mode.clone())?;
        let config = ObjectiveConfig {
            rho: rhos[id % 3],
            omega: omegas[(id / 3) % 3],
            gap_kernel: kernels[id % 2],
            mean_field: if id % 4 == 3 { MeanField::LeaveTwoOut } else { MeanField::Full },
            ..ObjectiveConfig::default()
        };
        let logits: Vec<f64> = (0..n * k).map(|_| rng::normal(&mut r)).collect();
        let state = AssignmentState::new(n, k, logits, 1.0)?;
        let obj = Objective::new(&g, &config)?;
        let (_, grad) = obj.backward(&state)?;
        let mut worst: f64 = 0.0;
        let step = 1e-5;
        for idx in 0..grad.len() {
            let at = |delta: f64| {
                let mut z = state.logits().to_vec();
                z[idx] += delta;
                let s = AssignmentState::new(n, k, z, 1.0).unwrap();
                obj.value(s.p()).unwrap().j
            };
            worst = worst.max(rel_err(grad[idx], (at(step) - at(-step)) / (2.0 * step)));
        }
        let detail = format!(
            "n={n} k={k} mode={mode:?} rho={} omega={:?} kernel={:?} mean_field={:?}",
            config.rho, config.omega, config.gap_kernel, config.mean_field
        );
        record("backward", id, detail, worst);
    }
    Ok(Outcome { report, violations })
}

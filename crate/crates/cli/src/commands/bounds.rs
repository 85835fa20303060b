//! `bounds`: the reciprocal expectation next to every closed-form bound, with validity flags.
//!
//! Columns (frozen): id, m, q, beta_min, beta_max, i_value, i_method, h_envelope, holder,
//! relaxed_c2, q_decoupled, prcut, gap_lower, gap_upper, penalty, penalty_certified,
//! envelope_ok, holder_ok, decoupled_ok, prcut_ok, gap_ok, penalty_ok.
//!
//! A flag is empty when the check does not apply. `relaxed_c2` is informational: it is
//! not an upper bound on `i_value` and carries no flag. `penalty_ok` is only checked
//! when the penalty is certified (plain variance, `q > 2 beta`).

use probcut_core::envelope::{decoupled_q_bound, default_bins, h_envelope, holder_bound, prcut_reciprocal_bound, relaxed_c2_bound};
use probcut_core::gap::{amgm_gap_bounds_quadrature, zero_aware_penalty, OmegaSpec};
use probcut_core::gpb::{expected_reciprocal_exact, expected_reciprocal_quadrature, GpbInstance};
use probcut_core::rng;
use serde::{Deserialize, Serialize};

use super::Outcome;
use crate::config::{require_seed, CommandConfig, RunOptions};
use crate::report::{Cell, Report};

pub const COLUMNS: &[&str] = &[
    "id",
    "m",
    "q",
    "beta_min",
    "beta_max",
    "i_value",
    "i_method",
    "h_envelope",
    "holder",
    "relaxed_c2",
    "q_decoupled",
    "prcut",
    "gap_lower",
    "gap_upper",
    "penalty",
    "penalty_certified",
    "envelope_ok",
    "holder_ok",
    "decoupled_ok",
    "prcut_ok",
    "gap_ok",
    "penalty_ok",
];

/// One instance; `betas` wins over `beta`, which defaults to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub q: f64,
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub betas: Option<Vec<f64>>,
}

impl InstanceSpec {
    fn betas(&self) -> Vec<f64> {
        self.betas.clone().unwrap_or_else(|| vec![self.beta.unwrap_or(1.0); self.alphas.len()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomInstances {
    pub count: usize,
    pub m_max: usize,
    pub q_range: (f64, f64),
    pub beta_range: (f64, f64),
    /// Draw up to three distinct weights per instance instead of one.
    pub heterogeneous: bool,
}

impl Default for RandomInstances {
    fn default() -> Self {
        Self { count: 100, m_max: 12, q_range: (0.25, 10.0), beta_range: (0.1, 5.0), heterogeneous: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub run: RunOptions,
    pub instances: Vec<InstanceSpec>,
    pub random: Option<RandomInstances>,
    /// Slack allowed on every certified inequality. Negative values force failures.
    pub tolerance: f64,
    pub quadrature_tol: f64,
    pub omega: OmegaSpec,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            run: RunOptions::default(),
            instances: Vec::new(),
            random: None,
            tolerance: 1e-9,
            quadrature_tol: 1e-12,
            omega: OmegaSpec::Uniform,
        }
    }
}

impl CommandConfig for BoundsConfig {
    fn run(&self) -> &RunOptions {
        &self.run
    }
    fn run_mut(&mut self) -> &mut RunOptions {
        &mut self.run
    }
}

fn random_instances(spec: &RandomInstances, seed: u64) -> anyhow::Result<Vec<InstanceSpec>> {
    anyhow::ensure!(spec.m_max >= 1, "random.m_max must be at least 1");
    let mut r = rng::stream(seed, 0);
    Ok((0..spec.count)
        .map(|_| {
            let m = 1 + rng::index(&mut r, spec.m_max);
            let q = rng::uniform(&mut r, spec.q_range.0, spec.q_range.1);
            let levels = if spec.heterogeneous { 1 + rng::index(&mut r, 3) } else { 1 };
            let pool: Vec<f64> = (0..levels).map(|_| rng::uniform(&mut r, spec.beta_range.0, spec.beta_range.1)).collect();
            let betas = (0..m).map(|_| pool[rng::index(&mut r, levels)]).collect();
            let alphas = (0..m)
                .map(|_| match rng::index(&mut r, 6) {
                    0 => 0.0,
                    1 => 1.0,
                    _ => rng::unit(&mut r),
                })
                .collect();
            InstanceSpec { q, alphas, beta: None, betas: Some(betas) }
        })
        .collect())
}

/// `rhs - lhs >= -tol`.
fn holds(lhs: f64, rhs: f64, tol: f64) -> bool {
    rhs - lhs >= -tol
}

pub fn run(cfg: &BoundsConfig) -> anyhow::Result<Outcome> {
    let mut instances = cfg.instances.clone();
    if let Some(spec) = &cfg.random {
        instances.extend(random_instances(spec, require_seed(&cfg.run, "bounds --random")?)?);
    }
    anyhow::ensure!(!instances.is_empty(), "no instances: give `instances`, `random`, or --alphas");
    let tol = cfg.tolerance;
    let mut report = Report::new("bounds", cfg, cfg.run.seed, COLUMNS);
    let mut violations = 0;
    for (id, inst) in instances.iter().enumerate() {
        let betas = inst.betas();
        let m = inst.alphas.len();
        anyhow::ensure!(m > 0, "instance {id}: alphas is empty");
        let gpb = GpbInstance::new(inst.q, inst.alphas.clone(), betas.clone())
            .map_err(|e| anyhow::anyhow!("instance {id}: {e}"))?;
        let (i_value, i_method) = match expected_reciprocal_exact(&gpb) {
            Ok(r) => (r.value, "exact"),
            Err(_) => (expected_reciprocal_quadrature(&gpb, cfg.quadrature_tol)?.value, "quadrature"),
        };
        let beta_min = betas.iter().copied().fold(f64::INFINITY, f64::min);
        let beta_max = betas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let common = beta_min == beta_max;
        let abar = inst.alphas.iter().sum::<f64>() / m as f64;

        let part = default_bins(&betas)?;
        let holder = holder_bound(inst.q, &inst.alphas, &betas, &part)?.value;
        let relaxed = relaxed_c2_bound(inst.q, &inst.alphas, &part).ok();
        let decoupled = decoupled_q_bound(inst.q, &inst.alphas, &betas, &part)?;
        // The reciprocal-mean bound needs unit offset and unit weights.
        let prcut = (inst.q == 1.0 && common && beta_min == 1.0)
            .then(|| prcut_reciprocal_bound(&inst.alphas).ok())
            .flatten();

        let (envelope, gap_bounds, penalty) = if common {
            let h = h_envelope(inst.q, beta_min, abar, m)?;
            let gaps = amgm_gap_bounds_quadrature(inst.q, &inst.alphas, beta_min, cfg.quadrature_tol)?;
            let pen = zero_aware_penalty(inst.q, &inst.alphas, beta_min, m, cfg.omega)?;
            (Some(h), Some(gaps), Some(pen))
        } else {
            (None, None, None)
        };

        let envelope_ok = envelope.map(|h| holds(i_value, h, tol));
        let holder_ok = Some(holds(i_value, holder, tol));
        let decoupled_ok = Some(holds(i_value, decoupled, tol));
        let prcut_ok = prcut.map(|b| holds(i_value, b, tol));
        let gap_ok = envelope.zip(gap_bounds).map(|(h, (lo, hi))| {
            let gap = h - i_value;
            holds(lo, gap, tol) && holds(gap, hi, tol)
        });
        let penalty_ok = envelope
            .zip(penalty)
            .filter(|(_, p)| p.certified_upper)
            .map(|(h, p)| holds(h - i_value, p.value, tol));

        let flags = [envelope_ok, holder_ok, decoupled_ok, prcut_ok, gap_ok, penalty_ok];
        violations += flags.iter().filter(|f| **f == Some(false)).count();

        let mut row: Vec<Cell> = vec![
            id.into(),
            m.into(),
            inst.q.into(),
            beta_min.into(),
            beta_max.into(),
            i_value.into(),
            i_method.into(),
            envelope.into(),
            holder.into(),
            relaxed.into(),
            decoupled.into(),
            prcut.into(),
            gap_bounds.map(|g| g.0).into(),
            gap_bounds.map(|g| g.1).into(),
            penalty.map(|p| p.value).into(),
            penalty.map(|p| p.certified_upper).into(),
        ];
        row.extend(flags.iter().map(|&f| Cell::from(f)));
        report.push(row);
    }
    Ok(Outcome { report, violations })
}

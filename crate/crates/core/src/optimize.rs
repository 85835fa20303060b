//! First-order clustering driver: momentum gradient descent on the logits with
//! geometric temperature annealing.

use alloc::vec::Vec;

use crate::error::invalid;
use crate::graph::{graphcut_discrete, Graph};
use crate::objective::{AssignmentState, Objective, ObjectiveConfig};
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RhoSchedule {
    /// Keep the configured `rho`.
    Constant,
    /// Interpolate linearly from the configured `rho` to `end`.
    Linear { end: f64 },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct OptimizeParams {
    pub k: usize,
    pub steps: usize,
    pub step_size: f64,
    pub momentum: f64,
    pub tau_start: f64,
    pub tau_end: f64,
    pub rho_schedule: RhoSchedule,
    pub seed: u64,
    /// Vertices per step; `None` uses the whole graph.
    pub batch_size: Option<usize>,
    /// Standard deviation of the initial logits.
    pub init_scale: f64,
    pub log_every: usize,
}

impl Default for OptimizeParams {
    fn default() -> Self {
        Self {
            k: 2,
            steps: 300,
            step_size: 0.05,
            momentum: 0.9,
            tau_start: 1.0,
            tau_end: 0.05,
            rho_schedule: RhoSchedule::Constant,
            seed: 0,
            batch_size: None,
            init_scale: 0.1,
            log_every: 1,
        }
    }
}

impl OptimizeParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("k", "must be at least 1"));
        }
        if !(self.step_size >= 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid("step_size/momentum", "need step_size >= 0 and momentum in [0, 1)"));
        }
        if !(self.tau_start > 0.0 && self.tau_end > 0.0) {
            return Err(invalid("tau", "temperatures must be positive"));
        }
        if self.batch_size == Some(0) || self.batch_size == Some(1) {
            return Err(invalid("batch_size", "must be at least 2"));
        }
        if let RhoSchedule::Linear { end } = self.rho_schedule {
            if !(end >= 0.0) {
                return Err(invalid("rho_schedule", "end must be nonnegative"));
            }
        }
        if !(self.init_scale >= 0.0) {
            return Err(invalid("init_scale", "must be nonnegative"));
        }
        Ok(())
    }

    /// Temperature at `step` (geometric from `tau_start` to `tau_end`).
    pub fn tau_at(&self, step: usize) -> f64 {
        if self.steps <= 1 {
            return self.tau_start;
        }
        let frac = step as f64 / (self.steps - 1) as f64;
        self.tau_start * libm::pow(self.tau_end / self.tau_start, frac)
    }

    fn rho_at(&self, base: f64, step: usize) -> f64 {
        match self.rho_schedule {
            RhoSchedule::Constant => base,
            RhoSchedule::Linear { end } => {
                let frac = if self.steps <= 1 { 1.0 } else { step as f64 / (self.steps - 1) as f64 };
                base + (end - base) * frac
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceRow {
    pub step: usize,
    pub j: f64,
    pub u: f64,
    pub gamma: f64,
    pub discrete_cut: f64,
    pub tau: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub state: AssignmentState,
    pub trace: Vec<TraceRow>,
}

/// Seeded initial state with `N(0, init_scale^2)` logits.
pub fn initial_state(n: usize, params: &OptimizeParams) -> Result<AssignmentState> {
    let mut r = rng::stream(params.seed, 0);
    let logits = (0..n * params.k).map(|_| params.init_scale * rng::normal(&mut r)).collect();
    AssignmentState::new(n, params.k, logits, params.tau_start)
}

/// Runs `params.steps` momentum steps from [`initial_state`].
pub fn optimize(g: &Graph, config: &ObjectiveConfig, params: &OptimizeParams) -> Result<OptimizeResult> {
    params.validate()?;
    let state = initial_state(g.n(), params)?;
    optimize_from(g, config, params, state)
}

/// Runs `params.steps` momentum steps from a given state.
pub fn optimize_from(
    g: &Graph,
    config: &ObjectiveConfig,
    params: &OptimizeParams,
    mut state: AssignmentState,
) -> Result<OptimizeResult> {
    params.validate()?;
    let n = g.n();
    let k = params.k;
    if state.p().n() != n || state.p().k() != k {
        return Err(Error::DimensionMismatch { expected: n * k, got: state.logits().len() });
    }
    let full = Objective::new(g, config)?;
    if params.steps == 0 {
        // Initial-state metrics only.
        state.set_temperature(params.tau_start)?;
        let v = full.value(state.p())?;
        let row = TraceRow {
            step: 0,
            j: v.j,
            u: v.u,
            gamma: v.gamma,
            discrete_cut: graphcut_discrete(g, &state.p().argmax())?,
            tau: state.temperature(),
        };
        return Ok(OptimizeResult { state, trace: alloc::vec![row] });
    }
    let mut cfg = config.clone();
    let mut velocity = alloc::vec![0.0; n * k];
    let mut trace = Vec::new();
    let mut batch_rng = rng::stream(params.seed, 1);
    let log_every = params.log_every.max(1);

    for step in 0..params.steps {
        state.set_temperature(params.tau_at(step))?;
        cfg.rho = params.rho_at(config.rho, step);

        let (value, grad) = match params.batch_size {
            Some(b) if b < n => {
                let batch = sample_without_replacement(&mut batch_rng, n, b);
                let sub = g.induced(&batch)?;
                let sub_logits: Vec<f64> = batch.iter().flat_map(|&v| state.logits()[v * k..(v + 1) * k].iter().copied()).collect();
                let sub_state = AssignmentState::new(b, k, sub_logits, state.temperature())?;
                let (_, sub_grad) = Objective::new(&sub, &cfg)?.backward(&sub_state)?;
                let mut grad = alloc::vec![0.0; n * k];
                for (a, &v) in batch.iter().enumerate() {
                    grad[v * k..(v + 1) * k].copy_from_slice(&sub_grad[a * k..(a + 1) * k]);
                }
                let value = if step % log_every == 0 || step + 1 == params.steps {
                    Some(with_rho(&full, cfg.rho).value(state.p())?)
                } else {
                    None
                };
                (value, grad)
            }
            _ => {
                let (v, grad) = with_rho(&full, cfg.rho).backward(&state)?;
                (Some(v), grad)
            }
        };

        if let Some(v) = value {
            if !v.j.is_finite() || grad.iter().any(|x| !x.is_finite()) {
                return Err(Error::Diverged(step));
            }
            if step % log_every == 0 || step + 1 == params.steps {
                trace.push(TraceRow {
                    step,
                    j: v.j,
                    u: v.u,
                    gamma: v.gamma,
                    discrete_cut: graphcut_discrete(g, &state.p().argmax())?,
                    tau: state.temperature(),
                });
            }
        }

        if params.step_size == 0.0 {
            continue;
        }
        let mut logits = state.logits().to_vec();
        for ((z, v), gr) in logits.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
            *v = params.momentum * *v - params.step_size * gr;
            *z += *v;
        }
        state.set_logits(logits)?;
    }
    Ok(OptimizeResult { state, trace })
}

fn with_rho<'g>(obj: &Objective<'g>, rho: f64) -> Objective<'g> {
    if obj.config().rho == rho {
        return obj.clone();
    }
    let mut cfg = obj.config().clone();
    cfg.rho = rho;
    Objective::new(obj.graph(), &cfg).expect("only rho changed")
}

fn sample_without_replacement<R: rand::Rng + ?Sized>(r: &mut R, n: usize, b: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..b {
        let j = i + rng::index(r, n - i);
        idx.swap(i, j);
    }
    idx.truncate(b);
    idx.sort_unstable();
    idx
}

pub mod bounds;
pub mod cluster;
pub mod concentration;
pub mod gen;
pub mod gradcheck;

use probcut_core::graph::generators::random_weighted;
use probcut_core::graph::{Graph, WeightMode};
use probcut_core::rng::{self, StreamRng};

use crate::report::Report;

/// A finished command: the report plus the number of failed checks.
pub struct Outcome {
    pub report: Report,
    pub violations: usize,
}

/// `|a - b| / max(|a|, |b|, 1e-2)`; the floor keeps near-zero derivatives from
/// turning rounding noise into large relative errors.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-2)
}

/// Random sparse graph; redraws until normalized mode has no isolated vertex.
pub(crate) fn random_graph(r: &mut StreamRng, n: usize, mode: WeightMode) -> anyhow::Result<Graph> {
    for _ in 0..1000 {
        let density = rng::uniform(r, 0.3, 1.0);
        let seed = (rng::unit(r) * 1e15) as u64;
        if let Ok(g) = random_weighted(n, density, 0.2, 2.0, seed, mode.clone()) {
            return Ok(g);
        }
    }
    anyhow::bail!("could not draw a graph without isolated vertices (n = {n})")
}

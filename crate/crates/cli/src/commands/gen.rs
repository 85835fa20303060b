//! `gen`: seeded synthetic graphs written as `edge_tsv` (`--format csv`) or JSON.

use std::path::PathBuf;

use probcut_core::graph::generators::{build_view_graph, disjoint_cliques, generate_sbm, path_graph, random_weighted, ViewMode};
use probcut_core::graph::{Graph, WeightMode};
use probcut_core::rng;
use serde::{Deserialize, Serialize};

use crate::config::{config_hash, require_seed, CommandConfig, ReportFormat, RunOptions};
use crate::io::{format_graph, GraphFormat};
use crate::report::VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GenSpec {
    /// Planted partition with contiguous blocks.
    Sbm { n: usize, k: usize, p_in: f64, p_out: f64 },
    Cliques { sizes: Vec<usize> },
    Path { n: usize },
    Random { n: usize, density: f64, w_lo: f64, w_hi: f64 },
    /// Similarity graph `exp(<z_a, z_b> / temperature)` over unit-norm embeddings, read
    /// from `embeddings` (JSON array of arrays) or drawn around `clusters` random centres.
    View {
        n: usize,
        dim: usize,
        clusters: usize,
        spread: f64,
        temperature: f64,
        #[serde(default)]
        knn: Option<usize>,
        #[serde(default)]
        embeddings: Option<PathBuf>,
    },
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec::Sbm { n: 60, k: 2, p_in: 0.9, p_out: 0.05 }
    }
}

impl GenSpec {
    fn stochastic(&self) -> bool {
        match self {
            GenSpec::Cliques { .. } | GenSpec::Path { .. } => false,
            GenSpec::View { embeddings, .. } => embeddings.is_none(),
            _ => true,
        }
    }

    /// The graph (ratio mode) and its planted labels when the generator has them.
    pub fn build(&self, seed: Option<u64>) -> anyhow::Result<(Graph, Option<Vec<usize>>)> {
        let seed = if self.stochastic() {
            seed.ok_or_else(|| anyhow::anyhow!("this generator is stochastic and needs an explicit seed"))?
        } else {
            0
        };
        Ok(match self {
            GenSpec::Sbm { n, k, p_in, p_out } => {
                let (g, part) = generate_sbm(*n, *k, *p_in, *p_out, seed)?;
                (g, Some(part.labels))
            }
            GenSpec::Cliques { sizes } => {
                let labels = sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat(c).take(s)).collect();
                (disjoint_cliques(sizes, WeightMode::Ratio), Some(labels))
            }
            GenSpec::Path { n } => (path_graph(*n, WeightMode::Ratio)?, None),
            GenSpec::Random { n, density, w_lo, w_hi } => {
                (random_weighted(*n, *density, *w_lo, *w_hi, seed, WeightMode::Ratio)?, None)
            }
            GenSpec::View { n, dim, clusters, spread, temperature, knn, embeddings } => {
                let mode = knn.map_or(ViewMode::Dense, ViewMode::Knn);
                let (z, labels) = match embeddings {
                    Some(path) => {
                        let text = std::fs::read_to_string(path)?;
                        (serde_json::from_str::<Vec<Vec<f64>>>(&text)?, None)
                    }
                    None => {
                        let (z, l) = random_embeddings(*n, *dim, *clusters, *spread, seed)?;
                        (z, Some(l))
                    }
                };
                (build_view_graph(&z, *temperature, mode)?, labels)
            }
        })
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

fn random_embeddings(n: usize, dim: usize, clusters: usize, spread: f64, seed: u64) -> anyhow::Result<(Vec<Vec<f64>>, Vec<usize>)> {
    anyhow::ensure!(dim >= 1 && clusters >= 1 && clusters <= n.max(1), "need dim >= 1 and 1 <= clusters <= n");
    let mut r = rng::stream(seed, 0);
    let centres: Vec<Vec<f64>> = (0..clusters)
        .map(|_| {
            let mut c: Vec<f64> = (0..dim).map(|_| rng::normal(&mut r)).collect();
            normalize(&mut c);
            c
        })
        .collect();
    let labels: Vec<usize> = (0..n).map(|i| i * clusters / n).collect();
    let z = labels
        .iter()
        .map(|&l| {
            let mut v: Vec<f64> = centres[l].iter().map(|c| c + spread * rng::normal(&mut r)).collect();
            normalize(&mut v);
            v
        })
        .collect();
    Ok((z, labels))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub run: RunOptions,
    pub generator: GenSpec,
    /// Where to write planted labels, one per line.
    #[serde(skip_serializing)]
    pub labels_out: Option<PathBuf>,
}

impl CommandConfig for GenConfig {
    fn run(&self) -> &RunOptions {
        &self.run
    }
    fn run_mut(&mut self) -> &mut RunOptions {
        &mut self.run
    }
}

/// Graph file contents plus planted labels.
pub fn run(cfg: &GenConfig) -> anyhow::Result<(String, Option<Vec<usize>>)> {
    let seed = if cfg.generator.stochastic() { Some(require_seed(&cfg.run, "gen")?) } else { cfg.run.seed };
    let (g, labels) = cfg.generator.build(seed)?;
    let text = match cfg.run.format {
        ReportFormat::Csv => {
            // Comment lines are skipped by the reader; only `#n=` is structural.
            let seed = seed.map_or("none".to_string(), |s| s.to_string());
            format!(
                "# probcut {VERSION}\n# config_sha256={}\n# seed={seed}\n{}",
                config_hash(cfg),
                format_graph(&g, GraphFormat::EdgeTsv)
            )
        }
        ReportFormat::Json => format_graph(&g, GraphFormat::Json),
    };
    Ok((text, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_edge_tsv;

    #[test]
    fn cliques_structure() {
        let cfg = GenConfig {
            generator: GenSpec::Sbm { n: 8, k: 2, p_in: 1.0, p_out: 0.0 },
            run: RunOptions { seed: Some(3), ..Default::default() },
            ..Default::default()
        };
        let (text, labels) = run(&cfg).unwrap();
        let g = parse_edge_tsv(&text, WeightMode::Ratio).unwrap();
        let labels = labels.unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let want = if i != j && labels[i] == labels[j] { 1.0 } else { 0.0 };
                assert_eq!(g.weight(i, j), want);
            }
        }
    }

    #[test]
    fn deterministic_bytes() {
        let cfg = GenConfig { run: RunOptions { seed: Some(11), ..Default::default() }, ..Default::default() };
        assert_eq!(run(&cfg).unwrap().0, run(&cfg).unwrap().0);
        assert!(run(&GenConfig::default()).is_err());
    }

    #[test]
    fn view_graph_clusters() {
        let spec = GenSpec::View { n: 12, dim: 4, clusters: 2, spread: 0.05, temperature: 0.5, knn: Some(3), embeddings: None };
        let (g, labels) = spec.build(Some(1)).unwrap();
        let labels = labels.unwrap();
        let mut within = 0.0;
        let mut across = 0.0;
        g.for_each_edge(|i, j, w| if labels[i] == labels[j] { within += w } else { across += w });
        assert!(within > across);
    }
}

//! Seeded synthetic graphs.

use alloc::vec::Vec;

use super::{Graph, HardPartition, WeightMode};
use crate::error::invalid;
use crate::rng;
use crate::{Error, Result};

/// Planted-partition graph with contiguous blocks of (nearly) equal size.
///
/// Each pair `i < j` is joined with probability `p_in` inside a block and `p_out`
/// across blocks. Returned in ratio mode together with the planted labels.
pub fn generate_sbm(n: usize, k: usize, p_in: f64, p_out: f64, seed: u64) -> Result<(Graph, HardPartition)> {
    if k == 0 || k > n.max(1) {
        return Err(invalid("k", alloc::format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) || p_out > p_in {
        return Err(invalid("p_in/p_out", alloc::format!("need 0 <= p_out <= p_in <= 1, got {p_in}/{p_out}")));
    }
    let labels: Vec<usize> = (0..n).map(|i| i * k / n).collect();
    let mut rng = rng::stream(seed, 0);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            // Always draw so that the edge set for one probability does not shift the stream.
            let u = rng::unit(&mut rng);
            if u < p {
                edges.push((i, j, 1.0));
            }
        }
    }
    let g = Graph::from_edges(n, &edges, WeightMode::Ratio)?;
    Ok((g, HardPartition { labels, k }))
}

/// Disjoint unit-weight cliques of the given sizes, laid out contiguously.
pub fn disjoint_cliques(sizes: &[usize], mode: WeightMode) -> Graph {
    let mut edges = Vec::new();
    let mut start = 0;
    for &s in sizes {
        for i in start..start + s {
            for j in (i + 1)..start + s {
                edges.push((i, j, 1.0));
            }
        }
        start += s;
    }
    Graph::from_edges(start, &edges, mode).expect("clique edges are valid")
}

/// Unit-weight path `0 - 1 - ... - (n-1)`.
pub fn path_graph(n: usize, mode: WeightMode) -> Result<Graph> {
    let edges: Vec<(usize, usize, f64)> = (1..n).map(|i| (i - 1, i, 1.0)).collect();
    Graph::from_edges(n, &edges, mode)
}

/// Erdos–Renyi graph whose present edges carry weights uniform in `[w_lo, w_hi)`.
pub fn random_weighted(n: usize, density: f64, w_lo: f64, w_hi: f64, seed: u64, mode: WeightMode) -> Result<Graph> {
    if !(0.0..=1.0).contains(&density) {
        return Err(invalid("density", alloc::format!("must lie in [0, 1], got {density}")));
    }
    if !(0.0 <= w_lo && w_lo <= w_hi) {
        return Err(invalid("w_lo/w_hi", "need 0 <= w_lo <= w_hi"));
    }
    let mut rng = rng::stream(seed, 1);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let u = rng::unit(&mut rng);
            let w = rng::uniform(&mut rng, w_lo, w_hi);
            if u < density {
                edges.push((i, j, w));
            }
        }
    }
    Graph::from_edges(n, &edges, mode)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ViewMode {
    Dense,
    /// Keep each vertex's `k` most similar neighbours, then symmetrize by union.
    Knn(usize),
}

/// Similarity graph `W_ab = exp(<z_a, z_b> / temperature)` over embeddings.
pub fn build_view_graph(embeddings: &[Vec<f64>], temperature: f64, mode: ViewMode) -> Result<Graph> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(invalid("temperature", alloc::format!("must be positive, got {temperature}")));
    }
    let Some(first) = embeddings.first() else {
        return Err(invalid("embeddings", "must be nonempty"));
    };
    let dim = first.len();
    if let Some(e) = embeddings.iter().find(|e| e.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: e.len() });
    }
    let n = embeddings.len();
    let kernel = |a: usize, b: usize| {
        let dot: f64 = embeddings[a].iter().zip(&embeddings[b]).map(|(x, y)| x * y).sum();
        libm::exp(dot / temperature)
    };
    let mut edges = Vec::new();
    match mode {
        ViewMode::Dense => {
            for a in 0..n {
                for b in (a + 1)..n {
                    edges.push((a, b, kernel(a, b)));
                }
            }
        }
        ViewMode::Knn(k) => {
            let mut keep = alloc::vec![false; n * n];
            for a in 0..n {
                let mut sims: Vec<(f64, usize)> = (0..n).filter(|&b| b != a).map(|b| (kernel(a, b), b)).collect();
                // Largest similarity first; lower index wins ties.
                sims.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
                for &(_, b) in sims.iter().take(k) {
                    keep[a.min(b) * n + a.max(b)] = true;
                }
            }
            for a in 0..n {
                for b in (a + 1)..n {
                    if keep[a * n + b] {
                        edges.push((a, b, kernel(a, b)));
                    }
                }
            }
        }
    }
    Graph::from_edges(n, &edges, WeightMode::Ratio)
}

/// Uniformly random partition into `k` clusters whose sizes differ by at most one.
pub fn random_balanced_partition(n: usize, k: usize, seed: u64) -> Result<HardPartition> {
    if k == 0 {
        return Err(invalid("k", "must be at least 1"));
    }
    let mut r = rng::stream(seed, 2);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng::index(&mut r, i + 1);
        order.swap(i, j);
    }
    let mut labels = alloc::vec![0usize; n];
    for (pos, &v) in order.iter().enumerate() {
        labels[v] = pos % k;
    }
    Ok(HardPartition { labels, k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::graphcut_discrete;
    use alloc::vec;

    #[test]
    fn sbm_extremes() {
        let (g, part) = generate_sbm(9, 3, 1.0, 0.0, 1).unwrap();
        assert_eq!(g.total_weight(), 9.0);
        assert_eq!(graphcut_discrete(&g, &part).unwrap(), 0.0);
        let (g, _) = generate_sbm(9, 3, 0.0, 0.0, 1).unwrap();
        assert!(g.degrees().iter().all(|&d| d == 0.0));
        assert!(generate_sbm(9, 3, 0.2, 0.5, 1).is_err());
        assert!(generate_sbm(9, 0, 0.5, 0.2, 1).is_err());
    }

    #[test]
    fn sbm_is_seeded() {
        let a = generate_sbm(30, 2, 0.5, 0.1, 42).unwrap();
        let b = generate_sbm(30, 2, 0.5, 0.1, 42).unwrap();
        let c = generate_sbm(30, 2, 0.5, 0.1, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn view_graph_examples() {
        let e = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let g = build_view_graph(&e, 1.0, ViewMode::Dense).unwrap();
        assert!((g.weight(0, 1) - core::f64::consts::E).abs() < 1e-15);
        let e = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(build_view_graph(&e, 1.0, ViewMode::Dense).unwrap().weight(0, 1), 1.0);

        let s = libm::sqrt(0.5);
        let e = vec![vec![1.0, 0.0], vec![s, s], vec![0.0, 1.0]];
        let g1 = build_view_graph(&e, 1.0, ViewMode::Dense).unwrap();
        let g2 = build_view_graph(&e, 0.5, ViewMode::Dense).unwrap();
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let w = g1.weight(a, b);
            assert!((g2.weight(a, b) - w * w).abs() <= 1e-14 * w * w);
        }
        assert!(build_view_graph(&[vec![1.0], vec![1.0, 2.0]], 1.0, ViewMode::Dense).is_err());
        assert!(build_view_graph(&e, 0.0, ViewMode::Dense).is_err());
    }

    #[test]
    fn knn_view_graph_is_symmetric_union() {
        let e = vec![vec![1.0, 0.0], vec![0.9, 0.1], vec![0.0, 1.0], vec![0.1, 0.9]];
        let g = build_view_graph(&e, 1.0, ViewMode::Knn(1)).unwrap();
        assert!(g.weight(0, 1) > 0.0 && g.weight(2, 3) > 0.0);
        assert_eq!(g.weight(0, 2), 0.0);
        assert_eq!(g.weight(1, 0), g.weight(0, 1));
    }
}

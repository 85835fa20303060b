//! Weighted undirected graphs, hard and soft partitions, and the volume-normalized cut.

use alloc::vec::Vec;

use crate::error::invalid;
use crate::sum::NeumaierSum;
use crate::{Error, Result};

pub mod generators;

/// Largest vertex count stored as a dense matrix.
pub const DENSE_LIMIT: usize = 4096;
/// Largest vertex count accepted by [`expected_graphcut_exact`].
pub const EXACT_LIMIT: usize = 20;

/// Vertex weights `s` in the cut denominator.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum WeightMode {
    /// `s = 1`: RatioCut.
    #[default]
    Ratio,
    /// `s = degree`: Normalized Cut.
    Normalized,
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
enum Adjacency {
    /// Row-major `n x n`.
    Dense(Vec<f64>),
    /// Compressed rows, columns sorted within each row, zero weights omitted.
    Sparse {
        row_ptr: Vec<usize>,
        cols: Vec<usize>,
        vals: Vec<f64>,
    },
}

/// Symmetric nonnegative weights with zero diagonal. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    adj: Adjacency,
    degrees: Vec<f64>,
    mode: WeightMode,
    s: Vec<f64>,
}

impl Graph {
    /// Builds a graph from undirected edges `(i, j, w)`.
    ///
    /// An edge may be listed in either orientation and more than once as long as the
    /// weights agree; zero weights are allowed and dropped.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)], mode: WeightMode) -> Result<Self> {
        let mut list: Vec<(usize, usize, f64)> = Vec::with_capacity(edges.len());
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidGraph(alloc::format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                return Err(Error::InvalidGraph(alloc::format!("diagonal entry at vertex {i}")));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidGraph(alloc::format!("edge ({i}, {j}) has invalid weight {w}")));
            }
            list.push((i.min(j), i.max(j), w));
        }
        list.sort_by_key(|a| (a.0, a.1));
        let mut dedup: Vec<(usize, usize, f64)> = Vec::with_capacity(list.len());
        for e in list {
            match dedup.last() {
                Some(last) if (last.0, last.1) == (e.0, e.1) => {
                    if last.2 != e.2 {
                        return Err(Error::InvalidGraph(alloc::format!(
                            "edge ({}, {}) listed with conflicting weights {} and {}",
                            e.0,
                            e.1,
                            last.2,
                            e.2
                        )));
                    }
                }
                _ => dedup.push(e),
            }
        }
        dedup.retain(|e| e.2 > 0.0);

        let adj = if n <= DENSE_LIMIT {
            let mut w = alloc::vec![0.0; n * n];
            for &(i, j, x) in &dedup {
                w[i * n + j] = x;
                w[j * n + i] = x;
            }
            Adjacency::Dense(w)
        } else {
            let mut counts = alloc::vec![0usize; n + 1];
            for &(i, j, _) in &dedup {
                counts[i + 1] += 1;
                counts[j + 1] += 1;
            }
            for k in 0..n {
                counts[k + 1] += counts[k];
            }
            let row_ptr = counts.clone();
            let mut fill = counts;
            let mut cols = alloc::vec![0usize; row_ptr[n]];
            let mut vals = alloc::vec![0.0; row_ptr[n]];
            for &(i, j, x) in &dedup {
                for (a, b) in [(i, j), (j, i)] {
                    cols[fill[a]] = b;
                    vals[fill[a]] = x;
                    fill[a] += 1;
                }
            }
            for r in 0..n {
                let (lo, hi) = (row_ptr[r], row_ptr[r + 1]);
                let mut row: Vec<(usize, f64)> = cols[lo..hi].iter().copied().zip(vals[lo..hi].iter().copied()).collect();
                row.sort_by_key(|e| e.0);
                for (k, (c, v)) in row.into_iter().enumerate() {
                    cols[lo + k] = c;
                    vals[lo + k] = v;
                }
            }
            Adjacency::Sparse { row_ptr, cols, vals }
        };
        Self::assemble(n, adj, mode)
    }

    /// Builds a graph from a row-major dense matrix, checking symmetry and the diagonal.
    pub fn from_dense(n: usize, w: Vec<f64>, mode: WeightMode) -> Result<Self> {
        if w.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: w.len() });
        }
        let mut edges = Vec::new();
        for i in 0..n {
            if w[i * n + i] != 0.0 {
                return Err(Error::InvalidGraph(alloc::format!("diagonal entry at vertex {i}")));
            }
            for j in (i + 1)..n {
                if w[i * n + j] != w[j * n + i] {
                    return Err(Error::InvalidGraph(alloc::format!("asymmetric weights at ({i}, {j})")));
                }
                edges.push((i, j, w[i * n + j]));
            }
        }
        Self::from_edges(n, &edges, mode)
    }

    fn assemble(n: usize, adj: Adjacency, mode: WeightMode) -> Result<Self> {
        let mut g = Self { n, adj, degrees: Vec::new(), mode: WeightMode::Ratio, s: Vec::new() };
        g.degrees = (0..n)
            .map(|i| {
                let mut d = NeumaierSum::new();
                g.for_each_neighbor(i, |_, w| d.add(w));
                d.value()
            })
            .collect();
        g.set_mode(mode)?;
        Ok(g)
    }

    fn set_mode(&mut self, mode: WeightMode) -> Result<()> {
        self.s = match &mode {
            WeightMode::Ratio => alloc::vec![1.0; self.n],
            WeightMode::Normalized => {
                if let Some(i) = self.degrees.iter().position(|&d| !(d > 0.0)) {
                    return Err(Error::IsolatedVertex(i));
                }
                self.degrees.clone()
            }
            WeightMode::Custom(s) => {
                if s.len() != self.n {
                    return Err(Error::DimensionMismatch { expected: self.n, got: s.len() });
                }
                if let Some(x) = s.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
                    return Err(invalid("s", alloc::format!("custom vertex weights must be positive, got {x}")));
                }
                s.clone()
            }
        };
        self.mode = mode;
        Ok(())
    }

    /// Same edges under a different vertex-weight mode.
    pub fn with_mode(&self, mode: WeightMode) -> Result<Self> {
        let mut g = self.clone();
        g.set_mode(mode)?;
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> &WeightMode {
        &self.mode
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Vertex weights `s`.
    pub fn vertex_weights(&self) -> &[f64] {
        &self.s
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.adj, Adjacency::Dense(_))
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        match &self.adj {
            Adjacency::Dense(w) => w[i * self.n + j],
            Adjacency::Sparse { row_ptr, cols, vals } => {
                let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
                match cols[lo..hi].binary_search(&j) {
                    Ok(k) => vals[lo + k],
                    Err(_) => 0.0,
                }
            }
        }
    }

    /// Calls `f(j, w)` for every neighbour `j` of `i` with `w > 0`, in increasing `j`.
    pub fn for_each_neighbor<F: FnMut(usize, f64)>(&self, i: usize, mut f: F) {
        match &self.adj {
            Adjacency::Dense(w) => {
                for (j, &x) in w[i * self.n..(i + 1) * self.n].iter().enumerate() {
                    if x != 0.0 {
                        f(j, x);
                    }
                }
            }
            Adjacency::Sparse { row_ptr, cols, vals } => {
                for k in row_ptr[i]..row_ptr[i + 1] {
                    f(cols[k], vals[k]);
                }
            }
        }
    }

    /// Calls `f(i, j, w)` once per undirected edge, with `i < j`.
    pub fn for_each_edge<F: FnMut(usize, usize, f64)>(&self, mut f: F) {
        for i in 0..self.n {
            self.for_each_neighbor(i, |j, w| {
                if i < j {
                    f(i, j, w)
                }
            });
        }
    }

    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        self.for_each_edge(|i, j, w| out.push((i, j, w)));
        out
    }

    pub fn total_weight(&self) -> f64 {
        let mut s = NeumaierSum::new();
        self.for_each_edge(|_, _, w| s.add(w));
        s.value()
    }

    /// Graph induced on `vertices` (in the given order); vertex weights are carried
    /// over as custom weights so the cut denominators keep their original scale.
    pub fn induced(&self, vertices: &[usize]) -> Result<Self> {
        let mut pos = alloc::vec![usize::MAX; self.n];
        for (k, &v) in vertices.iter().enumerate() {
            if v >= self.n {
                return Err(invalid("vertices", alloc::format!("vertex {v} out of range")));
            }
            pos[v] = k;
        }
        let mut edges = Vec::new();
        for (a, &v) in vertices.iter().enumerate() {
            self.for_each_neighbor(v, |u, w| {
                let b = pos[u];
                if b != usize::MAX && a < b {
                    edges.push((a, b, w));
                }
            });
        }
        let s: Vec<f64> = vertices.iter().map(|&v| self.s[v]).collect();
        Self::from_edges(vertices.len(), &edges, WeightMode::Custom(s))
    }
}

/// Hard cluster labels in `0..k`; clusters may be empty.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HardPartition {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl HardPartition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&l) = labels.iter().find(|&&l| l >= k) {
            return Err(invalid("labels", alloc::format!("label {l} not below k = {k}")));
        }
        Ok(Self { labels, k })
    }

    pub fn mask(&self, ell: usize) -> Vec<bool> {
        self.labels.iter().map(|&l| l == ell).collect()
    }
}

/// Row-stochastic `n x k` matrix of soft assignments, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentMatrix {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl AssignmentMatrix {
    pub fn new(n: usize, k: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * k {
            return Err(Error::DimensionMismatch { expected: n * k, got: data.len() });
        }
        if k == 0 {
            return Err(invalid("k", "must be at least 1"));
        }
        for i in 0..n {
            let row = &data[i * k..(i + 1) * k];
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(invalid("P", alloc::format!("row {i} has entries outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(invalid("P", alloc::format!("row {i} sums to {s}")));
            }
        }
        Ok(Self { n, k, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(1, |r| r.len());
        if let Some(r) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::DimensionMismatch { expected: k, got: r.len() });
        }
        Self::new(rows.len(), k, rows.concat())
    }

    /// One-hot rows of a hard partition.
    pub fn from_partition(part: &HardPartition) -> Self {
        let (n, k) = (part.labels.len(), part.k);
        let mut data = alloc::vec![0.0; n * k];
        for (i, &l) in part.labels.iter().enumerate() {
            data[i * k + l] = 1.0;
        }
        Self { n, k, data }
    }

    /// Skips validation; used for softmax outputs that are stochastic by construction.
    pub(crate) fn from_raw(n: usize, k: usize, data: Vec<f64>) -> Self {
        Self { n, k, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, ell: usize) -> f64 {
        self.data[i * self.k + ell]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, ell: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, ell)).collect()
    }

    /// Per-row argmax, lowest index on ties.
    pub fn argmax(&self) -> HardPartition {
        let labels = (0..self.n)
            .map(|i| {
                let row = self.row(i);
                let mut best = 0;
                for (l, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = l;
                    }
                }
                best
            })
            .collect();
        HardPartition { labels, k: self.k }
    }
}

/// `1_A^T W 1_{not A}`.
pub fn cut_value(g: &Graph, subset: &[bool]) -> f64 {
    let mut acc = NeumaierSum::new();
    for i in 0..g.n() {
        if subset[i] {
            g.for_each_neighbor(i, |j, w| {
                if !subset[j] {
                    acc.add(w);
                }
            });
        }
    }
    acc.value()
}

/// `sum_{i in A} s_i`.
pub fn volume(g: &Graph, subset: &[bool]) -> f64 {
    g.vertex_weights()
        .iter()
        .zip(subset)
        .filter(|(_, &m)| m)
        .map(|(s, _)| *s)
        .collect::<NeumaierSum>()
        .value()
}

/// `cut(A) / vol(A)`, with `vcut(empty) = 0`.
pub fn vcut(g: &Graph, subset: &[bool]) -> f64 {
    let cut = cut_value(g, subset);
    if cut == 0.0 {
        return 0.0;
    }
    cut / volume(g, subset)
}

/// `1/2 sum_l cut(C_l) / vol(C_l)`; empty clusters contribute 0.
pub fn graphcut_discrete(g: &Graph, part: &HardPartition) -> Result<f64> {
    if part.labels.len() != g.n() {
        return Err(Error::DimensionMismatch { expected: g.n(), got: part.labels.len() });
    }
    let mut acc = NeumaierSum::new();
    for ell in 0..part.k {
        acc.add(vcut(g, &part.mask(ell)));
    }
    Ok(0.5 * acc.value())
}

/// `E[vcut(a)]` for independent `a_i ~ Bernoulli(p_i)`, by enumeration of the
/// non-deterministic coordinates.
pub fn expected_vcut_exact(g: &Graph, p: &[f64]) -> Result<f64> {
    let n = g.n();
    if p.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: p.len() });
    }
    let free: Vec<usize> = (0..n).filter(|&i| p[i] > 0.0 && p[i] < 1.0).collect();
    if free.len() > EXACT_LIMIT {
        return Err(Error::TooLarge { size: free.len(), limit: EXACT_LIMIT });
    }
    let mut mask: Vec<bool> = p.iter().map(|&x| x >= 1.0).collect();
    if free.is_empty() {
        return Ok(vcut(g, &mask));
    }
    let s = g.vertex_weights();
    let cut0 = cut_value(g, &mask);
    let vol0 = volume(g, &mask);

    struct Walk<'a> {
        g: &'a Graph,
        p: &'a [f64],
        s: &'a [f64],
        free: &'a [usize],
        acc: NeumaierSum,
    }

    impl Walk<'_> {
        fn go(&mut self, depth: usize, mask: &mut [bool], prob: f64, cut: f64, vol: f64) {
            if prob == 0.0 {
                return;
            }
            if depth == self.free.len() {
                if cut != 0.0 {
                    self.acc.add(prob * cut / vol);
                }
                return;
            }
            let v = self.free[depth];
            let pv = self.p[v];
            self.go(depth + 1, mask, prob * (1.0 - pv), cut, vol);
            // Adding v: its edges to outside join the cut, its edges to inside leave it.
            let mut inside = 0.0;
            self.g.for_each_neighbor(v, |u, w| {
                if mask[u] {
                    inside += w;
                }
            });
            let new_cut = cut + self.g.degrees()[v] - 2.0 * inside;
            mask[v] = true;
            self.go(depth + 1, mask, prob * pv, new_cut.max(0.0), vol + self.s[v]);
            mask[v] = false;
        }
    }

    let mut walk = Walk { g, p, s, free: &free, acc: NeumaierSum::new() };
    walk.go(0, &mut mask, 1.0, cut0, vol0);
    Ok(walk.acc.value())
}

/// `1/2 sum_l E[vcut(a_l)]` by per-cluster enumeration (`n <= 20`).
pub fn expected_graphcut_exact(g: &Graph, p: &AssignmentMatrix) -> Result<f64> {
    if p.n() != g.n() {
        return Err(Error::DimensionMismatch { expected: g.n(), got: p.n() });
    }
    if g.n() > EXACT_LIMIT {
        return Err(Error::TooLarge { size: g.n(), limit: EXACT_LIMIT });
    }
    let mut acc = NeumaierSum::new();
    for ell in 0..p.k() {
        acc.add(expected_vcut_exact(g, &p.column(ell))?);
    }
    Ok(0.5 * acc.value())
}

/// Adjusted Rand index between two labelings of the same vertices.
///
/// Returns 1 for identical partitions (up to relabeling) and about 0 for independent
/// ones. Two single-cluster labelings count as identical.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    let n = a.len();
    let ka = a.iter().copied().max().map_or(0, |x| x + 1);
    let kb = b.iter().copied().max().map_or(0, |x| x + 1);
    let mut table = alloc::vec![0u64; ka * kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x * kb + y] += 1;
    }
    let pairs = |c: u64| (c * c.saturating_sub(1) / 2) as f64;
    let sum_cells: f64 = table.iter().map(|&c| pairs(c)).sum();
    let sum_a: f64 = (0..ka).map(|x| pairs((0..kb).map(|y| table[x * kb + y]).sum())).sum();
    let sum_b: f64 = (0..kb).map(|y| pairs((0..ka).map(|x| table[x * kb + y]).sum())).sum();
    let total = pairs(n as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return Ok(1.0);
    }
    Ok((sum_cells - expected) / (max - expected))
}

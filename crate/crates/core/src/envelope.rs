//! Closed-form upper bounds on `I(q, alpha, beta)`.
//!
//! * [`h_envelope`]: common weight `beta`, `H = (1/q) 2F1(-m, 1; q/beta + 1; mean alpha)`.
//! * [`holder_bound`]: heterogeneous weights grouped into bins; geometric mean of
//!   per-bin envelopes evaluated at each bin's smallest weight.
//! * [`decoupled_q_bound`]: a looser bound whose `q`-dependence is a single prefactor.
//! * [`relaxed_c2_bound`]: the Holder product with `c` lowered to 2 (see its docs: this
//!   one sits *below* the Holder bound).
//! * [`prcut_baseline_bound`]: the older ratio-cut bound, kept as a baseline.

use alloc::vec::Vec;

use crate::error::invalid;
use crate::graph::Graph;
use crate::hypergeom::{f21_neg_int, F21Params};
use crate::sum::NeumaierSum;
use crate::{Error, Result};

/// `H_beta(q; alpha_bar, m) = (1/q) 2F1(-m, 1; q/beta + 1; alpha_bar)`.
pub fn h_envelope(q: f64, beta: f64, alpha_bar: f64, m: usize) -> Result<f64> {
    check_q_beta(q, beta)?;
    let c = q / beta + 1.0;
    Ok(f21_neg_int(F21Params::new(m, 1.0, c, alpha_bar))?.value / q)
}

/// `dH/d(alpha_bar) = (1/q) (-m/c) 2F1(-m+1, 2; c+1; alpha_bar)`; never positive.
pub fn h_envelope_grad(q: f64, beta: f64, alpha_bar: f64, m: usize) -> Result<f64> {
    check_q_beta(q, beta)?;
    if m == 0 {
        F21Params::new(0, 1.0, 1.0, alpha_bar).validate()?;
        return Ok(0.0);
    }
    let c = q / beta + 1.0;
    let f2 = f21_neg_int(F21Params::new(m - 1, 2.0, c + 1.0, alpha_bar))?.value;
    Ok(-(m as f64) / (q * c) * f2)
}

fn check_q_beta(q: f64, beta: f64) -> Result<()> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(invalid("q", alloc::format!("must be positive, got {q}")));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(invalid("beta", alloc::format!("must be positive, got {beta}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BinStrategy {
    EqualWidth,
    EqualCount,
    DistinctValues,
}

/// Disjoint bins over indices, grouped by weight.
///
/// Representatives are in-bin minima, so replacing every weight by its bin's
/// representative can only shrink `x` and the envelope stays an upper bound.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BinPartition {
    /// `d + 1` strictly increasing boundaries: bin minima followed by the overall maximum.
    pub edges: Vec<f64>,
    pub representatives: Vec<f64>,
    pub membership: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl BinPartition {
    pub fn bin_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn len(&self) -> usize {
        self.membership.len()
    }

    pub fn is_empty(&self) -> bool {
        self.membership.is_empty()
    }

    /// `m_j / m`.
    pub fn weights(&self) -> Vec<f64> {
        let m = self.len() as f64;
        self.sizes.iter().map(|&s| s as f64 / m).collect()
    }

    /// Per-bin means of `values` (one entry per index).
    pub fn bin_means(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: values.len(),
            });
        }
        let mut sums: Vec<NeumaierSum> = (0..self.bin_count()).map(|_| NeumaierSum::new()).collect();
        for (v, &b) in values.iter().zip(&self.membership) {
            sums[b].add(*v);
        }
        Ok(sums
            .iter()
            .zip(&self.sizes)
            .map(|(s, &n)| s.value() / n as f64)
            .collect())
    }

    /// Members of each bin, in index order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (i, &b) in self.membership.iter().enumerate() {
            out[b].push(i);
        }
        out
    }

    /// Builds a partition from explicit bin ids, dropping empty bins and
    /// renumbering the rest in order of increasing minimum.
    pub fn from_labels(values: &[f64], labels: &[usize]) -> Result<Self> {
        if values.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                got: labels.len(),
            });
        }
        if values.is_empty() {
            return Err(invalid("betas", "must be nonempty"));
        }
        let nb = labels.iter().copied().max().unwrap_or(0) + 1;
        let mut mins = alloc::vec![f64::INFINITY; nb];
        let mut sizes = alloc::vec![0usize; nb];
        for (&v, &l) in values.iter().zip(labels) {
            mins[l] = mins[l].min(v);
            sizes[l] += 1;
        }
        let mut order: Vec<usize> = (0..nb).filter(|&b| sizes[b] > 0).collect();
        order.sort_by(|&a, &b| mins[a].total_cmp(&mins[b]).then(a.cmp(&b)));
        let mut remap = alloc::vec![usize::MAX; nb];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let representatives: Vec<f64> = order.iter().map(|&b| mins[b]).collect();
        let mut edges = representatives.clone();
        edges.push(max);
        Ok(Self {
            edges,
            representatives,
            membership: labels.iter().map(|&l| remap[l]).collect(),
            sizes: order.iter().map(|&b| sizes[b]).collect(),
        })
    }

    /// Checks that every representative is at most the weights of its members.
    pub fn check_against(&self, betas: &[f64]) -> Result<()> {
        if betas.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: betas.len(),
            });
        }
        for (i, (&b, &j)) in betas.iter().zip(&self.membership).enumerate() {
            if self.representatives[j] > b {
                return Err(invalid(
                    "partition",
                    alloc::format!("representative {} of bin {j} exceeds weight {b} of index {i}", self.representatives[j]),
                ));
            }
        }
        if let Some(j) = self.sizes.iter().position(|&s| s == 0) {
            return Err(Error::EmptyBin(j));
        }
        Ok(())
    }
}

/// Groups `betas` into at most `d` bins.
///
/// `EqualCount` never separates tied values, `EqualWidth` splits `[min, max]` into `d`
/// equal intervals, and `DistinctValues` requires `d <= #distinct` and merges runs of
/// adjacent distinct values when `d` is smaller. Empty bins are dropped.
pub fn make_bins(betas: &[f64], d: usize, strategy: BinStrategy) -> Result<BinPartition> {
    if d == 0 {
        return Err(invalid("d", "must be at least 1"));
    }
    if betas.is_empty() {
        return Err(invalid("betas", "must be nonempty"));
    }
    if let Some(b) = betas.iter().find(|b| !b.is_finite()) {
        return Err(invalid("betas", alloc::format!("entry {b} is not finite")));
    }
    let m = betas.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| betas[a].total_cmp(&betas[b]));

    let mut labels = alloc::vec![0usize; m];
    match strategy {
        BinStrategy::EqualWidth => {
            let lo = betas[order[0]];
            let hi = betas[order[m - 1]];
            let width = (hi - lo) / d as f64;
            for (i, &b) in betas.iter().enumerate() {
                labels[i] = if width > 0.0 {
                    (libm::floor((b - lo) / width) as usize).min(d - 1)
                } else {
                    0
                };
            }
        }
        BinStrategy::EqualCount => {
            // Target boundary after every ceil-balanced chunk, pushed forward past ties.
            let mut bin = 0usize;
            let mut start = 0usize;
            let mut pos = 0usize;
            while pos < m {
                let remaining_bins = d - bin;
                let target = start + (m - start).div_ceil(remaining_bins);
                let mut end = target.min(m);
                while end < m && betas[order[end]] == betas[order[end - 1]] {
                    end += 1;
                }
                for &i in &order[pos..end] {
                    labels[i] = bin;
                }
                pos = end;
                start = end;
                if bin + 1 < d {
                    bin += 1;
                }
            }
        }
        BinStrategy::DistinctValues => {
            let mut groups: Vec<Vec<usize>> = Vec::new();
            for &i in &order {
                match groups.last_mut() {
                    Some(g) if betas[g[0]] == betas[i] => g.push(i),
                    _ => groups.push(alloc::vec![i]),
                }
            }
            let nd = groups.len();
            if d > nd {
                return Err(invalid(
                    "d",
                    alloc::format!("{d} bins requested but only {nd} distinct values"),
                ));
            }
            // Merge consecutive distinct values into d nearly equal runs.
            for (g, members) in groups.iter().enumerate() {
                let bin = g * d / nd;
                for &i in members {
                    labels[i] = bin;
                }
            }
        }
    }
    BinPartition::from_labels(betas, &labels)
}

/// Distinct values when there are at most 32 of them, otherwise 8 equal-count bins.
pub fn default_bins(betas: &[f64]) -> Result<BinPartition> {
    let mut sorted = betas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() <= 32 {
        make_bins(betas, sorted.len().max(1), BinStrategy::DistinctValues)
    } else {
        make_bins(betas, 8, BinStrategy::EqualCount)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeValue {
    pub value: f64,
    pub log_value: f64,
    pub per_bin_h: Vec<f64>,
    /// `dH_j / d(alpha_bar_j)` for each bin.
    pub per_bin_h_prime: Vec<f64>,
}

/// `prod_j H_{beta*_j}(q; alpha_bar_j, m)^(m_j/m)`, accumulated as a sum of logs.
///
/// The inner degree is the full `m` in every factor.
pub fn holder_bound(q: f64, alphas: &[f64], betas: &[f64], partition: &BinPartition) -> Result<EnvelopeValue> {
    partition.check_against(betas)?;
    let m = alphas.len();
    let means = partition.bin_means(alphas)?;
    let weights = partition.weights();
    let mut per_bin_h = Vec::with_capacity(means.len());
    let mut per_bin_h_prime = Vec::with_capacity(means.len());
    let mut log_sum = NeumaierSum::new();
    for ((&beta, &mean), &w) in partition.representatives.iter().zip(&means).zip(&weights) {
        let h = h_envelope(q, beta, mean, m)?;
        if !(h > 0.0) {
            return Err(Error::Degenerate(alloc::format!("envelope {h} is not positive")));
        }
        per_bin_h.push(h);
        per_bin_h_prime.push(h_envelope_grad(q, beta, mean, m)?);
        log_sum.add(w * libm::log(h));
    }
    let log_value = log_sum.value();
    let value = if per_bin_h.len() == 1 {
        per_bin_h[0]
    } else {
        libm::exp(log_value)
    };
    Ok(EnvelopeValue {
        value,
        log_value,
        per_bin_h,
        per_bin_h_prime,
    })
}

/// Holder product with every hypergeometric denominator lowered to `c = 2`.
///
/// Requires `q >= beta*_j` for all bins; the offending bins are reported otherwise.
///
/// Note that `2F1(-m, 1; c; z) = E[(c-1)/(c-1+K)]` with `K ~ Bin(m, z)` is
/// *increasing* in `c`, so lowering every `c_j` to 2 gives a value at or below
/// [`holder_bound`]. It is therefore not an upper bound on `I` in general
/// (all `alpha = 1`, `beta = 1`, `q = 5`, `m = 3`: `I = 1/8`, this value `1/20`).
pub fn relaxed_c2_bound(q: f64, alphas: &[f64], partition: &BinPartition) -> Result<f64> {
    check_q_beta(q, 1.0)?;
    let bad: Vec<usize> = partition
        .representatives
        .iter()
        .enumerate()
        .filter(|(_, &b)| q < b)
        .map(|(j, _)| j)
        .collect();
    if !bad.is_empty() {
        return Err(Error::RelaxedPrecondition(bad));
    }
    let m = alphas.len();
    let means = partition.bin_means(alphas)?;
    let mut log_sum = NeumaierSum::new();
    for (&mean, &w) in means.iter().zip(&partition.weights()) {
        let f = f21_neg_int(F21Params::new(m, 1.0, 2.0, mean))?.value;
        log_sum.add(w * libm::log(f / q));
    }
    Ok(libm::exp(log_sum.value()))
}

/// `max(1, 1/q) prod_j 2F1(-m, 1; 1/beta*_j + 1; alpha_bar_j)^(m_j/m)`, valid for all `q > 0`.
pub fn decoupled_q_bound(q: f64, alphas: &[f64], betas: &[f64], partition: &BinPartition) -> Result<f64> {
    check_q_beta(q, 1.0)?;
    partition.check_against(betas)?;
    let m = alphas.len();
    let means = partition.bin_means(alphas)?;
    let mut log_sum = NeumaierSum::new();
    for ((&beta, &mean), &w) in partition.representatives.iter().zip(&means).zip(&partition.weights()) {
        let f = f21_neg_int(F21Params::new(m, 1.0, 1.0 / beta + 1.0, mean))?.value;
        log_sum.add(w * libm::log(f));
    }
    Ok((1.0f64).max(1.0 / q) * libm::exp(log_sum.value()))
}

/// Reciprocal-mean bound `E[1/(1+x)] <= 1/sum(alpha)` used by the ratio-cut baseline
/// (unit offset and unit weights only).
pub fn prcut_reciprocal_bound(alphas: &[f64]) -> Result<f64> {
    let s: f64 = alphas.iter().sum();
    if !(s > 0.0) {
        return Err(Error::DivisionByZero("sum of alphas"));
    }
    Ok(1.0 / s)
}

/// Ratio-cut baseline `(1/(n mean(p))) sum_{i,j} W_ij (p_i + p_j - 2 p_i p_j)`,
/// summed over both orders of every pair.
pub fn prcut_baseline_bound(g: &Graph, p: &[f64]) -> Result<f64> {
    if p.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: p.len(),
        });
    }
    let total: f64 = p.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DivisionByZero("column mean of P"));
    }
    let mut acc = NeumaierSum::new();
    g.for_each_edge(|i, j, w| {
        // Each undirected edge stands for (i, j) and (j, i); the summand is symmetric.
        acc.add(2.0 * w * (p[i] + p[j] - 2.0 * p[i] * p[j]));
    });
    // n * mean(p) = sum(p)
    Ok(acc.value() / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpb::{expected_reciprocal_exact, GpbInstance};
    use alloc::vec;

    #[test]
    fn h_envelope_examples() {
        assert_eq!(h_envelope(4.0, 2.3, 0.0, 17).unwrap(), 0.25);
        assert!((h_envelope(1.0, 1.0, 1.0, 3).unwrap() - 0.25).abs() < 1e-15);
        let h = h_envelope(1.0, 1.0, 0.5, 2).unwrap();
        assert!((h - 7.0 / 12.0).abs() < 1e-15);
        let i = expected_reciprocal_exact(&GpbInstance::common_beta(1.0, vec![0.2, 0.8], 1.0).unwrap()).unwrap();
        assert!(h >= i.value);
    }

    #[test]
    fn h_envelope_grad_examples() {
        let (q, beta, m) = (2.0, 0.5, 7usize);
        let g = h_envelope_grad(q, beta, 0.0, m).unwrap();
        assert!((g + m as f64 * beta / (q * (q + beta))).abs() < 1e-15);
        assert_eq!(h_envelope_grad(1.0, 1.0, 0.3, 0).unwrap(), 0.0);
        let h = 1e-5;
        let fd = (h_envelope(1.0, 1.0, 0.4 + h, 5).unwrap() - h_envelope(1.0, 1.0, 0.4 - h, 5).unwrap()) / (2.0 * h);
        let g = h_envelope_grad(1.0, 1.0, 0.4, 5).unwrap();
        assert!((fd - g).abs() <= 1e-7 * g.abs());
    }

    #[test]
    fn bins_examples() {
        let p = make_bins(&[2.0; 5], 1, BinStrategy::EqualCount).unwrap();
        assert_eq!(p.sizes, vec![5]);
        assert_eq!(p.representatives, vec![2.0]);

        let p = make_bins(&[1.0, 2.0, 1.0, 2.0], 2, BinStrategy::DistinctValues).unwrap();
        assert_eq!(p.sizes, vec![2, 2]);
        assert_eq!(p.representatives, vec![1.0, 2.0]);
        assert_eq!(p.membership, vec![0, 1, 0, 1]);

        assert!(make_bins(&[1.0, 2.0], 3, BinStrategy::DistinctValues).is_err());
        assert!(make_bins(&[1.0, 2.0], 0, BinStrategy::EqualCount).is_err());
        assert!(make_bins(&[], 1, BinStrategy::EqualCount).is_err());
    }

    #[test]
    fn equal_count_keeps_ties_together() {
        let betas = [1.0, 1.0, 1.0, 1.0, 2.0, 3.0];
        let p = make_bins(&betas, 3, BinStrategy::EqualCount).unwrap();
        assert_eq!(p.membership[0..4], [0, 0, 0, 0]);
        p.check_against(&betas).unwrap();
    }

    #[test]
    fn equal_width_drops_empty_bins() {
        let betas = [1.0, 1.1, 9.9, 10.0];
        let p = make_bins(&betas, 5, BinStrategy::EqualWidth).unwrap();
        assert_eq!(p.bin_count(), 2);
        assert!(p.edges.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn holder_single_bin_is_h_envelope() {
        let alphas = [0.1, 0.5, 0.7];
        let betas = [1.5, 2.0, 2.5];
        let part = make_bins(&betas, 1, BinStrategy::EqualCount).unwrap();
        let e = holder_bound(2.0, &alphas, &betas, &part).unwrap();
        let h = h_envelope(2.0, 1.5, (0.1 + 0.5 + 0.7) / 3.0, 3).unwrap();
        assert_eq!(e.value, h);
        assert!((libm::exp(e.log_value) - h).abs() <= 1e-15 * h);
    }

    #[test]
    fn holder_all_zero_alphas() {
        let betas = [1.0, 1.0, 3.0, 3.0];
        let part = make_bins(&betas, 2, BinStrategy::DistinctValues).unwrap();
        let e = holder_bound(2.5, &[0.0; 4], &betas, &part).unwrap();
        assert!((e.value - 0.4).abs() < 1e-15);
    }

    #[test]
    fn holder_dominates_enumeration() {
        let alphas = vec![0.13, 0.77, 0.4, 0.91, 0.05, 0.6];
        let betas = vec![1.0, 1.0, 1.0, 3.0, 3.0, 3.0];
        let part = make_bins(&betas, 2, BinStrategy::DistinctValues).unwrap();
        let e = holder_bound(1.0, &alphas, &betas, &part).unwrap();
        let i = expected_reciprocal_exact(&GpbInstance::new(1.0, alphas, betas).unwrap()).unwrap();
        assert!(e.value >= i.value);
    }

    #[test]
    fn relaxed_examples() {
        let alphas = [0.3, 0.6, 0.2, 0.9];
        let betas = [1.0, 1.0, 2.0, 2.0];
        let part = make_bins(&betas, 2, BinStrategy::DistinctValues).unwrap();
        assert!(matches!(relaxed_c2_bound(1.5, &alphas, &part), Err(Error::RelaxedPrecondition(v)) if v == vec![1]));
        let r = relaxed_c2_bound(5.0, &alphas, &part).unwrap();
        let h = holder_bound(5.0, &alphas, &betas, &part).unwrap().value;
        // c_j >= 2 and the polynomial grows with c, so the relaxed product is the smaller one.
        assert!(r <= h);

        let single = make_bins(&[1.0; 3], 1, BinStrategy::EqualCount).unwrap();
        assert!((relaxed_c2_bound(1.0, &[1.0; 3], &single).unwrap() - 0.25).abs() < 1e-15);
        let h = holder_bound(1.0, &[0.2, 0.5, 0.9], &[1.0; 3], &single).unwrap().value;
        let r = relaxed_c2_bound(1.0, &[0.2, 0.5, 0.9], &single).unwrap();
        assert!((h - r).abs() <= 1e-15 * h);
    }

    #[test]
    fn decoupled_examples() {
        let alphas = [0.3, 0.6, 0.2, 0.9, 0.5, 0.1, 0.7, 0.4];
        let betas = [1.0, 1.0, 2.0, 2.0, 0.5, 0.5, 1.0, 2.0];
        let part = make_bins(&betas, 3, BinStrategy::DistinctValues).unwrap();
        let one = decoupled_q_bound(1.0, &alphas, &betas, &part).unwrap();
        let holder_one = holder_bound(1.0, &alphas, &betas, &part).unwrap().value;
        assert!((one - holder_one).abs() <= 1e-14 * one);
        let half = decoupled_q_bound(0.5, &alphas, &betas, &part).unwrap();
        assert_eq!(half, 2.0 * one);
        let i = expected_reciprocal_exact(&GpbInstance::new(3.0, alphas.to_vec(), betas.to_vec()).unwrap()).unwrap();
        assert!(decoupled_q_bound(3.0, &alphas, &betas, &part).unwrap() >= i.value);
    }

    #[test]
    fn prcut_examples() {
        let g = Graph::from_edges(2, &[(0, 1, 1.0)], crate::graph::WeightMode::Ratio).unwrap();
        assert!((prcut_baseline_bound(&g, &[0.5, 0.5]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(prcut_baseline_bound(&g, &[1.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(prcut_baseline_bound(&g, &[0.0, 0.0]), Err(Error::DivisionByZero(_))));
        let tri = crate::graph::generators::disjoint_cliques(&[3, 3], crate::graph::WeightMode::Ratio);
        assert_eq!(prcut_baseline_bound(&tri, &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
    }
}

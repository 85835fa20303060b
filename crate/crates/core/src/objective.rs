//! The trainable surrogate `J = U + rho * Gamma` for the expected volume-normalized cut.
//!
//! For a soft assignment `P` (rows on the simplex) and cluster `l`:
//!
//! * `M_il = P_il sum_j W_ij (1 - P_jl)` is the expected cut mass leaving `i`;
//! * `Phi_l(q) = prod_b H_{beta*_b}(q; pbar_lb, n)^(m_b/n)` is the Holder envelope over
//!   bins of vertex weights, evaluated at the per-bin means of column `l`;
//! * `U = sum_l sum_i M_il Phi_l(q_i)` with `q_i` the vertex weight of `i` (or its bin
//!   minimum);
//! * `Gamma = sum_l sum_i M_il sum_b w_b (n/2) Var^omega_lb C_b(q_i)` with `C` a second
//!   difference of the envelope.
//!
//! With [`MeanField::LeaveTwoOut`] the envelope of each ordered edge `(i, j)` is
//! evaluated at bin means that exclude `i` and `j`, which makes `U` a certified upper
//! bound on `sum_l E[vcut_l]`. [`MeanField::Full`] reuses one set of means for all edges,
//! which is O(1) per edge but can undershoot at small `n`.

// Per-bin loops index several parallel arrays at once.
#![allow(clippy::needless_range_loop)]

use alloc::vec::Vec;

use crate::envelope::{default_bins, h_envelope, h_envelope_grad, make_bins, BinPartition, BinStrategy};
use crate::error::invalid;
use crate::gap::{kernel_value_grad, stats_grad_at, weighted_stats, GapKind, KernelChoice, OmegaSpec, ZeroAwareStats};
use crate::graph::{AssignmentMatrix, Graph};
use crate::sum::NeumaierSum;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum QBinning {
    /// `q_i = s_i`.
    PerVertex,
    /// `q_i` = smallest vertex weight in the bin of `i`.
    #[default]
    PerBin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MeanField {
    /// One set of bin means over all vertices, shared by every edge.
    #[default]
    Full,
    /// Per-edge bin means with both endpoints removed; certified upper bound.
    LeaveTwoOut,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ObjectiveConfig {
    pub rho: f64,
    /// `None` picks distinct values (up to 32 of them) or 8 equal-count bins.
    pub bin_strategy: Option<BinStrategy>,
    pub bin_count: Option<usize>,
    pub omega: OmegaSpec,
    pub gap_kernel: KernelChoice,
    pub q_binning: QBinning,
    pub mean_field: MeanField,
    /// Young's-inequality balance for [`Objective::young_majorizer`].
    pub eta: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            bin_strategy: None,
            bin_count: None,
            omega: OmegaSpec::BernoulliVariance,
            gap_kernel: KernelChoice::Auto,
            q_binning: QBinning::PerBin,
            mean_field: MeanField::Full,
            eta: 1.0,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(invalid("rho", alloc::format!("must be nonnegative, got {}", self.rho)));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(invalid("eta", alloc::format!("must be positive, got {}", self.eta)));
        }
        if self.bin_count == Some(0) {
            return Err(invalid("bin_count", "must be at least 1"));
        }
        self.omega.validate()
    }
}

/// `L`, `K` and the log-derivative bound of `H_beta(q; ., m)` on `[0, 1]`.
///
/// `L = m beta / (q (q + beta))` is `|dH/da|` at `a = 0`, the maximum over `[0, 1]`;
/// `K = 2 m (m-1) / (q c (c+1))` and `logd = m (c+m-1) / (c (c-1))` use `c = q/beta + 1`.
pub fn envelope_constants(q: f64, beta: f64, m: usize) -> Result<(f64, f64, f64)> {
    if !(q > 0.0) || !(beta > 0.0) {
        return Err(invalid("q/beta", alloc::format!("must be positive, got {q}/{beta}")));
    }
    let mf = m as f64;
    let c = q / beta + 1.0;
    let l = mf * beta / (q * (q + beta));
    let k = 2.0 * mf * (mf - 1.0).max(0.0) / (q * c * (c + 1.0));
    let logd = mf * (c + mf - 1.0) / (c * (c - 1.0));
    Ok((l, k, logd))
}

/// `M_il = sum_j W_ij P_il (1 - P_jl)` for one column.
pub fn m_weights(g: &Graph, p: &AssignmentMatrix, ell: usize) -> Vec<f64> {
    (0..g.n())
        .map(|i| {
            let pi = p.get(i, ell);
            if pi == 0.0 {
                return 0.0;
            }
            let mut a = NeumaierSum::new();
            g.for_each_neighbor(i, |j, w| a.add(w * (1.0 - p.get(j, ell))));
            pi * a.value()
        })
        .collect()
}

/// Row-wise `softmax(logits / temperature)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentState {
    logits: Vec<f64>,
    temperature: f64,
    p: AssignmentMatrix,
}

impl AssignmentState {
    pub fn new(n: usize, k: usize, logits: Vec<f64>, temperature: f64) -> Result<Self> {
        if logits.len() != n * k {
            return Err(Error::DimensionMismatch { expected: n * k, got: logits.len() });
        }
        if k == 0 {
            return Err(invalid("k", "must be at least 1"));
        }
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(invalid("temperature", alloc::format!("must be positive, got {temperature}")));
        }
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(invalid("logits", "must be finite"));
        }
        let p = softmax(n, k, &logits, temperature);
        Ok(Self { logits, temperature, p })
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn p(&self) -> &AssignmentMatrix {
        &self.p
    }

    pub fn set_temperature(&mut self, temperature: f64) -> Result<()> {
        *self = Self::new(self.p.n(), self.p.k(), core::mem::take(&mut self.logits), temperature)?;
        Ok(())
    }

    pub fn set_logits(&mut self, logits: Vec<f64>) -> Result<()> {
        *self = Self::new(self.p.n(), self.p.k(), logits, self.temperature)?;
        Ok(())
    }

    /// Chains `dJ/dP` through the softmax: `dJ/dz_il = P_il (g_il - sum_m g_im P_im) / tau`.
    pub fn chain(&self, grad_p: &[f64]) -> Vec<f64> {
        let (n, k) = (self.p.n(), self.p.k());
        let mut out = alloc::vec![0.0; n * k];
        for i in 0..n {
            let row = self.p.row(i);
            let g = &grad_p[i * k..(i + 1) * k];
            let avg: f64 = row.iter().zip(g).map(|(p, g)| p * g).sum();
            for l in 0..k {
                out[i * k + l] = row[l] * (g[l] - avg) / self.temperature;
            }
        }
        out
    }
}

fn softmax(n: usize, k: usize, logits: &[f64], tau: f64) -> AssignmentMatrix {
    let mut data = alloc::vec![0.0; n * k];
    for i in 0..n {
        let z = &logits[i * k..(i + 1) * k];
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for l in 0..k {
            let e = libm::exp((z[l] - max) / tau);
            data[i * k + l] = e;
            total += e;
        }
        for l in 0..k {
            data[i * k + l] /= total;
        }
    }
    AssignmentMatrix::from_raw(n, k, data)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub j: f64,
    pub u: f64,
    pub gamma: f64,
}

/// Per-cluster quantities shared by the forward and backward passes.
///
/// Tables indexed `[group * d + bin]` hold values at `q = q_values[group]` and
/// `beta = representatives[bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterCache {
    pub bin_sums: Vec<f64>,
    pub means: Vec<f64>,
    pub stats: Vec<ZeroAwareStats>,
    pub h: Vec<f64>,
    pub h_prime: Vec<f64>,
    pub kernel: Vec<f64>,
    pub kernel_prime: Vec<f64>,
    /// `Phi_l(q_g)` per group.
    pub phi: Vec<f64>,
    /// `sum_b w_b (n/2) V_b C_b(q_g)` per group.
    pub penalty: Vec<f64>,
    /// `A_i = sum_j W_ij (1 - P_jl)`.
    pub a: Vec<f64>,
    pub m_weights: Vec<f64>,
    /// `M` summed within each q-group.
    pub mq: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeCache {
    pub clusters: Vec<ClusterCache>,
}

/// Graph-dependent setup of the surrogate: bins over vertex weights and q-groups.
#[derive(Debug, Clone)]
pub struct Objective<'g> {
    g: &'g Graph,
    config: ObjectiveConfig,
    partition: BinPartition,
    weights: Vec<f64>,
    q_values: Vec<f64>,
    q_group: Vec<usize>,
    kinds: Vec<GapKind>,
}

impl<'g> Objective<'g> {
    pub fn new(g: &'g Graph, config: &ObjectiveConfig) -> Result<Self> {
        config.validate()?;
        if g.n() == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        let s = g.vertex_weights();
        let partition = match (config.bin_count, config.bin_strategy) {
            (None, None) => default_bins(s)?,
            (d, strategy) => {
                let strategy = strategy.unwrap_or(BinStrategy::EqualCount);
                let d = match d {
                    Some(d) => d,
                    None => {
                        let mut v = s.to_vec();
                        v.sort_by(f64::total_cmp);
                        v.dedup();
                        v.len().min(8)
                    }
                };
                make_bins(s, d, strategy)?
            }
        };
        let (q_values, q_group) = match config.q_binning {
            QBinning::PerBin => (partition.representatives.clone(), partition.membership.clone()),
            QBinning::PerVertex => {
                let mut v = s.to_vec();
                v.sort_by(f64::total_cmp);
                v.dedup();
                let group = s
                    .iter()
                    .map(|x| v.binary_search_by(|y| y.total_cmp(x)).expect("value present"))
                    .collect();
                (v, group)
            }
        };
        let d = partition.bin_count();
        let mut kinds = Vec::with_capacity(q_values.len() * d);
        for &q in &q_values {
            for &beta in &partition.representatives {
                kinds.push(config.gap_kernel.resolve(q, beta)?);
            }
        }
        Ok(Self {
            g,
            config: config.clone(),
            weights: partition.weights(),
            partition,
            q_values,
            q_group,
            kinds,
        })
    }

    pub fn graph(&self) -> &'g Graph {
        self.g
    }

    pub fn config(&self) -> &ObjectiveConfig {
        &self.config
    }

    pub fn partition(&self) -> &BinPartition {
        &self.partition
    }

    /// Distinct `q` values and the group of every vertex.
    pub fn q_groups(&self) -> (&[f64], &[usize]) {
        (&self.q_values, &self.q_group)
    }

    fn n(&self) -> usize {
        self.g.n()
    }

    fn check_p(&self, p: &AssignmentMatrix) -> Result<()> {
        if p.n() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: p.n() });
        }
        Ok(())
    }

    /// Bin means of column `ell` and the bin weights `m_b / n`.
    pub fn bin_cluster_means(&self, p: &AssignmentMatrix, ell: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_p(p)?;
        Ok((self.partition.bin_means(&p.column(ell))?, self.weights.clone()))
    }

    /// `prod_b H_{beta*_b}(q; means_b, n)^(w_b)` for arbitrary `q`.
    pub fn phi_at(&self, means: &[f64], q: f64) -> Result<f64> {
        let mut log_sum = NeumaierSum::new();
        for ((&beta, &mean), &w) in self.partition.representatives.iter().zip(means).zip(&self.weights) {
            log_sum.add(w * libm::log(h_envelope(q, beta, mean, self.n())?));
        }
        Ok(libm::exp(log_sum.value()))
    }

    pub fn cache(&self, p: &AssignmentMatrix) -> Result<EnvelopeCache> {
        self.check_p(p)?;
        let clusters = (0..p.k()).map(|ell| self.cluster_cache(p, ell)).collect::<Result<_>>()?;
        Ok(EnvelopeCache { clusters })
    }

    fn cluster_cache(&self, p: &AssignmentMatrix, ell: usize) -> Result<ClusterCache> {
        let n = self.n();
        let d = self.partition.bin_count();
        let ng = self.q_values.len();
        let col = p.column(ell);
        let members = self.partition.members();

        let mut bin_sums = Vec::with_capacity(d);
        let mut means = Vec::with_capacity(d);
        let mut stats = Vec::with_capacity(d);
        for (b, mem) in members.iter().enumerate() {
            let vals: Vec<f64> = mem.iter().map(|&i| col[i]).collect();
            let sum: NeumaierSum = vals.iter().copied().collect();
            bin_sums.push(sum.value());
            means.push(sum.value() / self.partition.sizes[b] as f64);
            stats.push(weighted_stats(&vals, self.config.omega));
        }

        let mut h = alloc::vec![0.0; ng * d];
        let mut h_prime = alloc::vec![0.0; ng * d];
        let mut kernel = alloc::vec![0.0; ng * d];
        let mut kernel_prime = alloc::vec![0.0; ng * d];
        let mut phi = alloc::vec![0.0; ng];
        let mut penalty = alloc::vec![0.0; ng];
        for (gi, &q) in self.q_values.iter().enumerate() {
            let mut log_phi = NeumaierSum::new();
            let mut pen = NeumaierSum::new();
            for b in 0..d {
                let beta = self.partition.representatives[b];
                let idx = gi * d + b;
                h[idx] = h_envelope(q, beta, means[b], n)?;
                h_prime[idx] = h_envelope_grad(q, beta, means[b], n)?;
                if !(h[idx] > 0.0) {
                    return Err(Error::Degenerate(alloc::format!("envelope {} is not positive", h[idx])));
                }
                log_phi.add(self.weights[b] * libm::log(h[idx]));
                let (c, cp) = kernel_value_grad(self.kinds[idx], q, beta, means[b], n)?;
                kernel[idx] = c;
                kernel_prime[idx] = cp;
                pen.add(self.weights[b] * 0.5 * n as f64 * stats[b].var * c);
            }
            phi[gi] = libm::exp(log_phi.value());
            penalty[gi] = pen.value();
        }

        let mut a = alloc::vec![0.0; n];
        let mut m_w = alloc::vec![0.0; n];
        let mut mq = alloc::vec![NeumaierSum::new(); ng];
        for i in 0..n {
            let mut acc = NeumaierSum::new();
            self.g.for_each_neighbor(i, |j, w| acc.add(w * (1.0 - col[j])));
            a[i] = acc.value();
            m_w[i] = col[i] * a[i];
            mq[self.q_group[i]].add(m_w[i]);
        }

        Ok(ClusterCache {
            bin_sums,
            means,
            stats,
            h,
            h_prime,
            kernel,
            kernel_prime,
            phi,
            penalty,
            a,
            m_weights: m_w,
            mq: mq.iter().map(NeumaierSum::value).collect(),
        })
    }

    /// Envelope of the ordered edge `(i, j)`: bin means with `i` and `j` removed.
    /// Returns `Phi` and, per bin, `H'/H` at the modified means.
    fn leave_two_out(&self, cc: &ClusterCache, col: &[f64], i: usize, j: usize) -> Result<(f64, Vec<f64>)> {
        let n = self.n();
        let d = self.partition.bin_count();
        let gi = self.q_group[i];
        let q = self.q_values[gi];
        let (bi, bj) = (self.partition.membership[i], self.partition.membership[j]);
        let mut log_phi = NeumaierSum::new();
        let mut ratio = Vec::with_capacity(d);
        for b in 0..d {
            let idx = gi * d + b;
            let (hv, hp) = if b == bi || b == bj {
                let mut s = cc.bin_sums[b];
                if b == bi {
                    s -= col[i];
                }
                if b == bj {
                    s -= col[j];
                }
                let mean = (s / self.partition.sizes[b] as f64).max(0.0);
                let beta = self.partition.representatives[b];
                (h_envelope(q, beta, mean, n)?, h_envelope_grad(q, beta, mean, n)?)
            } else {
                (cc.h[idx], cc.h_prime[idx])
            };
            log_phi.add(self.weights[b] * libm::log(hv));
            ratio.push(hp / hv);
        }
        Ok((libm::exp(log_phi.value()), ratio))
    }

    fn cluster_u(&self, cc: &ClusterCache, col: &[f64]) -> Result<f64> {
        match self.config.mean_field {
            MeanField::Full => Ok(cc.mq.iter().zip(&cc.phi).map(|(m, f)| m * f).collect::<NeumaierSum>().value()),
            MeanField::LeaveTwoOut => {
                let mut acc = NeumaierSum::new();
                let mut err = None;
                self.g.for_each_edge(|i, j, w| {
                    for (a, b) in [(i, j), (j, i)] {
                        let gab = w * col[a] * (1.0 - col[b]);
                        if gab == 0.0 || err.is_some() {
                            continue;
                        }
                        match self.leave_two_out(cc, col, a, b) {
                            Ok((phi, _)) => acc.add(gab * phi),
                            Err(e) => err = Some(e),
                        }
                    }
                });
                match err {
                    Some(e) => Err(e),
                    None => Ok(acc.value()),
                }
            }
        }
    }

    fn cluster_gamma(&self, cc: &ClusterCache) -> f64 {
        cc.mq.iter().zip(&cc.penalty).map(|(m, p)| m * p).collect::<NeumaierSum>().value()
    }

    pub fn u_value(&self, p: &AssignmentMatrix) -> Result<f64> {
        let cache = self.cache(p)?;
        let mut acc = NeumaierSum::new();
        for (ell, cc) in cache.clusters.iter().enumerate() {
            acc.add(self.cluster_u(cc, &p.column(ell))?);
        }
        Ok(acc.value())
    }

    pub fn gamma_value(&self, p: &AssignmentMatrix) -> Result<f64> {
        let cache = self.cache(p)?;
        Ok(cache.clusters.iter().map(|cc| self.cluster_gamma(cc)).collect::<NeumaierSum>().value())
    }

    pub fn value(&self, p: &AssignmentMatrix) -> Result<ObjectiveValue> {
        let cache = self.cache(p)?;
        self.value_from_cache(p, &cache)
    }

    fn value_from_cache(&self, p: &AssignmentMatrix, cache: &EnvelopeCache) -> Result<ObjectiveValue> {
        let mut u = NeumaierSum::new();
        let mut gamma = NeumaierSum::new();
        for (ell, cc) in cache.clusters.iter().enumerate() {
            u.add(self.cluster_u(cc, &p.column(ell))?);
            gamma.add(self.cluster_gamma(cc));
        }
        let (u, gamma) = (u.value(), gamma.value());
        Ok(ObjectiveValue { j: u + self.config.rho * gamma, u, gamma })
    }

    /// Objective and `dJ/dP` (row-major `n x k`).
    pub fn grad_p(&self, p: &AssignmentMatrix) -> Result<(ObjectiveValue, Vec<f64>)> {
        let cache = self.cache(p)?;
        let value = self.value_from_cache(p, &cache)?;
        let (n, k) = (self.n(), p.k());
        let d = self.partition.bin_count();
        let rho = self.config.rho;
        let nf = n as f64;
        let mut grad = alloc::vec![0.0; n * k];

        for (ell, cc) in cache.clusters.iter().enumerate() {
            let col = p.column(ell);
            let mut gcol = alloc::vec![0.0; n];
            // Per-bin coefficient multiplying d(pbar_b)/dP_u = 1/m_b, constant within the bin.
            let mut t = alloc::vec![0.0; d];

            // Gamma and its dependence on the bin statistics.
            let pen_of = |i: usize| rho * cc.penalty[self.q_group[i]];
            if rho != 0.0 {
                for (gi, &mq) in cc.mq.iter().enumerate() {
                    if mq == 0.0 {
                        continue;
                    }
                    for b in 0..d {
                        let idx = gi * d + b;
                        let scale = rho * mq * self.weights[b] * 0.5 * nf;
                        t[b] += scale * cc.stats[b].var * cc.kernel_prime[idx] / self.partition.sizes[b] as f64;
                    }
                }
                for u in 0..n {
                    let b = self.partition.membership[u];
                    let st = &cc.stats[b];
                    if !(st.total > 0.0) {
                        continue;
                    }
                    let (_, dvar) = stats_grad_at(st, col[u]);
                    let mut acc = 0.0;
                    for (gi, &mq) in cc.mq.iter().enumerate() {
                        acc += mq * cc.kernel[gi * d + b];
                    }
                    gcol[u] += rho * self.weights[b] * 0.5 * nf * dvar * acc;
                }
            }

            match self.config.mean_field {
                MeanField::Full => {
                    let f: Vec<f64> = (0..n).map(|i| cc.phi[self.q_group[i]] + pen_of(i)).collect();
                    for u in 0..n {
                        let mut back = 0.0;
                        self.g.for_each_neighbor(u, |i, w| back += w * col[i] * f[i]);
                        gcol[u] += cc.a[u] * f[u] - back;
                    }
                    for (gi, &mq) in cc.mq.iter().enumerate() {
                        if mq == 0.0 {
                            continue;
                        }
                        for b in 0..d {
                            let idx = gi * d + b;
                            t[b] += mq * cc.phi[gi] * self.weights[b] * (cc.h_prime[idx] / cc.h[idx])
                                / self.partition.sizes[b] as f64;
                        }
                    }
                }
                MeanField::LeaveTwoOut => {
                    let mut err = None;
                    self.g.for_each_edge(|i, j, w| {
                        for (a, b) in [(i, j), (j, i)] {
                            if err.is_some() {
                                return;
                            }
                            let (phi, ratio) = match self.leave_two_out(cc, &col, a, b) {
                                Ok(v) => v,
                                Err(e) => {
                                    err = Some(e);
                                    return;
                                }
                            };
                            // Gamma shares the edge factor G_ab, so its M-derivative rides along.
                            let f = phi + pen_of(a);
                            gcol[a] += w * (1.0 - col[b]) * f;
                            gcol[b] -= w * col[a] * f;
                            let gab = w * col[a] * (1.0 - col[b]);
                            if gab == 0.0 {
                                continue;
                            }
                            for (bin, r) in ratio.iter().enumerate() {
                                let c = gab * phi * self.weights[bin] * r / self.partition.sizes[bin] as f64;
                                t[bin] += c;
                                if self.partition.membership[a] == bin {
                                    gcol[a] -= c;
                                }
                                if self.partition.membership[b] == bin {
                                    gcol[b] -= c;
                                }
                            }
                        }
                    });
                    if let Some(e) = err {
                        return Err(e);
                    }
                }
            }

            for u in 0..n {
                gcol[u] += t[self.partition.membership[u]];
                grad[u * k + ell] = gcol[u];
            }
        }
        Ok((value, grad))
    }

    /// Objective and its gradient with respect to the logits of `state`.
    pub fn backward(&self, state: &AssignmentState) -> Result<(ObjectiveValue, Vec<f64>)> {
        let (value, gp) = self.grad_p(state.p())?;
        Ok((value, state.chain(&gp)))
    }

    /// Largest gap kernel of each bin over the q-groups: `[cluster][bin]`.
    fn kernel_max(&self, cache: &EnvelopeCache) -> Vec<Vec<f64>> {
        let d = self.partition.bin_count();
        cache
            .clusters
            .iter()
            .map(|cc| {
                (0..d)
                    .map(|b| {
                        (0..self.q_values.len())
                            .map(|gi| cc.kernel[gi * d + b])
                            .fold(0.0, f64::max)
                    })
                    .collect()
            })
            .collect()
    }

    /// `sum_l sum_b (n w_b / 2) Acoef_lb Cut_l V_lb`, an upper bound on `Gamma`.
    pub fn gamma_product_form(&self, p: &AssignmentMatrix) -> Result<f64> {
        let cache = self.cache(p)?;
        let kmax = self.kernel_max(&cache);
        let nf = self.n() as f64;
        let mut acc = NeumaierSum::new();
        for (cc, km) in cache.clusters.iter().zip(&kmax) {
            let cut: f64 = cc.mq.iter().sum();
            for b in 0..self.partition.bin_count() {
                acc.add(0.5 * nf * self.weights[b] * km[b] * cut * cc.stats[b].var);
            }
        }
        Ok(acc.value())
    }

    /// `sum_l sum_b (n w_b / 4) Acoef_lb (eta Cut_l^2 + V_lb^2 / eta)`.
    pub fn young_majorizer(&self, p: &AssignmentMatrix) -> Result<f64> {
        let cache = self.cache(p)?;
        let kmax = self.kernel_max(&cache);
        let nf = self.n() as f64;
        let eta = self.config.eta;
        let mut acc = NeumaierSum::new();
        for (cc, km) in cache.clusters.iter().zip(&kmax) {
            let cut: f64 = cc.mq.iter().sum();
            for b in 0..self.partition.bin_count() {
                let v = cc.stats[b].var;
                acc.add(0.25 * nf * self.weights[b] * km[b] * (eta * cut * cut + v * v / eta));
            }
        }
        Ok(acc.value())
    }
}

/// `U` for `(g, P, config)`.
pub fn u_value(g: &Graph, p: &AssignmentMatrix, config: &ObjectiveConfig) -> Result<f64> {
    Objective::new(g, config)?.u_value(p)
}

/// `Gamma` for `(g, P, config)`.
pub fn gamma_value(g: &Graph, p: &AssignmentMatrix, config: &ObjectiveConfig) -> Result<f64> {
    Objective::new(g, config)?.gamma_value(p)
}

/// `(J, U, Gamma)` at the assignment of `state`.
pub fn objective_value(g: &Graph, state: &AssignmentState, config: &ObjectiveConfig) -> Result<ObjectiveValue> {
    Objective::new(g, config)?.value(state.p())
}

/// `dJ/dlogits` at `state`.
pub fn backward(g: &Graph, state: &AssignmentState, config: &ObjectiveConfig) -> Result<Vec<f64>> {
    Ok(Objective::new(g, config)?.backward(state)?.1)
}

/// Young's-inequality majorizer of `Gamma`.
pub fn young_majorizer(g: &Graph, p: &AssignmentMatrix, config: &ObjectiveConfig) -> Result<f64> {
    Objective::new(g, config)?.young_majorizer(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::holder_bound;
    use crate::graph::generators::{disjoint_cliques, generate_sbm, path_graph, random_weighted};
    use crate::graph::{expected_graphcut_exact, HardPartition, WeightMode};
    use crate::rng;
    use alloc::vec;

    fn random_state(n: usize, k: usize, scale: f64, seed: u64) -> AssignmentState {
        let mut r = rng::stream(seed, 9);
        let logits = (0..n * k).map(|_| scale * rng::normal(&mut r)).collect();
        AssignmentState::new(n, k, logits, 1.0).unwrap()
    }

    fn fd_check(g: &Graph, config: &ObjectiveConfig, state: &AssignmentState) -> f64 {
        let obj = Objective::new(g, config).unwrap();
        let (_, grad) = obj.backward(state).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for idx in 0..grad.len() {
            let mut up = state.logits().to_vec();
            let mut dn = up.clone();
            up[idx] += h;
            dn[idx] -= h;
            let n = g.n();
            let k = state.p().k();
            let fu = obj.value(AssignmentState::new(n, k, up, state.temperature()).unwrap().p()).unwrap().j;
            let fl = obj.value(AssignmentState::new(n, k, dn, state.temperature()).unwrap().p()).unwrap().j;
            let fd = (fu - fl) / (2.0 * h);
            let err = (fd - grad[idx]).abs() / grad[idx].abs().max(fd.abs()).max(1e-2);
            worst = worst.max(if (fd - grad[idx]).abs() < 1e-7 { 0.0 } else { err });
        }
        worst
    }

    #[test]
    fn envelope_constants_examples() {
        let (l, k, _) = envelope_constants(1.0, 1.0, 3).unwrap();
        assert!((l - 1.5).abs() < 1e-15);
        assert!((k - 2.0).abs() < 1e-15);
        assert_eq!(envelope_constants(2.0, 0.5, 0).unwrap(), (0.0, 0.0, 0.0));
        for &(q, beta, m) in &[(1.0, 1.0, 3usize), (0.5, 2.0, 9), (4.0, 1.0, 20)] {
            let (l, k, logd) = envelope_constants(q, beta, m).unwrap();
            let h = 1e-4;
            for i in 0..=100 {
                let a = i as f64 / 100.0;
                let g = h_envelope_grad(q, beta, a, m).unwrap();
                assert!(g.abs() <= l * (1.0 + 1e-12), "L at {a}");
                let c = q / beta + 1.0;
                let ld = crate::hypergeom::f21_log_derivative(m, c, a).unwrap();
                assert!(ld.abs() <= logd * (1.0 + 1e-12));
                if (h..=1.0 - h).contains(&a) {
                    let sd = (h_envelope(q, beta, a + h, m).unwrap() - 2.0 * h_envelope(q, beta, a, m).unwrap()
                        + h_envelope(q, beta, a - h, m).unwrap())
                        / (h * h);
                    assert!(sd <= k * (1.0 + 1e-6) + 1e-6, "K at {a}: {sd} > {k}");
                }
            }
        }
    }

    #[test]
    fn m_weights_examples() {
        let tri = disjoint_cliques(&[3], WeightMode::Ratio);
        let p = AssignmentMatrix::new(3, 2, vec![0.5; 6]).unwrap();
        assert_eq!(m_weights(&tri, &p, 0), vec![0.5; 3]);
        let two = disjoint_cliques(&[3, 3], WeightMode::Ratio);
        let part = HardPartition::new(vec![0, 0, 0, 1, 1, 1], 2).unwrap();
        let p = AssignmentMatrix::from_partition(&part);
        assert!(m_weights(&two, &p, 0).iter().all(|&m| m == 0.0));
    }

    #[test]
    fn bin_means_and_phi() {
        let s = vec![1.0, 1.0, 2.0, 2.0, 2.0, 3.0];
        let g = random_weighted(6, 0.8, 0.5, 1.5, 3, WeightMode::Custom(s.clone())).unwrap();
        let obj = Objective::new(&g, &ObjectiveConfig::default()).unwrap();
        let p = AssignmentMatrix::new(6, 2, [0.3, 0.7].repeat(6)).unwrap();
        let (means, w) = obj.bin_cluster_means(&p, 0).unwrap();
        assert!(means.iter().all(|&x| (x - 0.3).abs() < 1e-15));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);

        let zero = AssignmentMatrix::new(6, 2, [0.0, 1.0].repeat(6)).unwrap();
        let cache = obj.cache(&zero).unwrap();
        let (qv, _) = obj.q_groups();
        for (gi, &q) in qv.iter().enumerate() {
            assert!((cache.clusters[0].phi[gi] - 1.0 / q).abs() < 1e-15);
        }

        // Phi at q = 1 agrees with the Holder bound on a per-bin-constant instance.
        let col = [0.2, 0.2, 0.6, 0.6, 0.6, 0.9];
        let rows: Vec<Vec<f64>> = col.iter().map(|&x| vec![x, 1.0 - x]).collect();
        let p = AssignmentMatrix::from_rows(&rows).unwrap();
        let (means, _) = obj.bin_cluster_means(&p, 0).unwrap();
        let phi = obj.phi_at(&means, 1.0).unwrap();
        let hb = holder_bound(1.0, &col, &s, obj.partition()).unwrap().value;
        assert!((phi - hb).abs() <= 1e-14 * hb);
    }

    #[test]
    fn zero_at_separated_components() {
        let two = disjoint_cliques(&[3, 3], WeightMode::Ratio);
        let part = HardPartition::new(vec![0, 0, 0, 1, 1, 1], 2).unwrap();
        let p = AssignmentMatrix::from_partition(&part);
        for mf in [MeanField::Full, MeanField::LeaveTwoOut] {
            let cfg = ObjectiveConfig { mean_field: mf, ..Default::default() };
            let v = Objective::new(&two, &cfg).unwrap().value(&p).unwrap();
            assert_eq!((v.j, v.u, v.gamma), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn gamma_vanishes_at_binary_and_bin_constant_p() {
        let (g, part) = generate_sbm(12, 3, 0.7, 0.2, 5).unwrap();
        let p = AssignmentMatrix::from_partition(&part);
        let gamma = gamma_value(&g, &p, &ObjectiveConfig::default()).unwrap();
        assert_eq!(gamma, 0.0);
        let flat = AssignmentMatrix::new(12, 3, [0.2, 0.5, 0.3].repeat(12)).unwrap();
        let cfg = ObjectiveConfig { omega: OmegaSpec::Uniform, ..Default::default() };
        assert_eq!(gamma_value(&g, &flat, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn rho_zero_gives_u() {
        let g = random_weighted(8, 0.6, 0.1, 1.0, 1, WeightMode::Ratio).unwrap();
        let state = random_state(8, 3, 1.0, 4);
        let cfg = ObjectiveConfig { rho: 0.0, ..Default::default() };
        let v = objective_value(&g, &state, &cfg).unwrap();
        assert_eq!(v.j, v.u);
        assert!(v.gamma > 0.0);
    }

    #[test]
    fn leave_two_out_majorizes_enumeration() {
        let g = path_graph(3, WeightMode::Ratio).unwrap();
        let p = AssignmentMatrix::new(3, 2, vec![0.5; 6]).unwrap();
        let truth = 2.0 * expected_graphcut_exact(&g, &p).unwrap();
        let cfg = ObjectiveConfig { mean_field: MeanField::LeaveTwoOut, ..Default::default() };
        assert!(u_value(&g, &p, &cfg).unwrap() >= truth);

        for seed in 0..20 {
            let g = random_weighted(8, 0.5, 0.1, 2.0, seed, WeightMode::Ratio).unwrap();
            let state = random_state(8, 3, 1.5, seed);
            let truth = 2.0 * expected_graphcut_exact(&g, state.p()).unwrap();
            let u = u_value(&g, state.p(), &cfg).unwrap();
            assert!(u >= truth - 1e-12, "seed {seed}: {u} < {truth}");
        }
    }

    #[test]
    fn full_mean_field_can_undershoot() {
        // Two vertices, one edge, P = 1/2: E[vcut] sums to 1/2 per cluster while the
        // shared-mean envelope gives 1/4 * 7/12 per direction.
        let g = Graph::from_edges(2, &[(0, 1, 1.0)], WeightMode::Ratio).unwrap();
        let p = AssignmentMatrix::new(2, 2, vec![0.5; 4]).unwrap();
        let truth = 2.0 * expected_graphcut_exact(&g, &p).unwrap();
        let cfg = ObjectiveConfig { mean_field: MeanField::Full, ..Default::default() };
        assert!(u_value(&g, &p, &cfg).unwrap() < truth);
    }

    #[test]
    fn trivial_gradients() {
        let g = Graph::from_edges(5, &[], WeightMode::Ratio).unwrap();
        let state = random_state(5, 3, 1.0, 2);
        assert!(backward(&g, &state, &ObjectiveConfig::default()).unwrap().iter().all(|&x| x == 0.0));
        let g = path_graph(5, WeightMode::Ratio).unwrap();
        let state = random_state(5, 1, 1.0, 2);
        assert!(backward(&g, &state, &ObjectiveConfig::default()).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let configs = [
            ObjectiveConfig { rho: 0.0, ..Default::default() },
            ObjectiveConfig::default(),
            ObjectiveConfig { omega: OmegaSpec::Power(1.5), gap_kernel: KernelChoice::ForwardHeuristic, ..Default::default() },
            ObjectiveConfig { omega: OmegaSpec::Uniform, mean_field: MeanField::LeaveTwoOut, ..Default::default() },
            ObjectiveConfig { q_binning: QBinning::PerVertex, rho: 2.0, ..Default::default() },
            ObjectiveConfig {
                q_binning: QBinning::PerVertex,
                mean_field: MeanField::LeaveTwoOut,
                bin_count: Some(2),
                ..Default::default()
            },
        ];
        let (sbm, _) = generate_sbm(12, 2, 0.8, 0.2, 3).unwrap();
        let graphs = [
            sbm.clone(),
            sbm.with_mode(WeightMode::Normalized).unwrap(),
            random_weighted(10, 0.7, 0.2, 3.0, 8, WeightMode::Custom(vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 0.7, 1.2, 4.0, 0.9]))
                .unwrap(),
        ];
        for (gi, g) in graphs.iter().enumerate() {
            for (ci, cfg) in configs.iter().enumerate() {
                let state = random_state(g.n(), 3, 1.0, (gi * 10 + ci) as u64);
                let err = fd_check(g, cfg, &state);
                assert!(err <= 1e-5, "graph {gi} config {ci}: relative error {err}");
            }
        }
    }

    #[test]
    fn young_majorizer_dominates_product_form() {
        let g = random_weighted(9, 0.6, 0.1, 1.0, 2, WeightMode::Ratio).unwrap();
        let state = random_state(9, 3, 1.0, 11);
        for eta in [0.1, 1.0, 10.0] {
            let cfg = ObjectiveConfig { eta, ..Default::default() };
            let obj = Objective::new(&g, &cfg).unwrap();
            let y = obj.young_majorizer(state.p()).unwrap();
            let prod = obj.gamma_product_form(state.p()).unwrap();
            let gamma = obj.gamma_value(state.p()).unwrap();
            assert!(y >= prod && prod >= gamma - 1e-15, "eta {eta}: {y} {prod} {gamma}");
        }
    }

    #[test]
    fn certified_backward_is_rejected_when_not_integrable() {
        let g = path_graph(4, WeightMode::Ratio).unwrap();
        let cfg = ObjectiveConfig { gap_kernel: KernelChoice::CertifiedBackward, ..Default::default() };
        assert!(matches!(Objective::new(&g, &cfg), Err(Error::NotIntegrable { .. })));
    }
}

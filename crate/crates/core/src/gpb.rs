//! Reciprocal expectation `I(q, alpha, beta) = E[1 / (q + x)]` for a generalized
//! Poisson–Binomial `x = sum_i beta_i r_i`, `r_i ~ Bernoulli(alpha_i)` independent.
//!
//! Three independent evaluations are provided: exact enumeration of all `2^m`
//! outcomes, adaptive quadrature of `int_0^1 t^(q-1) PGF(t) dt`, and seeded Monte Carlo.

use alloc::vec::Vec;

use crate::error::invalid;
use crate::quadrature::integrate;
use crate::rng;
use crate::sum::NeumaierSum;
use crate::{Error, Result};

/// Largest `m` accepted by [`expected_reciprocal_exact`].
pub const ENUMERATION_LIMIT: usize = 24;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GpbInstance {
    pub q: f64,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl GpbInstance {
    pub fn new(q: f64, alphas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        let inst = Self { q, alphas, betas };
        inst.validate()?;
        Ok(inst)
    }

    /// Instance with a common weight `beta` on every coordinate.
    pub fn common_beta(q: f64, alphas: Vec<f64>, beta: f64) -> Result<Self> {
        let betas = alloc::vec![beta; alphas.len()];
        Self::new(q, alphas, betas)
    }

    pub fn m(&self) -> usize {
        self.alphas.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0) || !self.q.is_finite() {
            return Err(invalid("q", alloc::format!("must be positive, got {}", self.q)));
        }
        if self.alphas.len() != self.betas.len() {
            return Err(Error::DimensionMismatch {
                expected: self.alphas.len(),
                got: self.betas.len(),
            });
        }
        if let Some(a) = self.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(invalid("alphas", alloc::format!("entry {a} outside [0, 1]")));
        }
        if let Some(b) = self.betas.iter().find(|b| !(**b > 0.0) || !b.is_finite()) {
            return Err(invalid("betas", alloc::format!("entry {b} is not positive")));
        }
        Ok(())
    }

    /// Drops coordinates with `alpha_i = 0`, which never contribute to `x`.
    pub fn without_zeros(&self) -> Self {
        let (alphas, betas) = self
            .alphas
            .iter()
            .zip(&self.betas)
            .filter(|(a, _)| **a != 0.0)
            .map(|(a, b)| (*a, *b))
            .unzip();
        Self { q: self.q, alphas, betas }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OracleMethod {
    Exact,
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    pub method: OracleMethod,
    /// Standard error, Monte Carlo only.
    pub stderr: Option<f64>,
}

/// Probability generating function `prod_i (1 - alpha_i + alpha_i t^beta_i)`.
pub fn pgf(inst: &GpbInstance, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(invalid("t", alloc::format!("must lie in [0, 1], got {t}")));
    }
    Ok(pgf_unchecked(&inst.alphas, &inst.betas, t))
}

fn pgf_unchecked(alphas: &[f64], betas: &[f64], t: f64) -> f64 {
    alphas
        .iter()
        .zip(betas)
        .map(|(&a, &b)| if a == 0.0 { 1.0 } else { 1.0 - a + a * libm::pow(t, b) })
        .product()
}

/// Sums `P(r) / (q + x(r))` over all `2^m` outcomes.
///
/// Coordinates with `alpha_i` exactly 0 or 1 do not branch, so they leave the
/// result bit-for-bit unchanged.
pub fn expected_reciprocal_exact(inst: &GpbInstance) -> Result<OracleResult> {
    inst.validate()?;
    if inst.m() > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            size: inst.m(),
            limit: ENUMERATION_LIMIT,
        });
    }
    // Fold deterministic coordinates into q up front.
    let mut q = inst.q;
    let mut free: Vec<(f64, f64)> = Vec::with_capacity(inst.m());
    for (&a, &b) in inst.alphas.iter().zip(&inst.betas) {
        if a == 1.0 {
            q += b;
        } else if a > 0.0 {
            free.push((a, b));
        }
    }

    fn walk(free: &[(f64, f64)], prob: f64, x: f64, acc: &mut NeumaierSum) {
        match free.split_first() {
            None => acc.add(prob / x),
            Some((&(a, b), rest)) => {
                walk(rest, prob * (1.0 - a), x, acc);
                walk(rest, prob * a, x + b, acc);
            }
        }
    }

    let mut acc = NeumaierSum::new();
    walk(&free, 1.0, q, &mut acc);
    Ok(OracleResult {
        value: acc.value(),
        method: OracleMethod::Exact,
        stderr: None,
    })
}

/// Integrates `(1/q) int_0^1 PGF(u^(1/q)) du`, the form of
/// `int_0^1 t^(q-1) PGF(t) dt` after `u = t^q`.
pub fn expected_reciprocal_quadrature(inst: &GpbInstance, tol: f64) -> Result<OracleResult> {
    inst.validate()?;
    let q = inst.q;
    // Integrate against q * tol so that the final division by q meets tol.
    let res = integrate(
        |u| pgf_unchecked(&inst.alphas, &inst.betas, libm::pow(u, 1.0 / q)),
        0.0,
        1.0,
        tol * q,
    )?;
    Ok(OracleResult {
        value: res.value / q,
        method: OracleMethod::Quadrature,
        stderr: None,
    })
}

/// Monte Carlo mean of `1/(q + x)` with `n_samples` seeded draws.
pub fn expected_reciprocal_mc(inst: &GpbInstance, n_samples: usize, seed: u64) -> Result<OracleResult> {
    inst.validate()?;
    if n_samples == 0 {
        return Err(invalid("n_samples", "must be at least 1"));
    }
    let mut q = inst.q;
    let mut free: Vec<(f64, f64)> = Vec::new();
    for (&a, &b) in inst.alphas.iter().zip(&inst.betas) {
        if a == 1.0 {
            q += b;
        } else if a > 0.0 {
            free.push((a, b));
        }
    }
    let mut rng = rng::stream(seed, 0);
    // Welford keeps the mean exact (and the variance 0) for degenerate instances.
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for k in 0..n_samples {
        let mut x = q;
        for &(a, b) in &free {
            if rng::unit(&mut rng) < a {
                x += b;
            }
        }
        let y = 1.0 / x;
        let d = y - mean;
        mean += d / (k + 1) as f64;
        m2 += d * (y - mean);
    }
    let n = n_samples as f64;
    let stderr = if n_samples > 1 {
        libm::sqrt(m2 / (n - 1.0) / n)
    } else {
        0.0
    };
    Ok(OracleResult {
        value: mean,
        method: OracleMethod::MonteCarlo,
        stderr: Some(stderr),
    })
}

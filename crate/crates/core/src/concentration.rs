//! Minibatch plug-in estimation of the envelope and its finite-sample deviation bound.
//!
//! The estimator samples `n` probabilities with replacement from a population and
//! evaluates `H_beta(q; sample mean, m)`. Because `H` is `L`-Lipschitz and has
//! curvature at most `K` on `[0, 1]`, the estimate lies within
//! `L sqrt(ln(2/delta) / (2n)) + (K/2) sigma^2 / n` of `H(q; population mean, m)` with
//! probability at least `1 - delta`. Here `c = q / beta`.

use alloc::vec::Vec;

use crate::envelope::h_envelope;
use crate::error::invalid;
use crate::gap::population_variance;
use crate::rng;
use crate::sum::NeumaierSum;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConcentrationParams {
    pub q: f64,
    pub beta: f64,
    /// Envelope degree.
    pub m: usize,
    /// Population of probabilities the batch is drawn from.
    pub alphas: Vec<f64>,
    /// Batch size.
    pub n: usize,
    pub delta: f64,
}

impl ConcentrationParams {
    /// Parameters with the degree set to the population size.
    pub fn new(q: f64, beta: f64, alphas: Vec<f64>, n: usize, delta: f64) -> Result<Self> {
        let p = Self { q, beta, m: alphas.len(), alphas, n, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0) || !(self.beta > 0.0) {
            return Err(invalid("q/beta", "must be positive"));
        }
        if self.alphas.is_empty() {
            return Err(invalid("alphas", "population must be nonempty"));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(invalid("alphas", alloc::format!("entry {a} outside [0, 1]")));
        }
        if self.n == 0 {
            return Err(invalid("n", "batch size must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta", alloc::format!("must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }

    pub fn population_mean(&self) -> f64 {
        self.alphas.iter().copied().collect::<NeumaierSum>().value() / self.alphas.len() as f64
    }

    pub fn population_variance(&self) -> f64 {
        population_variance(&self.alphas)
    }

    /// `H(q; population mean, m)`.
    pub fn target(&self) -> Result<f64> {
        h_envelope(self.q, self.beta, self.population_mean(), self.m)
    }

    /// `(L, K)` with `c = q / beta`.
    pub fn constants(&self) -> (f64, f64) {
        let m = self.m as f64;
        let c = self.q / self.beta;
        let l = m / (self.q * (c + 1.0));
        let k = 2.0 * m * (m - 1.0).max(0.0) / (self.q * c * (c + 1.0));
        (l, k)
    }
}

/// Plug-in estimate from stream `(seed, trial)`.
pub fn minibatch_envelope_trial(params: &ConcentrationParams, seed: u64, trial: u64) -> Result<f64> {
    let mut r = rng::stream(seed, trial);
    let mut sum = NeumaierSum::new();
    for _ in 0..params.n {
        sum.add(params.alphas[rng::index(&mut r, params.alphas.len())]);
    }
    let mean = (sum.value() / params.n as f64).clamp(0.0, 1.0);
    h_envelope(params.q, params.beta, mean, params.m)
}

/// Plug-in estimate `H(q; mean of n indices drawn with replacement, m)`.
pub fn minibatch_envelope(params: &ConcentrationParams, seed: u64) -> Result<f64> {
    params.validate()?;
    minibatch_envelope_trial(params, seed, 0)
}

/// `L sqrt(ln(2/delta) / (2n)) + (K/2) sigma^2 / n`.
pub fn deviation_bound(params: &ConcentrationParams) -> Result<f64> {
    params.validate()?;
    let (l, k) = params.constants();
    let n = params.n as f64;
    Ok(l * libm::sqrt(libm::log(2.0 / params.delta) / (2.0 * n)) + 0.5 * k * params.population_variance() / n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BiasReport {
    /// Mean of the plug-in estimates minus the target.
    pub empirical_bias: f64,
    /// `(K/2) sigma^2 / n`.
    pub bound: f64,
    /// Standard error of the empirical mean.
    pub stderr: f64,
    /// `4 * stderr`.
    pub tolerance: f64,
}

impl BiasReport {
    /// `-tolerance <= bias <= bound + tolerance`.
    pub fn within(&self) -> bool {
        self.empirical_bias >= -self.tolerance && self.empirical_bias <= self.bound + self.tolerance
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoverageReport {
    pub bound: f64,
    pub trials: usize,
    pub exceedances: usize,
    pub exceed_rate: f64,
    pub bias: BiasReport,
}

/// Runs `trials` seeded plug-in estimates (trial `t` uses stream `t`) and records how
/// often `|estimate - target|` exceeds [`deviation_bound`], plus the empirical bias.
pub fn coverage(params: &ConcentrationParams, trials: usize, seed: u64) -> Result<CoverageReport> {
    params.validate()?;
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    let target = params.target()?;
    let bound = deviation_bound(params)?;
    let mut exceedances = 0;
    // Welford on the deviations; exact zero for constant populations.
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for t in 0..trials {
        let dev = minibatch_envelope_trial(params, seed, t as u64)? - target;
        if dev.abs() > bound {
            exceedances += 1;
        }
        let d = dev - mean;
        mean += d / (t + 1) as f64;
        m2 += d * (dev - mean);
    }
    let (_, k) = params.constants();
    let std = if trials > 1 { libm::sqrt(m2 / (trials - 1) as f64) } else { 0.0 };
    let stderr = std / libm::sqrt(trials as f64);
    Ok(CoverageReport {
        bound,
        trials,
        exceedances,
        exceed_rate: exceedances as f64 / trials as f64,
        bias: BiasReport {
            empirical_bias: mean,
            bound: 0.5 * k * params.population_variance() / params.n as f64,
            stderr,
            tolerance: 4.0 * stderr,
        },
    })
}

/// Empirical bias of the plug-in estimator over `trials >= 1000` seeded trials.
pub fn bias_check(params: &ConcentrationParams, trials: usize, seed: u64) -> Result<BiasReport> {
    if trials < 1000 {
        return Err(invalid("trials", "need at least 1000 trials"));
    }
    Ok(coverage(params, trials, seed)?.bias)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn constant_population_is_exact() {
        let p = ConcentrationParams::new(1.5, 0.7, vec![0.35; 9], 5, 0.05).unwrap();
        let target = p.target().unwrap();
        for seed in 0..10 {
            assert_eq!(minibatch_envelope(&p, seed).unwrap(), target);
        }
        let b = bias_check(&p, 1000, 1).unwrap();
        assert_eq!(b.empirical_bias, 0.0);
    }

    #[test]
    fn single_draw_of_zero() {
        let p = ConcentrationParams::new(2.0, 1.0, vec![0.0, 1.0], 1, 0.05).unwrap();
        let found = (0..64).any(|seed| minibatch_envelope(&p, seed).unwrap() == 0.5);
        assert!(found);
    }

    #[test]
    fn bound_examples() {
        let p = ConcentrationParams { q: 1.0, beta: 1.0, m: 1, alphas: vec![0.2, 0.9], n: 50, delta: 0.1 };
        let (l, k) = p.constants();
        assert_eq!(k, 0.0);
        let want = l * libm::sqrt(libm::log(20.0) / 100.0);
        assert!((deviation_bound(&p).unwrap() - want).abs() < 1e-15);

        let p = ConcentrationParams { q: 1.0, beta: 1.0, m: 10, alphas: vec![0.5; 4], n: 100, delta: 0.05 };
        let (l, _) = p.constants();
        assert!((deviation_bound(&p).unwrap() - l * libm::sqrt(libm::log(40.0) / 200.0)).abs() < 1e-15);

        // sigma^2 = 0.05 via a two-point population around 0.5.
        let s = libm::sqrt(0.05);
        let p = ConcentrationParams { q: 1.0, beta: 1.0, m: 10, alphas: vec![0.5 - s, 0.5 + s], n: 100, delta: 0.05 };
        assert!((p.population_variance() - 0.05).abs() < 1e-15);
        // c = 1: L = 10/2 = 5, K = 2*10*9/(1*1*2) = 90.
        let want = 5.0 * libm::sqrt(libm::log(40.0) / 200.0) + 45.0 * 0.05 / 100.0;
        assert!((deviation_bound(&p).unwrap() - want).abs() < 1e-14);
        let cov = coverage(&p, 10_000, 7).unwrap();
        assert!(cov.exceed_rate <= 0.05);
    }

    /// `E[H(K/n)]` for `K ~ Bin(n, f)`: the exact plug-in mean for a 0/1 population.
    fn exact_plugin_mean(q: f64, beta: f64, m: usize, f: f64, n: usize) -> f64 {
        let mut acc = NeumaierSum::new();
        let ln = |x: f64| libm::lgamma(x);
        for k in 0..=n {
            let lp = ln(n as f64 + 1.0) - ln(k as f64 + 1.0) - ln((n - k) as f64 + 1.0)
                + k as f64 * libm::log(f)
                + (n - k) as f64 * libm::log(1.0 - f);
            let w = libm::exp(lp);
            if w > 1e-300 {
                acc.add(w * h_envelope(q, beta, k as f64 / n as f64, m).unwrap());
            }
        }
        acc.value()
    }

    #[test]
    fn two_point_population_bias() {
        let p = ConcentrationParams::new(1.0, 1.0, vec![0.0, 1.0], 2, 0.05).unwrap();
        let b = bias_check(&p, 20_000, 3).unwrap();
        assert!(b.empirical_bias > 0.0 && b.within(), "{b:?}");
        let exact = exact_plugin_mean(1.0, 1.0, 2, 0.5, 2) - p.target().unwrap();
        assert!((b.empirical_bias - exact).abs() <= b.tolerance);
    }

    #[test]
    fn bias_decays_like_one_over_n() {
        let (q, beta, m, f) = (1.0, 1.0, 8, 0.5);
        let target = h_envelope(q, beta, f, m).unwrap();
        let b1 = exact_plugin_mean(q, beta, m, f, 10_000) - target;
        let b2 = exact_plugin_mean(q, beta, m, f, 20_000) - target;
        let slope = libm::log(b2 / b1) / libm::log(2.0);
        assert!((slope + 1.0).abs() < 0.01, "slope {slope}");
    }
}

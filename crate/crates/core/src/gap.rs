//! Control of the slack `H - I` left by replacing per-coordinate probabilities with
//! their mean.
//!
//! The two-sided integral bounds come from quadrature; the closed-form coefficients are
//! second differences of the envelope along `q`. The backward difference
//! `H(q-2b) - 2H(q-b) + H(q)` equals `int h(t) (1-t^b)^2 / t^(2b) dt` and is a certified
//! upper coefficient when `q > 2b`; the forward difference `H(q) - 2H(q+b) + H(q+2b)`
//! equals `int h(t) (1-t^b)^2 dt` and is always finite but only heuristic.

use alloc::vec::Vec;

use crate::envelope::{h_envelope, h_envelope_grad};
use crate::error::invalid;
use crate::quadrature::integrate;
use crate::sum::NeumaierSum;
use crate::{Error, Result};

/// Coordinate weight `omega` used by the dispersion.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
#[derive(Default)]
pub enum OmegaSpec {
    /// `omega = 1`: the plain population variance.
    Uniform,
    /// `omega(x) = x^a`, `a` in `[1, 2]`.
    Power(f64),
    /// `omega(x) = x (1 - x)`, zero at both ends of `[0, 1]`.
    #[default]
    BernoulliVariance,
}


impl OmegaSpec {
    pub fn validate(&self) -> Result<()> {
        if let OmegaSpec::Power(a) = *self {
            if !(1.0..=2.0).contains(&a) {
                return Err(invalid("omega", alloc::format!("power exponent must lie in [1, 2], got {a}")));
            }
        }
        Ok(())
    }

    pub fn weight(&self, x: f64) -> f64 {
        match *self {
            OmegaSpec::Uniform => 1.0,
            OmegaSpec::Power(a) => {
                if a == 1.0 {
                    x
                } else {
                    libm::pow(x, a)
                }
            }
            OmegaSpec::BernoulliVariance => x * (1.0 - x),
        }
    }

    pub fn weight_prime(&self, x: f64) -> f64 {
        match *self {
            OmegaSpec::Uniform => 0.0,
            OmegaSpec::Power(a) => {
                if a == 1.0 {
                    1.0
                } else if x == 0.0 {
                    0.0
                } else {
                    a * libm::pow(x, a - 1.0)
                }
            }
            OmegaSpec::BernoulliVariance => 1.0 - 2.0 * x,
        }
    }

    /// Whether `omega(0) = 0`, i.e. inactive coordinates carry no weight.
    pub fn vanishes_at_zero(&self) -> bool {
        !matches!(self, OmegaSpec::Uniform)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroAwareStats {
    pub omega_spec: OmegaSpec,
    /// `Omega = sum omega(alpha_i)`.
    pub total: f64,
    pub mu: f64,
    pub var: f64,
}

/// Weighted mean and dispersion; all zeros when `Omega = 0`.
pub fn weighted_stats(alphas: &[f64], omega: OmegaSpec) -> ZeroAwareStats {
    let mut total = NeumaierSum::new();
    let mut first = NeumaierSum::new();
    for &a in alphas {
        let w = omega.weight(a);
        total.add(w);
        first.add(w * a);
    }
    let total = total.value();
    if !(total > 0.0) {
        return ZeroAwareStats { omega_spec: omega, total: 0.0, mu: 0.0, var: 0.0 };
    }
    // Constant active coordinates have zero dispersion exactly, not up to rounding.
    let mut active = alphas.iter().copied().filter(|&a| omega.weight(a) > 0.0);
    if let Some(a0) = active.next() {
        if active.all(|a| a == a0) {
            return ZeroAwareStats { omega_spec: omega, total, mu: a0, var: 0.0 };
        }
    }
    let mu = first.value() / total;
    let second: NeumaierSum = alphas
        .iter()
        .map(|&a| omega.weight(a) * (a - mu) * (a - mu))
        .collect();
    ZeroAwareStats { omega_spec: omega, total, mu, var: second.value() / total }
}

/// `(d mu / d alpha_i, d var / d alpha_i)`.
pub fn weighted_stats_grad(alphas: &[f64], omega: OmegaSpec, i: usize) -> Result<(f64, f64)> {
    if i >= alphas.len() {
        return Err(invalid("i", alloc::format!("index {i} out of range for {} coordinates", alphas.len())));
    }
    let s = weighted_stats(alphas, omega);
    if !(s.total > 0.0) {
        return Err(Error::DivisionByZero("Omega"));
    }
    Ok(stats_grad_at(&s, alphas[i]))
}

/// Gradient of `(mu, var)` with respect to one coordinate of value `a`, given the stats.
pub(crate) fn stats_grad_at(s: &ZeroAwareStats, a: f64) -> (f64, f64) {
    let w = s.omega_spec.weight(a);
    let wp = s.omega_spec.weight_prime(a);
    let d = a - s.mu;
    let dmu = (w + wp * d) / s.total;
    // sum_k omega_k (alpha_k - mu) = 0, so moving mu does not change the numerator to first order.
    let dvar = (wp * (d * d - s.var) + 2.0 * w * d) / s.total;
    (dmu, dvar)
}

/// Plain population variance.
pub fn population_variance(alphas: &[f64]) -> f64 {
    weighted_stats(alphas, OmegaSpec::Uniform).var
}

/// Quadrature of the lower and upper integrated gap bounds for a common weight `beta`.
///
/// With `h(t) = t^(q-1) (1 - a + a t^beta)^m`, `gamma(t) = (m/2)(1 - t^beta)^2` and
/// `theta(t) = gamma(t) / t^(2 beta)`, returns
/// `(int h (1 - exp(-gamma Var)), int h (1 - exp(-theta Var)))`.
pub fn amgm_gap_bounds_quadrature(q: f64, alphas: &[f64], beta: f64, tol: f64) -> Result<(f64, f64)> {
    if !(q > 0.0) {
        return Err(invalid("q", alloc::format!("must be positive, got {q}")));
    }
    if !(beta > 0.0) {
        return Err(invalid("beta", alloc::format!("must be positive, got {beta}")));
    }
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(invalid("alphas", alloc::format!("entry {a} outside [0, 1]")));
    }
    let m = alphas.len() as f64;
    let var = population_variance(alphas);
    if var == 0.0 || alphas.is_empty() {
        return Ok((0.0, 0.0));
    }
    let abar = alphas.iter().sum::<f64>() / m;
    let half_m = 0.5 * m;
    // t = u^(1/q) absorbs the t^(q-1) factor: int t^(q-1) g(t) dt = (1/q) int g(u^(1/q)) du.
    let lower = integrate(
        |u| {
            let t = libm::pow(u, 1.0 / q);
            let tb = libm::pow(t, beta);
            let gamma = half_m * (1.0 - tb) * (1.0 - tb);
            libm::pow(1.0 - abar + abar * tb, m) * -libm::expm1(-gamma * var)
        },
        0.0,
        1.0,
        tol * q,
    )?;
    let upper = integrate(
        |u| {
            let t = libm::pow(u, 1.0 / q);
            let tb = libm::pow(t, beta);
            let base = libm::pow(1.0 - abar + abar * tb, m);
            if tb == 0.0 {
                return base;
            }
            let theta = half_m * (1.0 - tb) * (1.0 - tb) / (tb * tb);
            base * -libm::expm1(-theta * var)
        },
        0.0,
        1.0,
        tol * q,
    )?;
    Ok((lower.value / q, upper.value / q))
}

/// `H(q - 2 beta) - 2 H(q - beta) + H(q)`; needs `q > 2 beta`.
pub fn second_diff_backward(q: f64, beta: f64, alpha_bar: f64, m: usize) -> Result<f64> {
    if !(q > 2.0 * beta) {
        return Err(Error::NotIntegrable { q, beta });
    }
    Ok(h_envelope(q - 2.0 * beta, beta, alpha_bar, m)? - 2.0 * h_envelope(q - beta, beta, alpha_bar, m)?
        + h_envelope(q, beta, alpha_bar, m)?)
}

/// `d/d(alpha_bar)` of [`second_diff_backward`].
pub fn second_diff_backward_grad(q: f64, beta: f64, alpha_bar: f64, m: usize) -> Result<f64> {
    if !(q > 2.0 * beta) {
        return Err(Error::NotIntegrable { q, beta });
    }
    Ok(h_envelope_grad(q - 2.0 * beta, beta, alpha_bar, m)?
        - 2.0 * h_envelope_grad(q - beta, beta, alpha_bar, m)?
        + h_envelope_grad(q, beta, alpha_bar, m)?)
}

/// `H(q) - 2 H(q + beta) + H(q + 2 beta)`.
pub fn second_diff_forward(q: f64, beta: f64, alpha_bar: f64, m: usize) -> Result<f64> {
    Ok(h_envelope(q, beta, alpha_bar, m)? - 2.0 * h_envelope(q + beta, beta, alpha_bar, m)?
        + h_envelope(q + 2.0 * beta, beta, alpha_bar, m)?)
}

/// `d/d(alpha_bar)` of [`second_diff_forward`].
pub fn a_tilde(q: f64, beta: f64, alpha_bar: f64, m: usize) -> Result<f64> {
    Ok(h_envelope_grad(q, beta, alpha_bar, m)? - 2.0 * h_envelope_grad(q + beta, beta, alpha_bar, m)?
        + h_envelope_grad(q + 2.0 * beta, beta, alpha_bar, m)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GapKind {
    ForwardDiff,
    BackwardDiff,
    Quadrature,
}

/// Which closed-form kernel a penalty uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum KernelChoice {
    /// Backward difference; an error when `q <= 2 beta`.
    CertifiedBackward,
    ForwardHeuristic,
    /// Backward when `q > 2 beta`, forward otherwise.
    #[default]
    Auto,
}

impl KernelChoice {
    pub fn resolve(self, q: f64, beta: f64) -> Result<GapKind> {
        match self {
            KernelChoice::CertifiedBackward if q > 2.0 * beta => Ok(GapKind::BackwardDiff),
            KernelChoice::CertifiedBackward => Err(Error::NotIntegrable { q, beta }),
            KernelChoice::ForwardHeuristic => Ok(GapKind::ForwardDiff),
            KernelChoice::Auto if q > 2.0 * beta => Ok(GapKind::BackwardDiff),
            KernelChoice::Auto => Ok(GapKind::ForwardDiff),
        }
    }
}

/// Value of a difference kernel and its `alpha_bar`-derivative.
pub fn kernel_value_grad(kind: GapKind, q: f64, beta: f64, alpha_bar: f64, m: usize) -> Result<(f64, f64)> {
    match kind {
        GapKind::BackwardDiff => Ok((
            second_diff_backward(q, beta, alpha_bar, m)?,
            second_diff_backward_grad(q, beta, alpha_bar, m)?,
        )),
        GapKind::ForwardDiff => Ok((second_diff_forward(q, beta, alpha_bar, m)?, a_tilde(q, beta, alpha_bar, m)?)),
        GapKind::Quadrature => Err(invalid("kind", "quadrature has no closed-form kernel")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapCoefficient {
    pub value: f64,
    pub kind: GapKind,
    /// True only when the value provably dominates `H - I`.
    pub certified_upper: bool,
}

/// `(m/2) Var^omega(alpha) C(q)` with `C` the backward difference when `q > 2 beta`
/// and the forward difference otherwise.
///
/// When `omega(0) = 0`, coordinates equal to zero are removed before the kernel is
/// evaluated: the degree becomes the number of remaining coordinates and the mean is
/// taken over them. Padding an instance with zeros then leaves the penalty unchanged.
/// The result is certified only for the plain variance with the backward kernel;
/// a weighted dispersion can vanish while the gap is positive (e.g. `alpha = (1, 0)`).
pub fn zero_aware_penalty(q: f64, alphas: &[f64], beta: f64, m: usize, omega: OmegaSpec) -> Result<GapCoefficient> {
    omega.validate()?;
    if m < alphas.len() {
        return Err(invalid("m", alloc::format!("degree {m} is below the number of coordinates {}", alphas.len())));
    }
    let kind = KernelChoice::Auto.resolve(q, beta)?;
    let certified_upper = kind == GapKind::BackwardDiff && omega == OmegaSpec::Uniform;
    let stats = weighted_stats(alphas, omega);
    if stats.var == 0.0 {
        return Ok(GapCoefficient { value: 0.0, kind, certified_upper });
    }
    let (m_eff, abar) = if omega.vanishes_at_zero() {
        let active: Vec<f64> = alphas.iter().copied().filter(|&a| a != 0.0).collect();
        let zeros = alphas.len() - active.len();
        (m - zeros, active.iter().sum::<f64>() / active.len() as f64)
    } else {
        (m, alphas.iter().sum::<f64>() / alphas.len() as f64)
    };
    let (c, _) = kernel_value_grad(kind, q, beta, abar, m_eff)?;
    Ok(GapCoefficient {
        value: 0.5 * m_eff as f64 * stats.var * c,
        kind,
        certified_upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpb::{expected_reciprocal_exact, GpbInstance};
    use alloc::vec;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn weighted_stats_examples() {
        let s = weighted_stats(&[0.0; 4], OmegaSpec::Power(1.0));
        assert_eq!((s.total, s.mu, s.var), (0.0, 0.0, 0.0));
        let s = weighted_stats(&[0.0, 1.0, 1.0, 0.0], OmegaSpec::BernoulliVariance);
        assert_eq!((s.total, s.var), (0.0, 0.0));
        let s = weighted_stats(&[0.2, 0.8], OmegaSpec::Power(1.0));
        assert!(close(s.total, 1.0, 1e-15));
        assert!(close(s.mu, 0.68, 1e-15));
        assert!(close(s.var, 0.0576, 1e-15));
    }

    fn fd_stats(alphas: &[f64], omega: OmegaSpec, i: usize) -> (f64, f64) {
        let h = 1e-6;
        let mut up = alphas.to_vec();
        let mut dn = alphas.to_vec();
        up[i] += h;
        dn[i] -= h;
        let (su, sd) = (weighted_stats(&up, omega), weighted_stats(&dn, omega));
        ((su.mu - sd.mu) / (2.0 * h), (su.var - sd.var) / (2.0 * h))
    }

    #[test]
    fn weighted_stats_grad_examples() {
        let (_, dv) = weighted_stats_grad(&[0.5; 4], OmegaSpec::Power(1.0), 2).unwrap();
        assert_eq!(dv, 0.0);
        let (_, dv) = weighted_stats_grad(&[0.37], OmegaSpec::BernoulliVariance, 0).unwrap();
        assert!(dv.abs() < 1e-15);
        for omega in [OmegaSpec::Power(1.0), OmegaSpec::Power(1.7), OmegaSpec::BernoulliVariance, OmegaSpec::Uniform] {
            let alphas = [0.2, 0.8, 0.45, 0.05];
            for i in 0..alphas.len() {
                let (dm, dv) = weighted_stats_grad(&alphas, omega, i).unwrap();
                let (fm, fv) = fd_stats(&alphas, omega, i);
                assert!(close(dm, fm, 1e-7 * dm.abs().max(1e-3)), "{omega:?} {i}: {dm} vs {fm}");
                assert!(close(dv, fv, 1e-7 * dv.abs().max(1e-3)), "{omega:?} {i}: {dv} vs {fv}");
            }
        }
        assert!(matches!(weighted_stats_grad(&[0.0, 0.0], OmegaSpec::Power(1.0), 0), Err(Error::DivisionByZero(_))));
    }

    #[test]
    fn gap_quadrature_examples() {
        assert_eq!(amgm_gap_bounds_quadrature(1.0, &[0.4; 5], 1.0, 1e-12).unwrap(), (0.0, 0.0));
        let (lo, hi) = amgm_gap_bounds_quadrature(1.0, &[0.2, 0.8], 1.0, 1e-12).unwrap();
        assert!(lo <= 0.03 && 0.03 <= hi, "{lo} {hi}");
        let inst = GpbInstance::common_beta(3.0, vec![0.3, 0.7], 1.0).unwrap();
        let gap = h_envelope(3.0, 1.0, 0.5, 2).unwrap() - expected_reciprocal_exact(&inst).unwrap().value;
        let (lo, hi) = amgm_gap_bounds_quadrature(3.0, &[0.3, 0.7], 1.0, 1e-13).unwrap();
        assert!(lo < gap && gap < hi, "{lo} {gap} {hi}");
    }

    fn h_quad(q: f64, beta: f64, abar: f64, m: usize, back: bool) -> f64 {
        // int t^(q-1) (1-a+a t^b)^m (1-t^b)^2 / t^(2b if back) dt, integrated in u = t^p
        // with p = q - 2b (or q) to keep the integrand bounded.
        let p = if back { q - 2.0 * beta } else { q };
        integrate(
            |u| {
                let t = libm::pow(u, 1.0 / p);
                let tb = libm::pow(t, beta);
                libm::pow(1.0 - abar + abar * tb, m as f64) * (1.0 - tb) * (1.0 - tb)
            },
            0.0,
            1.0,
            1e-14,
        )
        .unwrap()
        .value
            / p
    }

    #[test]
    fn backward_examples() {
        assert!(close(second_diff_backward(3.0, 1.0, 0.0, 9).unwrap(), 1.0 / 3.0, 1e-15));
        assert!(close(second_diff_backward(3.0, 1.0, 1.0, 1).unwrap(), 1.0 / 12.0, 1e-15));
        let v = second_diff_backward(2.0, 0.5, 0.5, 4).unwrap();
        assert!(close(v, h_quad(2.0, 0.5, 0.5, 4, true), 1e-9));
        assert!(matches!(second_diff_backward(2.0, 1.0, 0.5, 4), Err(Error::NotIntegrable { .. })));
    }

    #[test]
    fn forward_examples() {
        let (q, b) = (1.7, 0.6);
        let v = second_diff_forward(q, b, 0.0, 5).unwrap();
        assert!(close(v, 1.0 / q - 2.0 / (q + b) + 1.0 / (q + 2.0 * b), 1e-15));
        assert!(close(second_diff_forward(1.0, 1.0, 1.0, 1).unwrap(), 1.0 / 12.0, 1e-15));
        let v = second_diff_forward(2.0, 1.0, 0.5, 3).unwrap();
        assert!(close(v, h_quad(2.0, 1.0, 0.5, 3, false), 1e-10));
        assert!(v >= 0.0);
    }

    #[test]
    fn a_tilde_examples() {
        assert_eq!(a_tilde(2.0, 1.0, 0.3, 0).unwrap(), 0.0);
        assert!(close(a_tilde(3.0, 1.0, 0.0, 1).unwrap(), -1.0 / 60.0, 1e-15));
        let h = 1e-5;
        let fd = (second_diff_forward(2.0, 0.5, 0.6 + h, 5).unwrap() - second_diff_forward(2.0, 0.5, 0.6 - h, 5).unwrap())
            / (2.0 * h);
        let a = a_tilde(2.0, 0.5, 0.6, 5).unwrap();
        assert!(close(a, fd, 1e-7 * a.abs()));
    }

    #[test]
    fn penalty_examples() {
        let p = zero_aware_penalty(1.0, &[0.0, 1.0, 1.0, 0.0], 1.0, 4, OmegaSpec::BernoulliVariance).unwrap();
        assert_eq!(p.value, 0.0);
        let p = zero_aware_penalty(5.0, &[0.3; 6], 1.0, 6, OmegaSpec::Uniform).unwrap();
        assert_eq!(p.value, 0.0);

        let p = zero_aware_penalty(5.0, &[0.2, 0.8], 1.0, 2, OmegaSpec::Power(1.0)).unwrap();
        let want = 0.0576 * second_diff_backward(5.0, 1.0, 0.5, 2).unwrap();
        assert!(close(p.value, want, 1e-15));
        assert_eq!(p.kind, GapKind::BackwardDiff);
        let inst = GpbInstance::common_beta(5.0, vec![0.2, 0.8], 1.0).unwrap();
        let gap = h_envelope(5.0, 1.0, 0.5, 2).unwrap() - expected_reciprocal_exact(&inst).unwrap().value;
        assert!(gap <= p.value);

        let p = zero_aware_penalty(1.0, &[0.2, 0.8], 1.0, 2, OmegaSpec::Uniform).unwrap();
        assert_eq!(p.kind, GapKind::ForwardDiff);
        assert!(!p.certified_upper);
    }

    #[test]
    fn padding_with_zeros_is_invisible_to_weighted_penalty() {
        let base = [0.15, 0.6, 0.9, 0.33];
        let mut padded = base.to_vec();
        padded.extend([0.0; 10]);
        for omega in [OmegaSpec::Power(1.0), OmegaSpec::Power(2.0), OmegaSpec::BernoulliVariance] {
            let a = zero_aware_penalty(4.0, &base, 1.0, base.len(), omega).unwrap().value;
            let b = zero_aware_penalty(4.0, &padded, 1.0, padded.len(), omega).unwrap().value;
            assert!(close(a, b, 1e-15), "{omega:?}");
        }
        let a = zero_aware_penalty(4.0, &base, 1.0, base.len(), OmegaSpec::Uniform).unwrap().value;
        let b = zero_aware_penalty(4.0, &padded, 1.0, padded.len(), OmegaSpec::Uniform).unwrap().value;
        assert!(b > a);
    }
}

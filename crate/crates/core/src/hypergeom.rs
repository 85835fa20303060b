//! Degree-truncated Gauss hypergeometric polynomials `2F1(-m, b; c; z)` on `z in [0, 1]`.
//!
//! Two evaluation routes are available:
//!
//! * the defining power series, generated by the term-ratio recurrence
//!   `t_k = t_{k-1} * (k-1-m)(b+k-1) / ((c+k-1) k) * z` and summed with Neumaier
//!   compensation, stopping early once the geometric tail is below `EPS_REL`;
//! * the Bernstein form `sum_k C(m,k) z^k (1-z)^(m-k) (c-b)_k / (c)_k`, which is the
//!   Pfaff transform of the same polynomial. For `c > b` every term is positive, so it
//!   does not suffer the cancellation the alternating series has near `z = 1`.
//!
//! [`f21_neg_int`] runs the series first and switches to the Bernstein form when the
//! series lost more than about two digits to cancellation.

use crate::error::invalid;
use crate::sum::NeumaierSum;
use crate::{Error, Result};

/// Relative tolerance of the early-exit rule.
pub const EPS_REL: f64 = 1e-14;
/// Absolute floor used by the early-exit rule.
pub const DELTA_ABS: f64 = 16.0 * f64::EPSILON;
/// Largest truncation degree accepted.
pub const MAX_DEGREE: usize = 1_000_000;

/// Cancellation ratio `sum |t_k| / |sum t_k|` above which the series result is replaced.
const CONDITION_LIMIT: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct F21Params {
    /// Truncation degree; the first numerator parameter is `-m`.
    pub m: usize,
    pub b: f64,
    pub c: f64,
    pub z: f64,
}

impl F21Params {
    pub fn new(m: usize, b: f64, c: f64, z: f64) -> Self {
        Self { m, b, c, z }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m > MAX_DEGREE {
            return Err(invalid("m", alloc::format!("degree {} exceeds cap {MAX_DEGREE}", self.m)));
        }
        if !(self.b > 0.0) || !self.b.is_finite() {
            return Err(invalid("b", alloc::format!("must be positive and finite, got {}", self.b)));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(invalid("c", alloc::format!("must be positive and finite, got {}", self.c)));
        }
        if !(0.0..=1.0).contains(&self.z) {
            return Err(invalid("z", alloc::format!("must lie in [0, 1], got {}", self.z)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum F21Method {
    Series,
    Bernstein,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F21Eval {
    pub value: f64,
    /// Number of terms actually accumulated (at most `m + 1`).
    pub terms_used: usize,
    pub converged_early: bool,
    pub method: F21Method,
}

/// Series evaluation together with `sum |t_k|`, used to judge cancellation.
struct SeriesOutcome {
    eval: F21Eval,
    abs_sum: f64,
}

fn series(p: &F21Params, early_exit: bool) -> SeriesOutcome {
    let m = p.m as f64;
    let mut sum = NeumaierSum::with_value(1.0);
    let mut abs_sum = 1.0;
    let mut term = 1.0;
    let mut terms = 1usize;
    // The tail bound below relies on the term ratios decreasing in k, which holds for b >= 1.
    let tail_bound_valid = early_exit && p.b >= 1.0;

    for k in 1..=p.m {
        let kf = k as f64;
        let ratio = (kf - 1.0 - m) * (p.b + kf - 1.0) / ((p.c + kf - 1.0) * kf) * p.z;
        if tail_bound_valid {
            let r = libm::fabs(ratio);
            if r < 1.0 {
                // Remaining tail is at most |t_{k-1}| * r / (1 - r).
                let tail = libm::fabs(term) * r / (1.0 - r);
                let floor = libm::fabs(sum.value()).max(DELTA_ABS);
                if tail < 0.5 * EPS_REL * floor {
                    break;
                }
            }
        }
        term *= ratio;
        sum.add(term);
        abs_sum += libm::fabs(term);
        terms += 1;
    }

    SeriesOutcome {
        eval: F21Eval {
            value: sum.value(),
            terms_used: terms,
            converged_early: terms < p.m + 1,
            method: F21Method::Series,
        },
        abs_sum,
    }
}

/// `(c - b)_k / (c)_k`.
fn pochhammer_ratio(b: f64, c: f64, k: usize) -> f64 {
    let kf = k as f64;
    if b == libm::floor(b) && b <= 16.0 {
        // (c-b)_k / (c)_k = prod_{i<b} (c-b+i) / (c-b+i+k) for integer b.
        let mut r = 1.0;
        let mut i = 0.0;
        while i < b {
            r *= (c - b + i) / (c - b + i + kf);
            i += 1.0;
        }
        r
    } else {
        let mut r = 1.0;
        for i in 0..k {
            let fi = i as f64;
            r *= (c - b + fi) / (c + fi);
        }
        r
    }
}

fn bernstein(p: &F21Params) -> F21Eval {
    let done = |value: f64, terms: usize| F21Eval {
        value,
        terms_used: terms,
        converged_early: terms < p.m + 1,
        method: F21Method::Bernstein,
    };
    if p.m == 0 || p.z == 0.0 {
        return done(1.0, 1);
    }
    if p.z == 1.0 {
        return done(pochhammer_ratio(p.b, p.c, p.m), 1);
    }

    let m = p.m;
    let mf = m as f64;
    let odds = p.z / (1.0 - p.z);
    let mode = (libm::floor((mf + 1.0) * p.z) as usize).min(m);
    let g_mode = pochhammer_ratio(p.b, p.c, mode);

    // Weights are the binomial pmf scaled so that the mode has weight 1.
    let mut num = NeumaierSum::with_value(g_mode);
    let mut den = NeumaierSum::with_value(1.0);
    let mut terms = 1usize;

    let (mut u, mut g, mut k) = (1.0f64, g_mode, mode);
    while k < m {
        let kf = k as f64;
        let r = (mf - kf) / (kf + 1.0) * odds;
        if r < 1.0 && u * r / (1.0 - r) < 0.25 * EPS_REL * den.value() {
            break;
        }
        u *= r;
        g *= (p.c - p.b + kf) / (p.c + kf);
        k += 1;
        num.add(u * g);
        den.add(u);
        terms += 1;
    }

    let (mut u, mut g, mut k) = (1.0f64, g_mode, mode);
    while k > 0 {
        let kf = k as f64;
        let r = kf / (mf - kf + 1.0) / odds;
        if r < 1.0 && u * r / (1.0 - r) < 0.25 * EPS_REL * den.value() {
            break;
        }
        u *= r;
        g *= (p.c + kf - 1.0) / (p.c - p.b + kf - 1.0);
        k -= 1;
        num.add(u * g);
        den.add(u);
        terms += 1;
    }

    done(num.value() / den.value(), terms)
}

/// Evaluates `2F1(-m, b; c; z)`.
///
/// The defining series is tried first; if more than `log10(64)` digits were lost to
/// cancellation and `c > b`, the value is recomputed from the positive Bernstein form.
pub fn f21_neg_int(params: F21Params) -> Result<F21Eval> {
    params.validate()?;
    let out = series(&params, true);
    let value = out.eval.value;
    let ill_conditioned = !value.is_finite() || !out.abs_sum.is_finite() || out.abs_sum > CONDITION_LIMIT * libm::fabs(value);
    if params.c > params.b && ill_conditioned {
        return Ok(bernstein(&params));
    }
    Ok(out.eval)
}

/// Plain series evaluation; `early_exit = false` sums all `m + 1` terms.
///
/// Exposed for diagnostics and for checking the early-exit rule.
pub fn f21_series(params: F21Params, early_exit: bool) -> Result<F21Eval> {
    params.validate()?;
    Ok(series(&params, early_exit).eval)
}

/// Bernstein-form evaluation; only defined for `c > b`.
pub fn f21_bernstein(params: F21Params) -> Result<F21Eval> {
    params.validate()?;
    if !(params.c > params.b) {
        return Err(invalid("c", "Bernstein form needs c > b"));
    }
    Ok(bernstein(&params))
}

/// `d/dz 2F1(-m, b; c; z) = (-m b / c) 2F1(-m+1, b+1; c+1; z)`; zero for `m = 0`.
pub fn f21_derivative(params: F21Params) -> Result<f64> {
    params.validate()?;
    if params.m == 0 {
        return Ok(0.0);
    }
    let inner = f21_neg_int(F21Params::new(
        params.m - 1,
        params.b + 1.0,
        params.c + 1.0,
        params.z,
    ))?;
    Ok(-(params.m as f64) * params.b / params.c * inner.value)
}

/// `d/dz log 2F1(-m, 1; c; z) = -(m / c) F2 / F1` with `F2 = 2F1(-m+1, 2; c+1; z)`.
pub fn f21_log_derivative(m: usize, c: f64, z: f64) -> Result<f64> {
    let f1 = f21_neg_int(F21Params::new(m, 1.0, c, z))?.value;
    if !(f1 > 0.0) {
        return Err(Error::Degenerate(alloc::format!(
            "2F1(-{m}, 1; {c}; {z}) = {f1} is not positive"
        )));
    }
    if m == 0 {
        return Ok(0.0);
    }
    let f2 = f21_neg_int(F21Params::new(m - 1, 2.0, c + 1.0, z))?.value;
    Ok(-(m as f64) / c * f2 / f1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    fn f(m: usize, b: f64, c: f64, z: f64) -> f64 {
        f21_neg_int(F21Params::new(m, b, c, z)).unwrap().value
    }

    /// Euler integral with b = 1: (c-1) * int_0^1 (1-t)^(c-2) (1-zt)^m dt.
    /// Substituting s = 1 - t and then s = v^(1/(c-1)) removes the endpoint singularity.
    fn euler_oracle(m: usize, c: f64, z: f64) -> f64 {
        let a = c - 1.0;
        integrate(
            |v| {
                let s = libm::pow(v, 1.0 / a);
                libm::pow(1.0 - z + z * s, m as f64)
            },
            0.0,
            1.0,
            1e-13,
        )
        .unwrap()
        .value
    }

    #[test]
    fn spec_examples() {
        assert_eq!(f(0, 1.0, 2.0, 0.7), 1.0);
        assert!((f(1, 1.0, 2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((f(3, 1.0, 2.0, 1.0) - 0.25).abs() < 1e-15);
        // 1 - 2*(0.5)/2 + 2*(0.25)/(2*3) = 7/12
        assert!((f(2, 1.0, 2.0, 0.5) - 7.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn matches_euler_integral() {
        for &(m, c, z) in &[(2, 2.0, 0.5), (7, 1.5, 0.9), (30, 3.0, 0.4), (64, 1.5, 1.0), (64, 20.0, 0.7)] {
            let oracle = euler_oracle(m, c, z);
            let got = f(m, 1.0, c, z);
            assert!((got - oracle).abs() < 1e-11 * oracle.max(1e-3), "m={m} c={c} z={z}: {got} vs {oracle}");
        }
    }

    #[test]
    fn chu_vandermonde_at_one() {
        // 2F1(-m, 1; c; 1) = (c-1)/(c-1+m)
        for &m in &[1usize, 5, 40, 64, 1000, 100_000] {
            for &c in &[1.5, 2.0, 5.0, 20.0] {
                let want = (c - 1.0) / (c - 1.0 + m as f64);
                let got = f(m, 1.0, c, 1.0);
                assert!((got - want).abs() <= 1e-13 * want, "m={m} c={c}");
            }
        }
    }

    #[test]
    fn large_degree_is_stable() {
        // Binomial mean of q/(q + k beta) for q = beta: value near 1/(1 + m z).
        let v = f(1_000_000, 1.0, 2.0, 0.5);
        assert!(v > 0.0 && v < 1.0);
        let approx = 1.0 / (1.0 + 500_000.0);
        assert!((v - approx).abs() / approx < 1e-4);
    }

    #[test]
    fn bernstein_agrees_with_series_where_well_conditioned() {
        for &(m, b, c, z) in &[(5, 1.0, 2.0, 0.3), (12, 2.0, 3.5, 0.2), (9, 1.0, 7.0, 0.8)] {
            let p = F21Params::new(m, b, c, z);
            let s = f21_series(p, false).unwrap().value;
            let bz = f21_bernstein(p).unwrap().value;
            assert!((s - bz).abs() < 1e-14, "{p:?}");
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(f21_neg_int(F21Params::new(3, 1.0, 0.0, 0.5)).is_err());
        assert!(f21_neg_int(F21Params::new(3, 1.0, -1.0, 0.5)).is_err());
        assert!(f21_neg_int(F21Params::new(3, 1.0, 2.0, 1.5)).is_err());
        assert!(f21_neg_int(F21Params::new(3, 1.0, 2.0, -0.1)).is_err());
        assert!(f21_neg_int(F21Params::new(MAX_DEGREE + 1, 1.0, 2.0, 0.1)).is_err());
    }

    #[test]
    fn z_zero_is_exactly_one() {
        let e = f21_neg_int(F21Params::new(50, 1.0, 2.0, 0.0)).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.terms_used, 1);
        assert!(e.converged_early);
    }

    #[test]
    fn derivative_examples() {
        let d = f21_derivative(F21Params::new(1, 1.0, 2.0, 0.3)).unwrap();
        assert!((d + 0.5).abs() < 1e-15);
        let d = f21_derivative(F21Params::new(3, 1.0, 2.0, 0.0)).unwrap();
        assert!((d + 1.5).abs() < 1e-15);
        assert_eq!(f21_derivative(F21Params::new(0, 1.0, 2.0, 0.4)).unwrap(), 0.0);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let h = 1e-5;
        for &(m, b, c, z) in &[(2, 1.0, 2.0, 0.5), (9, 1.0, 1.5, 0.6), (20, 2.0, 4.0, 0.35)] {
            let fd = (f(m, b, c, z + h) - f(m, b, c, z - h)) / (2.0 * h);
            let d = f21_derivative(F21Params::new(m, b, c, z)).unwrap();
            assert!((fd - d).abs() <= 1e-8 * d.abs(), "m={m}: {fd} vs {d}");
        }
    }

    #[test]
    fn log_derivative_examples() {
        assert!((f21_log_derivative(1, 2.0, 0.0).unwrap() + 0.5).abs() < 1e-15);
        assert_eq!(f21_log_derivative(0, 3.0, 0.4).unwrap(), 0.0);
        let h = 1e-5;
        let (m, c, z) = (4, 3.0, 0.6);
        let fd = (libm::log(f(m, 1.0, c, z + h)) - libm::log(f(m, 1.0, c, z - h))) / (2.0 * h);
        let ld = f21_log_derivative(m, c, z).unwrap();
        assert!((fd - ld).abs() <= 1e-7 * ld.abs());
        let ratio = f21_derivative(F21Params::new(m, 1.0, c, z)).unwrap() / f(m, 1.0, c, z);
        assert!((ratio - ld).abs() <= 1e-12 * ld.abs());
    }

    #[test]
    fn log_derivative_rejects_nonpositive_value() {
        // c < 1 leaves the envelope family: 2F1(-3, 1; 0.5; 1) = (c-1)/(c-1+m) < 0.
        assert!(matches!(f21_log_derivative(3, 0.5, 1.0), Err(Error::Degenerate(_))));
    }
}

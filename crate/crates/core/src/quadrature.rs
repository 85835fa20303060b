//! Globally adaptive Gauss–Kronrod (7/15) quadrature on a finite interval.
//!
//! Panels are bisected in order of decreasing error estimate until the summed
//! estimate falls below the requested absolute tolerance. The per-panel estimate is
//! the raw `|K15 - G7|` difference, which overestimates the true error for smooth
//! integrands; the oracles prefer a pessimistic certificate over a cheap one.

use alloc::collections::BinaryHeap;
use core::cmp::Ordering;

use crate::sum::NeumaierSum;
use crate::{Error, Result};

/// Upper limit on the number of panels used by [`integrate`] unless overridden.
pub const DEFAULT_MAX_PANELS: usize = 20_000;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub panels: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += wk * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = libm::fabs((kronrod - gauss) * half);
    Panel { a, b, value, error }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol` with the default panel budget.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadResult> {
    integrate_with_budget(f, a, b, tol, DEFAULT_MAX_PANELS)
}

/// Integrates `f` over `[a, b]` until the summed `|K15 - G7|` estimate is at most `tol`.
pub fn integrate_with_budget<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_panels: usize,
) -> Result<QuadResult> {
    if !(tol > 0.0) {
        return Err(crate::error::invalid("tol", "tolerance must be positive"));
    }
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(crate::error::invalid("interval", "need finite a <= b"));
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error_estimate: 0.0,
            panels: 0,
        });
    }

    let first = kronrod15(&f, a, b);
    if !first.value.is_finite() {
        return Err(Error::Degenerate("integrand is not finite".into()));
    }
    let mut total_error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);

    while total_error > tol {
        if heap.len() >= max_panels {
            break;
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Panel cannot be split further in floating point.
            heap.push(worst);
            break;
        }
        let left = kronrod15(&f, worst.a, mid);
        let right = kronrod15(&f, mid, worst.b);
        total_error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if heap.len() % 64 == 0 {
            // Re-sum to stop drift in the running error total.
            total_error = heap.iter().map(|p| p.error).sum();
        }
    }

    let panels = heap.len();
    let mut value = NeumaierSum::new();
    let mut error = NeumaierSum::new();
    for p in heap.iter() {
        value.add(p.value);
        error.add(p.error);
    }
    let value = value.value();
    let error_estimate = error.value();
    if !value.is_finite() {
        return Err(Error::Degenerate("integrand is not finite".into()));
    }
    if error_estimate > tol {
        return Err(Error::ToleranceNotMet {
            tol,
            estimate: error_estimate,
            intervals: panels,
        });
    }
    Ok(QuadResult {
        value,
        error_estimate,
        panels,
    })
}

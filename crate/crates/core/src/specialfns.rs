//! Scalar special functions used throughout the crate.
//!
//! Everything that can overflow in linear space (the Bessel function at large
//! arguments, the detection statistic) is carried as a natural logarithm.
//! Entropies are reported in bits; every other logarithm is natural.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Natural logarithm of a nonnegative quantity.
///
/// `LogValue(f64::NEG_INFINITY)` represents zero.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogValue(pub f64);

impl LogValue {
    pub const ZERO: LogValue = LogValue(f64::NEG_INFINITY);
    pub const ONE: LogValue = LogValue(0.0);

    pub fn from_linear(value: f64) -> Result<Self> {
        if !(value >= 0.0) {
            return Err(Error::domain(format!(
                "LogValue requires a nonnegative quantity, got {value}"
            )));
        }
        Ok(LogValue(value.ln()))
    }

    #[inline]
    pub fn ln(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn exp(self) -> f64 {
        self.0.exp()
    }
}

/// Arguments below this use the power series, above it the asymptotic expansion.
pub const LOG_I0_CROSSOVER: f64 = 15.0;

/// `ln I₀(x)` for `x ≥ 0`.
pub fn log_i0(x: f64) -> Result<LogValue> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::domain(format!(
            "log_i0 requires a finite nonnegative argument, got {x}"
        )));
    }
    Ok(LogValue(ln_i0(x)))
}

/// Unchecked `ln I₀(|x|)` for hot loops.
#[inline]
pub(crate) fn ln_i0(x: f64) -> f64 {
    let x = x.abs();
    if x < LOG_I0_CROSSOVER {
        ln_i0_series(x)
    } else {
        ln_i0_asymptotic(x)
    }
}

/// Σ (x²/4)ᵏ / (k!)², all terms positive.
pub(crate) fn ln_i0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
        k += 1.0;
    }
    sum.ln()
}

/// Hankel expansion I₀(x) ~ eˣ/√(2πx) · Σ ((2k−1)!!)² / (k! 8ᵏ xᵏ).
///
/// Summed until the terms stop shrinking (the series is asymptotic), with at
/// least four correction terms.
pub(crate) fn ln_i0_asymptotic(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0_f64;
    loop {
        let next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * x);
        if k > 4.0 && (next >= term || next <= sum * 1e-17) {
            break;
        }
        term = next;
        sum += term;
        k += 1.0;
        if k > 200.0 {
            break;
        }
    }
    x - 0.5 * (2.0 * PI * x).ln() + sum.ln()
}

/// Generalized Marcum Q of order one,
/// `Q₁(a,b) = ∫_b^∞ t·exp(−(t²+a²)/2)·I₀(at) dt`.
pub fn marcum_q1(a: f64, b: f64) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() || a < 0.0 || b < 0.0 {
        return Err(Error::domain(format!(
            "marcum_q1 requires finite nonnegative arguments, got ({a}, {b})"
        )));
    }
    if b == 0.0 {
        return Ok(1.0);
    }
    if a == 0.0 {
        return Ok((-0.5 * b * b).exp());
    }
    let q = if a * b > MARCUM_SERIES_LIMIT {
        marcum_q1_quadrature(a, b)
    } else {
        marcum_q1_series(a, b)
    };
    Ok(q.clamp(0.0, 1.0))
}

/// Above this value of `a·b` the Bessel series is replaced by quadrature.
pub const MARCUM_SERIES_LIMIT: f64 = 700.0;

/// Ratios `I_k(z)/I_0(z)` for `k = 0..=kmax` by backward recurrence on
/// `I_k/I_{k−1} = 1 / (2k/z + I_{k+1}/I_k)`.
fn bessel_ratios(z: f64, kmax: usize) -> Vec<f64> {
    let start = kmax + 40;
    let mut ratio = vec![0.0; start + 2];
    for k in (1..=start).rev() {
        ratio[k] = 1.0 / (2.0 * k as f64 / z + ratio[k + 1]);
    }
    let mut out = Vec::with_capacity(kmax + 1);
    let mut acc = 1.0;
    out.push(acc);
    for r in ratio.iter().take(kmax + 1).skip(1) {
        acc *= r;
        out.push(acc);
    }
    out
}

pub(crate) fn marcum_q1_series(a: f64, b: f64) -> f64 {
    let z = a * b;
    let kmax = (10.0 * z.sqrt() + 60.0).ceil() as usize;
    let ratios = bessel_ratios(z, kmax);
    let log_prefactor = ln_i0(z) - 0.5 * (a * a + b * b);
    if a < b {
        // Q = e^{-(a²+b²)/2} Σ_{k≥0} (a/b)^k I_k(ab)
        let q = a / b;
        let mut sum = 0.0;
        let mut qk = 1.0;
        for r in &ratios {
            let term = qk * r;
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
            qk *= q;
        }
        (log_prefactor + sum.ln()).exp()
    } else {
        // 1 − Q = e^{-(a²+b²)/2} Σ_{k≥1} (b/a)^k I_k(ab)
        let q = b / a;
        let mut sum = 0.0;
        let mut qk = q;
        for r in ratios.iter().skip(1) {
            let term = qk * r;
            sum += term;
            if term <= sum * 1e-17 {
                break;
            }
            qk *= q;
        }
        if sum == 0.0 {
            return 1.0;
        }
        1.0 - (log_prefactor + sum.ln()).exp()
    }
}

/// Direct quadrature of the defining integral, written with the exponentially
/// scaled Bessel function so the integrand stays O(1).
pub(crate) fn marcum_q1_quadrature(a: f64, b: f64) -> f64 {
    const HALF_WIDTH: f64 = 40.0;
    if b > a + HALF_WIDTH {
        return 0.0;
    }
    let lo = b.max(a - HALF_WIDTH).max(0.0);
    let hi = a + HALF_WIDTH;
    let integrand = |t: f64| {
        if t == 0.0 {
            return 0.0;
        }
        let d = t - a;
        t * (-0.5 * d * d + ln_i0(a * t) - a * t).exp()
    };
    gauss_legendre_composite(integrand, lo, hi, ((hi - lo) / 0.5).ceil() as usize)
}

fn gauss_legendre_composite(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(16);
    let panels = panels.max(1);
    let h = (hi - lo) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let a = lo + p as f64 * h;
        let mid = a + 0.5 * h;
        let mut s = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            s += w * f(mid + 0.5 * h * x);
        }
        total += 0.5 * h * s;
    }
    total
}

/// Gauss–Legendre nodes and weights on [−1, 1] via Newton iteration.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 1.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Normalized sinc, `sin(πx)/(πx)` with `sinc(0) = 1`.
///
/// The argument is reduced to `[−½, ½]` before calling `sin`, so nonzero
/// integers return exactly zero.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let k = x.round();
    let r = x - k;
    if r == 0.0 {
        return 0.0;
    }
    let s = (PI * r).sin();
    let s = if (k as i64) % 2 == 0 { s } else { -s };
    s / (PI * x)
}

/// Binary entropy in bits, with `0·log 0 ≡ 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!(
            "binary_entropy requires p in [0, 1], got {p}"
        )));
    }
    Ok(binary_entropy_bits(p))
}

#[inline]
pub(crate) fn binary_entropy_bits(p: f64) -> f64 {
    xlog2x(p) + xlog2x(1.0 - p)
}

/// `−x·log₂x` with the convention `0·log 0 = 0`.
#[inline]
fn xlog2x(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.ln() / LN_2
    }
}

/// `ln Σ wᵢ·exp(tᵢ)` by max-shift. Missing weights mean all ones.
pub fn log_sum_exp(terms: &[LogValue], weights: Option<&[f64]>) -> Result<LogValue> {
    if terms.is_empty() {
        return Err(Error::domain("log_sum_exp of an empty sequence"));
    }
    if let Some(w) = weights {
        if w.len() != terms.len() {
            return Err(Error::domain(format!(
                "log_sum_exp: {} terms but {} weights",
                terms.len(),
                w.len()
            )));
        }
        if let Some(bad) = w.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::domain(format!(
                "log_sum_exp weights must be positive, got {bad}"
            )));
        }
    }
    let (imax, max) = terms
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, t)| {
            if t.0 > acc.1 {
                (i, t.0)
            } else {
                acc
            }
        });
    if max == f64::NEG_INFINITY {
        return Ok(LogValue::ZERO);
    }
    if max.is_nan() || max == f64::INFINITY {
        return Ok(LogValue(max));
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    // The peak term is split off so that tiny remainders survive via ln_1p.
    let rest: f64 = terms
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != imax)
        .map(|(i, t)| weight(i) * (t.0 - max).exp())
        .sum();
    let w0 = weight(imax);
    Ok(LogValue(max + w0.ln() + (rest / w0).ln_1p()))
}

/// Unweighted `ln Σ exp(tᵢ)` over raw logs; `−∞` for an empty slice.
#[inline]
pub(crate) fn log_sum_exp_raw(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    max + sum.ln()
}

/// `ln(1 + eˣ)` without overflow.
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_i0_values() {
        assert_eq!(log_i0(0.0).unwrap().ln(), 0.0);
        assert!((log_i0(1.0).unwrap().ln() - 0.235_914_358_507_178_7).abs() < 1e-13);
        // ln I0(100) = 100 - 0.5 ln(200π) + ln(1 + 1/800 + 9/(2·800²) + ...)
        assert!((log_i0(100.0).unwrap().ln() - 96.779_732_689_942_58).abs() < 1e-10);
    }

    #[test]
    fn log_i0_rejects_bad_input() {
        assert!(log_i0(-1.0).is_err());
        assert!(log_i0(f64::NAN).is_err());
        assert!(log_i0(f64::INFINITY).is_err());
    }

    #[test]
    fn log_i0_branches_agree_at_crossover() {
        for x in [12.0, 14.0, 15.0, 16.0, 20.0, 25.0] {
            let s = ln_i0_series(x);
            let a = ln_i0_asymptotic(x);
            assert!((s - a).abs() < 1e-10, "x={x}: series {s} asymptotic {a}");
        }
    }

    #[test]
    fn log_i0_handles_huge_arguments() {
        let v = log_i0(1e4).unwrap().ln();
        assert!(v.is_finite());
        assert!((v - (1e4 - 0.5 * (2.0 * PI * 1e4).ln())).abs() < 1e-4);
    }

    #[test]
    fn marcum_edges() {
        assert_eq!(marcum_q1(3.0, 0.0).unwrap(), 1.0);
        assert!((marcum_q1(0.0, 2.0).unwrap() - (-2.0_f64).exp()).abs() < 1e-15);
        assert!(marcum_q1(-1.0, 1.0).is_err());
        assert!(marcum_q1(1.0, f64::NAN).is_err());
    }

    #[test]
    fn marcum_series_matches_quadrature_near_switch() {
        for (a, b) in [
            (25.0, 27.0),
            (27.0, 25.0),
            (26.4, 26.4),
            (20.0, 30.0),
            (5.0, 6.0),
        ] {
            let s = marcum_q1_series(a, b);
            let q = marcum_q1_quadrature(a, b);
            assert!((s - q).abs() < 1e-9, "({a},{b}): series {s} quad {q}");
        }
    }

    #[test]
    fn sinc_values() {
        assert_eq!(sinc(0.0), 1.0);
        for k in [-7, -1, 1, 2, 100] {
            assert_eq!(sinc(k as f64), 0.0);
        }
        assert!((sinc(0.5) - 2.0 / PI).abs() < 1e-15);
        assert!((sinc(-1.5) - sinc(1.5)).abs() < 1e-16);
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.11).unwrap() - 0.499_915_958_164_528).abs() < 1e-12);
        assert!(binary_entropy(1.1).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn lse_values() {
        let l = |v: f64| LogValue(v);
        assert!((log_sum_exp(&[l(0.0), l(0.0)], None).unwrap().ln() - LN_2).abs() < 1e-15);
        let big = log_sum_exp(&[l(1000.0), l(1000.0)], None).unwrap().ln();
        assert!((big - (1000.0 + LN_2)).abs() < 1e-12);
        let small = log_sum_exp(&[l(0.0), l(-50.0)], None).unwrap().ln();
        assert!((small - (-50.0_f64).exp()).abs() < 1e-30);
        let w = log_sum_exp(&[l(0.0), l(0.0)], Some(&[0.25, 0.25]))
            .unwrap()
            .ln();
        assert!((w - 0.5_f64.ln()).abs() < 1e-15);
        assert!(log_sum_exp(&[], None).is_err());
        assert!(log_sum_exp(&[l(0.0)], Some(&[-1.0])).is_err());
        assert_eq!(
            log_sum_exp(&[LogValue::ZERO], None).unwrap(),
            LogValue::ZERO
        );
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!((softplus(0.0) - LN_2).abs() < 1e-15);
        assert!(softplus(-1000.0) >= 0.0);
    }
}

//! Reference implementations that share no code with the library.

#![allow(dead_code)]

use std::f64::consts::PI;

/// ln I₀(x) from the periodic trapezoid rule on (1/2π)∫ e^{x cos θ} dθ,
/// which converges geometrically. The factor e^x is pulled out.
pub fn log_i0(x: f64) -> f64 {
    let n = 64 + (4.0 * x) as usize;
    let mean = (0..n)
        .map(|j| (x * ((2.0 * PI * j as f64 / n as f64).cos() - 1.0)).exp())
        .sum::<f64>()
        / n as f64;
    x + mean.ln()
}

/// I₀ by its power series; only for moderate arguments.
fn i0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let (mut term, mut sum, mut k) = (1.0f64, 1.0f64, 0.0f64);
    loop {
        k += 1.0;
        term *= q / (k * k);
        sum += term;
        if term < sum * 1e-17 {
            return sum;
        }
    }
}

/// Q₁(a,b) = 1 − ∫₀ᵇ t·exp(−(t²+a²)/2)·I₀(at) dt by composite Simpson.
pub fn marcum_q1(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        return 1.0;
    }
    let n = 4000;
    let h = b / n as f64;
    let f = |t: f64| t * (-(t * t + a * a) / 2.0).exp() * i0_series(a * t);
    let mut s = f(0.0) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    (1.0 - s * h / 3.0).clamp(0.0, 1.0)
}

/// sin(πx)/(πx) by Taylor series near zero, directly elsewhere.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let z = -(PI * x) * (PI * x);
        let (mut term, mut sum) = (1.0f64, 1.0f64);
        for k in 1..30 {
            term *= z / ((2 * k) as f64 * (2 * k + 1) as f64);
            sum += term;
        }
        sum
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Binary entropy in bits from log₂ directly.
pub fn binary_entropy(p: f64) -> f64 {
    let h = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    h(p) + h(1.0 - p)
}

/// Plug-in mutual information of a 2×2 count table `[[n00, n01], [n10, n11]]`.
pub fn mutual_information_2x2(n: [[u64; 2]; 2]) -> f64 {
    let total: u64 = n.iter().flatten().sum();
    let t = total as f64;
    let row = |v: usize| (n[v][0] + n[v][1]) as f64 / t;
    let col = |d: usize| (n[0][d] + n[1][d]) as f64 / t;
    let mut mi = 0.0;
    for (v, counts) in n.iter().enumerate() {
        for (d, &c) in counts.iter().enumerate() {
            let p = c as f64 / t;
            if p > 0.0 {
                mi += p * (p / (row(v) * col(d))).log2();
            }
        }
    }
    mi
}

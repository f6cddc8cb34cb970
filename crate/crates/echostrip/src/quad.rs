//! Quadrature primitives: Gauss-Legendre rules, an adaptive 1D integrator
//! with an embedded low/high order error estimate, and deterministic
//! pairwise summation used by every integral in the crate.

use crate::{Error, Result};
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre polynomial recurrence.  Accurate to machine precision for the
/// orders used here (n <= 128).
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "need at least one node");
    let mut out = Vec::with_capacity(n);
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess, then Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_pair(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        if 2 * i + 1 == n {
            // Middle root of an odd rule; Newton leaves ~1e-33 residue here.
            x = 0.0;
        }
        let (_, dp) = legendre_pair(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((-x, w));
    }
    // Mirror to the positive half; odd n shares the middle node.
    for i in (0..m).rev() {
        if 2 * i + 1 != n {
            let (x, w) = out[i];
            out.push((-x, w));
        }
    }
    out
}

fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Cached Gauss-Legendre rule; the tables are shared across the crate so
/// hot loops do not re-solve for nodes.
pub fn gauss_legendre_cached(n: usize) -> &'static [(f64, f64)] {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static [(f64, f64)]>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(n)
        .or_insert_with(|| Box::leak(gauss_legendre(n).into_boxed_slice()))
}

/// Nodes and weights mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    gauss_legendre_cached(n)
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect()
}

/// Fixed-order Gauss-Legendre integral of f on [a, b].
pub fn integrate_gl<F: FnMut(f64) -> f64>(n: usize, a: f64, b: f64, mut f: F) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let terms: Vec<f64> = gauss_legendre_cached(n)
        .iter()
        .map(|&(x, w)| half * w * f(mid + half * x))
        .collect();
    pairwise_sum(&terms)
}

fn gl_pair<F: FnMut(f64) -> f64>(a: f64, b: f64, f: &mut F) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let lo: Vec<f64> = gauss_legendre_cached(7)
        .iter()
        .map(|&(x, w)| half * w * f(mid + half * x))
        .collect();
    let hi: Vec<f64> = gauss_legendre_cached(15)
        .iter()
        .map(|&(x, w)| half * w * f(mid + half * x))
        .collect();
    (pairwise_sum(&lo), pairwise_sum(&hi))
}

/// Adaptive line integral to an absolute tolerance.  Each panel is judged
/// by an embedded 7/15-point Gauss pair and bisected until the estimate
/// drops below its share of the budget.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut total: f64 = 0.0;
    // Explicit stack: (a, b, tol share, depth).
    let mut stack = vec![(a, b, abs_tol, 0u32)];
    while let Some((lo, hi, tol, depth)) = stack.pop() {
        let (coarse, fine) = gl_pair(lo, hi, &mut f);
        let err = (fine - coarse).abs();
        // Roundoff floor: the embedded estimate cannot resolve below a few
        // ulps of the panel value, so halving the share forever would spin.
        let floor = 1e-15 * (fine.abs() + total.abs());
        if err <= tol.max(floor) {
            total += fine;
        } else if depth >= 40 {
            return Err(Error::QuadratureTolerance {
                a,
                b,
                tol: abs_tol,
                err,
            });
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * tol, depth + 1));
            stack.push((mid, hi, 0.5 * tol, depth + 1));
        }
    }
    Ok(total)
}

/// Pairwise (cascade) summation: deterministic and far more accurate than
/// a running sum for the long quadrature vectors used here.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n if n <= 8 => {
            let mut s = 0.0;
            for &x in xs {
                s += x;
            }
            s
        }
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Uniform trapezoid sum over samples with spacing h (non-periodic).
pub fn trapezoid(samples: &[f64], h: f64) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let inner = pairwise_sum(&samples[1..samples.len() - 1]);
    h * (0.5 * (samples[0] + samples[samples.len() - 1]) + inner)
}

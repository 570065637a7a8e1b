//! Gauss–Legendre quadrature, fixed and adaptive.

use std::sync::OnceLock;

/// Nodes and weights of the `n`-point rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn rule16() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(16))
}

fn rule8() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(8))
}

/// Applies the rule `(nodes, weights)` to `f` on `[a, b]`.
pub fn apply<F: FnMut(f64) -> f64>(rule: &(Vec<f64>, Vec<f64>), a: f64, b: f64, mut f: F) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule.0
        .iter()
        .zip(&rule.1)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// 16-point Gauss–Legendre on `[a, b]`.
pub fn gl16<F: FnMut(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    apply(rule16(), a, b, f)
}

/// Adaptive bisection on 16-point panels until the two-halves estimate
/// agrees with the whole-panel estimate to `tol` (absolute, scaled by the
/// panel share). Returns `None` when the depth budget runs out.
pub fn adaptive<F: Fn(f64) -> f64>(a: f64, b: f64, tol: f64, f: &F) -> Option<f64> {
    if a == b {
        return Some(0.0);
    }
    let whole = gl16(a, b, f);
    recurse(a, b, whole, tol, f, 0)
}

fn recurse<F: Fn(f64) -> f64>(a: f64, b: f64, whole: f64, tol: f64, f: &F, depth: u32) -> Option<f64> {
    let m = 0.5 * (a + b);
    let left = gl16(a, m, f);
    let right = gl16(m, b, f);
    let both = left + right;
    if !both.is_finite() {
        return None;
    }
    if (both - whole).abs() <= tol.max(256.0 * f64::EPSILON * both.abs()) {
        return Some(both);
    }
    if depth >= 40 {
        return None;
    }
    let l = recurse(a, m, left, 0.5 * tol, f, depth + 1)?;
    let r = recurse(m, b, right, 0.5 * tol, f, depth + 1)?;
    Some(l + r)
}

/// Adaptive bisection on 8-point panels with a per-panel tolerance that
/// scales with panel width. Panels narrower than `min_width` are accepted
/// as they are, so integrands with jumps always terminate.
pub fn adaptive_bounded<F: Fn(f64) -> f64>(a: f64, b: f64, tol: f64, min_width: f64, f: &F) -> f64 {
    if a == b {
        return 0.0;
    }
    let whole = apply(rule8(), a, b, f);
    bounded(a, b, whole, tol / (b - a), min_width, f)
}

fn bounded<F: Fn(f64) -> f64>(a: f64, b: f64, whole: f64, density: f64, min_width: f64, f: &F) -> f64 {
    let m = 0.5 * (a + b);
    let left = apply(rule8(), a, m, f);
    let right = apply(rule8(), m, b, f);
    let both = left + right;
    if (both - whole).abs() <= density * (b - a) || b - a <= min_width || !both.is_finite() {
        return both;
    }
    bounded(a, m, left, density, min_width, f) + bounded(m, b, right, density, min_width, f)
}

use super::{LocalTimeField, SampledPath, Side, StateInterval};
use crate::error::{input, Result};

/// Threshold level `n` with `2^-n` just above single-step noise: `floor(log2(N) / 2)`.
pub fn default_qv_level(steps: usize) -> u32 {
    ((steps.max(2) as f64).log2() / 2.0).floor().max(1.0) as u32
}

/// `8 * std(increments)`, i.e. eight times the typical one-step move.
pub fn default_bandwidth(path: &SampledPath) -> f64 {
    8.0 * increment_rms(path)
}

fn increment_rms(path: &SampledPath) -> f64 {
    let live = path.live_len();
    if live < 2 {
        return 0.0;
    }
    let v = path.values();
    let inc = || v[..live].windows(2).map(|w| w[1] - w[0]);
    let n = (live - 1) as f64;
    let mean = inc().sum::<f64>() / n;
    (inc().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n).sqrt()
}

/// Quadratic variation through the level-`n` threshold stopping times.
///
/// The path is scanned node by node; a stopping time fires at the first
/// node whose distance to the current anchor reaches `2^-n`, the squared
/// move is booked and the anchor moves there. The pending partial move is
/// included, and the output is the running maximum, so it is nondecreasing.
pub fn quadratic_variation(path: &SampledPath, n: u32) -> Result<SampledPath> {
    if n == 0 {
        return input("quadratic variation level must be >= 1");
    }
    let thr = (-(n as f64)).exp2();
    let v = path.values();
    let live = path.live_len();
    let mut out = Vec::with_capacity(path.len());
    out.push(0.0);
    let mut anchor = v[0];
    let mut booked = 0.0;
    let mut best: f64 = 0.0;
    for &x in &v[1..live] {
        let d = x - anchor;
        let cur = if d.abs() >= thr {
            booked += d * d;
            anchor = x;
            booked
        } else {
            booked + d * d
        };
        best = best.max(cur);
        out.push(best);
    }
    out.resize(path.len(), best);
    SampledPath::new(path.times().to_vec(), out)
}

/// Band estimate of the local time at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeEstimate {
    pub path: SampledPath,
    /// False when the band is narrower than a typical one-step move.
    pub reliable: bool,
}

/// Share of the segment from `a` to `b` that lies in `[lo, hi)`; a step
/// that does not move counts fully when its start is in the band.
#[inline]
fn overlap(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    let (p, q) = if a <= b { (a, b) } else { (b, a) };
    if q == p {
        return (lo <= a && a < hi) as u8 as f64;
    }
    ((q.min(hi) - p.max(lo)).max(0.0)) / (q - p)
}

#[inline]
fn in_band(a: f64, b: f64, xi: f64, eps: f64, side: Side) -> f64 {
    let right = overlap(a, b, xi, xi + eps);
    let left = overlap(a, b, xi - eps, xi);
    match side {
        Side::Right => right,
        Side::Left => left,
        Side::Symmetric => 0.5 * (right + left),
    }
}

fn band_integral(path: &SampledPath, qv: &SampledPath, xi: f64, eps: f64, side: Side) -> Vec<f64> {
    let v = path.values();
    let q = qv.values();
    let live = path.live_len();
    let scale = 0.5 / eps;
    let mut out = Vec::with_capacity(path.len());
    out.push(0.0);
    let mut acc = 0.0;
    for i in 0..live.saturating_sub(1) {
        acc += in_band(v[i], v[i + 1], xi, eps, side) * (q[i + 1] - q[i]);
        out.push(acc * scale);
    }
    let last = *out.last().unwrap();
    out.resize(path.len(), last);
    out
}

/// `(1 / 2 eps) * integral of 1{x in band} d<x>` along the grid, with each
/// step weighted by the share of its linear segment inside the band.
pub fn local_time(
    path: &SampledPath,
    xi: f64,
    eps: f64,
    side: Side,
    qv: &SampledPath,
) -> Result<LocalTimeEstimate> {
    if !(eps > 0.0) || !eps.is_finite() {
        return input(format!("bandwidth must be positive, got {eps}"));
    }
    path.same_grid(qv)?;
    let values = band_integral(path, qv, xi, eps, side);
    Ok(LocalTimeEstimate {
        path: SampledPath::new(path.times().to_vec(), values)?,
        reliable: eps >= increment_rms(path),
    })
}

/// Local time on a grid of levels.
pub fn local_time_field(
    path: &SampledPath,
    levels: &[f64],
    eps: f64,
    side: Side,
    qv: &SampledPath,
) -> Result<LocalTimeField> {
    if !(eps > 0.0) || !eps.is_finite() {
        return input(format!("bandwidth must be positive, got {eps}"));
    }
    path.same_grid(qv)?;
    let values = levels
        .iter()
        .map(|&xi| band_integral(path, qv, xi, eps, side))
        .collect();
    Ok(LocalTimeField {
        levels: levels.to_vec(),
        bandwidth: eps,
        side,
        times: path.times().to_vec(),
        values,
        reliable: eps >= increment_rms(path),
    })
}

/// Grid Tanaka sum `|x(T) - xi| - |x(0) - xi| - sum sgn(x_i - xi) dx_i`
/// with `sgn(0) = -1`. This is the semimartingale local time, which is
/// twice the band estimate of [`local_time`].
pub fn tanaka_local_time(path: &SampledPath, xi: f64) -> Result<SampledPath> {
    let v = path.values();
    let live = path.live_len();
    let mut out = Vec::with_capacity(path.len());
    out.push(0.0);
    let mut stoch = 0.0;
    for i in 0..live.saturating_sub(1) {
        let sgn = if v[i] > xi { 1.0 } else { -1.0 };
        stoch += sgn * (v[i + 1] - v[i]);
        out.push((v[i + 1] - xi).abs() - (v[0] - xi).abs() - stoch);
    }
    let last = *out.last().unwrap();
    out.resize(path.len(), last);
    SampledPath::new(path.times().to_vec(), out)
}

fn exit_index(path: &SampledPath, lo: f64, hi: f64) -> Option<usize> {
    let live = path.live_len();
    path.values()[..live]
        .iter()
        .position(|&x| !(lo < x && x < hi))
        .or(path.absorption_index())
}

/// First grid time the path leaves the `n`-th localizer (or is absorbed);
/// `f64::INFINITY` when that never happens on the grid.
pub fn stop_rule(path: &SampledPath, interval: &StateInterval, n: u32) -> f64 {
    let (lo, hi) = interval.level(n.max(1));
    exit_index(path, lo, hi).map_or(f64::INFINITY, |i| path.times()[i])
}

/// First grid time the path leaves the state interval itself (or is absorbed).
pub fn stop_rule_limit(path: &SampledPath, interval: &StateInterval) -> f64 {
    exit_index(path, interval.ell, interval.r).map_or(f64::INFINITY, |i| path.times()[i])
}

/// Truncated path metric: for `n = 1..=ceil(horizon)`, the capped sup
/// distance on `[0, n]` of both paths stopped at the earlier of their
/// level-`n` exits, weighted by `2^-n`.
pub fn xi_metric(x1: &SampledPath, x2: &SampledPath, interval: &StateInterval) -> Result<f64> {
    x1.same_grid(x2)?;
    let times = x1.times();
    let n_max = (x1.horizon() - 1e-12).ceil().max(1.0) as u32;
    let (v1, v2) = (x1.values(), x2.values());
    let mut total = 0.0;
    for n in 1..=n_max {
        let (lo, hi) = interval.level(n);
        let stop = match (exit_index(x1, lo, hi), exit_index(x2, lo, hi)) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => usize::MAX,
        };
        let end = times.partition_point(|&t| t <= n as f64 + 1e-12);
        let mut sup: f64 = 0.0;
        for i in 0..end {
            let j = i.min(stop);
            if x1.is_absorbed(j) && x2.is_absorbed(j) {
                continue;
            }
            sup = sup.max((v1[j] - v2[j]).abs());
            if i >= stop {
                break;
            }
        }
        total += (-(n as f64)).exp2() * sup.min(1.0);
    }
    Ok(total)
}

/// Piecewise-linear interpolation of the path through its values at the
/// multiples of `2^-k`, resampled on the original grid.
pub fn pl_approximant(path: &SampledPath, k: u32) -> Result<SampledPath> {
    let step = (-(k as f64)).exp2();
    if step < path.mesh() * (1.0 - 1e-12) {
        return input(format!(
            "level {k} (mesh {step}) is finer than the path mesh {}",
            path.mesh()
        ));
    }
    let horizon = path.horizon();
    let count = (horizon / step).floor() as usize;
    let mut nodes: Vec<f64> = (0..=count).map(|i| i as f64 * step).collect();
    if *nodes.last().unwrap() < horizon {
        nodes.push(horizon);
    }
    let node_vals: Vec<f64> = nodes.iter().map(|&t| path.interpolate(t)).collect();
    let values = path
        .times()
        .iter()
        .map(|&t| {
            let j = nodes.partition_point(|&s| s <= t).clamp(1, nodes.len() - 1);
            let (t0, t1) = (nodes[j - 1], nodes[j]);
            if t1 == t0 {
                return node_vals[j];
            }
            node_vals[j - 1] + (node_vals[j] - node_vals[j - 1]) * (t - t0) / (t1 - t0)
        })
        .collect();
    SampledPath::with_absorption(path.times().to_vec(), values, path.absorption_index())
}

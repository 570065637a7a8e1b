//! Sampled paths, noise generation and the path functionals built on them.
//!
//! A [`SampledPath`] is a continuous path observed on a finite time grid.
//! Paths may be absorbed at a cemetery state: from the absorption index on,
//! the stored value is frozen at the last finite value and the entry is
//! flagged, so arithmetic on absorbed entries never meets a NaN.

mod functionals;
mod generate;
mod io;
pub mod rng;

pub use functionals::{
    default_bandwidth, default_qv_level, local_time, local_time_field, pl_approximant,
    quadratic_variation, stop_rule, stop_rule_limit, tanaka_local_time, xi_metric, LocalTimeEstimate,
};
pub use generate::{dyadic_grid, gen_brownian, gen_semimartingale, uniform_grid};
pub use io::{read_csv, write_csv};

use crate::error::{input, Result};

/// Path on a time grid with optional absorption.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    times: Vec<f64>,
    values: Vec<f64>,
    absorbed_from: Option<usize>,
}

pub(crate) fn validate_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return input("empty time grid");
    }
    if times[0] != 0.0 {
        return input(format!("time grid must start at 0, got {}", times[0]));
    }
    for (i, w) in times.windows(2).enumerate() {
        if !(w[1] > w[0]) || !w[1].is_finite() {
            return input(format!("time grid not strictly increasing at index {}", i + 1));
        }
    }
    Ok(())
}

impl SampledPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_grid(&times)?;
        if times.len() != values.len() {
            return input(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return input(format!("non-finite value at index {i}"));
        }
        Ok(Self {
            times,
            values,
            absorbed_from: None,
        })
    }

    /// Builds a path from values known up to (excluding) `absorbed_from`;
    /// entries from that index on are overwritten with the frozen value.
    pub fn with_absorption(times: Vec<f64>, mut values: Vec<f64>, absorbed_from: Option<usize>) -> Result<Self> {
        if let Some(k) = absorbed_from {
            if k == 0 {
                return input("a path cannot be absorbed at time 0");
            }
            if k < values.len() {
                let frozen = values[k - 1];
                for v in &mut values[k..] {
                    *v = frozen;
                }
            }
        }
        let mut p = Self::new(times, values)?;
        p.absorbed_from = absorbed_from.filter(|&k| k < p.times.len());
        Ok(p)
    }

    /// Path with value `f(t)` on every grid time.
    pub fn from_fn(times: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values)
    }

    /// Constant path on the grid.
    pub fn constant(times: Vec<f64>, v: f64) -> Result<Self> {
        Self::from_fn(times, |_| v)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn absorption_index(&self) -> Option<usize> {
        self.absorbed_from
    }

    pub fn is_absorbed(&self, i: usize) -> bool {
        self.absorbed_from.is_some_and(|k| i >= k)
    }

    /// Index one past the last live entry.
    pub fn live_len(&self) -> usize {
        self.absorbed_from.unwrap_or(self.times.len())
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("grid is never empty")
    }

    /// Largest grid step (0 for a single-point grid).
    pub fn mesh(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Linear interpolation at `t`, clamped to the grid.
    pub fn interpolate(&self, t: f64) -> f64 {
        let ts = &self.times;
        if t <= ts[0] {
            return self.values[0];
        }
        if t >= self.horizon() {
            return *self.values.last().unwrap();
        }
        let j = ts.partition_point(|&s| s <= t);
        let (t0, t1) = (ts[j - 1], ts[j]);
        let (v0, v1) = (self.values[j - 1], self.values[j]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Same grid, values mapped pointwise; absorption is kept.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Self::with_absorption(self.times.clone(), values, self.absorbed_from)
    }

    /// Largest absolute difference to another path on the same grid over
    /// indices where neither path is absorbed; absorbed pairs count as 0.
    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        if self.times != other.times {
            return input("paths live on different grids");
        }
        let mut m: f64 = 0.0;
        for i in 0..self.len() {
            let (a, b) = (self.is_absorbed(i), other.is_absorbed(i));
            if a && b {
                continue;
            }
            m = m.max((self.values[i] - other.values[i]).abs());
        }
        Ok(m)
    }

    pub(crate) fn same_grid(&self, other: &Self) -> Result<()> {
        if self.times.len() != other.times.len() || self.times != other.times {
            return input("paths live on different grids");
        }
        Ok(())
    }
}

/// Open state interval `(ell, r)` with a starting point and its
/// exhausting sequence of compact localizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateInterval {
    pub ell: f64,
    pub r: f64,
    pub x0: f64,
    /// Width added per level at an infinite endpoint.
    pub step: f64,
}

impl StateInterval {
    pub fn new(ell: f64, r: f64, x0: f64) -> Result<Self> {
        if ell.is_nan() || r.is_nan() || !x0.is_finite() || !(ell < x0 && x0 < r) {
            return input(format!("need ell < x0 < r, got ({ell}, {x0}, {r})"));
        }
        Ok(Self {
            ell,
            r,
            x0,
            step: 1.0,
        })
    }

    pub fn real_line(x0: f64) -> Self {
        Self::new(f64::NEG_INFINITY, f64::INFINITY, x0).expect("finite start")
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ell < x && x < self.r
    }

    /// The `n`-th localizer `(ell_n, r_n)`, `n >= 1`.
    pub fn level(&self, n: u32) -> (f64, f64) {
        let nf = n as f64;
        let lo = if self.ell.is_finite() {
            self.ell + (self.x0 - self.ell) / (nf + 1.0)
        } else {
            self.x0 - self.step * nf
        };
        let hi = if self.r.is_finite() {
            self.r - (self.r - self.x0) / (nf + 1.0)
        } else {
            self.x0 + self.step * nf
        };
        (lo, hi)
    }
}

/// Which half-band a local-time estimate charges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `[xi, xi + eps)`
    Right,
    /// `(xi - eps, xi]`
    Left,
    /// Average of the two.
    Symmetric,
}

/// Local time on a grid of levels, one column per level.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeField {
    pub levels: Vec<f64>,
    pub bandwidth: f64,
    pub side: Side,
    pub times: Vec<f64>,
    /// `values[j][i]` is the local time at level `j` up to time index `i`.
    pub values: Vec<Vec<f64>>,
    pub reliable: bool,
}

impl LocalTimeField {
    /// Local time at level index `j` and time index `i`.
    pub fn at(&self, j: usize, i: usize) -> f64 {
        self.values[j][i]
    }

    pub fn terminal(&self, j: usize) -> f64 {
        *self.values[j].last().unwrap_or(&0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absorption_freezes_values() {
        let p = SampledPath::with_absorption(vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 2.0, 9.0, 9.0], Some(2)).unwrap();
        assert_eq!(p.values(), &[1.0, 2.0, 2.0, 2.0]);
        assert!(p.is_absorbed(2) && !p.is_absorbed(1));
        assert_eq!(p.live_len(), 2);
    }

    #[test]
    fn grid_validation() {
        assert!(SampledPath::new(vec![], vec![]).is_err());
        assert!(SampledPath::new(vec![0.1], vec![0.0]).is_err());
        assert!(SampledPath::new(vec![0.0, 0.0], vec![0.0, 0.0]).is_err());
        assert!(SampledPath::with_absorption(vec![0.0, 1.0], vec![0.0, 0.0], Some(0)).is_err());
    }

    #[test]
    fn localizers_exhaust_monotonically() {
        for iv in [
            StateInterval::new(0.0, f64::INFINITY, 1.0).unwrap(),
            StateInterval::new(-2.0, 3.0, 0.5).unwrap(),
            StateInterval::real_line(0.0),
        ] {
            let mut prev = iv.level(1);
            assert!(prev.0 < iv.x0 && iv.x0 < prev.1);
            for n in 2..50 {
                let cur = iv.level(n);
                assert!(cur.0 < prev.0 && cur.1 > prev.1);
                assert!(iv.ell < cur.0 && cur.1 < iv.r);
                prev = cur;
            }
        }
    }

    #[test]
    fn interpolation() {
        let p = SampledPath::new(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 0.0]).unwrap();
        assert_eq!(p.interpolate(0.5), 1.0);
        assert_eq!(p.interpolate(1.5), 1.0);
        assert_eq!(p.interpolate(5.0), 0.0);
    }
}

//! Adaptive Heun stepping of `Gamma' = b(t, omega, Theta(Gamma + omega))`
//! under the level-`n` truncation.

use super::OfeSolution;
use crate::drift::AcDrift;
use crate::error::{input, Error, Result};
use crate::pathkit::SampledPath;
use crate::quad;
use crate::transform::SpaceTransform;

/// Work counters of one solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Substeps accepted only because the minimum width was reached.
    pub forced: usize,
    pub level_changes: usize,
}

/// Substeps never shrink below this fraction of the grid step.
const MIN_SUBSTEP: f64 = 1.0 / (1u64 << 30) as f64;

/// Right-hand side truncated at level `n`.
struct Truncated<'a> {
    drift: &'a AcDrift,
    map: &'a SpaceTransform,
    lo: f64,
    hi: f64,
    wn: f64,
}

impl<'a> Truncated<'a> {
    fn new(drift: &'a AcDrift, map: &'a SpaceTransform, n: u32) -> Self {
        let (lo, hi) = map.localized_endpoints(n);
        Self {
            drift,
            map,
            lo,
            hi,
            wn: drift.noise_bound(n),
        }
    }

    fn eval(&self, t: f64, w: f64, g: f64) -> Result<f64> {
        let wb = w.clamp(-self.wn, self.wn);
        let gc = g.clamp(self.lo - wb, self.hi - wb);
        let x = self.map.theta(gc + wb)?;
        let v = self.drift.eval(t, wb, x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { t, gamma: g })
        }
    }

    /// Whether the untruncated equation agrees with this one at the point.
    fn covers(&self, w: f64, g: f64) -> bool {
        w.abs() <= self.wn && self.lo < g + w && g + w < self.hi
    }
}

/// One grid interval with `omega` linear between its end values.
struct Interval {
    t0: f64,
    t1: f64,
    w0: f64,
    w1: f64,
}

impl Interval {
    fn omega(&self, t: f64) -> f64 {
        if t >= self.t1 {
            return self.w1;
        }
        self.w0 + (self.w1 - self.w0) * (t - self.t0) / (self.t1 - self.t0)
    }
}

fn heun(f: &Truncated, iv: &Interval, t: f64, y: f64, k1: f64, dt: f64) -> Result<f64> {
    let k2 = f.eval(t + dt, iv.omega(t + dt), y + dt * k1)?;
    Ok(y + 0.5 * dt * (k1 + k2))
}

/// Advances across one grid interval; `dt` carries the step size between calls.
fn advance(
    f: &Truncated,
    iv: &Interval,
    y0: f64,
    tol: f64,
    dt: &mut f64,
    stats: &mut StepStats,
    mut dense: Option<&mut Vec<(f64, f64)>>,
) -> Result<f64> {
    let h = iv.t1 - iv.t0;
    let min_dt = h * MIN_SUBSTEP;
    let mut t = iv.t0;
    let mut y = y0;
    *dt = dt.min(h);
    while t < iv.t1 {
        let last = t + *dt >= iv.t1 - 0.5 * min_dt;
        let step = if last { iv.t1 - t } else { *dt };
        let k1 = f.eval(t, iv.omega(t), y)?;
        let full = heun(f, iv, t, y, k1, step)?;
        let half = heun(f, iv, t, y, k1, 0.5 * step)?;
        let tm = t + 0.5 * step;
        let k1m = f.eval(tm, iv.omega(tm), half)?;
        let two = heun(f, iv, tm, half, k1m, 0.5 * step)?;
        let err = (two - full).abs() / 3.0;
        if err <= tol * step || step <= min_dt {
            if err > tol * step {
                stats.forced += 1;
            }
            stats.accepted += 1;
            y = two;
            t = if last { iv.t1 } else { t + step };
            if let Some(d) = dense.as_deref_mut() {
                d.push((t, y));
            }
            if err < 0.125 * tol * step {
                *dt = (2.0 * dt.max(step)).min(h);
            }
        } else {
            stats.rejected += 1;
            *dt = 0.5 * step;
        }
    }
    Ok(y)
}

/// Solution of the level-`n` truncated equation on the whole grid.
#[derive(Debug, Clone)]
pub struct LevelSolve {
    pub gamma: SampledPath,
    pub level: u32,
    /// First grid index at which the truncation is active, if any.
    pub valid_until: Option<usize>,
    pub stats: StepStats,
}

/// Solves the equation truncated at a fixed level over the full horizon.
pub fn solve_caratheodory_at_level(
    d: &AcDrift,
    omega: &SampledPath,
    map: &SpaceTransform,
    n: u32,
    tol: f64,
) -> Result<LevelSolve> {
    check_tol(tol)?;
    let f = Truncated::new(d, map, n);
    let t = omega.times();
    let w = omega.values();
    let mut gamma = Vec::with_capacity(t.len());
    gamma.push(0.0);
    let mut stats = StepStats::default();
    let mut dt = f64::INFINITY;
    let mut valid_until = (!f.covers(w[0], 0.0)).then_some(0);
    for i in 0..t.len() - 1 {
        let iv = Interval {
            t0: t[i],
            t1: t[i + 1],
            w0: w[i],
            w1: w[i + 1],
        };
        let y = advance(&f, &iv, gamma[i], tol, &mut dt, &mut stats, None)?;
        if valid_until.is_none() && !f.covers(w[i + 1], y) {
            valid_until = Some(i + 1);
        }
        gamma.push(y);
    }
    Ok(LevelSolve {
        gamma: SampledPath::new(t.to_vec(), gamma)?,
        level: n,
        valid_until,
        stats,
    })
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        input(format!("tolerance must be positive, got {tol}"))
    }
}

/// Solves `Gamma' = b(t, omega, Theta(Gamma + omega))` with level escalation:
/// each grid interval is stepped at the current truncation level and redone
/// one level higher whenever its end point leaves the level's window. The
/// path is absorbed where it leaves the domain of `Theta` or where `n_max`
/// is exhausted.
pub fn solve_caratheodory(
    d: &AcDrift,
    omega: &SampledPath,
    map: &SpaceTransform,
    n_max: u32,
    tol: f64,
) -> Result<OfeSolution> {
    step_path(d, omega, map, n_max, tol)?.into_solution(d, omega, map, tol, false)
}

struct Stepped {
    gamma: Vec<f64>,
    stop: Option<usize>,
    level: u32,
    truncated: bool,
    stats: StepStats,
    /// Accepted substep ends `(t, Gamma)`, starting with `(0, 0)`.
    dense: Vec<(f64, f64)>,
}

impl Stepped {
    fn live(&self) -> usize {
        self.stop.unwrap_or(self.gamma.len())
    }

    fn into_solution(self, d: &AcDrift, omega: &SampledPath, map: &SpaceTransform, tol: f64, maximal: bool) -> Result<OfeSolution> {
        let residual_sup = residual(d, &self.dense, omega, map, self.level, tol)?;
        let path = SampledPath::with_absorption(omega.times().to_vec(), self.gamma, self.stop)?;
        Ok(OfeSolution {
            gamma: path,
            stop_time: self.stop.filter(|_| !self.truncated).map_or(f64::INFINITY, |k| omega.times()[k]),
            truncation_level_reached: self.level,
            residual_sup,
            maximal,
            truncated: self.truncated,
            tol,
            error_bound: error_bound(d, map, self.level, tol, omega.horizon()),
            stats: self.stats,
            transform: map.clone(),
        })
    }
}

fn step_path(d: &AcDrift, omega: &SampledPath, map: &SpaceTransform, n_max: u32, tol: f64) -> Result<Stepped> {
    check_tol(tol)?;
    if n_max == 0 {
        return input("n_max must be at least 1");
    }
    let t = omega.times();
    let w = omega.values();
    let mut n = 1;
    while !Truncated::new(d, map, n).covers(w[0], 0.0) {
        if n == n_max {
            return input("the starting point lies outside every localizer");
        }
        n += 1;
    }
    let mut f = Truncated::new(d, map, n);
    let mut gamma = Vec::with_capacity(t.len());
    gamma.push(0.0);
    let mut stats = StepStats::default();
    let mut dt = f64::INFINITY;
    let mut stop = None;
    let mut truncated = false;
    let mut dense = vec![(t[0], 0.0)];
    'grid: for i in 0..t.len() - 1 {
        let iv = Interval {
            t0: t[i],
            t1: t[i + 1],
            w0: w[i],
            w1: w[i + 1],
        };
        let mark = dense.len();
        loop {
            let mut trial_dt = dt;
            dense.truncate(mark);
            let y = advance(&f, &iv, gamma[i], tol, &mut trial_dt, &mut stats, Some(&mut dense))?;
            if f.covers(w[i + 1], y) {
                dt = trial_dt;
                gamma.push(y);
                break;
            }
            if !map.in_domain(y + w[i + 1]) || n == n_max {
                truncated = map.in_domain(y + w[i + 1]);
                stop = Some(i + 1);
                gamma.push(y);
                break 'grid;
            }
            n += 1;
            stats.level_changes += 1;
            f = Truncated::new(d, map, n);
        }
    }
    if let Some(k) = stop {
        dense.truncate(mark_of_stop(&dense, t[k - 1]));
    }
    let last = *gamma.last().unwrap();
    gamma.resize(t.len(), last);
    Ok(Stepped {
        gamma,
        stop,
        level: n,
        truncated,
        stats,
        dense,
    })
}

/// Dense nodes up to and including the last live grid time.
fn mark_of_stop(dense: &[(f64, f64)], t_live: f64) -> usize {
    dense.partition_point(|p| p.0 <= t_live)
}

fn error_bound(d: &AcDrift, map: &SpaceTransform, n: u32, tol: f64, horizon: f64) -> f64 {
    let iv = map.dispersion().interval();
    let (lo, hi) = iv.level(n);
    let lip = d.lipschitz_at(n, iv) * map.dispersion().sup_on(lo, hi);
    tol * horizon * (lip * horizon).exp()
}

/// `sup |Gamma(t_j) - integral_0^{t_j} b(u, omega, Theta(Gamma + omega)) du|`
/// over the accepted substep ends, with `Gamma` replaced by its cubic
/// Hermite interpolant through them and the integral taken by width-bounded
/// adaptive quadrature.
fn residual(d: &AcDrift, dense: &[(f64, f64)], omega: &SampledPath, map: &SpaceTransform, n: u32, tol: f64) -> Result<f64> {
    let f = Truncated::new(d, map, n);
    let slope = |t: f64, g: f64| f.eval(t, omega.interpolate(t), g);
    let mut acc = 0.0;
    let mut worst = 0.0f64;
    let Some(&(t0, g0)) = dense.first() else {
        return Ok(0.0);
    };
    let mut m0 = slope(t0, g0)?;
    for pair in dense.windows(2) {
        let ((ta, ga), (tb, gb)) = (pair[0], pair[1]);
        let h = tb - ta;
        let m1 = slope(tb, gb)?;
        let hermite = |s: f64| {
            let u = (s - ta) / h;
            let u2 = u * u;
            let u3 = u2 * u;
            (2.0 * u3 - 3.0 * u2 + 1.0) * ga + (u3 - 2.0 * u2 + u) * h * m0 + (-2.0 * u3 + 3.0 * u2) * gb + (u3 - u2) * h * m1
        };
        let integrand = |s: f64| f.eval(s, omega.interpolate(s), hermite(s)).unwrap_or(f64::NAN);
        acc += quad::adaptive_bounded(ta, tb, 1e-3 * tol * h, h * MIN_SUBSTEP, &integrand);
        worst = worst.max((gb - acc).abs());
        m0 = m1;
    }
    if worst.is_nan() {
        return Err(Error::Diagnostic("residual evaluation left the domain".into()));
    }
    Ok(worst)
}

/// Maximal solution as the limit of solutions with drift `b + 2^-k`,
/// continued until successive envelopes agree within `tol`.
pub fn maximal_solution(d: &AcDrift, omega: &SampledPath, map: &SpaceTransform, n_max: u32, tol: f64) -> Result<OfeSolution> {
    if !d.continuous {
        return input(format!("maximal solution needs a continuous drift, {} is not", d.name()));
    }
    check_tol(tol)?;
    const MAX_K: i32 = 60;
    let mut prev: Option<Stepped> = None;
    for k in 0..=MAX_K {
        let shifted = d.shifted(2f64.powi(-k));
        let cur = step_path(&shifted, omega, map, n_max, tol)?;
        if let Some(p) = &prev {
            let live = cur.live().min(p.live());
            let mut gap = 0.0f64;
            for i in 0..live {
                let diff = cur.gamma[i] - p.gamma[i];
                if diff > tol {
                    return Err(Error::Diagnostic(format!(
                        "envelope increased by {diff} at t = {} for k = {k}",
                        omega.times()[i]
                    )));
                }
                gap = gap.max(diff.abs());
            }
            if gap < tol && cur.live() >= p.live() {
                return cur.into_solution(d, omega, map, tol, true);
            }
        }
        prev = Some(cur);
    }
    Err(Error::Diagnostic("upper envelope did not settle".into()))
}

/// Outcome of [`picard`].
#[derive(Debug, Clone)]
pub struct PicardResult {
    pub gamma: SampledPath,
    pub iterations: usize,
    pub converged: bool,
}

/// Picard iteration `Gamma_{m+1}(t) = integral_0^t b(u, omega, Theta(Gamma_m + omega)) du`
/// with the trapezoid rule on the grid, from the given initial iterate.
pub fn picard(
    d: &AcDrift,
    omega: &SampledPath,
    map: &SpaceTransform,
    initial: &SampledPath,
    max_iter: usize,
    tol: f64,
) -> Result<PicardResult> {
    omega.same_grid(initial)?;
    check_tol(tol)?;
    let t = omega.times();
    let w = omega.values();
    let mut cur = initial.values().to_vec();
    for m in 1..=max_iter {
        let rate: Vec<f64> = (0..t.len())
            .map(|i| {
                let x = map.theta(cur[i] + w[i])?;
                let v = d.eval(t[i], w[i], x);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite { t: t[i], gamma: cur[i] })
                }
            })
            .collect::<Result<_>>()?;
        let mut next = Vec::with_capacity(t.len());
        next.push(0.0);
        for i in 0..t.len() - 1 {
            next.push(next[i] + 0.5 * (rate[i] + rate[i + 1]) * (t[i + 1] - t[i]));
        }
        let change = next.iter().zip(&cur).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        cur = next;
        if change < tol {
            return Ok(PicardResult {
                gamma: SampledPath::new(t.to_vec(), cur)?,
                iterations: m,
                converged: true,
            });
        }
    }
    Ok(PicardResult {
        gamma: SampledPath::new(t.to_vec(), cur)?,
        iterations: max_iter,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{registry, Lipschitz};
    use crate::pathkit::{gen_brownian, uniform_grid, StateInterval};
    use crate::transform::{build_transform, DispersionSpec, Form};
    use proptest::prelude::*;

    fn identity(x0: f64) -> SpaceTransform {
        let disp = DispersionSpec::uniform(StateInterval::real_line(x0), Form::Constant(1.0)).unwrap();
        build_transform(&disp, x0).unwrap()
    }

    #[test]
    fn zero_drift() {
        let grid = uniform_grid(1.0, 500).unwrap();
        let w = gen_brownian(&grid, 1).unwrap();
        let d = registry::state_drift("zero", 0.0).unwrap();
        let sol = solve_caratheodory(&d, &w, &identity(0.0), 8, 1e-6).unwrap();
        assert!(sol.gamma.values().iter().all(|&g| g == 0.0));
        assert_eq!(sol.residual_sup, 0.0);
    }

    #[test]
    fn linear_decay() {
        let tol = 1e-6;
        let grid = uniform_grid(1.0, 1000).unwrap();
        let w = SampledPath::constant(grid.clone(), 0.0).unwrap();
        let d = registry::state_drift("neg_x", 0.0).unwrap();
        let sol = solve_caratheodory(&d, &w, &identity(1.0), 8, tol).unwrap();
        let err = grid
            .iter()
            .zip(sol.gamma.values())
            .map(|(t, g)| (g + 1.0 - (-t).exp()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 10.0 * tol, "{err}");
        assert!(err <= sol.error_bound);
        assert!(sol.residual_sup <= tol);
    }

    #[test]
    fn discontinuous_drift_residual_and_refinement() {
        let tol = 1e-5;
        let grid = uniform_grid(1.0, 1024).unwrap();
        let fine_grid = uniform_grid(1.0, 2048).unwrap();
        let fine_w = gen_brownian(&fine_grid, 9).unwrap();
        let w = SampledPath::new(grid.clone(), fine_w.values().iter().step_by(2).copied().collect()).unwrap();
        let d = registry::state_drift("indicator_positive", 0.0).unwrap();
        let map = identity(0.0);
        let sol = solve_caratheodory(&d, &w, &map, 8, tol).unwrap();
        assert!(sol.residual_sup <= tol * 1.0, "{}", sol.residual_sup);
        assert!(sol.gamma.values().windows(2).all(|p| p[1] >= p[0] - 1e-12));
        let fine = solve_caratheodory(&d, &fine_w, &map, 8, tol).unwrap();
        assert!(fine.residual_sup <= tol);
    }

    #[test]
    fn stitched_levels_agree() {
        let tol = 1e-7;
        let grid = uniform_grid(4.0, 4000).unwrap();
        let w = gen_brownian(&grid, 21).unwrap();
        let map = identity(0.0);
        let d = registry::state_drift("sin", 0.0).unwrap();
        for n in 1..4 {
            let a = solve_caratheodory_at_level(&d, &w, &map, n, tol).unwrap();
            let b = solve_caratheodory_at_level(&d, &w, &map, n + 1, tol).unwrap();
            let until = a.valid_until.unwrap_or(grid.len());
            let gap = (0..until)
                .map(|i| (a.gamma.values()[i] - b.gamma.values()[i]).abs())
                .fold(0.0, f64::max);
            assert!(gap <= 10.0 * tol, "n = {n}: {gap}");
        }
        let full = solve_caratheodory(&d, &w, &map, 8, tol).unwrap();
        let top = solve_caratheodory_at_level(&d, &w, &map, full.truncation_level_reached, tol).unwrap();
        assert!(top.valid_until.is_none());
        assert!(full.gamma.sup_distance(&top.gamma).unwrap() <= 10.0 * tol);
    }

    #[test]
    fn explosion_absorbs_and_budget_truncates() {
        let iv = StateInterval::new(0.0, f64::INFINITY, 1.0).unwrap();
        let disp = DispersionSpec::uniform(iv, Form::Power { coef: 1.0, p: 2.0 }).unwrap();
        let map = build_transform(&disp, 1.0).unwrap();
        let grid = uniform_grid(2.0, 2048).unwrap();
        let w = SampledPath::constant(grid, 0.0).unwrap();
        let d = registry::state_drift("const", 1.0).unwrap();
        let sol = solve_caratheodory(&d, &w, &map, 2000, 1e-8).unwrap();
        assert!(!sol.truncated);
        assert!((sol.stop_time - 1.0).abs() <= 1e-3, "{}", sol.stop_time);
        let short = solve_caratheodory(&d, &w, &map, 3, 1e-8).unwrap();
        assert!(short.truncated);
        assert_eq!(short.stop_time, f64::INFINITY);
        assert!(short.stop_index().is_some());
    }

    #[test]
    fn non_finite_drift_is_reported() {
        let grid = uniform_grid(1.0, 10).unwrap();
        let w = SampledPath::constant(grid, 0.0).unwrap();
        let d = AcDrift::new("nan", |_, _, _| f64::NAN, true, Lipschitz::None);
        assert!(matches!(
            solve_caratheodory(&d, &w, &identity(0.0), 4, 1e-6),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn peano_maximal_solution() {
        let tol = 1e-3;
        let grid = uniform_grid(1.0, 1024).unwrap();
        let w = SampledPath::constant(grid.clone(), 0.0).unwrap();
        let d = registry::state_drift("sqrt_abs", 0.0).unwrap();
        let map = identity(0.0);
        let max = maximal_solution(&d, &w, &map, 8, tol).unwrap();
        assert!(max.maximal);
        let err = grid
            .iter()
            .zip(max.gamma.values())
            .map(|(t, g)| (g - t * t / 4.0).abs())
            .fold(0.0, f64::max);
        assert!(err <= 10.0 * tol, "{err}");
        let zero = solve_caratheodory(&d, &w, &map, 8, tol).unwrap();
        assert_eq!(*zero.gamma.values().last().unwrap(), 0.0);
    }

    #[test]
    fn maximal_equals_unique_for_lipschitz() {
        let tol = 1e-6;
        let grid = uniform_grid(1.0, 512).unwrap();
        let w = gen_brownian(&grid, 2).unwrap();
        let map = identity(0.5);
        let d = registry::state_drift("neg_x", 0.0).unwrap();
        let max = maximal_solution(&d, &w, &map, 8, tol).unwrap();
        let uniq = solve_caratheodory(&d, &w, &map, 8, tol).unwrap();
        assert!(max.gamma.sup_distance(&uniq.gamma).unwrap() <= 10.0 * tol);
        assert!(maximal_solution(&registry::state_drift("sign", 0.0).unwrap(), &w, &map, 8, tol).is_err());
    }

    #[test]
    fn comparison_and_negative_control() {
        let tol = 1e-6;
        let grid = uniform_grid(1.0, 512).unwrap();
        let w = gen_brownian(&grid, 4).unwrap();
        let map = identity(0.5);
        let d = registry::state_drift("neg_x", 0.0).unwrap();
        let bar = maximal_solution(&d, &w, &map, 8, tol).unwrap();
        let lower_map = map.reanchor(0.4).unwrap();
        let lower = solve_caratheodory(&d.shifted(-0.5), &w, &lower_map, 8, tol).unwrap();
        assert!(super::super::compare(&lower, &bar).unwrap().holds);
        let same = solve_caratheodory(&d, &w, &map, 8, tol).unwrap();
        assert!(super::super::compare(&same, &bar).unwrap().max_violation <= 10.0 * tol);
        let upper = solve_caratheodory(&d.shifted(0.5), &w, &lower_map, 8, tol).unwrap();
        let c = super::super::compare(&upper, &bar).unwrap();
        assert!(!c.holds && c.max_violation > 0.0);
        assert!(super::super::compare(&lower, &same).is_err());
    }

    #[test]
    fn picard_agrees_from_perturbed_starts() {
        let tol = 1e-8;
        let grid = uniform_grid(1.0, 2000).unwrap();
        let w = gen_brownian(&grid, 8).unwrap();
        let map = identity(0.0);
        let d = registry::state_drift("sin", 0.0).unwrap();
        let up = SampledPath::constant(grid.clone(), 0.1).unwrap();
        let down = SampledPath::constant(grid, -0.1).unwrap();
        let a = picard(&d, &w, &map, &up, 200, tol).unwrap();
        let b = picard(&d, &w, &map, &down, 200, tol).unwrap();
        assert!(a.converged && b.converged);
        assert!(a.gamma.sup_distance(&b.gamma).unwrap() <= 10.0 * tol);
        let c = solve_caratheodory(&d, &w, &map, 8, 1e-9).unwrap();
        let gap = a.gamma.sup_distance(&c.gamma).unwrap();
        assert!(gap <= 0.1 * w.mesh(), "{gap}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn residual_within_tolerance(seed in 0u64..10_000, key in prop::sample::select(vec!["neg_x", "sin", "indicator_positive", "const"])) {
            let tol = 1e-5;
            let grid = uniform_grid(1.0, 256).unwrap();
            let w = gen_brownian(&grid, seed).unwrap();
            let d = registry::state_drift(key, 0.7).unwrap();
            let sol = solve_caratheodory(&d, &w, &identity(0.3), 8, tol).unwrap();
            prop_assert!(sol.residual_sup <= tol, "{}", sol.residual_sup);
        }

        #[test]
        fn solutions_are_deterministic(seed in 0u64..10_000) {
            let grid = uniform_grid(1.0, 128).unwrap();
            let w = gen_brownian(&grid, seed).unwrap();
            let d = registry::state_drift("sin", 0.0).unwrap();
            let map = identity(0.0);
            let a = solve_caratheodory(&d, &w, &map, 8, 1e-6).unwrap();
            let b = solve_caratheodory(&d, &w, &map, 8, 1e-6).unwrap();
            prop_assert_eq!(a.gamma, b.gamma);
        }
    }
}

//! State paths from solved functional equations, and pathwise checks of the
//! integral equation they satisfy.

use crate::drift::{drift_increments, measure_charge, DriftFunctional, LevelMeasure, LocalTimeConfig, LocalTimeDrift};
use crate::error::{Error, Result};
use crate::ofe::OfeSolution;
use crate::pathkit::{self, LocalTimeField, SampledPath, Side};
use crate::transform::{DispersionSpec, SpaceTransform};
use std::sync::Arc;

/// Number of uniformly spaced levels laid across the visited range.
pub const VISITED_LEVELS: usize = 33;

/// Assembled solution of the integral equation on one input path.
#[derive(Debug, Clone)]
pub struct SieSolution {
    /// `Theta(Gamma + omega)`, absorbed at the explosion index.
    pub x: SampledPath,
    /// `Theta(Gamma)`, absorbed where `Gamma` leaves the domain.
    pub c: SampledPath,
    pub explosion_time: f64,
    /// `min(S(C), S(X))` on the grid.
    pub r_time: f64,
    pub localtime: LocalTimeField,
    pub x0: f64,
    pub dispersion: DispersionSpec,
    pub sie_residual: Option<ResidualReport>,
    pub balance_report: Vec<BalanceReport>,
}

/// Sup-norm residual of an integral equation along the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    pub sup: f64,
    /// `sup |X|` over the same range.
    pub scale: f64,
    /// False when a local-time bandwidth was below the typical step size.
    pub reliable: bool,
}

impl ResidualReport {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.sup / self.scale
        } else {
            self.sup
        }
    }
}

/// Local-time ratios at a jump of the dispersion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceReport {
    pub xi: f64,
    pub left: f64,
    pub right: f64,
    pub symmetric: f64,
    /// `left / right`
    pub ratio: f64,
    /// `s(xi) / s(xi+)`
    pub expected: f64,
    /// `symmetric / right`
    pub symmetric_ratio: f64,
    /// `(1 + s(xi) / s(xi+)) / 2`
    pub symmetric_expected: f64,
    pub pass: bool,
    pub inconclusive: bool,
}

/// Relative tolerance of [`balance_check`].
pub const BALANCE_TOL: f64 = 0.2;

/// Local time below this is treated as noise by [`balance_check`].
pub const BALANCE_FLOOR: f64 = 1e-3;

fn first_exit(values: &[f64], live: usize, map: &SpaceTransform) -> Option<usize> {
    values[..live].iter().position(|&v| !map.in_domain(v))
}

/// Pointwise evaluation `X = Theta(Gamma + omega)`, `C = Theta(Gamma)`, with
/// the default local-time configuration.
pub fn assemble_x(sol: &OfeSolution, omega: &SampledPath, map: &SpaceTransform) -> Result<SieSolution> {
    assemble_x_with(sol, omega, map, &LocalTimeConfig::default())
}

/// [`assemble_x`] with an explicit local-time configuration.
pub fn assemble_x_with(
    sol: &OfeSolution,
    omega: &SampledPath,
    map: &SpaceTransform,
    ltcfg: &LocalTimeConfig,
) -> Result<SieSolution> {
    sol.gamma.same_grid(omega)?;
    if !map.same_dispersion(&sol.transform) || map.anchor() != sol.transform.anchor() {
        return Err(Error::Input("solution was computed for another transform".into()));
    }
    let t = omega.times();
    let g = sol.gamma.values();
    let w = omega.values();
    let live = sol.gamma.live_len();
    let sum: Vec<f64> = g.iter().zip(w).map(|(a, b)| a + b).collect();
    if let Some(k) = first_exit(&sum, live, map) {
        return Err(Error::Consistency(format!(
            "Gamma + omega = {} leaves the domain at t = {} before the stop time {}",
            sum[k], t[k], sol.stop_time
        )));
    }
    let x_stop = sol.gamma.absorption_index();
    let c_stop = match (first_exit(g, live, map), x_stop) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    if c_stop == Some(0) {
        return Err(Error::Consistency("Gamma(0) lies outside the domain".into()));
    }
    let eval = |vals: &[f64], stop: Option<usize>| -> Result<SampledPath> {
        let n = stop.unwrap_or(vals.len());
        let mut out = Vec::with_capacity(vals.len());
        for v in &vals[..n] {
            out.push(map.theta(*v)?);
        }
        out.resize(vals.len(), *out.last().unwrap());
        SampledPath::with_absorption(t.to_vec(), out, stop)
    };
    let x = eval(&sum, x_stop)?;
    let c = eval(g, c_stop)?;
    let first_c = first_exit(g, live, map).map_or(f64::INFINITY, |k| t[k]);
    let explosion_time = x_stop.filter(|_| !sol.truncated).map_or(f64::INFINITY, |k| t[k]);
    let r_time = first_c.min(explosion_time);
    let localtime = localtime_field(&x, map.dispersion(), ltcfg)?;
    Ok(SieSolution {
        x,
        c,
        explosion_time,
        r_time,
        localtime,
        x0: map.anchor(),
        dispersion: map.dispersion().clone(),
        sie_residual: None,
        balance_report: Vec::new(),
    })
}

fn visited_range(x: &SampledPath) -> (f64, f64) {
    x.values()[..x.live_len()]
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn visited_levels(x: &SampledPath) -> (f64, f64, Vec<f64>) {
    let (lo, hi) = visited_range(x);
    let dx = (hi - lo) / VISITED_LEVELS as f64;
    let mids = (0..VISITED_LEVELS).map(|j| lo + (j as f64 + 0.5) * dx).collect();
    (lo, hi, mids)
}

/// Local time at the breakpoints and across the visited range.
fn localtime_field(x: &SampledPath, disp: &DispersionSpec, ltcfg: &LocalTimeConfig) -> Result<LocalTimeField> {
    let (_, _, mids) = visited_levels(x);
    let mut levels: Vec<f64> = disp.breakpoints().to_vec();
    levels.extend(mids);
    let qv = ltcfg.qv(x)?;
    pathkit::local_time_field(x, &levels, ltcfg.bandwidth_for(x), ltcfg.side, &qv)
}

/// `t -> sum over atoms of L(t, xi) (s(xi+) - s(xi)) / s(xi+)` plus the
/// continuous part `integral L(t, xi) s'(xi) / s(xi) dxi`.
fn dispersion_correction(x: &SampledPath, disp: &DispersionSpec, ltcfg: &LocalTimeConfig) -> Result<Vec<f64>> {
    let atoms = disp
        .jumps()
        .into_iter()
        .map(|(xi, s, sp)| (xi, (sp - s) / sp))
        .collect();
    let density = if disp.has_continuous_part() {
        let (lo, hi, _) = visited_levels(x);
        let d = disp.clone();
        let f: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(move |xi| d.log_slope(xi));
        (hi > lo).then_some((lo, hi, f))
    } else {
        None
    };
    let cfg = LocalTimeConfig {
        levels: VISITED_LEVELS,
        ..*ltcfg
    };
    measure_charge(x, &LevelMeasure { atoms, density }, &cfg, |_| 1.0)
}

fn bandwidth_reliable(x: &SampledPath, ltcfg: &LocalTimeConfig) -> Result<bool> {
    let qv = ltcfg.qv(x)?;
    let probe = x.values()[0];
    Ok(pathkit::local_time(x, probe, ltcfg.bandwidth_for(x), ltcfg.side, &qv)?.reliable)
}

fn sup_abs(x: &SampledPath, live: usize) -> f64 {
    x.values()[..live].iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// `x0 + sum s(X_i) (d_omega_i + d_drift_i) + correction` on the grid.
fn rhs(x: &SampledPath, omega: &SampledPath, drift: &[f64], disp: &DispersionSpec, extra: &[f64]) -> Vec<f64> {
    let xv = x.values();
    let w = omega.values();
    let mut out = Vec::with_capacity(xv.len());
    let mut acc = xv[0];
    out.push(acc + extra[0]);
    for i in 0..xv.len() - 1 {
        acc += disp.value(xv[i]) * ((w[i + 1] - w[i]) + (drift[i + 1] - drift[i]));
        out.push(acc + extra[i + 1]);
    }
    out
}

fn report(x: &SampledPath, rhs: &[f64], live: usize, reliable: bool) -> ResidualReport {
    let sup = x.values()[..live]
        .iter()
        .zip(rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ResidualReport {
        sup,
        scale: sup_abs(x, live),
        reliable,
    }
}

/// Residual of `X = x0 + integral s(X) (d omega + dB) + local-time correction`
/// with left-point sums and estimated local times.
pub fn sie_residual(
    sie: &SieSolution,
    omega: &SampledPath,
    d: &DriftFunctional,
    ltcfg: &LocalTimeConfig,
) -> Result<ResidualReport> {
    let x = &sie.x;
    x.same_grid(omega)?;
    let live = x.live_len();
    let b = drift_increments(d, omega, x)?;
    let corr = dispersion_correction(x, &sie.dispersion, ltcfg)?;
    let r = rhs(x, omega, b.values(), &sie.dispersion, &corr);
    Ok(report(x, &r, live.min(b.live_len()), bandwidth_reliable(x, ltcfg)?))
}

/// `X - x0 - integral s(X) dGamma - local-time correction`, which equals the
/// stochastic integral `integral s(X) d omega` without any stochastic sum.
pub fn pathwise_integral(
    sol: &OfeSolution,
    omega: &SampledPath,
    map: &SpaceTransform,
    ltcfg: &LocalTimeConfig,
) -> Result<SampledPath> {
    let sie = assemble_x_with(sol, omega, map, ltcfg)?;
    let x = &sie.x;
    let xv = x.values();
    let g = sol.gamma.values();
    let corr = dispersion_correction(x, &sie.dispersion, ltcfg)?;
    let mut out = Vec::with_capacity(xv.len());
    let mut stieltjes = 0.0;
    out.push(0.0);
    for i in 0..xv.len() - 1 {
        stieltjes += sie.dispersion.value(xv[i]) * (g[i + 1] - g[i]);
        out.push(xv[i + 1] - sie.x0 - stieltjes - corr[i + 1]);
    }
    SampledPath::with_absorption(omega.times().to_vec(), out, x.absorption_index())
}

/// Grid Ito sum `sum s(X_i) (omega_{i+1} - omega_i)`.
pub fn ito_sum(x: &SampledPath, omega: &SampledPath, disp: &DispersionSpec) -> Result<SampledPath> {
    x.same_grid(omega)?;
    let xv = x.values();
    let w = omega.values();
    let mut out = Vec::with_capacity(xv.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 0..xv.len() - 1 {
        acc += disp.value(xv[i]) * (w[i + 1] - w[i]);
        out.push(acc);
    }
    SampledPath::with_absorption(x.times().to_vec(), out, x.absorption_index())
}

/// Compares one-sided local times at `xi` with the balance relation
/// `s(xi+) L(xi-) = s(xi) L(xi)`.
pub fn balance_check(sie: &SieSolution, xi: f64, ltcfg: &LocalTimeConfig) -> Result<BalanceReport> {
    let x = &sie.x;
    let disp = &sie.dispersion;
    let qv = ltcfg.qv(x)?;
    let eps = ltcfg.bandwidth_for(x);
    let terminal = |side: Side| -> Result<(f64, bool)> {
        let l = pathkit::local_time(x, xi, eps, side, &qv)?;
        Ok((*l.path.values().last().unwrap(), l.reliable))
    };
    let (left, _) = terminal(Side::Left)?;
    let (right, reliable) = terminal(Side::Right)?;
    let (symmetric, _) = terminal(Side::Symmetric)?;
    let expected = disp.value(xi) / disp.value_right(xi);
    let symmetric_expected = 0.5 * (1.0 + expected);
    let inconclusive = right < BALANCE_FLOOR || !reliable;
    let ratio = left / right;
    let symmetric_ratio = symmetric / right;
    let pass = !inconclusive
        && (ratio - expected).abs() <= BALANCE_TOL * expected
        && (symmetric_ratio - symmetric_expected).abs() <= BALANCE_TOL * symmetric_expected;
    Ok(BalanceReport {
        xi,
        left,
        right,
        symmetric,
        ratio,
        expected,
        symmetric_ratio,
        symmetric_expected,
        pass,
        inconclusive,
    })
}

/// Residual of a candidate `X` against
/// `X = x0 + integral s(X) (d omega + b(X) dt) + integral L(., xi) [mu(dxi) - s d(1/s)]`.
pub fn verify_localtime_drift(x: &SampledPath, omega: &SampledPath, d: &LocalTimeDrift) -> Result<ResidualReport> {
    x.same_grid(omega)?;
    let plain = LocalTimeDrift {
        mu: LevelMeasure::default(),
        ..d.clone()
    };
    let b = drift_increments(&DriftFunctional::LocalTimeMeasure(plain), omega, x)?;
    let mut extra = dispersion_correction(x, &d.dispersion, &d.ltcfg)?;
    if !d.mu.is_zero() {
        let charge = measure_charge(x, &d.mu, &d.ltcfg, |_| 1.0)?;
        for (e, c) in extra.iter_mut().zip(charge) {
            *e += c;
        }
    }
    let r = rhs(x, omega, b.values(), &d.dispersion, &extra);
    let live = x.live_len().min(b.live_len());
    Ok(report(x, &r, live, bandwidth_reliable(x, &d.ltcfg)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{registry, StateFree};
    use crate::ofe::{solve_caratheodory, solve_statefree};
    use crate::pathkit::{gen_brownian, uniform_grid, StateInterval};
    use crate::transform::{build_transform, Form};

    fn skew() -> SpaceTransform {
        build_transform(&DispersionSpec::two_sided(1.0, 2.0, 0.0).unwrap(), 0.0).unwrap()
    }

    fn identity(x0: f64) -> SpaceTransform {
        let disp = DispersionSpec::uniform(StateInterval::real_line(x0), Form::Constant(1.0)).unwrap();
        build_transform(&disp, x0).unwrap()
    }

    #[test]
    fn skew_closed_form_is_exact() {
        let grid = uniform_grid(1.0, 10_000).unwrap();
        let w = gen_brownian(&grid, 7).unwrap();
        let map = skew();
        let sol = solve_statefree(&StateFree::zero(), &w, &map).unwrap();
        let sie = assemble_x(&sol, &w, &map).unwrap();
        for (x, v) in sie.x.values().iter().zip(w.values()) {
            assert!((x - (2.0 * v.max(0.0) - (-v).max(0.0))).abs() <= 1e-12);
        }
        assert_eq!(sie.explosion_time, f64::INFINITY);
        assert_eq!(sie.r_time, f64::INFINITY);
        assert!(sie.c.values().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn unit_dispersion_adds_up() {
        let grid = uniform_grid(1.0, 1000).unwrap();
        let w = gen_brownian(&grid, 8).unwrap();
        let map = identity(0.3);
        let d = registry::state_drift("sin", 0.0).unwrap();
        let sol = solve_caratheodory(&d, &w, &map, 8, 1e-8).unwrap();
        let sie = assemble_x(&sol, &w, &map).unwrap();
        for i in 0..grid.len() {
            let expect = 0.3 + sol.gamma.values()[i] + w.values()[i];
            assert!((sie.x.values()[i] - expect).abs() <= 1e-12);
        }
    }

    #[test]
    fn explosion_at_reciprocal_start() {
        let iv = StateInterval::new(0.0, f64::INFINITY, 1.0).unwrap();
        let disp = DispersionSpec::uniform(iv, Form::Power { coef: 1.0, p: 2.0 }).unwrap();
        let map = build_transform(&disp, 1.0).unwrap();
        let grid = uniform_grid(2.0, 20_000).unwrap();
        let w = SampledPath::constant(grid.clone(), 0.0).unwrap();
        let sol = solve_statefree(&StateFree::explicit("t", |t| t), &w, &map).unwrap();
        let sie = assemble_x(&sol, &w, &map).unwrap();
        assert!((sie.explosion_time - 1.0).abs() <= 1e-4);
        assert_eq!(sie.r_time, sie.explosion_time.min(1.0));
        for i in (0..grid.len()).step_by(997).filter(|&i| grid[i] < 0.99) {
            assert!((sie.x.values()[i] - 1.0 / (1.0 - grid[i])).abs() <= 1e-9 / (1.0 - grid[i]).powi(2));
        }
    }

    #[test]
    fn stop_rule_identity() {
        let iv = StateInterval::new(0.0, f64::INFINITY, 1.0).unwrap();
        let disp = DispersionSpec::uniform(iv, Form::Power { coef: 1.0, p: 2.0 }).unwrap();
        let map = build_transform(&disp, 1.0).unwrap();
        let grid = uniform_grid(3.0, 3000).unwrap();
        for seed in 0..20 {
            let w = gen_brownian(&grid, seed).unwrap();
            let sol = solve_statefree(&StateFree::explicit("t", |t| t), &w, &map).unwrap();
            let sie = assemble_x(&sol, &w, &map).unwrap();
            let s_c = grid.iter().find(|&&t| t >= 1.0).copied().unwrap();
            assert_eq!(sie.r_time, s_c.min(sie.explosion_time));
        }
    }

    #[test]
    fn assembly_is_pure() {
        let grid = uniform_grid(1.0, 2000).unwrap();
        let w = gen_brownian(&grid, 4).unwrap();
        let map = skew();
        let sol = solve_statefree(&StateFree::zero(), &w, &map).unwrap();
        let a = assemble_x(&sol, &w, &map).unwrap();
        let b = assemble_x(&sol, &w, &map).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.localtime, b.localtime);
    }

    #[test]
    fn unit_dispersion_residual_and_integral() {
        let grid = uniform_grid(1.0, 1 << 12).unwrap();
        let w = gen_brownian(&grid, 5).unwrap();
        let map = identity(0.0);
        let sol = solve_statefree(&StateFree::zero(), &w, &map).unwrap();
        let sie = assemble_x(&sol, &w, &map).unwrap();
        let r = sie_residual(&sie, &w, &DriftFunctional::StateFree(StateFree::zero()), &LocalTimeConfig::default()).unwrap();
        assert!(r.sup <= 1e-12);
        let pi = pathwise_integral(&sol, &w, &map, &LocalTimeConfig::default()).unwrap();
        assert!(pi.sup_distance(&w).unwrap() <= 1e-12);
    }

    #[test]
    fn chain_rule_for_smooth_input() {
        let iv = StateInterval::new(-4.0, f64::INFINITY, 0.0).unwrap();
        let disp = DispersionSpec::uniform(iv, Form::Linear { a: 1.0, b: 0.25 }).unwrap();
        let map = build_transform(&disp, 0.0).unwrap();
        let grid = uniform_grid(1.0, 1 << 20).unwrap();
        let w = SampledPath::from_fn(grid.clone(), |t| t).unwrap();
        let sol = solve_statefree(&StateFree::zero(), &w, &map).unwrap();
        let cfg = LocalTimeConfig {
            qv_level: Some(60),
            bandwidth: Some(1e-2),
            ..LocalTimeConfig::default()
        };
        let pi = pathwise_integral(&sol, &w, &map, &cfg).unwrap();
        // X(t) = 4 (exp(t / 4) - 1), so integral of s(X) dt = X(t).
        let end = *pi.values().last().unwrap();
        assert!((end - 4.0 * (0.25f64.exp() - 1.0)).abs() <= 1e-6, "{end}");
    }

    #[test]
    fn balance_without_jump_is_one() {
        let grid = uniform_grid(1.0, 1 << 14).unwrap();
        let map = identity(0.0);
        let (mut left, mut right) = (0.0, 0.0);
        for seed in 0..32 {
            let w = gen_brownian(&grid, seed).unwrap();
            let sol = solve_statefree(&StateFree::zero(), &w, &map).unwrap();
            let sie = assemble_x(&sol, &w, &map).unwrap();
            let r = balance_check(&sie, 0.0, &LocalTimeConfig::default()).unwrap();
            assert_eq!(r.expected, 1.0);
            assert!((r.symmetric - 0.5 * (r.left + r.right)).abs() <= 1e-12);
            left += r.left;
            right += r.right;
        }
        assert!((left / right - 1.0).abs() <= 0.2, "{}", left / right);
    }

    #[test]
    fn cancelling_measure_removes_local_time() {
        let grid = uniform_grid(1.0, 1 << 14).unwrap();
        let w = gen_brownian(&grid, 13).unwrap();
        let map = skew();
        let sol = solve_statefree(&StateFree::zero(), &w, &map).unwrap();
        let sie = assemble_x(&sol, &w, &map).unwrap();
        let (f, cont, _) = registry::level_fn("zero", 0.0).unwrap();
        let disp = map.dispersion().clone();
        let base = LocalTimeDrift {
            b: f,
            b_continuous: cont,
            mu: LevelMeasure::default(),
            dispersion: disp.clone(),
            ltcfg: LocalTimeConfig::default(),
        };
        let r0 = verify_localtime_drift(&sie.x, &w, &base).unwrap();
        let r1 = sie_residual(&sie, &w, &DriftFunctional::StateFree(StateFree::zero()), &LocalTimeConfig::default()).unwrap();
        assert_eq!(r0, r1);
        let atoms = disp.jumps().iter().map(|&(xi, s, sp)| (xi, s / sp - 1.0)).collect();
        let cancel = LocalTimeDrift {
            mu: LevelMeasure { atoms, density: None },
            ..base
        };
        let r = verify_localtime_drift(&sie.x, &w, &cancel).unwrap();
        let plain = ito_sum(&sie.x, &w, &disp).unwrap();
        let direct = (0..grid.len())
            .map(|i| (sie.x.values()[i] - plain.values()[i]).abs())
            .fold(0.0, f64::max);
        assert!((r.sup - direct).abs() <= 1e-12);
    }
}

//! Ordinary functional equation `Gamma(t) = B(t, omega, Theta(Gamma + omega))`,
//! solved path by path.

mod stepper;

pub use stepper::{
    maximal_solution, picard, solve_caratheodory, solve_caratheodory_at_level, LevelSolve, PicardResult,
    StepStats,
};

use crate::drift::{drift_increments, DriftFunctional, GainDrift, StateFree};
use crate::error::{input, Error, Result};
use crate::pathkit::SampledPath;
use crate::transform::SpaceTransform;

/// Solution of the functional equation on one input path.
#[derive(Debug, Clone)]
pub struct OfeSolution {
    /// Absorbed from the first grid index outside the domain.
    pub gamma: SampledPath,
    /// Grid time at which `Gamma + omega` leaves the domain of `Theta`, or infinity.
    pub stop_time: f64,
    pub truncation_level_reached: u32,
    /// `sup |Gamma(t) - B(t, omega, Theta(Gamma + omega))|` over live grid nodes.
    pub residual_sup: f64,
    pub maximal: bool,
    /// Localization budget ran out before the horizon while `Gamma + omega`
    /// was still inside the domain.
    pub truncated: bool,
    /// Declared tolerance, zero for closed-form solvers.
    pub tol: f64,
    /// `tol * T * exp(L' T)`, infinite when no Lipschitz bound is declared.
    pub error_bound: f64,
    pub stats: StepStats,
    pub transform: SpaceTransform,
}

impl OfeSolution {
    /// `X(t) = Theta(Gamma(t) + omega(t))` at live grid nodes.
    pub fn state_at(&self, omega: &SampledPath, i: usize) -> Result<f64> {
        self.transform.theta(self.gamma.values()[i] + omega.values()[i])
    }

    pub fn stop_index(&self) -> Option<usize> {
        self.gamma.absorption_index()
    }
}

/// First grid index at which `gamma + omega` leaves the domain of `Theta`.
pub(crate) fn domain_exit(gamma: &[f64], omega: &SampledPath, t: &SpaceTransform) -> Option<usize> {
    gamma
        .iter()
        .zip(omega.values())
        .position(|(g, w)| !t.in_domain(g + w))
}

fn earliest(a: Option<usize>, b: Option<usize>) -> Option<usize> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn stop_time_of(omega: &SampledPath, k: Option<usize>) -> f64 {
    k.map_or(f64::INFINITY, |k| omega.times()[k])
}

/// Highest localization level whose window contains every live value of `Gamma + omega`.
fn level_reached(gamma: &SampledPath, omega: &SampledPath, t: &SpaceTransform) -> u32 {
    let live = gamma.live_len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..live {
        let v = gamma.values()[i] + omega.values()[i];
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (1..=1 << 16)
        .find(|&n| {
            let (a, b) = t.localized_endpoints(n);
            a < lo && hi < b
        })
        .unwrap_or(u32::MAX)
}

/// Residual of a state-free or gain solution against the drift re-evaluated on `X`.
fn residual_against(d: &DriftFunctional, gamma: &SampledPath, omega: &SampledPath, t: &SpaceTransform) -> Result<f64> {
    let live = gamma.live_len();
    let xs: Vec<f64> = (0..gamma.len())
        .map(|i| {
            let idx = i.min(live.saturating_sub(1));
            t.theta(gamma.values()[idx] + omega.values()[idx])
        })
        .collect::<Result<_>>()?;
    let x = SampledPath::with_absorption(omega.times().to_vec(), xs, gamma.absorption_index())?;
    let b = drift_increments(d, omega, &x)?;
    let live = live.min(b.live_len());
    Ok((0..live)
        .map(|i| (gamma.values()[i] - b.values()[i]).abs())
        .fold(0.0, f64::max))
}

fn closed_form(gamma: Vec<f64>, absorbed: Option<usize>, omega: &SampledPath, t: &SpaceTransform) -> Result<OfeSolution> {
    let stop = earliest(absorbed, domain_exit(&gamma, omega, t));
    let path = SampledPath::with_absorption(omega.times().to_vec(), gamma, stop)?;
    let level = level_reached(&path, omega, t);
    Ok(OfeSolution {
        stop_time: stop_time_of(omega, stop),
        truncation_level_reached: level,
        residual_sup: 0.0,
        maximal: false,
        truncated: false,
        tol: 0.0,
        error_bound: 0.0,
        stats: StepStats::default(),
        transform: t.clone(),
        gamma: path,
    })
}

/// `Gamma = B(., omega)` for drifts that ignore the state.
pub fn solve_statefree(d: &StateFree, omega: &SampledPath, t: &SpaceTransform) -> Result<OfeSolution> {
    let gamma = d.cumulative(omega)?;
    let mut sol = closed_form(gamma, None, omega, t)?;
    let df = DriftFunctional::StateFree(d.clone());
    sol.residual_sup = residual_against(&df, &sol.gamma, omega, t)?;
    Ok(sol)
}

/// `Gamma = Theta_0(B(., omega))`, where `Theta_0` is built from the gain.
pub fn solve_gain(d: &GainDrift, omega: &SampledPath, t: &SpaceTransform) -> Result<OfeSolution> {
    if !d.state_map.same_dispersion(t) {
        return input("gain drift was built for a different dispersion");
    }
    let b = d.base.cumulative(omega)?;
    let mut gamma = Vec::with_capacity(b.len());
    let mut absorbed = None;
    for (i, &v) in b.iter().enumerate() {
        match d.gain_map.theta(v) {
            Ok(g) => gamma.push(g),
            Err(_) => {
                absorbed = Some(i);
                gamma.resize(b.len(), *gamma.last().unwrap_or(&0.0));
                break;
            }
        }
    }
    if absorbed == Some(0) {
        return Err(Error::Consistency("gain drift leaves the domain at t = 0".into()));
    }
    let mut sol = closed_form(gamma, absorbed, omega, t)?;
    let df = DriftFunctional::GainModulated(d.clone());
    sol.residual_sup = residual_against(&df, &sol.gamma, omega, t)?;
    Ok(sol)
}

/// Outcome of [`compare`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub holds: bool,
    /// Largest `Gamma_hat - Gamma_bar` over the common live range, clipped at 0.
    pub max_violation: f64,
    pub checked_until: f64,
}

/// Grid tolerance used by [`compare`].
pub const COMPARISON_TOL: f64 = 1e-6;

/// Checks `Gamma_hat <= Gamma_bar` with both expressed relative to the anchor
/// of `sol_bar`; `sol_hat` may use a lower anchor.
pub fn compare(sol_hat: &OfeSolution, sol_bar: &OfeSolution) -> Result<Comparison> {
    sol_hat.gamma.same_grid(&sol_bar.gamma)?;
    if !sol_hat.transform.same_dispersion(&sol_bar.transform) {
        return input("compared solutions use different dispersions");
    }
    if !sol_bar.maximal {
        return input("the upper solution must be maximal");
    }
    let (a_hat, a_bar) = (sol_hat.transform.anchor(), sol_bar.transform.anchor());
    if a_hat > a_bar {
        return input(format!("lower start {a_hat} exceeds upper start {a_bar}"));
    }
    let shift = sol_bar.transform.h(a_hat)?;
    let live = sol_hat.gamma.live_len().min(sol_bar.gamma.live_len());
    let hat = sol_hat.gamma.values();
    let bar = sol_bar.gamma.values();
    let max_violation = (0..live)
        .map(|i| hat[i] + shift - bar[i])
        .fold(0.0, f64::max);
    Ok(Comparison {
        holds: max_violation <= COMPARISON_TOL,
        max_violation,
        checked_until: sol_hat.gamma.times()[live - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathkit::{gen_brownian, uniform_grid, StateInterval};
    use crate::transform::{build_transform, DispersionSpec, Form};

    fn squared() -> SpaceTransform {
        let iv = StateInterval::new(0.0, f64::INFINITY, 1.0).unwrap();
        let disp = DispersionSpec::uniform(iv, Form::Power { coef: 1.0, p: 2.0 }).unwrap();
        build_transform(&disp, 1.0).unwrap()
    }

    fn identity(x0: f64) -> SpaceTransform {
        let disp = DispersionSpec::uniform(StateInterval::real_line(x0), Form::Constant(1.0)).unwrap();
        build_transform(&disp, x0).unwrap()
    }

    #[test]
    fn zero_drift_gives_zero_gamma() {
        let grid = uniform_grid(1.0, 1000).unwrap();
        let w = gen_brownian(&grid, 3).unwrap();
        let sol = solve_statefree(&StateFree::zero(), &w, &identity(0.0)).unwrap();
        assert!(sol.gamma.values().iter().all(|&g| g == 0.0));
        assert_eq!(sol.stop_time, f64::INFINITY);
        assert_eq!(sol.residual_sup, 0.0);
    }

    #[test]
    fn explosion_without_noise() {
        let grid = uniform_grid(2.0, 20_000).unwrap();
        let w = SampledPath::constant(grid, 0.0).unwrap();
        let sol = solve_statefree(&StateFree::explicit("t", |t| t), &w, &squared()).unwrap();
        assert!((sol.stop_time - 1.0).abs() <= 1e-4);
    }

    #[test]
    fn explosion_with_noise_is_first_hit() {
        let grid = uniform_grid(3.0, 30_000).unwrap();
        let w = gen_brownian(&grid, 11).unwrap();
        let sol = solve_statefree(&StateFree::explicit("t", |t| t), &w, &squared()).unwrap();
        let hit = grid_hit(&w);
        assert_eq!(sol.stop_time, hit);
    }

    fn grid_hit(w: &SampledPath) -> f64 {
        w.times()
            .iter()
            .zip(w.values())
            .find(|(t, v)| *t + *v >= 1.0)
            .map_or(f64::INFINITY, |(t, _)| *t)
    }

    #[test]
    fn log_gain() {
        let grid = uniform_grid(1.0, 10_000).unwrap();
        let w = gen_brownian(&grid, 5).unwrap();
        let t = identity(0.0);
        let g = GainDrift::new(Form::Exponential { coef: 1.0, rate: -1.0 }, StateFree::explicit("t", |t| t), t.clone())
            .unwrap();
        let sol = solve_gain(&g, &w, &t).unwrap();
        for (tt, gm) in grid.iter().zip(sol.gamma.values()) {
            assert!((gm - tt.ln_1p()).abs() < 1e-12);
        }
        assert!(sol.residual_sup < 1e-4);
    }

    #[test]
    fn unit_gain_matches_state_free() {
        let grid = uniform_grid(1.0, 1000).unwrap();
        let w = gen_brownian(&grid, 6).unwrap();
        let t = identity(0.0);
        let base = StateFree::explicit("t", |t| t);
        let g = GainDrift::new(Form::Constant(1.0), base.clone(), t.clone()).unwrap();
        let a = solve_gain(&g, &w, &t).unwrap();
        let b = solve_statefree(&base, &w, &t).unwrap();
        assert_eq!(a.gamma, b.gamma);
    }

    #[test]
    fn gain_domain_exit_absorbs() {
        let grid = uniform_grid(2.0, 2000).unwrap();
        let w = SampledPath::constant(grid, 0.0).unwrap();
        let t = identity(0.0);
        let g = GainDrift::new(Form::Exponential { coef: 1.0, rate: -1.0 }, StateFree::explicit("-t", |t| -t), t.clone())
            .unwrap();
        let sol = solve_gain(&g, &w, &t).unwrap();
        assert!((sol.stop_time - 1.0).abs() <= 1e-3);
    }
}

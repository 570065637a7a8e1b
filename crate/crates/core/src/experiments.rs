//! Convergence, support, distribution and regularization experiments.

use crate::assemble::assemble_x;
use crate::drift::{AcDrift, StateFree};
use crate::error::{input, Result};
use crate::ofe::{solve_caratheodory, solve_statefree, OfeSolution};
use crate::pathkit::{self, rng::split_seed, SampledPath};
use crate::transform::SpaceTransform;

/// Relative slack allowed between consecutive Wong-Zakai errors.
pub const WZ_SLACK: f64 = 0.05;

/// Solver settings shared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub n_max: u32,
    pub tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { n_max: 64, tol: 1e-6 }
    }
}

/// Drift accepted by the experiments.
#[derive(Debug, Clone)]
pub enum ExperimentDrift {
    None,
    State(AcDrift),
}

fn solve(d: &ExperimentDrift, omega: &SampledPath, map: &SpaceTransform, cfg: SolverSettings) -> Result<OfeSolution> {
    match d {
        ExperimentDrift::None => solve_statefree(&StateFree::zero(), omega, map),
        ExperimentDrift::State(a) => solve_caratheodory(a, omega, map, cfg.n_max, cfg.tol),
    }
}

/// `X = Theta(Gamma + omega)` and its explosion time.
pub fn solve_state(
    d: &ExperimentDrift,
    omega: &SampledPath,
    map: &SpaceTransform,
    cfg: SolverSettings,
) -> Result<(SampledPath, f64)> {
    let sol = solve(d, omega, map, cfg)?;
    let sie = assemble_x(&sol, omega, map)?;
    Ok((sie.x, sie.explosion_time))
}

/// `X(T)` on the Brownian path with the given seed, NaN past explosion.
pub fn terminal_state(
    d: &ExperimentDrift,
    map: &SpaceTransform,
    grid: &[f64],
    seed: u64,
    cfg: SolverSettings,
) -> Result<f64> {
    let w = pathkit::gen_brownian(grid, seed)?;
    let (x, _) = solve_state(d, &w, map, cfg)?;
    Ok(if x.absorption_index().is_some() { f64::NAN } else { *x.values().last().unwrap_or(&f64::NAN) })
}

/// Errors of the solutions driven by piecewise-linear approximations.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub seed: Option<u64>,
    pub base_mesh: f64,
    pub levels: Vec<u32>,
    pub meshes: Vec<f64>,
    /// `sup |x - x_k|` on `[0, n ^ S_n(x)]`.
    pub errors: Vec<f64>,
    pub stop_time: f64,
    pub approx_stop_times: Vec<f64>,
    /// `max(x) - min(x)` over the same window.
    pub range: f64,
    pub monotone: bool,
    pub stop_time_ok: bool,
}

impl ConvergenceReport {
    pub fn last_error(&self) -> f64 {
        *self.errors.last().unwrap_or(&f64::NAN)
    }
}

fn nonincreasing(errors: &[f64], slack: f64) -> bool {
    errors.windows(2).all(|p| p[1] <= p[0] * (1.0 + slack))
}

/// Solves on `omega` and on its piecewise-linear approximations at the given
/// dyadic levels, and compares on `[0, window ^ S_window(x)]`.
pub fn wong_zakai(
    d: &ExperimentDrift,
    map: &SpaceTransform,
    omega: &SampledPath,
    seed: Option<u64>,
    levels: &[u32],
    window: u32,
    cfg: SolverSettings,
) -> Result<ConvergenceReport> {
    if levels.is_empty() {
        return input("no approximation levels");
    }
    let (x, stop_time) = solve_state(d, omega, map, cfg)?;
    let iv = map.dispersion().interval();
    let until = pathkit::stop_rule(&x, iv, window).min(window as f64);
    let end = omega.times().partition_point(|&t| t <= until).min(x.live_len());
    let window_vals = &x.values()[..end];
    let range = window_vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - window_vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut errors = Vec::with_capacity(levels.len());
    let mut meshes = Vec::with_capacity(levels.len());
    let mut approx_stop_times = Vec::with_capacity(levels.len());
    for &k in levels {
        let wk = pathkit::pl_approximant(omega, k)?;
        let (xk, sk) = solve_state(d, &wk, map, cfg)?;
        let stop = end.min(xk.live_len());
        let e = (0..stop)
            .map(|i| (x.values()[i] - xk.values()[i]).abs())
            .fold(0.0, f64::max);
        errors.push(e);
        meshes.push((-(k as f64)).exp2());
        approx_stop_times.push(sk);
    }
    let min_stop = approx_stop_times.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(ConvergenceReport {
        seed,
        base_mesh: omega.mesh(),
        levels: levels.to_vec(),
        meshes,
        monotone: nonincreasing(&errors, WZ_SLACK),
        errors,
        stop_time_ok: stop_time <= min_stop + omega.mesh(),
        stop_time,
        approx_stop_times,
        range,
    })
}

/// Distances between Brownian-driven solutions and the solutions driven
/// by their own piecewise-linear approximations.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportReport {
    pub seeds: Vec<u64>,
    pub level: u32,
    /// Truncated path metric per seed.
    pub distances: Vec<f64>,
    /// `sup |x - x_k|` over the horizon per seed.
    pub sup_errors: Vec<f64>,
    pub max_distance: f64,
}

/// Runs the probe over `seeds` on `grid`.
pub fn support_probe(
    d: &ExperimentDrift,
    map: &SpaceTransform,
    grid: &[f64],
    seeds: &[u64],
    level: u32,
    cfg: SolverSettings,
) -> Result<SupportReport> {
    let iv = map.dispersion().interval();
    let mut distances = Vec::with_capacity(seeds.len());
    let mut sup_errors = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let w = pathkit::gen_brownian(grid, seed)?;
        let wk = pathkit::pl_approximant(&w, level)?;
        let (x, _) = solve_state(d, &w, map, cfg)?;
        let (xk, _) = solve_state(d, &wk, map, cfg)?;
        distances.push(pathkit::xi_metric(&x, &xk, iv)?);
        let live = x.live_len().min(xk.live_len());
        sup_errors.push((0..live).map(|i| (x.values()[i] - xk.values()[i]).abs()).fold(0.0, f64::max));
    }
    Ok(SupportReport {
        seeds: seeds.to_vec(),
        level,
        max_distance: distances.iter().cloned().fold(0.0, f64::max),
        distances,
        sup_errors,
    })
}

/// Kolmogorov-Smirnov comparison against a closed-form CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct KsReport {
    pub n: usize,
    pub statistic: f64,
    /// `1.36 / sqrt(n)`
    pub threshold: f64,
    pub pass: bool,
    pub seeds: Vec<u64>,
}

/// Smallest sample accepted by [`ks_validate`].
pub const KS_MIN_SAMPLES: usize = 100;

/// `sup |F_n - F|` of the sample against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Draws `X(T)` for the seeds `split_seed(base_seed, 0..n_paths)` through
/// `sample` and tests the empirical law against `cdf` at the 5% level.
pub fn ks_validate(
    sample: impl Fn(u64) -> Result<f64>,
    n_paths: usize,
    base_seed: u64,
    cdf: impl Fn(f64) -> f64,
) -> Result<KsReport> {
    if n_paths < KS_MIN_SAMPLES {
        return input(format!("KS test needs at least {KS_MIN_SAMPLES} paths, got {n_paths}"));
    }
    let seeds: Vec<u64> = (0..n_paths as u64).map(|i| split_seed(base_seed, i)).collect();
    let samples = seeds.iter().map(|&s| sample(s)).collect::<Result<Vec<_>>>()?;
    let statistic = ks_statistic(&samples, cdf);
    let threshold = 1.36 / (n_paths as f64).sqrt();
    Ok(KsReport {
        n: n_paths,
        statistic,
        threshold,
        pass: statistic < threshold,
        seeds,
    })
}

/// Terminal spreads of solutions started at `x0 +/- delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct DavieReport {
    pub deltas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub mesh: f64,
    /// `spreads[j][i]`: seed `j`, perturbation `deltas[i]`.
    pub spreads: Vec<Vec<f64>>,
    /// Same with `omega = 0`.
    pub control: Vec<f64>,
}

impl DavieReport {
    /// Seeds whose spread at the smallest perturbation is below `10 sqrt(h)`.
    pub fn regularized_count(&self) -> usize {
        let bound = 10.0 * self.mesh.sqrt();
        self.spreads
            .iter()
            .filter(|row| row.last().is_some_and(|&s| s < bound))
            .count()
    }
}

fn terminal_spread(d: &AcDrift, omega: &SampledPath, map: &SpaceTransform, delta: f64, cfg: SolverSettings) -> Result<f64> {
    let x0 = map.anchor();
    let mut ends = [0.0; 2];
    for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
        let m = map.reanchor(x0 + sign * delta)?;
        let sol = solve_caratheodory(d, omega, &m, cfg.n_max, cfg.tol)?;
        let live = sol.gamma.live_len();
        ends[k] = m.theta(sol.gamma.values()[live - 1] + omega.values()[live - 1])?;
    }
    Ok((ends[0] - ends[1]).abs())
}

/// Solves `Gamma = x0 + integral b(Gamma + W) dt` from `x0 +/- delta` on
/// Brownian inputs and on `omega = 0`, reporting terminal spreads.
pub fn davie_probe(
    d: &AcDrift,
    map: &SpaceTransform,
    grid: &[f64],
    seeds: &[u64],
    deltas: &[f64],
    cfg: SolverSettings,
) -> Result<DavieReport> {
    let unit = map.dispersion();
    if !unit.breakpoints().is_empty() || unit.has_continuous_part() || unit.value(map.anchor()) != 1.0 {
        return input("the regularization probe runs with unit dispersion");
    }
    let zero = SampledPath::constant(grid.to_vec(), 0.0)?;
    let control = deltas
        .iter()
        .map(|&dl| terminal_spread(d, &zero, map, dl, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut spreads = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let w = pathkit::gen_brownian(grid, seed)?;
        spreads.push(
            deltas
                .iter()
                .map(|&dl| terminal_spread(d, &w, map, dl, cfg))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(DavieReport {
        deltas: deltas.to_vec(),
        seeds: seeds.to_vec(),
        mesh: zero.mesh(),
        spreads,
        control,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::registry;
    use crate::pathkit::{dyadic_grid, gen_brownian, StateInterval};
    use crate::transform::{build_transform, DispersionSpec, Form};
    use statrs::distribution::{ContinuousCDF, Normal};

    fn identity(x0: f64) -> SpaceTransform {
        let disp = DispersionSpec::uniform(StateInterval::real_line(x0), Form::Constant(1.0)).unwrap();
        build_transform(&disp, x0).unwrap()
    }

    #[test]
    fn drift_free_convergence_tracks_the_input() {
        let grid = dyadic_grid(1.0, 12).unwrap();
        let w = gen_brownian(&grid, 3).unwrap();
        let map = identity(0.0);
        let r = wong_zakai(&ExperimentDrift::None, &map, &w, Some(3), &[4, 5, 6, 7, 8, 9, 10], 4, SolverSettings::default())
            .unwrap();
        for (k, e) in r.levels.iter().zip(&r.errors) {
            let wk = pathkit::pl_approximant(&w, *k).unwrap();
            assert!((e - w.sup_distance(&wk).unwrap()).abs() <= 1e-12);
        }
        assert!(r.stop_time_ok);
        assert!(r.errors.iter().all(|&e| e >= 0.0));
    }

    #[test]
    fn level_finer_than_base_is_rejected() {
        let grid = dyadic_grid(1.0, 6).unwrap();
        let w = gen_brownian(&grid, 3).unwrap();
        assert!(wong_zakai(&ExperimentDrift::None, &identity(0.0), &w, None, &[8], 2, SolverSettings::default()).is_err());
    }

    #[test]
    fn support_probe_without_drift() {
        let grid = dyadic_grid(1.0, 10).unwrap();
        let map = identity(0.0);
        let r = support_probe(&ExperimentDrift::None, &map, &grid, &[1, 2, 3], 6, SolverSettings::default()).unwrap();
        for (i, &seed) in r.seeds.iter().enumerate() {
            let w = gen_brownian(&grid, seed).unwrap();
            let wk = pathkit::pl_approximant(&w, 6).unwrap();
            let expect = pathkit::xi_metric(&w, &wk, map.dispersion().interval()).unwrap();
            assert!((r.distances[i] - expect).abs() <= 1e-12);
        }
        let zero = SampledPath::constant(grid.clone(), 0.0).unwrap();
        let (x, _) = solve_state(&ExperimentDrift::None, &zero, &map, SolverSettings::default()).unwrap();
        assert!(x.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ks_refuses_small_samples_and_accepts_exact_law() {
        assert!(ks_validate(|_| Ok(0.0), 99, 0, |_| 0.5).is_err());
        let normal = Normal::standard();
        let grid = [0.0, 1.0];
        let r = ks_validate(
            |s| Ok(*gen_brownian(&grid, s)?.values().last().unwrap()),
            2000,
            17,
            |x| normal.cdf(x),
        )
        .unwrap();
        assert!(r.pass, "{r:?}");
        let shifted = ks_validate(
            |s| Ok(0.3 + gen_brownian(&grid, s)?.values()[1]),
            2000,
            17,
            |x| normal.cdf(x),
        )
        .unwrap();
        assert!(!shifted.pass);
    }

    #[test]
    fn ks_statistic_of_uniform_grid() {
        let xs: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
        assert!((ks_statistic(&xs, |x| x.clamp(0.0, 1.0)) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn sign_drift_without_noise_keeps_two_solutions() {
        let grid = dyadic_grid(1.0, 8).unwrap();
        let map = identity(0.0);
        let d = registry::state_drift("sign", 0.0).unwrap();
        let r = davie_probe(&d, &map, &grid, &[], &[2f64.powi(-4), 2f64.powi(-10)], SolverSettings { n_max: 8, tol: 1e-6 })
            .unwrap();
        for (c, dl) in r.control.iter().zip(&r.deltas) {
            assert!((c - (2.0 + 2.0 * dl)).abs() <= 1e-6, "{c}");
        }
    }

    #[test]
    fn lipschitz_drift_spread_vanishes() {
        let grid = dyadic_grid(1.0, 8).unwrap();
        let map = identity(0.0);
        let d = registry::state_drift("neg_x", 0.0).unwrap();
        let r = davie_probe(&d, &map, &grid, &[5], &[0.1, 0.01], SolverSettings { n_max: 8, tol: 1e-8 }).unwrap();
        for (s, dl) in r.spreads[0].iter().zip(&r.deltas) {
            assert!((s - 2.0 * dl * (-1f64).exp()).abs() <= 1e-6);
        }
    }
}

//! One function per subcommand: configuration in, report out.

use std::fmt::Write;

use pathsolve_core::assemble::{assemble_x_with, sie_residual};
use pathsolve_core::drift::{registry, AcDrift, DriftFunctional, GainDrift, LocalTimeConfig, StateFree};
use pathsolve_core::experiments::{davie_probe, ks_validate, wong_zakai, ExperimentDrift, SolverSettings};
use pathsolve_core::ofe::{compare, maximal_solution, solve_caratheodory, solve_gain, solve_statefree, OfeSolution};
use pathsolve_core::pathkit::{gen_semimartingale, uniform_grid, write_csv, SampledPath};
use pathsolve_core::transform::{build_transform, check_barrow_osgood, theta_residual, SpaceTransform};
use statrs::distribution::{ContinuousCDF, LogNormal, Normal};
use thiserror::Error;

use crate::config::{CdfSpec, ConfigError, DriftSpec, RunConfig};
use crate::output::{num, Report};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("scenario {scenario}: {source}")]
    Solver {
        scenario: String,
        source: pathsolve_core::Error,
    },
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

type Result<T> = std::result::Result<T, RunError>;

enum Drift {
    Free(StateFree),
    Gain(GainDrift),
    State(AcDrift),
}

struct Setup<'a> {
    cfg: &'a RunConfig,
    map: SpaceTransform,
    grid: Vec<f64>,
    ltcfg: LocalTimeConfig,
}

impl<'a> Setup<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self> {
        let s = Self {
            map: build_transform(&cfg.dispersion, cfg.dispersion.interval().x0).map_err(|e| fail(cfg, e))?,
            grid: uniform_grid(cfg.horizon, cfg.steps()).map_err(|e| fail(cfg, e))?,
            ltcfg: LocalTimeConfig {
                bandwidth: cfg.bandwidth,
                qv_level: cfg.qv_level,
                ..LocalTimeConfig::default()
            },
            cfg,
        };
        Ok(s)
    }

    fn ok<T>(&self, r: pathsolve_core::Result<T>) -> Result<T> {
        r.map_err(|e| fail(self.cfg, e))
    }

    fn omega(&self, seed: u64) -> Result<SampledPath> {
        self.ok(self.try_omega(seed))
    }

    fn try_omega(&self, seed: u64) -> pathsolve_core::Result<SampledPath> {
        let (key, param) = &self.cfg.noise_fv;
        let (f, _, _) = registry::level_fn(key, *param)?;
        gen_semimartingale(&self.grid, seed, |t| f(t), self.cfg.noise_scale)
    }

    fn drift(&self) -> Result<Drift> {
        Ok(match &self.cfg.drift {
            DriftSpec::None => Drift::Free(StateFree::zero()),
            DriftSpec::Time { rate } => Drift::Free(time_drift(*rate)),
            DriftSpec::Integrand { key, param } => Drift::Free(self.ok(registry::noise_integrand(key, *param))?),
            DriftSpec::Gain { gain, rate } => {
                Drift::Gain(self.ok(GainDrift::new(gain.clone(), time_drift(*rate), self.map.clone()))?)
            }
            DriftSpec::State { key, param } => Drift::State(self.ok(registry::state_drift(key, *param))?),
        })
    }

    fn settings(&self) -> SolverSettings {
        SolverSettings {
            n_max: self.cfg.n_max,
            tol: self.cfg.tol,
        }
    }

    fn solve(&self, d: &Drift, omega: &SampledPath) -> Result<OfeSolution> {
        self.ok(self.try_solve(d, omega))
    }

    fn try_solve(&self, d: &Drift, omega: &SampledPath) -> pathsolve_core::Result<OfeSolution> {
        match d {
            Drift::Free(f) => solve_statefree(f, omega, &self.map),
            Drift::Gain(g) => solve_gain(g, omega, &self.map),
            Drift::State(a) => solve_caratheodory(a, omega, &self.map, self.cfg.n_max, self.cfg.tol),
        }
    }

    fn state_drift(&self, command: &str) -> Result<AcDrift> {
        match self.drift()? {
            Drift::State(a) => Ok(a),
            _ => Err(ConfigError::Unsupported(format!("{command} needs [drift] kind = state")).into()),
        }
    }

    fn experiment_drift(&self, command: &str) -> Result<ExperimentDrift> {
        match self.cfg.drift {
            DriftSpec::None => Ok(ExperimentDrift::None),
            _ => Ok(ExperimentDrift::State(self.state_drift(command)?)),
        }
    }
}

fn fail(cfg: &RunConfig, source: pathsolve_core::Error) -> RunError {
    RunError::Solver {
        scenario: cfg.name.clone(),
        source,
    }
}

fn time_drift(rate: f64) -> StateFree {
    StateFree::explicit(format!("{rate} t"), move |t| rate * t)
}

fn functional(d: &Drift) -> DriftFunctional {
    match d {
        Drift::Free(f) => DriftFunctional::StateFree(f.clone()),
        Drift::Gain(g) => DriftFunctional::GainModulated(g.clone()),
        Drift::State(a) => DriftFunctional::AbsolutelyContinuous(a.clone()),
    }
}

fn csv(path: &SampledPath) -> String {
    let mut buf = Vec::new();
    write_csv(path, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

fn header(r: &mut Report, cfg: &RunConfig, command: &str, hash: &str) {
    r.summary.push("command", command);
    r.summary.push("scenario", &cfg.name);
    r.summary.push("config_sha256", hash);
    r.summary.push("mesh", num(cfg.mesh));
    r.summary.push("horizon", num(cfg.horizon));
    r.summary.push(
        "seeds",
        cfg.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
    );
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

/// Tables of `H` and `Theta` with the endpoint flags.
pub fn transform(cfg: &RunConfig, hash: &str) -> Result<Report> {
    let s = Setup::new(cfg)?;
    let g = &cfg.transform;
    let mut r = Report::new();
    header(&mut r, cfg, "transform", hash);
    let mut h = String::from("x,H(x)\n");
    for x in linspace(g.x_min, g.x_max, g.points).filter(|&x| cfg.dispersion.interval().contains(x)) {
        writeln!(h, "{},{}", num(x), num(s.ok(s.map.h(x))?)).unwrap();
    }
    let mut th = String::from("w,Theta(w)\n");
    let ws: Vec<f64> = linspace(g.w_min, g.w_max, g.points).filter(|&w| s.map.in_domain(w)).collect();
    for &w in &ws {
        writeln!(th, "{},{}", num(w), num(s.ok(s.map.theta(w))?)).unwrap();
    }
    let (lower, upper) = check_barrow_osgood(&s.map);
    r.summary.push("barrow_osgood", format!("({lower}, {upper})"));
    r.summary.push("heuristic_classification", s.map.heuristic_classification());
    r.summary.push("theta_domain", format!("({}, {})", num(s.map.ell_tilde()), num(s.map.r_tilde())));
    r.summary.push("theta_residual", num(s.ok(theta_residual(&s.map, &ws))?));
    r.file("h.csv", h);
    r.file("theta.csv", th);
    Ok(r)
}

/// Solution bundle per seed.
pub fn solve(cfg: &RunConfig, hash: &str) -> Result<Report> {
    let s = Setup::new(cfg)?;
    let d = s.drift()?;
    let mut r = Report::new();
    header(&mut r, cfg, "solve", hash);
    for &seed in &cfg.seeds {
        let omega = s.omega(seed)?;
        let sol = s.solve(&d, &omega)?;
        let sie = s.ok(assemble_x_with(&sol, &omega, &s.map, &s.ltcfg))?;
        let res = s.ok(sie_residual(&sie, &omega, &functional(&d), &s.ltcfg))?;
        let k = format!("seed.{seed}");
        r.summary.push(format!("{k}.explosion_time"), num(sie.explosion_time));
        r.summary.push(format!("{k}.stop_time"), num(sol.stop_time));
        r.summary.push(format!("{k}.r_time"), num(sie.r_time));
        r.summary.push(format!("{k}.truncated"), sol.truncated);
        r.summary.push(format!("{k}.ofe_residual"), num(sol.residual_sup));
        r.summary.push(format!("{k}.sie_residual"), num(res.sup));
        r.summary.push(format!("{k}.sup_abs_x"), num(res.scale));
        r.file(format!("x_seed{seed}.csv"), csv(&sie.x));
        r.file(format!("gamma_seed{seed}.csv"), csv(&sol.gamma));
        r.file(format!("omega_seed{seed}.csv"), csv(&omega));
    }
    Ok(r)
}

/// Residual and closed-form checks per seed.
pub fn validate(cfg: &RunConfig, hash: &str) -> Result<Report> {
    let s = Setup::new(cfg)?;
    let d = s.drift()?;
    let mut r = Report::new();
    header(&mut r, cfg, "validate", hash);
    let ofe_limit = match d {
        Drift::State(_) => 10.0 * cfg.tol,
        _ => 10.0 * cfg.mesh,
    };
    for &seed in &cfg.seeds {
        let omega = s.omega(seed)?;
        let sol = s.solve(&d, &omega)?;
        let sie = s.ok(assemble_x_with(&sol, &omega, &s.map, &s.ltcfg))?;
        let k = format!("seed.{seed}");
        r.summary.push(format!("{k}.ofe_residual"), num(sol.residual_sup));
        r.check(format!("{k}.ofe_residual_check"), sol.residual_sup <= ofe_limit);
        if cfg.drift == DriftSpec::None {
            let mut worst: f64 = 0.0;
            for i in 0..sie.x.live_len() {
                worst = worst.max((sie.x.values()[i] - s.ok(s.map.theta(omega.values()[i]))?).abs());
            }
            r.summary.push(format!("{k}.closed_form_error"), num(worst));
            r.check(format!("{k}.closed_form_check"), worst <= 1e-12);
        }
        let res = s.ok(sie_residual(&sie, &omega, &functional(&d), &s.ltcfg))?;
        r.summary.push(format!("{k}.sie_relative_residual"), num(res.relative()));
        if res.reliable {
            r.check(format!("{k}.sie_residual_check"), res.relative() <= 0.05);
        } else {
            r.summary.push(format!("{k}.sie_residual_check"), "skipped");
        }
    }
    Ok(r)
}

/// Wong-Zakai convergence report per seed.
pub fn wz(cfg: &RunConfig, hash: &str) -> Result<Report> {
    let s = Setup::new(cfg)?;
    let d = s.experiment_drift("wz")?;
    let mut r = Report::new();
    header(&mut r, cfg, "wz", hash);
    for &seed in &cfg.seeds {
        let omega = s.omega(seed)?;
        let rep = s.ok(wong_zakai(&d, &s.map, &omega, Some(seed), &cfg.wz_levels, cfg.wz_window, s.settings()))?;
        let mut out = String::from("level,mesh,error,stop_time\n");
        for i in 0..rep.levels.len() {
            writeln!(
                out,
                "{},{},{},{}",
                rep.levels[i],
                num(rep.meshes[i]),
                num(rep.errors[i]),
                num(rep.approx_stop_times[i])
            )
            .unwrap();
        }
        let k = format!("seed.{seed}");
        r.summary.push(format!("{k}.stop_time"), num(rep.stop_time));
        r.summary.push(format!("{k}.range"), num(rep.range));
        r.summary.push(format!("{k}.last_error_over_range"), num(rep.last_error() / rep.range));
        r.check(format!("{k}.monotone"), rep.monotone);
        r.check(format!("{k}.stop_time_check"), rep.stop_time_ok);
        r.file(format!("wz_seed{seed}.csv"), out);
    }
    Ok(r)
}

/// Lower solution against the maximal solution, per seed.
pub fn compare_cmd(cfg: &RunConfig, hash: &str) -> Result<Report> {
    let s = Setup::new(cfg)?;
    let d = s.state_drift("compare")?;
    let lower_map = s.ok(s.map.reanchor(s.map.anchor() + cfg.x0_shift))?;
    let lower = d.shifted(cfg.drift_shift);
    let mut r = Report::new();
    header(&mut r, cfg, "compare", hash);
    r.summary.push("drift_shift", num(cfg.drift_shift));
    r.summary.push("x0_shift", num(cfg.x0_shift));
    let mut out = String::from("seed,max_violation,holds\n");
    for &seed in &cfg.seeds {
        let omega = s.omega(seed)?;
        let bar = s.ok(maximal_solution(&d, &omega, &s.map, cfg.n_max, cfg.tol))?;
        let hat = s.ok(solve_caratheodory(&lower, &omega, &lower_map, cfg.n_max, cfg.tol))?;
        let c = s.ok(compare(&hat, &bar))?;
        writeln!(out, "{seed},{},{}", num(c.max_violation), c.holds).unwrap();
        r.check(format!("seed.{seed}.comparison"), c.holds);
    }
    r.file("compare.csv", out);
    Ok(r)
}

fn oracle(spec: &CdfSpec) -> Box<dyn Fn(f64) -> f64> {
    match *spec {
        CdfSpec::Normal { mean, sd } => {
            let n = Normal::new(mean, sd).expect("positive sd");
            Box::new(move |x| n.cdf(x))
        }
        CdfSpec::TwoSided { left_sd, right_sd } => {
            let z = Normal::standard();
            Box::new(move |x| if x > 0.0 { z.cdf(x / right_sd) } else { z.cdf(x / left_sd) })
        }
        CdfSpec::LogNormal { log_mean, log_sd } => {
            let l = LogNormal::new(log_mean, log_sd).expect("positive sd");
            Box::new(move |x| l.cdf(x))
        }
    }
}

fn valid_cdf(spec: &CdfSpec) -> bool {
    match *spec {
        CdfSpec::Normal { sd, .. } => sd > 0.0,
        CdfSpec::TwoSided { left_sd, right_sd } => left_sd > 0.0 && right_sd > 0.0,
        CdfSpec::LogNormal { log_sd, .. } => log_sd > 0.0,
    }
}

/// Kolmogorov-Smirnov test of `X(T)` against the configured law.
pub fn ks(cfg: &RunConfig, hash: &str) -> Result<Report> {
    let spec = cfg
        .cdf
        .as_ref()
        .filter(|c| valid_cdf(c))
        .ok_or_else(|| ConfigError::Unsupported("ks needs [ks] cdf with positive spreads".into()))?;
    let mut sampled = cfg.clone();
    if let Some(m) = cfg.ks_mesh {
        sampled.mesh = m.min(cfg.horizon);
    }
    let s = Setup::new(&sampled)?;
    let d = s.drift()?;
    let sample = |seed: u64| -> pathsolve_core::Result<f64> {
        let omega = s.try_omega(seed)?;
        let sol = s.try_solve(&d, &omega)?;
        let sie = assemble_x_with(&sol, &omega, &s.map, &s.ltcfg)?;
        Ok(if sie.x.absorption_index().is_some() {
            f64::INFINITY
        } else {
            *sie.x.values().last().unwrap()
        })
    };
    let rep = s.ok(ks_validate(sample, cfg.ks_n, cfg.ks_seed, oracle(spec)))?;
    let mut r = Report::new();
    header(&mut r, cfg, "ks", hash);
    r.summary.push("ks_seed", cfg.ks_seed);
    r.summary.push("n", rep.n);
    r.summary.push("statistic", num(rep.statistic));
    r.summary.push("threshold", num(rep.threshold));
    r.check("ks", rep.pass);
    Ok(r)
}

/// Terminal spreads under perturbed starts, with the noiseless control.
pub fn davie(cfg: &RunConfig, hash: &str) -> Result<Report> {
    let s = Setup::new(cfg)?;
    let d = s.state_drift("davie")?;
    let rep = s.ok(davie_probe(&d, &s.map, &s.grid, &cfg.seeds, &cfg.davie_deltas, s.settings()))?;
    let mut out = String::from("seed,delta,spread\n");
    for (i, delta) in rep.deltas.iter().enumerate() {
        writeln!(out, "control,{},{}", num(*delta), num(rep.control[i])).unwrap();
    }
    for (seed, row) in rep.seeds.iter().zip(&rep.spreads) {
        for (delta, spread) in rep.deltas.iter().zip(row) {
            writeln!(out, "{seed},{},{}", num(*delta), num(*spread)).unwrap();
        }
    }
    let mut r = Report::new();
    header(&mut r, cfg, "davie", hash);
    r.summary.push("spread_bound", num(10.0 * rep.mesh.sqrt()));
    r.summary.push("below_bound", format!("{}/{}", rep.regularized_count(), rep.seeds.len()));
    r.summary.push("control_spread", num(*rep.control.last().unwrap_or(&f64::NAN)));
    r.file("davie.csv", out);
    Ok(r)
}

//! Generalized drift functionals and their cumulative values along paths.

use std::fmt;
use std::sync::Arc;

use crate::error::{input, Error, Result};
use crate::pathkit::{self, rng::CounterRng, SampledPath, Side, StateInterval};
use crate::transform::{build_transform, DispersionSpec, Form, SpaceTransform};

/// Cumulative `|integrand|` beyond which the drift is declared to have blown up.
pub const OVERFLOW_THRESHOLD: f64 = 1e12;

type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type NoiseFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type StateFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
type LevelFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Drift that ignores the state path.
#[derive(Clone)]
pub enum StateFree {
    /// A given finite-variation function `B(t)` with `B(0) = 0`.
    Explicit { name: String, b: TimeFn },
    /// `B(t) = integral_0^t beta(u, omega(u)) du`.
    Integrand {
        name: String,
        beta: NoiseFn,
        continuous: bool,
    },
}

impl StateFree {
    pub fn explicit(name: impl Into<String>, b: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        StateFree::Explicit {
            name: name.into(),
            b: Arc::new(b),
        }
    }

    pub fn integrand(
        name: impl Into<String>,
        beta: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        continuous: bool,
    ) -> Self {
        StateFree::Integrand {
            name: name.into(),
            beta: Arc::new(beta),
            continuous,
        }
    }

    /// `B(t) = 0`.
    pub fn zero() -> Self {
        Self::explicit("zero", |_| 0.0)
    }

    /// `B(t, omega)` along the grid of `omega`.
    pub fn cumulative(&self, omega: &SampledPath) -> Result<Vec<f64>> {
        match self {
            StateFree::Explicit { name, b } => {
                if b(0.0) != 0.0 {
                    return input(format!("state-free drift {name} must vanish at t = 0"));
                }
                Ok(omega.times().iter().map(|&t| b(t)).collect())
            }
            StateFree::Integrand {
                beta, continuous, ..
            } => {
                let t = omega.times();
                let w = omega.values();
                let (vals, _) = integrate(t, *continuous, |i| beta(t[i], w[i]));
                Ok(vals)
            }
        }
    }

    pub fn name(&self) -> &str {
        match self {
            StateFree::Explicit { name, .. } | StateFree::Integrand { name, .. } => name,
        }
    }
}

/// Cumulative grid integral of `f(i)`; left-point rule for discontinuous
/// integrands, trapezoid otherwise. Returns the values and the index at
/// which the running integral of `|f|` first exceeds the overflow threshold.
fn integrate(t: &[f64], continuous: bool, f: impl Fn(usize) -> f64) -> (Vec<f64>, Option<usize>) {
    let mut out = Vec::with_capacity(t.len());
    out.push(0.0);
    let mut acc = 0.0;
    let mut abs = 0.0;
    let mut blown = None;
    let mut prev = f(0);
    for i in 0..t.len() - 1 {
        let dt = t[i + 1] - t[i];
        let (inc, absinc) = if continuous {
            let next = f(i + 1);
            let r = (0.5 * (prev + next) * dt, 0.5 * (prev.abs() + next.abs()) * dt);
            prev = next;
            r
        } else {
            let cur = f(i);
            (cur * dt, cur.abs() * dt)
        };
        acc += inc;
        abs += absinc;
        if blown.is_none() && !(abs <= OVERFLOW_THRESHOLD) {
            blown = Some(i + 1);
        }
        out.push(acc);
    }
    (out, blown)
}

/// How the local Lipschitz constant `L_n` of an absolutely continuous drift
/// depends on the localization level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lipschitz {
    /// Same bound at every level.
    Constant(f64),
    /// `coef * max(|ell_n|, |r_n|)`.
    GrowsWithLevel(f64),
    /// No finite bound is claimed.
    None,
}

/// `b(t, w, x)` with its declared localization data.
#[derive(Clone)]
pub struct AcDrift {
    name: String,
    b: StateFn,
    pub continuous: bool,
    pub lipschitz: Lipschitz,
}

impl fmt::Debug for AcDrift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AcDrift")
            .field("name", &self.name)
            .field("continuous", &self.continuous)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl AcDrift {
    pub fn new(
        name: impl Into<String>,
        b: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        continuous: bool,
        lipschitz: Lipschitz,
    ) -> Self {
        Self {
            name: name.into(),
            b: Arc::new(b),
            continuous,
            lipschitz,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, t: f64, w: f64, x: f64) -> f64 {
        (self.b)(t, w, x)
    }

    /// `b + delta`.
    pub fn shifted(&self, delta: f64) -> Self {
        if delta == 0.0 {
            return self.clone();
        }
        let inner = Arc::clone(&self.b);
        Self {
            name: format!("{}{:+}", self.name, delta),
            b: Arc::new(move |t, w, x| inner(t, w, x) + delta),
            continuous: self.continuous,
            lipschitz: self.lipschitz,
        }
    }

    /// Declared `L_n` on the `n`-th localizer of `interval`.
    pub fn lipschitz_at(&self, n: u32, interval: &StateInterval) -> f64 {
        match self.lipschitz {
            Lipschitz::Constant(l) => l,
            Lipschitz::GrowsWithLevel(c) => {
                let (lo, hi) = interval.level(n);
                c * lo.abs().max(hi.abs())
            }
            Lipschitz::None => f64::INFINITY,
        }
    }

    /// Noise truncation level `w_n = n`.
    pub fn noise_bound(&self, n: u32) -> f64 {
        n as f64
    }
}

/// Signed measure on the state space: atoms plus an optional density on a
/// bounded window.
#[derive(Clone, Default)]
pub struct LevelMeasure {
    pub atoms: Vec<(f64, f64)>,
    pub density: Option<(f64, f64, LevelFn)>,
}

impl fmt::Debug for LevelMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevelMeasure")
            .field("atoms", &self.atoms)
            .field("density_window", &self.density.as_ref().map(|d| (d.0, d.1)))
            .finish()
    }
}

impl LevelMeasure {
    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.1 == 0.0) && self.density.is_none()
    }
}

/// How local times are estimated wherever an equation charges them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTimeConfig {
    /// Band half-width; `None` picks [`pathkit::default_bandwidth`].
    pub bandwidth: Option<f64>,
    /// Threshold level of the quadratic variation; `None` picks the default.
    pub qv_level: Option<u32>,
    pub side: Side,
    /// Number of uniformly spaced levels for density integrals.
    pub levels: usize,
}

impl Default for LocalTimeConfig {
    fn default() -> Self {
        Self {
            bandwidth: None,
            qv_level: None,
            side: Side::Right,
            levels: 33,
        }
    }
}

impl LocalTimeConfig {
    pub fn bandwidth_for(&self, path: &SampledPath) -> f64 {
        self.bandwidth.unwrap_or_else(|| {
            let b = pathkit::default_bandwidth(path);
            if b > 0.0 {
                b
            } else {
                let live = path.live_len();
                let step = path.values()[..live]
                    .windows(2)
                    .fold(0.0f64, |a, w| a.max((w[1] - w[0]).abs()));
                (8.0 * step).max(f64::EPSILON)
            }
        })
    }

    pub fn qv(&self, path: &SampledPath) -> Result<SampledPath> {
        let n = self
            .qv_level
            .unwrap_or_else(|| pathkit::default_qv_level(path.len().saturating_sub(1)));
        pathkit::quadratic_variation(path, n)
    }
}

/// Time-homogeneous drift `b(x)` plus a measure charged through local time.
#[derive(Clone)]
pub struct LocalTimeDrift {
    pub b: LevelFn,
    pub b_continuous: bool,
    pub mu: LevelMeasure,
    pub dispersion: DispersionSpec,
    pub ltcfg: LocalTimeConfig,
}

impl fmt::Debug for LocalTimeDrift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LocalTimeDrift")
            .field("mu", &self.mu)
            .field("ltcfg", &self.ltcfg)
            .finish()
    }
}

/// Gain-modulated state-free drift: `integral A(H_{x0}(x) - omega) dB`.
#[derive(Clone)]
pub struct GainDrift {
    pub base: StateFree,
    /// Transform built from the gain `A`, anchored at 0.
    pub gain_map: SpaceTransform,
    /// `H_{x0}` of the equation's dispersion.
    pub state_map: SpaceTransform,
}

impl GainDrift {
    pub fn new(gain: Form, base: StateFree, state_map: SpaceTransform) -> Result<Self> {
        let disp = DispersionSpec::uniform(StateInterval::real_line(0.0), gain)?;
        Ok(Self {
            base,
            gain_map: build_transform(&disp, 0.0)?,
            state_map,
        })
    }

    /// `A(y)`.
    pub fn gain(&self, y: f64) -> f64 {
        self.gain_map.dispersion().value(y)
    }
}

/// Generalized drift.
#[derive(Clone)]
pub enum DriftFunctional {
    StateFree(StateFree),
    GainModulated(GainDrift),
    AbsolutelyContinuous(AcDrift),
    LocalTimeMeasure(LocalTimeDrift),
}

impl fmt::Debug for DriftFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftFunctional::StateFree(s) => write!(f, "StateFree({})", s.name()),
            DriftFunctional::GainModulated(g) => write!(f, "GainModulated({})", g.base.name()),
            DriftFunctional::AbsolutelyContinuous(a) => write!(f, "{a:?}"),
            DriftFunctional::LocalTimeMeasure(l) => write!(f, "{l:?}"),
        }
    }
}

/// Cumulative drift `t -> B(t, omega, x)` along the common grid. The output
/// is absorbed from the first index at which the integral of the absolute
/// integrand passes [`OVERFLOW_THRESHOLD`].
pub fn drift_increments(d: &DriftFunctional, omega: &SampledPath, x: &SampledPath) -> Result<SampledPath> {
    omega.same_grid(x)?;
    let t = omega.times();
    let w = omega.values();
    let xv = x.values();
    let (vals, mut blown) = match d {
        DriftFunctional::StateFree(sf) => (sf.cumulative(omega)?, None),
        DriftFunctional::GainModulated(g) => {
            let b = g.base.cumulative(omega)?;
            let mut out = Vec::with_capacity(t.len());
            out.push(0.0);
            let mut acc = 0.0;
            let mut abs = 0.0;
            let mut blown = None;
            for i in 0..t.len() - 1 {
                let y = g.state_map.h(xv[i]).map(|h| h - w[i]);
                let a = match y {
                    Ok(y) => g.gain(y),
                    Err(_) => f64::INFINITY,
                };
                let db = b[i + 1] - b[i];
                acc += if db == 0.0 { 0.0 } else { a * db };
                abs += if db == 0.0 { 0.0 } else { (a * db).abs() };
                if blown.is_none() && !(abs <= OVERFLOW_THRESHOLD) {
                    blown = Some(i + 1);
                }
                out.push(acc);
            }
            (out, blown)
        }
        DriftFunctional::AbsolutelyContinuous(ac) => integrate(t, ac.continuous, |i| ac.eval(t[i], w[i], xv[i])),
        DriftFunctional::LocalTimeMeasure(lt) => {
            let (mut vals, blown) = integrate(t, lt.b_continuous, |i| (lt.b)(xv[i]));
            if !lt.mu.is_zero() {
                let charge = measure_charge(x, &lt.mu, &lt.ltcfg, |xi| lt.dispersion.value(xi))?;
                for (v, c) in vals.iter_mut().zip(charge) {
                    *v += c;
                }
            }
            (vals, blown)
        }
    };
    if let Some(k) = x.absorption_index() {
        blown = Some(blown.map_or(k, |b| b.min(k)));
    }
    SampledPath::with_absorption(t.to_vec(), sanitize(vals, blown), blown)
}

fn sanitize(mut vals: Vec<f64>, blown: Option<usize>) -> Vec<f64> {
    let live = blown.unwrap_or(vals.len());
    for v in &mut vals[..live] {
        if !v.is_finite() {
            *v = f64::MAX.copysign(*v);
        }
    }
    vals
}

/// `t -> integral L^x(t, xi) mu(dxi) / scale(xi)` with the atoms taken
/// exactly and the density part by the midpoint rule on uniform levels.
pub(crate) fn measure_charge(
    x: &SampledPath,
    mu: &LevelMeasure,
    cfg: &LocalTimeConfig,
    scale: impl Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; x.len()];
    if mu.is_zero() {
        return Ok(out);
    }
    let qv = cfg.qv(x)?;
    let eps = cfg.bandwidth_for(x);
    for &(xi, m) in &mu.atoms {
        if m == 0.0 {
            continue;
        }
        let l = pathkit::local_time(x, xi, eps, cfg.side, &qv)?;
        let k = m / scale(xi);
        for (o, v) in out.iter_mut().zip(l.path.values()) {
            *o += k * v;
        }
    }
    if let Some((lo, hi, dens)) = &mu.density {
        let n = cfg.levels.max(1);
        let dx = (hi - lo) / n as f64;
        let levels: Vec<f64> = (0..n).map(|j| lo + (j as f64 + 0.5) * dx).collect();
        let field = pathkit::local_time_field(x, &levels, eps, cfg.side, &qv)?;
        for (j, &xi) in levels.iter().enumerate() {
            let k = dens(xi) * dx / scale(xi);
            for (o, v) in out.iter_mut().zip(&field.values[j]) {
                *o += k * v;
            }
        }
    }
    Ok(out)
}

/// Result of sampling the declared Lipschitz bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzReport {
    pub level: u32,
    pub declared: f64,
    pub max_ratio: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Samples `10^3` triples in `[0, n] x [-w_n, w_n] x (ell_n, r_n)^2` and
/// compares the largest difference quotient with the declared `L_n`.
pub fn wz_localization_check(d: &AcDrift, interval: &StateInterval, n: u32) -> Result<LipschitzReport> {
    if n == 0 || n > 5 {
        return input(format!("localization check runs for 1 <= n <= 5, got {n}"));
    }
    let declared = d.lipschitz_at(n, interval);
    let (lo, hi) = interval.level(n);
    let wn = d.noise_bound(n);
    let mut rng = CounterRng::new(0x5eed_0000 + n as u64);
    let samples = 1000;
    let mut max_ratio: f64 = 0.0;
    for _ in 0..samples {
        let t = n as f64 * rng.next_f64();
        let w = wn * (2.0 * rng.next_f64() - 1.0);
        let x1 = lo + (hi - lo) * rng.next_f64();
        let x2 = lo + (hi - lo) * rng.next_f64();
        if x1 == x2 {
            continue;
        }
        let ratio = (d.eval(t, w, x1) - d.eval(t, w, x2)).abs() / (x1 - x2).abs();
        if !ratio.is_finite() {
            return Err(Error::NonFinite { t, gamma: x1 });
        }
        max_ratio = max_ratio.max(ratio);
    }
    Ok(LipschitzReport {
        level: n,
        declared,
        max_ratio,
        samples,
        pass: max_ratio <= 1.01 * declared,
    })
}

/// Named integrands for configuration files.
pub mod registry {
    use super::*;

    /// Keys understood by [`state_drift`] and [`level_fn`].
    pub const KEYS: &[&str] = &[
        "zero",
        "neg_x",
        "sqrt_abs",
        "sign",
        "sin",
        "square",
        "indicator_positive",
        "const",
    ];

    pub type LevelFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

    /// `f(x)` for a key, whether it is continuous, and its Lipschitz bound;
    /// `param` is used by `const`.
    pub fn level_fn(key: &str, param: f64) -> Result<(LevelFn, bool, Lipschitz)> {
        let entry: (LevelFn, bool, Lipschitz) = match key {
            "zero" => (Arc::new(|_| 0.0), true, Lipschitz::Constant(0.0)),
            "neg_x" => (Arc::new(|x: f64| -x), true, Lipschitz::Constant(1.0)),
            "sqrt_abs" => (Arc::new(|x: f64| x.abs().sqrt()), true, Lipschitz::None),
            "sign" => (Arc::new(|x: f64| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 }), false, Lipschitz::None),
            "sin" => (Arc::new(f64::sin), true, Lipschitz::Constant(1.0)),
            "square" => (Arc::new(|x: f64| x * x), true, Lipschitz::GrowsWithLevel(2.0)),
            "indicator_positive" => (Arc::new(|x: f64| (x > 0.0) as u8 as f64), false, Lipschitz::None),
            "const" => (Arc::new(move |_| param), true, Lipschitz::Constant(0.0)),
            other => return input(format!("unknown integrand key {other:?}")),
        };
        Ok(entry)
    }

    /// `b(t, w, x) = f(x)` for a key.
    pub fn state_drift(key: &str, param: f64) -> Result<AcDrift> {
        let (f, continuous, lipschitz) = level_fn(key, param)?;
        Ok(AcDrift::new(key, move |_, _, x| f(x), continuous, lipschitz))
    }

    /// `beta(t, w) = f(w)` for a key.
    pub fn noise_integrand(key: &str, param: f64) -> Result<StateFree> {
        let (f, continuous, _) = level_fn(key, param)?;
        Ok(StateFree::integrand(key, move |_, w| f(w), continuous))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathkit::{dyadic_grid, gen_brownian, uniform_grid};
    use proptest::prelude::*;

    fn grid_paths(seed: u64) -> (SampledPath, SampledPath) {
        let grid = dyadic_grid(1.0, 10).unwrap();
        let w = gen_brownian(&grid, seed).unwrap();
        let x = w.map(|v| 1.0 + 0.5 * v).unwrap();
        (w, x)
    }

    #[test]
    fn explicit_state_free_is_exact() {
        let (w, x) = grid_paths(1);
        let d = DriftFunctional::StateFree(StateFree::explicit("t", |t| t));
        let b = drift_increments(&d, &w, &x).unwrap();
        assert_eq!(b.values(), w.times());
    }

    #[test]
    fn occupation_time_of_positive_half_line() {
        let (w, x) = grid_paths(2);
        let d = DriftFunctional::StateFree(registry::noise_integrand("indicator_positive", 0.0).unwrap());
        let b = drift_increments(&d, &w, &x).unwrap();
        let h = w.times()[1];
        let direct: f64 = w.values()[..w.len() - 1].iter().filter(|&&v| v > 0.0).count() as f64 * h;
        assert!((b.values().last().unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn bounded_integrand_bound() {
        let (w, x) = grid_paths(3);
        let d = DriftFunctional::AbsolutelyContinuous(registry::state_drift("sin", 0.0).unwrap());
        let b = drift_increments(&d, &w, &x).unwrap();
        assert!(b.values().iter().all(|v| v.abs() <= 1.0 + 1e-15));
    }

    #[test]
    fn blow_up_absorbs() {
        let grid = uniform_grid(1.0, 100).unwrap();
        let w = SampledPath::constant(grid.clone(), 0.0).unwrap();
        let x = SampledPath::from_fn(grid, |t| t).unwrap();
        let d = DriftFunctional::AbsolutelyContinuous(AcDrift::new("huge", |_, _, x| 1e15 * x, true, Lipschitz::None));
        let b = drift_increments(&d, &w, &x).unwrap();
        assert!(b.absorption_index().is_some());
    }

    #[test]
    fn zero_measure_reduces_to_plain_drift() {
        let (w, x) = grid_paths(4);
        let (f, cont, _) = registry::level_fn("sin", 0.0).unwrap();
        let disp = DispersionSpec::uniform(StateInterval::real_line(1.0), Form::Constant(1.0)).unwrap();
        let lt = DriftFunctional::LocalTimeMeasure(LocalTimeDrift {
            b: f,
            b_continuous: cont,
            mu: LevelMeasure::default(),
            dispersion: disp,
            ltcfg: LocalTimeConfig::default(),
        });
        let ac = DriftFunctional::AbsolutelyContinuous(registry::state_drift("sin", 0.0).unwrap());
        assert_eq!(drift_increments(&lt, &w, &x).unwrap(), drift_increments(&ac, &w, &x).unwrap());
    }

    #[test]
    fn lipschitz_declarations() {
        let line = StateInterval::real_line(0.0);
        let lin = AcDrift::new("x", |_, _, x| x, true, Lipschitz::Constant(1.0));
        let r = wz_localization_check(&lin, &line, 1).unwrap();
        assert!(r.pass && r.max_ratio <= 1.0 + 1e-12);
        let sin = registry::state_drift("sin", 0.0).unwrap();
        assert!(wz_localization_check(&sin, &line, 3).unwrap().pass);
        let sq = registry::state_drift("square", 0.0).unwrap();
        let r = wz_localization_check(&sq, &line, 1).unwrap();
        assert_eq!(r.declared, 2.0);
        assert!(r.pass && r.max_ratio <= 2.0);
        let lying = AcDrift::new("x2", |_, _, x| x * x, true, Lipschitz::Constant(0.5));
        assert!(!wz_localization_check(&lying, &line, 2).unwrap().pass);
        assert!(wz_localization_check(&lin, &line, 6).is_err());
    }

    #[test]
    fn gain_drift_integrand() {
        let (w, x) = grid_paths(5);
        let disp = DispersionSpec::uniform(StateInterval::real_line(1.0), Form::Constant(1.0)).unwrap();
        let map = build_transform(&disp, 1.0).unwrap();
        let g = GainDrift::new(Form::Constant(1.0), StateFree::explicit("t", |t| t), map).unwrap();
        let b = drift_increments(&DriftFunctional::GainModulated(g), &w, &x).unwrap();
        assert!((b.values().last().unwrap() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn drift_starts_at_zero(seed in 0u64..1000, key in 0usize..8) {
            let (w, x) = grid_paths(seed);
            let k = registry::KEYS[key];
            for d in [
                DriftFunctional::AbsolutelyContinuous(registry::state_drift(k, 0.3).unwrap()),
                DriftFunctional::StateFree(registry::noise_integrand(k, 0.3).unwrap()),
            ] {
                prop_assert_eq!(drift_increments(&d, &w, &x).unwrap().values()[0], 0.0);
            }
        }

        #[test]
        fn state_free_ignores_state(seed in 0u64..1000) {
            let (w, x) = grid_paths(seed);
            let y = x.map(|v| v * 3.0 - 2.0).unwrap();
            let d = DriftFunctional::StateFree(registry::noise_integrand("sin", 0.0).unwrap());
            prop_assert_eq!(drift_increments(&d, &w, &x).unwrap(), drift_increments(&d, &w, &y).unwrap());
        }
    }
}

//! INI run configuration.

use std::fmt;
use std::str::FromStr;

use ini::{Ini, Properties};
use pathsolve_core::drift::registry;
use pathsolve_core::pathkit::StateInterval;
use pathsolve_core::transform::{DispersionSpec, Form, Table};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: line {line}, column {col}: {msg}")]
    Parse {
        path: String,
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("[{section}] {key}: missing")]
    Missing { section: String, key: String },
    #[error("[{section}] {key} = {value:?}: {reason}")]
    Invalid {
        section: String,
        key: String,
        value: String,
        reason: String,
    },
    #[error("{0}")]
    Unsupported(String),
}

type Result<T> = std::result::Result<T, ConfigError>;

/// How the drift functional is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum DriftSpec {
    None,
    /// `B(t) = rate * t`
    Time { rate: f64 },
    /// `B(t) = integral f(omega) dt`
    Integrand { key: String, param: f64 },
    /// `B = Theta_0(rate * t)` with `Theta_0` built from the gain.
    Gain { gain: Form, rate: f64 },
    /// `b(t, w, x) = f(x)`
    State { key: String, param: f64 },
}

/// Closed-form law of `X(T)` for the `ks` command.
#[derive(Debug, Clone, PartialEq)]
pub enum CdfSpec {
    Normal { mean: f64, sd: f64 },
    /// `Phi(x / left_sd)` below 0 and `Phi(x / right_sd)` above.
    TwoSided { left_sd: f64, right_sd: f64 },
    LogNormal { log_mean: f64, log_sd: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub dispersion: DispersionSpec,
    pub drift: DriftSpec,
    pub noise_scale: f64,
    pub noise_fv: (String, f64),
    pub horizon: f64,
    pub mesh: f64,
    pub seeds: Vec<u64>,
    pub tol: f64,
    pub n_max: u32,
    pub bandwidth: Option<f64>,
    pub qv_level: Option<u32>,
    pub transform: TransformGrid,
    pub wz_levels: Vec<u32>,
    pub wz_window: u32,
    pub drift_shift: f64,
    pub x0_shift: f64,
    pub ks_n: usize,
    pub ks_seed: u64,
    /// Grid mesh for the KS samples, which only need `X(T)`.
    pub ks_mesh: Option<f64>,
    pub cdf: Option<CdfSpec>,
    pub davie_deltas: Vec<f64>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mesh: Option<f64>,
    pub horizon: Option<f64>,
}

struct Reader<'a> {
    ini: &'a Ini,
}

impl<'a> Reader<'a> {
    fn props(&self, section: &str) -> Option<&'a Properties> {
        self.ini.section(Some(section))
    }

    fn raw(&self, section: &str, key: &str) -> Option<&'a str> {
        self.props(section).and_then(|p| p.get(key)).map(str::trim)
    }

    fn required(&self, section: &str, key: &str) -> Result<&'a str> {
        self.raw(section, key).ok_or_else(|| ConfigError::Missing {
            section: section.into(),
            key: key.into(),
        })
    }

    fn parse<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.raw(section, key)
            .map(|v| v.parse::<T>().map_err(|e| invalid(section, key, v, e)))
            .transpose()
    }

    fn or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        Ok(self.parse(section, key)?.unwrap_or(default))
    }

    fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        self.raw(section, key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<T>().map_err(|e| invalid(section, key, v, e)))
                    .collect()
            })
            .transpose()
    }
}

fn invalid(section: &str, key: &str, value: &str, reason: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        section: section.into(),
        key: key.into(),
        value: value.into(),
        reason: reason.to_string(),
    }
}

fn parse_bound(section: &str, key: &str, v: &str) -> Result<f64> {
    match v {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => v.parse().map_err(|e| invalid(section, key, v, e)),
    }
}

/// `const v`, `linear a b`, `power coef p`, `exp coef rate` or
/// `table x:s x:s ...`.
pub fn parse_form(text: &str) -> std::result::Result<Form, String> {
    let mut it = text.split_whitespace();
    let kind = it.next().ok_or("empty form")?;
    let rest: Vec<&str> = it.collect();
    let nums = |n: usize| -> std::result::Result<Vec<f64>, String> {
        if rest.len() != n {
            return Err(format!("{kind} takes {n} numbers"));
        }
        rest.iter().map(|s| s.parse::<f64>().map_err(|e| e.to_string())).collect()
    };
    Ok(match kind {
        "const" => Form::Constant(nums(1)?[0]),
        "linear" => {
            let v = nums(2)?;
            Form::Linear { a: v[0], b: v[1] }
        }
        "power" => {
            let v = nums(2)?;
            Form::Power { coef: v[0], p: v[1] }
        }
        "exp" => {
            let v = nums(2)?;
            Form::Exponential { coef: v[0], rate: v[1] }
        }
        "table" => {
            let knots = rest
                .iter()
                .map(|k| {
                    let (x, s) = k.split_once(':').ok_or("table knots are x:s")?;
                    Ok((
                        x.parse::<f64>().map_err(|e| e.to_string())?,
                        s.parse::<f64>().map_err(|e| e.to_string())?,
                    ))
                })
                .collect::<std::result::Result<Vec<_>, String>>()?;
            Form::Tabulated(Table::new(&knots)?)
        }
        other => return Err(format!("unknown form {other:?}")),
    })
}

fn dispersion(r: &Reader) -> Result<DispersionSpec> {
    let s = "dispersion";
    let lower = parse_bound(s, "lower", r.raw(s, "lower").unwrap_or("-inf"))?;
    let upper = parse_bound(s, "upper", r.raw(s, "upper").unwrap_or("inf"))?;
    let x0: f64 = r.or(s, "x0", 0.0)?;
    let breakpoints: Vec<f64> = r.list(s, "breakpoints")?.unwrap_or_default();
    let forms_raw = r.required(s, "forms")?;
    let forms = forms_raw
        .split('|')
        .map(|f| parse_form(f.trim()).map_err(|e| invalid(s, "forms", forms_raw, e)))
        .collect::<Result<Vec<_>>>()?;
    let iv = StateInterval::new(lower, upper, x0).map_err(|e| invalid(s, "x0", &x0.to_string(), e))?;
    DispersionSpec::new(iv, breakpoints, forms).map_err(|e| invalid(s, "forms", forms_raw, e))
}

fn registry_key(section: &str, key: &str, value: &str) -> Result<String> {
    if registry::KEYS.contains(&value) {
        Ok(value.to_string())
    } else {
        Err(invalid(section, key, value, format!("unknown key, expected one of {:?}", registry::KEYS)))
    }
}

fn drift(r: &Reader) -> Result<DriftSpec> {
    let s = "drift";
    let kind = r.raw(s, "kind").unwrap_or("none");
    let param: f64 = r.or(s, "param", 0.0)?;
    let rate: f64 = r.or(s, "rate", 1.0)?;
    Ok(match kind {
        "none" => DriftSpec::None,
        "time" => DriftSpec::Time { rate },
        "integrand" => DriftSpec::Integrand {
            key: registry_key(s, "key", r.required(s, "key")?)?,
            param,
        },
        "gain" => {
            let g = r.required(s, "gain")?;
            DriftSpec::Gain {
                gain: parse_form(g).map_err(|e| invalid(s, "gain", g, e))?,
                rate,
            }
        }
        "state" => DriftSpec::State {
            key: registry_key(s, "key", r.required(s, "key")?)?,
            param,
        },
        other => return Err(invalid(s, "kind", other, "expected none, time, integrand, gain or state")),
    })
}

fn cdf(r: &Reader) -> Result<Option<CdfSpec>> {
    let s = "ks";
    let Some(kind) = r.raw(s, "cdf") else {
        return Ok(None);
    };
    let num = |key: &str| -> Result<f64> {
        let v = r.required(s, key)?;
        v.parse().map_err(|e| invalid(s, key, v, e))
    };
    Ok(Some(match kind {
        "normal" => CdfSpec::Normal {
            mean: num("mean")?,
            sd: num("sd")?,
        },
        "two_sided" => CdfSpec::TwoSided {
            left_sd: num("left_sd")?,
            right_sd: num("right_sd")?,
        },
        "lognormal" => CdfSpec::LogNormal {
            log_mean: num("log_mean")?,
            log_sd: num("log_sd")?,
        },
        other => return Err(invalid(s, "cdf", other, "expected normal, two_sided or lognormal")),
    }))
}

fn positive(section: &str, key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(section, key, &v.to_string(), "must be positive and finite"))
    }
}

fn auto<T: FromStr>(r: &Reader, section: &str, key: &str) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    match r.raw(section, key) {
        None | Some("auto") => Ok(None),
        Some(_) => r.parse(section, key),
    }
}

impl RunConfig {
    /// Parses the text of a configuration file; `path` is only used in messages.
    pub fn parse(text: &str, path: &str, ov: Overrides) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Parse {
            path: path.into(),
            line: e.line,
            col: e.col,
            msg: e.msg.to_string(),
        })?;
        let r = Reader { ini: &ini };
        let horizon = positive("grid", "horizon", ov.horizon.map_or_else(|| r.or("grid", "horizon", 1.0), Ok)?)?;
        let mesh = positive("grid", "mesh", ov.mesh.map_or_else(|| r.or("grid", "mesh", 1e-3), Ok)?)?;
        if mesh > horizon {
            return Err(invalid("grid", "mesh", &mesh.to_string(), "exceeds the horizon"));
        }
        let seeds = match ov.seed {
            Some(s) => vec![s],
            None => match r.list::<u64>("seeds", "list")? {
                Some(l) if !l.is_empty() => l,
                Some(_) => return Err(invalid("seeds", "list", "", "empty seed list")),
                None => {
                    let base: u64 = r.or("seeds", "base", 0)?;
                    let count: u64 = r.or("seeds", "count", 1)?;
                    (0..count).map(|i| base + i).collect()
                }
            },
        };
        let tol = positive("solver", "tol", r.or("solver", "tol", 1e-6)?)?;
        let n_max: u32 = r.or("solver", "n_max", 64)?;
        let bandwidth = auto::<f64>(&r, "localtime", "bandwidth")?
            .map(|b| positive("localtime", "bandwidth", b))
            .transpose()?;
        let fv_key = registry_key("noise", "fv", r.raw("noise", "fv").unwrap_or("zero"))?;
        let noise_scale: f64 = r.or("noise", "scale", 1.0)?;
        if !(noise_scale >= 0.0) {
            return Err(invalid("noise", "scale", &noise_scale.to_string(), "must be >= 0"));
        }
        let dispersion = dispersion(&r)?;
        let x0 = dispersion.interval().x0;
        let transform = TransformGrid {
            x_min: r.or("transform", "x_min", x0 - 2.0)?,
            x_max: r.or("transform", "x_max", x0 + 2.0)?,
            w_min: r.or("transform", "w_min", -2.0)?,
            w_max: r.or("transform", "w_max", 2.0)?,
            points: r.or("transform", "points", 101)?,
        };
        if transform.points < 2 {
            return Err(invalid("transform", "points", &transform.points.to_string(), "need at least 2"));
        }
        let ks_n: usize = r.or("ks", "n", 1000)?;
        let ks_seed: u64 = r.or("ks", "seed", *seeds.first().unwrap_or(&0))?;
        Ok(Self {
            name: r.raw("scenario", "name").unwrap_or("run").to_string(),
            drift: drift(&r)?,
            noise_fv: (fv_key, r.or("noise", "fv_param", 0.0)?),
            noise_scale,
            horizon,
            mesh,
            seeds,
            tol,
            n_max,
            bandwidth,
            qv_level: auto(&r, "localtime", "qv_level")?,
            transform,
            wz_levels: r.list("wz", "levels")?.unwrap_or_else(|| (4..=10).collect()),
            wz_window: r.or("wz", "window", 1)?,
            drift_shift: r.or("compare", "drift_shift", -0.5)?,
            x0_shift: r.or("compare", "x0_shift", -0.1)?,
            ks_n,
            ks_seed,
            ks_mesh: r
                .parse("ks", "mesh")?
                .map(|m| positive("ks", "mesh", m))
                .transpose()?,
            cdf: cdf(&r)?,
            davie_deltas: r.list("davie", "deltas")?.unwrap_or_else(|| vec![2f64.powi(-4), 2f64.powi(-10)]),
            dispersion,
        })
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.mesh).round().max(1.0) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SKEW: &str = "[scenario]\nname = skew\n[dispersion]\nbreakpoints = 0\nforms = const 1 | const 2\n";

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::parse(SKEW, "skew.ini", Overrides::default()).unwrap();
        assert_eq!(c.name, "skew");
        assert_eq!(c.drift, DriftSpec::None);
        assert_eq!(c.seeds, vec![0]);
        assert_eq!(c.wz_levels, (4..=10).collect::<Vec<_>>());
        assert_eq!(c.steps(), 1000);
    }

    #[test]
    fn overrides_win() {
        let ov = Overrides {
            seed: Some(9),
            mesh: Some(0.5),
            horizon: Some(2.0),
        };
        let c = RunConfig::parse(SKEW, "skew.ini", ov).unwrap();
        assert_eq!((c.seeds.clone(), c.mesh, c.horizon, c.steps()), (vec![9], 0.5, 2.0, 4));
    }

    #[test]
    fn every_form_parses() {
        for f in ["const 1", "linear 0.5 2", "power 1 2", "exp 1 -1", "table -1:1 0:2 1:1.5"] {
            parse_form(f).unwrap();
        }
        assert!(parse_form("power 1").is_err());
        assert!(parse_form("cubic 1 2").is_err());
    }

    #[test]
    fn errors_name_the_key() {
        let bad = SKEW.to_string() + "[drift]\nkind = state\nkey = nope\n";
        let e = RunConfig::parse(&bad, "x.ini", Overrides::default()).unwrap_err();
        assert!(e.to_string().contains("[drift] key"), "{e}");
        let e = RunConfig::parse("[grid]\nmesh = -1\n", "x.ini", Overrides::default()).unwrap_err();
        assert!(e.to_string().contains("[grid] mesh"), "{e}");
        let e = RunConfig::parse("[grid\nmesh = 1\n", "x.ini", Overrides::default()).unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 3, col: 1, .. }), "{e}");
    }
}

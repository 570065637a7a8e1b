use crate::error::{input, Error, Result};
use crate::pathkit::StateInterval;
use crate::quad;

/// Closed-form or tabulated shape of the dispersion on one piece.
#[derive(Debug, Clone, PartialEq)]
pub enum Form {
    /// `s(x) = v`
    Constant(f64),
    /// `s(x) = a + b x`
    Linear { a: f64, b: f64 },
    /// `s(x) = coef * x^p`, only on pieces inside `(0, inf)`
    Power { coef: f64, p: f64 },
    /// `s(x) = coef * exp(rate * x)`
    Exponential { coef: f64, rate: f64 },
    /// Monotone cubic (PCHIP) through positive knots, constant beyond them.
    Tabulated(Table),
}

/// Knot table with monotone cubic interpolation and precomputed
/// cumulative integrals of `1/s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    xs: Vec<f64>,
    ss: Vec<f64>,
    slopes: Vec<f64>,
    /// `cum[j]` = integral of `1/s` from `xs[0]` to `xs[j]`.
    cum: Vec<f64>,
    /// Dense `(x, G(x))` pairs for bracketing inversions.
    inv_x: Vec<f64>,
    inv_g: Vec<f64>,
}

const INVERSE_KNOTS: usize = 1024;

fn pchip_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let m = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = (0..m - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
    if m == 2 {
        return vec![d[0], d[0]];
    }
    let mut out = vec![0.0; m];
    for k in 1..m - 1 {
        if d[k - 1] * d[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            out[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
        }
    }
    let edge = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s.signum() != d0.signum() || d0 == 0.0 {
            0.0
        } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    out[0] = edge(h[0], h[1], d[0], d[1]);
    out[m - 1] = edge(h[m - 2], h[m - 3], d[m - 2], d[m - 3]);
    out
}

impl Table {
    pub fn new(knots: &[(f64, f64)]) -> std::result::Result<Self, String> {
        if knots.len() < 2 {
            return Err("a table needs at least two knots".into());
        }
        let xs: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let ss: Vec<f64> = knots.iter().map(|k| k.1).collect();
        if xs.iter().any(|x| !x.is_finite()) || xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err("knot abscissae must be finite and strictly increasing".into());
        }
        if ss.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err("knot values must be positive and finite".into());
        }
        let slopes = pchip_slopes(&xs, &ss);
        let mut t = Table {
            xs,
            ss,
            slopes,
            cum: vec![0.0],
            inv_x: Vec::new(),
            inv_g: Vec::new(),
        };
        for j in 0..t.xs.len() - 1 {
            let (a, b) = (t.xs[j], t.xs[j + 1]);
            let rough = quad::gl16(a, b, |x| 1.0 / t.value(x));
            let seg = quad::adaptive(a, b, 1e-15 * rough.abs().max(1e-300), &|x| 1.0 / t.value(x))
                .ok_or_else(|| format!("quadrature of 1/s did not converge on [{a}, {b}]"))?;
            let last = *t.cum.last().unwrap();
            t.cum.push(last + seg);
        }
        let (lo, hi) = (t.xs[0], *t.xs.last().unwrap());
        let mut grid: Vec<f64> = (0..=INVERSE_KNOTS)
            .map(|i| lo + (hi - lo) * i as f64 / INVERSE_KNOTS as f64)
            .chain(t.xs.iter().copied())
            .collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        t.inv_g = grid.iter().map(|&x| t.primitive(x)).collect();
        t.inv_x = grid;
        Ok(t)
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ss.iter().copied())
    }

    fn segment(&self, x: f64) -> usize {
        self.xs.partition_point(|&k| k <= x).clamp(1, self.xs.len() - 1) - 1
    }

    pub fn value(&self, x: f64) -> f64 {
        let m = self.xs.len();
        if x <= self.xs[0] {
            return self.ss[0];
        }
        if x >= self.xs[m - 1] {
            return self.ss[m - 1];
        }
        let j = self.segment(x);
        let h = self.xs[j + 1] - self.xs[j];
        let t = (x - self.xs[j]) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.ss[j]
            + (t3 - 2.0 * t2 + t) * h * self.slopes[j]
            + (-2.0 * t3 + 3.0 * t2) * self.ss[j + 1]
            + (t3 - t2) * h * self.slopes[j + 1]
    }

    fn derivative(&self, x: f64) -> f64 {
        let m = self.xs.len();
        if x <= self.xs[0] || x >= self.xs[m - 1] {
            return 0.0;
        }
        let j = self.segment(x);
        let h = self.xs[j + 1] - self.xs[j];
        let t = (x - self.xs[j]) / h;
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * self.ss[j]
            + (3.0 * t2 - 4.0 * t + 1.0) * h * self.slopes[j]
            + (-6.0 * t2 + 6.0 * t) * self.ss[j + 1]
            + (3.0 * t2 - 2.0 * t) * h * self.slopes[j + 1])
            / h
    }

    /// Integral of `1/s` from the first knot to `x`.
    fn primitive(&self, x: f64) -> f64 {
        let m = self.xs.len();
        if x <= self.xs[0] {
            return (x - self.xs[0]) / self.ss[0];
        }
        if x >= self.xs[m - 1] {
            return self.cum[m - 1] + (x - self.xs[m - 1]) / self.ss[m - 1];
        }
        let j = self.segment(x);
        self.cum[j] + quad::gl16(self.xs[j], x, |z| 1.0 / self.value(z))
    }

    fn inverse_primitive(&self, g: f64) -> f64 {
        let m = self.xs.len();
        if g <= 0.0 {
            return self.xs[0] + g * self.ss[0];
        }
        if g >= self.cum[m - 1] {
            return self.xs[m - 1] + (g - self.cum[m - 1]) * self.ss[m - 1];
        }
        let j = self.inv_g.partition_point(|&v| v <= g).clamp(1, self.inv_g.len() - 1);
        let (mut lo, mut hi) = (self.inv_x[j - 1], self.inv_x[j]);
        let (g_lo, g_hi) = (self.inv_g[j - 1], self.inv_g[j]);
        let mut x = lo + (hi - lo) * (g - g_lo) / (g_hi - g_lo);
        for _ in 0..100 {
            let r = self.primitive(x) - g;
            if r.abs() <= 1e-15 * (1.0 + g.abs()) {
                break;
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let newton = x - r * self.value(x);
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) {
                x = next;
                break;
            }
            x = next;
        }
        x
    }
}

impl Form {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Form::Constant(v) => *v,
            Form::Linear { a, b } => {
                if *b == 0.0 {
                    *a
                } else {
                    a + b * x
                }
            }
            Form::Power { coef, p } => coef * x.powf(*p),
            Form::Exponential { coef, rate } => {
                if *rate == 0.0 {
                    *coef
                } else {
                    coef * (rate * x).exp()
                }
            }
            Form::Tabulated(t) => t.value(x),
        }
    }

    /// Derivative of `log s`.
    pub fn log_slope(&self, x: f64) -> f64 {
        match self {
            Form::Constant(_) => 0.0,
            Form::Linear { a, b } => b / (a + b * x),
            Form::Power { p, .. } => p / x,
            Form::Exponential { rate, .. } => *rate,
            Form::Tabulated(t) => t.derivative(x) / t.value(x),
        }
    }

    /// Integral of `1/s` from `u` to `x`; `x` may be an endpoint of the
    /// piece, in which case the limit is returned (possibly infinite).
    pub fn delta(&self, u: f64, x: f64) -> f64 {
        if u == x {
            return 0.0;
        }
        match self {
            Form::Constant(v) => (x - u) / v,
            Form::Linear { a, b } => {
                if *b == 0.0 {
                    return (x - u) / a;
                }
                let base = a + b * u;
                if x.is_infinite() {
                    return x;
                }
                let arg = b * (x - u) / base;
                if arg <= -1.0 {
                    return -f64::INFINITY * b.signum();
                }
                arg.ln_1p() / b
            }
            Form::Power { coef, p } => {
                if *p == 1.0 {
                    (x / u).ln() / coef
                } else {
                    let q = 1.0 - p;
                    (x.powf(q) - u.powf(q)) / (coef * q)
                }
            }
            Form::Exponential { coef, rate } => {
                if *rate == 0.0 {
                    return (x - u) / coef;
                }
                let lam = *rate;
                (-lam * u).exp() * -(-lam * (x - u)).exp_m1() / (coef * lam)
            }
            Form::Tabulated(t) => t.primitive(x) - t.primitive(u),
        }
    }

    /// Solves `delta(u, x) = y` for `x`.
    pub fn inverse_delta(&self, u: f64, y: f64) -> f64 {
        if y == 0.0 {
            return u;
        }
        match self {
            Form::Constant(v) => u + v * y,
            Form::Linear { a, b } => {
                if *b == 0.0 {
                    u + a * y
                } else {
                    u + (a + b * u) * (b * y).exp_m1() / b
                }
            }
            Form::Power { coef, p } => {
                if *p == 1.0 {
                    u * (coef * y).exp()
                } else {
                    let q = 1.0 - p;
                    (u.powf(q) + coef * q * y).powf(1.0 / q)
                }
            }
            Form::Exponential { coef, rate } => {
                if *rate == 0.0 {
                    return u + coef * y;
                }
                let lam = *rate;
                u - (-coef * lam * y * (lam * u).exp()).ln_1p() / lam
            }
            Form::Tabulated(t) => t.inverse_primitive(t.primitive(u) + y),
        }
    }

    fn check(&self, lo: f64, hi: f64, interval: &StateInterval) -> std::result::Result<(), String> {
        let finite_pos = |v: f64| v > 0.0 && v.is_finite();
        let end_ok = |x: f64, at_boundary: bool| {
            let v = self.value(x);
            if at_boundary {
                v >= 0.0
            } else {
                finite_pos(v)
            }
        };
        match self {
            Form::Constant(v) if !finite_pos(*v) => return Err(format!("constant {v} is not positive")),
            Form::Linear { a, b } => {
                if !a.is_finite() || !b.is_finite() {
                    return Err("linear coefficients must be finite".into());
                }
                if *b == 0.0 && !finite_pos(*a) {
                    return Err(format!("constant {a} is not positive"));
                }
                if (*b > 0.0 && lo == f64::NEG_INFINITY) || (*b < 0.0 && hi == f64::INFINITY) {
                    return Err("linear dispersion turns negative on the piece".into());
                }
            }
            Form::Power { coef, p } => {
                if !finite_pos(*coef) || !p.is_finite() {
                    return Err("power needs a positive coefficient and finite exponent".into());
                }
                if lo < 0.0 {
                    return Err("power form requires the piece to lie in (0, inf)".into());
                }
            }
            Form::Exponential { coef, rate } => {
                if !finite_pos(*coef) || !rate.is_finite() {
                    return Err("exponential needs a positive coefficient and finite rate".into());
                }
            }
            _ => {}
        }
        if lo.is_finite() && !end_ok(lo, lo == interval.ell) {
            return Err(format!("dispersion not positive at {lo}"));
        }
        if hi.is_finite() && !end_ok(hi, hi == interval.r) {
            return Err(format!("dispersion not positive at {hi}"));
        }
        if let Form::Power { .. } = self {
            if lo == 0.0 && interval.ell != 0.0 {
                return Err("power form cannot cross 0 inside the state interval".into());
            }
        }
        Ok(())
    }
}

/// One piece `(lo, hi]` of a dispersion.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub form: Form,
}

/// Piecewise description of a strictly positive dispersion on the state
/// interval. A breakpoint belongs to the piece on its left.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionSpec {
    interval: StateInterval,
    breakpoints: Vec<f64>,
    pieces: Vec<Piece>,
}

impl DispersionSpec {
    pub fn new(interval: StateInterval, breakpoints: Vec<f64>, forms: Vec<Form>) -> Result<Self> {
        if forms.len() != breakpoints.len() + 1 {
            return input(format!(
                "{} breakpoints need {} forms, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                forms.len()
            ));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return input("breakpoints must be strictly increasing");
        }
        if let Some(b) = breakpoints.iter().find(|&&b| !interval.contains(b)) {
            return input(format!("breakpoint {b} outside the state interval"));
        }
        let mut pieces = Vec::with_capacity(forms.len());
        for (k, form) in forms.into_iter().enumerate() {
            let lo = if k == 0 { interval.ell } else { breakpoints[k - 1] };
            let hi = breakpoints.get(k).copied().unwrap_or(interval.r);
            form.check(lo, hi, &interval)
                .map_err(|reason| Error::Construction { piece: k, reason })?;
            pieces.push(Piece { lo, hi, form });
        }
        Ok(Self {
            interval,
            breakpoints,
            pieces,
        })
    }

    /// Single-form dispersion on the whole interval.
    pub fn uniform(interval: StateInterval, form: Form) -> Result<Self> {
        Self::new(interval, Vec::new(), vec![form])
    }

    /// `rho` on `(-inf, 0]`, `sigma` on `(0, inf)`, started at `x0`.
    pub fn two_sided(rho: f64, sigma: f64, x0: f64) -> Result<Self> {
        Self::new(
            StateInterval::real_line(x0),
            vec![0.0],
            vec![Form::Constant(rho), Form::Constant(sigma)],
        )
    }

    pub fn interval(&self) -> &StateInterval {
        &self.interval
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub(crate) fn piece_left(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|&b| b < x)
    }

    /// Left-continuous value `s(x)`.
    pub fn value(&self, x: f64) -> f64 {
        self.pieces[self.piece_left(x)].form.value(x)
    }

    /// Right limit `s(x+)`.
    pub fn value_right(&self, x: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= x);
        self.pieces[k].form.value(x)
    }

    /// Derivative of `log s` away from breakpoints.
    pub fn log_slope(&self, x: f64) -> f64 {
        self.pieces[self.piece_left(x)].form.log_slope(x)
    }

    /// Breakpoints where `s` jumps, as `(xi, s(xi), s(xi+))`.
    pub fn jumps(&self) -> Vec<(f64, f64, f64)> {
        self.breakpoints
            .iter()
            .enumerate()
            .map(|(k, &b)| (b, self.pieces[k].form.value(b), self.pieces[k + 1].form.value(b)))
            .filter(|(_, l, r)| l != r)
            .collect()
    }

    /// True when some piece varies continuously, so `ds` has a density part.
    pub fn has_continuous_part(&self) -> bool {
        self.pieces.iter().any(|p| match &p.form {
            Form::Constant(_) => false,
            Form::Linear { b, .. } => *b != 0.0,
            Form::Exponential { rate, .. } => *rate != 0.0,
            Form::Power { p, .. } => *p != 0.0,
            Form::Tabulated(_) => true,
        })
    }

    /// Supremum of `s` over `(lo, hi)`, including one-sided limits.
    pub fn sup_on(&self, lo: f64, hi: f64) -> f64 {
        self.extreme_on(lo, hi, f64::max, f64::NEG_INFINITY)
    }

    /// Infimum of `s` over `(lo, hi)`, including one-sided limits.
    pub fn inf_on(&self, lo: f64, hi: f64) -> f64 {
        self.extreme_on(lo, hi, f64::min, f64::INFINITY)
    }

    fn extreme_on(&self, lo: f64, hi: f64, pick: fn(f64, f64) -> f64, init: f64) -> f64 {
        let mut acc = init;
        for p in &self.pieces {
            let (a, b) = (lo.max(p.lo), hi.min(p.hi));
            if !(a < b) {
                continue;
            }
            acc = pick(acc, p.form.value(a));
            acc = pick(acc, p.form.value(b));
            if let Form::Tabulated(t) = &p.form {
                for (x, s) in t.knots() {
                    if a < x && x < b {
                        acc = pick(acc, s);
                    }
                }
            }
        }
        acc
    }

    /// True when the classification of an infinite endpoint rests on
    /// constant extrapolation of a table.
    pub fn heuristic_tail(&self) -> bool {
        let first = self.pieces.first().unwrap();
        let last = self.pieces.last().unwrap();
        (first.lo.is_infinite() && matches!(first.form, Form::Tabulated(_)))
            || (last.hi.is_infinite() && matches!(last.form, Form::Tabulated(_)))
    }
}

//! Scale maps of a dispersion.
//!
//! For a dispersion `s` on `(ell, r)` the map `H_c(x)` is the integral of
//! `1/s` from `c` to `x` and `Theta_c` is its inverse. Both are evaluated
//! from one global primitive of `1/s`, so moving the anchor `c` costs a
//! single evaluation.

mod dispersion;

use std::sync::Arc;

pub use dispersion::{DispersionSpec, Form, Piece, Table};

use crate::error::{Error, Result};
use crate::quad;

#[derive(Debug)]
struct Primitive {
    spec: DispersionSpec,
    /// Per piece: a point of the piece and the primitive there.
    anchors: Vec<(f64, f64)>,
    /// Primitive at each breakpoint.
    at_breaks: Vec<f64>,
    lower: f64,
    upper: f64,
}

impl Primitive {
    fn new(spec: DispersionSpec) -> Result<Self> {
        let x0 = spec.interval().x0;
        let pieces = spec.pieces();
        let k0 = spec.piece_left(x0);
        let mut anchors = vec![(0.0, 0.0); pieces.len()];
        anchors[k0] = (x0, 0.0);
        for k in k0 + 1..pieces.len() {
            let (a, fa) = anchors[k - 1];
            let b = pieces[k].lo;
            anchors[k] = (b, fa + pieces[k - 1].form.delta(a, b));
        }
        for k in (0..k0).rev() {
            let (a, fa) = anchors[k + 1];
            let b = pieces[k].hi;
            anchors[k] = (b, fa + pieces[k + 1].form.delta(a, b));
        }
        let mut at_breaks = Vec::with_capacity(pieces.len() - 1);
        for (k, p) in pieces.iter().enumerate().take(pieces.len() - 1) {
            let (a, fa) = anchors[k];
            at_breaks.push(fa + p.form.delta(a, p.hi));
        }
        let first = &pieces[0];
        let last = pieces.last().unwrap();
        let lower = anchors[0].1 + first.form.delta(anchors[0].0, first.lo);
        let (al, fl) = anchors[pieces.len() - 1];
        let upper = fl + last.form.delta(al, last.hi);
        for (k, v) in at_breaks.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Construction {
                    piece: k,
                    reason: "integral of 1/s diverges inside the state interval".into(),
                });
            }
        }
        if lower.is_nan() || upper.is_nan() {
            return Err(Error::Construction {
                piece: 0,
                reason: "endpoint limit of the primitive is undefined".into(),
            });
        }
        Ok(Self {
            spec,
            anchors,
            at_breaks,
            lower,
            upper,
        })
    }

    fn eval(&self, x: f64) -> f64 {
        let k = self.spec.piece_left(x);
        let (a, fa) = self.anchors[k];
        fa + self.spec.pieces()[k].form.delta(a, x)
    }

    fn invert(&self, g: f64) -> f64 {
        let k = self.at_breaks.partition_point(|&f| f < g);
        let piece = &self.spec.pieces()[k];
        let (a, fa) = self.anchors[k];
        piece.form.inverse_delta(a, g - fa).clamp(piece.lo, piece.hi)
    }
}

/// `H_c` and `Theta_c` for one anchor `c`.
#[derive(Debug, Clone)]
pub struct SpaceTransform {
    prim: Arc<Primitive>,
    anchor: f64,
    offset: f64,
}

impl SpaceTransform {
    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn dispersion(&self) -> &DispersionSpec {
        &self.prim.spec
    }

    /// `H_c(x)`: integral of `1/s` from the anchor to `x`.
    pub fn h(&self, x: f64) -> Result<f64> {
        let iv = self.prim.spec.interval();
        if !iv.contains(x) {
            return Err(Error::Domain {
                what: "x",
                value: x,
                lo: iv.ell,
                hi: iv.r,
            });
        }
        Ok(self.prim.eval(x) - self.offset)
    }

    /// `Theta_c(w)`, the inverse of `H_c`.
    pub fn theta(&self, w: f64) -> Result<f64> {
        let g = w + self.offset;
        if !(self.prim.lower < g && g < self.prim.upper) {
            return Err(Error::Domain {
                what: "w",
                value: w,
                lo: self.ell_tilde(),
                hi: self.r_tilde(),
            });
        }
        Ok(self.prim.invert(g))
    }

    /// Whether `w` lies in the domain of `Theta_c`.
    pub fn in_domain(&self, w: f64) -> bool {
        let g = w + self.offset;
        self.prim.lower < g && g < self.prim.upper
    }

    /// Lower end of the domain of `Theta_c`, `H_c(ell+)`.
    pub fn ell_tilde(&self) -> f64 {
        self.prim.lower - self.offset
    }

    /// Upper end of the domain of `Theta_c`, `H_c(r-)`.
    pub fn r_tilde(&self) -> f64 {
        self.prim.upper - self.offset
    }

    /// Images `(H_c(ell_n), H_c(r_n))` of the `n`-th localizer.
    pub fn localized_endpoints(&self, n: u32) -> (f64, f64) {
        let (lo, hi) = self.prim.spec.interval().level(n);
        (self.prim.eval(lo) - self.offset, self.prim.eval(hi) - self.offset)
    }

    /// Same dispersion, new anchor.
    pub fn reanchor(&self, c: f64) -> Result<Self> {
        let iv = self.prim.spec.interval();
        if !iv.contains(c) {
            return Err(Error::Domain {
                what: "anchor",
                value: c,
                lo: iv.ell,
                hi: iv.r,
            });
        }
        Ok(Self {
            prim: Arc::clone(&self.prim),
            anchor: c,
            offset: self.prim.eval(c),
        })
    }

    /// Whether both transforms come from the same dispersion.
    pub fn same_dispersion(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.prim, &other.prim) || self.prim.spec == other.prim.spec
    }

    /// `(H(ell+) = -inf, H(r-) = +inf)`.
    pub fn barrow_osgood(&self) -> (bool, bool) {
        (self.prim.lower == f64::NEG_INFINITY, self.prim.upper == f64::INFINITY)
    }

    /// True when an endpoint classification relies on table extrapolation.
    pub fn heuristic_classification(&self) -> bool {
        self.prim.spec.heuristic_tail()
    }
}

/// Builds `H_c` and `Theta_c` for the dispersion.
pub fn build_transform(disp: &DispersionSpec, c: f64) -> Result<SpaceTransform> {
    let prim = Arc::new(Primitive::new(disp.clone())?);
    let t = SpaceTransform {
        prim,
        anchor: disp.interval().x0,
        offset: 0.0,
    };
    if c == t.anchor {
        Ok(t)
    } else {
        t.reanchor(c)
    }
}

/// `(H(ell+) = -inf, H(r-) = +inf)`; when both hold, `Theta` is defined on
/// the whole line and no domain exit can happen.
pub fn check_barrow_osgood(t: &SpaceTransform) -> (bool, bool) {
    t.barrow_osgood()
}

fn integral_of_s_theta(t: &SpaceTransform, from: f64, to: f64, cuts: &[f64]) -> Result<f64> {
    let (lo, hi, sign) = if from <= to { (from, to, 1.0) } else { (to, from, -1.0) };
    let mut nodes = vec![lo];
    nodes.extend(cuts.iter().copied().filter(|&c| lo < c && c < hi));
    nodes.push(hi);
    let disp = t.dispersion();
    let mut total = 0.0;
    for w in nodes.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = t.theta(0.5 * (a + b))?;
        let piece = &disp.pieces()[disp.piece_left(mid)];
        let part = if let Form::Constant(v) = piece.form {
            v * (b - a)
        } else {
            let f = |z: f64| t.theta(z).map(|x| disp.value(x)).unwrap_or(f64::NAN);
            let rough = quad::gl16(a, b, f).abs();
            quad::adaptive(a, b, 1e-15 * rough.max(1e-300), &f)
                .ok_or_else(|| Error::Diagnostic(format!("quadrature failed on [{a}, {b}]")))?
        };
        total += part;
    }
    Ok(sign * total)
}

/// Largest `|Theta(w) - c - integral_0^w s(Theta(z)) dz|` over the grid,
/// with panels split at the preimages of the breakpoints.
pub fn theta_residual(t: &SpaceTransform, w_grid: &[f64]) -> Result<f64> {
    let cuts: Vec<f64> = t
        .dispersion()
        .breakpoints()
        .iter()
        .map(|&b| t.h(b))
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for &w in w_grid {
        let integral = integral_of_s_theta(t, 0.0, w, &cuts)?;
        worst = worst.max((t.theta(w)? - t.anchor() - integral).abs());
    }
    Ok(worst)
}

/// Outcome of a composition-property sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositionReport {
    /// Largest `|lhs - rhs| / (1 + |rhs|)`.
    pub max_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// Compares `Theta_{Theta_c(gamma)}(w)` with `Theta_c(gamma + w)` on
/// `(c, gamma, w)` samples; samples outside the domain are skipped.
pub fn composition_check(t: &SpaceTransform, samples: &[(f64, f64, f64)]) -> CompositionReport {
    let mut report = CompositionReport {
        max_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    for &(c, gamma, w) in samples {
        let run = || -> Result<f64> {
            let tc = t.reanchor(c)?;
            let rhs = tc.theta(gamma + w)?;
            let lhs = tc.reanchor(tc.theta(gamma)?)?.theta(w)?;
            Ok((lhs - rhs).abs() / (1.0 + rhs.abs()))
        };
        match run() {
            Ok(e) => {
                report.checked += 1;
                report.max_error = report.max_error.max(e);
            }
            Err(_) => report.skipped += 1,
        }
    }
    report
}

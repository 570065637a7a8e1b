//! Fixtures shared by the benchmarks.

use pathsolve_core::drift::{registry, AcDrift};
use pathsolve_core::pathkit::{gen_brownian, uniform_grid, SampledPath, StateInterval};
use pathsolve_core::transform::{build_transform, DispersionSpec, Form, SpaceTransform, Table};

/// `1` below zero, `2` above.
pub fn skew() -> SpaceTransform {
    build_transform(&DispersionSpec::two_sided(1.0, 2.0, 0.0).expect("valid"), 0.0).expect("valid")
}

/// Tabulated dispersion, the slowest transform to invert.
pub fn tabulated() -> SpaceTransform {
    let table = Table::new(&[(-2.0, 0.5), (-0.5, 1.5), (0.5, 1.0), (2.0, 3.0)]).expect("valid");
    let disp = DispersionSpec::uniform(StateInterval::real_line(0.0), Form::Tabulated(table)).expect("valid");
    build_transform(&disp, 0.0).expect("valid")
}

pub fn identity(x0: f64) -> SpaceTransform {
    let disp = DispersionSpec::uniform(StateInterval::real_line(x0), Form::Constant(1.0)).expect("valid");
    build_transform(&disp, x0).expect("valid")
}

/// Brownian path with `steps` increments on `[0, 1]`.
pub fn brownian(steps: usize, seed: u64) -> SampledPath {
    gen_brownian(&uniform_grid(1.0, steps).expect("valid"), seed).expect("valid")
}

/// `b(x) = -x`
pub fn mean_reverting() -> AcDrift {
    registry::state_drift("neg_x", 0.0).expect("registered")
}

/// `b(x) = sign(x)`
pub fn sign() -> AcDrift {
    registry::state_drift("sign", 0.0).expect("registered")
}

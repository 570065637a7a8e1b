use rand_distr::{Distribution, StandardNormal};

use super::rng::CounterRng;
use super::{validate_grid, SampledPath};
use crate::error::{input, Result};

/// `steps + 1` equally spaced times on `[0, horizon]`.
pub fn uniform_grid(horizon: f64, steps: usize) -> Result<Vec<f64>> {
    if !(horizon > 0.0) || !horizon.is_finite() || steps == 0 {
        return input(format!("bad grid: horizon {horizon}, steps {steps}"));
    }
    let h = horizon / steps as f64;
    let mut t: Vec<f64> = (0..=steps).map(|i| i as f64 * h).collect();
    t[steps] = horizon;
    Ok(t)
}

/// Grid with mesh `2^-level` on `[0, horizon]`; the horizon is appended if
/// it is not itself a multiple of the mesh.
pub fn dyadic_grid(horizon: f64, level: u32) -> Result<Vec<f64>> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return input(format!("bad horizon {horizon}"));
    }
    let h = (-(level as f64)).exp2();
    let full = (horizon / h).floor() as usize;
    let mut t: Vec<f64> = (0..=full).map(|i| i as f64 * h).collect();
    if *t.last().unwrap() < horizon {
        t.push(horizon);
    }
    Ok(t)
}

/// Standard Brownian motion sampled on `grid`.
pub fn gen_brownian(grid: &[f64], seed: u64) -> Result<SampledPath> {
    validate_grid(grid)?;
    let mut rng = CounterRng::new(seed);
    let mut values = Vec::with_capacity(grid.len());
    let mut w = 0.0;
    values.push(w);
    for pair in grid.windows(2) {
        let z: f64 = StandardNormal.sample(&mut rng);
        w += (pair[1] - pair[0]).sqrt() * z;
        values.push(w);
    }
    SampledPath::new(grid.to_vec(), values)
}

/// `scale * B + fv_part` where `B` is the Brownian path for `seed`.
pub fn gen_semimartingale(
    grid: &[f64],
    seed: u64,
    fv_part: impl Fn(f64) -> f64,
    scale: f64,
) -> Result<SampledPath> {
    if !(scale >= 0.0) || !scale.is_finite() {
        return input(format!("scale must be finite and >= 0, got {scale}"));
    }
    let b = gen_brownian(grid, seed)?;
    let values = grid
        .iter()
        .zip(b.values())
        .map(|(&t, &w)| scale * w + fv_part(t))
        .collect();
    SampledPath::new(grid.to_vec(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_grid() {
        let p = gen_brownian(&[0.0], 5).unwrap();
        assert_eq!(p.values(), &[0.0]);
        assert!(gen_brownian(&[], 5).is_err());
    }

    #[test]
    fn increment_variance() {
        let grid = uniform_grid(1.0, 1000).unwrap();
        let p = gen_brownian(&grid, 42).unwrap();
        let h = 1e-3;
        let inc: Vec<f64> = p.values().windows(2).map(|w| w[1] - w[0]).collect();
        let mean = inc.iter().sum::<f64>() / inc.len() as f64;
        let var = inc.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (inc.len() - 1) as f64;
        assert!(var >= 0.9 * h && var <= 1.1 * h, "var = {var}");
    }

    #[test]
    fn determinism() {
        let grid = uniform_grid(2.0, 500).unwrap();
        let a = gen_brownian(&grid, 9).unwrap();
        let b = gen_brownian(&grid, 9).unwrap();
        assert_eq!(a, b);
        let c = gen_brownian(&grid, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn semimartingale_reductions() {
        let grid = uniform_grid(1.0, 64).unwrap();
        let fv = gen_semimartingale(&grid, 3, |t| t, 0.0).unwrap();
        assert_eq!(fv.values(), grid.as_slice());
        let bm = gen_semimartingale(&grid, 3, |_| 0.0, 1.0).unwrap();
        assert_eq!(bm, gen_brownian(&grid, 3).unwrap());
    }

    #[test]
    fn dyadic_grid_is_exact() {
        let g = dyadic_grid(1.0, 10).unwrap();
        assert_eq!(g.len(), 1025);
        assert_eq!(g[512], 0.5);
        let g = dyadic_grid(1.3, 2).unwrap();
        assert_eq!(*g.last().unwrap(), 1.3);
    }
}

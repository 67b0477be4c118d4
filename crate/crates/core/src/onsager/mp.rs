use serde::{Deserialize, Serialize};

use super::flux::FluxField;
use crate::error::{Error, Result};
use crate::spectral::{trapezoid_weights, Grid, SpectralField};

/// Relative distance to the ball boundary below which the constraint counts
/// as active.
pub const ACTIVITY_TOLERANCE: f64 = 1e-10;

/// Minimizer of `𝒦(v) = ∫ ½‖∇v‖² − ⟨J, ∇v⟩ dt` over the enstrophy ball.
#[derive(Clone, Debug)]
pub struct MinimizerSolution {
    pub delta: f64,
    pub times: Vec<f64>,
    pub v_star: Vec<SpectralField>,
    pub lambda: f64,
    pub one_minus_two_lambda: f64,
    /// `∫ ‖∇v*‖² dt`
    pub enstrophy_used: f64,
    pub radius_sq: f64,
    pub k_value: f64,
    pub constraint_active: bool,
}

/// Scalar part of a solution, as stored next to the fields.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub delta: f64,
    pub lambda: f64,
    pub one_minus_two_lambda: f64,
    pub enstrophy_used: f64,
    pub radius_sq: f64,
    pub k_value: f64,
    pub constraint_active: bool,
}

impl MinimizerSolution {
    pub fn record(&self) -> SolutionRecord {
        SolutionRecord {
            delta: self.delta,
            lambda: self.lambda,
            one_minus_two_lambda: self.one_minus_two_lambda,
            enstrophy_used: self.enstrophy_used,
            radius_sq: self.radius_sq,
            k_value: self.k_value,
            constraint_active: self.constraint_active,
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        trapezoid_weights(&self.times)
    }
}

pub fn k_functional(grid: &Grid, times: &[f64], v: &[SpectralField], j: &FluxField) -> Result<f64> {
    if times.len() != v.len() || times != j.times.as_slice() {
        return Err(Error::TimeMismatch(format!(
            "{} fields at {} stamps against a flux with {} stamps",
            v.len(),
            times.len(),
            j.times.len()
        )));
    }
    let weights = trapezoid_weights(times);
    let mut total = 0.0;
    for ((w, vt), jt) in weights.iter().zip(v).zip(&j.fields) {
        let gv = grid.gradient(vt);
        total += w * (0.5 * grid.norm_sq(&gv) - grid.inner(jt, &gv));
    }
    Ok(total)
}

/// Zero-mean divergence-free `w` with `Δw = P(∇·J)`.
pub fn poisson_potential(grid: &Grid, j: &SpectralField) -> SpectralField {
    grid.inverse_laplacian(&grid.leray_project(&grid.divergence(j)))
}

pub fn solve_mp(grid: &Grid, j: &FluxField, radius_sq: f64) -> Result<MinimizerSolution> {
    if !(radius_sq.is_finite() && radius_sq > 0.0) {
        return Err(Error::InvalidRadius(radius_sq));
    }
    let weights = j.weights();
    let mut v: Vec<SpectralField> = j.fields.iter().map(|f| poisson_potential(grid, f)).collect();
    let unconstrained: f64 = weights
        .iter()
        .zip(&v)
        .map(|(w, f)| w * grid.gradient_norm_sq(f))
        .sum();
    let (lambda, one_minus_two_lambda, constraint_active) = if unconstrained <= radius_sq {
        let active = radius_sq - unconstrained <= ACTIVITY_TOLERANCE * radius_sq;
        (0.0, 1.0, active)
    } else {
        let s = (unconstrained / radius_sq).sqrt();
        for f in &mut v {
            f.scale(1.0 / s);
        }
        ((1.0 - s) / 2.0, s, true)
    };
    let enstrophy_used = weights
        .iter()
        .zip(&v)
        .map(|(w, f)| w * grid.gradient_norm_sq(f))
        .sum();
    let k_value = k_functional(grid, &j.times, &v, j)?;
    Ok(MinimizerSolution {
        delta: j.delta,
        times: j.times.clone(),
        v_star: v,
        lambda,
        one_minus_two_lambda,
        enstrophy_used,
        radius_sq,
        k_value,
        constraint_active,
    })
}

/// `∫‖∇(a − b)‖² dt / ∫‖∇b‖² dt`, absolute when `b` vanishes.
pub fn solution_gap(grid: &Grid, a: &MinimizerSolution, b: &MinimizerSolution) -> Result<f64> {
    if a.times != b.times || a.v_star.len() != b.v_star.len() {
        return Err(Error::TimeMismatch("solutions live on different time grids".into()));
    }
    let num: f64 = b
        .weights()
        .iter()
        .zip(a.v_star.iter().zip(&b.v_star))
        .map(|(w, (x, y))| w * grid.gradient_norm_sq(&x.sub(y)))
        .sum();
    Ok(if b.enstrophy_used > 0.0 {
        num / b.enstrophy_used
    } else {
        num
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TIMES: [f64; 4] = [0.0, 0.1, 0.25, 0.4];

    fn divfree(g: &Grid, rng: &mut ChaCha8Rng) -> SpectralField {
        g.leray_project(&g.random_band_limited(3, 12.0, rng))
    }

    fn series(g: &Grid, seed: u64) -> Vec<SpectralField> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TIMES.iter().map(|_| divfree(g, &mut rng)).collect()
    }

    fn manufactured(g: &Grid, seed: u64, amp: f64) -> FluxField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fields = TIMES
            .iter()
            .map(|_| g.random_band_limited(9, 12.0, &mut rng).scaled(amp))
            .collect();
        FluxField::new(0.5, 1.0, TIMES.to_vec(), fields).unwrap()
    }

    fn enstrophy(g: &Grid, v: &[SpectralField]) -> f64 {
        trapezoid_weights(&TIMES)
            .iter()
            .zip(v)
            .map(|(w, f)| w * g.gradient_norm_sq(f))
            .sum()
    }

    #[test]
    fn zero_flux_has_interior_zero_minimizer() {
        let g = Grid::new(16).unwrap();
        let j = FluxField::new(0.5, 1.0, TIMES.to_vec(), vec![SpectralField::zeros(16, 9); 4]).unwrap();
        let s = solve_mp(&g, &j, 1.0).unwrap();
        assert_eq!(s.lambda, 0.0);
        assert_eq!(s.k_value, 0.0);
        assert!(!s.constraint_active);
        assert!(s.v_star.iter().all(|v| v.max_abs() == 0.0));
        assert_eq!(k_functional(&g, &TIMES, &s.v_star, &j).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_radius_and_times() {
        let g = Grid::new(16).unwrap();
        let j = manufactured(&g, 1, 1.0);
        assert!(matches!(solve_mp(&g, &j, 0.0), Err(Error::InvalidRadius(_))));
        let v = series(&g, 2);
        assert!(k_functional(&g, &[0.0, 0.1, 0.2, 0.3], &v, &j).is_err());
    }

    #[test]
    fn manufactured_gradient_flux_is_recovered() {
        let g = Grid::new(16).unwrap();
        let nu = 1e-3;
        let phi0 = series(&g, 3);
        let fields = phi0.iter().map(|p| g.gradient(p).scaled(nu)).collect();
        let j = FluxField::new(0.5, nu, TIMES.to_vec(), fields).unwrap();
        let s = solve_mp(&g, &j, 1.0).unwrap();
        assert!(!s.constraint_active);
        for (v, p) in s.v_star.iter().zip(&phi0) {
            assert!(v.sub(&p.scaled(nu)).max_abs() <= 1e-14 * nu * p.max_abs());
        }
    }

    #[test]
    fn active_case_sits_on_the_sphere() {
        let g = Grid::new(16).unwrap();
        let j = manufactured(&g, 4, 10.0);
        let w: Vec<_> = j.fields.iter().map(|f| poisson_potential(&g, f)).collect();
        let big_w = enstrophy(&g, &w);
        let r = big_w / 9.0;
        let s = solve_mp(&g, &j, r).unwrap();
        assert!(s.constraint_active);
        assert!((s.enstrophy_used - r).abs() <= 1e-12 * r);
        assert!((s.one_minus_two_lambda - 3.0).abs() <= 1e-12);
        assert!(s.lambda < 0.0);
    }

    #[test]
    fn scaling_covariance_in_the_interior() {
        let g = Grid::new(16).unwrap();
        let j = manufactured(&g, 5, 1.0);
        let a = solve_mp(&g, &j, 1e9).unwrap();
        let scaled = FluxField::new(0.5, 1.0, TIMES.to_vec(), j.fields.iter().map(|f| f.scaled(3.0)).collect()).unwrap();
        let b = solve_mp(&g, &scaled, 1e9).unwrap();
        for (x, y) in a.v_star.iter().zip(&b.v_star) {
            assert!(x.scaled(3.0).sub(y).max_abs() <= 1e-13 * y.max_abs());
        }
    }

    #[test]
    fn functional_is_strictly_convex() {
        let g = Grid::new(16).unwrap();
        let j = manufactured(&g, 6, 1.0);
        let v = series(&g, 7);
        let d = series(&g, 8);
        let at = |t: f64| {
            let f: Vec<_> = v.iter().zip(&d).map(|(a, b)| {
                let mut c = a.clone();
                c.add_scaled(t, b);
                c
            }).collect();
            k_functional(&g, &TIMES, &f, &j).unwrap()
        };
        assert!(at(1.0) + at(-1.0) - 2.0 * at(0.0) > 0.0);
    }

    #[test]
    fn minimizer_beats_feasible_competitors() {
        let g = Grid::new(16).unwrap();
        let j = manufactured(&g, 9, 5.0);
        let r = 0.5;
        let s = solve_mp(&g, &j, r).unwrap();
        for seed in 0..5 {
            let mut v = series(&g, 100 + seed);
            let scale = (r / enstrophy(&g, &v)).sqrt();
            for f in &mut v {
                f.scale(scale);
            }
            assert!(k_functional(&g, &TIMES, &v, &j).unwrap() >= s.k_value);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn parallelogram_identity(seed in 0u64..10_000) {
            let g = Grid::new(16).unwrap();
            let j = manufactured(&g, seed, 1.0);
            let v = series(&g, seed + 1);
            let w = series(&g, seed + 2);
            let mid: Vec<_> = v.iter().zip(&w).map(|(a, b)| a.add(b).scaled(0.5)).collect();
            let diff: Vec<_> = v.iter().zip(&w).map(|(a, b)| a.sub(b)).collect();
            let lhs = enstrophy(&g, &diff) / 8.0;
            let rhs = 0.5 * k_functional(&g, &TIMES, &v, &j).unwrap()
                + 0.5 * k_functional(&g, &TIMES, &w, &j).unwrap()
                - k_functional(&g, &TIMES, &mid, &j).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs);
        }
    }
}

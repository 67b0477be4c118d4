//! Two estimators of the Duchon-Robert dissipation and their cross-check.
//!
//! The structure-function estimator sums `¼ ∇η_δ(y)·δu |δu|² h³` over every
//! grid offset inside the kernel support, with exact kernel-gradient
//! samples; evaluating the field costs `O(n³ · support)`. Its space
//! integral has a fast path through FFT correlations, which is what the
//! width-refinement study uses.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coarse_grain::{filtered_state, FilterKernel};
use crate::error::{Error, Result};
use crate::ns::Trajectory;
use crate::spectral::{Grid, RealField, SpectralField, VOLUME};
use crate::stats::{fitted_order, richardson_even};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    StructureFunction,
    StressStrain,
}

#[derive(Clone, Debug)]
pub struct DissipationField {
    pub delta: f64,
    pub estimator: Estimator,
    pub values: RealField,
}

impl DissipationField {
    /// `h³ Σ D`.
    pub fn integral(&self) -> f64 {
        let h = crate::spectral::TWO_PI / self.values.n() as f64;
        h.powi(3) * self.values.comp(0).iter().sum::<f64>()
    }
}

fn check(grid: &Grid, u: &SpectralField, kernel: &FilterKernel) -> Result<()> {
    if u.n() != grid.n() || kernel.n() != grid.n() || u.ncomp() != 3 {
        return Err(Error::ShapeMismatch {
            expected: format!("3-vector on {0}^3", grid.n()),
            found: format!("{}-vector on {}^3, kernel on {}^3", u.ncomp(), u.n(), kernel.n()),
        });
    }
    Ok(())
}

/// Offsets in the kernel support paired with `h³ ∇η_δ(y)`.
fn weighted_offsets(grid: &Grid, kernel: &FilterKernel) -> Vec<([isize; 3], [f64; 3])> {
    let h = grid.spacing();
    let h3 = h.powi(3);
    kernel
        .support_offsets()
        .into_iter()
        .filter_map(|s| {
            let y = [s[0] as f64 * h, s[1] as f64 * h, s[2] as f64 * h];
            let g = kernel.gradient_at(y);
            if g == [0.0; 3] {
                None
            } else {
                Some((s, [h3 * g[0], h3 * g[1], h3 * g[2]]))
            }
        })
        .collect()
}

pub fn dr_structure_function(grid: &Grid, u: &SpectralField, kernel: &FilterKernel) -> Result<DissipationField> {
    check(grid, u, kernel)?;
    let n = grid.n();
    let ni = n as isize;
    let ug = grid.inverse(u);
    let (u0, u1, u2) = (ug.comp(0), ug.comp(1), ug.comp(2));
    let mut out = vec![0.0; grid.len()];
    let wrap = |i: usize, s: isize| (i as isize + s).rem_euclid(ni) as usize;
    for (s, g) in weighted_offsets(grid, kernel) {
        for iz in 0..n {
            let sz = wrap(iz, s[2]);
            for iy in 0..n {
                let sy = wrap(iy, s[1]);
                let row = n * (iy + n * iz);
                let srow = n * (sy + n * sz);
                for ix in 0..n {
                    let a = row + ix;
                    let b = srow + wrap(ix, s[0]);
                    let d = [u0[b] - u0[a], u1[b] - u1[a], u2[b] - u2[a]];
                    let mag = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                    out[a] += 0.25 * (g[0] * d[0] + g[1] * d[1] + g[2] * d[2]) * mag;
                }
            }
        }
    }
    Ok(DissipationField {
        delta: kernel.delta(),
        estimator: Estimator::StructureFunction,
        values: RealField::from_components(n, vec![out]),
    })
}

/// `∫ D_δ dx` for the structure-function estimator via FFT correlations.
///
/// With `Q_j(y) = Σ_i ∫u_j u_i(x) u_i(x+y) + ½∫|u|²(x) u_j(x+y)`, the
/// increment moment is `∫ δu_j |δu|² dx = 2(Q_j(y) − Q_j(−y))`.
pub fn dr_structure_function_integral(grid: &Grid, u: &SpectralField, kernel: &FilterKernel) -> Result<f64> {
    check(grid, u, kernel)?;
    let ug = grid.inverse(u);
    let pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
    let mut products = RealField::zeros(grid.n(), 7);
    for (p, &(i, j)) in pairs.iter().enumerate() {
        let dst = products.comp_mut(p);
        for (idx, d) in dst.iter_mut().enumerate() {
            *d = ug.comp(i)[idx] * ug.comp(j)[idx];
        }
    }
    for idx in 0..grid.len() {
        let s: f64 = (0..3).map(|c| ug.comp(c)[idx].powi(2)).sum();
        products.comp_mut(6)[idx] = s;
    }
    let ph = grid.forward(&products);
    let uh = grid.forward(&ug);
    let pair_index = |i: usize, j: usize| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        pairs.iter().position(|&p| p == (a, b)).unwrap()
    };
    let mut q = SpectralField::zeros(grid.n(), 3);
    for j in 0..3 {
        let dst = q.comp_mut(j);
        for (idx, d) in dst.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..3 {
                acc += ph.comp(pair_index(j, i))[idx].conj() * uh.comp(i)[idx];
            }
            acc += 0.5 * ph.comp(6)[idx].conj() * uh.comp(j)[idx];
            *d = acc;
        }
    }
    // h³·n³ = (2π)³ turns the normalized inverse into the quadrature sum.
    let qg = grid.inverse(&q);
    let mut total = 0.0;
    for (s, g) in weighted_offsets(grid, kernel) {
        let plus = grid.index_of([s[0] as i64, s[1] as i64, s[2] as i64]);
        let minus = grid.index_of([-s[0] as i64, -s[1] as i64, -s[2] as i64]);
        for j in 0..3 {
            let moment = 2.0 * VOLUME * (qg.comp(j)[plus] - qg.comp(j)[minus]);
            total += 0.25 * g[j] * moment;
        }
    }
    Ok(total)
}

/// `−∇ū : R̄` pointwise.
pub fn dr_stress_strain(grid: &Grid, u: &SpectralField, kernel: &FilterKernel) -> Result<DissipationField> {
    check(grid, u, kernel)?;
    let st = filtered_state(grid, u, kernel)?;
    let g = grid.inverse(&grid.gradient(&st.u_bar));
    let r = grid.inverse(&st.r_bar);
    let mut out = vec![0.0; grid.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        *o = -(0..9).map(|c| g.comp(c)[idx] * r.comp(c)[idx]).sum::<f64>();
    }
    Ok(DissipationField {
        delta: kernel.delta(),
        estimator: Estimator::StressStrain,
        values: RealField::from_components(grid.n(), vec![out]),
    })
}

/// `−⟨∇ū, R̄⟩` by Parseval.
pub fn dr_stress_strain_integral(grid: &Grid, u: &SpectralField, kernel: &FilterKernel) -> Result<f64> {
    check(grid, u, kernel)?;
    let st = filtered_state(grid, u, kernel)?;
    Ok(-grid.inner(&grid.gradient(&st.u_bar), &st.r_bar))
}

/// Per-width space-time integrals of both estimators and their
/// extrapolated zero-width limits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub widths: Vec<f64>,
    pub structure_function: Vec<f64>,
    pub stress_strain: Vec<f64>,
    pub structure_function_limit: f64,
    pub stress_strain_limit: f64,
    pub structure_function_order: f64,
    pub stress_strain_order: f64,
    /// `ν ∫∫ |∇u|²`
    pub dissipation_scale: f64,
    /// `|I_sf − I_ss|` at the finest width over `dissipation_scale`.
    pub gap: f64,
}

pub fn dr_cross_validate(grid: &Grid, traj: &Trajectory, kernels: &[FilterKernel]) -> Result<CrossValidation> {
    if kernels.len() < 3 {
        return Err(Error::TooFewWidths {
            need: 3,
            got: kernels.len(),
        });
    }
    let weights = traj.weights();
    let mut sf = Vec::with_capacity(kernels.len());
    let mut ss = Vec::with_capacity(kernels.len());
    for kernel in kernels {
        let (mut a, mut b) = (0.0, 0.0);
        for (u, w) in traj.snapshots.iter().zip(&weights) {
            a += w * dr_structure_function_integral(grid, u, kernel)?;
            b += w * dr_stress_strain_integral(grid, u, kernel)?;
        }
        sf.push(a);
        ss.push(b);
    }
    let scale = traj.spec.nu
        * traj
            .snapshots
            .iter()
            .zip(&weights)
            .map(|(u, w)| w * grid.gradient_norm_sq(u))
            .sum::<f64>();
    let widths: Vec<f64> = kernels.iter().map(|k| k.delta()).collect();
    CrossValidation::from_integrals(widths, sf, ss, scale)
}

impl CrossValidation {
    /// Extrapolate per-width integrals, finest width last.
    pub fn from_integrals(
        widths: Vec<f64>,
        structure_function: Vec<f64>,
        stress_strain: Vec<f64>,
        dissipation_scale: f64,
    ) -> Result<Self> {
        let count = widths.len();
        if count < 3 {
            return Err(Error::TooFewWidths { need: 3, got: count });
        }
        if structure_function.len() != count || stress_strain.len() != count {
            return Err(Error::ShapeMismatch {
                expected: format!("{count} per-width integrals"),
                found: format!("{} and {}", structure_function.len(), stress_strain.len()),
            });
        }
        let last3 = |v: &[f64]| [v[count - 3], v[count - 2], v[count - 1]];
        let diff = (structure_function[count - 1] - stress_strain[count - 1]).abs();
        Ok(Self {
            structure_function_limit: richardson_even(last3(&structure_function)),
            stress_strain_limit: richardson_even(last3(&stress_strain)),
            structure_function_order: fitted_order(&widths, &structure_function),
            stress_strain_order: fitted_order(&widths, &stress_strain),
            gap: if dissipation_scale > 0.0 {
                diff / dissipation_scale
            } else {
                diff
            },
            dissipation_scale,
            widths,
            structure_function,
            stress_strain,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarse_grain::{make_kernel, width_schedule};
    use crate::ns::InitialCondition;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_velocity(g: &Grid, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        g.leray_project(&g.random_band_limited(3, 12.0, &mut rng))
    }

    #[test]
    fn zero_field_gives_zero() {
        let g = Grid::new(16).unwrap();
        let k = make_kernel(1.0, &g).unwrap();
        let z = SpectralField::zeros(16, 3);
        assert_eq!(dr_structure_function(&g, &z, &k).unwrap().values.max_abs(), 0.0);
        assert_eq!(dr_stress_strain(&g, &z, &k).unwrap().values.max_abs(), 0.0);
        assert_eq!(dr_structure_function_integral(&g, &z, &k).unwrap(), 0.0);
    }

    #[test]
    fn fast_integral_matches_direct_sum() {
        let g = Grid::new(16).unwrap();
        let u = random_velocity(&g, 1);
        let k = make_kernel(1.3, &g).unwrap();
        let direct = dr_structure_function(&g, &u, &k).unwrap().integral();
        let fast = dr_structure_function_integral(&g, &u, &k).unwrap();
        assert!((direct - fast).abs() <= 1e-12 * direct.abs().max(1e-300), "{direct} vs {fast}");
    }

    #[test]
    fn structure_function_is_odd_in_velocity() {
        let g = Grid::new(16).unwrap();
        let u = random_velocity(&g, 2);
        let k = make_kernel(1.0, &g).unwrap();
        let a = dr_structure_function(&g, &u, &k).unwrap().values;
        let b = dr_structure_function(&g, &u.scaled(-1.0), &k).unwrap().values;
        let scale = a.max_abs();
        for (x, y) in a.comp(0).iter().zip(b.comp(0)) {
            assert!((x + y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn stress_strain_integral_matches_field() {
        let g = Grid::new(16).unwrap();
        let u = random_velocity(&g, 3);
        let k = make_kernel(1.0, &g).unwrap();
        let field = dr_stress_strain(&g, &u, &k).unwrap().integral();
        let spectral = dr_stress_strain_integral(&g, &u, &k).unwrap();
        assert!((field - spectral).abs() <= 1e-12 * spectral.abs());
    }

    #[test]
    fn estimators_are_translation_invariant() {
        let g = Grid::new(16).unwrap();
        let u = random_velocity(&g, 4);
        let k = make_kernel(1.0, &g).unwrap();
        let shift = [3, -5, 7];
        let us = g.forward(&g.inverse(&u).shifted(shift));
        for f in [dr_structure_function, dr_stress_strain] {
            let a = f(&g, &u, &k).unwrap().values.shifted(shift);
            let b = f(&g, &us, &k).unwrap().values;
            let scale = a.max_abs();
            for (x, y) in a.comp(0).iter().zip(b.comp(0)) {
                assert!((x - y).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn smooth_field_integral_vanishes_with_width() {
        let g = Grid::new(64).unwrap();
        let u = random_velocity(&g, 6);
        let widths = width_schedule(std::f64::consts::PI / 4.0, 3, &g);
        let vals: Vec<f64> = widths
            .iter()
            .map(|&d| dr_structure_function_integral(&g, &u, &make_kernel(d, &g).unwrap()).unwrap())
            .collect();
        let order = fitted_order(&widths, &vals);
        assert!(order >= 1.8, "order {order}: {vals:?}");
    }

    #[test]
    fn cross_validation_needs_three_widths() {
        let spec = crate::GridSpec::new(16, 0.1, 1e-3, 0.01, 10).unwrap();
        let traj = crate::ns::simulate(&InitialCondition::taylor_green(0.0), &spec).unwrap();
        let g = spec.grid().unwrap();
        let ks = crate::coarse_grain::kernels(&[2.0, 1.0], &g).unwrap();
        assert!(matches!(
            dr_cross_validate(&g, &traj, &ks),
            Err(Error::TooFewWidths { need: 3, got: 2 })
        ));
        let ks = crate::coarse_grain::kernels(&[3.0, 1.5, 0.8], &g).unwrap();
        let cv = dr_cross_validate(&g, &traj, &ks).unwrap();
        assert!(cv.structure_function.iter().chain(&cv.stress_strain).all(|v| *v == 0.0));
    }
}

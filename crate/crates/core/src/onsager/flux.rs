use crate::coarse_grain::{filtered_state, FilterKernel};
use crate::error::{Error, Result};
use crate::ns::Trajectory;
use crate::spectral::{trapezoid_weights, Grid, SpectralField};

/// Per-snapshot flux `J = ν∇ū − R̄` at one width.
#[derive(Clone, Debug)]
pub struct FluxField {
    pub delta: f64,
    pub nu: f64,
    pub times: Vec<f64>,
    /// Nine components per snapshot, `(i, j)` at `3i + j`.
    pub fields: Vec<SpectralField>,
}

impl FluxField {
    pub fn new(delta: f64, nu: f64, times: Vec<f64>, fields: Vec<SpectralField>) -> Result<Self> {
        if times.len() != fields.len() || times.is_empty() {
            return Err(Error::TimeMismatch(format!(
                "{} time stamps for {} flux fields",
                times.len(),
                fields.len()
            )));
        }
        if let Some(f) = fields.iter().find(|f| f.ncomp() != 9) {
            return Err(Error::ShapeMismatch {
                expected: "rank-2 tensor (9 components)".into(),
                found: format!("{} components", f.ncomp()),
            });
        }
        Ok(Self {
            delta,
            nu,
            times,
            fields,
        })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        trapezoid_weights(&self.times)
    }

    /// `(∫ ‖J‖² dt)^{1/2}`.
    pub fn norm(&self, grid: &Grid) -> f64 {
        self.weights()
            .iter()
            .zip(&self.fields)
            .map(|(w, j)| w * grid.norm_sq(j))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn assemble_flux(grid: &Grid, traj: &Trajectory, kernel: &FilterKernel) -> Result<FluxField> {
    assemble_flux_with_viscosity(grid, traj, kernel, traj.spec.nu)
}

/// Flux with an explicit viscosity in front of `∇ū`.
pub fn assemble_flux_with_viscosity(
    grid: &Grid,
    traj: &Trajectory,
    kernel: &FilterKernel,
    nu: f64,
) -> Result<FluxField> {
    let mut fields = Vec::with_capacity(traj.len());
    for u in &traj.snapshots {
        let st = filtered_state(grid, u, kernel)?;
        let mut j = grid.gradient(&st.u_bar);
        j.scale(nu);
        j.add_scaled(-1.0, &st.r_bar);
        fields.push(j);
    }
    FluxField::new(kernel.delta(), nu, traj.times.clone(), fields)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarse_grain::{make_kernel, reynolds_stress};
    use crate::ns::{simulate, InitialCondition};
    use crate::GridSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn run(amp: f64) -> Trajectory {
        let spec = GridSpec::new(16, 0.1, 1e-3, 0.02, 10).unwrap();
        simulate(&InitialCondition::taylor_green(amp), &spec).unwrap()
    }

    #[test]
    fn zero_velocity_gives_zero_flux() {
        let traj = run(0.0);
        let g = traj.spec.grid().unwrap();
        let k = make_kernel(1.0, &g).unwrap();
        let j = assemble_flux(&g, &traj, &k).unwrap();
        assert!(j.fields.iter().all(|f| f.max_abs() == 0.0));
    }

    #[test]
    fn symmetrized_form_has_the_same_pairing() {
        // ⟨2ν sym∇ū − R̄, ∇v⟩ = ⟨ν∇ū − R̄, ∇v⟩ for divergence-free v.
        let traj = run(1.0);
        let g = traj.spec.grid().unwrap();
        let k = make_kernel(1.0, &g).unwrap();
        let j = assemble_flux(&g, &traj, &k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (u, jt) in traj.snapshots.iter().zip(&j.fields) {
            let ub = crate::coarse_grain::filter(&g, u, &k).unwrap();
            let grad = g.gradient(&ub);
            let mut sym = SpectralField::zeros(16, 9);
            for a in 0..3 {
                for b in 0..3 {
                    let dst = sym.comp_mut(3 * a + b);
                    for (idx, z) in dst.iter_mut().enumerate() {
                        *z = traj.spec.nu * (grad.comp(3 * a + b)[idx] + grad.comp(3 * b + a)[idx]);
                    }
                }
            }
            let ja = sym.sub(&reynolds_stress(&g, u, &k).unwrap());
            let v = g.leray_project(&g.random_band_limited(3, 20.0, &mut rng));
            let gv = g.gradient(&v);
            let (p, q) = (g.inner(jt, &gv), g.inner(&ja, &gv));
            assert!((p - q).abs() <= 1e-12 * (g.norm_sq(jt) * g.norm_sq(&gv)).sqrt());
        }
    }

    #[test]
    fn stress_share_shrinks_with_width() {
        let traj = run(1.0);
        let g = traj.spec.grid().unwrap();
        let mut prev = f64::INFINITY;
        for d in [2.0, 1.0, 0.8] {
            let k = make_kernel(d, &g).unwrap();
            let u = &traj.snapshots[0];
            let r = g.norm_sq(&reynolds_stress(&g, u, &k).unwrap()).sqrt();
            let v = traj.spec.nu * g.gradient_norm_sq(&crate::coarse_grain::filter(&g, u, &k).unwrap()).sqrt();
            assert!(r / v < prev);
            prev = r / v;
        }
    }
}

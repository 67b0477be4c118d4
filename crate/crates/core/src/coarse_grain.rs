//! Mollification, the subfilter stress and the coarse-grained energy balances.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ns::Trajectory;
use crate::spectral::{Grid, RealField, SpectralField, TWO_PI};
use crate::testfn::TimeWindow;

/// Unnormalized bump profile `exp(−1/(1−r²))` on `r < 1`.
pub fn bump(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r * r)).exp()
    }
}

/// Radial mollifier `η_δ(y) = c·bump(|y|/δ)` sampled on the grid.
#[derive(Clone, Debug)]
pub struct FilterKernel {
    delta: f64,
    n: usize,
    /// Grid-mass normalization `c`.
    scale: f64,
    samples: Vec<f64>,
    multiplier: Vec<f64>,
}

/// Periodic minimal-image displacement for a grid index.
fn offset(i: usize, n: usize) -> f64 {
    let h = TWO_PI / n as f64;
    let s = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
    s * h
}

pub fn make_kernel(delta: f64, grid: &Grid) -> Result<FilterKernel> {
    let h = grid.spacing();
    let floor = 2.0 * h;
    if !(delta.is_finite() && delta >= floor * (1.0 - 1e-12)) {
        return Err(Error::UnresolvedKernel { delta, floor });
    }
    if delta > std::f64::consts::PI * (1.0 + 1e-12) {
        return Err(Error::KernelTooWide { delta });
    }
    let n = grid.n();
    let mut samples = vec![0.0; grid.len()];
    let mut mass = 0.0;
    for (idx, s) in samples.iter_mut().enumerate() {
        let (ix, iy, iz) = grid.coords(idx);
        let y = [offset(ix, n), offset(iy, n), offset(iz, n)];
        let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt() / delta;
        *s = bump(r);
        mass += *s;
    }
    let h3 = h.powi(3);
    let scale = 1.0 / (mass * h3);
    for s in &mut samples {
        *s *= scale;
    }
    let field = RealField::from_components(n, vec![samples.clone()]);
    let coeffs = grid.forward(&field);
    // m(k) = h³ Σ_y η(y) e^{−ik·y} = (2π)³ η̂(k)
    let vol = TWO_PI.powi(3);
    let multiplier = coeffs.comp(0).iter().map(|z| vol * z.re).collect();
    Ok(FilterKernel {
        delta,
        n,
        scale,
        samples,
        multiplier,
    })
}

impl FilterKernel {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn multiplier(&self) -> &[f64] {
        &self.multiplier
    }

    /// `h³ Σ η_δ`.
    pub fn mass(&self) -> f64 {
        let h = TWO_PI / self.n as f64;
        h.powi(3) * self.samples.iter().sum::<f64>()
    }

    pub fn min_multiplier(&self) -> f64 {
        self.multiplier.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Exact `η_δ(y)` for a displacement inside the box.
    pub fn value_at(&self, y: [f64; 3]) -> f64 {
        let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt() / self.delta;
        self.scale * bump(r)
    }

    /// Exact `∇η_δ(y) = −(2c/δ²)·bump(r)/(1−r²)²·y`.
    pub fn gradient_at(&self, y: [f64; 3]) -> [f64; 3] {
        let d2 = self.delta * self.delta;
        let r2 = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]) / d2;
        if r2 >= 1.0 {
            return [0.0; 3];
        }
        let q = 1.0 - r2;
        let f = -2.0 * self.scale / d2 * (-1.0 / q).exp() / (q * q);
        [f * y[0], f * y[1], f * y[2]]
    }

    /// Integer grid offsets `s` with `|s·h| < δ`.
    pub fn support_offsets(&self) -> Vec<[isize; 3]> {
        let h = TWO_PI / self.n as f64;
        let reach = (self.delta / h).ceil() as isize;
        let mut out = Vec::new();
        for sz in -reach..=reach {
            for sy in -reach..=reach {
                for sx in -reach..=reach {
                    let y = [sx as f64 * h, sy as f64 * h, sz as f64 * h];
                    if (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt() < self.delta {
                        out.push([sx, sy, sz]);
                    }
                }
            }
        }
        out
    }
}

/// `δₙ = δ₀·2⁻ⁿ` for `n < count`, stopping before the width falls below two
/// grid spacings.
pub fn width_schedule(delta0: f64, count: usize, grid: &Grid) -> Vec<f64> {
    let floor = 2.0 * grid.spacing() * (1.0 - 1e-12);
    (0..count)
        .map(|i| delta0 / 2f64.powi(i as i32))
        .take_while(|d| *d >= floor)
        .collect()
}

pub fn kernels(widths: &[f64], grid: &Grid) -> Result<Vec<FilterKernel>> {
    widths.iter().map(|&d| make_kernel(d, grid)).collect()
}

fn check_kernel(grid: &Grid, kernel: &FilterKernel) -> Result<()> {
    if kernel.n != grid.n() {
        return Err(Error::ShapeMismatch {
            expected: format!("kernel on {0}^3", grid.n()),
            found: format!("kernel on {0}^3", kernel.n),
        });
    }
    Ok(())
}

pub fn filter(grid: &Grid, u: &SpectralField, kernel: &FilterKernel) -> Result<SpectralField> {
    check_kernel(grid, kernel)?;
    if u.n() != grid.n() {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}^3", grid.n()),
            found: format!("{0}^3", u.n()),
        });
    }
    Ok(grid.apply_multiplier(u, &kernel.multiplier))
}

/// Coarse-grained velocity, pressure and subfilter stress of one snapshot.
#[derive(Clone, Debug)]
pub struct FilteredState {
    pub delta: f64,
    pub u_bar: SpectralField,
    pub p_bar: SpectralField,
    /// Nine components, `(i, j)` at `3i + j`.
    pub r_bar: SpectralField,
    /// `(u⊗u)‾`, kept for the pressure residual.
    pub filtered_uu: SpectralField,
}

pub fn filtered_state(grid: &Grid, u: &SpectralField, kernel: &FilterKernel) -> Result<FilteredState> {
    let u_bar = filter(grid, u, kernel)?;
    let uu = grid.symmetric_square(&grid.inverse(u));
    let filtered_uu = grid.apply_multiplier(&uu, &kernel.multiplier);
    let ubub = grid.symmetric_square(&grid.inverse(&u_bar));
    let r_bar = filtered_uu.sub(&ubub);
    let p_bar = pressure_from_stress(grid, &filtered_uu);
    Ok(FilteredState {
        delta: kernel.delta,
        u_bar,
        p_bar,
        r_bar,
        filtered_uu,
    })
}

/// Zero-mean solution of `−Δp = ∂_i∂_j F_ij`.
pub fn pressure_from_stress(grid: &Grid, f: &SpectralField) -> SpectralField {
    let ddf = grid.divergence(&grid.divergence(f));
    grid.inverse_laplacian(&ddf.scaled(-1.0))
}

pub fn reynolds_stress(grid: &Grid, u: &SpectralField, kernel: &FilterKernel) -> Result<SpectralField> {
    Ok(filtered_state(grid, u, kernel)?.r_bar)
}

pub fn filtered_pressure(grid: &Grid, u: &SpectralField, kernel: &FilterKernel) -> Result<SpectralField> {
    Ok(filtered_state(grid, u, kernel)?.p_bar)
}

/// Smallest eigenvalue of a symmetric 3×3 matrix (row-major).
pub fn min_eigenvalue_sym3(a: [f64; 9]) -> f64 {
    let p1 = a[1] * a[1] + a[2] * a[2] + a[5] * a[5];
    let q = (a[0] + a[4] + a[8]) / 3.0;
    if p1 == 0.0 {
        return a[0].min(a[4]).min(a[8]);
    }
    let p2 = (a[0] - q).powi(2) + (a[4] - q).powi(2) + (a[8] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = |i: usize| {
        let diag = i == 0 || i == 4 || i == 8;
        (a[i] - if diag { q } else { 0.0 }) / p
    };
    let det = b(0) * (b(4) * b(8) - b(5) * b(7)) - b(1) * (b(3) * b(8) - b(5) * b(6))
        + b(2) * (b(3) * b(7) - b(4) * b(6));
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos()
}

/// Most negative pointwise eigenvalue of `R̄` relative to `max |R̄|`;
/// `None` when the kernel multiplier dips below zero and the check does
/// not apply.
pub fn stress_psd_defect(grid: &Grid, r_bar: &SpectralField, kernel: &FilterKernel) -> Option<f64> {
    if kernel.min_multiplier() < 0.0 {
        return None;
    }
    let r = grid.inverse(r_bar);
    let scale = r.max_abs();
    if scale == 0.0 {
        return Some(0.0);
    }
    let mut worst: f64 = 0.0;
    for idx in 0..grid.len() {
        let mut a = [0.0; 9];
        for (c, v) in a.iter_mut().enumerate() {
            *v = r.comp(c)[idx];
        }
        worst = worst.min(min_eigenvalue_sym3(a));
    }
    Some(-worst / scale)
}

/// Terms of the resolved global balance at one width.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BalanceReport {
    pub delta: f64,
    /// `½‖ū(T)‖² − ½‖ū(0)‖²`
    pub lhs: f64,
    /// `−ν∫‖∇ū‖² + ∫⟨R̄, ∇ū⟩`
    pub rhs: f64,
    pub residual: f64,
    /// `ν∫‖∇ū‖²`
    pub dissipation: f64,
    /// `∫⟨R̄, ∇ū⟩`
    pub flux: f64,
}

pub fn resolved_balance(grid: &Grid, traj: &Trajectory, kernel: &FilterKernel) -> Result<BalanceReport> {
    if traj.len() < 2 {
        return Err(Error::TooFewSnapshots {
            need: 2,
            got: traj.len(),
        });
    }
    let nu = traj.spec.nu;
    let weights = traj.weights();
    let mut dissipation = 0.0;
    let mut flux = 0.0;
    let mut first = 0.0;
    let mut last = 0.0;
    for (i, (u, w)) in traj.snapshots.iter().zip(&weights).enumerate() {
        let st = filtered_state(grid, u, kernel)?;
        let grad = grid.gradient(&st.u_bar);
        dissipation += w * nu * grid.norm_sq(&grad);
        flux += w * grid.inner(&st.r_bar, &grad);
        let e = 0.5 * grid.norm_sq(&st.u_bar);
        if i == 0 {
            first = e;
        }
        last = e;
    }
    let lhs = last - first;
    let rhs = -dissipation + flux;
    Ok(BalanceReport {
        delta: kernel.delta,
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        dissipation,
        flux,
    })
}

/// Nonnegative space-time test function `s(t)·ψ(x)` with `ψ` given by
/// band-limited coefficients.
#[derive(Clone, Debug)]
pub struct ScalarTestFunction {
    pub space: SpectralField,
    pub window: TimeWindow,
}

impl ScalarTestFunction {
    pub fn constant(grid: &Grid, value: f64) -> Self {
        let mut space = SpectralField::zeros(grid.n(), 1);
        space.comp_mut(0)[0] = Complex64::new(value, 0.0);
        Self {
            space,
            window: TimeWindow::Constant,
        }
    }
}

/// Every term of the local coarse-grained energy balance tested against `φ`.
///
/// With `T(φ) = −2∫∫ ū·(∇·R̄) φ` the identity reads
/// `T = [∫|ū|²φ]₀ᵀ − ∫∫|ū|²(∂ₜφ + νΔφ) − ∫∫(|ū|² + 2p̄) ū·∇φ + 2ν∫∫|∇ū|²φ`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LocalBalance {
    pub transfer: f64,
    pub boundary: f64,
    pub time_derivative: f64,
    pub diffusion: f64,
    pub transport: f64,
    pub viscous: f64,
    pub imbalance: f64,
}

pub fn local_balance_test(
    grid: &Grid,
    traj: &Trajectory,
    kernel: &FilterKernel,
    phi: &ScalarTestFunction,
) -> Result<LocalBalance> {
    if traj.len() < 2 {
        return Err(Error::TooFewSnapshots {
            need: 2,
            got: traj.len(),
        });
    }
    if phi.space.ncomp() != 1 {
        return Err(Error::ShapeMismatch {
            expected: "scalar test function".into(),
            found: format!("{} components", phi.space.ncomp()),
        });
    }
    let psi = grid.inverse(&phi.space);
    let peak = psi.max_abs();
    let min = psi.comp(0).iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-12 * peak.max(f64::MIN_POSITIVE) {
        return Err(Error::NegativeTestFunction { min });
    }
    let window_min = traj
        .times
        .iter()
        .map(|t| phi.window.value(*t))
        .fold(f64::INFINITY, f64::min);
    if window_min < 0.0 {
        return Err(Error::NegativeTestFunction { min: window_min });
    }
    let grad_psi = grid.inverse(&grid.gradient(&phi.space));
    let lap_psi = grid.inverse(&grid.laplacian(&phi.space));
    let nu = traj.spec.nu;
    let h3 = grid.spacing().powi(3);
    let weights = traj.weights();
    let last = traj.len() - 1;

    let mut out = LocalBalance::default();
    for (i, ((u, w), t)) in traj
        .snapshots
        .iter()
        .zip(&weights)
        .zip(&traj.times)
        .enumerate()
    {
        let s = phi.window.value(*t);
        let ds = phi.window.derivative(*t);
        let st = filtered_state(grid, u, kernel)?;
        let ub = grid.inverse(&st.u_bar);
        let div_r = grid.inverse(&grid.divergence(&st.r_bar));
        let grad_ub = grid.inverse(&grid.gradient(&st.u_bar));
        let p = grid.inverse(&st.p_bar);

        let (mut transfer, mut energy_psi, mut energy_lap, mut transport, mut viscous) =
            (0.0, 0.0, 0.0, 0.0, 0.0);
        for idx in 0..grid.len() {
            let uv = [ub.comp(0)[idx], ub.comp(1)[idx], ub.comp(2)[idx]];
            let e2 = uv[0] * uv[0] + uv[1] * uv[1] + uv[2] * uv[2];
            let ps = psi.comp(0)[idx];
            let u_div_r: f64 = (0..3).map(|c| uv[c] * div_r.comp(c)[idx]).sum();
            let u_grad_psi: f64 = (0..3).map(|c| uv[c] * grad_psi.comp(c)[idx]).sum();
            let g2: f64 = (0..9).map(|c| grad_ub.comp(c)[idx].powi(2)).sum();
            transfer += u_div_r * ps;
            energy_psi += e2 * ps;
            energy_lap += e2 * lap_psi.comp(0)[idx];
            transport += (e2 + 2.0 * p.comp(0)[idx]) * u_grad_psi;
            viscous += g2 * ps;
        }
        out.transfer += -2.0 * w * s * h3 * transfer;
        out.time_derivative += w * ds * h3 * energy_psi;
        out.diffusion += w * nu * s * h3 * energy_lap;
        out.transport += w * s * h3 * transport;
        out.viscous += 2.0 * nu * w * s * h3 * viscous;
        if i == 0 {
            out.boundary -= s * h3 * energy_psi;
        }
        if i == last {
            out.boundary += s * h3 * energy_psi;
        }
    }
    let rhs = out.boundary - out.time_derivative - out.diffusion - out.transport + out.viscous;
    out.imbalance = out.transfer - rhs;
    Ok(out)
}

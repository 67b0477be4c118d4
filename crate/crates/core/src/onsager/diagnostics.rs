use serde::{Deserialize, Serialize};

use super::basket::TestBasket;
use super::flux::{assemble_flux, FluxField};
use super::mp::{k_functional, solve_mp, MinimizerSolution, SolutionRecord};
use crate::coarse_grain::{filter, FilterKernel};
use crate::error::{Error, Result};
use crate::ns::Trajectory;
use crate::spectral::{Grid, SpectralField};
use crate::stats::{fitted_order, strictly_decreasing};

/// Relative size below which a basket pairing counts as degenerate.
const DEGENERATE_PAIRING: f64 = 1e-12;

fn check_times(sol: &MinimizerSolution, j: &FluxField) -> Result<()> {
    if sol.times != j.times {
        return Err(Error::TimeMismatch(
            "solution and flux are sampled at different times".into(),
        ));
    }
    Ok(())
}

/// `∫⟨J, ∇φ⟩ / ∫⟨∇v*, ∇φ⟩` per basket element; `None` where the
/// denominator is degenerate.
pub fn lagrange_ratio(
    grid: &Grid,
    sol: &MinimizerSolution,
    j: &FluxField,
    basket: &TestBasket,
) -> Result<Vec<Option<f64>>> {
    check_times(sol, j)?;
    let weights = sol.weights();
    let v_norm = sol.enstrophy_used.sqrt();
    let ratios: Vec<Option<f64>> = basket
        .elements
        .iter()
        .map(|e| {
            let den = e.pair_gradient(grid, &sol.times, &weights, &sol.v_star);
            let scale = v_norm * e.gradient_norm(grid, &sol.times, &weights);
            if den.abs() <= DEGENERATE_PAIRING * scale || den == 0.0 {
                None
            } else {
                Some(e.pair_tensor(grid, &sol.times, &weights, &j.fields) / den)
            }
        })
        .collect();
    if ratios.iter().all(Option::is_none) {
        return Err(Error::DegenerateBasket);
    }
    Ok(ratios)
}

/// `|(1−2λ)∫⟨∇v*, ∇φ⟩ − ∫⟨J, ∇φ⟩| / (‖J‖ ‖∇φ‖)` per basket element.
pub fn el_residual(
    grid: &Grid,
    sol: &MinimizerSolution,
    j: &FluxField,
    basket: &TestBasket,
) -> Result<Vec<f64>> {
    check_times(sol, j)?;
    let weights = sol.weights();
    let j_norm = j.norm(grid);
    Ok(basket
        .elements
        .iter()
        .map(|e| {
            let lhs = sol.one_minus_two_lambda * e.pair_gradient(grid, &sol.times, &weights, &sol.v_star);
            let rhs = e.pair_tensor(grid, &sol.times, &weights, &j.fields);
            let scale = j_norm * e.gradient_norm(grid, &sol.times, &weights);
            let r = (lhs - rhs).abs();
            if scale > 0.0 {
                r / scale
            } else {
                r
            }
        })
        .collect())
}

fn sym_gradient(grid: &Grid, v: &SpectralField) -> SpectralField {
    let g = grid.gradient(v);
    let mut out = SpectralField::zeros(grid.n(), 9);
    for a in 0..3 {
        for b in 0..3 {
            let dst = out.comp_mut(3 * a + b);
            for (idx, z) in dst.iter_mut().enumerate() {
                *z = 0.5 * (g.comp(3 * a + b)[idx] + g.comp(3 * b + a)[idx]);
            }
        }
    }
    out
}

/// Eddy-viscosity model `2ν sym∇ū − 2(1−2λ) sym∇v*` for one snapshot.
pub fn boussinesq_stress(
    grid: &Grid,
    u_bar: &SpectralField,
    v_star: &SpectralField,
    nu: f64,
    one_minus_two_lambda: f64,
) -> SpectralField {
    let mut m = sym_gradient(grid, u_bar).scaled(2.0 * nu);
    m.add_scaled(-2.0 * one_minus_two_lambda, &sym_gradient(grid, v_star));
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoussinesqReport {
    pub delta: f64,
    /// `(∫‖R̄ − B‖² dt)^{1/2}`
    pub pointwise_norm: f64,
    /// `pointwise_norm / (∫‖R̄‖² dt)^{1/2}`
    pub relative_pointwise: f64,
    /// `|∫⟨R̄ − B, ∇φ_j⟩| / (‖J‖ ‖∇φ_j‖)` per basket element.
    pub tested: Vec<f64>,
}

pub fn boussinesq_residual(
    grid: &Grid,
    traj: &Trajectory,
    kernel: &FilterKernel,
    j: &FluxField,
    sol: &MinimizerSolution,
    basket: &TestBasket,
) -> Result<BoussinesqReport> {
    check_times(sol, j)?;
    let weights = sol.weights();
    let mut residual_sq = 0.0;
    let mut stress_sq = 0.0;
    let mut tested_raw = vec![0.0; basket.len()];
    for (t, ((u, jt), v)) in traj.snapshots.iter().zip(&j.fields).zip(&sol.v_star).enumerate() {
        let ub = filter(grid, u, kernel)?;
        let mut r_bar = grid.gradient(&ub).scaled(j.nu);
        r_bar.add_scaled(-1.0, jt);
        let model = boussinesq_stress(grid, &ub, v, j.nu, sol.one_minus_two_lambda);
        let diff = r_bar.sub(&model);
        residual_sq += weights[t] * grid.norm_sq(&diff);
        stress_sq += weights[t] * grid.norm_sq(&r_bar);
        for (acc, e) in tested_raw.iter_mut().zip(&basket.elements) {
            *acc += weights[t] * e.window.value(sol.times[t]) * grid.inner(&diff, &e.grad_psi);
        }
    }
    let j_norm = j.norm(grid);
    let tested = tested_raw
        .iter()
        .zip(&basket.elements)
        .map(|(r, e)| {
            let scale = j_norm * e.gradient_norm(grid, &sol.times, &weights);
            if scale > 0.0 {
                r.abs() / scale
            } else {
                r.abs()
            }
        })
        .collect();
    let pointwise_norm = residual_sq.sqrt();
    Ok(BoussinesqReport {
        delta: kernel.delta(),
        pointwise_norm,
        relative_pointwise: if stress_sq > 0.0 {
            pointwise_norm / stress_sq.sqrt()
        } else {
            pointwise_norm
        },
        tested,
    })
}

/// `½‖ū(T)‖² − ½‖ū(0)‖² = −(1−2λ)∫⟨∇v*, ∇ū⟩ dt`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyIdentity {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs| / ½‖u₀‖²`
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UnitViscosityRow {
    pub delta: f64,
    /// Multiplier of the unit-viscosity problem.
    pub lambda: f64,
    /// `∫⟨R̄, ∇v*⟩`
    pub pair_r_vstar: f64,
    /// `∫⟨R̄, ∇u⟩`
    pub pair_r_u: f64,
    /// `∫⟨∇u, ∇v*⟩`
    pub pair_u_vstar: f64,
    /// `max_j |∫⟨∇·R̄, φ_j⟩| / ‖φ_j‖_{L²(0,T;V)}`
    pub dual_proxy: f64,
    pub k_plus: f64,
    pub k_minus: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitViscosityReport {
    pub rows: Vec<UnitViscosityRow>,
    /// `∫⟨R̄, ∇v*⟩ ≤ ∫⟨∇u, ∇v*⟩` at the finest width, with 5% slack.
    pub inequality_holds: bool,
    /// `𝒦(v*) ≤ 𝒦(−v*)` at every width.
    pub minimality_holds: bool,
}

impl UnitViscosityReport {
    pub fn from_rows(rows: Vec<UnitViscosityRow>) -> Self {
        let inequality_holds = rows
            .last()
            .map(|r| r.pair_r_vstar <= r.pair_u_vstar + 0.05 * r.pair_u_vstar.abs())
            .unwrap_or(true);
        let minimality_holds = rows
            .iter()
            .all(|r| r.k_plus <= r.k_minus + 1e-12 * r.k_minus.abs());
        Self {
            rows,
            inequality_holds,
            minimality_holds,
        }
    }
}

/// Everything computed from one width's flux and minimizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthDiagnostics {
    pub solution: SolutionRecord,
    pub lagrange_ratios: Vec<Option<f64>>,
    pub el_residuals: Vec<f64>,
    /// `∫⟨(1−2λ)∇v* − ν∇u, ∇φ_j⟩`
    pub a: Vec<f64>,
    /// `∫⟨∇·R̄, φ_j⟩`
    pub b: Vec<f64>,
    /// `ν‖∇u‖ ‖∇φ_j‖` in `L²(0,T;L²)`, the normalization of `a` and `b`.
    pub scales: Vec<f64>,
    pub boussinesq: BoussinesqReport,
    pub energy_identity: EnergyIdentity,
    pub unit_viscosity: UnitViscosityRow,
}

impl WidthDiagnostics {
    pub fn max_abs_a(&self) -> f64 {
        self.a.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_b(&self) -> f64 {
        self.b.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_normalized_a(&self) -> f64 {
        self.a
            .iter()
            .zip(&self.scales)
            .map(|(a, s)| if *s > 0.0 { a.abs() / s } else { a.abs() })
            .fold(0.0, f64::max)
    }

    pub fn max_el_residual(&self) -> f64 {
        self.el_residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_boussinesq_tested(&self) -> f64 {
        self.boussinesq.tested.iter().copied().fold(0.0, f64::max)
    }

    /// Largest `|ratio − (1−2λ)|` over admissible basket elements.
    pub fn max_ratio_error(&self) -> f64 {
        self.lagrange_ratios
            .iter()
            .flatten()
            .map(|r| (r - self.solution.one_minus_two_lambda).abs())
            .fold(0.0, f64::max)
    }
}

/// Solve the minimization at one width and evaluate every diagnostic on it.
pub fn width_diagnostics(
    grid: &Grid,
    traj: &Trajectory,
    kernel: &FilterKernel,
    basket: &TestBasket,
    radius_sq: f64,
) -> Result<(MinimizerSolution, WidthDiagnostics)> {
    if traj.len() < 2 {
        return Err(Error::TooFewSnapshots {
            need: 2,
            got: traj.len(),
        });
    }
    let mut j = assemble_flux(grid, traj, kernel)?;
    let sol = solve_mp(grid, &j, radius_sq)?;
    let times = &traj.times;
    let weights = traj.weights();
    let nu = traj.spec.nu;

    let u_bar: Vec<SpectralField> = traj
        .snapshots
        .iter()
        .map(|u| filter(grid, u, kernel))
        .collect::<Result<_>>()?;
    let grad_u_norm = traj
        .snapshots
        .iter()
        .zip(&weights)
        .map(|(u, w)| w * grid.gradient_norm_sq(u))
        .sum::<f64>()
        .sqrt();

    let lagrange_ratios = match lagrange_ratio(grid, &sol, &j, basket) {
        Ok(r) => r,
        Err(Error::DegenerateBasket) => vec![None; basket.len()],
        Err(e) => return Err(e),
    };
    let el_residuals = el_residual(grid, &sol, &j, basket)?;
    let mut a = Vec::with_capacity(basket.len());
    let mut b = Vec::with_capacity(basket.len());
    let mut scales = Vec::with_capacity(basket.len());
    for e in &basket.elements {
        let pv = e.pair_gradient(grid, times, &weights, &sol.v_star);
        let pu = e.pair_gradient(grid, times, &weights, &traj.snapshots);
        let pj = e.pair_tensor(grid, times, &weights, &j.fields);
        let pub_ = e.pair_gradient(grid, times, &weights, &u_bar);
        a.push(sol.one_minus_two_lambda * pv - nu * pu);
        // ⟨∇·R̄, φ⟩ = −⟨R̄, ∇φ⟩ with R̄ = ν∇ū − J.
        b.push(pj - nu * pub_);
        scales.push(nu * grad_u_norm * e.gradient_norm(grid, times, &weights));
    }
    let boussinesq = boussinesq_residual(grid, traj, kernel, &j, &sol, basket)?;

    let e0 = traj.initial_energy;
    let last = traj.len() - 1;
    let lhs = 0.5 * grid.norm_sq(&u_bar[last]) - 0.5 * grid.norm_sq(&u_bar[0]);
    let rhs = -sol.one_minus_two_lambda
        * sol
            .v_star
            .iter()
            .zip(&u_bar)
            .zip(&weights)
            .map(|((v, ub), w)| w * grid.gradient_inner(v, ub))
            .sum::<f64>();
    let energy_identity = EnergyIdentity {
        lhs,
        rhs,
        residual: if e0 > 0.0 {
            (lhs - rhs).abs() / e0
        } else {
            (lhs - rhs).abs()
        },
    };

    // Unit-viscosity flux J¹ = J + (1 − ν)∇ū, reusing the buffers of J.
    for (jt, ub) in j.fields.iter_mut().zip(&u_bar) {
        jt.add_scaled(1.0 - nu, &grid.gradient(ub));
    }
    j.nu = 1.0;
    let unit_viscosity = unit_viscosity_row(grid, traj, &j, &u_bar, basket, radius_sq)?;

    let record = sol.record();
    Ok((
        sol,
        WidthDiagnostics {
            solution: record,
            lagrange_ratios,
            el_residuals,
            a,
            b,
            scales,
            boussinesq,
            energy_identity,
            unit_viscosity,
        },
    ))
}

fn unit_viscosity_row(
    grid: &Grid,
    traj: &Trajectory,
    j1: &FluxField,
    u_bar: &[SpectralField],
    basket: &TestBasket,
    radius_sq: f64,
) -> Result<UnitViscosityRow> {
    let sol = solve_mp(grid, j1, radius_sq)?;
    let weights = traj.weights();
    let (mut pair_r_vstar, mut pair_r_u, mut pair_u_vstar) = (0.0, 0.0, 0.0);
    for (t, ((u, jt), v)) in traj.snapshots.iter().zip(&j1.fields).zip(&sol.v_star).enumerate() {
        let mut r_bar = grid.gradient(&u_bar[t]);
        r_bar.add_scaled(-1.0, jt);
        pair_r_vstar += weights[t] * grid.inner(&r_bar, &grid.gradient(v));
        pair_r_u += weights[t] * grid.inner(&r_bar, &grid.gradient(u));
        pair_u_vstar += weights[t] * grid.gradient_inner(u, v);
    }
    let dual_proxy = basket
        .elements
        .iter()
        .map(|e| {
            let pj = e.pair_tensor(grid, &traj.times, &weights, &j1.fields);
            let pub_ = e.pair_gradient(grid, &traj.times, &weights, u_bar);
            let norm = e.gradient_norm(grid, &traj.times, &weights);
            if norm > 0.0 {
                (pj - pub_).abs() / norm
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    let minus: Vec<SpectralField> = sol.v_star.iter().map(|v| v.scaled(-1.0)).collect();
    Ok(UnitViscosityRow {
        delta: j1.delta,
        lambda: sol.lambda,
        pair_r_vstar,
        pair_r_u,
        pair_u_vstar,
        dual_proxy,
        k_plus: sol.k_value,
        k_minus: k_functional(grid, &j1.times, &minus, j1)?,
    })
}

/// Width-refinement view of the basket pairings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub widths: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub one_minus_two_lambda: Vec<f64>,
    /// `∫‖∇v*‖² dt` per width.
    pub enstrophy_proxy: Vec<f64>,
    /// `a[n][j]`, width-major.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub a_order: Vec<f64>,
    pub b_order: Vec<f64>,
    pub a_decreasing: Vec<bool>,
    pub b_decreasing: Vec<bool>,
    /// `max_j |a_last(j)| / (ν‖∇u‖ ‖∇φ_j‖)`
    pub final_a_normalized: f64,
}

impl ConvergenceReport {
    pub fn from_rows(rows: &[WidthDiagnostics]) -> Result<Self> {
        if rows.len() < 3 {
            return Err(Error::TooFewWidths {
                need: 3,
                got: rows.len(),
            });
        }
        let widths: Vec<f64> = rows.iter().map(|r| r.solution.delta).collect();
        let basket = rows[0].a.len();
        let column = |pick: &dyn Fn(&WidthDiagnostics) -> &Vec<f64>, j: usize| -> Vec<f64> {
            rows.iter().map(|r| pick(r)[j].abs()).collect()
        };
        let (mut a_order, mut b_order, mut a_dec, mut b_dec) = (vec![], vec![], vec![], vec![]);
        for j in 0..basket {
            let ca = column(&|r| &r.a, j);
            let cb = column(&|r| &r.b, j);
            a_order.push(fitted_order(&widths, &ca));
            b_order.push(fitted_order(&widths, &cb));
            a_dec.push(strictly_decreasing(&ca));
            b_dec.push(strictly_decreasing(&cb));
        }
        Ok(Self {
            lambdas: rows.iter().map(|r| r.solution.lambda).collect(),
            one_minus_two_lambda: rows.iter().map(|r| r.solution.one_minus_two_lambda).collect(),
            enstrophy_proxy: rows.iter().map(|r| r.solution.enstrophy_used).collect(),
            a: rows.iter().map(|r| r.a.clone()).collect(),
            b: rows.iter().map(|r| r.b.clone()).collect(),
            a_order,
            b_order,
            a_decreasing: a_dec,
            b_decreasing: b_dec,
            final_a_normalized: rows.last().map(|r| r.max_normalized_a()).unwrap_or(0.0),
            widths,
        })
    }
}

fn all_widths(
    grid: &Grid,
    traj: &Trajectory,
    kernels: &[FilterKernel],
    basket: &TestBasket,
    radius_sq: f64,
) -> Result<Vec<WidthDiagnostics>> {
    kernels
        .iter()
        .map(|k| width_diagnostics(grid, traj, k, basket, radius_sq).map(|(_, d)| d))
        .collect()
}

pub fn weak_convergence_diag(
    grid: &Grid,
    traj: &Trajectory,
    kernels: &[FilterKernel],
    basket: &TestBasket,
    radius_sq: f64,
) -> Result<ConvergenceReport> {
    if kernels.len() < 3 {
        return Err(Error::TooFewWidths {
            need: 3,
            got: kernels.len(),
        });
    }
    ConvergenceReport::from_rows(&all_widths(grid, traj, kernels, basket, radius_sq)?)
}

pub fn unit_viscosity_diagnostics(
    grid: &Grid,
    traj: &Trajectory,
    kernels: &[FilterKernel],
    basket: &TestBasket,
    radius_sq: f64,
) -> Result<UnitViscosityReport> {
    let rows = all_widths(grid, traj, kernels, basket, radius_sq)?;
    Ok(UnitViscosityReport::from_rows(rows.into_iter().map(|r| r.unit_viscosity).collect()))
}

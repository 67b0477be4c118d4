//! The dissipation functional, its enstrophy-ball constrained minimizer and
//! the diagnostics built on it.

mod basket;
mod diagnostics;
mod flux;
mod mp;
mod oracle;

pub use basket::{BasketElement, TestBasket};
pub use diagnostics::{
    boussinesq_residual, boussinesq_stress, el_residual, lagrange_ratio, unit_viscosity_diagnostics,
    weak_convergence_diag, width_diagnostics, BoussinesqReport, ConvergenceReport, EnergyIdentity,
    UnitViscosityReport, UnitViscosityRow, WidthDiagnostics,
};
pub use flux::{assemble_flux, assemble_flux_with_viscosity, FluxField};
pub use mp::{k_functional, poisson_potential, solution_gap, solve_mp, SolutionRecord, MinimizerSolution, ACTIVITY_TOLERANCE};
pub use oracle::{oracle_mp, OracleOptions, OracleReport};

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{InitKind, RunConfig};
use super::pipeline::{cmd_analyze, cmd_minimize, cmd_report, cmd_simulate, kkt_residual, RunDir, Summary};
use crate::dissipation::CrossValidation;
use crate::error::{Error, Result};
use crate::onsager::{
    k_functional, oracle_mp, poisson_potential, solution_gap, solve_mp, width_diagnostics, FluxField,
    OracleOptions, TestBasket,
};
use crate::spectral::{trapezoid_weights, Grid, RealField, SpectralField};

/// Pass thresholds for the built-in acceptance pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub spectral: f64,
    pub spectral_seconds: f64,
    pub analytic_energy: f64,
    pub simulate_seconds: f64,
    pub energy_equality: f64,
    pub resolved_balance: f64,
    pub dr_limit: f64,
    pub dr_order: f64,
    pub dr_gap: f64,
    pub dr_seconds: f64,
    pub oracle_gap: f64,
    pub oracle_spread: f64,
    pub kkt: f64,
    pub oracle_seconds: f64,
    pub parallelogram: f64,
    pub parallelogram_seconds: f64,
    pub lagrange_ratio: f64,
    pub el_residual: f64,
    pub boussinesq: f64,
    pub final_a: f64,
    pub energy_identity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            spectral: 1e-11,
            spectral_seconds: 10.0,
            analytic_energy: 1e-6,
            simulate_seconds: 120.0,
            energy_equality: 1e-6,
            resolved_balance: 1e-6,
            dr_limit: 1e-6,
            dr_order: 1.8,
            dr_gap: 0.1,
            dr_seconds: 300.0,
            oracle_gap: 1e-8,
            oracle_spread: 1e-8,
            kkt: 1e-10,
            oracle_seconds: 120.0,
            parallelogram: 1e-12,
            parallelogram_seconds: 10.0,
            lagrange_ratio: 1e-9,
            el_residual: 1e-10,
            boussinesq: 1e-9,
            final_a: 1e-4,
            energy_identity: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn load(path: &Path) -> Result<Self> {
        toml::from_str(&fs::read_to_string(path)?).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CriterionResult {
    fn new(id: u8, name: &str, passed: bool, detail: String) -> Self {
        Self {
            id,
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

fn le(x: f64, bound: f64) -> bool {
    x <= bound
}

/// Maximum defect over Parseval, transform round trip, projection
/// idempotence and symmetry, and exact differentiation of a single mode.
pub fn spectral_defect(grid: &Grid, seed: u64) -> f64 {
    let n = grid.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_k2 = (grid.cutoff() * grid.cutoff()) as f64;
    let f = grid.random_band_limited(3, max_k2, &mut rng);
    let g = grid.random_band_limited(3, max_k2, &mut rng);
    let scale = grid.norm_sq(&f);

    let samples = grid.inverse(&f);
    let parseval = (grid.grid_inner(&samples, &samples) - scale).abs() / scale;
    let round_trip = grid.forward(&samples).sub(&f).max_abs() / f.max_abs();

    let pf = grid.leray_project(&f);
    let idempotence = grid.leray_project(&pf).sub(&pf).max_abs() / f.max_abs();
    let pg = grid.leray_project(&g);
    let symmetry = (grid.inner(&pf, &g) - grid.inner(&f, &pg)).abs() / (scale * grid.norm_sq(&g)).sqrt();

    let k = [3.0, 2.0, 5.0];
    let phase = |x: [f64; 3]| k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
    let wave = grid.forward(&RealField::from_fn(n, 1, |_, x| phase(x).sin()));
    let grad = grid.inverse(&grid.gradient(&wave));
    let exact = RealField::from_fn(n, 3, |c, x| k[c] * phase(x).cos());
    let derivative = grad
        .comps()
        .iter()
        .zip(exact.comps())
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
        / 5.0;

    [parseval, round_trip, idempotence, symmetry, derivative]
        .into_iter()
        .fold(0.0, f64::max)
}

/// `max |¼∫‖∇(v−w)‖² − (½𝒦(v) + ½𝒦(w) − 𝒦((v+w)/2))|` relative to the left side.
pub fn parallelogram_defect(grid: &Grid, pairs: usize, seed: u64) -> Result<f64> {
    let times = [0.0, 0.3, 0.5];
    let weights = trapezoid_weights(&times);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let fields = times.iter().map(|_| grid.random_band_limited(9, 12.0, &mut rng)).collect();
        let j = FluxField::new(1.0, 1.0, times.to_vec(), fields)?;
        let mut draw = || -> Vec<SpectralField> {
            times
                .iter()
                .map(|_| grid.leray_project(&grid.random_band_limited(3, 12.0, &mut rng)))
                .collect()
        };
        let v = draw();
        let w = draw();
        let mid: Vec<_> = v.iter().zip(&w).map(|(a, b)| a.add(b).scaled(0.5)).collect();
        let lhs: f64 = weights
            .iter()
            .zip(v.iter().zip(&w))
            .map(|(c, (a, b))| c * grid.gradient_norm_sq(&a.sub(b)))
            .sum::<f64>()
            / 8.0;
        let rhs = 0.5 * k_functional(grid, &times, &v, &j)? + 0.5 * k_functional(grid, &times, &w, &j)?
            - k_functional(grid, &times, &mid, &j)?;
        worst = worst.max((lhs - rhs).abs() / lhs);
    }
    Ok(worst)
}

/// Oracle agreement on manufactured fluxes: `(gap, spread, kkt, interior, active)`.
pub fn manufactured_oracle_check(grid: &Grid, cases: usize, seed: u64) -> Result<(f64, f64, f64, usize, usize)> {
    let times = [0.0, 0.2, 0.5];
    let weights = trapezoid_weights(&times);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let options = OracleOptions::default();
    let (mut gap, mut spread, mut kkt) = (0.0f64, 0.0f64, 0.0f64);
    let (mut interior, mut active) = (0, 0);
    for case in 0..cases {
        let fields = times.iter().map(|_| grid.random_band_limited(9, 8.0, &mut rng)).collect();
        let j = FluxField::new(1.0, 1.0, times.to_vec(), fields)?;
        let w: f64 = j
            .fields
            .iter()
            .zip(&weights)
            .map(|(f, c)| c * grid.gradient_norm_sq(&poisson_potential(grid, f)))
            .sum();
        let radius_sq = if case % 2 == 0 { 4.0 * w } else { w / 9.0 };
        let exact = solve_mp(grid, &j, radius_sq)?;
        if exact.constraint_active {
            active += 1;
        } else {
            interior += 1;
        }
        let rep = oracle_mp(grid, &j, radius_sq, &options)?;
        gap = gap.max(solution_gap(grid, &rep.solution, &exact)?);
        spread = spread.max(rep.start_spread);
        kkt = kkt
            .max(kkt_residual(exact.lambda, exact.enstrophy_used, radius_sq))
            .max(kkt_residual(rep.solution.lambda, rep.solution.enstrophy_used, radius_sq));
    }
    Ok((gap, spread, kkt, interior, active))
}

/// Ratio, Euler-Lagrange, tested Boussinesq and energy-identity residuals at
/// the finest width with the radius shrunk until the constraint binds.
fn active_case(run: &RunDir) -> Result<(f64, f64, f64, f64, bool)> {
    let traj = run.load_trajectory()?;
    let ks = run.kernels()?;
    let k = ks.last().ok_or(Error::TooFewWidths { need: 1, got: 0 })?;
    let cfg = &run.config;
    let basket = TestBasket::new(&run.grid, cfg.grid.t_end, cfg.basket.size, cfg.basket.max_mode, cfg.basket.seed);
    let (free, _) = width_diagnostics(&run.grid, &traj, k, &basket, f64::MAX)?;
    let radius = free.enstrophy_used / 4.0;
    if radius <= 0.0 {
        return Err(Error::InvalidRadius(radius));
    }
    let (sol, d) = width_diagnostics(&run.grid, &traj, k, &basket, radius)?;
    Ok((
        d.max_ratio_error(),
        d.max_el_residual(),
        d.max_boussinesq_tested(),
        d.energy_identity.residual,
        sol.constraint_active,
    ))
}

fn pipeline(config: &RunConfig, with_oracle: bool) -> Result<(PathBuf, Summary)> {
    let dir = cmd_simulate(config)?;
    cmd_analyze(&dir)?;
    cmd_minimize(&dir, with_oracle)?;
    let summary = cmd_report(&dir)?;
    Ok((dir, summary))
}

fn determinism_config(dir: PathBuf) -> RunConfig {
    let mut cfg = RunConfig::beltrami_reference(dir);
    cfg.grid.n = 16;
    cfg.grid.t_end = 0.02;
    cfg.grid.snapshot_stride = 5;
    cfg.init.kind = InitKind::RandomBand;
    cfg.init.seed = Some(11);
    cfg.init.spectrum_slope = Some(-5.0 / 3.0);
    cfg.init.k_min = Some(1.0);
    cfg.init.k_max = Some(4.0);
    cfg.filters.count = 3;
    cfg.minimizer.oracle.iters = 2000;
    cfg.basket.size = 4;
    cfg
}

fn tree_bytes(dir: &Path) -> Result<Vec<(PathBuf, Vec<u8>)>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d)? {
            let p = e?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap_or(&p).to_path_buf();
                out.push((rel, fs::read(&p)?));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn files_identical(a: &Path, b: &Path) -> Result<(bool, usize)> {
    let (x, y) = (tree_bytes(a)?, tree_bytes(b)?);
    // Config copies differ only in their output directory.
    let strip = |v: Vec<(PathBuf, Vec<u8>)>| -> Vec<(PathBuf, Vec<u8>)> {
        v.into_iter().filter(|(p, _)| p != Path::new(super::pipeline::CONFIG_FILE)).collect()
    };
    let (x, y) = (strip(x), strip(y));
    Ok((x == y, x.len()))
}

fn dr_check(cv: &CrossValidation, tol: &Tolerances) -> (bool, String) {
    let scale = cv.dissipation_scale;
    let rel = |x: f64| if scale > 0.0 { x.abs() / scale } else { x.abs() };
    let (ls, lt) = (rel(cv.structure_function_limit), rel(cv.stress_strain_limit));
    let passed = le(ls, tol.dr_limit)
        && le(lt, tol.dr_limit)
        && cv.structure_function_order >= tol.dr_order
        && cv.stress_strain_order >= tol.dr_order
        && le(cv.gap, tol.dr_gap);
    (
        passed,
        format!(
            "limits {ls:.2e}/{lt:.2e} (<= {:.0e}), orders {:.2}/{:.2} (>= {}), gap {:.2e} (<= {})",
            tol.dr_limit,
            cv.structure_function_order,
            cv.stress_strain_order,
            tol.dr_order,
            cv.gap,
            tol.dr_gap
        ),
    )
}

/// Run the built-in acceptance pipeline under `work` and print one line per
/// criterion.
pub fn cmd_verify(work: &Path, tol: &Tolerances, out: &mut dyn Write) -> Result<Vec<CriterionResult>> {
    fs::create_dir_all(work)?;
    let mut results = Vec::new();
    let mut emit = |r: CriterionResult, out: &mut dyn Write| -> Result<()> {
        writeln!(
            out,
            "{:>2} {:<28} {}  {}",
            r.id,
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        )?;
        results.push(r);
        Ok(())
    };

    let clock = Instant::now();
    let grid = Grid::new(32)?;
    let defect = spectral_defect(&grid, 1);
    let secs = clock.elapsed().as_secs_f64();
    emit(
        CriterionResult::new(
            1,
            "spectral substrate",
            le(defect, tol.spectral) && le(secs, tol.spectral_seconds),
            format!("max defect {defect:.2e}, {secs:.1} s"),
        ),
        out,
    )?;

    let beltrami = RunConfig::beltrami_reference(work.join("beltrami"));
    let clock = Instant::now();
    let dir = cmd_simulate(&beltrami)?;
    let sim_secs = clock.elapsed().as_secs_f64();
    cmd_analyze(&dir)?;
    cmd_minimize(&dir, false)?;
    let s = cmd_report(&dir)?;
    let analytic = s.analytic_energy_error.unwrap_or(f64::NAN);
    emit(
        CriterionResult::new(
            2,
            "analytic flow",
            le(analytic, tol.analytic_energy) && le(sim_secs, tol.simulate_seconds),
            format!("energy error {analytic:.2e}, {sim_secs:.1} s"),
        ),
        out,
    )?;
    emit(
        CriterionResult::new(
            3,
            "global energy equality",
            le(s.energy_residual, tol.energy_equality),
            format!("residual {:.2e}", s.energy_residual),
        ),
        out,
    )?;
    emit(
        CriterionResult::new(
            4,
            "resolved balance",
            le(s.balance_residual, tol.resolved_balance),
            format!("residual {:.2e} over {} widths", s.balance_residual, s.widths.len()),
        ),
        out,
    )?;

    let mut tg = RunConfig::beltrami_reference(work.join("taylor_green"));
    tg.init.kind = InitKind::TaylorGreen;
    let clock = Instant::now();
    let tg_dir = cmd_simulate(&tg)?;
    let table = cmd_analyze(&tg_dir)?;
    let tg_info = RunDir::open(&tg_dir)?;
    let scale = {
        let traj = tg_info.load_trajectory()?;
        let w = traj.weights();
        traj.spec.nu
            * traj
                .snapshots
                .iter()
                .zip(&w)
                .map(|(u, w)| w * tg_info.grid.gradient_norm_sq(u))
                .sum::<f64>()
    };
    let cv = CrossValidation::from_integrals(
        table.column("delta")?,
        table.column("dr_structure_function")?,
        table.column("dr_stress_strain")?,
        scale,
    )?;
    let dr_secs = clock.elapsed().as_secs_f64();
    let (passed, detail) = dr_check(&cv, tol);
    emit(
        CriterionResult::new(
            5,
            "dissipation estimators",
            passed && le(dr_secs, tol.dr_seconds),
            format!("{detail}, {dr_secs:.1} s"),
        ),
        out,
    )?;

    let clock = Instant::now();
    let small = Grid::new(16)?;
    let (gap, spread, kkt, interior, active) = manufactured_oracle_check(&small, 10, 3)?;
    let secs = clock.elapsed().as_secs_f64();
    emit(
        CriterionResult::new(
            6,
            "minimizer oracle",
            le(gap, tol.oracle_gap)
                && le(spread, tol.oracle_spread)
                && le(kkt, tol.kkt)
                && interior > 0
                && active > 0
                && le(secs, tol.oracle_seconds),
            format!("gap {gap:.2e}, spread {spread:.2e}, kkt {kkt:.2e}, {interior}+{active} cases, {secs:.1} s"),
        ),
        out,
    )?;

    let clock = Instant::now();
    let para = parallelogram_defect(&small, 100, 5)?;
    let secs = clock.elapsed().as_secs_f64();
    emit(
        CriterionResult::new(
            7,
            "parallelogram identity",
            le(para, tol.parallelogram) && le(secs, tol.parallelogram_seconds),
            format!("max defect {para:.2e}, {secs:.1} s"),
        ),
        out,
    )?;

    let run = RunDir::open(&dir)?;
    let (ratio_a, el_a, bous_a, ident_a, bound) = active_case(&run)?;
    let ratio = s.ratio_error.max(ratio_a);
    emit(
        CriterionResult::new(
            8,
            "lagrange ratio",
            le(ratio, tol.lagrange_ratio) && bound,
            format!("interior {:.2e}, active {ratio_a:.2e}", s.ratio_error),
        ),
        out,
    )?;
    let el = s.el_residual.max(el_a);
    let bous = s.boussinesq_tested.max(bous_a);
    emit(
        CriterionResult::new(
            9,
            "euler-lagrange residual",
            le(el, tol.el_residual) && le(bous, tol.boussinesq),
            format!("el {el:.2e}, tested stress {bous:.2e}"),
        ),
        out,
    )?;
    emit(
        CriterionResult::new(
            10,
            "weak convergence",
            s.widths.len() == 4
                && s.a_decreasing
                && s.b_decreasing
                && s.a_order_min > 0.0
                && s.b_order_min > 0.0
                && le(s.final_a_normalized, tol.final_a),
            format!(
                "decreasing a/b {}/{}, min order {:.2}/{:.2}, final a {:.2e}",
                s.a_decreasing, s.b_decreasing, s.a_order_min, s.b_order_min, s.final_a_normalized
            ),
        ),
        out,
    )?;

    let (da, db) = (work.join("repeat_a"), work.join("repeat_b"));
    pipeline(&determinism_config(da.clone()), true)?;
    pipeline(&determinism_config(db.clone()), true)?;
    let (same, files) = files_identical(&da, &db)?;
    emit(
        CriterionResult::new(11, "determinism", same, format!("{files} files compared")),
        out,
    )?;

    let ident = s.energy_identity_residual.max(ident_a);
    emit(
        CriterionResult::new(
            12,
            "minimizer energy identity",
            le(ident, tol.energy_identity),
            format!("interior {:.2e}, active {ident_a:.2e}", s.energy_identity_residual),
        ),
        out,
    )?;
    Ok(results)
}

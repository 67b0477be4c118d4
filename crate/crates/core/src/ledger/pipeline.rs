use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{InitKind, RunConfig};
use super::table::{flag, Table};
use crate::coarse_grain::{
    filtered_state, kernels, local_balance_test, resolved_balance, stress_psd_defect, width_schedule,
    FilterKernel, ScalarTestFunction,
};
use crate::dissipation::{dr_structure_function_integral, CrossValidation};
use crate::error::{Error, Result};
use crate::ns::{simulate_with, EnergyRow, Trajectory};
use crate::onsager::{
    assemble_flux, oracle_mp, solution_gap, width_diagnostics, ConvergenceReport, TestBasket,
    WidthDiagnostics,
};
use crate::snapshot;
use crate::spectral::Grid;
use crate::stats::fitted_order;

pub const CONFIG_FILE: &str = "config.toml";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const TIME_LEDGER: &str = "ledger_time.csv";
pub const ANALYSIS_LEDGER: &str = "analysis.csv";
pub const ANALYSIS_JSON: &str = "analysis.json";
pub const MINIMIZER_DIR: &str = "minimizer";
pub const MINIMIZE_LEDGER: &str = "minimize.csv";
pub const MINIMIZE_JSON: &str = "minimize.json";
pub const WIDTH_LEDGER: &str = "ledger_width.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_TABLE: &str = "summary.txt";
pub const PLOT_DIR: &str = "plots";
pub const LOCK_FILE: &str = ".nsel.lock";

pub const TIME_COLUMNS: [&str; 4] = ["t", "energy", "dissipation", "residual"];

pub const ANALYSIS_COLUMNS: [&str; 13] = [
    "delta",
    "balance_lhs",
    "balance_rhs",
    "balance_residual",
    "balance_residual_rel",
    "resolved_dissipation",
    "flux",
    "stress_norm",
    "stress_psd_defect",
    "transfer",
    "transfer_imbalance",
    "dr_structure_function",
    "dr_stress_strain",
];

pub const MINIMIZE_COLUMNS: [&str; 23] = [
    "delta",
    "lambda",
    "one_minus_two_lambda",
    "enstrophy_used",
    "radius_sq",
    "k_value",
    "constraint_active",
    "kkt_residual",
    "max_abs_a",
    "max_abs_b",
    "max_normalized_a",
    "el_residual",
    "ratio_error",
    "boussinesq_tested",
    "boussinesq_pointwise_rel",
    "energy_identity_residual",
    "unit_lambda",
    "unit_pair_r_vstar",
    "unit_pair_u_vstar",
    "unit_dual_proxy",
    "oracle_gap",
    "oracle_converged",
    "oracle_spread",
];

/// Exclusive claim on a run directory, released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(path)),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// A run directory with its stored configuration.
#[derive(Clone, Debug)]
pub struct RunDir {
    pub path: PathBuf,
    pub config: RunConfig,
    pub grid: Grid,
}

impl RunDir {
    pub fn open(path: &Path) -> Result<Self> {
        let cfg_path = path.join(CONFIG_FILE);
        if !cfg_path.is_file() {
            return Err(Error::EmptyRun(path.to_path_buf()));
        }
        let config = RunConfig::load(&cfg_path)?;
        let grid = config.grid.grid()?;
        Ok(Self {
            path: path.to_path_buf(),
            config,
            grid,
        })
    }

    fn require(&self, file: &str, stage: &'static str) -> Result<PathBuf> {
        let p = self.path.join(file);
        if p.exists() {
            Ok(p)
        } else {
            Err(Error::MissingStage {
                stage,
                dir: self.path.clone(),
            })
        }
    }

    pub fn snapshot_paths(&self) -> Result<Vec<PathBuf>> {
        let dir = self.path.join(SNAPSHOT_DIR);
        if !dir.is_dir() {
            return Err(Error::EmptyRun(self.path.clone()));
        }
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        paths.retain(|p| p.extension().is_some_and(|x| x == "nsel"));
        paths.sort();
        if paths.is_empty() {
            return Err(Error::EmptyRun(self.path.clone()));
        }
        Ok(paths)
    }

    /// Reload the stored snapshots as a divergence-free, dealiased trajectory.
    pub fn load_trajectory(&self) -> Result<Trajectory> {
        let mut times = Vec::new();
        let mut snapshots = Vec::new();
        for p in self.snapshot_paths()? {
            let (t, field) = snapshot::read(&p)?;
            if field.n() != self.grid.n() || field.ncomp() != 3 {
                return Err(Error::ShapeMismatch {
                    expected: format!("3 components on {}^3", self.grid.n()),
                    found: format!("{} components on {}^3 in {}", field.ncomp(), field.n(), p.display()),
                });
            }
            let mut u = self.grid.leray_project(&self.grid.forward(&field));
            self.grid.dealias_in_place(&mut u);
            times.push(t);
            snapshots.push(u);
        }
        Trajectory::from_snapshots(self.config.grid.clone(), times, snapshots)
    }

    pub fn kernels(&self) -> Result<Vec<FilterKernel>> {
        let widths = width_schedule(self.config.filters.delta0, self.config.filters.count, &self.grid);
        if widths.is_empty() {
            return Err(Error::TooFewWidths { need: 1, got: 0 });
        }
        kernels(&widths, &self.grid)
    }
}

fn clear_outputs(dir: &Path) -> Result<()> {
    for sub in [SNAPSHOT_DIR, MINIMIZER_DIR, PLOT_DIR] {
        let p = dir.join(sub);
        if p.exists() {
            fs::remove_dir_all(p)?;
        }
    }
    for file in [
        TIME_LEDGER,
        ANALYSIS_LEDGER,
        ANALYSIS_JSON,
        MINIMIZE_LEDGER,
        MINIMIZE_JSON,
        WIDTH_LEDGER,
        SUMMARY_JSON,
        SUMMARY_TABLE,
    ] {
        let p = dir.join(file);
        if p.exists() {
            fs::remove_file(p)?;
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn time_table(rows: &[EnergyRow]) -> Result<Table> {
    let mut table = Table::new(&TIME_COLUMNS);
    for r in rows {
        table.push(vec![r.t, r.energy, r.dissipation, r.residual])?;
    }
    Ok(table)
}

/// Integrate the configured flow and persist snapshots, the per-time
/// ledger and a copy of the configuration. Returns the run directory.
pub fn cmd_simulate(config: &RunConfig) -> Result<PathBuf> {
    config.validate()?;
    let dir = config.run_dir();
    fs::create_dir_all(&dir)?;
    let _lock = RunLock::acquire(&dir)?;
    clear_outputs(&dir)?;
    fs::write(dir.join(CONFIG_FILE), config.to_toml()?)?;
    let snap_dir = dir.join(SNAPSHOT_DIR);
    fs::create_dir_all(&snap_dir)?;

    let grid = config.grid.grid()?;
    let ic = config.initial_condition()?;
    let mut rows = Vec::new();
    let result = simulate_with(&ic, &config.grid, |row, u| {
        let path = snap_dir.join(format!("u_{:06}.nsel", rows.len()));
        snapshot::write(&path, row.t, &grid.inverse(u))?;
        rows.push(*row);
        Ok(())
    });
    time_table(&rows)?.write(&dir.join(TIME_LEDGER))?;
    result.map(|_| dir)
}

pub fn cmd_simulate_file(config_path: &Path) -> Result<PathBuf> {
    cmd_simulate(&RunConfig::load(config_path)?)
}

/// Scalars shared by the later stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub widths: Vec<f64>,
    pub snapshots: usize,
    /// `½‖u(0)‖²`
    pub initial_energy: f64,
    /// `ν ∫∫ |∇u|²` over the stored snapshots.
    pub dissipation_scale: f64,
    /// Largest relative energy-equality residual on the snapshot grid.
    pub snapshot_energy_residual: f64,
}

/// Per-width resolved balance, stress statistics and both dissipation
/// estimators.
pub fn cmd_analyze(run_dir: &Path) -> Result<Table> {
    let run = RunDir::open(run_dir)?;
    let _lock = RunLock::acquire(&run.path)?;
    let traj = run.load_trajectory()?;
    let ks = run.kernels()?;
    let grid = &run.grid;
    let weights = traj.weights();
    let e0 = traj.initial_energy;
    let constant = ScalarTestFunction::constant(grid, 1.0);

    let mut table = Table::new(&ANALYSIS_COLUMNS);
    for k in &ks {
        let balance = resolved_balance(grid, &traj, k)?;
        let local = local_balance_test(grid, &traj, k, &constant)?;
        let (mut sf, mut ss, mut stress) = (0.0, 0.0, 0.0);
        let mut psd = 0.0f64;
        for (u, w) in traj.snapshots.iter().zip(&weights) {
            let st = filtered_state(grid, u, k)?;
            ss -= w * grid.inner(&grid.gradient(&st.u_bar), &st.r_bar);
            stress += w * grid.norm_sq(&st.r_bar);
            psd = match stress_psd_defect(grid, &st.r_bar, k) {
                Some(d) if !psd.is_nan() => psd.max(d),
                _ => f64::NAN,
            };
            sf += w * dr_structure_function_integral(grid, u, k)?;
        }
        table.push(vec![
            k.delta(),
            balance.lhs,
            balance.rhs,
            balance.residual,
            relative(balance.residual, e0),
            balance.dissipation,
            balance.flux,
            stress.sqrt(),
            psd,
            local.transfer,
            local.imbalance.abs(),
            sf,
            ss,
        ])?;
    }
    table.write(&run.path.join(ANALYSIS_LEDGER))?;

    let scale = traj.spec.nu
        * traj
            .snapshots
            .iter()
            .zip(&weights)
            .map(|(u, w)| w * grid.gradient_norm_sq(u))
            .sum::<f64>();
    write_json(
        &run.path.join(ANALYSIS_JSON),
        &AnalysisRecord {
            widths: ks.iter().map(|k| k.delta()).collect(),
            snapshots: traj.len(),
            initial_energy: e0,
            dissipation_scale: scale,
            snapshot_energy_residual: traj.max_energy_residual(),
        },
    )?;
    Ok(table)
}

fn relative(x: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        x.abs() / scale
    } else {
        x.abs()
    }
}

/// Oracle comparison at one width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub gap: f64,
    pub converged: bool,
    pub start_spread: f64,
    pub iterations: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeRecord {
    pub radius_sq: f64,
    pub basket_seed: u64,
    pub basket_size: usize,
    pub widths: Vec<WidthDiagnostics>,
    pub oracle: Vec<Option<OracleRecord>>,
}

/// Solve the minimization at every width, persist `v*` and the diagnostics.
pub fn cmd_minimize(run_dir: &Path, with_oracle: bool) -> Result<MinimizeRecord> {
    let run = RunDir::open(run_dir)?;
    run.require(ANALYSIS_LEDGER, "analyze")?;
    run.require(ANALYSIS_JSON, "analyze")?;
    let _lock = RunLock::acquire(&run.path)?;
    let traj = run.load_trajectory()?;
    let ks = run.kernels()?;
    let grid = &run.grid;
    let cfg = &run.config;
    let radius_sq = cfg.minimizer.radius_override.unwrap_or(traj.initial_energy);
    let basket = TestBasket::new(
        grid,
        cfg.grid.t_end,
        cfg.basket.size,
        cfg.basket.max_mode,
        cfg.basket.seed,
    );

    let out = run.path.join(MINIMIZER_DIR);
    if out.exists() {
        fs::remove_dir_all(&out)?;
    }
    let mut table = Table::new(&MINIMIZE_COLUMNS);
    let mut record = MinimizeRecord {
        radius_sq,
        basket_seed: cfg.basket.seed,
        basket_size: cfg.basket.size,
        widths: Vec::new(),
        oracle: Vec::new(),
    };
    for (i, k) in ks.iter().enumerate() {
        let (sol, diag) = width_diagnostics(grid, &traj, k, &basket, radius_sq)?;
        let wdir = out.join(format!("w{i:02}"));
        fs::create_dir_all(&wdir)?;
        for (s, (t, v)) in sol.times.iter().zip(&sol.v_star).enumerate() {
            snapshot::write(&wdir.join(format!("v_{s:06}.nsel")), *t, &grid.inverse(v))?;
        }
        write_json(&wdir.join("solution.json"), &diag.solution)?;

        let oracle = if with_oracle {
            let j = assemble_flux(grid, &traj, k)?;
            let rep = oracle_mp(grid, &j, radius_sq, &cfg.minimizer.oracle)?;
            Some(OracleRecord {
                gap: solution_gap(grid, &rep.solution, &sol)?,
                converged: rep.converged,
                start_spread: rep.start_spread,
                iterations: rep.iterations,
            })
        } else {
            None
        };
        let s = &diag.solution;
        let u = &diag.unit_viscosity;
        let (gap, conv, spread) = match &oracle {
            Some(o) => (o.gap, flag(o.converged), o.start_spread),
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        table.push(vec![
            s.delta,
            s.lambda,
            s.one_minus_two_lambda,
            s.enstrophy_used,
            s.radius_sq,
            s.k_value,
            flag(s.constraint_active),
            kkt_residual(s.lambda, s.enstrophy_used, s.radius_sq),
            diag.max_abs_a(),
            diag.max_abs_b(),
            diag.max_normalized_a(),
            diag.max_el_residual(),
            diag.max_ratio_error(),
            diag.max_boussinesq_tested(),
            diag.boussinesq.relative_pointwise,
            diag.energy_identity.residual,
            u.lambda,
            u.pair_r_vstar,
            u.pair_u_vstar,
            u.dual_proxy,
            gap,
            conv,
            spread,
        ])?;
        record.widths.push(diag);
        record.oracle.push(oracle);
    }
    table.write(&run.path.join(MINIMIZE_LEDGER))?;
    write_json(&run.path.join(MINIMIZE_JSON), &record)?;
    Ok(record)
}

/// `|λ (∫‖∇v*‖² − r)| / r`
pub fn kkt_residual(lambda: f64, enstrophy_used: f64, radius_sq: f64) -> f64 {
    (lambda * (enstrophy_used - radius_sq)).abs() / radius_sq
}

/// Every quantity the acceptance checks read from a single run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub nu: f64,
    pub t_end: f64,
    pub widths: Vec<f64>,
    pub initial_energy: f64,
    pub radius_sq: f64,
    /// Largest deviation of `E(t)/E(0)` from `exp(−2νt)`; only for unit-wavenumber ABC flows.
    pub analytic_energy_error: Option<f64>,
    pub energy_residual: f64,
    pub balance_residual: f64,
    pub transfer_imbalance: f64,
    pub stress_psd_defect: f64,
    pub stress_order: f64,
    pub dissipation_scale: f64,
    pub dr: Option<CrossValidation>,
    pub dr_structure_function_limit_rel: f64,
    pub dr_stress_strain_limit_rel: f64,
    pub lambda_max: f64,
    pub kkt_residual: f64,
    pub oracle_gap: Option<f64>,
    pub oracle_spread: Option<f64>,
    pub oracle_converged: Option<bool>,
    pub ratio_error: f64,
    pub el_residual: f64,
    pub boussinesq_tested: f64,
    pub convergence: Option<ConvergenceReport>,
    pub a_decreasing: bool,
    pub b_decreasing: bool,
    pub a_order_min: f64,
    pub b_order_min: f64,
    pub final_a_normalized: f64,
    pub energy_identity_residual: f64,
    pub unit_pairing_inequality: bool,
    pub unit_minimality: bool,
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().fold(f64::NEG_INFINITY, |m, x| if x.is_nan() { f64::NAN } else { m.max(*x) })
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().fold(f64::INFINITY, |m, x| if x.is_nan() { f64::NAN } else { m.min(*x) })
}

/// Join the stage outputs into the per-width ledger, a JSON summary, a
/// text table and plot data files.
pub fn cmd_report(run_dir: &Path) -> Result<Summary> {
    let run = RunDir::open(run_dir)?;
    let time_path = run.require(TIME_LEDGER, "simulate")?;
    let analysis_path = run.require(ANALYSIS_LEDGER, "analyze")?;
    let analysis_json = run.require(ANALYSIS_JSON, "analyze")?;
    let min_path = run.require(MINIMIZE_LEDGER, "minimize")?;
    let min_json = run.require(MINIMIZE_JSON, "minimize")?;
    let _lock = RunLock::acquire(&run.path)?;

    let time = Table::read(&time_path)?;
    let analysis = Table::read(&analysis_path)?;
    let minimize = Table::read(&min_path)?;
    let info: AnalysisRecord = read_json(&analysis_json)?;
    let record: MinimizeRecord = read_json(&min_json)?;
    if analysis.rows.len() != minimize.rows.len() || record.widths.len() != minimize.rows.len() {
        return Err(Error::LedgerSchema(format!(
            "{} analysis rows against {} minimizer rows",
            analysis.rows.len(),
            minimize.rows.len()
        )));
    }

    let mut joined_cols: Vec<&str> = ANALYSIS_COLUMNS.to_vec();
    joined_cols.extend(MINIMIZE_COLUMNS.iter().skip(1));
    let mut joined = Table::new(&joined_cols);
    for (a, m) in analysis.rows.iter().zip(&minimize.rows) {
        if a[0] != m[0] {
            return Err(Error::LedgerSchema(format!("width {} does not match {}", a[0], m[0])));
        }
        let mut row = a.clone();
        row.extend_from_slice(&m[1..]);
        joined.push(row)?;
    }
    joined.write(&run.path.join(WIDTH_LEDGER))?;

    let cfg = &run.config;
    let widths = analysis.column("delta")?;
    let sf = analysis.column("dr_structure_function")?;
    let ss = analysis.column("dr_stress_strain")?;
    let dr = CrossValidation::from_integrals(widths.clone(), sf, ss, info.dissipation_scale).ok();
    let scale = info.dissipation_scale;
    let convergence = ConvergenceReport::from_rows(&record.widths).ok();
    let unit_rows = record.widths.iter().map(|w| w.unit_viscosity).collect::<Vec<_>>();
    let unit = crate::onsager::UnitViscosityReport::from_rows(unit_rows);
    let oracles: Vec<&OracleRecord> = record.oracle.iter().flatten().collect();

    let analytic_energy_error = match cfg.init.kind {
        InitKind::BeltramiAbc => {
            let t = time.column("t")?;
            let e = time.column("energy")?;
            let e0 = e[0];
            Some(max_of(
                &t.iter()
                    .zip(&e)
                    .map(|(t, e)| relative(e - e0 * (-2.0 * cfg.grid.nu * t).exp(), e0))
                    .collect::<Vec<_>>(),
            ))
        }
        _ => None,
    };

    let summary = Summary {
        n: cfg.grid.n,
        nu: cfg.grid.nu,
        t_end: cfg.grid.t_end,
        widths: widths.clone(),
        initial_energy: info.initial_energy,
        radius_sq: record.radius_sq,
        analytic_energy_error,
        energy_residual: max_of(&time.column("residual")?),
        balance_residual: max_of(&analysis.column("balance_residual_rel")?),
        transfer_imbalance: max_of(&analysis.column("transfer_imbalance")?),
        stress_psd_defect: max_of(&analysis.column("stress_psd_defect")?),
        stress_order: fitted_order(&widths, &analysis.column("stress_norm")?),
        dissipation_scale: scale,
        dr_structure_function_limit_rel: dr
            .as_ref()
            .map_or(f64::NAN, |d| relative(d.structure_function_limit, scale)),
        dr_stress_strain_limit_rel: dr.as_ref().map_or(f64::NAN, |d| relative(d.stress_strain_limit, scale)),
        dr,
        lambda_max: max_of(&minimize.column("lambda")?),
        kkt_residual: max_of(&minimize.column("kkt_residual")?),
        oracle_gap: (!oracles.is_empty()).then(|| max_of(&oracles.iter().map(|o| o.gap).collect::<Vec<_>>())),
        oracle_spread: (!oracles.is_empty())
            .then(|| max_of(&oracles.iter().map(|o| o.start_spread).collect::<Vec<_>>())),
        oracle_converged: (!oracles.is_empty()).then(|| oracles.iter().all(|o| o.converged)),
        ratio_error: max_of(&minimize.column("ratio_error")?),
        el_residual: max_of(&minimize.column("el_residual")?),
        boussinesq_tested: max_of(&minimize.column("boussinesq_tested")?),
        a_decreasing: convergence.as_ref().is_some_and(|c| c.a_decreasing.iter().all(|x| *x)),
        b_decreasing: convergence.as_ref().is_some_and(|c| c.b_decreasing.iter().all(|x| *x)),
        a_order_min: convergence.as_ref().map_or(f64::NAN, |c| min_of(&c.a_order)),
        b_order_min: convergence.as_ref().map_or(f64::NAN, |c| min_of(&c.b_order)),
        final_a_normalized: record.widths.last().map_or(f64::NAN, |w| w.max_normalized_a()),
        convergence,
        energy_identity_residual: max_of(&minimize.column("energy_identity_residual")?),
        unit_pairing_inequality: unit.inequality_holds,
        unit_minimality: unit.minimality_holds,
    };

    write_json(&run.path.join(SUMMARY_JSON), &summary)?;
    fs::write(run.path.join(SUMMARY_TABLE), summary_table(&summary, &joined)?)?;
    write_plots(&run.path.join(PLOT_DIR), &time, &joined, &record)?;
    Ok(summary)
}

fn summary_table(s: &Summary, joined: &Table) -> Result<String> {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "run: n = {}, nu = {}, T = {}, E0 = {:.6e}", s.n, s.nu, s.t_end, s.initial_energy);
    let _ = writeln!(out, "radius_sq = {:.6e}", s.radius_sq);
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:>12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "delta", "bal_res", "dr_sf", "dr_ss", "lambda", "enstrophy", "max|a|", "max|b|"
    );
    let cols = [
        "delta",
        "balance_residual_rel",
        "dr_structure_function",
        "dr_stress_strain",
        "lambda",
        "enstrophy_used",
        "max_abs_a",
        "max_abs_b",
    ];
    let data = cols.iter().map(|c| joined.column(c)).collect::<Result<Vec<_>>>()?;
    for i in 0..joined.rows.len() {
        let line: Vec<String> = data.iter().map(|c| format!("{:>12.4e}", c[i])).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    let _ = writeln!(out);
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3e}"));
    let lines = [
        ("analytic energy error", opt(s.analytic_energy_error)),
        ("energy equality residual", format!("{:.3e}", s.energy_residual)),
        ("resolved balance residual", format!("{:.3e}", s.balance_residual)),
        ("stress order", format!("{:.3}", s.stress_order)),
        ("dr structure-function limit (rel)", format!("{:.3e}", s.dr_structure_function_limit_rel)),
        ("dr stress-strain limit (rel)", format!("{:.3e}", s.dr_stress_strain_limit_rel)),
        (
            "dr orders",
            s.dr.as_ref().map_or("n/a".into(), |d| {
                format!("{:.3} / {:.3}", d.structure_function_order, d.stress_strain_order)
            }),
        ),
        ("dr cross gap", s.dr.as_ref().map_or("n/a".into(), |d| format!("{:.3e}", d.gap))),
        ("max lambda", format!("{:.3e}", s.lambda_max)),
        ("kkt residual", format!("{:.3e}", s.kkt_residual)),
        ("oracle gap", opt(s.oracle_gap)),
        ("ratio error", format!("{:.3e}", s.ratio_error)),
        ("el residual", format!("{:.3e}", s.el_residual)),
        ("boussinesq tested", format!("{:.3e}", s.boussinesq_tested)),
        ("a decreasing / b decreasing", format!("{} / {}", s.a_decreasing, s.b_decreasing)),
        ("min order a / b", format!("{:.3} / {:.3}", s.a_order_min, s.b_order_min)),
        ("final normalized a", format!("{:.3e}", s.final_a_normalized)),
        ("energy identity residual", format!("{:.3e}", s.energy_identity_residual)),
        (
            "unit-viscosity pairing / minimality",
            format!("{} / {}", s.unit_pairing_inequality, s.unit_minimality),
        ),
    ];
    for (k, v) in lines {
        let _ = writeln!(out, "{k:<36} {v}");
    }
    Ok(out)
}

fn write_dat(path: &Path, columns: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "# {}", columns.join(" "));
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_plots(dir: &Path, time: &Table, joined: &Table, record: &MinimizeRecord) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_dat(&dir.join("energy.dat"), &TIME_COLUMNS, time.rows.iter().cloned())?;
    let cols = [
        "delta",
        "stress_norm",
        "dr_structure_function",
        "dr_stress_strain",
        "lambda",
        "one_minus_two_lambda",
        "enstrophy_used",
        "max_abs_a",
        "max_abs_b",
    ];
    let data = cols.iter().map(|c| joined.column(c)).collect::<Result<Vec<_>>>()?;
    write_dat(
        &dir.join("widths.dat"),
        &cols,
        (0..joined.rows.len()).map(|i| data.iter().map(|c| c[i]).collect()),
    )?;
    let size = record.widths.first().map_or(0, |w| w.a.len());
    let mut names = vec!["delta".to_string()];
    names.extend((0..size).map(|j| format!("e{j}")));
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    for (file, pick) in [
        ("basket_a.dat", (|w: &WidthDiagnostics| w.a.clone()) as fn(&WidthDiagnostics) -> Vec<f64>),
        ("basket_b.dat", |w: &WidthDiagnostics| w.b.clone()),
    ] {
        write_dat(
            &dir.join(file),
            &names,
            record.widths.iter().map(|w| {
                let mut row = vec![w.solution.delta];
                row.extend(pick(w).iter().map(|x| x.abs()));
                row
            }),
        )?;
    }
    Ok(())
}


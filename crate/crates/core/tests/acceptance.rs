//! End-to-end acceptance checks. Prints one line per criterion and exits
//! with a failure status when any criterion is not met.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use nsel_core::coarse_grain::{kernels, width_schedule};
use nsel_core::ledger::config::InitKind;
use nsel_core::ledger::pipeline::{
    MinimizeRecord, RunDir, ANALYSIS_LEDGER, CONFIG_FILE, MINIMIZE_JSON, TIME_LEDGER,
};
use nsel_core::ledger::{cmd_analyze, cmd_minimize, cmd_report, cmd_simulate, RunConfig, Table};
use nsel_core::onsager::{
    assemble_flux, k_functional, oracle_mp, poisson_potential, solve_mp, width_diagnostics, FluxField,
    MinimizerSolution, OracleOptions, TestBasket,
};
use nsel_core::spectral::{trapezoid_weights, VOLUME};
use nsel_core::{Grid, RealField, SpectralField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

struct Beltrami {
    dir: PathBuf,
    sim_seconds: f64,
    record: MinimizeRecord,
}

fn beltrami(root: &Path) -> Result<Beltrami, Box<dyn std::error::Error>> {
    let cfg = RunConfig::beltrami_reference(root.join("beltrami"));
    let clock = Instant::now();
    let dir = cmd_simulate(&cfg)?;
    let sim_seconds = clock.elapsed().as_secs_f64();
    cmd_analyze(&dir)?;
    cmd_minimize(&dir, false)?;
    cmd_report(&dir)?;
    let record = serde_json::from_str(&fs::read_to_string(dir.join(MINIMIZE_JSON))?)?;
    Ok(Beltrami {
        dir,
        sim_seconds,
        record,
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let clock = Instant::now();
    let n = 32;
    let g = Grid::new(n)?;
    let h3 = (2.0 * std::f64::consts::PI / n as f64).powi(3);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..4 {
        let f = g.random_band_limited(3, 100.0, &mut rng);
        let q = g.random_band_limited(1, 100.0, &mut rng);
        let x = g.inverse(&f);
        let physical: f64 = x.comps().iter().flatten().map(|v| v * v).sum::<f64>() * h3;
        let spectral: f64 = VOLUME * f.comps().iter().flatten().map(|z| z.norm_sqr()).sum::<f64>();
        worst = worst.max((physical - spectral).abs() / spectral);
        worst = worst.max(g.forward(&x).sub(&f).max_abs() / f.max_abs());

        let pf = g.leray_project(&f);
        worst = worst.max(g.leray_project(&pf).sub(&pf).max_abs() / f.max_abs());
        worst = worst.max(g.divergence(&pf).max_abs() / f.max_abs());
        let other = g.random_band_limited(3, 100.0, &mut rng);
        let lhs = g.inner(&pf, &other);
        let rhs = g.inner(&f, &g.leray_project(&other));
        worst = worst.max((lhs - rhs).abs() / (g.norm_sq(&f) * g.norm_sq(&other)).sqrt());
        worst = worst.max(g.leray_project(&g.gradient(&q)).max_abs() / g.gradient(&q).max_abs());
    }
    let k = [3.0, -2.0, 5.0];
    let phase = |p: [f64; 3]| k[0] * p[0] + k[1] * p[1] + k[2] * p[2];
    let s = g.forward(&RealField::from_fn(n, 1, |_, p| phase(p).sin()));
    let grad = g.inverse(&g.gradient(&s));
    let lap = g.inverse(&g.laplacian(&s));
    let k2: f64 = k.iter().map(|v| v * v).sum();
    for c in 0..3 {
        let exact = RealField::from_fn(n, 1, |_, p| k[c] * phase(p).cos());
        worst = worst.max(max_abs_diff(&grad.comps()[c], &exact.comps()[0]) / k2.sqrt());
    }
    let exact = RealField::from_fn(n, 1, |_, p| -k2 * phase(p).sin());
    worst = worst.max(max_abs_diff(&lap.comps()[0], &exact.comps()[0]) / k2);
    let secs = clock.elapsed().as_secs_f64();
    Ok((worst <= 1e-11 && secs < 10.0, format!("max defect {worst:.2e} in {secs:.2} s")))
}

fn criterion_2(b: &Beltrami) -> Outcome {
    let t = Table::read(&b.dir.join(TIME_LEDGER))?;
    let nu = 0.1;
    let e0 = 0.5 * 3.0 * VOLUME;
    let worst = t
        .column("t")?
        .iter()
        .zip(t.column("energy")?)
        .map(|(t, e)| (e - e0 * (-2.0 * nu * t).exp()).abs() / e0)
        .fold(0.0, f64::max);
    Ok((
        worst <= 1e-6 && b.sim_seconds <= 120.0,
        format!("max relative energy error {worst:.2e}, simulation {:.1} s", b.sim_seconds),
    ))
}

fn criterion_3(b: &Beltrami) -> Outcome {
    let t = Table::read(&b.dir.join(TIME_LEDGER))?;
    let e = t.column("energy")?;
    let d = t.column("dissipation")?;
    let e0 = e[0];
    let worst = e
        .iter()
        .zip(&d)
        .map(|(e, d)| (e + d - e0).abs() / e0.abs())
        .fold(0.0, f64::max);
    Ok((worst <= 1e-6, format!("max residual {worst:.2e} over {} times", e.len())))
}

fn criterion_4(b: &Beltrami) -> Outcome {
    let a = Table::read(&b.dir.join(ANALYSIS_LEDGER))?;
    let e0 = 0.5 * 3.0 * VOLUME;
    let lhs = a.column("balance_lhs")?;
    let rhs = a.column("balance_rhs")?;
    let worst = lhs.iter().zip(&rhs).map(|(l, r)| (l - r).abs() / e0).fold(0.0, f64::max);
    let g = Grid::new(32)?;
    let expected = width_schedule(std::f64::consts::PI, 4, &g).len();
    Ok((
        worst <= 1e-6 && lhs.len() == expected,
        format!("max residual {worst:.2e} over {} widths", lhs.len()),
    ))
}

fn romberg(v: &[f64]) -> f64 {
    let m = v.len();
    let (i1, i2, i3) = (v[m - 3], v[m - 2], v[m - 1]);
    let r1 = (4.0 * i2 - i1) / 3.0;
    let r2 = (4.0 * i3 - i2) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

fn slope(widths: &[f64], values: &[f64]) -> f64 {
    let x: Vec<f64> = widths.iter().map(|w| w.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.abs().ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn criterion_5(root: &Path) -> Outcome {
    let clock = Instant::now();
    let mut cfg = RunConfig::beltrami_reference(root.join("taylor_green"));
    cfg.init.kind = InitKind::TaylorGreen;
    let dir = cmd_simulate(&cfg)?;
    let a = cmd_analyze(&dir)?;
    let time = Table::read(&dir.join(TIME_LEDGER))?;
    let scale = *time.column("dissipation")?.last().ok_or("empty ledger")?;
    let widths = a.column("delta")?;
    let sf = a.column("dr_structure_function")?;
    let ss = a.column("dr_stress_strain")?;
    let (lsf, lss) = (romberg(&sf).abs() / scale, romberg(&ss).abs() / scale);
    let (osf, oss) = (slope(&widths, &sf), slope(&widths, &ss));
    let last = sf.len() - 1;
    let gap = (sf[last] - ss[last]).abs() / scale;
    let secs = clock.elapsed().as_secs_f64();
    Ok((
        lsf <= 1e-6 && lss <= 1e-6 && osf >= 1.8 && oss >= 1.8 && gap <= 0.1 && secs <= 300.0,
        format!(
            "limits {lsf:.2e}/{lss:.2e}, orders {osf:.2}/{oss:.2}, gap {gap:.2e}, {secs:.1} s"
        ),
    ))
}

fn gap(g: &Grid, a: &MinimizerSolution, b: &MinimizerSolution) -> f64 {
    let w = trapezoid_weights(&b.times);
    let num: f64 = a
        .v_star
        .iter()
        .zip(&b.v_star)
        .zip(&w)
        .map(|((x, y), w)| w * g.gradient_norm_sq(&x.sub(y)))
        .sum();
    num / b.enstrophy_used.max(f64::MIN_POSITIVE)
}

fn criterion_6() -> Outcome {
    let clock = Instant::now();
    let g = Grid::new(16)?;
    let times = [0.0, 0.25, 0.5];
    let w = trapezoid_weights(&times);
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (mut worst_gap, mut worst_spread, mut worst_kkt) = (0.0f64, 0.0f64, 0.0f64);
    let (mut interior, mut active) = (0, 0);
    for case in 0..10 {
        let fields = times
            .iter()
            .map(|_| g.random_band_limited(9, 8.0, &mut rng).scaled(1.0 + case as f64))
            .collect();
        let j = FluxField::new(0.5, 1.0, times.to_vec(), fields)?;
        let unconstrained: f64 = j
            .fields
            .iter()
            .zip(&w)
            .map(|(f, c)| c * g.gradient_norm_sq(&poisson_potential(&g, f)))
            .sum();
        let radius = if case % 2 == 0 { 2.0 * unconstrained } else { unconstrained / 5.0 };
        let exact = solve_mp(&g, &j, radius)?;
        let o = oracle_mp(&g, &j, radius, &OracleOptions::default())?;
        if exact.constraint_active {
            active += 1;
        } else {
            interior += 1;
        }
        worst_gap = worst_gap.max(gap(&g, &o.solution, &exact));
        worst_spread = worst_spread.max(o.start_spread);
        for s in [&exact, &o.solution] {
            worst_kkt = worst_kkt.max((s.lambda * (s.enstrophy_used - radius)).abs() / radius);
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    Ok((
        worst_gap <= 1e-8 && worst_spread <= 1e-8 && worst_kkt <= 1e-10 && interior > 0 && active > 0 && secs <= 120.0,
        format!(
            "gap {worst_gap:.2e}, spread {worst_spread:.2e}, kkt {worst_kkt:.2e}, {interior} interior + {active} active, {secs:.1} s"
        ),
    ))
}

fn criterion_7() -> Outcome {
    let clock = Instant::now();
    let g = Grid::new(16)?;
    let times = [0.0, 0.4, 1.0];
    let w = trapezoid_weights(&times);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let fields = times.iter().map(|_| g.random_band_limited(9, 10.0, &mut rng)).collect();
        let j = FluxField::new(0.5, 1.0, times.to_vec(), fields)?;
        let draw = |rng: &mut ChaCha8Rng| -> Vec<SpectralField> {
            times
                .iter()
                .map(|_| g.leray_project(&g.random_band_limited(3, 10.0, rng)))
                .collect()
        };
        let v = draw(&mut rng);
        let u = draw(&mut rng);
        let mid: Vec<_> = v.iter().zip(&u).map(|(a, b)| a.add(b).scaled(0.5)).collect();
        let quarter: f64 = v
            .iter()
            .zip(&u)
            .zip(&w)
            .map(|((a, b), c)| c * g.gradient_norm_sq(&a.sub(b)))
            .sum::<f64>()
            / 4.0;
        let rhs = 2.0
            * (0.5 * k_functional(&g, &times, &v, &j)? + 0.5 * k_functional(&g, &times, &u, &j)?
                - k_functional(&g, &times, &mid, &j)?);
        worst = worst.max((quarter - rhs).abs() / quarter);
    }
    let secs = clock.elapsed().as_secs_f64();
    Ok((worst <= 1e-12 && secs < 10.0, format!("max defect {worst:.2e} in {secs:.2} s")))
}

struct ActiveCase {
    ratio_error: f64,
    el: f64,
    boussinesq: f64,
    identity: f64,
    active: bool,
}

fn active_case(b: &Beltrami) -> Result<ActiveCase, Box<dyn std::error::Error>> {
    let run = RunDir::open(&b.dir)?;
    let traj = run.load_trajectory()?;
    let g = &run.grid;
    let widths = width_schedule(std::f64::consts::PI, 4, g);
    let ks = kernels(&widths[widths.len() - 1..], g)?;
    let basket = TestBasket::standard(g, traj.spec.t_end);
    let interior = b.record.widths.last().ok_or("no widths")?.solution.enstrophy_used;
    let radius = interior / 4.0;
    let (sol, d) = width_diagnostics(g, &traj, &ks[0], &basket, radius)?;
    let j = assemble_flux(g, &traj, &ks[0])?;
    let w = traj.weights();
    let mut ratio_error = 0.0f64;
    for e in &basket.elements {
        let num = e.pair_tensor(g, &traj.times, &w, &j.fields);
        let den = e.pair_gradient(g, &traj.times, &w, &sol.v_star);
        if den.abs() > 1e-12 * e.gradient_norm(g, &traj.times, &w) * sol.enstrophy_used.sqrt() {
            ratio_error = ratio_error.max((num / den - sol.one_minus_two_lambda).abs());
        }
    }
    Ok(ActiveCase {
        ratio_error,
        el: d.max_el_residual(),
        boussinesq: d.max_boussinesq_tested(),
        identity: d.energy_identity.residual,
        active: sol.constraint_active && sol.lambda < 0.0,
    })
}

fn criterion_8(b: &Beltrami, a: &ActiveCase) -> Outcome {
    let mut interior = 0.0f64;
    let mut tested = 0;
    for w in &b.record.widths {
        for r in w.lagrange_ratios.iter().flatten() {
            interior = interior.max((r - w.solution.one_minus_two_lambda).abs());
            tested += 1;
        }
    }
    Ok((
        interior <= 1e-9 && a.ratio_error <= 1e-9 && a.active && tested > 0,
        format!("interior {interior:.2e} ({tested} ratios), active {:.2e}", a.ratio_error),
    ))
}

fn criterion_9(b: &Beltrami, a: &ActiveCase) -> Outcome {
    let el = b
        .record
        .widths
        .iter()
        .flat_map(|w| w.el_residuals.iter().copied())
        .fold(a.el, f64::max);
    let tested = b
        .record
        .widths
        .iter()
        .flat_map(|w| w.boussinesq.tested.iter().map(|x| x.abs()))
        .fold(a.boussinesq, f64::max);
    Ok((el <= 1e-10 && tested <= 1e-9, format!("el residual {el:.2e}, tested stress {tested:.2e}")))
}

fn criterion_10(b: &Beltrami) -> Outcome {
    let rows = &b.record.widths;
    let widths: Vec<f64> = rows.iter().map(|r| r.solution.delta).collect();
    let size = rows[0].a.len();
    let (mut a_ok, mut b_ok) = (true, true);
    let (mut a_order, mut b_order) = (f64::INFINITY, f64::INFINITY);
    for j in 0..size {
        let ca: Vec<f64> = rows.iter().map(|r| r.a[j].abs()).collect();
        let cb: Vec<f64> = rows.iter().map(|r| r.b[j].abs()).collect();
        a_ok &= ca.windows(2).all(|w| w[1] < w[0]);
        b_ok &= cb.windows(2).all(|w| w[1] < w[0]);
        a_order = a_order.min(slope(&widths, &ca));
        b_order = b_order.min(slope(&widths, &cb));
    }
    let last = rows.last().ok_or("no widths")?;
    let final_a = last
        .a
        .iter()
        .zip(&last.scales)
        .map(|(a, s)| a.abs() / s)
        .fold(0.0, f64::max);
    Ok((
        rows.len() == 4 && a_ok && b_ok && a_order > 0.0 && b_order > 0.0 && final_a <= 1e-4,
        format!(
            "a decreasing {a_ok} (order {a_order:.2}), b decreasing {b_ok} (order {b_order:.2}), final normalized a {final_a:.2e}"
        ),
    ))
}

fn tree(dir: &Path) -> std::io::Result<Vec<(PathBuf, Vec<u8>)>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d)? {
            let p = e?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p)?));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn criterion_11(root: &Path) -> Outcome {
    let dir = root.join("repeat");
    let mut cfg = RunConfig::beltrami_reference(dir.clone());
    cfg.grid.n = 16;
    cfg.grid.t_end = 0.05;
    cfg.grid.snapshot_stride = 10;
    cfg.init.kind = InitKind::RandomBand;
    cfg.init.seed = Some(5);
    cfg.init.spectrum_slope = Some(-2.0);
    cfg.init.k_min = Some(1.0);
    cfg.init.k_max = Some(5.0);
    cfg.filters.count = 3;
    cfg.minimizer.oracle.iters = 3000;
    let run = |cfg: &RunConfig| -> Result<Vec<(PathBuf, Vec<u8>)>, Box<dyn std::error::Error>> {
        let d = cmd_simulate(cfg)?;
        cmd_analyze(&d)?;
        cmd_minimize(&d, true)?;
        cmd_report(&d)?;
        Ok(tree(&d)?)
    };
    let first = run(&cfg)?;
    let second = std::thread::spawn(move || run(&cfg).map_err(|e| e.to_string())).join().unwrap()?;
    let same = first == second;
    let has_config = first.iter().any(|(p, _)| p == Path::new(CONFIG_FILE));
    Ok((
        same && has_config,
        format!("{} files, identical {same}", first.len()),
    ))
}

fn criterion_12(b: &Beltrami, a: &ActiveCase) -> Outcome {
    let worst = b
        .record
        .widths
        .iter()
        .map(|w| w.energy_identity.residual)
        .fold(a.identity, f64::max);
    Ok((worst <= 1e-6, format!("max residual {worst:.2e}")))
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let root = tmp.path();
    let mut all = true;
    let mut report = |id: u8, name: &str, outcome: Outcome| {
        let (passed, detail) = match outcome {
            Ok(x) => x,
            Err(e) => (false, format!("error: {e}")),
        };
        all &= passed;
        println!(
            "criterion {id:>2} {:<4} {name}: {detail}",
            if passed { "PASS" } else { "FAIL" }
        );
    };

    report(1, "spectral substrate", criterion_1());
    let run = beltrami(root);
    let active = run.as_ref().ok().map(active_case);
    let shared = |f: &dyn Fn(&Beltrami) -> Outcome| match &run {
        Ok(b) => f(b),
        Err(e) => Err(e.to_string().into()),
    };
    let with_active = |f: &dyn Fn(&Beltrami, &ActiveCase) -> Outcome| match (&run, &active) {
        (Ok(b), Some(Ok(a))) => f(b, a),
        (Err(e), _) => Err(e.to_string().into()),
        (_, Some(Err(e))) => Err(e.to_string().into()),
        _ => Err("no active case".into()),
    };
    report(2, "analytic flow", shared(&criterion_2));
    report(3, "global energy equality", shared(&criterion_3));
    report(4, "resolved balance", shared(&criterion_4));
    report(5, "dissipation estimators", criterion_5(root));
    report(6, "minimizer oracle", criterion_6());
    report(7, "parallelogram identity", criterion_7());
    report(8, "lagrange ratio", with_active(&criterion_8));
    report(9, "euler-lagrange residual", with_active(&criterion_9));
    report(10, "weak convergence", shared(&criterion_10));
    report(11, "determinism", criterion_11(root));
    report(12, "minimizer energy identity", with_active(&criterion_12));

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Browser bindings: filter multipliers, a coarse-grained stress slice and
//! the minimizer's response to the enstrophy radius.

use nsel_core::coarse_grain::{make_kernel, reynolds_stress};
use nsel_core::ns::make_initial;
use nsel_core::onsager::{solve_mp, FluxField};
use nsel_core::{Grid, InitialCondition, RealField, Result};
use wasm_bindgen::prelude::*;

/// Grid size used by the stress and minimizer views.
pub const DEMO_N: usize = 16;

/// `[k, m(k)]` pairs along the positive x axis of an `n³` grid.
pub fn multiplier_profile(delta: f64, n: usize) -> Result<Vec<f64>> {
    let grid = Grid::new(n)?;
    let kernel = make_kernel(delta, &grid)?;
    let m = kernel.multiplier();
    let mut out = Vec::with_capacity(n);
    for k in 0..=n / 2 {
        let idx = grid.index_of([k as i64, 0, 0]);
        out.push(k as f64);
        out.push(m[idx]);
    }
    Ok(out)
}

/// Frobenius norm of the subfilter stress of a Taylor-Green field on the
/// `z = 0` plane, row-major in `(y, x)`.
pub fn stress_slice(delta: f64, amplitude: f64) -> Result<Vec<f64>> {
    let grid = Grid::new(DEMO_N)?;
    let u = make_initial(&InitialCondition::taylor_green(amplitude), &grid)?;
    let kernel = make_kernel(delta, &grid)?;
    let r = grid.inverse(&reynolds_stress(&grid, &u, &kernel)?);
    let plane = DEMO_N * DEMO_N;
    Ok((0..plane)
        .map(|idx| r.comps().iter().map(|c| c[idx] * c[idx]).sum::<f64>().sqrt())
        .collect())
}

fn sample_flux(grid: &Grid, amplitude: f64) -> Result<FluxField> {
    let times = vec![0.0, 0.5, 1.0];
    let fields = times
        .iter()
        .map(|t| {
            let f = RealField::from_fn(grid.n(), 9, |c, [x, y, z]| {
                let (i, j) = (c / 3, c % 3);
                let phase = (i + 1) as f64 * x + (j + 1) as f64 * y - z + t;
                amplitude * (phase.sin() + 0.5 * (2.0 * z - x).cos() * (1.0 + t))
            });
            grid.forward(&f)
        })
        .collect();
    FluxField::new(1.0, 1.0, times, fields)
}

/// `[r, λ, ∫‖∇v*‖²]` triples for `count` radii spaced logarithmically in
/// `[r_min, r_max]`.
pub fn radius_sweep(r_min: f64, r_max: f64, count: usize, amplitude: f64) -> Result<Vec<f64>> {
    let grid = Grid::new(DEMO_N)?;
    let j = sample_flux(&grid, amplitude)?;
    let count = count.max(2);
    let (a, b) = (r_min.ln(), r_max.ln());
    let mut out = Vec::with_capacity(3 * count);
    for i in 0..count {
        let r = (a + (b - a) * i as f64 / (count - 1) as f64).exp();
        let sol = solve_mp(&grid, &j, r)?;
        out.extend([r, sol.lambda, sol.enstrophy_used]);
    }
    Ok(out)
}

fn js(e: nsel_core::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen(js_name = multiplierProfile)]
pub fn multiplier_profile_js(delta: f64, n: usize) -> std::result::Result<Vec<f64>, JsValue> {
    multiplier_profile(delta, n).map_err(js)
}

#[wasm_bindgen(js_name = stressSlice)]
pub fn stress_slice_js(delta: f64, amplitude: f64) -> std::result::Result<Vec<f64>, JsValue> {
    stress_slice(delta, amplitude).map_err(js)
}

#[wasm_bindgen(js_name = radiusSweep)]
pub fn radius_sweep_js(r_min: f64, r_max: f64, count: usize, amplitude: f64) -> std::result::Result<Vec<f64>, JsValue> {
    radius_sweep(r_min, r_max, count, amplitude).map_err(js)
}

#[wasm_bindgen(js_name = demoGridSize)]
pub fn demo_grid_size() -> usize {
    DEMO_N
}

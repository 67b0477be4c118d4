//! Accelerated projected gradient on the discretized functional, used to
//! check the closed-form minimizer.
//!
//! Variables are the Fourier coefficients of `v` on the dealiased band, one
//! block per snapshot. The objective is
//! `F(x) = Σ_t w_t (2π)³ Σ_k (½|k|²|x̂|² + Re(conj(d̂)·x̂))` with
//! `d = P(∇·J)`, and the feasible set `Σ_t w_t (2π)³ Σ_k |k|²|x̂|² ≤ r` is an
//! ellipsoid, onto which the Euclidean projection is `x̂/(1 + μ w_t |k|²)`
//! for the unique root `μ ≥ 0` of the constraint.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::flux::FluxField;
use super::mp::{k_functional, MinimizerSolution, ACTIVITY_TOLERANCE};
use crate::error::{Error, Result};
use crate::spectral::{Grid, SpectralField, VOLUME};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleOptions {
    pub iters: usize,
    pub starts: usize,
    pub seed: u64,
    /// Stop when the gradient-mapping norm drops below this fraction of
    /// the norm of the linear term.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    1e-10
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            iters: 20_000,
            starts: 3,
            seed: 7,
            tolerance: default_tolerance(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleReport {
    pub solution: MinimizerSolution,
    pub converged: bool,
    pub iterations: Vec<usize>,
    /// Final relative gradient-mapping norm per start.
    pub gradient_norms: Vec<f64>,
    /// Objective value per start.
    pub values: Vec<f64>,
    /// `max_a ∫‖∇(v_a − v_best)‖² / ∫‖∇v_best‖²` over starts.
    pub start_spread: f64,
}

type Series = Vec<Vec<Complex64>>;

struct Problem {
    band: Vec<usize>,
    k2: Vec<f64>,
    weights: Vec<f64>,
    d: Series,
    radius_sq: f64,
    max_k2: usize,
}

impl Problem {
    fn nb(&self) -> usize {
        self.band.len()
    }

    fn zeros(&self) -> Series {
        vec![vec![Complex64::new(0.0, 0.0); 3 * self.nb()]; self.weights.len()]
    }

    fn k2_at(&self, i: usize) -> f64 {
        self.k2[i % self.nb()]
    }

    /// `Σ_t w_t (2π)³ Σ |k|² |x̂|²`.
    fn enstrophy(&self, x: &Series) -> f64 {
        let mut acc = 0.0;
        for (w, xt) in self.weights.iter().zip(x) {
            let s: f64 = xt.iter().enumerate().map(|(i, z)| self.k2_at(i) * z.norm_sqr()).sum();
            acc += w * s;
        }
        VOLUME * acc
    }

    fn value(&self, x: &Series) -> f64 {
        let mut acc = 0.0;
        for ((w, xt), dt) in self.weights.iter().zip(x).zip(&self.d) {
            let s: f64 = xt
                .iter()
                .zip(dt)
                .enumerate()
                .map(|(i, (z, d))| 0.5 * self.k2_at(i) * z.norm_sqr() + (d.conj() * z).re)
                .sum();
            acc += w * s;
        }
        VOLUME * acc
    }

    fn gradient(&self, x: &Series, out: &mut Series) {
        for (((w, xt), dt), gt) in self.weights.iter().zip(x).zip(&self.d).zip(out.iter_mut()) {
            for (i, ((z, d), g)) in xt.iter().zip(dt).zip(gt.iter_mut()).enumerate() {
                *g = (z * self.k2_at(i) + d) * *w;
            }
        }
    }

    /// Euclidean projection onto the ellipsoid, in place.
    fn project(&self, x: &mut Series) {
        let a = self.enstrophy(x);
        if a <= self.radius_sq {
            return;
        }
        // Energy per snapshot and per shell |k|².
        let mut shells = vec![vec![0.0; self.max_k2 + 1]; x.len()];
        for (xt, sh) in x.iter().zip(shells.iter_mut()) {
            for (i, z) in xt.iter().enumerate() {
                sh[self.k2_at(i) as usize] += z.norm_sqr();
            }
        }
        let phi = |mu: f64| {
            let (mut f, mut df) = (0.0, 0.0);
            for (w, sh) in self.weights.iter().zip(&shells) {
                for (k2, e) in sh.iter().enumerate() {
                    if *e == 0.0 {
                        continue;
                    }
                    let c = w * k2 as f64;
                    let q = 1.0 + mu * c;
                    f += k2 as f64 * w * e / (q * q);
                    df -= 2.0 * k2 as f64 * w * e * c / (q * q * q);
                }
            }
            (VOLUME * f, VOLUME * df)
        };
        // φ is convex and decreasing, so Newton from μ = 0 approaches the
        // root from the left without overshooting.
        let mut mu = 0.0;
        for _ in 0..500 {
            let (f, df) = phi(mu);
            if f <= self.radius_sq || df == 0.0 {
                break;
            }
            let next = mu - (f - self.radius_sq) / df;
            if next <= mu * (1.0 + 1e-16) {
                break;
            }
            mu = next;
        }
        for (w, xt) in self.weights.iter().zip(x.iter_mut()) {
            for (i, z) in xt.iter_mut().enumerate() {
                *z /= 1.0 + mu * w * self.k2_at(i);
            }
        }
        let a = self.enstrophy(x);
        if a > self.radius_sq {
            let s = (self.radius_sq / a).sqrt();
            for z in x.iter_mut().flatten() {
                *z *= s;
            }
        }
    }

    fn norm(x: &Series) -> f64 {
        (VOLUME * x.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    fn expand(&self, grid: &Grid, x: &Series) -> Vec<SpectralField> {
        x.iter()
            .map(|xt| {
                let mut f = SpectralField::zeros(grid.n(), 3);
                for c in 0..3 {
                    let dst = f.comp_mut(c);
                    for (b, &idx) in self.band.iter().enumerate() {
                        dst[idx] = xt[c * self.nb() + b];
                    }
                }
                f
            })
            .collect()
    }

    fn compact(&self, f: &SpectralField) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(3 * self.nb());
        for c in 0..3 {
            out.extend(self.band.iter().map(|&idx| f.comp(c)[idx]));
        }
        out
    }
}

struct Run {
    x: Series,
    iterations: usize,
    gradient_norm: f64,
    converged: bool,
}

fn fista(p: &Problem, mut x: Series, iters: usize, tol: f64) -> Run {
    p.project(&mut x);
    let mut y = x.clone();
    let mut g = p.zeros();
    let mut x_new = p.zeros();
    let mut t = 1.0f64;
    let mut lip = 1.0f64;
    let mut last_norm = f64::INFINITY;
    for it in 0..iters {
        p.gradient(&y, &mut g);
        // Backtracking on the exact quadratic remainder ½⟨Δ, HΔ⟩ ≤ (L/2)‖Δ‖².
        loop {
            for ((xn, yt), gt) in x_new.iter_mut().zip(&y).zip(&g) {
                for ((a, b), c) in xn.iter_mut().zip(yt).zip(gt) {
                    *a = b - c / lip;
                }
            }
            p.project(&mut x_new);
            let (mut curv, mut sq) = (0.0, 0.0);
            for ((w, xn), yt) in p.weights.iter().zip(&x_new).zip(&y) {
                for (i, (a, b)) in xn.iter().zip(yt).enumerate() {
                    let d = (a - b).norm_sqr();
                    curv += w * p.k2_at(i) * d;
                    sq += d;
                }
            }
            if curv <= lip * sq * (1.0 + 1e-12) {
                break;
            }
            lip *= 2.0;
        }
        let step_norm = lip
            * (VOLUME
                * x_new
                    .iter()
                    .flatten()
                    .zip(y.iter().flatten())
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>())
            .sqrt();
        // Restart momentum when it points uphill.
        let mut uphill = 0.0;
        for ((yt, xn), xo) in y.iter().zip(&x_new).zip(&x) {
            for ((a, b), c) in yt.iter().zip(xn).zip(xo) {
                uphill += ((a - b).conj() * (b - c)).re;
            }
        }
        let t_next = if uphill > 0.0 {
            1.0
        } else {
            0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
        };
        let beta = if uphill > 0.0 { 0.0 } else { (t - 1.0) / t_next };
        for ((yt, xn), xo) in y.iter_mut().zip(&x_new).zip(&x) {
            for ((a, b), c) in yt.iter_mut().zip(xn).zip(xo) {
                *a = b + (b - c) * beta;
            }
        }
        std::mem::swap(&mut x, &mut x_new);
        t = t_next;
        if step_norm <= tol {
            // Confirm with the gradient mapping at the iterate itself.
            let gm = gradient_mapping(p, &x, lip);
            last_norm = gm;
            if gm <= tol {
                return Run {
                    x,
                    iterations: it + 1,
                    gradient_norm: gm,
                    converged: true,
                };
            }
        }
        lip *= 0.9;
    }
    if last_norm.is_infinite() {
        last_norm = gradient_mapping(p, &x, lip);
    }
    Run {
        x,
        iterations: iters,
        gradient_norm: last_norm,
        converged: last_norm <= tol,
    }
}

fn gradient_mapping(p: &Problem, x: &Series, lip: f64) -> f64 {
    let mut g = p.zeros();
    p.gradient(x, &mut g);
    let mut z: Series = x
        .iter()
        .zip(&g)
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| u - v / lip).collect())
        .collect();
    p.project(&mut z);
    let diff: Series = x
        .iter()
        .zip(&z)
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v) * lip).collect())
        .collect();
    Problem::norm(&diff)
}

pub fn oracle_mp(grid: &Grid, j: &FluxField, radius_sq: f64, options: &OracleOptions) -> Result<OracleReport> {
    if !(radius_sq.is_finite() && radius_sq > 0.0) {
        return Err(Error::InvalidRadius(radius_sq));
    }
    let band: Vec<usize> = (0..grid.len())
        .filter(|&i| grid.in_band(i) && grid.k2(i) > 0.0)
        .collect();
    let k2: Vec<f64> = band.iter().map(|&i| grid.k2(i)).collect();
    let max_k2 = k2.iter().copied().fold(0.0, f64::max) as usize;
    let mut p = Problem {
        band,
        k2,
        weights: j.weights(),
        d: Vec::new(),
        radius_sq,
        max_k2,
    };
    p.d = j
        .fields
        .iter()
        .map(|f| p.compact(&grid.leray_project(&grid.divergence(f))))
        .collect();
    let linear: Series = p
        .d
        .iter()
        .zip(&p.weights)
        .map(|(dt, w)| dt.iter().map(|z| z * *w).collect())
        .collect();
    let scale = Problem::norm(&linear);
    let tol = options.tolerance * scale;

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut runs = Vec::with_capacity(options.starts.max(1));
    for start in 0..options.starts.max(1) {
        let x0 = if start == 0 || scale == 0.0 {
            p.zeros()
        } else {
            let fields: Vec<SpectralField> = p
                .weights
                .iter()
                .map(|_| {
                    let c = grid.cutoff() as f64;
                    grid.leray_project(&grid.random_band_limited(3, 3.0 * c * c, &mut rng))
                })
                .collect();
            let mut x: Series = fields.iter().map(|f| p.compact(f)).collect();
            let e = p.enstrophy(&x);
            let s = (radius_sq * rng.gen_range(0.2..2.0) / e).sqrt();
            for z in x.iter_mut().flatten() {
                *z *= s;
            }
            x
        };
        if scale == 0.0 {
            runs.push(Run {
                x: x0,
                iterations: 0,
                gradient_norm: 0.0,
                converged: true,
            });
            continue;
        }
        runs.push(fista(&p, x0, options.iters, tol));
    }

    let values: Vec<f64> = runs.iter().map(|r| p.value(&r.x)).collect();
    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let best_enstrophy = p.enstrophy(&runs[best].x);
    let start_spread = runs
        .iter()
        .map(|r| {
            let diff: Series = r
                .x
                .iter()
                .zip(&runs[best].x)
                .map(|(a, b)| a.iter().zip(b).map(|(u, v)| u - v).collect())
                .collect();
            let e = p.enstrophy(&diff);
            if best_enstrophy > 0.0 {
                e / best_enstrophy
            } else {
                e
            }
        })
        .fold(0.0, f64::max);

    let x = &runs[best].x;
    let enstrophy_used = best_enstrophy;
    let pairing = -VOLUME
        * p.weights
            .iter()
            .zip(x)
            .zip(&p.d)
            .map(|((w, xt), dt)| w * xt.iter().zip(dt).map(|(a, b)| (b.conj() * a).re).sum::<f64>())
            .sum::<f64>();
    let constraint_active = radius_sq - enstrophy_used <= ACTIVITY_TOLERANCE * radius_sq;
    let (lambda, one_minus_two_lambda) = if constraint_active && enstrophy_used > 0.0 {
        let ratio = pairing / enstrophy_used;
        ((1.0 - ratio) / 2.0, ratio)
    } else {
        (0.0, 1.0)
    };
    let v_star = p.expand(grid, x);
    let k_value = k_functional(grid, &j.times, &v_star, j)?;
    Ok(OracleReport {
        solution: MinimizerSolution {
            delta: j.delta,
            times: j.times.clone(),
            v_star,
            lambda,
            one_minus_two_lambda,
            enstrophy_used,
            radius_sq,
            k_value,
            constraint_active,
        },
        converged: runs.iter().all(|r| r.converged),
        iterations: runs.iter().map(|r| r.iterations).collect(),
        gradient_norms: runs
            .iter()
            .map(|r| if scale > 0.0 { r.gradient_norm / scale } else { 0.0 })
            .collect(),
        values,
        start_spread,
    })
}

#[cfg(test)]
mod tests {
    use super::super::mp::solve_mp;
    use super::*;
    use crate::spectral::trapezoid_weights;

    const TIMES: [f64; 3] = [0.0, 0.2, 0.5];

    fn manufactured(g: &Grid, seed: u64, amp: f64) -> FluxField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fields = TIMES
            .iter()
            .map(|_| g.random_band_limited(9, 8.0, &mut rng).scaled(amp))
            .collect();
        FluxField::new(0.5, 1.0, TIMES.to_vec(), fields).unwrap()
    }

    fn gap(g: &Grid, a: &MinimizerSolution, b: &MinimizerSolution) -> f64 {
        let w = trapezoid_weights(&TIMES);
        let num: f64 = a.v_star.iter().zip(&b.v_star).zip(&w).map(|((x, y), w)| w * g.gradient_norm_sq(&x.sub(y))).sum();
        num / b.enstrophy_used.max(f64::MIN_POSITIVE)
    }

    #[test]
    fn matches_closed_form_inside_and_on_the_ball() {
        let g = Grid::new(16).unwrap();
        let j = manufactured(&g, 1, 1.0);
        let exact = solve_mp(&g, &j, 1e6).unwrap();
        let opts = OracleOptions::default();
        let o = oracle_mp(&g, &j, 1e6, &opts).unwrap();
        assert!(o.converged);
        assert!(gap(&g, &o.solution, &exact) <= 1e-8);
        assert!(o.solution.k_value >= exact.k_value - 1e-10 * exact.k_value.abs());

        let r = exact.enstrophy_used / 16.0;
        let exact = solve_mp(&g, &j, r).unwrap();
        let o = oracle_mp(&g, &j, r, &opts).unwrap();
        assert!(o.converged, "{:?}", o.gradient_norms);
        assert!(gap(&g, &o.solution, &exact) <= 1e-8);
        assert!(o.start_spread <= 1e-8);
        assert!((o.solution.one_minus_two_lambda - exact.one_minus_two_lambda).abs() <= 1e-8);
    }

    #[test]
    fn zero_flux_returns_zero() {
        let g = Grid::new(16).unwrap();
        let j = manufactured(&g, 1, 0.0);
        let o = oracle_mp(&g, &j, 1.0, &OracleOptions::default()).unwrap();
        assert!(o.solution.v_star.iter().all(|v| v.max_abs() == 0.0));
        assert_eq!(o.solution.lambda, 0.0);
    }
}

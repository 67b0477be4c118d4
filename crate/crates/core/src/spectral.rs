//! Periodic grid on the 2π-torus, Fourier transforms and spectral calculus.
//!
//! Coefficients are Fourier-series coefficients: `f(x) = Σ_k f̂(k) e^{ik·x}`,
//! so the forward transform carries the `1/n³` factor and the inverse none.
//! With this convention `‖f‖² = (2π)³ Σ_k |f̂(k)|²`; every L² norm in the
//! crate goes through [`Grid::inner`] so that constant lives in one place.
//!
//! Storage is C-order with x fastest: `idx = ix + n·(iy + n·iz)`.
//! Rank-2 tensors store component `(i, j)` at `3·i + j`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Volume of the periodic box.
pub const VOLUME: f64 = TWO_PI * TWO_PI * TWO_PI;

/// Spectral coefficients of a real field with any number of components.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    n: usize,
    comps: Vec<Vec<Complex64>>,
}

/// Grid samples of a real field with any number of components.
#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    n: usize,
    comps: Vec<Vec<f64>>,
}

impl SpectralField {
    pub fn zeros(n: usize, ncomp: usize) -> Self {
        Self {
            n,
            comps: vec![vec![Complex64::new(0.0, 0.0); n * n * n]; ncomp],
        }
    }

    pub fn from_components(n: usize, comps: Vec<Vec<Complex64>>) -> Self {
        assert!(comps.iter().all(|c| c.len() == n * n * n));
        Self { n, comps }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    pub fn comp(&self, c: usize) -> &[Complex64] {
        &self.comps[c]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.comps[c]
    }

    pub fn comps(&self) -> &[Vec<Complex64>] {
        &self.comps
    }

    /// Extract component `c` as a single-component field.
    pub fn component(&self, c: usize) -> SpectralField {
        Self {
            n: self.n,
            comps: vec![self.comps[c].clone()],
        }
    }

    pub fn scale(&mut self, a: f64) {
        for comp in &mut self.comps {
            for z in comp.iter_mut() {
                *z *= a;
            }
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `self += a * other`
    pub fn add_scaled(&mut self, a: f64, other: &SpectralField) {
        assert_eq!(self.n, other.n);
        assert_eq!(self.ncomp(), other.ncomp());
        for (dst, src) in self.comps.iter_mut().zip(&other.comps) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s * a;
            }
        }
    }

    pub fn sub(&self, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.add_scaled(-1.0, other);
        out
    }

    pub fn add(&self, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.add_scaled(1.0, other);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl RealField {
    pub fn zeros(n: usize, ncomp: usize) -> Self {
        Self {
            n,
            comps: vec![vec![0.0; n * n * n]; ncomp],
        }
    }

    pub fn from_components(n: usize, comps: Vec<Vec<f64>>) -> Self {
        assert!(comps.iter().all(|c| c.len() == n * n * n));
        Self { n, comps }
    }

    /// Sample `f(x, y, z)` for each component.
    pub fn from_fn<F>(n: usize, ncomp: usize, f: F) -> Self
    where
        F: Fn(usize, [f64; 3]) -> f64,
    {
        let h = TWO_PI / n as f64;
        let mut out = Self::zeros(n, ncomp);
        for (c, comp) in out.comps.iter_mut().enumerate() {
            for (idx, v) in comp.iter_mut().enumerate() {
                let (ix, iy, iz) = (idx % n, (idx / n) % n, idx / (n * n));
                *v = f(c, [ix as f64 * h, iy as f64 * h, iz as f64 * h]);
            }
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ncomp(&self) -> usize {
        self.comps.len()
    }

    pub fn comp(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.comps[c]
    }

    pub fn comps(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.comps
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flat_map(|c| c.iter()).all(|v| v.is_finite())
    }

    /// Periodic shift: `out(x) = self(x + s·h)`.
    pub fn shifted(&self, s: [isize; 3]) -> RealField {
        let n = self.n;
        let ni = n as isize;
        let mut out = Self::zeros(n, self.ncomp());
        for (dst, src) in out.comps.iter_mut().zip(&self.comps) {
            for iz in 0..n {
                let sz = (iz as isize + s[2]).rem_euclid(ni) as usize;
                for iy in 0..n {
                    let sy = (iy as isize + s[1]).rem_euclid(ni) as usize;
                    let row = n * (iy + n * iz);
                    let srow = n * (sy + n * sz);
                    for ix in 0..n {
                        let sx = (ix as isize + s[0]).rem_euclid(ni) as usize;
                        dst[row + ix] = src[srow + sx];
                    }
                }
            }
        }
        out
    }
}

/// Cubic periodic grid with cached FFT plans and wavenumber tables.
#[derive(Clone)]
pub struct Grid {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    wave: Vec<f64>,
    cutoff: usize,
    tables: Arc<ModeTables>,
}

/// Per-mode lookups cached at construction.
struct ModeTables {
    mirror: Vec<usize>,
    k2: Vec<f64>,
    dk: Vec<[f64; 3]>,
    band: Vec<bool>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("cutoff", &self.cutoff)
            .finish()
    }
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and at least 4, got {n}"
            )));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let wave: Vec<f64> = (0..n)
            .map(|i| {
                if i < n / 2 {
                    i as f64
                } else {
                    i as f64 - n as f64
                }
            })
            .collect();
        // Nyquist has no real derivative; differentiate it to zero.
        let dwave: Vec<f64> = wave
            .iter()
            .enumerate()
            .map(|(i, &k)| if i == n / 2 { 0.0 } else { k })
            .collect();
        let cutoff = n / 3;
        let len = n * n * n;
        let mut tables = ModeTables {
            mirror: Vec::with_capacity(len),
            k2: Vec::with_capacity(len),
            dk: Vec::with_capacity(len),
            band: Vec::with_capacity(len),
        };
        for idx in 0..len {
            let (ix, iy, iz) = (idx % n, (idx / n) % n, idx / (n * n));
            let k = [wave[ix], wave[iy], wave[iz]];
            tables
                .mirror
                .push((n - ix) % n + n * ((n - iy) % n + n * ((n - iz) % n)));
            tables.k2.push(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
            tables.dk.push([dwave[ix], dwave[iy], dwave[iz]]);
            tables
                .band
                .push(k.iter().all(|k| k.abs() <= cutoff as f64));
        }
        Ok(Self {
            n,
            fwd,
            inv,
            wave,
            cutoff,
            tables: Arc::new(tables),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        TWO_PI / self.n as f64
    }

    /// Highest retained wavenumber per axis after dealiasing.
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.n * (iy + self.n * iz)
    }

    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx % n, (idx / n) % n, idx / (n * n))
    }

    /// Signed wavevector of a storage index (Nyquist reported as `-n/2`).
    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let (ix, iy, iz) = self.coords(idx);
        [self.wave[ix], self.wave[iy], self.wave[iz]]
    }

    #[inline]
    fn dwavevector(&self, idx: usize) -> [f64; 3] {
        self.tables.dk[idx]
    }

    #[inline]
    pub fn k2(&self, idx: usize) -> f64 {
        self.tables.k2[idx]
    }

    /// Index of the wavevector `-k`.
    pub fn mirror(&self, idx: usize) -> usize {
        self.tables.mirror[idx]
    }

    /// Index of an integer wavevector.
    pub fn index_of(&self, k: [i64; 3]) -> usize {
        let n = self.n as i64;
        let w = |k: i64| k.rem_euclid(n) as usize;
        self.index(w(k[0]), w(k[1]), w(k[2]))
    }

    #[inline]
    pub fn in_band(&self, idx: usize) -> bool {
        self.tables.band[idx]
    }

    fn check_shape(&self, n: usize) -> Result<()> {
        if n != self.n {
            return Err(Error::ShapeMismatch {
                expected: format!("{0}x{0}x{0}", self.n),
                found: format!("{0}x{0}x{0}", n),
            });
        }
        Ok(())
    }

    fn fft3(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let plan = if inverse { &self.inv } else { &self.fwd };
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);

        // The y and z passes work on one n×n plane at a time so the
        // transposes stay in cache.
        let mut plane = vec![Complex64::new(0.0, 0.0); n * n];
        for iz in 0..n {
            let slab = &mut data[iz * n * n..(iz + 1) * n * n];
            for iy in 0..n {
                for ix in 0..n {
                    plane[ix * n + iy] = slab[iy * n + ix];
                }
            }
            plan.process_with_scratch(&mut plane, &mut scratch);
            for iy in 0..n {
                for ix in 0..n {
                    slab[iy * n + ix] = plane[ix * n + iy];
                }
            }
        }
        for iy in 0..n {
            for iz in 0..n {
                let row = iz * n * n + iy * n;
                for ix in 0..n {
                    plane[ix * n + iz] = data[row + ix];
                }
            }
            plan.process_with_scratch(&mut plane, &mut scratch);
            for iz in 0..n {
                let row = iz * n * n + iy * n;
                for ix in 0..n {
                    data[row + ix] = plane[ix * n + iz];
                }
            }
        }
    }

    /// Componentwise forward transform of grid samples.
    ///
    /// Components are transformed two at a time as the real and imaginary
    /// parts of one complex field and separated by Hermitian symmetry.
    pub fn transform_forward(&self, f: &RealField) -> Result<SpectralField> {
        self.check_shape(f.n)?;
        let norm = 1.0 / self.len() as f64;
        let mut comps = Vec::with_capacity(f.ncomp());
        for pair in f.comps.chunks(2) {
            let mut data: Vec<Complex64> = match pair {
                [a, b] => a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect(),
                [a] => a.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
                _ => unreachable!(),
            };
            self.fft3(&mut data, false);
            if pair.len() == 1 {
                for z in &mut data {
                    *z *= norm;
                }
                comps.push(data);
                continue;
            }
            let mirror = &self.tables.mirror;
            let mut first = vec![Complex64::new(0.0, 0.0); data.len()];
            let mut second = vec![Complex64::new(0.0, 0.0); data.len()];
            for idx in 0..data.len() {
                let z = data[idx];
                let zm = data[mirror[idx]].conj();
                first[idx] = (z + zm) * (0.5 * norm);
                let d = (z - zm) * (0.5 * norm);
                second[idx] = Complex64::new(d.im, -d.re);
            }
            comps.push(first);
            comps.push(second);
        }
        Ok(SpectralField { n: self.n, comps })
    }

    /// Forward transform for fields known to live on this grid.
    pub fn forward(&self, f: &RealField) -> SpectralField {
        self.transform_forward(f)
            .expect("field resolution must match the grid")
    }

    /// Componentwise inverse transform of Hermitian spectra, two
    /// components per complex transform.
    pub fn transform_inverse(&self, f: &SpectralField) -> RealField {
        assert_eq!(f.n, self.n, "field resolution must match the grid");
        let mut comps = Vec::with_capacity(f.ncomp());
        for pair in f.comps.chunks(2) {
            match pair {
                [a, b] => {
                    let mut data: Vec<Complex64> = a
                        .iter()
                        .zip(b)
                        .map(|(x, y)| x + Complex64::new(-y.im, y.re))
                        .collect();
                    self.fft3(&mut data, true);
                    comps.push(data.iter().map(|z| z.re).collect());
                    comps.push(data.iter().map(|z| z.im).collect());
                }
                [a] => {
                    let mut data = a.clone();
                    self.fft3(&mut data, true);
                    comps.push(data.into_iter().map(|z| z.re).collect());
                }
                _ => unreachable!(),
            }
        }
        RealField { n: self.n, comps }
    }

    pub fn inverse(&self, f: &SpectralField) -> RealField {
        self.transform_inverse(f)
    }

    /// `∂_j f_c` stored at component `3c + j`.
    pub fn gradient(&self, f: &SpectralField) -> SpectralField {
        let mut out = SpectralField::zeros(self.n, 3 * f.ncomp());
        for (c, src) in f.comps.iter().enumerate() {
            for j in 0..3 {
                let dst = &mut out.comps[3 * c + j];
                for (idx, (d, s)) in dst.iter_mut().zip(src).enumerate() {
                    let k = self.dwavevector(idx)[j];
                    *d = Complex64::new(-k * s.im, k * s.re);
                }
            }
        }
        out
    }

    /// Contract the last index: vector → scalar, rank-2 → vector
    /// (`(∇·A)_i = ∂_j A_ij`).
    pub fn divergence(&self, f: &SpectralField) -> SpectralField {
        assert_eq!(f.ncomp() % 3, 0, "divergence needs a multiple of 3 components");
        let mut out = SpectralField::zeros(self.n, f.ncomp() / 3);
        for (c, dst) in out.comps.iter_mut().enumerate() {
            for (idx, d) in dst.iter_mut().enumerate() {
                let k = self.dwavevector(idx);
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, kj) in k.iter().enumerate() {
                    acc += f.comps[3 * c + j][idx] * Complex64::new(0.0, *kj);
                }
                *d = acc;
            }
        }
        out
    }

    pub fn laplacian(&self, f: &SpectralField) -> SpectralField {
        let mut out = f.clone();
        for comp in &mut out.comps {
            for (idx, z) in comp.iter_mut().enumerate() {
                *z *= -self.k2(idx);
            }
        }
        out
    }

    /// Solve `Δg = f` with zero mean.
    pub fn inverse_laplacian(&self, f: &SpectralField) -> SpectralField {
        let mut out = f.clone();
        for comp in &mut out.comps {
            for (idx, z) in comp.iter_mut().enumerate() {
                let k2 = self.k2(idx);
                *z = if k2 == 0.0 { Complex64::new(0.0, 0.0) } else { *z / -k2 };
            }
        }
        out
    }

    pub fn curl(&self, f: &SpectralField) -> SpectralField {
        assert_eq!(f.ncomp(), 3);
        let g = self.gradient(f);
        let d = |i: usize, j: usize| &g.comps[3 * i + j];
        let mut out = SpectralField::zeros(self.n, 3);
        for idx in 0..self.len() {
            out.comps[0][idx] = d(2, 1)[idx] - d(1, 2)[idx];
            out.comps[1][idx] = d(0, 2)[idx] - d(2, 0)[idx];
            out.comps[2][idx] = d(1, 0)[idx] - d(0, 1)[idx];
        }
        out
    }

    /// Leray projection `û ↦ (I − kkᵀ/|k|²)û`; the mean is removed.
    pub fn leray_project(&self, f: &SpectralField) -> SpectralField {
        assert_eq!(f.ncomp(), 3, "Leray projection acts on vector fields");
        let mut out = f.clone();
        for idx in 0..self.len() {
            let k = self.dwavevector(idx);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if k2 == 0.0 {
                // Pure-Nyquist wavevectors have no derivative and are left alone.
                if idx == 0 {
                    for comp in &mut out.comps {
                        comp[0] = Complex64::new(0.0, 0.0);
                    }
                }
                continue;
            }
            let dot = (0..3).fold(Complex64::new(0.0, 0.0), |acc, c| {
                acc + f.comps[c][idx] * k[c]
            }) / k2;
            for c in 0..3 {
                out.comps[c][idx] -= dot * k[c];
            }
        }
        out
    }

    /// Two-thirds truncation: zero every mode with some `|k_i| > n/3`.
    pub fn dealias(&self, f: &SpectralField) -> SpectralField {
        let mut out = f.clone();
        self.dealias_in_place(&mut out);
        out
    }

    pub fn dealias_in_place(&self, f: &mut SpectralField) {
        for idx in 0..self.len() {
            if !self.in_band(idx) {
                for comp in &mut f.comps {
                    comp[idx] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    /// Multiply each coefficient by a real radial multiplier.
    pub fn apply_multiplier(&self, f: &SpectralField, m: &[f64]) -> SpectralField {
        assert_eq!(m.len(), self.len());
        let mut out = f.clone();
        for comp in &mut out.comps {
            for (z, &mk) in comp.iter_mut().zip(m) {
                *z *= mk;
            }
        }
        out
    }

    /// L² inner product over the box, summed over components.
    pub fn inner(&self, f: &SpectralField, g: &SpectralField) -> f64 {
        assert_eq!(f.ncomp(), g.ncomp(), "inner product needs equal component counts");
        let mut acc = 0.0;
        for (a, b) in f.comps.iter().zip(&g.comps) {
            for (x, y) in a.iter().zip(b) {
                acc += x.re * y.re + x.im * y.im;
            }
        }
        VOLUME * acc
    }

    pub fn norm_sq(&self, f: &SpectralField) -> f64 {
        self.inner(f, f)
    }

    /// `‖∇f‖²` computed per mode without forming the gradient.
    pub fn gradient_norm_sq(&self, f: &SpectralField) -> f64 {
        let mut acc = 0.0;
        for comp in &f.comps {
            for (idx, z) in comp.iter().enumerate() {
                let k = self.dwavevector(idx);
                acc += (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) * z.norm_sqr();
            }
        }
        VOLUME * acc
    }

    /// `⟨∇f, ∇g⟩` computed per mode.
    pub fn gradient_inner(&self, f: &SpectralField, g: &SpectralField) -> f64 {
        assert_eq!(f.ncomp(), g.ncomp());
        let mut acc = 0.0;
        for (a, b) in f.comps.iter().zip(&g.comps) {
            for (idx, (x, y)) in a.iter().zip(b).enumerate() {
                let k = self.dwavevector(idx);
                acc += (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) * (x.re * y.re + x.im * y.im);
            }
        }
        VOLUME * acc
    }

    /// Quadrature `h³ Σ f·g` of grid samples.
    pub fn grid_inner(&self, f: &RealField, g: &RealField) -> f64 {
        assert_eq!(f.ncomp(), g.ncomp());
        let h3 = self.spacing().powi(3);
        let mut acc = 0.0;
        for (a, b) in f.comps.iter().zip(&g.comps) {
            for (x, y) in a.iter().zip(b) {
                acc += x * y;
            }
        }
        h3 * acc
    }

    /// Largest `|k·f̂(k)|` relative to `max |f̂|`.
    pub fn divergence_defect(&self, f: &SpectralField) -> f64 {
        assert_eq!(f.ncomp(), 3);
        let scale = f.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for idx in 0..self.len() {
            let k = self.dwavevector(idx);
            let dot = (0..3).fold(Complex64::new(0.0, 0.0), |acc, c| {
                acc + f.comps[c][idx] * k[c]
            });
            worst = worst.max(dot.norm());
        }
        worst / scale
    }

    /// Largest `|f̂(−k) − conj f̂(k)|`.
    pub fn hermitian_defect(&self, f: &SpectralField) -> f64 {
        let mut worst: f64 = 0.0;
        for comp in &f.comps {
            for idx in 0..self.len() {
                let m = self.mirror(idx);
                worst = worst.max((comp[m] - comp[idx].conj()).norm());
            }
        }
        worst
    }

    /// Pointwise products `a_i·b_j` transformed back and dealiased;
    /// component `3i + j` for vector inputs.
    pub fn outer_product(&self, a: &RealField, b: &RealField) -> SpectralField {
        let (na, nb) = (a.ncomp(), b.ncomp());
        let mut grid = RealField::zeros(self.n, na * nb);
        for i in 0..na {
            for j in 0..nb {
                let dst = &mut grid.comps[nb * i + j];
                for ((d, x), y) in dst.iter_mut().zip(&a.comps[i]).zip(&b.comps[j]) {
                    *d = x * y;
                }
            }
        }
        let mut out = self.forward(&grid);
        self.dealias_in_place(&mut out);
        out
    }

    /// Symmetric `a ⊗ a` with only the six distinct products transformed.
    pub fn symmetric_square(&self, a: &RealField) -> SpectralField {
        assert_eq!(a.ncomp(), 3);
        let pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
        let mut grid = RealField::zeros(self.n, 6);
        for (p, &(i, j)) in pairs.iter().enumerate() {
            for ((d, x), y) in grid.comps[p].iter_mut().zip(&a.comps[i]).zip(&a.comps[j]) {
                *d = x * y;
            }
        }
        let mut six = self.forward(&grid);
        self.dealias_in_place(&mut six);
        let mut comps = vec![Vec::new(); 9];
        for (p, &(i, j)) in pairs.iter().enumerate() {
            comps[3 * i + j] = six.comps[p].clone();
            if i != j {
                comps[3 * j + i] = six.comps[p].clone();
            }
        }
        SpectralField { n: self.n, comps }
    }

    /// Random real field with Gaussian coefficients on `0 < |k|² ≤ max_k2`.
    pub fn random_band_limited<R: Rng>(&self, ncomp: usize, max_k2: f64, rng: &mut R) -> SpectralField {
        let mut coeffs = SpectralField::zeros(self.n, ncomp);
        for comp in &mut coeffs.comps {
            for (idx, z) in comp.iter_mut().enumerate() {
                let k2 = self.k2(idx);
                if k2 > 0.0 && k2 <= max_k2 && self.in_band(idx) {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    *z = Complex64::new(re, im);
                }
            }
        }
        // Symmetrize so the field is real.
        for comp in &mut coeffs.comps {
            for idx in 0..self.len() {
                let m = self.mirror(idx);
                if m > idx {
                    let avg = (comp[idx] + comp[m].conj()) * 0.5;
                    comp[idx] = avg;
                    comp[m] = avg.conj();
                } else if m == idx {
                    comp[idx] = Complex64::new(comp[idx].re, 0.0);
                }
            }
        }
        coeffs
    }
}

/// Trapezoid weights for a strictly increasing set of time stamps.
pub fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let m = times.len();
    let mut w = vec![0.0; m];
    for i in 1..m {
        let dt = times[i] - times[i - 1];
        w[i - 1] += 0.5 * dt;
        w[i] += 0.5 * dt;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Grid {
        Grid::new(16).unwrap()
    }

    #[test]
    fn zero_field_transforms_to_zero() {
        let g = grid();
        let f = RealField::zeros(16, 3);
        let s = g.forward(&f);
        assert_eq!(s.max_abs(), 0.0);
    }

    #[test]
    fn sine_has_two_imaginary_coefficients() {
        let g = grid();
        let f = RealField::from_fn(16, 1, |_, x| x[0].sin());
        let s = g.forward(&f);
        let plus = s.comp(0)[g.index_of([1, 0, 0])];
        let minus = s.comp(0)[g.index_of([-1, 0, 0])];
        assert!((plus - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        assert!((minus - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        let rest: f64 = s.comp(0).iter().map(|z| z.norm()).sum::<f64>() - 1.0;
        assert!(rest.abs() < 1e-14);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let g = grid();
        let f = RealField::zeros(8, 1);
        assert!(matches!(g.transform_forward(&f), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn parseval_and_round_trip_on_random_samples() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = RealField::from_components(
            16,
            (0..2)
                .map(|_| (0..g.len()).map(|_| rng.gen::<f64>() - 0.5).collect())
                .collect(),
        );
        let s = g.forward(&f);
        let grid_sq = g.grid_inner(&f, &f);
        let spec_sq = g.norm_sq(&s);
        assert!((grid_sq - spec_sq).abs() <= 1e-12 * grid_sq);
        let back = g.inverse(&s);
        let err = f
            .comps()
            .iter()
            .flatten()
            .zip(back.comps().iter().flatten())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-12 * f.max_abs());
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = grid();
        let f = RealField::from_fn(16, 1, |_, _| 2.5);
        let grad = g.gradient(&g.forward(&f));
        assert!(grad.max_abs() < 1e-15);
    }

    #[test]
    fn divergence_of_gradient_is_minus_sine() {
        let g = grid();
        let f = g.forward(&RealField::from_fn(16, 1, |_, x| x[0].sin()));
        let lap = g.divergence(&g.gradient(&f));
        let expect = f.scaled(-1.0);
        assert!(lap.sub(&expect).max_abs() < 1e-14);
        assert!(g.laplacian(&f).sub(&expect).max_abs() < 1e-14);
    }

    #[test]
    fn divergence_of_curl_vanishes() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = g.random_band_limited(3, 20.0, &mut rng);
        let d = g.divergence(&g.curl(&w));
        assert!(d.max_abs() <= 1e-12 * w.max_abs());
    }

    #[test]
    fn leray_projection_properties() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = g.random_band_limited(3, 30.0, &mut rng);
        let h = g.random_band_limited(3, 30.0, &mut rng);
        let pf = g.leray_project(&f);
        assert!(g.divergence_defect(&pf) < 1e-14);
        // idempotent
        assert!(g.leray_project(&pf).sub(&pf).max_abs() < 1e-14 * pf.max_abs());
        // self-adjoint
        let lhs = g.inner(&pf, &h);
        let rhs = g.inner(&f, &g.leray_project(&h));
        assert!((lhs - rhs).abs() < 1e-12 * g.norm_sq(&f).sqrt() * g.norm_sq(&h).sqrt());
        // annihilates gradients
        let phi = g.random_band_limited(1, 30.0, &mut rng);
        let grad = g.gradient(&phi);
        assert!(g.leray_project(&grad).max_abs() < 1e-14 * grad.max_abs());
    }

    #[test]
    fn dealias_behaviour() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let low = g.random_band_limited(1, 9.0, &mut rng);
        assert_eq!(g.dealias(&low), low);
        let high = g.forward(&RealField::from_fn(16, 1, |_, x| (7.0 * x[1]).cos()));
        assert!(g.dealias(&high).max_abs() < 1e-14);
        let any = g.random_band_limited(1, 200.0, &mut rng);
        assert!(g.norm_sq(&g.dealias(&any)) <= g.norm_sq(&any));
    }

    #[test]
    fn single_mode_norm() {
        let g = grid();
        let a = 0.7;
        let f = g.forward(&RealField::from_fn(16, 1, |_, x| a * (2.0 * x[2]).sin()));
        let expect = VOLUME * a * a / 2.0;
        assert!((g.norm_sq(&f) - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn trapezoid_weights_sum_to_span() {
        let w = trapezoid_weights(&[0.0, 0.1, 0.3, 0.6]);
        assert!((w.iter().sum::<f64>() - 0.6).abs() < 1e-15);
        assert!((w[0] - 0.05).abs() < 1e-15);
    }
}

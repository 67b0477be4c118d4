use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spectral::{Grid, SpectralField};
use crate::testfn::TimeWindow;

/// One divergence-free test function `φ(x, t) = s(t)·ψ(x)`.
#[derive(Clone, Debug)]
pub struct BasketElement {
    pub psi: SpectralField,
    /// `∇ψ`, nine components.
    pub grad_psi: SpectralField,
    pub window: TimeWindow,
}

/// Seeded family of low-mode divergence-free test functions.
#[derive(Clone, Debug)]
pub struct TestBasket {
    pub seed: u64,
    pub max_mode: u32,
    pub elements: Vec<BasketElement>,
}

impl TestBasket {
    pub const DEFAULT_SEED: u64 = 1729;
    pub const DEFAULT_SIZE: usize = 12;
    pub const DEFAULT_MAX_MODE: u32 = 2;

    /// `ψ_j = curl a_j / ‖curl a_j‖` with `a_j` random on `|k| ≤ max_mode`,
    /// and bump windows spread over `[0, t_end]`.
    pub fn new(grid: &Grid, t_end: f64, size: usize, max_mode: u32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let max_k2 = f64::from(max_mode * max_mode);
        let mut elements = Vec::with_capacity(size);
        while elements.len() < size {
            let a = grid.random_band_limited(3, max_k2, &mut rng);
            let psi = grid.curl(&a);
            let norm = grid.norm_sq(&psi).sqrt();
            let center = t_end * rng.gen_range(0.3..0.7);
            let half_width = t_end * rng.gen_range(0.5..0.9);
            if norm == 0.0 {
                continue;
            }
            let psi = psi.scaled(1.0 / norm);
            elements.push(BasketElement {
                grad_psi: grid.gradient(&psi),
                psi,
                window: TimeWindow::Bump { center, half_width },
            });
        }
        Self {
            seed,
            max_mode,
            elements,
        }
    }

    pub fn standard(grid: &Grid, t_end: f64) -> Self {
        Self::new(
            grid,
            t_end,
            Self::DEFAULT_SIZE,
            Self::DEFAULT_MAX_MODE,
            Self::DEFAULT_SEED,
        )
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

impl BasketElement {
    /// `Σ_t w_t s(t_t) f_t` for per-snapshot values `f_t`.
    pub fn integrate(&self, times: &[f64], weights: &[f64], values: impl Iterator<Item = f64>) -> f64 {
        times
            .iter()
            .zip(weights)
            .zip(values)
            .map(|((t, w), f)| w * self.window.value(*t) * f)
            .sum()
    }

    /// `∫ ⟨∇f, ∇φ⟩ dt` for a velocity-like series.
    pub fn pair_gradient(&self, grid: &Grid, times: &[f64], weights: &[f64], f: &[SpectralField]) -> f64 {
        self.integrate(times, weights, f.iter().map(|x| grid.gradient_inner(x, &self.psi)))
    }

    /// `∫ ⟨A, ∇φ⟩ dt` for a tensor series.
    pub fn pair_tensor(&self, grid: &Grid, times: &[f64], weights: &[f64], a: &[SpectralField]) -> f64 {
        self.integrate(times, weights, a.iter().map(|x| grid.inner(x, &self.grad_psi)))
    }

    /// `(∫ ‖∇φ‖² dt)^{1/2}`, the `L²(0,T;V)` norm.
    pub fn gradient_norm(&self, grid: &Grid, times: &[f64], weights: &[f64]) -> f64 {
        (self.window.weighted_square(times, weights) * grid.norm_sq(&self.grad_psi)).sqrt()
    }
}

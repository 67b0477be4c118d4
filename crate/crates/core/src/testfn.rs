//! Space-time test functions `φ(x, t) = s(t)·ψ(x)`.

use serde::{Deserialize, Serialize};

/// Smooth time profile `s(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TimeWindow {
    Constant,
    /// `exp(−1/(1−τ²))` with `τ = (t − center)/half_width`, zero for `|τ| ≥ 1`.
    Bump { center: f64, half_width: f64 },
}

impl TimeWindow {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeWindow::Constant => 1.0,
            TimeWindow::Bump { center, half_width } => {
                let tau = (t - center) / half_width;
                if tau.abs() >= 1.0 {
                    0.0
                } else {
                    (-1.0 / (1.0 - tau * tau)).exp()
                }
            }
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            TimeWindow::Constant => 0.0,
            TimeWindow::Bump { center, half_width } => {
                let tau = (t - center) / half_width;
                if tau.abs() >= 1.0 {
                    0.0
                } else {
                    let q = 1.0 - tau * tau;
                    (-1.0 / q).exp() * (-2.0 * tau / (q * q)) / half_width
                }
            }
        }
    }

    /// `s²` integrated by the given trapezoid weights.
    pub fn weighted_square(&self, times: &[f64], weights: &[f64]) -> f64 {
        times
            .iter()
            .zip(weights)
            .map(|(t, w)| w * self.value(*t).powi(2))
            .sum()
    }
}

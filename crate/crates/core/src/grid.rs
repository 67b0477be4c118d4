use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Grid, TWO_PI};

/// Discretization of the periodic box and the time interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Points per axis; a power of two, at least 16.
    pub n: usize,
    /// Kinematic viscosity.
    pub nu: f64,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
}

fn default_stride() -> usize {
    10
}

impl GridSpec {
    pub fn new(n: usize, nu: f64, dt: f64, t_end: f64, snapshot_stride: usize) -> Result<Self> {
        let spec = Self {
            n,
            nu,
            dt,
            t_end,
            snapshot_stride,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGrid(msg));
        if self.n < 16 || !self.n.is_power_of_two() {
            return bad(format!("n must be a power of two >= 16, got {}", self.n));
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return bad(format!("viscosity must be positive, got {}", self.nu));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("time step must be positive, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return bad(format!("t_end must be at least one time step, got {}", self.t_end));
        }
        let steps = self.t_end / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps {
            return bad(format!(
                "t_end = {} is not an integer number of steps of {}",
                self.t_end, self.dt
            ));
        }
        if self.snapshot_stride == 0 {
            return bad("snapshot_stride must be positive".into());
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn spacing(&self) -> f64 {
        TWO_PI / self.n as f64
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_resolutions() {
        assert!(GridSpec::new(24, 0.1, 1e-3, 1.0, 10).is_err());
        assert!(GridSpec::new(8, 0.1, 1e-3, 1.0, 10).is_err());
        assert!(GridSpec::new(32, 0.1, 1e-3, 1.0, 10).is_ok());
    }

    #[test]
    fn rejects_fractional_step_counts() {
        assert!(GridSpec::new(16, 0.1, 3e-3, 1.0, 10).is_err());
        assert_eq!(GridSpec::new(16, 0.1, 1e-3, 0.5, 10).unwrap().steps(), 500);
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(GridSpec::new(16, 0.0, 1e-3, 1.0, 10).is_err());
        assert!(GridSpec::new(16, 0.1, -1e-3, 1.0, 10).is_err());
        assert!(GridSpec::new(16, 0.1, 1e-3, 1.0, 0).is_err());
    }
}

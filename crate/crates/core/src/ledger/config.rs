use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::ns::{InitialCondition, InitialKind};
use crate::onsager::{OracleOptions, TestBasket};

/// Environment variable that relocates every run directory under a root.
pub const OUTPUT_ROOT_ENV: &str = "NSEL_OUTPUT_ROOT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    TaylorGreen,
    BeltramiAbc,
    RandomBand,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub kind: InitKind,
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub delta0: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizerConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_override: Option<f64>,
    #[serde(default)]
    pub oracle: OracleOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasketConfig {
    pub seed: u64,
    pub size: usize,
    pub max_mode: u32,
}

impl Default for BasketConfig {
    fn default() -> Self {
        Self {
            seed: TestBasket::DEFAULT_SEED,
            size: TestBasket::DEFAULT_SIZE,
            max_mode: TestBasket::DEFAULT_MAX_MODE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub init: InitConfig,
    pub filters: FilterConfig,
    pub minimizer: MinimizerConfig,
    #[serde(default)]
    pub basket: BasketConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.initial_condition()?;
        if !(self.filters.delta0.is_finite() && self.filters.delta0 > 0.0) || self.filters.count == 0 {
            return Err(Error::Config("filters need delta0 > 0 and count >= 1".into()));
        }
        if let Some(r) = self.minimizer.radius_override {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidRadius(r));
            }
        }
        if self.basket.size == 0 || self.basket.max_mode == 0 {
            return Err(Error::Config("basket needs size >= 1 and max_mode >= 1".into()));
        }
        if self.minimizer.oracle.starts == 0 {
            return Err(Error::Config("oracle needs at least one start".into()));
        }
        Ok(())
    }

    pub fn initial_condition(&self) -> Result<InitialCondition> {
        let init = &self.init;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::Config(format!("init.{name} is required for this kind")))
        };
        let kind = match init.kind {
            InitKind::TaylorGreen => InitialKind::TaylorGreen,
            InitKind::BeltramiAbc => InitialKind::BeltramiAbc {
                a: init.a.unwrap_or(1.0),
                b: init.b.unwrap_or(1.0),
                c: init.c.unwrap_or(1.0),
            },
            InitKind::RandomBand => InitialKind::RandomBand {
                spectrum_slope: need(init.spectrum_slope, "spectrum_slope")?,
                k_min: need(init.k_min, "k_min")?,
                k_max: need(init.k_max, "k_max")?,
                seed: init
                    .seed
                    .ok_or_else(|| Error::Config("init.seed is required for random_band".into()))?,
            },
        };
        if !init.amplitude.is_finite() {
            return Err(Error::Config("init.amplitude must be finite".into()));
        }
        Ok(InitialCondition {
            kind,
            amplitude: init.amplitude,
        })
    }

    /// Run directory, relocated under the output-root variable when set.
    pub fn run_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if !root.is_empty() => PathBuf::from(root).join(&self.output.dir),
            _ => self.output.dir.clone(),
        }
    }

    /// The resolved Beltrami configuration used by `verify`.
    pub fn beltrami_reference(dir: PathBuf) -> Self {
        Self {
            grid: GridSpec {
                n: 32,
                nu: 0.1,
                dt: 1e-3,
                t_end: 1.0,
                snapshot_stride: 10,
            },
            init: InitConfig {
                kind: InitKind::BeltramiAbc,
                amplitude: 1.0,
                seed: None,
                a: Some(1.0),
                b: Some(1.0),
                c: Some(1.0),
                spectrum_slope: None,
                k_min: None,
                k_max: None,
            },
            filters: FilterConfig {
                delta0: std::f64::consts::PI,
                count: 4,
            },
            minimizer: MinimizerConfig {
                radius_override: None,
                oracle: OracleOptions::default(),
            },
            basket: BasketConfig::default(),
            output: OutputConfig { dir },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[grid]
n = 16
nu = 0.1
dt = 0.001
t_end = 0.01
snapshot_stride = 5

[init]
kind = "random_band"
amplitude = 1.0
seed = 3
spectrum_slope = -2.0
k_min = 1.0
k_max = 4.0

[filters]
delta0 = 3.141592653589793
count = 3

[minimizer]
radius_override = 2.5

[minimizer.oracle]
iters = 100
starts = 2
seed = 9

[basket]
seed = 1
size = 4
max_mode = 2

[output]
dir = "runs/x"
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = RunConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.grid.n, 16);
        assert_eq!(cfg.minimizer.oracle.tolerance, 1e-10);
        assert!(matches!(
            cfg.initial_condition().unwrap().kind,
            InitialKind::RandomBand { seed: 3, .. }
        ));
        let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = SAMPLE.replace("count = 3", "count = 3\nextra = 1");
        assert!(matches!(RunConfig::from_toml(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_invalid_grid() {
        let bad = SAMPLE.replace("n = 16", "n = 24");
        assert!(matches!(RunConfig::from_toml(&bad), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn random_band_requires_its_parameters() {
        let bad = SAMPLE.replace("k_max = 4.0\n", "");
        assert!(matches!(RunConfig::from_toml(&bad), Err(Error::Config(_))));
    }
}

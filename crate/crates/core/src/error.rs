use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("filter width {delta} is below the resolvable floor {floor} (two grid spacings)")]
    UnresolvedKernel { delta: f64, floor: f64 },

    #[error("filter width {delta} exceeds half the box length")]
    KernelTooWide { delta: f64 },

    #[error("solution blew up at t = {t}")]
    BlowUp { t: f64 },

    #[error("advective CFL number {cfl:.3} exceeds the RK4 bound {bound:.3}")]
    Unstable { cfl: f64, bound: f64 },

    #[error("initial condition band [{k_min}, {k_max}] contains no admissible wavevectors")]
    EmptyBand { k_min: f64, k_max: f64 },

    #[error("time stamps do not match: {0}")]
    TimeMismatch(String),

    #[error("need at least {need} filter widths, got {got}")]
    TooFewWidths { need: usize, got: usize },

    #[error("test function is negative somewhere (min {min})")]
    NegativeTestFunction { min: f64 },

    #[error("every test function in the basket has a degenerate pairing")]
    DegenerateBasket,

    #[error("radius must be positive, got {0}")]
    InvalidRadius(f64),

    #[error("trajectory needs at least {need} snapshots, got {got}")]
    TooFewSnapshots { need: usize, got: usize },

    #[error("bad snapshot magic in {path}")]
    BadMagic { path: PathBuf },

    #[error("unsupported format version {version} in {path}")]
    UnsupportedVersion { version: u32, path: PathBuf },

    #[error("truncated snapshot {path}: expected {expected} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("unsupported ledger schema {0}")]
    LedgerSchema(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("run directory {0} contains no snapshots")]
    EmptyRun(PathBuf),

    #[error("pipeline stage `{stage}` has not been run in {dir}")]
    MissingStage { stage: &'static str, dir: PathBuf },

    #[error("run directory {0} is locked by another process")]
    Locked(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

//! Run configuration, on-disk ledgers and the staged pipeline behind the
//! command line.

pub mod config;
pub mod pipeline;
pub mod table;
pub mod verify;

pub use config::{RunConfig, OUTPUT_ROOT_ENV};
pub use pipeline::{cmd_analyze, cmd_minimize, cmd_report, cmd_simulate, cmd_simulate_file, RunDir, Summary};
pub use table::{Table, LEDGER_HEADER};
pub use verify::{cmd_verify, CriterionResult, Tolerances};

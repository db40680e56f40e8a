//! Sweep configuration, orchestration and CSV output for the `relay-aser`
//! command-line tool.

pub mod config;
pub mod sweep;
pub mod table;

pub use config::{parse_config, ConfigError, Evaluator, Origin, RawConfig, SweepSpec};
pub use sweep::{run_sweep, SweepOutcome, SweepRow};
pub use table::{render_csv, reserialize, write_csv, Columns};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const VALIDATION: u8 = 1;
    pub const NUMERICAL: u8 = 2;
    pub const IO: u8 = 3;
}

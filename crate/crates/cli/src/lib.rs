//! Config-driven experiment runner for `glt-core`.

pub mod config;
pub mod expr;
pub mod run;

pub use config::{ExperimentConfig, ExperimentKind, FamilySpec, PairSpec};
pub use expr::{parse, parse_symbol, ParseError};
pub use run::{exit_code, run, RunOptions, RunReport};

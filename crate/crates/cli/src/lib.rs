//! Batch front end for two-person DNA mixture analyses: CSV ingestion, case
//! configuration and report files.

pub mod config;
pub mod error;
pub mod io;
pub mod run;

pub use config::{parse_profile_arg, Analysis, CaseConfig, HypothesisSpec, Method, ProfileSpec};
pub use error::{CliError, CliResult, EXIT_DATA, EXIT_NUMERICAL};
pub use run::run_case;

//! Batch runner for the `spinsqueeze` library: TOML run configurations,
//! parallel sweeps and optimizations, CSV tables with JSON sidecars, and
//! figure presets.

pub mod config;
pub mod error;
pub mod eval;
pub mod output;
pub mod presets;
pub mod run;
pub mod validate;

pub use config::{RunConfig, Task};
pub use error::CliError;
pub use output::{RunRecord, Table};
pub use run::{execute, resolve, run, Overrides};

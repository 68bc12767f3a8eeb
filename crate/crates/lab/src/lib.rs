//! Configuration and command pipelines behind the `hartree-lab` binary.

pub mod config;
pub mod error;
pub mod run;

pub use config::{parse_config, CachePolicy, Command, RunConfig};
pub use error::{LabError, Result};
pub use run::{run, run_and_summarize, Check, RunOutcome, Source};

//! Implementation of the `tripforge` command line: corpus synthesis,
//! ingestion and analysis reports, model training with feature-group
//! ablations, and interactive trip prediction.
//!
//! Everything the binary does is exposed as library functions so the
//! end-to-end pipeline can be driven from tests.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{run_ablate, run_analyze, run_predict, run_synth, run_train};
pub use config::{CommonArgs, RunConfig, Task};

/// An error caused by the invocation or its inputs, as opposed to an
/// internal failure. Maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage_error(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

/// Exit code contract: 0 success, 2 usage or input error, 3 internal error.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    // every anticipated failure stems from the invocation's inputs: missing
    // or malformed files, unknown ids, incompatible masks
    if err.downcast_ref::<tripforge_core::Error>().is_some()
        || err.downcast_ref::<std::io::Error>().is_some()
        || err.downcast_ref::<serde_json::Error>().is_some()
    {
        return 2;
    }
    3
}

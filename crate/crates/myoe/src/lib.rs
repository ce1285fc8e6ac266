//! File formats, run directories and the command line for the MYOE agent.
//!
//! The numerical work lives in `myoe-core`; this crate reads and writes the
//! on-disk artifacts (demonstration NDJSON, metrics logs, `MYOE1`
//! checkpoints) and fans trials out over threads.

pub mod checkpoint;
pub mod demos;
pub mod log;
pub mod run;
pub mod selfcheck;

use myoe_core::Error;

/// Process exit status for an error: 2 for configuration problems, 3 for
/// numerical failures, 1 for everything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::UnknownEnv { .. } => 2,
        Error::NonFinite { .. } => 3,
        _ => 1,
    }
}

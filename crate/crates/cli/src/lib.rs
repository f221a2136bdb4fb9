//! Batch pipeline behind the `sysrisk` binary: configuration, estimation
//! stages and deterministic output writers.

pub mod commands;
pub mod config;
pub mod output;
pub mod pipeline;
pub mod svg;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    /// Some entities failed; outputs cover the rest.
    pub const PARTIAL: i32 = 1;
    pub const FAILURE: i32 = 2;
}

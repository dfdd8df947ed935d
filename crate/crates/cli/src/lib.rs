//! Experiment runner behind the `tree-stable` binary.

pub mod config;
pub mod experiments;
pub mod grid;
pub mod output;

/// Exit statuses.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
    pub const TOLERANCE_FAILED: i32 = 3;
}

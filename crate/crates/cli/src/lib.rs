//! Command-line workflows: training runs, sample generation, evaluation,
//! benchmark grids, and plots, plus the config and checkpoint formats they
//! share.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod pgm;
pub mod report;
pub mod svg;

use snsgan_core::error::Error;

/// Process exit codes: 1 usage/config, 2 data/format, 3 numeric.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Domain(_) | Error::Shape(_) => 1,
        Error::Format(_) | Error::Io(_) => 2,
        Error::Numeric(_) | Error::MetricUnreliable(_) => 3,
    }
}

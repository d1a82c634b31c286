//! Crash-severity prediction toolkit.
//!
//! The pipeline runs: parse and clean crash records, rank variables with an
//! extremely randomized forest, one-hot encode the surviving variables,
//! split, rebalance the training split with neighbor interpolation, fit
//! classic and neural classifiers, and report accuracy with macro
//! precision and recall.

pub mod balance;
pub mod classic;
pub mod config;
pub mod dataset;
pub mod error;
pub mod features;
pub mod metrics;
pub mod model_io;
pub mod neural;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod synth;

pub use classic::Classifier;
pub use dataset::{CrashRecord, Dataset, EncodedMatrix, SeverityLevel, Variable};
pub use error::{Error, ErrorCategory, Result};

/// Number of severity levels (property damage only, minor, serious, fatal).
pub const NUM_CLASSES: usize = 4;

/// Index of the largest entry; ties resolve to the lower index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

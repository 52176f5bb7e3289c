//! Differential entropy of the conditional-mean estimator under additive
//! Gaussian noise and natural exponential-family channels, together with
//! bounds on it and their use in remote-source and CEO rate-distortion bounds.

#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod awgn;
pub mod bounds;
pub mod distributions;
pub mod error;
pub mod expofam;
pub mod numerics;
pub mod rate;
pub mod vector;

pub use awgn::{EntropyReport, PosteriorPoint, ScalarChannel};
pub use distributions::InputDistribution;
pub use error::{Error, Result};
pub use numerics::{EstimateWithError, Interval, Method};

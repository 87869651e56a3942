//! Regularised canonical correlation analysis.

pub mod biplot;
pub mod cca;
pub mod cli;
pub mod compare;
pub mod data;
pub mod error;
pub mod experiments;
pub mod glasso;
pub mod estimators;
pub mod linalg;
pub mod metrics;
pub mod persist;
pub mod synth;

pub use error::{Error, Result};

//! FMCW MIMO radar range/angle estimation: measurement synthesis, grid
//! baselines, a coupled maximum-likelihood estimator, Cramér–Rao bounds,
//! Monte-Carlo experiments and an ICP-based parking localization demo.

pub mod config;
pub mod crb;
pub mod error;
pub mod experiments;
pub mod estimate;
pub mod ml;
pub mod signal;
pub mod slam;
pub mod spectral;

pub use config::{RadarConfig, Target};
pub use error::{Error, Result};
pub use estimate::{Algorithm, EstimatorOptions, TargetEstimate};
pub use signal::MeasurementMatrix;

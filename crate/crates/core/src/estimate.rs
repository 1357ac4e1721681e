//! Common estimate type and a single entry point over all four algorithms.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::RadarConfig;
use crate::error::{Error, Result};
use crate::ml::{self, MlSettings};
use crate::signal::MeasurementMatrix;
use crate::spectral::{self, GridSpec, Peak};

/// Per-target estimate of amplitude, lumped phase, range and angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetEstimate {
    pub a: f64,
    pub psi: f64,
    /// Range, m.
    pub r: f64,
    /// Incidence angle, rad.
    pub theta: f64,
}

impl TargetEstimate {
    pub fn path_difference(&self, config: &RadarConfig) -> f64 {
        config.spacing() * self.theta.sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Fft2d,
    Music2d,
    Lse,
    Mle,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Fft2d,
        Algorithm::Music2d,
        Algorithm::Lse,
        Algorithm::Mle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Fft2d => "fft2d",
            Algorithm::Music2d => "music2d",
            Algorithm::Lse => "lse",
            Algorithm::Mle => "mle",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fft" | "fft2d" | "2d-fft" => Ok(Algorithm::Fft2d),
            "music" | "music2d" | "2d-music" => Ok(Algorithm::Music2d),
            "lse" => Ok(Algorithm::Lse),
            "mle" | "ml" => Ok(Algorithm::Mle),
            other => Err(Error::InvalidArgument(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Knobs shared by the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorOptions {
    pub grid: GridSpec,
    /// MUSIC smoothing block (rows, columns).
    pub subarray: (usize, usize),
    pub ml: MlSettings,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            grid: GridSpec::default(),
            subarray: (10, 10),
            ml: MlSettings::default(),
        }
    }
}

/// Output of [`estimate_targets`]: the estimates plus the peak record for
/// grid-based algorithms.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOutput {
    pub estimates: Vec<TargetEstimate>,
    /// Peak power per estimate (|S| for FFT/LSE, pseudospectrum for MUSIC,
    /// a² for the ML estimator).
    pub power: Vec<f64>,
    pub ml_diagnostics: Option<ml::Diagnostics>,
}

fn from_peaks(peaks: Vec<Peak>) -> EstimateOutput {
    EstimateOutput {
        power: peaks.iter().map(|p| p.bin.power).collect(),
        estimates: peaks.into_iter().map(|p| p.estimate).collect(),
        ml_diagnostics: None,
    }
}

/// Runs one algorithm for `k` targets. LSE is seeded by the 2D-FFT; the ML
/// estimator initializes itself from the native N×M grid.
pub fn estimate_targets(
    algorithm: Algorithm,
    z: &MeasurementMatrix,
    k: usize,
    opts: &EstimatorOptions,
) -> Result<EstimateOutput> {
    match algorithm {
        Algorithm::Fft2d => spectral::fft2d_estimate(z, k, &opts.grid).map(from_peaks),
        Algorithm::Music2d => {
            spectral::music2d_estimate(z, k, opts.subarray, &opts.grid).map(from_peaks)
        }
        Algorithm::Lse => {
            let seeds = spectral::fft2d_estimate(z, k, &opts.grid)?;
            let init: Vec<_> = seeds.iter().map(|p| p.estimate).collect();
            spectral::lse_estimate(z, &opts.grid, &init).map(from_peaks)
        }
        Algorithm::Mle => {
            let out = ml::estimate(z, k, &opts.ml, None)?;
            Ok(EstimateOutput {
                power: out.estimates.iter().map(|e| e.a * e.a).collect(),
                estimates: out.estimates,
                ml_diagnostics: Some(out.diagnostics),
            })
        }
    }
}

/// Like [`estimate_targets`], but when fewer than `k` peaks separate the
/// algorithm is rerun for as many as were found. If the rerun still falls
/// short, the peaks it did find are returned.
pub fn estimate_best_effort(
    algorithm: Algorithm,
    z: &MeasurementMatrix,
    k: usize,
    opts: &EstimatorOptions,
) -> Result<EstimateOutput> {
    match estimate_targets(algorithm, z, k, opts) {
        Err(Error::Unresolved { found, .. }) if !found.is_empty() => {
            match estimate_targets(algorithm, z, found.len(), opts) {
                Err(Error::Unresolved { found, .. }) if !found.is_empty() => Ok(from_peaks(found)),
                other => other,
            }
        }
        other => other,
    }
}

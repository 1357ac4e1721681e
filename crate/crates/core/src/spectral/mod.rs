//! Grid-based range/angle baselines: 2D-FFT (DTFT peak), 2D-MUSIC with
//! spatial smoothing and the localized LSE search, together with the
//! closed-form bias they exhibit on a decoupled frequency grid.
//!
//! Frequencies are expressed as fractional bin indices: `x = 2Br/c`
//! along range and `y = M·u/λ` along angle. A fine search on an
//! `os`-times oversampled grid moves in steps of `1/os` bins.

mod bias;
mod dtft;
pub(crate) mod fft2d;
mod grid;
mod lse;
mod music;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use bias::bias_prediction;
pub use dtft::{dtft_value, ColumnTransform};
pub use fft2d::{fft2d_estimate, fft2d_spectrum};
pub use grid::Spectrum2d;
pub use lse::{lse_estimate, lse_objective, lse_slice, lse_slice_peak};
pub use music::{music2d_estimate, music2d_spectrum, MusicModel};

use crate::estimate::TargetEstimate;

/// Oversampling and optional search window for the grid-based estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Fine-grid factor per native range bin.
    pub range_oversample: usize,
    /// Fine-grid factor per native angle bin.
    pub angle_oversample: usize,
    /// Optional `((x_min, x_max), (y_min, y_max))` window in native bin
    /// units; `y` is signed (negative angles are negative indices).
    pub search_window: Option<((f64, f64), (f64, f64))>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::uniform(2048)
    }
}

impl GridSpec {
    pub fn uniform(oversample: usize) -> Self {
        GridSpec {
            range_oversample: oversample,
            angle_oversample: oversample,
            search_window: None,
        }
    }

    pub(crate) fn validate(&self) -> crate::Result<()> {
        if self.range_oversample == 0 || self.angle_oversample == 0 {
            return Err(crate::Error::InvalidArgument(
                "oversampling factors must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn in_window(&self, x: f64, y_signed: f64) -> bool {
        match self.search_window {
            None => true,
            Some(((x0, x1), (y0, y1))) => x >= x0 && x <= x1 && y_signed >= y0 && y_signed <= y1,
        }
    }
}

/// Location of a spectral peak in fractional bin indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinEstimate {
    /// Range index in [0, N).
    pub n_p: f64,
    /// Angle index in [0, M); values at or above M/2 are negative angles.
    pub m_p: f64,
    pub power: f64,
}

/// A detected peak and the target parameters it maps to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub bin: BinEstimate,
    pub estimate: TargetEstimate,
}

/// Writes `x,y,magnitude` rows for plotting.
pub fn write_spectrum_csv<W: Write>(mut w: W, spectrum: &Spectrum2d) -> std::io::Result<()> {
    writeln!(w, "x,y,magnitude")?;
    for i in 0..spectrum.rows() {
        for j in 0..spectrum.cols() {
            let (x, y) = spectrum.index_of(i, j);
            writeln!(w, "{x},{y},{}", spectrum.value(i, j))?;
        }
    }
    Ok(())
}

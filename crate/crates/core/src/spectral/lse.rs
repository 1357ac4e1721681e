use num_complex::Complex64;

use super::dtft::{column_sum, phasor};
use super::fft2d::make_peak;
use super::grid::HillClimb;
use super::{GridSpec, Peak};
use crate::error::{Error, Result};
use crate::estimate::TargetEstimate;
use crate::signal::MeasurementMatrix;

/// Matched sum Σ_{n,m} z[n,m]·conj(model) for a single target at range
/// index x and signed angle index y, with the coupling term kept:
/// model = e^{j2π(y·m/M + (x + m·x_θ)·n/N)}, x_θ = y·B/(f_c·M).
pub fn lse_objective(z: &MeasurementMatrix, x: f64, y: f64) -> Complex64 {
    let cfg = z.config();
    let m_len = z.cols() as f64;
    let coupling = y * cfg.bandwidth() / (cfg.carrier() * m_len);
    (0..z.cols())
        .map(|m| column_sum(z, m, x + m as f64 * coupling) * phasor(y * m as f64 / m_len))
        .sum()
}

/// Localized LSE refinement: for each seed, maximizes |J| over the fine
/// lattice within ±1 native bin of the seed. Targets are refined
/// independently, so interference between them is not removed.
pub fn lse_estimate(z: &MeasurementMatrix, grid: &GridSpec, init: &[TargetEstimate]) -> Result<Vec<Peak>> {
    grid.validate()?;
    if init.is_empty() {
        return Err(Error::InvalidArgument("LSE needs at least one seed".into()));
    }
    let cfg = z.config();
    let (osx, osy) = (grid.range_oversample as i64, grid.angle_oversample as i64);
    init.iter()
        .map(|seed| {
            let x0 = cfg.range_to_index(seed.r);
            let y0 = cfg.path_to_index(cfg.spacing() * seed.theta.sin());
            if !(x0.is_finite() && y0.is_finite()) || x0 < 0.0 || x0 >= z.rows() as f64 {
                return Err(Error::InvalidArgument(format!(
                    "LSE seed (r = {} m, theta = {} rad) lies outside the grid",
                    seed.r, seed.theta
                )));
            }
            let (ci, cj) = ((x0 * osx as f64).round() as i64, (y0 * osy as f64).round() as i64);
            let climb = HillClimb {
                os_x: grid.range_oversample,
                os_y: grid.angle_oversample,
                initial_stride: (osx.max(osy) / 4).max(1),
                bounds: Some(((ci - osx, ci + osx), (cj - osy, cj + osy))),
            };
            let (x, y, power) = climb.run((x0, y0), |x, y| lse_objective(z, x, y).norm());
            Ok(make_peak(z, x, y, lse_objective(z, x, y), power))
        })
        .collect()
}

/// |J| along angle at a fixed range.
pub fn lse_slice(z: &MeasurementMatrix, r: f64, thetas: &[f64]) -> Vec<f64> {
    let cfg = z.config();
    let x = cfg.range_to_index(r);
    thetas
        .iter()
        .map(|t| lse_objective(z, x, cfg.path_to_index(cfg.spacing() * t.sin())).norm())
        .collect()
}

/// Local maxima of the fixed-range slice on a signed angle-index lattice
/// of spacing 1/os over [-M/2, M/2), strongest first, as (θ, |J|).
pub fn lse_slice_peak(z: &MeasurementMatrix, r: f64, oversample: usize) -> Vec<(f64, f64)> {
    let cfg = z.config();
    let x = cfg.range_to_index(r);
    let os = oversample.max(1);
    let count = z.cols() * os;
    let half = (z.cols() / 2) as f64;
    let ys: Vec<f64> = (0..count).map(|i| i as f64 / os as f64 - half).collect();
    let values: Vec<f64> = ys.iter().map(|&y| lse_objective(z, x, y).norm()).collect();
    let mut peaks: Vec<(f64, f64)> = (0..count)
        .filter(|&i| {
            let prev = values[(i + count - 1) % count];
            let next = values[(i + 1) % count];
            values[i] > prev && values[i] >= next
        })
        .map(|i| (cfg.index_to_angle(ys[i]), values[i]))
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    peaks
}

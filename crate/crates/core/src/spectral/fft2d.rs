use std::collections::HashMap;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::dtft::ColumnTransform;
use super::grid::{select_peaks, HillClimb, Spectrum2d};
use super::{BinEstimate, GridSpec, Peak};
use crate::error::{Error, Result};
use crate::estimate::TargetEstimate;
use crate::signal::MeasurementMatrix;

/// Coarse-grid padding used before the fine hill-climb.
pub(crate) const COARSE_PAD: usize = 4;
/// Half-width, in native bins, of the mask around an accepted peak.
pub(crate) const EXCLUSION_BINS: f64 = 2.0;

/// In-place 2D FFT of a zero-padded block: `block` is
/// `rows × cols` (row-major) holding data in its top-left corner.
pub(crate) fn fft2_in_place(block: &mut [Complex64], rows: usize, cols: usize, filled_rows: usize) {
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft_forward(cols);
    for row in block.chunks_exact_mut(cols).take(filled_rows) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(rows);
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for j in 0..cols {
        for (i, c) in column.iter_mut().enumerate() {
            *c = block[i * cols + j];
        }
        col_fft.process(&mut column);
        for (i, c) in column.iter().enumerate() {
            block[i * cols + j] = *c;
        }
    }
}

/// |S| on the lattice x = i/pad_r, y = j/pad_a via a zero-padded 2D FFT.
pub fn fft2d_spectrum(z: &MeasurementMatrix, pad_r: usize, pad_a: usize) -> Spectrum2d {
    let (n, m) = (z.rows(), z.cols());
    let (rows, cols) = (n * pad_r.max(1), m * pad_a.max(1));
    let mut block = vec![Complex64::new(0.0, 0.0); rows * cols];
    for i in 0..n {
        block[i * cols..i * cols + m].copy_from_slice(&z.data()[i * m..(i + 1) * m]);
    }
    fft2_in_place(&mut block, rows, cols, n);
    Spectrum2d::new(
        rows,
        cols,
        1.0 / pad_r.max(1) as f64,
        1.0 / pad_a.max(1) as f64,
        block.iter().map(|v| v.norm()).collect(),
    )
}

/// Converts a peak location and its spectral value into a target estimate.
/// `s` is the (unnormalized) matched sum, so a = |s|/(NM) and ψ = arg s.
pub(crate) fn make_peak(z: &MeasurementMatrix, x: f64, y: f64, s: Complex64, power: f64) -> Peak {
    let cfg = z.config();
    let m_len = z.cols() as f64;
    let y = y.rem_euclid(m_len);
    Peak {
        bin: BinEstimate {
            n_p: x,
            m_p: y,
            power,
        },
        estimate: TargetEstimate {
            a: s.norm() / (z.rows() * z.cols()) as f64,
            psi: s.arg(),
            r: cfg.index_to_range(x),
            theta: cfg.index_to_angle(cfg.signed_angle_index(y)),
        },
    }
}

pub(crate) fn coarse_pad(oversample: usize) -> usize {
    oversample.min(COARSE_PAD)
}

pub(crate) fn hill_climb_for(grid: &GridSpec) -> HillClimb {
    let (pr, pa) = (coarse_pad(grid.range_oversample), coarse_pad(grid.angle_oversample));
    HillClimb {
        os_x: grid.range_oversample,
        os_y: grid.angle_oversample,
        initial_stride: ((grid.range_oversample / pr).max(grid.angle_oversample / pa) / 2).max(1) as i64,
        bounds: None,
    }
}

/// Coarse candidates from a padded spectrum, then ±2-bin greedy selection.
pub(crate) fn coarse_candidates(
    spectrum: &Spectrum2d,
    z: &MeasurementMatrix,
    k: usize,
    grid: &GridSpec,
) -> Vec<(f64, f64, f64)> {
    let cfg = z.config();
    let maxima: Vec<_> = spectrum
        .local_maxima()
        .into_iter()
        .map(|(i, j, v)| {
            let (x, y) = spectrum.index_of(i, j);
            (x, y, v)
        })
        .collect();
    select_peaks(
        &maxima,
        k,
        (z.rows() as f64, z.cols() as f64),
        EXCLUSION_BINS,
        |x, y| grid.in_window(x, cfg.signed_angle_index(y)),
    )
}

/// K strongest local maxima of |S(x, y)| on the oversampled grid.
///
/// Peaks are isolated on a 4× padded FFT, then each is refined to a
/// local maximum of the fine lattice using exact DTFT evaluations.
pub fn fft2d_estimate(z: &MeasurementMatrix, k: usize, grid: &GridSpec) -> Result<Vec<Peak>> {
    grid.validate()?;
    if k == 0 {
        return Err(Error::InvalidArgument("target count must be >= 1".into()));
    }
    let spectrum = fft2d_spectrum(
        z,
        coarse_pad(grid.range_oversample),
        coarse_pad(grid.angle_oversample),
    );
    let seeds = coarse_candidates(&spectrum, z, k, grid);

    let climb = hill_climb_for(grid);
    let mut transforms: HashMap<u64, ColumnTransform> = HashMap::new();
    let mut peaks = Vec::with_capacity(seeds.len());
    for &(x0, y0, _) in &seeds {
        let (x, y, power) = climb.run((x0, y0), |x, y| {
            transforms
                .entry(x.to_bits())
                .or_insert_with(|| ColumnTransform::new(z, x))
                .at(y)
                .norm()
        });
        let s = transforms
            .entry(x.to_bits())
            .or_insert_with(|| ColumnTransform::new(z, x))
            .at(y);
        peaks.push(make_peak(z, x, y, s, power));
    }
    if peaks.len() < k {
        return Err(Error::Unresolved {
            requested: k,
            found: peaks,
        });
    }
    Ok(peaks)
}

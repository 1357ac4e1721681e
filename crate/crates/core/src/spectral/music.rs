use num_complex::Complex64;
use faer::complex_native::c64;
use faer::{Mat, Side};

use super::dtft::{phasor, ColumnTransform};
use super::fft2d::{coarse_candidates, coarse_pad, fft2_in_place, hill_climb_for, make_peak};
use super::grid::Spectrum2d;
use super::{GridSpec, Peak};
use crate::error::{Error, Result};
use crate::signal::MeasurementMatrix;

/// Signal subspace of the spatially smoothed block covariance.
///
/// Blocks are the Ns×Ms windows of z at every offset (forward smoothing
/// only), vectorized with the channel index fastest. The steering model is
/// the decoupled e^{j2π(x·i/N + y·j/M)}, so the pseudospectrum peaks carry
/// the same coupling bias as the plain DTFT.
#[derive(Debug, Clone)]
pub struct MusicModel {
    n_len: usize,
    m_len: usize,
    ns: usize,
    ms: usize,
    /// Signal eigenvectors, each Ns·Ms long.
    signal: Vec<Vec<Complex64>>,
    /// All covariance eigenvalues, descending.
    eigenvalues: Vec<f64>,
}

impl MusicModel {
    pub fn new(z: &MeasurementMatrix, k: usize, subarray: (usize, usize)) -> Result<Self> {
        let (n_len, m_len) = (z.rows(), z.cols());
        let (ns, ms) = subarray;
        if ns == 0 || ms == 0 || ns > n_len || ms > m_len {
            return Err(Error::InvalidArgument(format!(
                "subarray {ns}x{ms} does not fit a {n_len}x{m_len} measurement"
            )));
        }
        let dim = ns * ms;
        if k == 0 || k >= dim {
            return Err(Error::InvalidArgument(format!(
                "target count {k} must be in 1..{dim} for a {ns}x{ms} subarray"
            )));
        }
        let blocks = (n_len - ns + 1) * (m_len - ms + 1);
        if blocks < k + 1 {
            return Err(Error::RankDeficient {
                blocks,
                required: k + 1,
            });
        }

        let cov = smoothed_covariance(z, ns, ms);
        // Ascending eigenvalues; the signal subspace is the top k.
        let eig = cov.selfadjoint_eigendecomposition(Side::Lower);
        let (u, ev) = (eig.u(), eig.s().column_vector());
        let signal = (dim - k..dim)
            .rev()
            .map(|c| (0..dim).map(|r| { let v = u.read(r, c); Complex64::new(v.re, v.im) }).collect())
            .collect();
        let eigenvalues = (0..dim).rev().map(|c| ev.read(c).re).collect();
        Ok(MusicModel {
            n_len,
            m_len,
            ns,
            ms,
            signal,
            eigenvalues,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Squared norm of the steering vector's noise-subspace component.
    pub fn noise_projection(&self, x: f64, y: f64) -> f64 {
        let rows: Vec<Complex64> = (0..self.ns)
            .map(|i| phasor(-x * i as f64 / self.n_len as f64))
            .collect();
        let cols: Vec<Complex64> = (0..self.ms)
            .map(|j| phasor(-y * j as f64 / self.m_len as f64))
            .collect();
        let captured: f64 = self
            .signal
            .iter()
            .map(|q| {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..self.ns {
                    for j in 0..self.ms {
                        acc += q[i * self.ms + j].conj() * rows[i] * cols[j];
                    }
                }
                acc.norm_sqr()
            })
            .sum();
        ((self.ns * self.ms) as f64 - captured).max(f64::MIN_POSITIVE)
    }

    /// P(x, y) = 1 / ‖P_noise·a(x, y)‖².
    pub fn pseudospectrum(&self, x: f64, y: f64) -> f64 {
        1.0 / self.noise_projection(x, y)
    }

    /// Pseudospectrum on the lattice x = i/pad_r, y = j/pad_a.
    ///
    /// The captured power a(x, y)ᴴ·Π·a(x, y) of the signal projector Π
    /// only depends on Π summed along each (row, column) lag, so the whole
    /// lattice is one FFT of the (2Ns−1)×(2Ms−1) lag sums.
    pub fn spectrum(&self, pad_r: usize, pad_a: usize) -> Spectrum2d {
        let (pad_r, pad_a) = (pad_r.max(1), pad_a.max(1));
        let (rows, cols) = (self.n_len * pad_r, self.m_len * pad_a);
        let (ns, ms) = (self.ns, self.ms);
        let dim = ns * ms;
        let zero = Complex64::new(0.0, 0.0);
        let mut lags = vec![zero; (2 * ns - 1) * (2 * ms - 1)];
        for a in 0..dim {
            for b in 0..dim {
                // Π[b, a] = Σ_k q_k[b]·conj(q_k[a]).
                let pi: Complex64 = self.signal.iter().map(|q| q[b] * q[a].conj()).sum();
                let di = b / ms + ns - 1 - a / ms;
                let dj = b % ms + ms - 1 - a % ms;
                lags[di * (2 * ms - 1) + dj] += pi;
            }
        }
        let mut block = vec![zero; rows * cols];
        for di in 0..2 * ns - 1 {
            let r = (di + rows - (ns - 1)) % rows;
            for dj in 0..2 * ms - 1 {
                let c = (dj + cols - (ms - 1)) % cols;
                block[r * cols + c] = lags[di * (2 * ms - 1) + dj];
            }
        }
        fft2_in_place(&mut block, rows, cols, rows);
        Spectrum2d::new(
            rows,
            cols,
            1.0 / pad_r as f64,
            1.0 / pad_a as f64,
            block
                .into_iter()
                .map(|c| 1.0 / (dim as f64 - c.re).max(f64::MIN_POSITIVE))
                .collect(),
        )
    }
}

/// Forward-smoothed block covariance (1/B)·Σ s·sᴴ over all Ns×Ms windows.
///
/// Built from per-column-pair range correlations P_ab[i, i'] =
/// Σ_n0 z[n0+i, a]·z*[n0+i', b], whose diagonals follow from a one-term
/// shift recurrence, so the cost is O(M²·Ns·N) rather than O(Ns²·Ms²·B).
fn smoothed_covariance(z: &MeasurementMatrix, ns: usize, ms: usize) -> Mat<c64> {
    let (n_len, m_len) = (z.rows(), z.cols());
    let l = n_len - ns + 1;
    let blocks = l * (m_len - ms + 1);
    let cols: Vec<Vec<Complex64>> = (0..m_len).map(|m| z.column(m).collect()).collect();
    let zero = Complex64::new(0.0, 0.0);
    let mut p = vec![zero; m_len * m_len * ns * ns];
    for a in 0..m_len {
        for b in 0..m_len {
            let (ca, cb) = (&cols[a], &cols[b]);
            let pab = &mut p[(a * m_len + b) * ns * ns..][..ns * ns];
            let lagged = |i: usize, k: usize| -> Complex64 {
                (0..l).map(|n0| ca[n0 + i] * cb[n0 + k].conj()).sum()
            };
            for i in 0..ns {
                pab[i * ns] = lagged(i, 0);
                pab[i] = lagged(0, i);
            }
            for i in 1..ns {
                for k in 1..ns {
                    pab[i * ns + k] = pab[(i - 1) * ns + k - 1] - ca[i - 1] * cb[k - 1].conj()
                        + ca[i - 1 + l] * cb[k - 1 + l].conj();
                }
            }
        }
    }
    let dim = ns * ms;
    let scale = 1.0 / blocks as f64;
    Mat::from_fn(dim, dim, |row, col| {
        let (i, j) = (row / ms, row % ms);
        let (k, jj) = (col / ms, col % ms);
        let acc: Complex64 = (0..=m_len - ms)
            .map(|m0| p[((m0 + j) * m_len + m0 + jj) * ns * ns + i * ns + k])
            .sum();
        c64::new(acc.re * scale, acc.im * scale)
    })
}

/// 2D-MUSIC pseudospectrum of z on a padded lattice, for plotting.
pub fn music2d_spectrum(
    z: &MeasurementMatrix,
    k: usize,
    subarray: (usize, usize),
    pad_r: usize,
    pad_a: usize,
) -> Result<Spectrum2d> {
    Ok(MusicModel::new(z, k, subarray)?.spectrum(pad_r, pad_a))
}

/// K largest 2D-MUSIC pseudospectrum peaks, isolated on a padded lattice
/// and refined on the oversampled grid. Amplitude and phase are read from
/// the DTFT at the peak.
pub fn music2d_estimate(
    z: &MeasurementMatrix,
    k: usize,
    subarray: (usize, usize),
    grid: &GridSpec,
) -> Result<Vec<Peak>> {
    grid.validate()?;
    let model = MusicModel::new(z, k, subarray)?;
    let coarse = model.spectrum(
        coarse_pad(grid.range_oversample),
        coarse_pad(grid.angle_oversample),
    );
    let seeds = coarse_candidates(&coarse, z, k, grid);
    let climb = hill_climb_for(grid);
    let peaks: Vec<Peak> = seeds
        .iter()
        .map(|&(x0, y0, _)| {
            let (x, y, power) = climb.run((x0, y0), |x, y| model.pseudospectrum(x, y));
            let s = ColumnTransform::new(z, x).at(y);
            make_peak(z, x, y, s, power)
        })
        .collect();
    if peaks.len() < k {
        return Err(Error::Unresolved {
            requested: k,
            found: peaks,
        });
    }
    Ok(peaks)
}

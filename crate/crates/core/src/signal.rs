//! Deramped measurement synthesis and the two-file matrix export format.
//!
//! A single target contributes
//!
//! ```text
//! z[n,m] = a·e^{jψ}·e^{j2π(u/λ)m}·e^{j2π(2r + m·u)·B/(cN)·n}
//! ```
//!
//! where the τ²[m] phase term has been evaluated at m = 0 and folded
//! into ψ. Noise is circular complex Gaussian with total variance σ².

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::{RadarConfig, Target};
use crate::error::{Error, Result};

/// N×M complex deramped samples together with the configuration that
/// produced them. Storage is row-major: entry (n, m) lives at `n·M + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    data: Vec<Complex64>,
    config: RadarConfig,
    sigma: f64,
    seed: Option<u64>,
}

impl MeasurementMatrix {
    /// Wraps existing samples, checking shape and finiteness.
    pub fn from_parts(
        data: Vec<Complex64>,
        config: RadarConfig,
        sigma: f64,
        seed: Option<u64>,
    ) -> Result<Self> {
        let expected = config.samples() * config.virtual_elements();
        if data.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "measurement has {} samples, configuration needs {expected}",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("measurement contains non-finite samples".into()));
        }
        Ok(MeasurementMatrix {
            data,
            config,
            sigma,
            seed,
        })
    }

    pub(crate) fn zeros(config: RadarConfig) -> Self {
        MeasurementMatrix {
            data: vec![Complex64::new(0.0, 0.0); config.samples() * config.virtual_elements()],
            config,
            sigma: 0.0,
            seed: None,
        }
    }

    pub fn config(&self) -> &RadarConfig {
        &self.config
    }

    /// Number of fast-time samples N.
    pub fn rows(&self) -> usize {
        self.config.samples()
    }

    /// Number of virtual channels M.
    pub fn cols(&self) -> usize {
        self.config.virtual_elements()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize) -> Complex64 {
        self.data[n * self.cols() + m]
    }

    /// Fast-time samples of channel `m`.
    pub fn column(&self, m: usize) -> impl Iterator<Item = Complex64> + '_ {
        self.data.iter().skip(m).step_by(self.cols()).copied()
    }

    /// Multiplies every sample by `k`.
    pub fn scaled(&self, k: Complex64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z *= k);
        out
    }

    fn add_target(&mut self, target: &Target) -> Result<()> {
        target.validate(&self.config)?;
        let cfg = self.config;
        let m_count = cfg.virtual_elements();
        let u = target.path_difference(&cfg);
        let psi_cycles = target.lumped_phase(&cfg) / (2.0 * PI);
        let angle_cycles = u / cfg.wavelength();
        let scale = cfg.beat_scale();
        for n in 0..cfg.samples() {
            for m in 0..m_count {
                let cycles = psi_cycles
                    + angle_cycles * m as f64
                    + (2.0 * target.r + m as f64 * u) * scale * n as f64;
                self.data[n * m_count + m] +=
                    Complex64::from_polar(target.a, 2.0 * PI * cycles.fract());
            }
        }
        Ok(())
    }

    /// Writes the header (configuration, σ, seed) and the flat sample file:
    /// N·M pairs of little-endian f64 (re, im), row-major.
    pub fn write_pair(&self, header: &Path, samples: &Path) -> Result<()> {
        let head = MatrixHeader {
            radar: self.config,
            measurement: MatrixInfo {
                rows: self.rows(),
                cols: self.cols(),
                sigma: self.sigma,
                seed: self.seed,
            },
        };
        let text = toml::to_string(&head).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(header, text).map_err(|e| Error::io(header, e))?;

        let file = File::create(samples).map_err(|e| Error::io(samples, e))?;
        let mut w = BufWriter::new(file);
        for z in &self.data {
            w.write_all(&z.re.to_le_bytes())
                .and_then(|_| w.write_all(&z.im.to_le_bytes()))
                .map_err(|e| Error::io(samples, e))?;
        }
        w.flush().map_err(|e| Error::io(samples, e))
    }

    /// Reads a pair written by [`MeasurementMatrix::write_pair`].
    pub fn read_pair(header: &Path, samples: &Path) -> Result<Self> {
        let head: MatrixHeader = crate::config::load_document(header, &[])?;
        if head.measurement.rows != head.radar.samples()
            || head.measurement.cols != head.radar.virtual_elements()
        {
            return Err(Error::Parse(format!(
                "header dimensions {}x{} disagree with the radar configuration",
                head.measurement.rows, head.measurement.cols
            )));
        }
        let file = File::open(samples).map_err(|e| Error::io(samples, e))?;
        let mut bytes = Vec::new();
        BufReader::new(file)
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(samples, e))?;
        if bytes.len() % 16 != 0 {
            return Err(Error::Parse(format!(
                "{}: length {} is not a whole number of complex samples",
                samples.display(),
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                Complex64::new(re, im)
            })
            .collect();
        MeasurementMatrix::from_parts(
            data,
            head.radar,
            head.measurement.sigma,
            head.measurement.seed,
        )
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixHeader {
    radar: RadarConfig,
    measurement: MatrixInfo,
}

#[derive(Serialize, Deserialize)]
struct MatrixInfo {
    rows: usize,
    cols: usize,
    sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

/// Noiseless measurement of a single target.
pub fn synthesize_target(config: &RadarConfig, target: &Target) -> Result<MeasurementMatrix> {
    let mut z = MeasurementMatrix::zeros(*config);
    z.add_target(target)?;
    Ok(z)
}

/// Sum of all target responses plus circular complex Gaussian noise of
/// variance σ². Noise is drawn from a ChaCha8 stream seeded by `seed`,
/// real then imaginary part per entry, with n varying fastest.
pub fn synthesize_measurement(
    config: &RadarConfig,
    targets: &[Target],
    sigma: f64,
    seed: u64,
) -> Result<MeasurementMatrix> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("noise sigma must be >= 0, got {sigma}")));
    }
    let mut z = MeasurementMatrix::zeros(*config);
    for t in targets {
        z.add_target(t)?;
    }
    if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = sigma / 2f64.sqrt();
        let cols = z.cols();
        for m in 0..cols {
            for n in 0..z.rows() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                z.data[n * cols + m] += Complex64::new(s * re, s * im);
            }
        }
        z.sigma = sigma;
        z.seed = Some(seed);
    }
    Ok(z)
}

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::signal::MeasurementMatrix;

/// Unit phasor e^{-j2π·cycles}, reduced to the fractional cycle first so
/// large arguments keep full precision.
#[inline]
pub(crate) fn phasor(cycles: f64) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI * cycles.fract())
}

/// S(x, y) = Σ_n Σ_m z[n,m]·e^{-j2πxn/N}·e^{-j2πym/M}, evaluated term by term.
pub fn dtft_value(z: &MeasurementMatrix, x: f64, y: f64) -> Complex64 {
    let (n_len, m_len) = (z.rows() as f64, z.cols() as f64);
    let mut acc = Complex64::new(0.0, 0.0);
    for n in 0..z.rows() {
        let row_phase = (x * n as f64 / n_len).fract();
        for m in 0..z.cols() {
            let col_phase = (y * m as f64 / m_len).fract();
            acc += z.get(n, m) * phasor(row_phase + col_phase);
        }
    }
    acc
}

/// Σ_n z[n,m]·e^{-j2π·f·n/N} for one column, by phasor recurrence with a
/// periodic exact resync.
pub(crate) fn column_sum(z: &MeasurementMatrix, m: usize, f: f64) -> Complex64 {
    const RESYNC: usize = 64;
    let n_len = z.rows() as f64;
    let step = phasor(f / n_len);
    let mut rot = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for (n, v) in z.column(m).enumerate() {
        if n % RESYNC == 0 {
            rot = phasor(f * n as f64 / n_len);
        }
        acc += v * rot;
        rot *= step;
    }
    acc
}

/// Range-direction transforms A_m(x) = Σ_n z[n,m]·e^{-j2πxn/N} for every
/// channel at a fixed x; any S(x, ·) then costs O(M).
#[derive(Debug, Clone)]
pub struct ColumnTransform {
    x: f64,
    values: Vec<Complex64>,
}

impl ColumnTransform {
    pub fn new(z: &MeasurementMatrix, x: f64) -> Self {
        let cols = z.cols();
        let n_len = z.rows() as f64;
        let mut values = vec![Complex64::new(0.0, 0.0); cols];
        for n in 0..z.rows() {
            let w = phasor(x * n as f64 / n_len);
            let row = &z.data()[n * cols..(n + 1) * cols];
            for (acc, v) in values.iter_mut().zip(row) {
                *acc += v * w;
            }
        }
        ColumnTransform { x, values }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// S(x, y) for the stored x.
    pub fn at(&self, y: f64) -> Complex64 {
        let m_len = self.values.len() as f64;
        self.values
            .iter()
            .enumerate()
            .map(|(m, a)| a * phasor(y * m as f64 / m_len))
            .sum()
    }
}

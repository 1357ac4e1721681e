//! Correlation sums between the data and single-target range profiles.
//!
//! For target k and channel m the profile is g[n] = e^{jβn} with
//! β = 2π(2r + m·u)·B/(cN). Every update of the estimator needs the three
//! moments Σ nᵖ·conj(z[n,m])·e^{jβn} (p = 0, 1, 2) and the analogous
//! profile-to-profile sums Σ nᵖ·e^{jαn}; the latter have a closed form.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::config::RadarConfig;
use crate::signal::MeasurementMatrix;

/// Cycles per sample of target (r, u) in channel m.
#[inline]
pub(crate) fn beat_cycles(config: &RadarConfig, r: f64, u: f64, m: usize) -> f64 {
    (2.0 * r + m as f64 * u) * config.beat_scale()
}

#[inline]
fn rotor(cycles: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * cycles.fract())
}

/// Σ_n nᵖ·conj(z[n,m])·e^{j2π·f·n} for p = 0, 1, 2.
pub fn correlation_moments(z: &MeasurementMatrix, m: usize, f: f64) -> [Complex64; 3] {
    const RESYNC: usize = 32;
    let step = rotor(f);
    let mut rot = Complex64::new(1.0, 0.0);
    let mut acc = [Complex64::new(0.0, 0.0); 3];
    for (n, v) in z.column(m).enumerate() {
        if n % RESYNC == 0 {
            rot = rotor(f * n as f64);
        }
        let t = v.conj() * rot;
        let nf = n as f64;
        acc[0] += t;
        acc[1] += t * nf;
        acc[2] += t * (nf * nf);
        rot *= step;
    }
    acc
}

/// R_k^(m) = Σ_n conj(z[n,m])·e^{j2π(2r + m·u)·B/(cN)·n}.
pub fn corr_single(z: &MeasurementMatrix, r: f64, u: f64, m: usize) -> Complex64 {
    correlation_moments(z, m, beat_cycles(z.config(), r, u, m))[0]
}

/// R_{l,k}^(m) = Σ_n e^{j2π(2(r_k − r_l) + m(u_k − u_l))·B/(cN)·n}.
pub fn corr_cross(config: &RadarConfig, rk: f64, uk: f64, rl: f64, ul: f64, m: usize) -> Complex64 {
    let f = (2.0 * (rk - rl) + m as f64 * (uk - ul)) * config.beat_scale();
    CrossSums::new(config.samples()).moments(f)[0]
}

/// Closed-form Σ_{n<N} nᵖ·e^{j2π·f·n}, p = 0, 1, 2.
///
/// With c = (N−1)/2 and α = 2πf, the centered sums E_p = Σ_k kᵖ·e^{jαk}
/// over k = n − c follow from the Dirichlet kernel D = sin(Nα/2)/sin(α/2)
/// and its α-derivatives (E₁ = −j·D′, E₂ = −D″), then shift back by
/// e^{jαc}. Near α = 0 a power series in the centered moments is used.
#[derive(Debug, Clone)]
pub struct CrossSums {
    n: usize,
    center: f64,
    /// Σ_k k^q over the centered grid, q = 0..SERIES_TERMS + 2.
    centered: Vec<f64>,
}

const SERIES_TERMS: usize = 22;
/// Switch to the series when |α|·(N−1)/2 is below this.
const SERIES_LIMIT: f64 = 0.5;

impl CrossSums {
    pub fn new(n: usize) -> Self {
        let center = (n as f64 - 1.0) / 2.0;
        let mut centered = vec![0.0; SERIES_TERMS + 3];
        for i in 0..n {
            let k = i as f64 - center;
            let mut p = 1.0;
            for c in centered.iter_mut() {
                *c += p;
                p *= k;
            }
        }
        CrossSums { n, center, centered }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn moments(&self, f: f64) -> [Complex64; 3] {
        let mut f = f.rem_euclid(1.0);
        if f > 0.5 {
            f -= 1.0;
        }
        let alpha = 2.0 * PI * f;
        let (e0, e1, e2) = if alpha.abs() * self.center.max(1.0) < SERIES_LIMIT {
            self.series(alpha)
        } else {
            self.dirichlet(alpha)
        };
        let c = self.center;
        let shift = Complex64::from_polar(1.0, 2.0 * PI * (f * c).fract());
        [
            shift * e0,
            shift * (e1 + e0 * c),
            shift * (e2 + e1 * (2.0 * c) + e0 * (c * c)),
        ]
    }

    /// `moments(f0 + m·g)` for m = 0..out.len(), with the trigonometric
    /// factors advanced by rotation instead of re-evaluated.
    pub fn moments_line(&self, f0: f64, g: f64, out: &mut [[Complex64; 3]]) {
        let nf = self.n as f64;
        let c = self.center;
        // Unwrapped t = πf: the Dirichlet ratio and the shift pick up
        // opposite signs over a period, so no reduction is needed.
        let mut r1 = Complex64::from_polar(1.0, PI * f0.fract());
        let mut rn = Complex64::from_polar(1.0, PI * (nf * f0).rem_euclid(2.0));
        let s1 = Complex64::from_polar(1.0, PI * g.fract());
        let sn = Complex64::from_polar(1.0, PI * (nf * g).rem_euclid(2.0));
        for (m, slot) in out.iter_mut().enumerate() {
            let f = f0 + m as f64 * g;
            let mut w = f.rem_euclid(1.0);
            if w > 0.5 {
                w -= 1.0;
            }
            if 2.0 * PI * w.abs() * c.max(1.0) < SERIES_LIMIT {
                *slot = self.moments(f);
            } else {
                let (s, co) = (r1.im, r1.re);
                let cot = co / s;
                let d = rn.im / s;
                let d_t = nf * rn.re / s - d * cot;
                let d_tt = (1.0 - nf * nf) * d - 2.0 * cot * d_t;
                let e0 = Complex64::new(d, 0.0);
                let e1 = Complex64::new(0.0, -d_t / 2.0);
                let e2 = Complex64::new(-d_tt / 4.0, 0.0);
                // e^{j2πf·c} = e^{jπNf}·e^{−jπf}.
                let shift = rn * r1.conj();
                *slot = [
                    shift * e0,
                    shift * (e1 + e0 * c),
                    shift * (e2 + e1 * (2.0 * c) + e0 * (c * c)),
                ];
            }
            r1 *= s1;
            rn *= sn;
        }
    }

    fn dirichlet(&self, alpha: f64) -> (Complex64, Complex64, Complex64) {
        let nf = self.n as f64;
        let t = alpha / 2.0;
        let (s, co) = t.sin_cos();
        let cot = co / s;
        let (sn, cn) = (nf * t).sin_cos();
        let d = sn / s;
        let d_t = nf * cn / s - d * cot;
        let d_tt = (1.0 - nf * nf) * d - 2.0 * cot * d_t;
        let d_a = d_t / 2.0;
        let d_aa = d_tt / 4.0;
        (
            Complex64::new(d, 0.0),
            Complex64::new(0.0, -d_a),
            Complex64::new(-d_aa, 0.0),
        )
    }

    fn series(&self, alpha: f64) -> (Complex64, Complex64, Complex64) {
        // cos/sin expansions of Σ kᵖ·e^{jαk}; odd centered moments vanish.
        let mu = &self.centered;
        let (mut e0, mut e1, mut e2) = (0.0, 0.0, 0.0);
        let mut term = 1.0; // α^q / q!
        for q in 0..=SERIES_TERMS {
            let sign = if (q / 2) % 2 == 0 { 1.0 } else { -1.0 };
            if q % 2 == 0 {
                e0 += sign * term * mu[q];
                e2 += sign * term * mu[q + 2];
            } else {
                e1 += sign * term * mu[q + 1];
            }
            term *= alpha / (q + 1) as f64;
        }
        (
            Complex64::new(e0, 0.0),
            Complex64::new(0.0, e1),
            Complex64::new(e2, 0.0),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Target;
    use crate::signal::{synthesize_measurement, synthesize_target};

    fn direct(n: usize, f: f64) -> [Complex64; 3] {
        let mut acc = [Complex64::new(0.0, 0.0); 3];
        for i in 0..n {
            let w = rotor(f * i as f64);
            let x = i as f64;
            acc[0] += w;
            acc[1] += w * x;
            acc[2] += w * x * x;
        }
        acc
    }

    #[test]
    fn closed_form_matches_direct_sums() {
        let sums = CrossSums::new(256);
        let scale = [256.0, 256.0 * 255.0 / 2.0, 256.0 * 255.0 * 511.0 / 6.0];
        let fs = [
            0.0, 1e-9, -3e-7, 1e-5, 2e-4, 1.9e-3, 2.0e-3, 0.01, 0.0371, -0.25, 0.5, 0.4999, 3.7, -12.003,
        ];
        for &f in &fs {
            let fast = sums.moments(f);
            let slow = direct(256, f);
            for p in 0..3 {
                let err = (fast[p] - slow[p]).norm() / scale[p];
                assert!(err < 1e-12, "f = {f}, p = {p}: {err:e}");
            }
        }
    }

    #[test]
    fn line_evaluation_matches_pointwise() {
        let sums = CrossSums::new(256);
        let mut out = [[Complex64::new(0.0, 0.0); 3]; 16];
        let scale = [256.0, 256.0 * 255.0 / 2.0, 256.0 * 255.0 * 511.0 / 6.0];
        for &(f0, g) in &[(0.013, 0.0021), (-0.4, 0.05), (0.0, 1e-5), (0.37, -0.09), (1.7, 0.3), (-2.2, -0.061)] {
            sums.moments_line(f0, g, &mut out);
            for (m, got) in out.iter().enumerate() {
                let want = sums.moments(f0 + m as f64 * g);
                for p in 0..3 {
                    assert!((got[p] - want[p]).norm() < 1e-11 * scale[p], "f0 {f0} g {g} m {m} p {p}");
                }
            }
        }
    }

    #[test]
    fn coincident_profiles_sum_to_n_and_integer_offsets_vanish() {
        let cfg = RadarConfig::automotive_77ghz();
        assert_eq!(corr_cross(&cfg, 5.0, 0.001, 5.0, 0.001, 7), Complex64::new(256.0, 0.0));
        let dr = cfg.range_bin() * 3.0;
        for m in 0..16 {
            assert!(corr_cross(&cfg, 5.0 + dr, 0.0, 5.0, 0.0, m).norm() < 1e-9 * 256.0);
        }
    }

    #[test]
    fn matched_correlation_at_truth() {
        let cfg = RadarConfig::automotive_77ghz();
        let t = Target::new(0.7, 0.4, 5.0, 0.3);
        let z = synthesize_target(&cfg, &t).unwrap();
        let u = t.path_difference(&cfg);
        let psi = t.lumped_phase(&cfg);
        for m in 0..16 {
            let expected = Complex64::from_polar(0.7 * 256.0, -psi - 2.0 * PI * u / cfg.wavelength() * m as f64);
            assert!((corr_single(&z, 5.0, u, m) - expected).norm() < 1e-9);
        }
        let t0 = Target::new(0.7, 0.4, 5.0, 0.0);
        let z0 = synthesize_target(&cfg, &t0).unwrap();
        assert!(corr_single(&z0, 5.0 + cfg.range_bin(), 0.0, 0).norm() < 1e-9 * 0.7 * 256.0);
    }

    #[test]
    fn moments_match_extended_precision_naive_sum() {
        // Compensated accumulation of the naive sum serves as the reference.
        let cfg = RadarConfig::automotive_77ghz();
        let z = synthesize_measurement(&cfg, &[Target::at(3.0, 20.0)], 1.0, 8).unwrap();
        for (m, f) in [(0usize, 0.3127), (5, 53.41), (15, -2.2)] {
            let fast = correlation_moments(&z, m, f);
            for p in 0..3 {
                let (mut re, mut im) = (TwoSum::default(), TwoSum::default());
                for (n, v) in z.column(m).enumerate() {
                    let w = rotor(f * n as f64);
                    let t = v.conj() * w * (n as f64).powi(p as i32);
                    re.add(t.re);
                    im.add(t.im);
                }
                let slow = Complex64::new(re.value(), im.value());
                let scale: f64 = z.column(m).enumerate().map(|(n, v)| v.norm() * (n as f64).powi(p as i32)).sum();
                assert!((fast[p] - slow).norm() < 1e-12 * scale, "m {m} p {p}");
            }
        }
    }

    /// Compensated (Neumaier) summation.
    #[derive(Default)]
    struct TwoSum {
        sum: f64,
        comp: f64,
    }

    impl TwoSum {
        fn add(&mut self, x: f64) {
            let t = self.sum + x;
            if self.sum.abs() >= x.abs() {
                self.comp += (self.sum - t) + x;
            } else {
                self.comp += (x - t) + self.sum;
            }
            self.sum = t;
        }

        fn value(&self) -> f64 {
            self.sum + self.comp
        }
    }
}

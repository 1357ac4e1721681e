//! Joint maximum-likelihood estimation of (a, ψ, r, u) for K targets.
//!
//! The objective is
//!
//! ```text
//! Λ = −Σ_m Σ_k 2a_k·Re[e^{jφ_k,m}·R_k^(m)]
//!     + Σ_m Σ_k Σ_{l≠k} a_k·a_l·e^{jφ_k,m}·e^{−jφ_l,m}·R_{l,k}^(m)
//!     + MN·Σ_k a_k²,          φ_k,m = ψ_k + 2π(u_k/λ)·m
//! ```
//!
//! which equals ‖z − model‖² − ‖z‖², so estimates are found at its
//! minimum. Each iteration updates all phases in closed form, solves
//! the amplitudes jointly, and takes one safeguarded Newton step in u and
//! then in r for every target.

mod corr;

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use corr::{corr_cross, corr_single, correlation_moments, CrossSums};

use crate::config::{wrap_phase, RadarConfig};
use crate::error::{Error, Result};
use crate::estimate::TargetEstimate;
use crate::signal::MeasurementMatrix;
use crate::spectral::{self, GridSpec};

/// Parameters of one target inside the estimator; u is the path
/// difference d·sinθ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlTarget {
    pub a: f64,
    pub psi: f64,
    pub r: f64,
    pub u: f64,
}

impl MlTarget {
    pub fn from_estimate(config: &RadarConfig, e: &TargetEstimate) -> Self {
        MlTarget {
            a: e.a,
            psi: e.psi,
            r: e.r,
            u: config.spacing() * e.theta.sin(),
        }
    }

    pub fn to_estimate(&self, config: &RadarConfig) -> TargetEstimate {
        TargetEstimate {
            a: self.a,
            psi: self.psi,
            r: self.r,
            theta: (self.u / config.spacing()).clamp(-1.0, 1.0).asin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlState {
    pub targets: Vec<MlTarget>,
    pub iteration: usize,
    pub likelihood: f64,
}

impl MlState {
    /// State at the given targets with Λ evaluated.
    pub fn new(z: &MeasurementMatrix, targets: Vec<MlTarget>) -> Self {
        let likelihood = Model::new(z, &targets).likelihood();
        MlState {
            targets,
            iteration: 0,
            likelihood,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlSettings {
    /// Stop when |Λ(i) − Λ(i−1)| < delta·|Λ(0)|.
    pub delta: f64,
    pub max_iters: usize,
    /// Newton step cap in u, as a fraction of the native angle bin λ/M.
    pub max_step_u_bins: f64,
    /// Newton step cap in r, as a fraction of the native range bin c/(2B).
    pub max_step_r_bins: f64,
    /// Replace Newton steps taken against the wrong curvature by a
    /// capped descent step.
    pub hessian_guard: bool,
    /// Largest acceptable condition number of the amplitude system.
    pub max_condition: f64,
}

impl Default for MlSettings {
    fn default() -> Self {
        MlSettings {
            delta: 1e-13,
            max_iters: 100,
            max_step_u_bins: 0.125,
            max_step_r_bins: 0.125,
            hessian_guard: true,
            max_condition: 1e12,
        }
    }
}

impl MlSettings {
    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.delta) || self.max_iters == 0 {
            return Err(Error::InvalidArgument("ML settings need delta > 0 and max_iters >= 1".into()));
        }
        if !positive(self.max_step_u_bins) || !positive(self.max_step_r_bins) || !positive(self.max_condition) {
            return Err(Error::InvalidArgument("ML step caps and condition limit must be positive".into()));
        }
        Ok(())
    }

    fn max_step_u(&self, config: &RadarConfig) -> f64 {
        self.max_step_u_bins * config.wavelength() / config.virtual_elements() as f64
    }

    fn max_step_r(&self, config: &RadarConfig) -> f64 {
        self.max_step_r_bins * config.range_bin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub likelihood: f64,
    pub targets: Vec<MlTarget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub initial_likelihood: f64,
    pub likelihood: f64,
    /// Newton steps replaced by the capped descent fallback.
    pub fallback_steps: usize,
    /// Phase updates skipped because the combined correlation vanished.
    pub degenerate_phase_updates: usize,
    /// Iteration 0 is the initialization.
    pub history: Vec<IterationRecord>,
}

impl Diagnostics {
    /// `iter,lambda,r_1,u_1,a_1,psi_1,...` rows, one per iteration.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let k = self.history.first().map_or(0, |h| h.targets.len());
        write!(w, "iter,lambda")?;
        for i in 1..=k {
            write!(w, ",r_{i},u_{i},a_{i},psi_{i}")?;
        }
        writeln!(w)?;
        for rec in &self.history {
            write!(w, "{},{}", rec.iteration, rec.likelihood)?;
            for t in &rec.targets {
                write!(w, ",{},{},{},{}", t.r, t.u, t.a, t.psi)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlOutput {
    pub estimates: Vec<TargetEstimate>,
    pub state: MlState,
    pub diagnostics: Diagnostics,
}

/// Cached correlation moments for a set of targets.
///
/// `own[k][m]` holds Σ nᵖ·conj(z)·g_k for p = 0..2 and `cross[(l·K + k)·M + m]`
/// holds Σ nᵖ·conj(g_l)·g_k, i.e. the moments of R_{l,k}^(m).
struct Model<'a> {
    z: &'a MeasurementMatrix,
    cfg: RadarConfig,
    sums: CrossSums,
    targets: Vec<MlTarget>,
    own: Vec<Vec<[Complex64; 3]>>,
    cross: Vec<[Complex64; 3]>,
    /// e^{jφ_k,m} at `steer[k·M + m]`, kept in step with ψ_k and u_k.
    steer: Vec<Complex64>,
}

impl<'a> Model<'a> {
    fn new(z: &'a MeasurementMatrix, targets: &[MlTarget]) -> Self {
        let k = targets.len();
        let m = z.cols();
        let mut model = Model {
            z,
            cfg: *z.config(),
            sums: CrossSums::new(z.rows()),
            targets: targets.to_vec(),
            own: vec![vec![[Complex64::new(0.0, 0.0); 3]; m]; k],
            cross: vec![[Complex64::new(0.0, 0.0); 3]; k * k * m],
            steer: vec![Complex64::new(0.0, 0.0); k * m],
        };
        for i in 0..k {
            model.refresh_own(i);
            model.refresh_steer(i);
        }
        for i in 0..k {
            for l in 0..i {
                model.refresh_pair(l, i);
            }
        }
        model
    }

    fn k(&self) -> usize {
        self.targets.len()
    }

    fn m(&self) -> usize {
        self.z.cols()
    }

    fn refresh_own(&mut self, k: usize) {
        let t = self.targets[k];
        for m in 0..self.m() {
            let f = corr::beat_cycles(&self.cfg, t.r, t.u, m);
            self.own[k][m] = correlation_moments(self.z, m, f);
        }
    }

    fn refresh_pair(&mut self, l: usize, k: usize) {
        let (tl, tk) = (self.targets[l], self.targets[k]);
        let (kk, mm) = (self.k(), self.m());
        let scale = self.cfg.beat_scale();
        let lk = (l * kk + k) * mm;
        self.sums
            .moments_line(2.0 * (tk.r - tl.r) * scale, (tk.u - tl.u) * scale, &mut self.cross[lk..lk + mm]);
        let kl = (k * kk + l) * mm;
        for m in 0..mm {
            let v = self.cross[lk + m];
            self.cross[kl + m] = [v[0].conj(), v[1].conj(), v[2].conj()];
        }
    }

    fn refresh_steer(&mut self, k: usize) {
        let t = self.targets[k];
        let mm = self.m();
        for m in 0..mm {
            let cycles = (t.u / self.cfg.wavelength() * m as f64).fract();
            self.steer[k * mm + m] = Complex64::from_polar(1.0, t.psi + 2.0 * PI * cycles);
        }
    }

    fn set_psi(&mut self, k: usize, psi: f64) {
        self.targets[k].psi = psi;
        self.refresh_steer(k);
    }

    /// Re-evaluates everything that depends on target k's (r, u).
    fn refresh_target(&mut self, k: usize) {
        self.refresh_own(k);
        self.refresh_steer(k);
        for l in 0..self.k() {
            if l != k {
                self.refresh_pair(l, k);
            }
        }
    }

    #[inline]
    fn cross_at(&self, l: usize, k: usize, m: usize) -> &[Complex64; 3] {
        &self.cross[(l * self.k() + k) * self.m() + m]
    }

    /// e^{jφ_k,m}.
    #[inline]
    fn steer(&self, k: usize, m: usize) -> Complex64 {
        self.steer[k * self.m() + m]
    }

    /// Moments of S_k^(m): the data correlation with the other targets'
    /// contributions removed.
    fn cancelled(&self, k: usize, m: usize) -> [Complex64; 3] {
        let mut s = self.own[k][m];
        for l in 0..self.k() {
            if l == k {
                continue;
            }
            let w = self.steer(l, m).conj() * self.targets[l].a;
            let c = self.cross_at(l, k, m);
            for p in 0..3 {
                s[p] -= w * c[p];
            }
        }
        s
    }

    fn likelihood(&self) -> f64 {
        let (kk, mm) = (self.k(), self.m());
        let mut lam = 0.0;
        for k in 0..kk {
            let ak = self.targets[k].a;
            lam += (self.z.rows() * mm) as f64 * ak * ak;
            for m in 0..mm {
                let ek = self.steer(k, m);
                lam -= 2.0 * ak * (ek * self.own[k][m][0]).re;
                for l in 0..kk {
                    if l != k {
                        let el = self.steer(l, m).conj();
                        lam += ak * self.targets[l].a * (ek * el * self.cross_at(l, k, m)[0]).re;
                    }
                }
            }
        }
        lam
    }

    /// ψ_k = −arg Σ_m e^{j2π(u_k/λ)m}·S_k^(m); `None` when the sum vanishes.
    fn psi_update(&self, k: usize) -> Option<f64> {
        let psi_k = self.targets[k].psi;
        let sum: Complex64 = (0..self.m())
            .map(|m| self.steer(k, m) * Complex64::from_polar(1.0, -psi_k) * self.cancelled(k, m)[0])
            .sum();
        if sum.norm() > 0.0 && sum.norm().is_finite() {
            Some(wrap_phase(-sum.arg()))
        } else {
            None
        }
    }

    fn amplitude_system(&self) -> (DMatrix<f64>, DVector<f64>) {
        let (kk, mm) = (self.k(), self.m());
        let mn = (self.z.rows() * mm) as f64;
        let mut b = DMatrix::<f64>::zeros(kk, kk);
        let mut y = DVector::<f64>::zeros(kk);
        for k in 0..kk {
            b[(k, k)] = mn;
            for m in 0..mm {
                let ek = self.steer(k, m);
                y[k] += (ek * self.own[k][m][0]).re;
                for l in 0..kk {
                    if l != k {
                        b[(k, l)] += (ek * self.steer(l, m).conj() * self.cross_at(l, k, m)[0]).re;
                    }
                }
            }
        }
        (b, y)
    }

    fn solve_amplitudes(&self, max_condition: f64) -> Result<Vec<f64>> {
        let (b, y) = self.amplitude_system();
        if b.nrows() > 1 {
            let eig = b.clone().symmetric_eigen();
            let (lo, hi) = eig
                .eigenvalues
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
            let condition = hi / lo;
            if !(condition <= max_condition) {
                return Err(Error::IllConditioned { condition });
            }
        }
        let a = b
            .lu()
            .solve(&y)
            .ok_or(Error::IllConditioned { condition: f64::INFINITY })?;
        Ok(a.iter().copied().collect())
    }

    fn u_derivatives(&self, k: usize) -> (f64, f64) {
        let a = self.targets[k].a;
        let kappa = 2.0 * PI * self.cfg.beat_scale();
        let w = 2.0 * PI / self.cfg.wavelength();
        let (mut f, mut fp) = (0.0, 0.0);
        for m in 0..self.m() {
            let mf = m as f64;
            let e = self.steer(k, m);
            let s = self.cancelled(k, m);
            let es = e * s[0];
            let ds = e * s[1] * Complex64::new(0.0, kappa * mf);
            let dds = e * s[2] * (-(kappa * mf) * (kappa * mf));
            f += 2.0 * w * a * mf * es.im - 2.0 * a * ds.re;
            fp += 2.0 * w * w * a * mf * mf * es.re + 4.0 * w * a * mf * ds.im - 2.0 * a * dds.re;
        }
        (f, fp)
    }

    fn r_derivatives(&self, k: usize) -> (f64, f64) {
        let a = self.targets[k].a;
        let kappa = 4.0 * PI * self.cfg.beat_scale();
        let (mut f, mut fp) = (0.0, 0.0);
        for m in 0..self.m() {
            let e = self.steer(k, m);
            let s = self.cancelled(k, m);
            f -= 2.0 * a * (e * s[1] * Complex64::new(0.0, kappa)).re;
            fp -= 2.0 * a * (e * s[2] * (-kappa * kappa)).re;
        }
        (f, fp)
    }

    fn set_amplitudes(&mut self, a: &[f64]) {
        for (k, &v) in a.iter().enumerate() {
            // A negative amplitude is the same model with ψ shifted by π.
            if v < 0.0 {
                self.targets[k].a = -v;
                let psi = wrap_phase(self.targets[k].psi + PI);
                self.set_psi(k, psi);
            } else {
                self.targets[k].a = v;
            }
        }
    }
}

/// One safeguarded Newton step for a minimum: returns the increment and
/// whether the fallback was used.
fn newton_increment(f: f64, fp: f64, max_step: f64, guard: bool) -> (f64, bool) {
    if guard && !(fp > 0.0) {
        (-f.signum() * max_step * (f != 0.0) as u8 as f64, true)
    } else {
        ((-f / fp).clamp(-max_step, max_step), false)
    }
}

fn check_finite(quantity: &'static str, v: f64, target: usize, iteration: usize) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteDerivative {
            quantity,
            target,
            iteration,
        })
    }
}

/// Λ at the state's parameters.
pub fn likelihood(state: &MlState, z: &MeasurementMatrix) -> f64 {
    Model::new(z, &state.targets).likelihood()
}

/// S_k^(m) = R_k^(m) − Σ_{l≠k} a_l·e^{−jφ_l,m}·R_{l,k}^(m).
pub fn cancelled_correlation(state: &MlState, z: &MeasurementMatrix, k: usize, m: usize) -> Complex64 {
    Model::new(z, &state.targets).cancelled(k, m)[0]
}

/// Closed-form phase update for target k; keeps the current phase when
/// the combined correlation vanishes.
pub fn update_psi(state: &MlState, z: &MeasurementMatrix, k: usize) -> f64 {
    Model::new(z, &state.targets)
        .psi_update(k)
        .unwrap_or(state.targets[k].psi)
}

/// Joint amplitude solve B·a = y with B(k,k) = MN.
pub fn update_amplitudes(state: &MlState, z: &MeasurementMatrix) -> Result<Vec<f64>> {
    Model::new(z, &state.targets).solve_amplitudes(MlSettings::default().max_condition)
}

/// The amplitude system (B, y) at the state's parameters.
pub fn amplitude_system(state: &MlState, z: &MeasurementMatrix) -> (DMatrix<f64>, DVector<f64>) {
    Model::new(z, &state.targets).amplitude_system()
}

/// (∂Λ/∂u_k, ∂²Λ/∂u_k²).
pub fn u_derivatives(state: &MlState, z: &MeasurementMatrix, k: usize) -> (f64, f64) {
    Model::new(z, &state.targets).u_derivatives(k)
}

/// (∂Λ/∂r_k, ∂²Λ/∂r_k²).
pub fn r_derivatives(state: &MlState, z: &MeasurementMatrix, k: usize) -> (f64, f64) {
    Model::new(z, &state.targets).r_derivatives(k)
}

/// One Newton step in u_k, capped and kept inside |u| ≤ d.
pub fn newton_step_u(state: &MlState, z: &MeasurementMatrix, k: usize, settings: &MlSettings) -> Result<f64> {
    let cfg = z.config();
    let (f, fp) = u_derivatives(state, z, k);
    check_finite("f_u", f, k, state.iteration)?;
    check_finite("f_u'", fp, k, state.iteration)?;
    let (du, _) = newton_increment(f, fp, settings.max_step_u(cfg), settings.hessian_guard);
    Ok((state.targets[k].u + du).clamp(-cfg.spacing(), cfg.spacing()))
}

/// One Newton step in r_k, capped and kept inside the unambiguous range.
pub fn newton_step_r(state: &MlState, z: &MeasurementMatrix, k: usize, settings: &MlSettings) -> Result<f64> {
    let cfg = z.config();
    let (f, fp) = r_derivatives(state, z, k);
    check_finite("f_r", f, k, state.iteration)?;
    check_finite("f_r'", fp, k, state.iteration)?;
    let (dr, _) = newton_increment(f, fp, settings.max_step_r(cfg), settings.hessian_guard);
    Ok((state.targets[k].r + dr).clamp(0.0, cfg.unambiguous_range()))
}

/// Initial (r, u) from the K strongest peaks of the native N×M spectrum.
fn native_grid_seeds(z: &MeasurementMatrix, k: usize) -> Result<Vec<MlTarget>> {
    let grid = GridSpec::uniform(1);
    let spectrum = spectral::fft2d_spectrum(z, 1, 1);
    let seeds = spectral::fft2d::coarse_candidates(&spectrum, z, k, &grid);
    let cfg = z.config();
    let peaks: Vec<_> = seeds
        .iter()
        .map(|&(x, y, v)| spectral::fft2d::make_peak(z, x, y, spectral::ColumnTransform::new(z, x).at(y), v))
        .collect();
    if peaks.len() < k {
        return Err(Error::Unresolved {
            requested: k,
            found: peaks,
        });
    }
    Ok(peaks
        .iter()
        .map(|p| MlTarget {
            a: 0.0,
            psi: 0.0,
            r: p.estimate.r,
            u: cfg.index_to_path(cfg.signed_angle_index(p.bin.m_p)),
        })
        .collect())
}

/// Runs the coordinate-update iteration for K targets.
///
/// Without `init`, (r, u) start at the strongest native-grid peaks. In
/// both cases ψ starts at −arg Σ_m e^{j2π(u/λ)m}·R^(m) (interference
/// ignored) and the amplitudes at the joint solve. Iteration stops when
/// |Λ(i) − Λ(i−1)| < delta·|Λ(0)| or after `max_iters`; the result is
/// returned either way with `converged` set accordingly.
pub fn estimate(
    z: &MeasurementMatrix,
    k: usize,
    settings: &MlSettings,
    init: Option<&[TargetEstimate]>,
) -> Result<MlOutput> {
    settings.validate()?;
    if k == 0 {
        return Err(Error::InvalidArgument("target count must be >= 1".into()));
    }
    let cfg = *z.config();
    let start = match init {
        Some(seeds) => {
            if seeds.len() != k {
                return Err(Error::InvalidArgument(format!(
                    "{} initial estimates supplied for {k} targets",
                    seeds.len()
                )));
            }
            seeds.iter().map(|e| MlTarget::from_estimate(&cfg, e)).collect()
        }
        None => native_grid_seeds(z, k)?,
    };

    let mut model = Model::new(z, &start);
    for i in 0..k {
        let sum: Complex64 = (0..model.m())
            .map(|m| {
                let cycles = (model.targets[i].u / cfg.wavelength() * m as f64).fract();
                Complex64::from_polar(1.0, 2.0 * PI * cycles) * model.own[i][m][0]
            })
            .sum();
        let psi = if sum.norm() > 0.0 { wrap_phase(-sum.arg()) } else { 0.0 };
        model.set_psi(i, psi);
    }
    let a0 = model.solve_amplitudes(settings.max_condition)?;
    model.set_amplitudes(&a0);

    let initial = model.likelihood();
    let threshold = settings.delta * initial.abs().max(f64::MIN_POSITIVE);
    let (step_u, step_r) = (settings.max_step_u(&cfg), settings.max_step_r(&cfg));
    let mut diag = Diagnostics {
        iterations: 0,
        converged: false,
        initial_likelihood: initial,
        likelihood: initial,
        fallback_steps: 0,
        degenerate_phase_updates: 0,
        history: vec![IterationRecord {
            iteration: 0,
            likelihood: initial,
            targets: model.targets.clone(),
        }],
    };

    let mut previous = initial;
    for iteration in 1..=settings.max_iters {
        for i in 0..k {
            match model.psi_update(i) {
                Some(p) => model.set_psi(i, p),
                None => diag.degenerate_phase_updates += 1,
            }
        }
        let a = model.solve_amplitudes(settings.max_condition)?;
        model.set_amplitudes(&a);

        for i in 0..k {
            let (f, fp) = model.u_derivatives(i);
            check_finite("f_u", f, i, iteration)?;
            check_finite("f_u'", fp, i, iteration)?;
            let (du, fell_back) = newton_increment(f, fp, step_u, settings.hessian_guard);
            diag.fallback_steps += fell_back as usize;
            let t = &mut model.targets[i];
            t.u = (t.u + du).clamp(-cfg.spacing(), cfg.spacing());
            model.refresh_target(i);
        }
        for i in 0..k {
            let (f, fp) = model.r_derivatives(i);
            check_finite("f_r", f, i, iteration)?;
            check_finite("f_r'", fp, i, iteration)?;
            let (dr, fell_back) = newton_increment(f, fp, step_r, settings.hessian_guard);
            diag.fallback_steps += fell_back as usize;
            let t = &mut model.targets[i];
            t.r = (t.r + dr).clamp(0.0, cfg.unambiguous_range());
            model.refresh_target(i);
        }

        let lam = model.likelihood();
        diag.iterations = iteration;
        diag.likelihood = lam;
        diag.history.push(IterationRecord {
            iteration,
            likelihood: lam,
            targets: model.targets.clone(),
        });
        if (lam - previous).abs() < threshold {
            diag.converged = true;
            break;
        }
        previous = lam;
    }

    let state = MlState {
        targets: model.targets.clone(),
        iteration: diag.iterations,
        likelihood: diag.likelihood,
    };
    Ok(MlOutput {
        estimates: state.targets.iter().map(|t| t.to_estimate(&cfg)).collect(),
        state,
        diagnostics: diag,
    })
}

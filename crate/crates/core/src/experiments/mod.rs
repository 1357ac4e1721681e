//! Monte-Carlo RMSE sweeps over SNR and the stationary point-cloud
//! accuracy study.

mod pointcloud;

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use pointcloud::{run_point_cloud, write_point_cloud_csv, write_point_summary_csv, PointCloudSummary, PointRecord};

use crate::config::{load_document, parse_document, RadarConfig, Target};
use crate::crb::crb_at_snr;
use crate::error::{Error, Result};
use crate::estimate::{estimate_targets, Algorithm, EstimatorOptions};
use crate::signal::synthesize_measurement;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub estimators: Vec<Algorithm>,
    #[serde(default)]
    pub seed_base: u64,
    /// Draw each target's reflectivity phase uniformly per trial.
    #[serde(default = "yes")]
    pub random_phase: bool,
}

fn yes() -> bool {
    true
}

/// A Monte-Carlo study. SNR is set from the first target's amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "RadarConfig::automotive_77ghz")]
    pub radar: RadarConfig,
    pub targets: Vec<Target>,
    pub sweep: SweepSettings,
    #[serde(default)]
    pub estimator: EstimatorOptions,
}

impl Scenario {
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let s: Scenario = parse_document(text, overrides)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let s: Scenario = load_document(path, overrides)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::InvalidConfig("scenario has no targets".into()));
        }
        for t in &self.targets {
            t.validate(&self.radar)?;
        }
        let s = &self.sweep;
        if s.trials == 0 || s.snr_db.is_empty() || s.estimators.is_empty() {
            return Err(Error::InvalidConfig("sweep needs trials >= 1, SNR points and estimators".into()));
        }
        if s.snr_db.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite SNR".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RmseRow {
    pub estimator: Algorithm,
    pub snr_db: f64,
    pub target: usize,
    /// m.
    pub rmse_r: f64,
    /// degrees.
    pub rmse_theta_deg: f64,
    /// Trials with an estimate associated to this target.
    pub associated: usize,
    /// Trials where the estimator returned an error.
    pub failures: usize,
    pub crb_r: f64,
    pub crb_theta_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RmseTable {
    pub trials: usize,
    pub rows: Vec<RmseRow>,
}

impl RmseTable {
    pub fn get(&self, estimator: Algorithm, snr_db: f64, target: usize) -> Option<&RmseRow> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.snr_db == snr_db && r.target == target)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "estimator,snr_db,target,rmse_r_m,rmse_theta_deg,associated,failures,trials,crb_r_m,crb_theta_deg"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.estimator,
                r.snr_db,
                r.target,
                r.rmse_r,
                r.rmse_theta_deg,
                r.associated,
                r.failures,
                self.trials,
                r.crb_r,
                r.crb_theta_deg
            )?;
        }
        Ok(())
    }
}

/// Greedy nearest-first matching of truths to estimates in native-bin
/// units (range bins and sinθ bins of 2/M). Returns, per truth, the index
/// of its estimate. With `gate`, pairs farther apart stay unmatched.
pub fn associate(
    config: &RadarConfig,
    truths: &[(f64, f64)],
    estimates: &[(f64, f64)],
    gate: Option<f64>,
) -> Vec<Option<usize>> {
    let angle_bin = 2.0 / config.virtual_elements() as f64;
    let mut pairs = Vec::with_capacity(truths.len() * estimates.len());
    for (i, t) in truths.iter().enumerate() {
        for (j, e) in estimates.iter().enumerate() {
            let dr = (e.0 - t.0) / config.range_bin();
            let du = (e.1.sin() - t.1.sin()) / angle_bin;
            pairs.push((dr.hypot(du), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = vec![None; truths.len()];
    let mut used = vec![false; estimates.len()];
    for (d, i, j) in pairs {
        if gate.is_some_and(|g| d > g) {
            break;
        }
        if out[i].is_none() && !used[j] {
            out[i] = Some(j);
            used[j] = true;
        }
    }
    out
}

/// Squared errors of one estimator in one trial, per target.
type TrialErrors = std::result::Result<Vec<Option<(f64, f64)>>, ()>;

/// Runs every estimator on every trial at every SNR. Trial t uses seed
/// `seed_base + t` for its phases and noise at all SNR points, so the
/// sweep is reproducible and common random numbers are shared across
/// estimators.
pub fn run_rmse_sweep(scenario: &Scenario) -> Result<RmseTable> {
    scenario.validate()?;
    let sweep = &scenario.sweep;
    let cfg = &scenario.radar;
    let truth: Vec<(f64, f64)> = scenario.targets.iter().map(|t| (t.r, t.theta)).collect();
    let reference_a = scenario.targets[0].a;
    let mut rows = Vec::new();
    for &snr in &sweep.snr_db {
        let sigma = cfg.sigma_for_snr(reference_a, snr);
        let per_trial: Vec<Result<Vec<TrialErrors>>> = (0..sweep.trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = ChaCha8Rng::seed_from_u64(sweep.seed_base.wrapping_add(trial as u64));
                let targets: Vec<Target> = scenario
                    .targets
                    .iter()
                    .map(|t| {
                        let phi = rng.gen_range(0.0..2.0 * PI);
                        Target {
                            phi: if sweep.random_phase { phi } else { t.phi },
                            ..*t
                        }
                    })
                    .collect();
                let z = synthesize_measurement(cfg, &targets, sigma, rng.gen())?;
                sweep
                    .estimators
                    .iter()
                    .map(|&alg| match estimate_targets(alg, &z, targets.len(), &scenario.estimator) {
                        Ok(out) => {
                            let est: Vec<_> = out.estimates.iter().map(|e| (e.r, e.theta)).collect();
                            let assoc = associate(cfg, &truth, &est, None);
                            Ok(Ok(assoc
                                .iter()
                                .zip(&truth)
                                .map(|(a, t)| a.map(|j| (est[j].0 - t.0, est[j].1 - t.1)))
                                .collect()))
                        }
                        Err(e) if e.is_numerical() => Ok(Err(())),
                        Err(e) => Err(e),
                    })
                    .collect()
            })
            .collect();
        let per_trial: Vec<Vec<TrialErrors>> = per_trial.into_iter().collect::<Result<_>>()?;

        for (ei, &alg) in sweep.estimators.iter().enumerate() {
            for (k, target) in scenario.targets.iter().enumerate() {
                let (mut se_r, mut se_t, mut n, mut failures) = (0.0, 0.0, 0usize, 0usize);
                for trial in &per_trial {
                    match &trial[ei] {
                        Ok(errs) => {
                            if let Some((er, et)) = errs[k] {
                                se_r += er * er;
                                se_t += et * et;
                                n += 1;
                            }
                        }
                        Err(()) => failures += 1,
                    }
                }
                let crb = crb_at_snr(cfg, target, snr)?;
                let rms = |s: f64| if n > 0 { (s / n as f64).sqrt() } else { f64::NAN };
                rows.push(RmseRow {
                    estimator: alg,
                    snr_db: snr,
                    target: k,
                    rmse_r: rms(se_r),
                    rmse_theta_deg: rms(se_t).to_degrees(),
                    associated: n,
                    failures,
                    crb_r: crb.sigma_r,
                    crb_theta_deg: crb.sigma_theta.to_degrees(),
                });
            }
        }
    }
    Ok(RmseTable {
        trials: sweep.trials,
        rows,
    })
}

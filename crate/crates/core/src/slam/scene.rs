//! Parking scene description and per-frame radar observation.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::icp::IcpSettings;
use super::path::PathSpec;
use super::vehicle::{ControllerGains, VehicleParams, VehiclePose};
use super::{rotation, PointCloud, Vec2};
use crate::config::{load_document, parse_document, wrap_phase, RadarConfig, Target};
use crate::error::{Error, Result};
use crate::estimate::{estimate_best_effort, Algorithm, EstimatorOptions};
use crate::experiments::associate;
use crate::signal::synthesize_measurement;

/// Radar position and orientation in the vehicle frame (x right, y forward).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarMount {
    pub name: String,
    pub position: [f64; 2],
    /// Boresight direction, degrees counter-clockwise from the forward axis.
    pub boresight_deg: f64,
    #[serde(default = "default_fov")]
    pub fov_deg: f64,
}

fn default_fov() -> f64 {
    120.0
}

impl RadarMount {
    fn pos(&self) -> Vec2 {
        Vec2::new(self.position[0], self.position[1])
    }

    /// Vehicle-frame point at range `r` and array angle `theta` (rad,
    /// counter-clockwise from boresight).
    pub fn to_vehicle(&self, r: f64, theta: f64) -> Vec2 {
        let a = self.boresight_deg.to_radians() + theta;
        self.pos() + Vec2::new(-a.sin(), a.cos()) * r
    }

    /// Inverse of [`RadarMount::to_vehicle`].
    pub fn to_polar(&self, p: &Vec2) -> (f64, f64) {
        let d = p - self.pos();
        let a = (-d.x).atan2(d.y);
        (d.norm(), wrap_phase(a - self.boresight_deg.to_radians()))
    }
}

/// A parked car as an oriented rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub center: [f64; 2],
    /// Direction of the long axis, degrees from the ground x axis.
    pub heading_deg: f64,
    pub width: f64,
    pub length: f64,
}

impl Obstacle {
    /// True when the open segment p–q passes through the rectangle shrunk
    /// by `margin`, so points on the outline do not block themselves.
    pub fn blocks(&self, p: &Vec2, q: &Vec2, margin: f64) -> bool {
        let r = rotation(self.heading_deg.to_radians()).transpose();
        let c = Vec2::new(self.center[0], self.center[1]);
        let (a, b) = (r * (p - c), r * (q - c));
        let half = [self.length / 2.0 - margin, self.width / 2.0 - margin];
        let d = b - a;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for axis in 0..2 {
            for (num, den) in [(a[axis] + half[axis], -d[axis]), (half[axis] - a[axis], d[axis])] {
                if den == 0.0 {
                    if num < 0.0 {
                        return false;
                    }
                } else {
                    let t = num / den;
                    if den < 0.0 {
                        t0 = t0.max(t);
                    } else {
                        t1 = t1.min(t);
                    }
                }
            }
        }
        t0 < t1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSettings {
    /// Per-frame speed error, m/s.
    pub velocity: f64,
    /// Per-frame heading error, degrees.
    pub heading_deg: f64,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        NoiseSettings {
            velocity: 0.1,
            heading_deg: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSettings {
    /// Frame interval, s.
    pub dt: f64,
    pub max_frames: usize,
    /// m/s.
    pub cruise_speed: f64,
    /// Braking used to shape the speed profile near the goal, m/s².
    pub decel: f64,
    pub stop_distance: f64,
    pub stop_heading_deg: f64,
    /// Per-scatterer SNR, dB.
    pub snr_db: f64,
    /// Scatterers beyond this range are not seen, m.
    pub max_range: f64,
    /// Points from different radars closer than this are merged, m.
    pub fusion_radius: f64,
    /// Keep one reflectivity phase per scatterer for a whole parking run
    /// instead of drawing a fresh one every frame.
    pub fixed_phases: bool,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        SimulationSettings {
            dt: 0.01,
            max_frames: 1000,
            cruise_speed: 1.95,
            decel: 3.0,
            stop_distance: 0.05,
            stop_heading_deg: 1.0,
            snr_db: 20.0,
            max_range: 9.0,
            fusion_radius: 0.1,
            fixed_phases: true,
        }
    }
}

/// Everything the point-cloud and parking experiments need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParkingScene {
    #[serde(default = "RadarConfig::automotive_77ghz")]
    pub radar: RadarConfig,
    #[serde(default)]
    pub vehicle: VehicleParams,
    pub mounts: Vec<RadarMount>,
    pub obstacles: Vec<Obstacle>,
    /// Ground coordinates, m.
    pub scatterers: Vec<[f64; 2]>,
    pub path: PathSpec,
    /// Pose for the stationary point-cloud experiment: x, y (m), heading (deg).
    pub snapshot: [f64; 3],
    #[serde(default)]
    pub controller: ControllerGains,
    #[serde(default)]
    pub noise: NoiseSettings,
    #[serde(default)]
    pub icp: IcpSettings,
    #[serde(default)]
    pub estimator: EstimatorOptions,
    #[serde(default)]
    pub simulation: SimulationSettings,
}

/// The bundled two-car back-in scene.
pub const DEFAULT_SCENE: &str = include_str!("../../scenes/parking.toml");

impl ParkingScene {
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_SCENE, &[]).expect("bundled scene parses")
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let scene: ParkingScene = parse_document(text, overrides)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let scene: ParkingScene = load_document(path, overrides)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mounts.is_empty() {
            return Err(Error::InvalidConfig("scene has no radar mounts".into()));
        }
        for m in &self.mounts {
            if !(m.fov_deg > 0.0 && m.fov_deg < 180.0) {
                return Err(Error::InvalidConfig(format!("mount `{}` FOV must be in (0, 180) deg", m.name)));
            }
        }
        let s = &self.simulation;
        if !(s.dt > 0.0) || s.max_frames == 0 || !(s.cruise_speed > 0.0) || !(s.decel > 0.0) {
            return Err(Error::InvalidConfig("simulation dt, max_frames, cruise_speed and decel must be > 0".into()));
        }
        if s.max_range >= self.radar.unambiguous_range() {
            return Err(Error::InvalidConfig(format!(
                "max_range {} m reaches the unambiguous range {:.3} m",
                s.max_range,
                self.radar.unambiguous_range()
            )));
        }
        self.icp.validate()
    }

    pub fn snapshot_pose(&self) -> VehiclePose {
        VehiclePose::new(self.snapshot[0], self.snapshot[1], self.snapshot[2].to_radians(), 0.0)
    }

    pub fn scatterer(&self, k: usize) -> Vec2 {
        Vec2::new(self.scatterers[k][0], self.scatterers[k][1])
    }

    /// Ground to vehicle frame for `pose`.
    pub fn to_vehicle_frame(pose: &VehiclePose, p: &Vec2) -> Vec2 {
        rotation(pose.psi - FRAC_PI_2).transpose() * (p - pose.position())
    }

    /// Per mount, the scatterers inside its FOV and range and not hidden
    /// behind an obstacle, as `(index, r, theta)`.
    pub fn visible(&self, pose: &VehiclePose) -> Vec<Vec<(usize, f64, f64)>> {
        let to_ground = rotation(pose.psi - FRAC_PI_2);
        self.mounts
            .iter()
            .map(|mount| {
                let origin = pose.position() + to_ground * mount.pos();
                let half_fov = mount.fov_deg.to_radians() / 2.0;
                (0..self.scatterers.len())
                    .filter_map(|k| {
                        let s = self.scatterer(k);
                        let (r, theta) = mount.to_polar(&Self::to_vehicle_frame(pose, &s));
                        let seen = theta.abs() <= half_fov
                            && r > 0.0
                            && r <= self.simulation.max_range
                            && !self.obstacles.iter().any(|o| o.blocks(&origin, &s, 1e-2));
                        seen.then_some((k, r, theta))
                    })
                    .collect()
            })
            .collect()
    }

    /// Synthesizes each radar's measurement from the true pose, estimates
    /// the scatterers and fuses them into one vehicle-frame cloud.
    /// `phases` holds one reflectivity phase per scatterer; without it a
    /// fresh phase is drawn per scatterer and radar.
    pub fn observe(
        &self,
        pose: &VehiclePose,
        estimator: SceneEstimator,
        phases: Option<&[f64]>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Observation> {
        if phases.is_some_and(|p| p.len() != self.scatterers.len()) {
            return Err(Error::InvalidArgument("one phase per scatterer is required".into()));
        }
        let sigma = self.radar.sigma_for_snr(1.0, self.simulation.snr_db);
        let mut detections = Vec::new();
        let mut candidates = Vec::new();
        let mut failed_radars = 0;
        for (ri, seen) in self.visible(pose).into_iter().enumerate() {
            if seen.is_empty() {
                continue;
            }
            let truth: Vec<(f64, f64)> = seen.iter().map(|&(_, r, t)| (r, t)).collect();
            let estimates: Vec<(f64, f64)> = match estimator {
                SceneEstimator::Exact => truth.clone(),
                SceneEstimator::Radar(alg) => {
                    let targets: Vec<Target> = seen
                        .iter()
                        .map(|&(k, r, t)| {
                            let psi = phases.map_or_else(|| rng.gen_range(0.0..2.0 * PI), |p| p[k]);
                            Target::new(1.0, psi, r, t)
                        })
                        .collect();
                    let z = synthesize_measurement(&self.radar, &targets, sigma, rng.gen())?;
                    match estimate_best_effort(alg, &z, targets.len(), &self.estimator) {
                        Ok(out) => out.estimates.iter().map(|e| (e.r, e.theta)).collect(),
                        Err(e) if e.is_numerical() => {
                            failed_radars += 1;
                            Vec::new()
                        }
                        Err(e) => return Err(e),
                    }
                }
            };
            let mount = &self.mounts[ri];
            let assoc = associate(&self.radar, &truth, &estimates, Some(ASSOCIATION_GATE));
            for (j, &(k, r, theta)) in seen.iter().enumerate() {
                detections.push(Detection {
                    radar: ri,
                    scatterer: k,
                    r,
                    theta,
                    estimate: assoc[j].map(|i| estimates[i]),
                    position: Self::to_vehicle_frame(pose, &self.scatterer(k)),
                });
            }
            for &(r, theta) in &estimates {
                candidates.push((r, ri, mount.to_vehicle(r, theta)));
            }
        }
        // Shortest range first stands in for the strongest return.
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut kept: Vec<(usize, Vec2)> = Vec::new();
        for (_, ri, p) in candidates {
            let duplicate = kept
                .iter()
                .any(|(rj, q)| *rj != ri && (q - p).norm() < self.simulation.fusion_radius);
            if !duplicate {
                kept.push((ri, p));
            }
        }
        Ok(Observation {
            cloud: PointCloud {
                points: kept.into_iter().map(|(_, p)| p).collect(),
                frame: pose.frame,
            },
            detections,
            failed_radars,
        })
    }
}

/// Truth-to-estimate gate in native-bin units.
const ASSOCIATION_GATE: f64 = 3.0;

/// Source of scatterer estimates inside the scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SceneEstimator {
    /// Error-free positions.
    Exact,
    Radar(Algorithm),
}

impl fmt::Display for SceneEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SceneEstimator::Exact => f.write_str("exact"),
            SceneEstimator::Radar(a) => a.fmt(f),
        }
    }
}

impl SceneEstimator {
    /// The radar algorithm, or `None` for error-free positions.
    pub fn algorithm(self) -> Option<Algorithm> {
        match self {
            SceneEstimator::Exact => None,
            SceneEstimator::Radar(a) => Some(a),
        }
    }
}

impl FromStr for SceneEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" | "oracle" => Ok(SceneEstimator::Exact),
            other => other.parse().map(SceneEstimator::Radar),
        }
    }
}

/// One scatterer seen by one radar in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub radar: usize,
    pub scatterer: usize,
    /// True range (m) and angle (rad).
    pub r: f64,
    pub theta: f64,
    /// Associated estimate, if one fell inside the gate.
    pub estimate: Option<(f64, f64)>,
    /// True vehicle-frame position.
    pub position: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Fused estimated cloud.
    pub cloud: PointCloud,
    pub detections: Vec<Detection>,
    /// Radars whose estimator failed this frame.
    pub failed_radars: usize,
}

//! Closed-loop back-in parking with radar/ICP localization.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::icp::icp;
use super::path::ReferencePath;
use super::scene::{ParkingScene, SceneEstimator};
use super::vehicle::{vehicle_step, Controller, Reference, VehiclePose};
use super::{rotation, to_ground};
use crate::config::wrap_phase;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub frame: usize,
    pub t: f64,
    pub true_x: f64,
    pub true_y: f64,
    pub true_psi: f64,
    pub est_x: f64,
    pub est_y: f64,
    pub est_psi: f64,
    pub n_scatterers: usize,
    /// 0 when the frame was dead-reckoned.
    pub icp_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParkingRun {
    pub estimator: String,
    pub seed: u64,
    pub rows: Vec<TrajectoryRow>,
    /// Frames simulated after the initial one.
    pub frames: usize,
    /// True when the believed pose reached the goal tolerance.
    pub completed: bool,
    /// ‖true − believed‖ at the last frame, m.
    pub final_position_error: f64,
    /// |true − believed| heading at the last frame, rad.
    pub final_heading_error: f64,
    /// ‖true position − goal‖ at the last frame, m.
    pub final_goal_distance: f64,
    pub dead_reckoned_frames: usize,
    pub unconverged_icp_frames: usize,
    pub failed_radar_frames: usize,
}

impl ParkingRun {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "frame,t,true_x,true_y,true_psi,est_x,est_y,est_psi,n_scatterers,icp_iters")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.frame, r.t, r.true_x, r.true_y, r.true_psi, r.est_x, r.est_y, r.est_psi, r.n_scatterers, r.icp_iters
            )?;
        }
        Ok(())
    }
}

/// Runs the parking loop. Per frame: control from the believed pose,
/// vehicle step plus control noise, radar observation at the true pose,
/// ICP against the previous cloud and the ground-frame pose update.
/// A frame whose ICP fails is dead-reckoned from the measured speed.
pub fn run_parking(scene: &ParkingScene, estimator: SceneEstimator, seed: u64) -> Result<ParkingRun> {
    scene.validate()?;
    let path = ReferencePath::from_spec(&scene.path)?;
    let sim = &scene.simulation;
    let dt = sim.dt;
    let direction = if path.reverse { -1.0 } else { 1.0 };
    let start = &path.points[0];
    let mut truth = VehiclePose::new(start.position[0], start.position[1], start.heading, direction * sim.cruise_speed);
    let mut belief = truth;
    // Separate streams keep the vehicle noise identical across estimators.
    let mut motion_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut radar_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_7ada7);
    let v_noise = Normal::new(0.0, scene.noise.velocity).map_err(|e| crate::Error::InvalidConfig(e.to_string()))?;
    let h_noise =
        Normal::new(0.0, scene.noise.heading_deg.to_radians()).map_err(|e| crate::Error::InvalidConfig(e.to_string()))?;
    let mut ctl = Controller::new(scene.controller);
    let mut hint = 0;
    let goal = *path.goal();
    let stop_heading = sim.stop_heading_deg.to_radians();

    let phases: Option<Vec<f64>> = sim
        .fixed_phases
        .then(|| (0..scene.scatterers.len()).map(|_| radar_rng.gen_range(0.0..2.0 * PI)).collect());
    let phases = phases.as_deref();
    let mut obs = scene.observe(&truth, estimator, phases, &mut radar_rng)?;
    let mut rows = vec![row(0, dt, &truth, &belief, obs.cloud.points.len(), 0)];
    let mut run = ParkingRun {
        estimator: estimator.to_string(),
        seed,
        rows: Vec::new(),
        frames: 0,
        completed: false,
        final_position_error: 0.0,
        final_heading_error: 0.0,
        final_goal_distance: 0.0,
        dead_reckoned_frames: 0,
        unconverged_icp_frames: 0,
        failed_radar_frames: usize::from(obs.failed_radars > 0),
    };

    for frame in 1..=sim.max_frames {
        hint = path.nearest(&belief.position(), hint);
        let wp = &path.points[hint];
        let remaining = (goal.pos() - belief.position()).norm().min(path.length() - wp.s);
        let speed = sim.cruise_speed.min((2.0 * sim.decel * remaining).sqrt());
        let reference = Reference {
            speed: direction * speed,
            heading: wp.heading,
            cross_track: path.cross_track(hint, &belief.position()),
            yaw_rate: wp.curvature * speed,
        };
        let cmd = ctl.command(belief.psi, truth.v, &reference, &scene.vehicle, dt);
        truth = vehicle_step(&truth, &cmd, &scene.vehicle, dt)?;
        truth.v += v_noise.sample(&mut motion_rng);
        truth.psi = wrap_phase(truth.psi + h_noise.sample(&mut motion_rng));

        let next = scene.observe(&truth, estimator, phases, &mut radar_rng)?;
        run.failed_radar_frames += usize::from(next.failed_radars > 0);
        let icp_iters = match icp(&obs.cloud, &next.cloud, &scene.icp) {
            Ok((m, diag)) => {
                run.unconverged_icp_frames += usize::from(!diag.converged);
                let psi_next = belief.psi - m.dtheta;
                let (dpsi, dx) = to_ground(&m, psi_next);
                belief.x += dx.x;
                belief.y += dx.y;
                belief.psi = wrap_phase(belief.psi + dpsi);
                diag.iterations
            }
            Err(e) if e.is_numerical() || matches!(e, crate::Error::EmptyCloud) => {
                run.dead_reckoned_frames += 1;
                let step = rotation(belief.psi) * super::Vec2::new(truth.v * dt, 0.0);
                belief.x += step.x;
                belief.y += step.y;
                0
            }
            Err(e) => return Err(e),
        };
        belief.v = truth.v;
        belief.frame = frame;
        rows.push(row(frame, dt, &truth, &belief, next.cloud.points.len(), icp_iters));
        obs = next;
        run.frames = frame;

        let at_goal = (belief.position() - goal.pos()).norm() < sim.stop_distance
            && wrap_phase(belief.psi - goal.heading).abs() < stop_heading;
        if at_goal {
            run.completed = true;
            break;
        }
    }
    run.final_position_error = (truth.position() - belief.position()).norm();
    run.final_heading_error = wrap_phase(truth.psi - belief.psi).abs();
    run.final_goal_distance = (truth.position() - goal.pos()).norm();
    run.rows = rows;
    Ok(run)
}

fn row(frame: usize, dt: f64, truth: &VehiclePose, belief: &VehiclePose, n: usize, icp_iters: usize) -> TrajectoryRow {
    TrajectoryRow {
        frame,
        t: frame as f64 * dt,
        true_x: truth.x,
        true_y: truth.y,
        true_psi: truth.psi,
        est_x: belief.x,
        est_y: belief.y,
        est_psi: belief.psi,
        n_scatterers: n,
        icp_iters,
    }
}

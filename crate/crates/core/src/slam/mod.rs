//! Radar-only ego localization: scatterer clouds from the vehicle's radars
//! are registered frame to frame with a robust ICP, and the relative
//! motion is integrated into a ground-frame pose that closes a parking
//! control loop.

mod icp;
mod path;
mod scene;
mod sim;
mod vehicle;

use nalgebra::{Matrix2, Vector2};

pub use icp::{
    icp, icp_associate, icp_solve_rigid, rigid_objective, to_ground, welsch_weight, IcpDiagnostics, IcpSettings,
    RigidMotion,
};
pub use path::{PathPoint, PathSpec, ReferencePath, Segment};
pub use scene::{
    Detection, NoiseSettings, Observation, Obstacle, ParkingScene, RadarMount, SceneEstimator, SimulationSettings,
    DEFAULT_SCENE,
};
pub use sim::{run_parking, ParkingRun, TrajectoryRow};
pub use vehicle::{
    vehicle_step, Command, Controller, ControllerGains, Pid, PidState, Reference, VehicleParams, VehiclePose,
};

pub type Vec2 = Vector2<f64>;

/// Scatterer positions in one vehicle frame. The size changes from frame
/// to frame as scatterers enter and leave the fields of view.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec2>,
    pub frame: usize,
}

/// Counter-clockwise rotation by `angle`.
pub fn rotation(angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, -s, s, c)
}

//! Point-mass vehicle with linear damping and PID speed/heading control.

use serde::{Deserialize, Serialize};

use super::Vec2;
use crate::config::wrap_phase;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehiclePose {
    /// Ground position, m.
    pub x: f64,
    pub y: f64,
    /// Heading of the vehicle's forward axis in the ground frame, rad.
    pub psi: f64,
    /// Signed speed along the forward axis, m/s.
    #[serde(default)]
    pub v: f64,
    #[serde(default)]
    pub frame: usize,
}

impl VehiclePose {
    pub fn new(x: f64, y: f64, psi: f64, v: f64) -> Self {
        VehiclePose {
            x,
            y,
            psi: wrap_phase(psi),
            v,
            frame: 0,
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// kg.
    pub mass: f64,
    /// N·s/m.
    pub damping: f64,
    /// Body size, m.
    pub width: f64,
    pub length: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            mass: 1000.0,
            damping: 50.0,
            width: 1.8,
            length: 4.6,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pid {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PidState {
    integral: f64,
    prev: Option<f64>,
}

impl PidState {
    pub fn update(&mut self, gains: &Pid, error: f64, dt: f64) -> f64 {
        self.integral += error * dt;
        let derivative = self.prev.map_or(0.0, |p| (error - p) / dt);
        self.prev = Some(error);
        gains.kp * error + gains.ki * self.integral + gains.kd * derivative
    }
}

/// Control gains. Speed gains act on acceleration (force / mass); heading
/// gains produce a yaw rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerGains {
    pub speed: Pid,
    pub heading: Pid,
    /// Cross-track gain, 1/m: the heading target is bent by
    /// atan(cross_track·e) toward the path.
    pub cross_track: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        ControllerGains {
            speed: Pid {
                kp: 8.0,
                ki: 2.0,
                kd: 0.0,
            },
            heading: Pid {
                kp: 6.0,
                ki: 0.5,
                kd: 0.0,
            },
            cross_track: 2.0,
        }
    }
}

/// What the controller should track this frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    /// Signed target speed, m/s.
    pub speed: f64,
    /// Target heading, rad.
    pub heading: f64,
    /// Lateral offset of the vehicle to the left of the direction of travel, m.
    pub cross_track: f64,
    /// Feed-forward yaw rate, rad/s.
    pub yaw_rate: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Command {
    /// Traction force, N.
    pub force: f64,
    /// rad/s.
    pub yaw_rate: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Controller {
    pub gains: ControllerGains,
    speed: PidState,
    heading: PidState,
}

impl Controller {
    pub fn new(gains: ControllerGains) -> Self {
        Controller {
            gains,
            ..Default::default()
        }
    }

    /// `heading` is the believed heading; `speed` the measured speed.
    pub fn command(&mut self, heading: f64, speed: f64, r: &Reference, params: &VehicleParams, dt: f64) -> Command {
        let accel = self.speed.update(&self.gains.speed, r.speed - speed, dt);
        // Damping feed-forward keeps the integrator near zero at cruise.
        let force = params.damping * r.speed + params.mass * accel;
        // The travel direction is ψ or ψ + π; either way turning right of
        // travel means decreasing ψ.
        let target = r.heading - (self.gains.cross_track * r.cross_track).atan();
        let e = wrap_phase(target - heading);
        let yaw_rate = r.yaw_rate + self.heading.update(&self.gains.heading, e, dt);
        Command { force, yaw_rate }
    }
}

/// Advances the vehicle by `dt` under a constant command. Speed follows
/// m·v̇ = F − b·v exactly; heading turns at the commanded rate and the
/// position moves along the mid-step heading by the exact distance.
pub fn vehicle_step(pose: &VehiclePose, cmd: &Command, params: &VehicleParams, dt: f64) -> Result<VehiclePose> {
    if !(dt > 0.0) || !(params.mass > 0.0) || params.damping < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "vehicle step needs dt > 0, mass > 0 and damping >= 0 (dt {dt}, {params:?})"
        )));
    }
    let (v, dist) = if params.damping > 0.0 {
        let tau = params.mass / params.damping;
        let v_inf = cmd.force / params.damping;
        let decay = (-dt / tau).exp();
        let v = v_inf + (pose.v - v_inf) * decay;
        (v, v_inf * dt + (pose.v - v_inf) * tau * (1.0 - decay))
    } else {
        let a = cmd.force / params.mass;
        (pose.v + a * dt, pose.v * dt + 0.5 * a * dt * dt)
    };
    let mid = pose.psi + 0.5 * cmd.yaw_rate * dt;
    Ok(VehiclePose {
        x: pose.x + dist * mid.cos(),
        y: pose.y + dist * mid.sin(),
        psi: wrap_phase(pose.psi + cmd.yaw_rate * dt),
        v,
        frame: pose.frame + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coasting_decays_exponentially() {
        let params = VehicleParams::default();
        let mut pose = VehiclePose::new(0.0, 0.0, 0.3, 2.0);
        for _ in 0..1000 {
            pose = vehicle_step(&pose, &Command::default(), &params, 0.01).unwrap();
        }
        let expected = 2.0 * (-0.05f64 * 10.0).exp();
        assert!((pose.v - expected).abs() < 1e-12);
        // Distance is the integral of the speed.
        let dist = 2.0 * 20.0 * (1.0 - (-0.5f64).exp());
        assert!((pose.position().norm() - dist).abs() < 1e-9);
        assert!((pose.y / pose.x - 0.3f64.tan()).abs() < 1e-12);
    }

    #[test]
    fn straight_line_speed_settles() {
        let params = VehicleParams::default();
        let mut ctl = Controller::new(ControllerGains::default());
        let mut pose = VehiclePose::new(0.0, 0.0, 0.0, 0.0);
        let r = Reference {
            speed: 1.95,
            heading: 0.0,
            cross_track: 0.0,
            yaw_rate: 0.0,
        };
        for _ in 0..500 {
            let c = ctl.command(pose.psi, pose.v, &r, &params, 0.01);
            pose = vehicle_step(&pose, &c, &params, 0.01).unwrap();
        }
        assert!((pose.v - 1.95).abs() < 0.01 * 1.95, "{}", pose.v);
        assert_eq!(pose.frame, 500);
    }

    #[test]
    fn heading_loop_removes_offset_in_both_directions() {
        let params = VehicleParams::default();
        for speed in [1.95, -1.95] {
            let mut ctl = Controller::new(ControllerGains::default());
            let mut pose = VehiclePose::new(0.0, 0.0, 0.1, speed);
            for _ in 0..500 {
                // Reference line y = 0 heading 0; left of travel is +y going forward.
                let lateral = if speed > 0.0 { pose.y } else { -pose.y };
                let r = Reference {
                    speed,
                    heading: 0.0,
                    cross_track: lateral,
                    yaw_rate: 0.0,
                };
                let c = ctl.command(pose.psi, pose.v, &r, &params, 0.01);
                pose = vehicle_step(&pose, &c, &params, 0.01).unwrap();
            }
            assert!(pose.psi.abs() < 1e-3 && pose.y.abs() < 0.02, "{speed}: {pose:?}");
        }
    }

    #[test]
    fn rejects_bad_step() {
        let p = VehiclePose::new(0.0, 0.0, 0.0, 0.0);
        assert!(vehicle_step(&p, &Command::default(), &VehicleParams::default(), 0.0).is_err());
    }
}

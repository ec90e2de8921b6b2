//! Low-level controllers: the visual tether, the follower's obstacle push,
//! the leader's waypoint planner and the follower's depth/attitude hold.

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::angle::{world_to_body, wrap};
use crate::dynamics::{ControlInput, RobotState};
use crate::error::{ConfigError, ControlError};
use crate::perception::{CameraModel, ImageObservation, Region, SonarReading};

/// Follower's lateral avoidance side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Side {
    /// +1, body +y.
    Left,
    /// -1, body -y.
    Right,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }

    /// Side matching the sign of `v`; `None` for zero or NaN.
    pub fn from_sign(v: f64) -> Option<Self> {
        if v > 0.0 {
            Some(Side::Left)
        } else if v < 0.0 {
            Some(Side::Right)
        } else {
            None
        }
    }
}

impl TryFrom<i8> for Side {
    type Error = String;
    fn try_from(v: i8) -> Result<Self, String> {
        match v {
            1 => Ok(Side::Left),
            -1 => Ok(Side::Right),
            other => Err(format!("side must be 1 or -1, got {other}")),
        }
    }
}

impl From<Side> for i8 {
    fn from(s: Side) -> i8 {
        s.sign() as i8
    }
}

/// Proportional image-space servo. Image-x error drives body y, image-y
/// error drives body x; the signs encode the camera mounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IbvsConfig {
    /// (m/s)/px along the image x (width) axis.
    pub gain_image_x: f64,
    /// (m/s)/px along the image y (height) axis.
    pub gain_image_y: f64,
    pub xi_max_x_mps: f64,
    pub xi_max_y_mps: f64,
    pub image_x_to_body_y_sign: f64,
    pub image_y_to_body_x_sign: f64,
}

impl IbvsConfig {
    /// Signs that steer the observer toward the target for `cam`'s mounting.
    pub fn for_camera(cam: &CameraModel, gain: f64, xi_max: f64) -> Self {
        use crate::perception::Looking;
        Self {
            gain_image_x: gain,
            gain_image_y: gain,
            xi_max_x_mps: xi_max,
            xi_max_y_mps: xi_max,
            image_x_to_body_y_sign: match cam.looking {
                Looking::Down => -1.0,
                Looking::Up => 1.0,
            },
            image_y_to_body_x_sign: -1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.gain_image_x > 0.0 && self.gain_image_y > 0.0) {
            return Err(ConfigError::invalid("ibvs gains must be > 0"));
        }
        if !(self.xi_max_x_mps > 0.0 && self.xi_max_y_mps > 0.0) {
            return Err(ConfigError::invalid("ibvs xi_max must be > 0"));
        }
        if self.image_x_to_body_y_sign.abs() != 1.0 || self.image_y_to_body_x_sign.abs() != 1.0 {
            return Err(ConfigError::invalid(
                "ibvs axis mapping signs must be +1 or -1",
            ));
        }
        Ok(())
    }
}

/// Visual-tether command pulling the observer toward the tag.
pub fn ibvs_command(
    obs: &ImageObservation,
    cam: &CameraModel,
    cfg: &IbvsConfig,
) -> Result<ControlInput, ControlError> {
    let (w, h) = match (obs.region, obs.tag_px) {
        (Region::OutOfView, _) | (_, None) => return Err(ControlError::TagOutOfView),
        (_, Some(px)) => px,
    };
    let (wc, hc) = cam.center();
    let (ew, eh) = (w - wc, h - hc);
    let (uy, ux) = match obs.region {
        Region::Safe => (
            (cfg.image_x_to_body_y_sign * cfg.gain_image_x * ew)
                .clamp(-cfg.xi_max_y_mps, cfg.xi_max_y_mps),
            (cfg.image_y_to_body_x_sign * cfg.gain_image_y * eh)
                .clamp(-cfg.xi_max_x_mps, cfg.xi_max_x_mps),
        ),
        _ => (
            cfg.image_x_to_body_y_sign * signum0(ew) * cfg.xi_max_y_mps,
            cfg.image_y_to_body_x_sign * signum0(eh) * cfg.xi_max_x_mps,
        ),
    };
    Ok(ControlInput::planar(ux, uy))
}

fn signum0(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvoidanceConfig {
    /// Force scale, m^2/s.
    pub alpha: f64,
    pub safe_distance_m: f64,
    pub initial_lambda: Side,
}

impl Default for AvoidanceConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            safe_distance_m: 1.0,
            initial_lambda: Side::Left,
        }
    }
}

impl AvoidanceConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.alpha > 0.0 && self.safe_distance_m > 0.0) {
            return Err(ConfigError::invalid(
                "avoidance alpha and safe_distance_m must be > 0",
            ));
        }
        Ok(())
    }
}

/// Repulsive push (backward along body x) plus a lateral push toward `lambda`,
/// each capped at the follower's tether limit. Zero outside the safe distance.
pub fn avoidance_command(
    sonar: &SonarReading,
    cfg: &AvoidanceConfig,
    lambda: Side,
    xi_max_x: f64,
    xi_max_y: f64,
) -> Result<ControlInput, ControlError> {
    let Some(d) = sonar.range_m else {
        return Ok(ControlInput::ZERO);
    };
    if !(d > 0.0) {
        return Err(ControlError::NonPositiveRange(d));
    }
    if d > cfg.safe_distance_m {
        return Ok(ControlInput::ZERO);
    }
    let push = cfg.alpha / d;
    Ok(ControlInput::planar(
        -push.min(xi_max_x),
        lambda.sign() * push.min(xi_max_y),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    pub waypoints_m: Vec<Point2<f64>>,
    /// 1/s
    pub kp: f64,
    pub kd: f64,
    pub capture_radius_m: f64,
    pub max_speed_mps: f64,
    /// Heading the surface vehicle holds while translating.
    pub heading_ref_rad: f64,
    /// 1/s
    pub heading_kp: f64,
}

impl PlannerConfig {
    pub fn straight_to(target: Point2<f64>) -> Self {
        Self {
            waypoints_m: vec![target],
            kp: 1.0,
            kd: 5.0,
            capture_radius_m: 0.15,
            max_speed_mps: 0.3,
            heading_ref_rad: 0.0,
            heading_kp: 0.3,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.waypoints_m.is_empty() {
            return Err(ConfigError::invalid("planner needs at least one waypoint"));
        }
        if !(self.kp >= 0.0 && self.kd >= 0.0 && self.heading_kp >= 0.0) {
            return Err(ConfigError::invalid("planner gains must be >= 0"));
        }
        if !(self.capture_radius_m > 0.0 && self.max_speed_mps > 0.0) {
            return Err(ConfigError::invalid(
                "planner capture radius and max speed must be > 0",
            ));
        }
        Ok(())
    }

    pub fn final_waypoint(&self) -> Point2<f64> {
        *self.waypoints_m.last().expect("validated non-empty")
    }
}

/// Waypoint follower for the surface vehicle.
#[derive(Debug, Clone)]
pub struct Planner {
    cfg: PlannerConfig,
    current: usize,
}

impl Planner {
    pub fn new(cfg: PlannerConfig) -> Self {
        Self { cfg, current: 0 }
    }

    pub fn current_index(&self) -> usize {
        self.current
    }

    pub fn on_final_leg(&self) -> bool {
        self.current + 1 >= self.cfg.waypoints_m.len()
    }

    pub fn target_captured(&self, asv: &RobotState) -> bool {
        self.on_final_leg()
            && (self.cfg.final_waypoint() - asv.xy()).norm() <= self.cfg.capture_radius_m
    }

    /// PD toward the current waypoint, limited per world axis, in the body frame.
    /// Intermediate waypoints are dropped once inside the capture radius;
    /// the last one is tracked all the way in, so the command is zero
    /// exactly at the goal and continuous around it.
    pub fn command(&mut self, asv: &RobotState) -> ControlInput {
        let pos = asv.xy();
        while !self.on_final_leg()
            && (self.cfg.waypoints_m[self.current] - pos).norm() <= self.cfg.capture_radius_m
        {
            self.current += 1;
        }
        let err = self.cfg.waypoints_m[self.current] - pos;
        let lim = self.cfg.max_speed_mps;
        let world = (err * self.cfg.kp - asv.world_planar_velocity() * self.cfg.kd)
            .map(|v| v.clamp(-lim, lim));
        let body = world_to_body(&world, asv.yaw());
        let yaw = self.cfg.heading_kp * wrap(self.cfg.heading_ref_rad - asv.yaw());
        ControlInput {
            yaw,
            ..ControlInput::planar(body.x, body.y)
        }
    }
}

/// Stateless form of [`Planner::command`] for the first waypoint leg.
pub fn planner_command(asv: &RobotState, cfg: &PlannerConfig) -> ControlInput {
    Planner::new(cfg.clone()).command(asv)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthHoldConfig {
    pub target_depth_m: f64,
    pub target_roll_rad: f64,
    pub target_pitch_rad: f64,
    pub kp_depth: f64,
    pub kd_depth: f64,
    pub kp_attitude: f64,
    pub kd_attitude: f64,
}

impl Default for DepthHoldConfig {
    fn default() -> Self {
        Self {
            target_depth_m: -1.5,
            target_roll_rad: 0.0,
            target_pitch_rad: 0.0,
            kp_depth: 1.0,
            kd_depth: 0.2,
            kp_attitude: 1.0,
            kd_attitude: 0.1,
        }
    }
}

impl DepthHoldConfig {
    pub fn validate(&self, tank_depth_m: f64) -> Result<(), ConfigError> {
        if !(self.target_depth_m < 0.0 && self.target_depth_m > -tank_depth_m) {
            return Err(ConfigError::invalid(
                "depth hold target must lie inside the tank",
            ));
        }
        if [
            self.kp_depth,
            self.kd_depth,
            self.kp_attitude,
            self.kd_attitude,
        ]
        .iter()
        .any(|g| !(*g >= 0.0))
        {
            return Err(ConfigError::invalid("depth hold gains must be >= 0"));
        }
        Ok(())
    }
}

pub fn depth_hold_command(auv: &RobotState, cfg: &DepthHoldConfig) -> ControlInput {
    let v = &auv.body_velocity;
    ControlInput {
        z: cfg.kp_depth * (cfg.target_depth_m - auv.position.z) - cfg.kd_depth * v.z,
        roll: cfg.kp_attitude * wrap(cfg.target_roll_rad - auv.orientation.x)
            - cfg.kd_attitude * v.roll,
        pitch: cfg.kp_attitude * wrap(cfg.target_pitch_rad - auv.orientation.y)
            - cfg.kd_attitude * v.pitch,
        ..ControlInput::ZERO
    }
}

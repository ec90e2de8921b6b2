//! Per-robot state and a decoupled first-order velocity-lag model.
//!
//! Each body axis relaxes toward its command with its own time constant;
//! the resulting body velocity is rotated into the world frame and
//! integrated (velocity first, then pose).

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Point2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::angle::{body_to_world, wrap};
use crate::error::{ConfigError, DynamicsError};

/// One value per body axis: linear x, y, z then roll, pitch, yaw.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axes6 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

/// Body-frame velocity command (m/s on linear axes, rad/s on angular axes).
pub type ControlInput = Axes6;

impl Axes6 {
    pub const ZERO: Self = Self::splat(0.0);

    pub const fn splat(v: f64) -> Self {
        Self {
            x: v,
            y: v,
            z: v,
            roll: v,
            pitch: v,
            yaw: v,
        }
    }

    pub fn planar(x: f64, y: f64) -> Self {
        Self { x, y, ..Self::ZERO }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.x, self.y, self.z, self.roll, self.pitch, self.yaw]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            x: a[0],
            y: a[1],
            z: a[2],
            roll: a[3],
            pitch: a[4],
            yaw: a[5],
        }
    }

    pub fn zip_with(self, other: Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let (a, b) = (self.to_array(), other.to_array());
        Self::from_array(std::array::from_fn(|i| f(a[i], b[i])))
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_array(self.to_array().map(f))
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn planar_vec(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Add for Axes6 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for Axes6 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for Axes6 {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|v| -v)
    }
}

impl Mul<f64> for Axes6 {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        self.map(|v| v * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotKind {
    /// Surface vehicle: planar x, y and yaw only.
    Asv,
    /// Underwater vehicle: roll and pitch are held level.
    Auv,
}

impl RobotKind {
    /// Axes this vehicle cannot move along; they stay exactly zero.
    fn locked(self) -> [bool; 6] {
        match self {
            RobotKind::Asv => [false, false, true, true, true, false],
            RobotKind::Auv => [false, false, false, true, true, false],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub kind: RobotKind,
    pub position: Vector3<f64>,
    /// Roll, pitch, yaw in radians, each wrapped to (-pi, pi].
    pub orientation: Vector3<f64>,
    pub body_velocity: Axes6,
}

impl RobotState {
    pub fn at_rest(kind: RobotKind, xy: Point2<f64>, z: f64, yaw: f64) -> Self {
        let z = if kind == RobotKind::Asv { 0.0 } else { z };
        Self {
            kind,
            position: Vector3::new(xy.x, xy.y, z),
            orientation: Vector3::new(0.0, 0.0, wrap(yaw)),
            body_velocity: Axes6::ZERO,
        }
    }

    pub fn xy(&self) -> Point2<f64> {
        Point2::new(self.position.x, self.position.y)
    }

    pub fn yaw(&self) -> f64 {
        self.orientation.z
    }

    pub fn world_planar_velocity(&self) -> Vector2<f64> {
        body_to_world(&self.body_velocity.planar_vec(), self.yaw())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsParams {
    pub dt_s: f64,
    pub time_constant_s: Axes6,
    /// Symmetric command limits; m/s on linear axes, rad/s on angular axes.
    pub saturation: Axes6,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        Self {
            dt_s: 0.02,
            time_constant_s: Axes6::splat(0.5),
            saturation: Axes6 {
                x: 0.5,
                y: 0.5,
                z: 0.5,
                roll: 1.0,
                pitch: 1.0,
                yaw: 1.5,
            },
        }
    }
}

impl DynamicsParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dt_s.is_finite() && self.dt_s > 0.0) {
            return Err(ConfigError::invalid(format!(
                "dt_s must be > 0, got {}",
                self.dt_s
            )));
        }
        for tau in self.time_constant_s.to_array() {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(ConfigError::invalid(format!(
                    "time constants must be > 0, got {tau}"
                )));
            }
            if self.dt_s > tau / 2.0 {
                return Err(ConfigError::invalid(format!(
                    "dt_s = {} exceeds half the time constant {tau}",
                    self.dt_s
                )));
            }
        }
        if self
            .saturation
            .to_array()
            .iter()
            .any(|s| !(s.is_finite() && *s >= 0.0))
        {
            return Err(ConfigError::invalid(
                "saturation limits must be finite and >= 0",
            ));
        }
        Ok(())
    }
}

/// Limits every component to its symmetric saturation bound.
pub fn clamp(cmd: ControlInput, params: &DynamicsParams) -> ControlInput {
    cmd.zip_with(params.saturation, |v, lim| v.clamp(-lim, lim))
}

/// Advances one robot by `params.dt_s` under body-frame command `cmd`.
pub fn step(
    state: &RobotState,
    cmd: &ControlInput,
    params: &DynamicsParams,
) -> Result<RobotState, DynamicsError> {
    if !cmd.is_finite() {
        return Err(DynamicsError::NonFinite("command"));
    }
    if !(state.position.iter().all(|v| v.is_finite())
        && state.orientation.iter().all(|v| v.is_finite())
        && state.body_velocity.is_finite())
    {
        return Err(DynamicsError::NonFinite("state"));
    }
    let dt = params.dt_s;
    let locked = state.kind.locked();
    let v = state.body_velocity.to_array();
    let u = cmd.to_array();
    let tau = params.time_constant_s.to_array();
    let v_next: [f64; 6] = std::array::from_fn(|i| {
        if locked[i] {
            0.0
        } else {
            v[i] + (dt / tau[i]) * (u[i] - v[i])
        }
    });
    let velocity = Axes6::from_array(v_next);

    let yaw = state.yaw();
    let world_v = body_to_world(&velocity.planar_vec(), yaw);
    let mut next = *state;
    next.position.x += world_v.x * dt;
    next.position.y += world_v.y * dt;
    next.position.z = if locked[2] {
        0.0
    } else {
        state.position.z + velocity.z * dt
    };
    next.orientation = Vector3::new(
        if locked[3] {
            0.0
        } else {
            wrap(state.orientation.x + velocity.roll * dt)
        },
        if locked[4] {
            0.0
        } else {
            wrap(state.orientation.y + velocity.pitch * dt)
        },
        wrap(yaw + velocity.yaw * dt),
    );
    next.body_velocity = velocity;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> DynamicsParams {
        DynamicsParams::default()
    }

    #[test]
    fn zero_command_is_a_fixed_point() {
        let s = RobotState::at_rest(RobotKind::Auv, Point2::new(1.0, 2.0), -1.5, 0.3);
        assert_eq!(step(&s, &Axes6::ZERO, &params()).unwrap(), s);
    }

    #[test]
    fn converges_to_command_after_twenty_time_constants() {
        let p = params();
        let cmd = Axes6::planar(0.3, -0.2);
        let mut s = RobotState::at_rest(RobotKind::Asv, Point2::new(1.0, 2.0), 0.0, 0.0);
        let steps = (20.0 * 0.5 / p.dt_s).round() as usize;
        for _ in 0..steps {
            s = step(&s, &cmd, &p).unwrap();
        }
        assert!((s.body_velocity.x - 0.3).abs() < 1e-6);
        assert!((s.body_velocity.y + 0.2).abs() < 1e-6);
    }

    #[test]
    fn pure_yaw_rotates_in_place() {
        let p = params();
        let mut s = RobotState::at_rest(RobotKind::Asv, Point2::new(1.0, 2.0), 0.0, 0.0);
        s.body_velocity.yaw = 0.8;
        let cmd = Axes6 {
            yaw: 0.8,
            ..Axes6::ZERO
        };
        let n = step(&s, &cmd, &p).unwrap();
        assert_eq!(n.xy(), s.xy());
        assert!((n.yaw() - 0.8 * p.dt_s).abs() < 1e-15);
    }

    #[test]
    fn clamp_examples() {
        let p = params();
        let inside = Axes6::planar(0.1, -0.2);
        assert_eq!(clamp(inside, &p), inside);
        assert_eq!(
            clamp(Axes6::planar(1.0, -1.0), &p),
            Axes6::planar(0.5, -0.5)
        );
        assert_eq!(clamp(Axes6::ZERO, &p), Axes6::ZERO);
    }

    #[test]
    fn rejects_non_finite() {
        let s = RobotState::at_rest(RobotKind::Asv, Point2::new(1.0, 2.0), 0.0, 0.0);
        assert!(step(&s, &Axes6::planar(f64::NAN, 0.0), &params()).is_err());
        let mut bad = s;
        bad.position.x = f64::INFINITY;
        assert!(step(&bad, &Axes6::ZERO, &params()).is_err());
    }

    #[test]
    fn validate_rejects_coarse_step() {
        let mut p = params();
        assert!(p.validate().is_ok());
        p.dt_s = 0.3;
        assert!(p.validate().is_err());
    }

    fn axes() -> impl Strategy<Value = Axes6> {
        prop::array::uniform6(-3.0f64..3.0).prop_map(Axes6::from_array)
    }

    proptest! {
        #[test]
        fn clamp_is_idempotent(c in axes()) {
            let p = params();
            let once = clamp(c, &p);
            prop_assert_eq!(clamp(once, &p), once);
        }

        #[test]
        fn constrained_axes_stay_zero(cmds in prop::collection::vec(axes(), 1..60)) {
            let p = params();
            let mut asv = RobotState::at_rest(RobotKind::Asv, Point2::new(2.0, 2.0), 0.0, 0.0);
            let mut auv = RobotState::at_rest(RobotKind::Auv, Point2::new(2.0, 2.0), -1.5, 0.0);
            for c in cmds {
                let c = clamp(c, &p);
                asv = step(&asv, &c, &p).unwrap();
                auv = step(&auv, &c, &p).unwrap();
                prop_assert_eq!(asv.position.z, 0.0);
                prop_assert_eq!(asv.orientation.x, 0.0);
                prop_assert_eq!(asv.orientation.y, 0.0);
                prop_assert_eq!(auv.orientation.x, 0.0);
                prop_assert_eq!(auv.orientation.y, 0.0);
                let max_sat = p.saturation.x.max(p.saturation.y);
                prop_assert!(asv.body_velocity.planar_vec().norm() <= 2f64.sqrt() * max_sat + 1e-12);
            }
        }

        #[test]
        fn free_drift_decays(v in axes(), yaw in -3.0f64..3.0) {
            let p = params();
            let mut s = RobotState::at_rest(RobotKind::Auv, Point2::new(2.0, 2.0), -1.5, yaw);
            s.body_velocity = Axes6 { roll: 0.0, pitch: 0.0, ..v };
            let mut prev = s.body_velocity.to_array().iter().map(|x| x * x).sum::<f64>();
            for _ in 0..50 {
                s = step(&s, &Axes6::ZERO, &p).unwrap();
                let now = s.body_velocity.to_array().iter().map(|x| x * x).sum::<f64>();
                prop_assert!(now <= prev);
                prev = now;
            }
        }

        #[test]
        fn step_is_deterministic(c in axes(), yaw in -3.0f64..3.0) {
            let p = params();
            let s = RobotState::at_rest(RobotKind::Auv, Point2::new(2.0, 2.0), -1.5, yaw);
            let c = clamp(c, &p);
            prop_assert_eq!(step(&s, &c, &p).unwrap(), step(&s, &c, &p).unwrap());
        }
    }
}

//! Virtual onboard sensors: the mutual tag camera, the follower's forward
//! sonar, the leader's wall ranging and the relative-yaw read-out.

use nalgebra::Vector2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::angle::{world_to_body, wrap};
use crate::dynamics::RobotState;
use crate::error::{ConfigError, PerceptionError};
use crate::world::{distance_to_nearest_obstacle, WorldModel};

/// Which way the camera's optical axis points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Looking {
    Up,
    Down,
}

/// Pinhole camera with a vertical optical axis. The image top edge faces the
/// body's +x axis. A down-looking camera puts body right (-y) at image right;
/// an up-looking one is mirrored, putting body left (+y) at image right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    pub width_px: f64,
    pub height_px: f64,
    pub focal_px: f64,
    /// Side fraction of the centred safe rectangle.
    pub safe_fraction: f64,
    pub looking: Looking,
}

impl CameraModel {
    pub fn new(looking: Looking) -> Self {
        Self {
            width_px: 640.0,
            height_px: 480.0,
            focal_px: 400.0,
            safe_fraction: 0.6,
            looking,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.width_px / 2.0, self.height_px / 2.0)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.width_px > 0.0 && self.height_px > 0.0 && self.focal_px > 0.0) {
            return Err(ConfigError::invalid(
                "camera dimensions and focal length must be > 0",
            ));
        }
        if !(self.safe_fraction > 0.0 && self.safe_fraction < 1.0) {
            return Err(ConfigError::invalid(format!(
                "camera safe_fraction must be in (0, 1), got {}",
                self.safe_fraction
            )));
        }
        Ok(())
    }

    /// Projects a body-frame horizontal offset seen across `vertical_separation`.
    pub fn project(&self, body_offset: &Vector2<f64>, vertical_separation: f64) -> (f64, f64) {
        let (wc, hc) = self.center();
        let k = self.focal_px / vertical_separation;
        let lateral = match self.looking {
            Looking::Down => -body_offset.y,
            Looking::Up => body_offset.y,
        };
        (wc + k * lateral, hc - k * body_offset.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Safe,
    Integration,
    OutOfView,
}

impl Region {
    pub fn in_view(self) -> bool {
        self != Region::OutOfView
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Safe => "safe",
            Region::Integration => "integration",
            Region::OutOfView => "out_of_view",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "safe" => Some(Region::Safe),
            "integration" => Some(Region::Integration),
            "out_of_view" => Some(Region::OutOfView),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageObservation {
    pub tag_px: Option<(f64, f64)>,
    pub region: Region,
    pub timestamp_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SonarReading {
    pub range_m: Option<f64>,
    pub max_range_m: f64,
    pub timestamp_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeYawObservation {
    pub yaw_rad: f64,
    pub timestamp_s: f64,
}

/// Optional additive Gaussian sensor noise, truncated at three sigma.
pub struct SensorNoise<'a, R: Rng> {
    pub rng: &'a mut R,
    pub sigma: f64,
}

impl<R: Rng> SensorNoise<'_, R> {
    fn sample(&mut self) -> f64 {
        if self.sigma <= 0.0 {
            return 0.0;
        }
        let z: f64 = self.rng.sample(StandardNormal);
        z.clamp(-3.0, 3.0) * self.sigma
    }
}

/// Region of a pixel. The safe-rectangle edge itself counts as safe.
pub fn classify_region(px: (f64, f64), cam: &CameraModel) -> Region {
    let (w, h) = px;
    if !(w.is_finite() && h.is_finite())
        || w < 0.0
        || h < 0.0
        || w > cam.width_px
        || h > cam.height_px
    {
        return Region::OutOfView;
    }
    let (wc, hc) = cam.center();
    let half_w = cam.safe_fraction * cam.width_px / 2.0;
    let half_h = cam.safe_fraction * cam.height_px / 2.0;
    if (w - wc).abs() <= half_w && (h - hc).abs() <= half_h {
        Region::Safe
    } else {
        Region::Integration
    }
}

/// Where `target` appears in `observer`'s camera.
pub fn observe_tag(
    observer: &RobotState,
    target: &RobotState,
    cam: &CameraModel,
    now: f64,
) -> Result<ImageObservation, PerceptionError> {
    observe_tag_noisy::<rand_chacha::ChaCha8Rng>(observer, target, cam, now, None)
}

pub fn observe_tag_noisy<R: Rng>(
    observer: &RobotState,
    target: &RobotState,
    cam: &CameraModel,
    now: f64,
    noise: Option<&mut SensorNoise<'_, R>>,
) -> Result<ImageObservation, PerceptionError> {
    let separation = (target.position.z - observer.position.z).abs();
    if separation == 0.0 || !separation.is_finite() {
        return Err(PerceptionError::ZeroVerticalSeparation);
    }
    let world_offset = target.xy() - observer.xy();
    let body_offset = world_to_body(&world_offset, observer.yaw());
    let (mut w, mut h) = cam.project(&body_offset, separation);
    if let Some(n) = noise {
        w += n.sample();
        h += n.sample();
    }
    let region = classify_region((w, h), cam);
    Ok(ImageObservation {
        tag_px: region.in_view().then_some((w, h)),
        region,
        timestamp_s: now,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SonarConfig {
    pub cone_half_angle_rad: f64,
    pub max_range_m: f64,
}

impl Default for SonarConfig {
    fn default() -> Self {
        Self {
            cone_half_angle_rad: std::f64::consts::FRAC_PI_4,
            max_range_m: 3.0,
        }
    }
}

impl SonarConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let a = self.cone_half_angle_rad;
        if !(a > 0.0 && a <= std::f64::consts::FRAC_PI_2) {
            return Err(ConfigError::invalid(format!(
                "sonar cone half-angle must be in (0, pi/2], got {a}"
            )));
        }
        if !(self.max_range_m.is_finite() && self.max_range_m > 0.0) {
            return Err(ConfigError::invalid("sonar max_range_m must be > 0"));
        }
        Ok(())
    }
}

pub fn read_sonar(
    auv: &RobotState,
    world: &WorldModel,
    cfg: &SonarConfig,
    now: f64,
) -> SonarReading {
    read_sonar_noisy::<rand_chacha::ChaCha8Rng>(auv, world, cfg, now, None)
}

pub fn read_sonar_noisy<R: Rng>(
    auv: &RobotState,
    world: &WorldModel,
    cfg: &SonarConfig,
    now: f64,
    noise: Option<&mut SensorNoise<'_, R>>,
) -> SonarReading {
    let mut range = distance_to_nearest_obstacle(
        &auv.xy(),
        auv.yaw(),
        cfg.cone_half_angle_rad,
        cfg.max_range_m,
        world,
    );
    if let (Some(r), Some(n)) = (range.as_mut(), noise) {
        *r = (*r + n.sample()).clamp(f64::MIN_POSITIVE, cfg.max_range_m);
    }
    SonarReading {
        range_m: range,
        max_range_m: cfg.max_range_m,
        timestamp_s: now,
    }
}

/// Yaw of the surface vehicle as seen from the underwater vehicle's frame.
pub fn observe_relative_yaw(
    auv: &RobotState,
    asv: &RobotState,
    now: f64,
) -> RelativeYawObservation {
    RelativeYawObservation {
        yaw_rad: wrap(asv.yaw() - auv.yaw()),
        timestamp_s: now,
    }
}

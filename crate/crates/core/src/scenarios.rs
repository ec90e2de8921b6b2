//! Built-in experiment definitions and per-run metrics.

use std::fmt;
use std::str::FromStr;

use nalgebra::Point2;
use serde::{Deserialize, Serialize};

use crate::control::{AvoidanceConfig, DepthHoldConfig, IbvsConfig, PlannerConfig};
use crate::dynamics::DynamicsParams;
use crate::engine::{Mode, SimConfig, SimOutcome, Status};
use crate::error::ConfigError;
use crate::paradigm::ParadigmConfig;
use crate::perception::{CameraModel, Looking, SonarConfig};
use crate::world::{Obstacle, Tank, WorldModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsvConfig {
    pub dynamics: DynamicsParams,
    pub camera: CameraModel,
    pub ibvs: IbvsConfig,
    pub planner: PlannerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuvConfig {
    pub dynamics: DynamicsParams,
    pub camera: CameraModel,
    pub ibvs: IbvsConfig,
    pub sonar: SonarConfig,
    pub avoidance: AvoidanceConfig,
    pub depth_hold: DepthHoldConfig,
}

/// One fully specified run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDef {
    pub name: String,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Status>,
    pub sim: SimConfig,
    pub paradigm: ParadigmConfig,
    pub world: WorldModel,
    pub asv: AsvConfig,
    pub auv: AuvConfig,
}

impl ScenarioDef {
    /// Default vehicles and protocol around `world`.
    pub fn with_world(name: &str, world: WorldModel, mode: Mode) -> Self {
        let asv_camera = CameraModel::new(Looking::Down);
        let auv_camera = CameraModel::new(Looking::Up);
        let mut planner = PlannerConfig::straight_to(world.asv_target_m);
        let heading = world.asv_target_m - world.asv_start_m;
        planner.heading_ref_rad = heading.y.atan2(heading.x);
        let depth_hold = DepthHoldConfig {
            target_depth_m: world.auv_hold_depth_m,
            ..DepthHoldConfig::default()
        };
        let mut asv_ibvs = IbvsConfig::for_camera(&asv_camera, IBVS_GAIN_X, planner.max_speed_mps);
        asv_ibvs.gain_image_y = ASV_IBVS_GAIN_Y;
        let auv_ibvs = IbvsConfig {
            gain_image_y: AUV_IBVS_GAIN_Y,
            xi_max_x_mps: planner.max_speed_mps,
            ..IbvsConfig::for_camera(&auv_camera, IBVS_GAIN_X, AUV_XI_MAX_Y)
        };
        Self {
            name: name.to_owned(),
            mode,
            expected: None,
            sim: SimConfig {
                max_time_s: CASE_MAX_TIME_S,
                auv_footprint_m: AUV_FOOTPRINT_M,
                stuck_epsilon_m: STUCK_EPSILON_M,
                ..SimConfig::default()
            },
            paradigm: ParadigmConfig {
                wall_safe_distance_m: WALL_SAFE_DISTANCE_M,
                ..ParadigmConfig::default()
            },
            world,
            asv: AsvConfig {
                dynamics: DynamicsParams::default(),
                camera: asv_camera,
                ibvs: asv_ibvs,
                planner,
            },
            auv: AuvConfig {
                dynamics: DynamicsParams::default(),
                camera: auv_camera,
                ibvs: auv_ibvs,
                sonar: SonarConfig::default(),
                avoidance: AvoidanceConfig::default(),
                depth_hold,
            },
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.name.trim().is_empty() {
            return Err(ConfigError::invalid("scenario name must not be empty"));
        }
        self.world.validate()?;
        self.paradigm.validate()?;
        self.sim.validate(self.paradigm.protocol_rate_hz)?;
        for (who, d) in [("asv", &self.asv.dynamics), ("auv", &self.auv.dynamics)] {
            d.validate()?;
            if d.dt_s != self.sim.dt_s {
                return Err(ConfigError::invalid(format!(
                    "{who}.dynamics.dt_s ({}) differs from sim.dt_s ({})",
                    d.dt_s, self.sim.dt_s
                )));
            }
        }
        self.asv.camera.validate()?;
        self.auv.camera.validate()?;
        self.asv.ibvs.validate()?;
        self.auv.ibvs.validate()?;
        self.asv.planner.validate()?;
        for wp in &self.asv.planner.waypoints_m {
            if !self.world.tank.contains(wp) {
                return Err(ConfigError::invalid("planner waypoint outside the tank"));
            }
        }
        self.auv.sonar.validate()?;
        self.auv.avoidance.validate()?;
        self.auv.depth_hold.validate(self.world.tank.depth_z_m)?;
        Ok(())
    }
}

// The lateral (image x) pull stays weak inside the safe rectangle, so the
// saturated pull only appears once the tag reaches the integration band. The
// along-track gains saturate well inside it, which keeps a stalled follower
// from dragging the pair into the band lengthwise.
const IBVS_GAIN_X: f64 = 0.0003;
const ASV_IBVS_GAIN_Y: f64 = 0.003;
const AUV_IBVS_GAIN_Y: f64 = 0.01;
/// Follower's lateral limit; above the leader's so it can outrun a yielding leader.
const AUV_XI_MAX_Y: f64 = 0.5;
const AUV_FOOTPRINT_M: f64 = 0.2;
/// The exact force balance takes a while to settle; a loose threshold would
/// report Stuck while the pair is still creeping into it.
const STUCK_EPSILON_M: f64 = 0.002;
const CASE_MAX_TIME_S: f64 = 200.0;
const CLUTTERED_MAX_TIME_S: f64 = 500.0;
// The follower sits about one safe-rectangle half-width beside the leader
// when it pulls, so the leader must react while still that far off the wall.
const WALL_SAFE_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinName {
    Case1,
    Case2,
    Case3,
    ObscuredTank,
}

impl BuiltinName {
    pub const ALL: [BuiltinName; 4] = [
        BuiltinName::Case1,
        BuiltinName::Case2,
        BuiltinName::Case3,
        BuiltinName::ObscuredTank,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BuiltinName::Case1 => "case1",
            BuiltinName::Case2 => "case2",
            BuiltinName::Case3 => "case3",
            BuiltinName::ObscuredTank => "obscured_tank",
        }
    }
}

impl fmt::Display for BuiltinName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BuiltinName {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Self::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| ConfigError::Parse(format!("unknown builtin scenario '{s}'")))
    }
}

// Single-obstacle tank and the along-path placement shared by cases 1-3.
const CASE_TANK: Tank = Tank {
    length_x_m: 5.0,
    width_y_m: 4.0,
    depth_z_m: 2.5,
};
const END_MARGIN_M: f64 = 0.75;
const HOLD_DEPTH_M: f64 = -1.5;
const SMALL_RADIUS_M: f64 = 0.3;
const LARGE_WIDTH_M: f64 = 1.6;
const LARGE_DEPTH_M: f64 = 0.3;
/// How far a large obstacle reaches past the path centreline on its open side.
const LARGE_OVERHANG_M: f64 = 0.5;
/// Lateral offset of a small obstacle's centre from the path.
const SMALL_OFFSET_M: f64 = 0.45;

fn straight_world(tank: Tank, obstacles: Vec<Obstacle>) -> WorldModel {
    let mid = tank.width_y_m / 2.0;
    WorldModel {
        tank,
        obstacles,
        asv_start_m: Point2::new(END_MARGIN_M, mid),
        asv_target_m: Point2::new(tank.length_x_m - END_MARGIN_M, mid),
        auv_start_m: Point2::new(END_MARGIN_M, mid),
        auv_hold_depth_m: HOLD_DEPTH_M,
    }
}

/// Small circle centred just right (`-y`) or left (`+y`) of a path at `path_y`.
fn small(label: &str, x: f64, path_y: f64, right: bool) -> Obstacle {
    let y = if right {
        path_y - SMALL_OFFSET_M
    } else {
        path_y + SMALL_OFFSET_M
    };
    Obstacle::circle(label, Point2::new(x, y), SMALL_RADIUS_M)
}

/// Large box on one side of the path, overhanging it by `LARGE_OVERHANG_M`.
fn large(label: &str, x_front: f64, path_y: f64, right: bool) -> Obstacle {
    let (y0, y1) = if right {
        (
            path_y + LARGE_OVERHANG_M - LARGE_WIDTH_M,
            path_y + LARGE_OVERHANG_M,
        )
    } else {
        (
            path_y - LARGE_OVERHANG_M,
            path_y - LARGE_OVERHANG_M + LARGE_WIDTH_M,
        )
    };
    Obstacle::rect(
        label,
        Point2::new(x_front, y0),
        Point2::new(x_front + LARGE_DEPTH_M, y1),
    )
}

pub fn builtin(name: BuiltinName, mode: Mode) -> ScenarioDef {
    let mid = CASE_TANK.width_y_m / 2.0;
    let (world, expected) = match name {
        BuiltinName::Case1 => (
            straight_world(CASE_TANK, vec![small("A", 2.5, mid, true)]),
            Status::TargetReached,
        ),
        BuiltinName::Case2 => (
            straight_world(CASE_TANK, vec![large("A", 2.3, mid, true)]),
            match mode {
                Mode::Baseline => Status::Stuck,
                Mode::DogWalking => Status::TargetReached,
            },
        ),
        BuiltinName::Case3 => (
            straight_world(CASE_TANK, vec![large("A", 2.3, mid, false)]),
            match mode {
                Mode::Baseline => Status::Stuck,
                Mode::DogWalking => Status::TargetReached,
            },
        ),
        BuiltinName::ObscuredTank => {
            let tank = Tank::new(10.0, 4.0, 2.5);
            let mid = tank.width_y_m / 2.0;
            let world = straight_world(
                tank,
                vec![
                    small("A", 2.2, mid, true),
                    large("B", 3.8, mid, false),
                    small("C", 6.0, mid, false),
                    large("D", 7.6, mid, true),
                ],
            );
            (world, Status::TargetReached)
        }
    };
    let mut def = ScenarioDef::with_world(&format!("{}_{}", name, mode.as_str()), world, mode);
    if name == BuiltinName::ObscuredTank {
        def.sim.max_time_s = CLUTTERED_MAX_TIME_S;
    }
    // Only the dog-walking outcomes of the cluttered tank are asserted.
    if name != BuiltinName::ObscuredTank || mode == Mode::DogWalking {
        def.expected = Some(expected);
    }
    def
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub status: Status,
    pub time_to_target_s: Option<f64>,
    /// Follower clearance to obstacles (infinite when there are none); a
    /// wall contact in a collision outcome also counts.
    #[serde(with = "crate::trace::inf_as_null")]
    pub min_obstacle_clearance_m: f64,
    #[serde(with = "crate::trace::inf_as_null")]
    pub min_abs_wall_distance_m: f64,
    pub formation_in_view_fraction: f64,
    pub lambda_flips: u32,
    pub yank_count: u32,
    pub weighting_activations: u32,
    pub asv_path_length_m: f64,
    pub auv_path_length_m: f64,
}

pub fn metrics(outcome: &SimOutcome, def: &ScenarioDef) -> RunMetrics {
    let world = &def.world;
    let trace = &outcome.trace;
    let mut clearance = f64::INFINITY;
    let mut min_wall = f64::INFINITY;
    let mut in_view = 0usize;
    let mut flips = 0u32;
    let mut activations = 0u32;
    let (mut asv_len, mut auv_len) = (0.0, 0.0);
    for (i, r) in trace.iter().enumerate() {
        clearance = clearance.min(world.obstacle_clearance(&r.auv.xy()) - def.sim.auv_footprint_m);
        min_wall = min_wall.min(r.wall_distance_m.abs());
        in_view += usize::from(r.formation_in_view());
        if i > 0 {
            let p = &trace[i - 1];
            flips += u32::from(p.lambda != r.lambda);
            activations += u32::from(r.k_p < r.k_v && p.k_p >= p.k_v);
            asv_len += (r.asv.xy() - p.asv.xy()).norm();
            auv_len += (r.auv.xy() - p.auv.xy()).norm();
        } else {
            activations += u32::from(r.k_p < r.k_v);
        }
    }
    if outcome.status == Status::Collision {
        if let Some(last) = trace.last() {
            let walls = (world.tank.wall_clearance(&last.auv.xy()) - def.sim.auv_footprint_m)
                .min(world.tank.wall_clearance(&last.asv.xy()) - def.sim.asv_footprint_m);
            clearance = clearance.min(walls);
        }
    }
    RunMetrics {
        status: outcome.status,
        time_to_target_s: (outcome.status == Status::TargetReached).then_some(outcome.final_time_s),
        min_obstacle_clearance_m: clearance,
        min_abs_wall_distance_m: min_wall,
        formation_in_view_fraction: if trace.is_empty() {
            0.0
        } else {
            in_view as f64 / trace.len() as f64
        },
        lambda_flips: flips,
        yank_count: trace.last().map_or(0, |r| r.yank_count),
        weighting_activations: activations,
        asv_path_length_m: asv_len,
        auv_path_length_m: auv_len,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid() {
        for name in BuiltinName::ALL {
            for mode in [Mode::Baseline, Mode::DogWalking] {
                let def = builtin(name, mode);
                def.validate()
                    .unwrap_or_else(|e| panic!("{name} {mode:?}: {e}"));
                assert_eq!(def.auv.avoidance.initial_lambda, crate::control::Side::Left);
            }
        }
    }

    #[test]
    fn case_tank_matches_published_size() {
        for name in [BuiltinName::Case1, BuiltinName::Case2, BuiltinName::Case3] {
            let t = builtin(name, Mode::Baseline).world.tank;
            assert_eq!((t.length_x_m, t.width_y_m, t.depth_z_m), (5.0, 4.0, 2.5));
        }
    }

    #[test]
    fn obstacle_sides() {
        let mid = 2.0;
        let centre_y = |def: &ScenarioDef, i: usize| match &def.world.obstacles[i].shape {
            crate::world::Shape::Circle { center_m, .. } => center_m.y,
            crate::world::Shape::Box { min_m, max_m } => (min_m.y + max_m.y) / 2.0,
        };
        assert!(centre_y(&builtin(BuiltinName::Case1, Mode::Baseline), 0) < mid);
        assert!(centre_y(&builtin(BuiltinName::Case2, Mode::Baseline), 0) < mid);
        assert!(centre_y(&builtin(BuiltinName::Case3, Mode::Baseline), 0) > mid);
        let tank = builtin(BuiltinName::ObscuredTank, Mode::DogWalking);
        let labels: Vec<_> = tank
            .world
            .obstacles
            .iter()
            .map(|o| o.label.as_str())
            .collect();
        assert_eq!(labels, ["A", "B", "C", "D"]);
        assert!(centre_y(&tank, 1) > mid && centre_y(&tank, 3) < mid);
    }

    #[test]
    fn unknown_builtin() {
        assert!("case9".parse::<BuiltinName>().is_err());
        assert_eq!(
            "obscured_tank".parse::<BuiltinName>().unwrap(),
            BuiltinName::ObscuredTank
        );
    }
}

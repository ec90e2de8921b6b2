//! Fixed-step loop coupling both vehicles.
//!
//! Each step: both agents sense the previous step's states, decide, and are
//! integrated together, so neither sees the other's same-step move. The
//! protocol (weighting and the Level-2 trigger) ticks at its own slower rate;
//! the follower's yank detector watches every camera frame.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{avoidance_command, depth_hold_command, ibvs_command, Planner, Side};
use crate::dynamics::{step, ControlInput, RobotKind, RobotState};
use crate::error::ConfigError;
use crate::paradigm::{compose_asv, compose_auv, ParadigmState};
use crate::perception::{
    observe_relative_yaw, observe_tag_noisy, read_sonar_noisy, ImageObservation, Region,
    SensorNoise,
};
use crate::scenarios::ScenarioDef;
use crate::world::{collides, collides_with_walls, signed_wall_distance, WorldModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Visual tether only: fixed weights, no Level-2 signalling.
    Baseline,
    DogWalking,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::DogWalking => "dog_walking",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    TargetReached,
    Stuck,
    Collision,
    FormationBroken,
    Timeout,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::TargetReached => "target_reached",
            Status::Stuck => "stuck",
            Status::Collision => "collision",
            Status::FormationBroken => "formation_broken",
            Status::Timeout => "timeout",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt_s: f64,
    pub max_time_s: f64,
    pub asv_footprint_m: f64,
    pub auv_footprint_m: f64,
    /// Consecutive lost-tag steps tolerated before the formation counts as broken.
    pub formation_grace_steps: u32,
    pub seed: u64,
    pub stuck_window_s: f64,
    pub stuck_epsilon_m: f64,
    /// Standard deviation of additive pixel noise; 0 disables it.
    pub pixel_noise_px: f64,
    pub range_noise_m: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt_s: 0.02,
            max_time_s: 120.0,
            asv_footprint_m: 0.25,
            auv_footprint_m: 0.25,
            formation_grace_steps: 5,
            seed: 0,
            stuck_window_s: 10.0,
            stuck_epsilon_m: 0.05,
            pixel_noise_px: 0.0,
            range_noise_m: 0.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, protocol_rate_hz: f64) -> Result<(), ConfigError> {
        if !(self.dt_s.is_finite() && self.dt_s > 0.0) {
            return Err(ConfigError::invalid("sim.dt_s must be > 0"));
        }
        if !(self.max_time_s.is_finite() && self.max_time_s > 0.0) {
            return Err(ConfigError::invalid("sim.max_time_s must be > 0"));
        }
        if !(self.asv_footprint_m > 0.0 && self.auv_footprint_m > 0.0) {
            return Err(ConfigError::invalid("footprint radii must be > 0"));
        }
        if !(self.stuck_window_s > 0.0
            && self.stuck_window_s < self.max_time_s
            && self.stuck_epsilon_m > 0.0)
        {
            return Err(ConfigError::invalid(
                "stuck window must be in (0, max_time_s) and epsilon > 0",
            ));
        }
        if !(self.pixel_noise_px >= 0.0 && self.range_noise_m >= 0.0) {
            return Err(ConfigError::invalid("noise levels must be >= 0"));
        }
        if protocol_rate_hz > 1.0 / self.dt_s + 1e-9 {
            return Err(ConfigError::invalid(
                "protocol rate exceeds the physics rate",
            ));
        }
        let ratio = 1.0 / (protocol_rate_hz * self.dt_s);
        if (ratio - ratio.round()).abs() > 1e-6 {
            return Err(ConfigError::invalid(
                "protocol period must be a whole number of physics steps",
            ));
        }
        Ok(())
    }

    pub fn protocol_period_steps(&self, protocol_rate_hz: f64) -> u64 {
        (1.0 / (protocol_rate_hz * self.dt_s)).round() as u64
    }
}

/// Everything that happened in one physics step, sensed before integration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t_s: f64,
    pub asv: RobotState,
    pub auv: RobotState,
    /// The follower's tag in the leader's (down-looking) camera.
    pub asv_view: ImageObservation,
    /// The leader's tag in the follower's (up-looking) camera.
    pub auv_view: ImageObservation,
    pub sonar_range_m: Option<f64>,
    pub wall_distance_m: f64,
    pub relative_yaw_rad: f64,
    pub planner: ControlInput,
    pub asv_ibvs: ControlInput,
    pub auv_ibvs: ControlInput,
    pub avoidance: ControlInput,
    pub depth_hold: ControlInput,
    pub yank_radps: f64,
    pub asv_cmd: ControlInput,
    pub auv_cmd: ControlInput,
    pub k_p: f64,
    pub k_v: f64,
    pub lambda: Side,
    pub mu: Option<Side>,
    pub yank_active: bool,
    /// Yanks started so far, this step included.
    pub yank_count: u32,
    pub level: u8,
}

impl TraceRecord {
    pub fn formation_in_view(&self) -> bool {
        self.asv_view.region.in_view() && self.auv_view.region.in_view()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub status: Status,
    pub final_time_s: f64,
    pub trace: Vec<TraceRecord>,
}

/// Protocol level shown for a step: 2 while yanking, 1 while the follower
/// pulls (weight reduced or avoidance active), otherwise 0.
pub fn level_annotation(yank_active: bool, weight_reduced: bool, avoidance: &ControlInput) -> u8 {
    if yank_active {
        2
    } else if weight_reduced || avoidance.planar_vec().norm() > 0.0 {
        1
    } else {
        0
    }
}

/// True when both vehicles stayed within `epsilon` of where they were at
/// the start of the trailing `window`. Needs the trace to span the window.
pub fn detect_stuck(trace: &[TraceRecord], window_s: f64, epsilon_m: f64) -> bool {
    let Some(last) = trace.last() else {
        return false;
    };
    let start_t = last.t_s - window_s;
    let first_idx = trace.partition_point(|r| r.t_s < start_t - 1e-9);
    if first_idx >= trace.len() || trace[first_idx].t_s > start_t + 1e-9 {
        return false;
    }
    let anchor = &trace[first_idx];
    trace[first_idx..].iter().all(|r| {
        (r.asv.xy() - anchor.asv.xy()).norm() < epsilon_m
            && (r.auv.xy() - anchor.auv.xy()).norm() < epsilon_m
    })
}

/// Snapshot of what termination depends on at one step.
pub struct TerminationInput<'a> {
    pub world: &'a WorldModel,
    pub asv: &'a RobotState,
    pub auv: &'a RobotState,
    pub target_captured: bool,
    pub formation_in_view: bool,
    pub lost_view_streak: u32,
    pub trace: &'a [TraceRecord],
    pub cfg: &'a SimConfig,
    pub t_s: f64,
}

/// Highest-priority terminal status, if any:
/// collision, broken formation, target, stuck, timeout.
pub fn check_termination(input: &TerminationInput<'_>) -> Option<Status> {
    let cfg = input.cfg;
    if collides(&input.auv.xy(), cfg.auv_footprint_m, input.world)
        || collides_with_walls(&input.asv.xy(), cfg.asv_footprint_m, &input.world.tank)
    {
        return Some(Status::Collision);
    }
    if input.lost_view_streak > cfg.formation_grace_steps {
        return Some(Status::FormationBroken);
    }
    if input.target_captured && input.formation_in_view {
        return Some(Status::TargetReached);
    }
    if !input.target_captured && detect_stuck(input.trace, cfg.stuck_window_s, cfg.stuck_epsilon_m)
    {
        return Some(Status::Stuck);
    }
    if input.t_s >= cfg.max_time_s - 1e-9 {
        return Some(Status::Timeout);
    }
    None
}

/// Runs one scenario to termination.
pub fn run(def: &ScenarioDef) -> Result<SimOutcome, ConfigError> {
    def.validate()?;
    let world = &def.world;
    let sim = &def.sim;
    let dogwalk = def.mode == Mode::DogWalking;
    let period = sim.protocol_period_steps(def.paradigm.protocol_rate_hz);

    let mut asv = RobotState::at_rest(
        RobotKind::Asv,
        world.asv_start_m,
        0.0,
        def.asv.planner.heading_ref_rad,
    );
    let mut auv = RobotState::at_rest(
        RobotKind::Auv,
        world.auv_start_m,
        world.auv_hold_depth_m,
        0.0,
    );
    let mut planner = Planner::new(def.asv.planner.clone());
    let mut paradigm = ParadigmState::new(&def.paradigm, def.auv.avoidance.initial_lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);

    let mut last_asv_ibvs = ControlInput::ZERO;
    let mut last_auv_ibvs = ControlInput::ZERO;
    let mut lost_streak = 0u32;
    let mut trace: Vec<TraceRecord> = Vec::with_capacity((sim.max_time_s / sim.dt_s) as usize + 1);

    let mut step_idx: u64 = 0;
    loop {
        let t = step_idx as f64 * sim.dt_s;

        // Sense.
        let asv_view = observe(&asv, &auv, def, t, &mut rng, true)?;
        let auv_view = observe(&auv, &asv, def, t, &mut rng, false)?;
        let sonar = if sim.range_noise_m > 0.0 {
            let mut n = SensorNoise {
                rng: &mut rng,
                sigma: sim.range_noise_m,
            };
            read_sonar_noisy(&auv, world, &def.auv.sonar, t, Some(&mut n))
        } else {
            read_sonar_noisy::<ChaCha8Rng>(&auv, world, &def.auv.sonar, t, None)
        };
        let wall_distance = signed_wall_distance(&asv.xy(), asv.yaw(), world);
        let relative_yaw = observe_relative_yaw(&auv, &asv, t);

        // Decide.
        let planner_cmd = planner.command(&asv);
        let asv_ibvs = match ibvs_command(&asv_view, &def.asv.camera, &def.asv.ibvs) {
            Ok(u) => u,
            Err(_) => last_asv_ibvs,
        };
        let auv_ibvs = match ibvs_command(&auv_view, &def.auv.camera, &def.auv.ibvs) {
            Ok(u) => u,
            Err(_) => last_auv_ibvs,
        };
        last_asv_ibvs = asv_ibvs;
        last_auv_ibvs = auv_ibvs;

        let mut yank = 0.0;
        if dogwalk {
            let wall = if wall_distance == 0.0 {
                f64::MIN_POSITIVE
            } else {
                wall_distance
            };
            if step_idx.is_multiple_of(period) {
                paradigm.weighting.update(asv_view.region);
                yank = paradigm.level2.indicator(wall, asv_view.region, t);
            } else {
                yank = paradigm.level2.injection(t);
            }
            if let Some(side) = paradigm.detector.detect(relative_yaw) {
                paradigm.lambda = side;
            }
        }
        let avoidance = avoidance_command(
            &sonar,
            &def.auv.avoidance,
            paradigm.lambda,
            def.auv.ibvs.xi_max_x_mps,
            def.auv.ibvs.xi_max_y_mps,
        )
        .expect("sonar ranges are positive");
        let depth = depth_hold_command(&auv, &def.auv.depth_hold);
        let asv_cmd = compose_asv(
            &planner_cmd,
            &asv_ibvs,
            yank,
            &paradigm.weighting,
            &def.asv.dynamics,
        );
        let auv_cmd = compose_auv(&avoidance, &auv_ibvs, &depth, &def.auv.dynamics);

        let yank_active = dogwalk && paradigm.level2.active(t);
        let record = TraceRecord {
            t_s: t,
            asv,
            auv,
            asv_view,
            auv_view,
            sonar_range_m: sonar.range_m,
            wall_distance_m: wall_distance,
            relative_yaw_rad: relative_yaw.yaw_rad,
            planner: planner_cmd,
            asv_ibvs,
            auv_ibvs,
            avoidance,
            depth_hold: depth,
            yank_radps: yank,
            asv_cmd,
            auv_cmd,
            k_p: paradigm.weighting.k_p,
            k_v: paradigm.weighting.k_v,
            lambda: paradigm.lambda,
            mu: paradigm.level2.mu,
            yank_active,
            yank_count: paradigm.level2.yank_count,
            level: level_annotation(yank_active, paradigm.weighting.reduced(), &avoidance),
        };
        let in_view = record.formation_in_view();
        trace.push(record);
        lost_streak = if in_view { 0 } else { lost_streak + 1 };

        let status = check_termination(&TerminationInput {
            world,
            asv: &asv,
            auv: &auv,
            target_captured: planner.target_captured(&asv),
            formation_in_view: in_view,
            lost_view_streak: lost_streak,
            trace: &trace,
            cfg: sim,
            t_s: t,
        });
        if let Some(status) = status {
            return Ok(SimOutcome {
                status,
                final_time_s: t,
                trace,
            });
        }

        // Act and integrate.
        asv = step(&asv, &asv_cmd, &def.asv.dynamics)
            .map_err(|e| ConfigError::invalid(e.to_string()))?;
        auv = step(&auv, &auv_cmd, &def.auv.dynamics)
            .map_err(|e| ConfigError::invalid(e.to_string()))?;
        step_idx += 1;
    }
}

fn observe(
    observer: &RobotState,
    target: &RobotState,
    def: &ScenarioDef,
    t: f64,
    rng: &mut ChaCha8Rng,
    leader: bool,
) -> Result<ImageObservation, ConfigError> {
    let cam = if leader {
        &def.asv.camera
    } else {
        &def.auv.camera
    };
    let sigma = def.sim.pixel_noise_px;
    let obs = if sigma > 0.0 {
        let mut n = SensorNoise { rng, sigma };
        observe_tag_noisy(observer, target, cam, t, Some(&mut n))
    } else {
        observe_tag_noisy::<ChaCha8Rng>(observer, target, cam, t, None)
    };
    obs.map_err(|e| ConfigError::invalid(e.to_string()))
}

/// Index of the first record where the leader has passed `x` along the path.
pub fn first_pass_beyond(trace: &[TraceRecord], x: f64) -> Option<usize> {
    trace.iter().position(|r| r.asv.position.x > x)
}

/// Convenience for building synthetic traces in tests and tools.
pub fn still_record(t_s: f64, asv: RobotState, auv: RobotState) -> TraceRecord {
    let view = ImageObservation {
        tag_px: Some((320.0, 240.0)),
        region: Region::Safe,
        timestamp_s: t_s,
    };
    TraceRecord {
        t_s,
        asv,
        auv,
        asv_view: view,
        auv_view: view,
        sonar_range_m: None,
        wall_distance_m: 2.0,
        relative_yaw_rad: 0.0,
        planner: ControlInput::ZERO,
        asv_ibvs: ControlInput::ZERO,
        auv_ibvs: ControlInput::ZERO,
        avoidance: ControlInput::ZERO,
        depth_hold: ControlInput::ZERO,
        yank_radps: 0.0,
        asv_cmd: ControlInput::ZERO,
        auv_cmd: ControlInput::ZERO,
        k_p: 1.0,
        k_v: 1.0,
        lambda: Side::Left,
        mu: None,
        yank_active: false,
        yank_count: 0,
        level: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Obstacle, Tank};
    use nalgebra::Point2;

    fn robots(x: f64) -> (RobotState, RobotState) {
        (
            RobotState::at_rest(RobotKind::Asv, Point2::new(x, 2.0), 0.0, 0.0),
            RobotState::at_rest(RobotKind::Auv, Point2::new(x - 0.3, 2.0), -1.5, 0.0),
        )
    }

    fn synthetic(len_s: f64, f: impl Fn(f64) -> f64) -> Vec<TraceRecord> {
        let n = (len_s / 0.02).round() as usize;
        (0..=n)
            .map(|i| {
                let t = i as f64 * 0.02;
                let (a, u) = robots(f(t));
                still_record(t, a, u)
            })
            .collect()
    }

    #[test]
    fn stationary_robots_are_stuck() {
        assert!(detect_stuck(&synthetic(12.0, |_| 2.0), 10.0, 0.05));
    }

    #[test]
    fn steady_progress_is_not_stuck() {
        assert!(!detect_stuck(
            &synthetic(12.0, |t| 1.0 + 0.1 * t),
            10.0,
            0.05
        ));
    }

    #[test]
    fn small_oscillation_is_stuck() {
        assert!(detect_stuck(
            &synthetic(12.0, |t| 2.0 + 0.02 * (3.0 * t).sin()),
            10.0,
            0.05
        ));
    }

    #[test]
    fn short_trace_is_never_stuck() {
        assert!(!detect_stuck(&synthetic(5.0, |_| 2.0), 10.0, 0.05));
    }

    #[test]
    fn level_annotation_rules() {
        assert_eq!(
            level_annotation(true, true, &ControlInput::planar(0.1, 0.0)),
            2
        );
        assert_eq!(level_annotation(false, true, &ControlInput::ZERO), 1);
        assert_eq!(
            level_annotation(false, false, &ControlInput::planar(-0.1, 0.1)),
            1
        );
        assert_eq!(level_annotation(false, false, &ControlInput::ZERO), 0);
    }

    fn world() -> WorldModel {
        WorldModel {
            tank: Tank::new(5.0, 4.0, 2.5),
            obstacles: vec![Obstacle::circle("A", Point2::new(2.5, 1.0), 0.3)],
            asv_start_m: Point2::new(0.75, 2.0),
            asv_target_m: Point2::new(4.25, 2.0),
            auv_start_m: Point2::new(0.75, 2.0),
            auv_hold_depth_m: -1.5,
        }
    }

    fn term(
        asv: &RobotState,
        auv: &RobotState,
        captured: bool,
        in_view: bool,
        streak: u32,
        trace: &[TraceRecord],
    ) -> Option<Status> {
        let w = world();
        let cfg = SimConfig::default();
        check_termination(&TerminationInput {
            world: &w,
            asv,
            auv,
            target_captured: captured,
            formation_in_view: in_view,
            lost_view_streak: streak,
            trace,
            cfg: &cfg,
            t_s: 1.0,
        })
    }

    #[test]
    fn termination_examples() {
        let (asv, auv) = robots(4.25);
        assert_eq!(
            term(&asv, &auv, true, true, 0, &[]),
            Some(Status::TargetReached)
        );
        let hit = RobotState::at_rest(RobotKind::Auv, Point2::new(2.5, 1.1), -1.5, 0.0);
        assert_eq!(
            term(&asv, &hit, true, true, 0, &[]),
            Some(Status::Collision)
        );
        assert_eq!(term(&asv, &auv, true, false, 5, &[]), None);
        assert_eq!(
            term(&asv, &auv, true, false, 6, &[]),
            Some(Status::FormationBroken)
        );
        let (a, u) = robots(2.0);
        let stuck = synthetic(11.0, |_| 2.0);
        assert_eq!(term(&a, &u, false, true, 0, &stuck), Some(Status::Stuck));
        assert_eq!(term(&a, &u, false, true, 0, &[]), None);
    }
}

//! The leader/follower implicit-communication protocol.
//!
//! Level 1 on the leader: when the follower's tag has sat in the outer image
//! band for a whole window, the leader's goal-seeking weight drops so the
//! tether wins. Level 2 on the leader: pulled toward a side wall, the leader
//! yanks (a fast rotation) whose direction the follower reads off the
//! relative yaw and adopts as its avoidance side. No state is shared between
//! the two agents; everything the follower learns comes through its camera.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::angle::wrap;
use crate::control::Side;
use crate::dynamics::{clamp, ControlInput, DynamicsParams};
use crate::error::ConfigError;
use crate::perception::{Region, RelativeYawObservation};

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParadigmConfig {
    /// Weight on the tether term, K_V.
    pub k_v: f64,
    /// Reduction applied to the goal weight during a pull, in (0, 1).
    pub beta: f64,
    pub window_s: f64,
    pub protocol_rate_hz: f64,
    pub wall_safe_distance_m: f64,
    /// Yank angular speed, rad/s.
    pub yank_rate_radps: f64,
    /// Yank duration and detector look-back.
    pub yank_duration_s: f64,
    pub detect_threshold_rad: f64,
}

impl Default for ParadigmConfig {
    fn default() -> Self {
        Self {
            k_v: 1.0,
            beta: 0.2,
            window_s: 4.0,
            protocol_rate_hz: 1.0,
            wall_safe_distance_m: 0.5,
            yank_rate_radps: 1.0,
            yank_duration_s: 1.0,
            detect_threshold_rad: 0.5,
        }
    }
}

impl ParadigmConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(ConfigError::invalid(format!(
                "beta must be in (0, 1), got {}",
                self.beta
            )));
        }
        if !(self.k_v > 0.0) {
            return Err(ConfigError::invalid("k_v must be > 0"));
        }
        if !(self.protocol_rate_hz > 0.0 && self.window_s > 0.0) {
            return Err(ConfigError::invalid("protocol rate and window must be > 0"));
        }
        if self.window_samples() == 0 {
            return Err(ConfigError::invalid(
                "weighting window holds no protocol samples",
            ));
        }
        if !(self.wall_safe_distance_m > 0.0) {
            return Err(ConfigError::invalid("wall_safe_distance_m must be > 0"));
        }
        if !(self.yank_rate_radps > 0.0
            && self.yank_duration_s > 0.0
            && self.detect_threshold_rad > 0.0)
        {
            return Err(ConfigError::invalid(
                "yank rate, duration and detection threshold must be > 0",
            ));
        }
        Ok(())
    }

    pub fn window_samples(&self) -> usize {
        (self.window_s * self.protocol_rate_hz).round() as usize
    }
}

/// Leader-side K_P/K_V weighting driven by where the follower sits in the image.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightingState {
    pub k_p: f64,
    pub k_v: f64,
    pub beta: f64,
    capacity: usize,
    history: VecDeque<bool>,
}

impl WeightingState {
    pub fn new(cfg: &ParadigmConfig) -> Self {
        let capacity = cfg.window_samples();
        Self {
            k_p: cfg.k_v,
            k_v: cfg.k_v,
            beta: cfg.beta,
            capacity,
            history: VecDeque::with_capacity(capacity),
        }
    }

    pub fn reduced(&self) -> bool {
        self.k_p < self.k_v
    }

    pub fn history(&self) -> impl Iterator<Item = bool> + '_ {
        self.history.iter().copied()
    }

    /// One protocol tick. A lost tag counts as outer-band occupancy.
    pub fn update(&mut self, region: Region) {
        if self.history.len() == self.capacity {
            self.history.pop_front();
        }
        self.history.push_back(region != Region::Safe);
        let saturated = self.history.len() == self.capacity && self.history.iter().all(|k| *k);
        self.k_p = if saturated {
            self.beta * self.k_v
        } else {
            self.k_v
        };
    }
}

/// Leader-side Level-2 trigger: near a wall with the follower pulling hard.
#[derive(Debug, Clone, PartialEq)]
pub struct Level2State {
    pub wall_safe_distance_m: f64,
    pub yank_rate_radps: f64,
    pub duration_s: f64,
    /// Direction of the most recent yank.
    pub mu: Option<Side>,
    pub active_until_s: f64,
    pub yank_count: u32,
}

impl Level2State {
    pub fn new(cfg: &ParadigmConfig) -> Self {
        Self {
            wall_safe_distance_m: cfg.wall_safe_distance_m,
            yank_rate_radps: cfg.yank_rate_radps,
            duration_s: cfg.yank_duration_s,
            mu: None,
            active_until_s: f64::NEG_INFINITY,
            yank_count: 0,
        }
    }

    pub fn active(&self, now: f64) -> bool {
        now < self.active_until_s - TIME_EPS
    }

    /// Yaw-rate offset currently being injected.
    pub fn injection(&self, now: f64) -> f64 {
        match self.mu {
            Some(mu) if self.active(now) => mu.sign() * self.yank_rate_radps,
            _ => 0.0,
        }
    }

    /// Checks the trigger and returns the injection. A started yank runs for
    /// its full duration whatever happens to the trigger meanwhile.
    pub fn indicator(&mut self, wall_distance_m: f64, region: Region, now: f64) -> f64 {
        if !self.active(now)
            && wall_distance_m.abs() <= self.wall_safe_distance_m
            && region == Region::Integration
        {
            if let Some(mu) = Side::from_sign(wall_distance_m) {
                self.mu = Some(mu);
                self.active_until_s = now + self.duration_s;
                self.yank_count += 1;
            }
        }
        self.injection(now)
    }
}

/// Follower-side yank detector over the leader's relative yaw.
#[derive(Debug, Clone, PartialEq)]
pub struct Level2Detector {
    pub threshold_rad: f64,
    pub lookback_s: f64,
    history: VecDeque<RelativeYawObservation>,
}

impl Level2Detector {
    pub fn new(cfg: &ParadigmConfig) -> Self {
        Self {
            threshold_rad: cfg.detect_threshold_rad,
            lookback_s: cfg.yank_duration_s,
            history: VecDeque::new(),
        }
    }

    /// Records `obs` and returns the side to adopt when a rotation of at
    /// least the threshold happened over the look-back window.
    pub fn detect(&mut self, obs: RelativeYawObservation) -> Option<Side> {
        let cutoff = obs.timestamp_s - self.lookback_s + TIME_EPS;
        // Keep only the newest sample at or before the cutoff plus newer ones.
        while self.history.len() >= 2 && self.history[1].timestamp_s <= cutoff {
            self.history.pop_front();
        }
        let past = self
            .history
            .front()
            .filter(|p| p.timestamp_s <= cutoff)
            .copied();
        self.history.push_back(obs);
        let past = past?;
        let delta = wrap(obs.yaw_rad - past.yaw_rad);
        if delta.abs() >= self.threshold_rad {
            Side::from_sign(obs.yaw_rad)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParadigmState {
    pub weighting: WeightingState,
    pub level2: Level2State,
    pub detector: Level2Detector,
    pub lambda: Side,
}

impl ParadigmState {
    pub fn new(cfg: &ParadigmConfig, initial_lambda: Side) -> Self {
        Self {
            weighting: WeightingState::new(cfg),
            level2: Level2State::new(cfg),
            detector: Level2Detector::new(cfg),
            lambda: initial_lambda,
        }
    }
}

/// Leader command: weighted goal and tether terms plus any yank on yaw.
pub fn compose_asv(
    planner: &ControlInput,
    ibvs: &ControlInput,
    yaw_injection: f64,
    w: &WeightingState,
    limits: &DynamicsParams,
) -> ControlInput {
    let mut u = *planner * w.k_p + *ibvs * w.k_v;
    u.yaw += yaw_injection;
    clamp(u, limits)
}

/// Follower command: plain sum of avoidance, tether and depth hold.
pub fn compose_auv(
    avoid: &ControlInput,
    ibvs: &ControlInput,
    depth_hold: &ControlInput,
    limits: &DynamicsParams,
) -> ControlInput {
    clamp(*avoid + *ibvs + *depth_hold, limits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> ParadigmConfig {
        ParadigmConfig::default()
    }

    fn region(k: bool) -> Region {
        if k {
            Region::Integration
        } else {
            Region::Safe
        }
    }

    #[test]
    fn four_integration_ticks_reduce_the_goal_weight() {
        let mut w = WeightingState::new(&cfg());
        for i in 0..4 {
            assert!(!w.reduced(), "tick {i}");
            w.update(Region::Integration);
        }
        assert_eq!(w.k_p, 0.2 * w.k_v);
        w.update(Region::Safe);
        assert_eq!(w.k_p, w.k_v);
    }

    #[test]
    fn three_of_four_is_not_enough() {
        let mut w = WeightingState::new(&cfg());
        for k in [true, false, true, true] {
            w.update(region(k));
        }
        assert_eq!(w.k_p, w.k_v);
    }

    #[test]
    fn lost_tag_counts_as_pull() {
        let mut w = WeightingState::new(&cfg());
        for _ in 0..4 {
            w.update(Region::OutOfView);
        }
        assert!(w.reduced());
    }

    #[test]
    fn yank_starts_near_left_wall() {
        let mut l2 = Level2State::new(&cfg());
        let inj = l2.indicator(-0.3, Region::Integration, 10.0);
        assert_eq!(inj, -1.0);
        assert_eq!(l2.mu, Some(Side::Right));
        assert_eq!(l2.yank_count, 1);
    }

    #[test]
    fn far_from_wall_no_yank() {
        let mut l2 = Level2State::new(&cfg());
        assert_eq!(l2.indicator(0.8, Region::Integration, 10.0), 0.0);
        assert_eq!(l2.mu, None);
        assert_eq!(l2.indicator(0.3, Region::Safe, 10.0), 0.0);
    }

    #[test]
    fn yank_is_atomic_for_its_duration() {
        let mut l2 = Level2State::new(&cfg());
        l2.indicator(0.3, Region::Integration, 10.0);
        for t in [10.2, 10.5, 10.98] {
            assert_eq!(l2.indicator(2.0, Region::Safe, t), 1.0, "t = {t}");
        }
        assert_eq!(l2.indicator(2.0, Region::Safe, 11.0), 0.0);
        assert_eq!(l2.yank_count, 1);
    }

    #[test]
    fn back_to_back_yanks_are_separated_by_the_duration() {
        let mut l2 = Level2State::new(&cfg());
        l2.indicator(0.3, Region::Integration, 10.0);
        l2.indicator(0.3, Region::Integration, 10.5);
        assert_eq!(l2.yank_count, 1);
        l2.indicator(0.3, Region::Integration, 11.0);
        assert_eq!(l2.yank_count, 2);
    }

    fn yaw(t: f64, v: f64) -> RelativeYawObservation {
        RelativeYawObservation {
            yaw_rad: v,
            timestamp_s: t,
        }
    }

    #[test]
    fn detector_examples() {
        let mut d = Level2Detector::new(&cfg());
        assert_eq!(d.detect(yaw(0.0, 0.1)), None);
        assert_eq!(d.detect(yaw(1.0, 0.7)), Some(Side::Left));

        let mut d = Level2Detector::new(&cfg());
        d.detect(yaw(0.0, 0.1));
        assert_eq!(d.detect(yaw(1.0, 0.4)), None);

        let mut d = Level2Detector::new(&cfg());
        d.detect(yaw(0.0, -0.1));
        assert_eq!(d.detect(yaw(1.0, -0.7)), Some(Side::Right));
    }

    #[test]
    fn detector_needs_history() {
        let mut d = Level2Detector::new(&cfg());
        d.detect(yaw(0.0, 0.0));
        assert_eq!(d.detect(yaw(0.5, 1.0)), None);
    }

    #[test]
    fn detector_ignores_slow_drift_and_catches_fast_turns() {
        let dt = 0.02;
        let run = |rate: f64| {
            let mut d = Level2Detector::new(&cfg());
            let mut first = None;
            for i in 0..=200 {
                let t = i as f64 * dt;
                if d.detect(yaw(t, -rate * t)).is_some() && first.is_none() {
                    first = Some(t);
                }
            }
            first
        };
        assert_eq!(run(0.4), None);
        // 0.6 rad/s sweeps 0.6 rad per look-back; first full look-back ends at t = 1.
        let t = run(0.6).unwrap();
        assert!((t - 1.0).abs() < 1e-9, "{t}");
    }

    #[test]
    fn compose_examples() {
        let limits = DynamicsParams::default();
        let w = WeightingState::new(&cfg());
        let p = ControlInput::planar(0.1, 0.05);
        let v = ControlInput::planar(-0.05, 0.1);
        assert_eq!(compose_asv(&p, &v, 0.0, &w, &limits), p + v);

        let mut reduced = w.clone();
        for _ in 0..4 {
            reduced.update(Region::Integration);
        }
        let u = compose_asv(&p, &ControlInput::ZERO, 0.0, &reduced, &limits);
        assert!((u.x - 0.02).abs() < 1e-15);

        let u = compose_asv(&ControlInput::ZERO, &ControlInput::ZERO, -1.0, &w, &limits);
        assert_eq!(
            u,
            ControlInput {
                yaw: -1.0,
                ..ControlInput::ZERO
            }
        );

        let z = ControlInput::ZERO;
        assert_eq!(compose_auv(&z, &z, &z, &limits), z);
        let depth = ControlInput { z: -0.2, ..z };
        assert_eq!(compose_auv(&(-v), &v, &depth, &limits), depth);
        assert_eq!(compose_auv(&z, &v, &z, &limits), v);
    }

    fn small_axes() -> impl Strategy<Value = ControlInput> {
        prop::array::uniform6(-0.15f64..0.15).prop_map(ControlInput::from_array)
    }

    proptest! {
        #[test]
        fn weighting_is_all_ones_over_window(samples in prop::collection::vec(any::<bool>(), 1..30)) {
            let mut w = WeightingState::new(&cfg());
            for (i, k) in samples.iter().enumerate() {
                w.update(region(*k));
                let window = &samples[i.saturating_sub(3)..=i];
                let expect = window.len() == 4 && window.iter().all(|k| *k);
                prop_assert_eq!(w.reduced(), expect);
            }
        }

        #[test]
        fn auv_composition_is_linear(a in small_axes(), b in small_axes(), c in small_axes()) {
            let limits = DynamicsParams::default();
            let z = ControlInput::ZERO;
            let sum = compose_auv(&a, &z, &z, &limits) + compose_auv(&z, &b, &z, &limits) + compose_auv(&z, &z, &c, &limits);
            prop_assert!((compose_auv(&a, &b, &c, &limits) - sum).max_abs() < 1e-12);
        }

        #[test]
        fn yanks_never_overlap(ticks in prop::collection::vec((-1.0f64..1.0, any::<bool>()), 1..40)) {
            let mut l2 = Level2State::new(&cfg());
            let mut starts = Vec::new();
            for (i, (d, k)) in ticks.iter().enumerate() {
                let t = i as f64 * 0.5;
                let before = l2.yank_count;
                l2.indicator(if *d == 0.0 { 0.1 } else { *d }, region(*k), t);
                if l2.yank_count > before { starts.push(t); }
            }
            for pair in starts.windows(2) {
                prop_assert!(pair[1] - pair[0] >= 1.0 - 1e-9);
            }
        }
    }
}

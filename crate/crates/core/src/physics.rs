//! Ball on a two-axis tilting tray.
//!
//! The ball is a rolling point mass of finite radius confined to a square tray
//! with perfect boundary walls and a diagonal barrier pierced by a central gap.
//! One control frame holds both tilt-rate commands for `substeps_per_frame`
//! fixed substeps of semi-implicit Euler integration.
//!
//! Axis convention: `theta` tilts about the tray x-axis and drives the ball
//! along y (agent axis); `phi` tilts about the y-axis and drives it along x
//! (partner axis). Positive `phi` accelerates the ball toward +x, positive
//! `theta` toward -y.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("cannot step a captured state")]
    Captured,
    #[error("non-finite action (agent={agent}, partner={partner})")]
    NonFiniteAction { agent: f64, partner: f64 },
    #[error("invalid tray geometry: {0}")]
    Geometry(String),
    #[error("invalid physics configuration: {0}")]
    Config(String),
}

/// Static tray layout, in metres.
///
/// The barrier lies on the line `x + y = barrier_offset` and runs from the
/// boundary walls inward, leaving a gap of `gap_width` centred on the part of
/// the line inside the tray.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrayGeometry {
    pub side_length: f64,
    pub gap_width: f64,
    pub barrier_offset: f64,
    pub goal_center: [f64; 2],
    pub goal_radius: f64,
    pub ball_radius: f64,
    pub spawn_corners: [[f64; 2]; 3],
}

impl Default for TrayGeometry {
    fn default() -> Self {
        Self {
            side_length: 0.50,
            gap_width: 0.09,
            barrier_offset: 0.10,
            goal_center: [0.19, 0.19],
            goal_radius: 0.025,
            ball_radius: 0.03,
            spawn_corners: [[-0.21, -0.21], [0.21, -0.21], [-0.21, 0.21]],
        }
    }
}

impl TrayGeometry {
    pub fn half_side(&self) -> f64 {
        self.side_length / 2.0
    }

    /// Largest coordinate magnitude the ball centre can reach.
    pub fn position_limit(&self) -> f64 {
        self.half_side() - self.ball_radius
    }

    /// The two barrier segments `[(start, end); 2]`, boundary end first.
    pub fn barrier_segments(&self) -> [[[f64; 2]; 2]; 2] {
        let h = self.half_side();
        let c = self.barrier_offset;
        let upper_left = [c - h, h];
        let lower_right = [h, c - h];
        let mid = [c / 2.0, c / 2.0];
        let u = std::f64::consts::FRAC_1_SQRT_2;
        let g = self.gap_width / 2.0;
        let gap_upper = [mid[0] - g * u, mid[1] + g * u];
        let gap_lower = [mid[0] + g * u, mid[1] - g * u];
        [[upper_left, gap_upper], [lower_right, gap_lower]]
    }

    /// Centre of the barrier gap.
    pub fn gap_center(&self) -> [f64; 2] {
        [self.barrier_offset / 2.0, self.barrier_offset / 2.0]
    }

    /// True when `(x, y)` is strictly on the spawn side of the barrier line.
    pub fn on_start_side(&self, x: f64, y: f64) -> bool {
        x + y < self.barrier_offset
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        let err = |m: String| Err(PhysicsError::Geometry(m));
        let finite = [
            self.side_length,
            self.gap_width,
            self.barrier_offset,
            self.goal_center[0],
            self.goal_center[1],
            self.goal_radius,
            self.ball_radius,
        ]
        .iter()
        .chain(self.spawn_corners.iter().flatten())
        .all(|v| v.is_finite());
        if !finite {
            return err("non-finite value".into());
        }
        if self.side_length <= 0.0 || self.ball_radius <= 0.0 || self.goal_radius <= 0.0 {
            return err("lengths must be positive".into());
        }
        let h = self.half_side();
        if self.ball_radius * 2.0 >= self.side_length {
            return err("ball does not fit on the tray".into());
        }
        if self.gap_width <= 2.0 * self.ball_radius {
            return err(format!(
                "gap {} too narrow for ball of radius {}",
                self.gap_width, self.ball_radius
            ));
        }
        if self.barrier_offset < 0.0 || self.barrier_offset >= h {
            return err(format!("barrier offset {} outside [0, {h})", self.barrier_offset));
        }
        let inside_len = (2.0 * h - self.barrier_offset) * std::f64::consts::SQRT_2;
        if self.gap_width >= inside_len {
            return err("gap wider than the barrier line".into());
        }
        let reach = self.goal_radius + self.ball_radius;
        let [gx, gy] = self.goal_center;
        if h - gx.abs() < reach || h - gy.abs() < reach {
            return err("goal too close to a boundary wall".into());
        }
        if self.on_start_side(gx, gy) {
            return err("goal must lie beyond the barrier".into());
        }
        for (i, &[sx, sy]) in self.spawn_corners.iter().enumerate() {
            let lim = self.position_limit();
            if sx.abs() > lim || sy.abs() > lim {
                return err(format!("spawn corner {i} outside the reachable area"));
            }
            if !self.on_start_side(sx, sy) {
                return err(format!("spawn corner {i} not on the start side"));
            }
            for seg in self.barrier_segments() {
                if point_segment_distance([sx, sy], seg) <= self.ball_radius {
                    return err(format!("spawn corner {i} overlaps the barrier"));
                }
            }
        }
        Ok(())
    }
}

fn point_segment_distance(p: [f64; 2], seg: [[f64; 2]; 2]) -> f64 {
    let [a, b] = seg;
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    let c = [a[0] + t * d[0], a[1] + t * d[1]];
    ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt()
}

/// Dynamics and actuation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    pub gravity: f64,
    pub rolling_factor: f64,
    pub linear_damping: f64,
    pub wall_restitution: f64,
    pub max_tilt: f64,
    pub max_tilt_rate: f64,
    pub substep_dt: f64,
    pub substeps_per_frame: usize,
    pub actuation_latency: f64,
}

/// Duration of one control frame in seconds.
pub const FRAME_SECONDS: f64 = 0.2;

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            gravity: 9.81,
            rolling_factor: 5.0 / 7.0,
            linear_damping: 0.05,
            wall_restitution: 0.3,
            max_tilt: 0.10,
            max_tilt_rate: 0.40,
            substep_dt: 0.01,
            substeps_per_frame: 20,
            actuation_latency: 0.1,
        }
    }
}

impl PhysicsConfig {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        let err = |m: String| Err(PhysicsError::Config(m));
        let vals = [
            self.gravity,
            self.rolling_factor,
            self.linear_damping,
            self.wall_restitution,
            self.max_tilt,
            self.max_tilt_rate,
            self.substep_dt,
            self.actuation_latency,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return err("non-finite value".into());
        }
        if self.substep_dt <= 0.0 || self.substeps_per_frame == 0 {
            return err("substep_dt and substeps_per_frame must be positive".into());
        }
        let frame = self.substep_dt * self.substeps_per_frame as f64;
        if (frame - FRAME_SECONDS).abs() > 1e-9 {
            return err(format!("substeps cover {frame} s, expected {FRAME_SECONDS} s"));
        }
        if !(0.0..=1.0).contains(&self.wall_restitution) {
            return err("wall_restitution outside [0, 1]".into());
        }
        if self.max_tilt <= 0.0 || self.max_tilt_rate <= 0.0 {
            return err("tilt limits must be positive".into());
        }
        if self.max_tilt_rate * FRAME_SECONDS >= self.max_tilt {
            return err("one frame can sweep the whole tilt range".into());
        }
        if self.linear_damping < 0.0 || self.linear_damping * self.substep_dt >= 1.0 {
            return err("linear_damping out of range".into());
        }
        if !(0.0..FRAME_SECONDS).contains(&self.actuation_latency) {
            return err("actuation_latency must lie in [0, frame)".into());
        }
        Ok(())
    }

    /// Index of the first substep that uses the newly commanded rates.
    pub fn latency_substeps(&self) -> usize {
        let n = (self.actuation_latency / self.substep_dt - 1e-9).ceil();
        (n.max(0.0) as usize).min(self.substeps_per_frame)
    }
}

/// Ball acceleration in the tray frame for the given tilts.
pub fn ball_acceleration<S: Scalar>(theta: S, phi: S, cfg: &PhysicsConfig) -> (S, S) {
    let k = S::lit(cfg.rolling_factor * cfg.gravity);
    (k * phi.sin(), -(k * theta.sin()))
}

/// Full kinematic state of ball and tray.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrayState<S> {
    pub x: S,
    pub y: S,
    pub vx: S,
    pub vy: S,
    pub theta: S,
    pub phi: S,
    pub theta_rate: S,
    pub phi_rate: S,
    pub captured: bool,
}

impl<S: Scalar> TrayState<S> {
    pub fn at_rest(x: S, y: S) -> Self {
        Self {
            x,
            y,
            vx: S::zero(),
            vy: S::zero(),
            theta: S::zero(),
            phi: S::zero(),
            theta_rate: S::zero(),
            phi_rate: S::zero(),
            captured: false,
        }
    }

    /// The eight-component agent observation in canonical order.
    pub fn observation(&self) -> [S; 8] {
        [
            self.x,
            self.y,
            self.vx,
            self.vy,
            self.theta,
            self.phi,
            self.theta_rate,
            self.phi_rate,
        ]
    }

    pub fn speed(&self) -> S {
        self.vx.hypot(self.vy)
    }
}

/// What happened during one control frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FrameEvents {
    pub goal_reached: bool,
    pub wall_hits: u32,
    pub barrier_hits: u32,
    /// Substeps actually integrated; fewer than a full frame only on capture.
    pub substeps: usize,
}

/// Ball spawn for a trial: the spawn corners are cycled in order.
pub fn reset<S: Scalar>(trial_index: usize, geom: &TrayGeometry) -> TrayState<S> {
    let [x, y] = geom.spawn_corners[trial_index % geom.spawn_corners.len()];
    TrayState::at_rest(S::lit(x), S::lit(y))
}

#[derive(Debug, Clone, Copy)]
struct Segment<S> {
    a: [S; 2],
    b: [S; 2],
}

/// Validated simulator with precomputed constants for scalar type `S`.
#[derive(Debug, Clone)]
pub struct TraySim<S> {
    geom: TrayGeometry,
    cfg: PhysicsConfig,
    dt: S,
    accel_gain: S,
    damping_factor: S,
    restitution: S,
    max_tilt: S,
    max_rate: S,
    pos_limit: S,
    ball_radius: S,
    goal: [S; 2],
    goal_radius: S,
    segments: [Segment<S>; 2],
    line_normal: [S; 2],
    switch_substep: usize,
}

impl<S: Scalar> TraySim<S> {
    pub fn new(geom: TrayGeometry, cfg: PhysicsConfig) -> Result<Self, PhysicsError> {
        geom.validate()?;
        cfg.validate()?;
        let segs = geom.barrier_segments();
        let to_s = |p: [f64; 2]| [S::lit(p[0]), S::lit(p[1])];
        let n = S::lit(std::f64::consts::FRAC_1_SQRT_2);
        Ok(Self {
            dt: S::lit(cfg.substep_dt),
            accel_gain: S::lit(cfg.rolling_factor * cfg.gravity),
            damping_factor: S::lit(1.0 - cfg.linear_damping * cfg.substep_dt),
            restitution: S::lit(cfg.wall_restitution),
            max_tilt: S::lit(cfg.max_tilt),
            max_rate: S::lit(cfg.max_tilt_rate),
            pos_limit: S::lit(geom.position_limit()),
            ball_radius: S::lit(geom.ball_radius),
            goal: to_s(geom.goal_center),
            goal_radius: S::lit(geom.goal_radius),
            segments: [
                Segment { a: to_s(segs[0][0]), b: to_s(segs[0][1]) },
                Segment { a: to_s(segs[1][0]), b: to_s(segs[1][1]) },
            ],
            line_normal: [n, n],
            switch_substep: cfg.latency_substeps(),
            geom,
            cfg,
        })
    }

    pub fn geometry(&self) -> &TrayGeometry {
        &self.geom
    }

    pub fn config(&self) -> &PhysicsConfig {
        &self.cfg
    }

    pub fn reset(&self, trial_index: usize) -> TrayState<S> {
        reset(trial_index, &self.geom)
    }

    /// Advances one control frame.
    ///
    /// Actions are clamped to `[-1, 1]` and scaled to tilt-rate commands. The
    /// previous rates stay in force for the actuation latency, then the new
    /// commands apply for the rest of the frame.
    pub fn step_frame(
        &self,
        state: &TrayState<S>,
        a_agent: S,
        a_human: S,
    ) -> Result<(TrayState<S>, FrameEvents), PhysicsError> {
        if state.captured {
            return Err(PhysicsError::Captured);
        }
        if !a_agent.is_finite() || !a_human.is_finite() {
            return Err(PhysicsError::NonFiniteAction {
                agent: a_agent.as_f64(),
                partner: a_human.as_f64(),
            });
        }
        let one = S::one();
        let cmd_theta = a_agent.max(-one).min(one) * self.max_rate;
        let cmd_phi = a_human.max(-one).min(one) * self.max_rate;
        let prev_theta = state.theta_rate;
        let prev_phi = state.phi_rate;

        let mut s = *state;
        let mut ev = FrameEvents::default();
        for i in 0..self.cfg.substeps_per_frame {
            let (rt, rp) = if i < self.switch_substep {
                (prev_theta, prev_phi)
            } else {
                (cmd_theta, cmd_phi)
            };
            (s.theta, s.theta_rate) = self.integrate_tilt(s.theta, rt);
            (s.phi, s.phi_rate) = self.integrate_tilt(s.phi, rp);

            let ax = self.accel_gain * s.phi.sin();
            let ay = -(self.accel_gain * s.theta.sin());
            s.vx = (s.vx + ax * self.dt) * self.damping_factor;
            s.vy = (s.vy + ay * self.dt) * self.damping_factor;
            let prev_pos = [s.x, s.y];
            s.x = s.x + s.vx * self.dt;
            s.y = s.y + s.vy * self.dt;

            ev.wall_hits += self.resolve_walls(&mut s);
            for k in 0..2 {
                ev.barrier_hits += self.resolve_segment(&mut s, k, prev_pos);
            }
            ev.wall_hits += self.resolve_walls(&mut s);
            ev.substeps += 1;

            let gx = s.x - self.goal[0];
            let gy = s.y - self.goal[1];
            if gx.hypot(gy) <= self.goal_radius {
                s.captured = true;
                ev.goal_reached = true;
                break;
            }
        }
        Ok((s, ev))
    }

    fn integrate_tilt(&self, angle: S, rate: S) -> (S, S) {
        let next = angle + rate * self.dt;
        if next > self.max_tilt {
            (self.max_tilt, S::zero())
        } else if next < -self.max_tilt {
            (-self.max_tilt, S::zero())
        } else {
            (next, rate)
        }
    }

    fn resolve_walls(&self, s: &mut TrayState<S>) -> u32 {
        let lim = self.pos_limit;
        let e = self.restitution;
        let mut hits = 0;
        if s.x > lim {
            s.x = lim;
            if s.vx > S::zero() {
                s.vx = -e * s.vx;
                hits += 1;
            }
        } else if s.x < -lim {
            s.x = -lim;
            if s.vx < S::zero() {
                s.vx = -e * s.vx;
                hits += 1;
            }
        }
        if s.y > lim {
            s.y = lim;
            if s.vy > S::zero() {
                s.vy = -e * s.vy;
                hits += 1;
            }
        } else if s.y < -lim {
            s.y = -lim;
            if s.vy < S::zero() {
                s.vy = -e * s.vy;
                hits += 1;
            }
        }
        hits
    }

    /// Keeps the ball at least one radius from barrier segment `k`.
    ///
    /// Along the segment interior the ball is pushed back to the side it
    /// occupied before the substep, so a fast ball cannot tunnel through. The
    /// end caps act as point colliders.
    fn resolve_segment(&self, s: &mut TrayState<S>, k: usize, prev: [S; 2]) -> u32 {
        let seg = self.segments[k];
        let r = self.ball_radius;
        let zero = S::zero();
        let one = S::one();
        let d = [seg.b[0] - seg.a[0], seg.b[1] - seg.a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let rel = [s.x - seg.a[0], s.y - seg.a[1]];
        let t = (rel[0] * d[0] + rel[1] * d[1]) / len2;

        let normal = if t > zero && t < one {
            let nl = self.line_normal;
            let signed = rel[0] * nl[0] + rel[1] * nl[1];
            let prev_signed = (prev[0] - seg.a[0]) * nl[0] + (prev[1] - seg.a[1]) * nl[1];
            let side = if prev_signed > zero || (prev_signed == zero && signed >= zero) {
                one
            } else {
                -one
            };
            let depth = signed * side;
            if depth >= r {
                return 0;
            }
            let n = [nl[0] * side, nl[1] * side];
            s.x = s.x + n[0] * (r - depth);
            s.y = s.y + n[1] * (r - depth);
            n
        } else {
            let c = if t <= zero { seg.a } else { seg.b };
            let diff = [s.x - c[0], s.y - c[1]];
            let dist = diff[0].hypot(diff[1]);
            if dist >= r {
                return 0;
            }
            let n = if dist > zero {
                [diff[0] / dist, diff[1] / dist]
            } else {
                let pd = [prev[0] - c[0], prev[1] - c[1]];
                let pl = pd[0].hypot(pd[1]);
                if pl > zero {
                    [pd[0] / pl, pd[1] / pl]
                } else {
                    self.line_normal
                }
            };
            s.x = c[0] + n[0] * r;
            s.y = c[1] + n[1] * r;
            n
        };

        let vn = s.vx * normal[0] + s.vy * normal[1];
        if vn < zero {
            let j = (one + self.restitution) * vn;
            s.vx = s.vx - j * normal[0];
            s.vy = s.vy - j * normal[1];
            1
        } else {
            0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim() -> TraySim<f64> {
        TraySim::new(TrayGeometry::default(), PhysicsConfig::default()).unwrap()
    }

    #[test]
    fn acceleration_flat_tray_is_zero() {
        let (ax, ay) = ball_acceleration(0.0f64, 0.0, &PhysicsConfig::default());
        assert_eq!((ax, ay), (0.0, 0.0));
    }

    #[test]
    fn acceleration_matches_hand_values() {
        // (5/7) * 9.81 * sin(0.10) = 0.6995470...
        let cfg = PhysicsConfig::default();
        let (ax, ay) = ball_acceleration(0.0f64, 0.10, &cfg);
        assert!((ax - 0.699_547_012).abs() < 1e-8, "{ax}");
        assert_eq!(ay, 0.0);
        let (ax2, ay2) = ball_acceleration(0.10f64, 0.10, &cfg);
        assert_eq!(ax2, ax);
        assert_eq!(ay2, -ax);
    }

    #[test]
    fn rest_at_origin_is_equilibrium() {
        let sim = sim();
        let s = TrayState::at_rest(0.0, 0.0);
        let (next, ev) = sim.step_frame(&s, 0.0, 0.0).unwrap();
        assert_eq!(next, s);
        assert_eq!(ev, FrameEvents { substeps: 20, ..Default::default() });
    }

    #[test]
    fn full_partner_command_without_latency() {
        let cfg = PhysicsConfig { actuation_latency: 0.0, ..Default::default() };
        let sim = TraySim::<f64>::new(TrayGeometry::default(), cfg).unwrap();
        let s = TrayState::at_rest(0.0, 0.0);
        let (next, _) = sim.step_frame(&s, 0.0, 1.0).unwrap();
        assert!((next.phi - 0.08).abs() < 1e-12);
        assert!(next.x > 0.0 && next.vx > 0.0);
        assert_eq!(next.theta, 0.0);
        assert_eq!(next.y, 0.0);
        assert_eq!(next.phi_rate, 0.4);
    }

    #[test]
    fn latency_holds_previous_rates() {
        let sim = sim();
        let mut s = TrayState::at_rest(0.0, 0.0);
        s.phi_rate = -0.4;
        let (next, _) = sim.step_frame(&s, 0.0, 1.0).unwrap();
        // 10 substeps at -0.4, then 10 at +0.4.
        assert!(next.phi.abs() < 1e-12, "{}", next.phi);
        assert_eq!(next.phi_rate, 0.4);
    }

    #[test]
    fn tilt_clamps_and_rate_zeroes_at_the_stop() {
        let sim = sim();
        let mut s = TrayState::at_rest(-0.2, -0.2);
        for _ in 0..5 {
            s = sim.step_frame(&s, 1.0, 1.0).unwrap().0;
        }
        assert_eq!(s.theta, 0.1);
        assert_eq!(s.phi, 0.1);
        assert_eq!(s.theta_rate, 0.0);
        assert_eq!(s.phi_rate, 0.0);
    }

    #[test]
    fn capture_sets_terminal_flag() {
        let sim = sim();
        let s = TrayState::at_rest(0.19, 0.19);
        let (next, ev) = sim.step_frame(&s, 0.0, 0.0).unwrap();
        assert!(ev.goal_reached && next.captured);
        assert_eq!(ev.substeps, 1);
        assert_eq!(sim.step_frame(&next, 0.0, 0.0), Err(PhysicsError::Captured));
    }

    #[test]
    fn capture_on_approach() {
        let sim = sim();
        let mut s = TrayState::at_rest(0.12, 0.19);
        s.vx = 0.3;
        let (next, ev) = sim.step_frame(&s, 0.0, 0.0).unwrap();
        assert!(ev.goal_reached && next.captured);
        assert!(ev.substeps < 20);
    }

    #[test]
    fn non_finite_action_rejected() {
        let sim = sim();
        let s = TrayState::at_rest(0.0, 0.0);
        assert!(matches!(
            sim.step_frame(&s, f64::NAN, 0.0),
            Err(PhysicsError::NonFiniteAction { .. })
        ));
    }

    #[test]
    fn spawn_cycle() {
        let g = TrayGeometry::default();
        let s0: TrayState<f64> = reset(0, &g);
        assert_eq!((s0.x, s0.y), (-0.21, -0.21));
        let s3: TrayState<f64> = reset(3, &g);
        assert_eq!((s3.x, s3.y), (-0.21, -0.21));
        let s5: TrayState<f64> = reset(5, &g);
        assert_eq!((s5.x, s5.y), (-0.21, 0.21));
        assert_eq!(s5.vx, 0.0);
        assert!(!s5.captured);
    }

    #[test]
    fn barrier_blocks_and_gap_passes() {
        let sim = sim();
        // Head-on into the lower-right barrier segment.
        let mut s = TrayState::at_rest(0.10, -0.10);
        s.vx = 0.3;
        s.vy = 0.3;
        let mut hits = 0;
        for _ in 0..5 {
            let (n, ev) = sim.step_frame(&s, 0.0, 0.0).unwrap();
            hits += ev.barrier_hits;
            s = n;
        }
        assert!(hits > 0);
        assert!(s.x + s.y < 0.10);

        // Straight through the gap centre.
        let mut s = TrayState::at_rest(0.0, 0.0);
        s.vx = 0.3;
        s.vy = 0.3;
        let (n, ev) = sim.step_frame(&s, 0.0, 0.0).unwrap();
        assert_eq!(ev.barrier_hits, 0);
        assert!(n.x + n.y > 0.10);
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = PhysicsConfig { substeps_per_frame: 10, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = PhysicsConfig { wall_restitution: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = PhysicsConfig { max_tilt_rate: 0.6, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TrayGeometry { gap_width: 0.05, ..Default::default() };
        assert!(bad.validate().is_err());
        let on_line = TrayGeometry { barrier_offset: 0.0, ..Default::default() };
        assert!(on_line.validate().is_err());
        assert!(TrayGeometry::default().validate().is_ok());
    }
}

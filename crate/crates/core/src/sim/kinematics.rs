//! Holonomic body-frame kinematics with an acceleration-limited velocity response.

use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, Pose, Vec2};

/// Commanded or actual velocity triple in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl Action {
    pub const ZERO: Action = Action {
        vx: 0.0,
        vy: 0.0,
        omega: 0.0,
    };

    pub const fn new(vx: f64, vy: f64, omega: f64) -> Self {
        Self { vx, vy, omega }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.vx, self.vy, self.omega]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    /// L1 distance between two triples.
    pub fn l1(self, o: Action) -> f64 {
        (self.vx - o.vx).abs() + (self.vy - o.vy).abs() + (self.omega - o.omega).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionLimits {
    pub vx: (f64, f64),
    pub vy: (f64, f64),
    pub omega: (f64, f64),
}

impl Default for ActionLimits {
    fn default() -> Self {
        Self {
            vx: (-0.5, 3.0),
            vy: (-1.0, 1.0),
            omega: (-2.0, 2.0),
        }
    }
}

impl ActionLimits {
    /// Clamps each axis; NaN components become 0 before clamping.
    pub fn clamp(&self, a: Action) -> Action {
        let c = |v: f64, (lo, hi): (f64, f64)| if v.is_nan() { 0.0f64.clamp(lo, hi) } else { v.clamp(lo, hi) };
        Action::new(c(a.vx, self.vx), c(a.vy, self.vy), c(a.omega, self.omega))
    }
}

/// Velocity after `dt` and the distance covered along one axis, moving from
/// `v0` toward `target` at rate `accel` and holding once reached.
pub fn ramp(v0: f64, target: f64, accel: f64, dt: f64) -> (f64, f64) {
    let dv = target - v0;
    if dv == 0.0 {
        return (v0, v0 * dt);
    }
    let t_reach = if accel.is_finite() { dv.abs() / accel } else { 0.0 };
    if t_reach >= dt {
        let v1 = v0 + accel * dt * dv.signum();
        (v1, 0.5 * (v0 + v1) * dt)
    } else {
        (target, 0.5 * (v0 + target) * t_reach + target * (dt - t_reach))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Motion {
    pub pose: Pose,
    pub velocity: Action,
    /// World-frame translation over the step.
    pub delta: Vec2,
    /// Unwrapped heading change over the step.
    pub rotation: f64,
}

/// Advances `pose` by one step. Each axis ramps independently; the body-frame
/// displacement is rotated by the midpoint heading.
pub fn integrate(pose: Pose, velocity: Action, command: Action, accel_limit: f64, dt: f64) -> Motion {
    let (vx, dx) = ramp(velocity.vx, command.vx, accel_limit, dt);
    let (vy, dy) = ramp(velocity.vy, command.vy, accel_limit, dt);
    let (omega, rotation) = ramp(velocity.omega, command.omega, accel_limit, dt);
    let mid = pose.heading + 0.5 * rotation;
    let delta = Vec2::new(dx, dy).rotated(mid);
    Motion {
        pose: Pose {
            position: pose.position + delta,
            heading: normalize_angle(pose.heading + rotation),
        },
        velocity: Action::new(vx, vy, omega),
        delta,
        rotation,
    }
}

//! Carrot pure-pursuit: chase a point a fixed distance ahead on the path.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::normalize_angle;
use crate::planner::{lookahead_point, PlannedPath};
use crate::sim::{Action, ActionLimits, RobotState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrotConfig {
    pub lookahead: f64,
    pub speed_cap: f64,
    pub heading_gain: f64,
    /// Forward speed tapers linearly to zero inside this distance of the goal.
    pub goal_slowdown_radius: f64,
    /// Heading errors beyond this many degrees rotate in place.
    pub rotate_in_place_deg: f64,
    pub limits: ActionLimits,
}

impl Default for CarrotConfig {
    fn default() -> Self {
        Self::with_cap(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CarrotError {
    #[error("path has no waypoints")]
    EmptyPath,
    #[error("invalid carrot config: {0}")]
    InvalidConfig(String),
}

impl CarrotConfig {
    pub fn with_cap(speed_cap: f64) -> Self {
        Self {
            lookahead: 0.5,
            speed_cap,
            heading_gain: 2.0,
            goal_slowdown_radius: 0.5,
            rotate_in_place_deg: 20.0,
            limits: ActionLimits::default(),
        }
    }

    pub fn check(&self) -> Result<(), CarrotError> {
        let bad = |m: &str| Err(CarrotError::InvalidConfig(m.into()));
        if !(self.lookahead > 0.0) {
            return bad("lookahead must be positive");
        }
        if !(self.speed_cap > 0.0 && self.speed_cap <= self.limits.vx.1) {
            return bad("speed_cap must be positive and within the vx limit");
        }
        if !(self.heading_gain > 0.0) || !(self.goal_slowdown_radius >= 0.0) {
            return bad("heading_gain must be positive, goal_slowdown_radius non-negative");
        }
        Ok(())
    }
}

pub fn carrot_act(state: &RobotState, path: &PlannedPath, config: &CarrotConfig) -> Result<Action, CarrotError> {
    if path.waypoints.is_empty() {
        return Err(CarrotError::EmptyPath);
    }
    let pos = state.pose.position;
    let target = lookahead_point(path, pos, config.lookahead);
    let to_target = target - pos;
    let e = if to_target.norm() > 1e-12 {
        normalize_angle(to_target.angle() - state.pose.heading)
    } else {
        0.0
    };
    let (lo, hi) = config.limits.omega;
    let omega = (config.heading_gain * e).clamp(lo, hi);

    let mut vx = config.speed_cap;
    let d_goal = pos.distance(path.goal());
    if d_goal < config.goal_slowdown_radius {
        vx *= d_goal / config.goal_slowdown_radius;
    }
    if e.abs() > config.rotate_in_place_deg.to_radians() {
        vx = 0.0;
    }
    Ok(Action::new(vx.clamp(config.limits.vx.0, config.limits.vx.1), 0.0, omega))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Pose, Vec2};
    use std::f64::consts::FRAC_PI_2;

    fn at(x: f64, y: f64, h: f64) -> RobotState {
        RobotState {
            pose: Pose::new(Vec2::new(x, y), h),
            velocity: Action::ZERO,
            prev_command: Action::ZERO,
        }
    }

    fn east() -> PlannedPath {
        PlannedPath::from_waypoints(vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)])
    }

    #[test]
    fn aligned_drives_at_cap() {
        let a = carrot_act(&at(2.0, 0.0, 0.0), &east(), &CarrotConfig::with_cap(1.5)).unwrap();
        assert_eq!(a, Action::new(1.5, 0.0, 0.0));
    }

    #[test]
    fn target_to_the_left_saturates_omega() {
        // Facing south, the carrot is 90 degrees to the left.
        let a = carrot_act(&at(2.0, 0.0, -FRAC_PI_2), &east(), &CarrotConfig::default()).unwrap();
        assert_eq!(a.omega, 2.0);
        assert_eq!(a.vy, 0.0);
        assert_eq!(a.vx, 0.0);
    }

    #[test]
    fn small_error_keeps_full_speed() {
        // Carrot 0.5 m ahead, 0.1 m to the left: about 11 degrees.
        let p = PlannedPath::from_waypoints(vec![Vec2::new(0.0, 0.1), Vec2::new(10.0, 0.1)]);
        let a = carrot_act(&at(2.0, 0.0, 0.0), &p, &CarrotConfig::default()).unwrap();
        assert_eq!(a.vx, 1.0);
        assert!((a.omega - 2.0 * (0.1f64).atan2(0.5)).abs() < 1e-12);
    }

    #[test]
    fn facing_backwards_rotates_in_place() {
        let a = carrot_act(&at(2.0, 0.0, 3.0), &east(), &CarrotConfig::default()).unwrap();
        assert_eq!(a.vx, 0.0);
        assert!(a.omega < 0.0);
    }

    #[test]
    fn slows_near_goal() {
        let a = carrot_act(&at(9.8, 0.0, 0.0), &east(), &CarrotConfig::with_cap(2.0)).unwrap();
        assert!((a.vx - 2.0 * 0.2 / 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_path_and_bad_config() {
        let p = PlannedPath {
            waypoints: vec![],
            length: 0.0,
            grid_cost: Default::default(),
        };
        assert_eq!(carrot_act(&at(0.0, 0.0, 0.0), &p, &CarrotConfig::default()), Err(CarrotError::EmptyPath));
        assert!(CarrotConfig::with_cap(3.5).check().is_err());
        assert!(CarrotConfig::with_cap(2.0).check().is_ok());
    }
}

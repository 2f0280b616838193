//! Observation vectors and the per-step reward.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::planner::{lookahead_point, PlannedPath, SubgoalVector, SUBGOAL_COUNT};
use crate::sim::{Action, RobotState, Status};

pub const OBSERVATION_SPEC_VERSION: u32 = 1;
pub const SCALAR_DIM: usize = 9;
pub const SUBGOAL_DIM: usize = 2 * SUBGOAL_COUNT;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("observation spec mismatch: {0}")]
    SpecMismatch(String),
    #[error("path lookahead reward needs a path")]
    MissingPath,
}

/// Layout of the flat observation vector. Blocks appear in the order of
/// [`ObservationSpec::layout`]; every vector quantity is in the robot body
/// frame (x forward, y left).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationSpec {
    pub version: u32,
    pub lidar_dim: usize,
    pub subgoals_enabled: bool,
}

impl Default for ObservationSpec {
    fn default() -> Self {
        Self::new(false)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: &'static str,
    pub offset: usize,
    pub len: usize,
}

impl ObservationSpec {
    pub fn new(subgoals_enabled: bool) -> Self {
        Self {
            version: OBSERVATION_SPEC_VERSION,
            lidar_dim: 1200,
            subgoals_enabled,
        }
    }

    pub fn scalar_dim(&self) -> usize {
        SCALAR_DIM + if self.subgoals_enabled { SUBGOAL_DIM } else { 0 }
    }

    pub fn dim(&self) -> usize {
        self.lidar_dim + self.scalar_dim()
    }

    /// Blocks: `lidar`, `goal_vector` (unit), `goal_distance` (over world
    /// diagonal), `velocity` (actual vx, vy, ω), `prev_command`, and
    /// optionally `subgoals` (five unit directions, zero once the path is
    /// exhausted).
    pub fn layout(&self) -> Vec<Block> {
        let mut blocks = Vec::new();
        let mut offset = 0;
        let mut push = |name, len| {
            blocks.push(Block { name, offset, len });
            offset += len;
        };
        push("lidar", self.lidar_dim);
        push("goal_vector", 2);
        push("goal_distance", 1);
        push("velocity", 3);
        push("prev_command", 3);
        if self.subgoals_enabled {
            push("subgoals", SUBGOAL_DIM);
        }
        blocks
    }

    pub fn block(&self, name: &str) -> Option<Block> {
        self.layout().into_iter().find(|b| b.name == name)
    }

    pub fn slice<'a>(&self, obs: &'a [f64], name: &str) -> Option<&'a [f64]> {
        let b = self.block(name)?;
        obs.get(b.offset..b.offset + b.len)
    }
}

/// Inputs of one observation besides the scan.
#[derive(Debug, Clone, Copy)]
pub struct ObservationContext<'a> {
    pub state: &'a RobotState,
    pub goal: Vec2,
    pub goal_radius: f64,
    pub world_diagonal: f64,
    pub subgoals: Option<&'a SubgoalVector>,
}

pub fn build_observation(spec: &ObservationSpec, scan: &[f64], ctx: &ObservationContext) -> Result<Vec<f64>, TaskError> {
    let mut out = vec![0.0; spec.dim()];
    write_observation(spec, scan, ctx, &mut out)?;
    Ok(out)
}

/// Fills `out` in place; `out` must have length `spec.dim()`.
pub fn write_observation(spec: &ObservationSpec, scan: &[f64], ctx: &ObservationContext, out: &mut [f64]) -> Result<(), TaskError> {
    if scan.len() != spec.lidar_dim {
        return Err(TaskError::SpecMismatch(format!("scan has {} rays, spec {}", scan.len(), spec.lidar_dim)));
    }
    if out.len() != spec.dim() {
        return Err(TaskError::SpecMismatch(format!("buffer has {} slots, spec {}", out.len(), spec.dim())));
    }
    if ctx.subgoals.is_some() != spec.subgoals_enabled {
        return Err(TaskError::SpecMismatch("subgoals must be given iff enabled".into()));
    }
    let pose = ctx.state.pose;
    let to_goal = ctx.goal - pose.position;
    let dist = to_goal.norm();
    let dir = if dist <= ctx.goal_radius { Vec2::ZERO } else { pose.to_body(to_goal).normalized_or_zero() };
    let n = spec.lidar_dim;
    out[..n].copy_from_slice(scan);
    out[n] = dir.x;
    out[n + 1] = dir.y;
    out[n + 2] = dist / ctx.world_diagonal;
    out[n + 3..n + 6].copy_from_slice(&ctx.state.velocity.to_array());
    out[n + 6..n + 9].copy_from_slice(&ctx.state.prev_command.to_array());
    if let Some(sg) = ctx.subgoals {
        for (k, d) in sg.directions.iter().enumerate() {
            let b = pose.to_body(*d);
            out[n + 9 + 2 * k] = b.x;
            out[n + 10 + 2 * k] = b.y;
        }
    }
    Ok(())
}

/// Term weights; penalties are stored positive and applied negated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub w_progress: f64,
    pub w_laser: f64,
    pub laser_threshold: f64,
    pub w_goal: f64,
    pub w_action: f64,
    pub r_success: f64,
    pub r_collision: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_progress: 1.0,
            w_laser: 1.0,
            laser_threshold: 0.30,
            w_goal: 0.1,
            w_action: 0.05,
            r_success: 10.0,
            r_collision: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgressReference {
    GoalDistance,
    /// Distance to the point 0.5 m ahead of the previous position along the path.
    PathLookahead,
}

pub const PROGRESS_LOOKAHEAD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub progress: f64,
    pub laser: f64,
    pub goal: f64,
    pub action: f64,
    pub done: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn terms(&self) -> [f64; 5] {
        [self.progress, self.laser, self.goal, self.action, self.done]
    }
}

/// Everything one reward evaluation looks at.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    pub prev: &'a RobotState,
    pub next: &'a RobotState,
    /// Clamped command applied this step.
    pub command: Action,
    /// Smallest LiDAR range in meters.
    pub min_range: f64,
    pub status: Status,
    pub goal: Vec2,
    pub goal_radius: f64,
}

/// Smallest range in meters of a normalized scan.
pub fn min_scan_range(scan: &[f64], max_range: f64) -> f64 {
    scan.iter().fold(f64::INFINITY, |m, v| m.min(*v)) * max_range
}

pub fn compute_reward(
    t: &Transition,
    w: &RewardWeights,
    reference: ProgressReference,
    path: Option<&PlannedPath>,
) -> Result<RewardBreakdown, TaskError> {
    let (p0, p1) = (t.prev.pose.position, t.next.pose.position);
    let target = match reference {
        ProgressReference::GoalDistance => t.goal,
        ProgressReference::PathLookahead => lookahead_point(path.ok_or(TaskError::MissingPath)?, p0, PROGRESS_LOOKAHEAD),
    };
    let progress = w.w_progress * (p0.distance(target) - p1.distance(target));
    let laser = -w.w_laser * (w.laser_threshold - t.min_range).max(0.0);
    let d_goal = p1.distance(t.goal);
    let goal = if d_goal <= t.goal_radius { w.w_goal * (1.0 - d_goal / t.goal_radius) } else { 0.0 };
    let action = -w.w_action * t.command.l1(t.prev.prev_command);
    let done = match t.status {
        Status::Success => w.r_success,
        Status::Collision => -w.r_collision,
        Status::Running | Status::Timeout => 0.0,
    };
    Ok(RewardBreakdown {
        progress,
        laser,
        goal,
        action,
        done,
        total: progress + laser + goal + action + done,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;

    fn state(x: f64, y: f64, heading: f64) -> RobotState {
        RobotState {
            pose: Pose::new(Vec2::new(x, y), heading),
            velocity: Action::new(0.5, 0.1, -0.2),
            prev_command: Action::new(0.6, 0.0, -0.2),
        }
    }

    fn ctx<'a>(s: &'a RobotState, goal: Vec2) -> ObservationContext<'a> {
        ObservationContext {
            state: s,
            goal,
            goal_radius: 0.25,
            world_diagonal: 20.0,
            subgoals: None,
        }
    }

    #[test]
    fn dims_and_layout() {
        assert_eq!(ObservationSpec::new(false).dim(), 1209);
        assert_eq!(ObservationSpec::new(true).dim(), 1219);
        let spec = ObservationSpec::new(true);
        let total: usize = spec.layout().iter().map(|b| b.len).sum();
        assert_eq!(total, 1219);
    }

    #[test]
    fn goal_vector_in_body_frame() {
        let s = state(0.0, 0.0, std::f64::consts::FRAC_PI_2);
        let spec = ObservationSpec::default();
        let obs = build_observation(&spec, &vec![1.0; 1200], &ctx(&s, Vec2::new(5.0, 0.0))).unwrap();
        let g = spec.slice(&obs, "goal_vector").unwrap();
        assert!(g[0].abs() < 1e-12 && (g[1] + 1.0).abs() < 1e-12);
        assert_eq!(spec.slice(&obs, "goal_distance").unwrap(), &[0.25]);
        assert_eq!(spec.slice(&obs, "velocity").unwrap(), &[0.5, 0.1, -0.2]);
        assert_eq!(spec.slice(&obs, "prev_command").unwrap(), &[0.6, 0.0, -0.2]);
    }

    #[test]
    fn at_goal_vector_is_zero() {
        let s = state(3.0, 3.0, 0.4);
        let spec = ObservationSpec::default();
        let obs = build_observation(&spec, &vec![0.5; 1200], &ctx(&s, Vec2::new(3.0, 3.0))).unwrap();
        assert_eq!(spec.slice(&obs, "goal_vector").unwrap(), &[0.0, 0.0]);
        assert_eq!(spec.slice(&obs, "goal_distance").unwrap(), &[0.0]);
    }

    #[test]
    fn mismatches_are_reported() {
        let s = state(0.0, 0.0, 0.0);
        let spec = ObservationSpec::new(true);
        assert!(matches!(
            build_observation(&spec, &vec![1.0; 1200], &ctx(&s, Vec2::new(1.0, 0.0))),
            Err(TaskError::SpecMismatch(_))
        ));
        assert!(build_observation(&ObservationSpec::default(), &[1.0; 10], &ctx(&s, Vec2::new(1.0, 0.0))).is_err());
    }

    #[test]
    fn stationary_far_from_everything_is_zero_reward() {
        let s = RobotState {
            prev_command: Action::new(0.3, 0.0, 0.0),
            ..state(1.0, 1.0, 0.0)
        };
        let t = Transition {
            prev: &s,
            next: &s,
            command: Action::new(0.3, 0.0, 0.0),
            min_range: 5.0,
            status: Status::Running,
            goal: Vec2::new(8.0, 8.0),
            goal_radius: 0.25,
        };
        let r = compute_reward(&t, &RewardWeights::default(), ProgressReference::GoalDistance, None).unwrap();
        assert_eq!(r.terms(), [0.0; 5]);
        assert_eq!(r.total, 0.0);
    }

    #[test]
    fn progress_and_laser_terms() {
        let a = state(0.0, 0.0, 0.0);
        let b = state(0.1, 0.0, 0.0);
        let t = Transition {
            prev: &a,
            next: &b,
            command: a.prev_command,
            min_range: 0.15,
            status: Status::Running,
            goal: Vec2::new(5.0, 0.0),
            goal_radius: 0.25,
        };
        let r = compute_reward(&t, &RewardWeights::default(), ProgressReference::GoalDistance, None).unwrap();
        assert!((r.progress - 0.1).abs() < 1e-12);
        assert!((r.laser + 0.15).abs() < 1e-12);
        assert_eq!(
            compute_reward(&t, &RewardWeights::default(), ProgressReference::PathLookahead, None),
            Err(TaskError::MissingPath)
        );
    }

    #[test]
    fn done_and_goal_terms() {
        let a = state(4.0, 0.0, 0.0);
        let b = state(4.9, 0.0, 0.0);
        let mut t = Transition {
            prev: &a,
            next: &b,
            command: a.prev_command,
            min_range: 3.0,
            status: Status::Success,
            goal: Vec2::new(5.0, 0.0),
            goal_radius: 0.25,
        };
        let w = RewardWeights::default();
        let r = compute_reward(&t, &w, ProgressReference::GoalDistance, None).unwrap();
        assert_eq!(r.done, 10.0);
        assert!((r.goal - 0.1 * 0.6).abs() < 1e-12);
        t.status = Status::Collision;
        assert_eq!(compute_reward(&t, &w, ProgressReference::GoalDistance, None).unwrap().done, -10.0);
        t.status = Status::Timeout;
        assert_eq!(compute_reward(&t, &w, ProgressReference::GoalDistance, None).unwrap().done, 0.0);
    }
}

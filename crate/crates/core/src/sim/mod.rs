//! Single-robot episodes: kinematics, swept collision, LiDAR and batch stepping.

mod kinematics;
mod lidar;
pub mod log;

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{OrientedRect, Pose, SpatialIndex, Vec2, ROBOT_RADIUS};
use crate::mapgen::Map;
use crate::planner::{planning_grid, InflatedGrid};
use crate::rng::SeededRng;

pub use kinematics::{integrate, ramp, Action, ActionLimits, Motion};
pub use lidar::LidarConfig;

/// Maximum translation of any footprint point between collision checks.
pub const SUBSTEP_TRAVEL: f64 = 0.05;

/// A map with the lookup structures episodes share.
#[derive(Debug)]
pub struct World {
    pub map: Map,
    pub index: SpatialIndex,
    grid: OnceLock<InflatedGrid>,
}

impl World {
    pub fn new(map: Map) -> Self {
        let index = map.spatial_index();
        Self {
            map,
            index,
            grid: OnceLock::new(),
        }
    }

    /// Planning grid, built on first use.
    pub fn grid(&self) -> &InflatedGrid {
        self.grid.get_or_init(|| planning_grid(&self.map))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub dt: f64,
    pub max_steps: u32,
    pub goal_radius: f64,
    /// Applies to all three velocity axes (m/s² and rad/s²).
    pub accel_limit: f64,
    pub limits: ActionLimits,
    /// Forces `vy = 0` (differential drive).
    pub differential: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            max_steps: 512,
            goal_radius: 0.25,
            accel_limit: 4.0,
            limits: ActionLimits::default(),
            differential: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Running,
    Success,
    Collision,
    Timeout,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        self != Status::Running
    }

    fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose,
    /// Actual body-frame velocity.
    pub velocity: Action,
    /// Last clamped command.
    pub prev_command: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("node index {0} out of range for a map with {1} nodes")]
    InvalidNode(usize, usize),
    #[error("start and goal node must differ")]
    SameNode,
    #[error("step called on a finished episode ({0:?})")]
    SteppedTerminal(Status),
}

/// One episode on one map.
#[derive(Debug, Clone)]
pub struct Env {
    pub world: Arc<World>,
    pub config: EpisodeConfig,
    pub start_node: usize,
    pub goal_node: usize,
    pub goal: Vec2,
    state: RobotState,
    status: Status,
    step_index: u32,
    traveled: f64,
    hasher: Sha256,
}

impl Env {
    /// Places the robot on `start_node` with a heading drawn from `episode_seed`.
    pub fn reset(
        world: Arc<World>,
        start_node: usize,
        goal_node: usize,
        config: EpisodeConfig,
        episode_seed: u64,
    ) -> Result<Self, SimError> {
        let n = world.map.nodes.len();
        for i in [start_node, goal_node] {
            if i >= n {
                return Err(SimError::InvalidNode(i, n));
            }
        }
        if start_node == goal_node {
            return Err(SimError::SameNode);
        }
        let start = world.map.nodes[start_node];
        Ok(Self::from_pose(world, Pose::new(start, initial_heading(episode_seed)), start_node, goal_node, config))
    }

    /// Starts from an explicit pose; used by tests and degenerate protocols.
    pub fn from_pose(world: Arc<World>, pose: Pose, start_node: usize, goal_node: usize, config: EpisodeConfig) -> Self {
        let goal = world.map.nodes[goal_node];
        let state = RobotState {
            pose,
            velocity: Action::ZERO,
            prev_command: Action::ZERO,
        };
        let mut env = Self {
            world,
            config,
            start_node,
            goal_node,
            goal,
            state,
            status: Status::Running,
            step_index: 0,
            traveled: 0.0,
            hasher: Sha256::new(),
        };
        env.hash_state();
        env
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn step_index(&self) -> u32 {
        self.step_index
    }

    pub fn elapsed(&self) -> f64 {
        self.step_index as f64 * self.config.dt
    }

    /// Path length driven so far.
    pub fn traveled(&self) -> f64 {
        self.traveled
    }

    pub fn goal_distance(&self) -> f64 {
        self.state.pose.position.distance(self.goal)
    }

    /// Clamps `action`, advances one step and resolves the episode status.
    pub fn step(&mut self, action: Action) -> Result<Status, SimError> {
        if self.status.is_terminal() {
            return Err(SimError::SteppedTerminal(self.status));
        }
        let cfg = &self.config;
        let mut cmd = cfg.limits.clamp(action);
        if cfg.differential {
            cmd.vy = 0.0;
        }
        let from = self.state.pose;
        let m = integrate(from, self.state.velocity, cmd, cfg.accel_limit, cfg.dt);
        let collided = swept_collision(&self.world.index, from, &m);
        self.state = RobotState {
            pose: m.pose,
            velocity: m.velocity,
            prev_command: cmd,
        };
        self.traveled += m.delta.norm();
        self.step_index += 1;
        self.status = if collided {
            Status::Collision
        } else if self.goal_distance() <= cfg.goal_radius {
            Status::Success
        } else if self.step_index >= cfg.max_steps {
            Status::Timeout
        } else {
            Status::Running
        };
        self.hash_state();
        Ok(self.status)
    }

    pub fn scan(&self, lidar: &LidarConfig) -> Vec<f64> {
        lidar.scan(&self.world.index, self.state.pose)
    }

    pub fn scan_into(&self, lidar: &LidarConfig, out: &mut [f64]) {
        lidar.scan_into(&self.world.index, self.state.pose, out)
    }

    /// Distance from the robot center to the nearest obstacle.
    pub fn clearance(&self) -> f64 {
        self.world.index.distance_to_point(self.state.pose.position)
    }

    fn hash_state(&mut self) {
        let s = &self.state;
        let h = &mut self.hasher;
        h.update(self.step_index.to_le_bytes());
        for v in [s.pose.position.x, s.pose.position.y, s.pose.heading]
            .into_iter()
            .chain(s.velocity.to_array())
            .chain(s.prev_command.to_array())
        {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update([self.status.code()]);
    }

    /// SHA-256 over every state visited so far.
    pub fn trajectory_hash(&self) -> [u8; 32] {
        self.hasher.clone().finalize().into()
    }
}

/// Start heading in (-π, π] drawn from the episode seed.
pub fn initial_heading(episode_seed: u64) -> f64 {
    let mut rng = SeededRng::derived(episode_seed, "heading", 0);
    std::f64::consts::PI - rng.unit() * std::f64::consts::TAU
}

/// Checks interpolated footprints between `from` and the end of `m` so that no
/// footprint point moves more than [`SUBSTEP_TRAVEL`] between checks.
pub fn swept_collision(index: &SpatialIndex, from: Pose, m: &Motion) -> bool {
    let travel = m.delta.norm() + m.rotation.abs() * ROBOT_RADIUS;
    let n = ((travel / SUBSTEP_TRAVEL).ceil() as usize).max(1);
    (1..=n).any(|k| {
        let t = k as f64 / n as f64;
        let pose = Pose {
            position: from.position + m.delta * t,
            heading: from.heading + m.rotation * t,
        };
        index.rect_intersects(&OrientedRect::robot(pose))
    })
}

/// Steps every running env with its action; finished envs are left untouched
/// and report their status. Results do not depend on the thread count.
pub fn step_batch(envs: &mut [Env], actions: &[Action]) -> Vec<Status> {
    assert_eq!(envs.len(), actions.len(), "one action per env");
    envs.par_iter_mut()
        .zip(actions.par_iter())
        .map(|(env, a)| match env.step(*a) {
            Ok(s) => s,
            Err(SimError::SteppedTerminal(s)) => s,
            Err(e) => unreachable!("{e}"),
        })
        .collect()
}

/// Combined hash of a batch, in env order.
pub fn batch_hash(envs: &[Env]) -> [u8; 32] {
    let mut h = Sha256::new();
    for e in envs {
        h.update(e.trajectory_hash());
    }
    h.finalize().into()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

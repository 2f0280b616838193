//! Episodic reset/step environments for learning code, single and batched.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{choose_endpoints, episode_seed, start_env, HarnessError, StartGoalRule};
use crate::mapgen::{generate, GeneratorConfig, GeneratorKind};
use crate::planner::{plan, resample_subgoals, PlannedPath};
use crate::rng::derive_seed;
use crate::sim::{Action, Env, EpisodeConfig, LidarConfig, RobotState, Status, World};
use crate::tasks::{
    compute_reward, min_scan_range, write_observation, ObservationContext, ObservationSpec, ProgressReference,
    RewardBreakdown, RewardWeights, Transition,
};

/// When the cached path behind subgoals and lookahead rewards is replanned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplanPolicy {
    pub every_steps: u32,
    /// Replan once the robot is farther than this from the cached path.
    pub max_deviation: f64,
}

impl Default for ReplanPolicy {
    fn default() -> Self {
        Self {
            every_steps: 10,
            max_deviation: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavEnvConfig {
    pub generator: GeneratorConfig,
    pub episode: EpisodeConfig,
    pub lidar: LidarConfig,
    pub observation: ObservationSpec,
    pub reward: RewardWeights,
    pub progress_reference: ProgressReference,
    pub start_goal: StartGoalRule,
    pub replan: ReplanPolicy,
    /// Episodes played on one map before the next reset generates a new one.
    pub episodes_per_map: u32,
}

impl NavEnvConfig {
    pub fn new(kind: GeneratorKind, subgoals: bool) -> Self {
        Self {
            generator: GeneratorConfig::default_for(kind),
            episode: EpisodeConfig::default(),
            lidar: LidarConfig::default(),
            observation: ObservationSpec::new(subgoals),
            reward: RewardWeights::default(),
            progress_reference: ProgressReference::GoalDistance,
            start_goal: StartGoalRule::Farthest,
            replan: ReplanPolicy::default(),
            episodes_per_map: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResetInfo {
    pub map_seed: u64,
    pub generator: GeneratorKind,
    pub episode_seed: u64,
    pub start_node: usize,
    pub goal_node: usize,
    pub astar_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub status: Status,
    pub step: u32,
    pub reward: RewardBreakdown,
    pub map_seed: u64,
    /// Set by [`VecEnv`] when the slot auto-reset: the terminal observation.
    pub final_observation: Option<Vec<f64>>,
    /// Set by [`VecEnv`] when the slot auto-reset.
    pub reset: Option<ResetInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// Success or collision.
    pub terminated: bool,
    /// Step budget exhausted.
    pub truncated: bool,
    pub info: StepInfo,
}

/// One robot on procedurally generated maps.
#[derive(Debug, Clone)]
pub struct NavEnv {
    config: NavEnvConfig,
    world: Option<Arc<World>>,
    map_seed: u64,
    episodes_on_map: u32,
    env: Option<Env>,
    reference: PlannedPath,
    path: PlannedPath,
    steps_since_plan: u32,
    scan: Vec<f64>,
}

impl NavEnv {
    pub fn new(config: NavEnvConfig) -> Result<Self, HarnessError> {
        config.generator.check().map_err(|e| HarnessError::InvalidProtocol(e.to_string()))?;
        if config.observation.lidar_dim != config.lidar.ray_count {
            return Err(HarnessError::InvalidProtocol("observation lidar_dim must equal lidar ray_count".into()));
        }
        if config.episodes_per_map == 0 {
            return Err(HarnessError::InvalidProtocol("episodes_per_map must be at least 1".into()));
        }
        let scan = vec![0.0; config.lidar.ray_count];
        let empty = PlannedPath::from_waypoints(vec![Default::default()]);
        Ok(Self {
            config,
            world: None,
            map_seed: 0,
            episodes_on_map: 0,
            env: None,
            reference: empty.clone(),
            path: empty,
            steps_since_plan: 0,
            scan,
        })
    }

    pub fn config(&self) -> &NavEnvConfig {
        &self.config
    }

    pub fn observation_spec(&self) -> &ObservationSpec {
        &self.config.observation
    }

    pub fn observation_dim(&self) -> usize {
        self.config.observation.dim()
    }

    /// The running episode, if any.
    pub fn env(&self) -> Option<&Env> {
        self.env.as_ref()
    }

    pub fn state(&self) -> Option<&RobotState> {
        self.env.as_ref().map(Env::state)
    }

    /// Planned path from start to goal of the current episode.
    pub fn reference_path(&self) -> &PlannedPath {
        &self.reference
    }

    /// Cached path behind subgoals and lookahead rewards.
    pub fn current_path(&self) -> &PlannedPath {
        &self.path
    }

    pub fn trajectory_hash(&self) -> Option<[u8; 32]> {
        self.env.as_ref().map(Env::trajectory_hash)
    }

    /// Starts an episode. A new map is generated with `seed` as its map seed
    /// when the map budget is used up; the episode seed is derived from `seed`.
    pub fn reset(&mut self, seed: u64) -> Result<(Vec<f64>, ResetInfo), HarnessError> {
        let mut obs = vec![0.0; self.observation_dim()];
        let info = self.reset_into(seed, &mut obs)?;
        Ok((obs, info))
    }

    pub fn reset_into(&mut self, seed: u64, obs: &mut [f64]) -> Result<ResetInfo, HarnessError> {
        if self.world.is_none() || self.episodes_on_map >= self.config.episodes_per_map {
            let kind = self.config.generator.kind();
            let map = generate(&self.config.generator, seed)
                .map_err(|source| HarnessError::GenerationFailed { kind, index: 0, source })?;
            self.world = Some(Arc::new(World::new(map)));
            self.map_seed = seed;
            self.episodes_on_map = 0;
        }
        let world = self.world.clone().expect("map present");
        let kind = world.map.generator;
        let (start, goal, path) = choose_endpoints(&world, self.config.start_goal, seed)
            .map_err(|source| HarnessError::Plan { kind, index: 0, source })?;
        let ep_seed = episode_seed(seed, 0);
        self.env = Some(start_env(world, start, goal, self.config.episode, ep_seed));
        self.episodes_on_map += 1;
        self.reference = path.clone();
        self.path = path;
        self.steps_since_plan = 0;
        self.write_obs(obs)?;
        Ok(ResetInfo {
            map_seed: self.map_seed,
            generator: kind,
            episode_seed: ep_seed,
            start_node: start,
            goal_node: goal,
            astar_length: self.reference.length,
        })
    }

    fn write_obs(&mut self, obs: &mut [f64]) -> Result<(), HarnessError> {
        let env = self.env.as_ref().expect("episode running");
        env.scan_into(&self.config.lidar, &mut self.scan);
        let subgoals = self
            .config
            .observation
            .subgoals_enabled
            .then(|| resample_subgoals(&self.path, env.state().pose.position));
        let ctx = ObservationContext {
            state: env.state(),
            goal: env.goal,
            goal_radius: env.config.goal_radius,
            world_diagonal: env.world.map.diagonal(),
            subgoals: subgoals.as_ref(),
        };
        write_observation(&self.config.observation, &self.scan, &ctx, obs)?;
        Ok(())
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult, HarnessError> {
        let mut obs = vec![0.0; self.observation_dim()];
        let (reward, terminated, truncated, info) = self.step_into(action, &mut obs)?;
        Ok(StepResult {
            observation: obs,
            reward,
            terminated,
            truncated,
            info,
        })
    }

    /// Steps and writes the next observation into `obs`; returns
    /// `(reward, terminated, truncated, info)`.
    pub fn step_into(&mut self, action: Action, obs: &mut [f64]) -> Result<(f64, bool, bool, StepInfo), HarnessError> {
        let env = self.env.as_mut().ok_or(HarnessError::NotReset)?;
        let prev = *env.state();
        let status = env.step(action)?;
        env.scan_into(&self.config.lidar, &mut self.scan);
        let t = Transition {
            prev: &prev,
            next: env.state(),
            command: env.state().prev_command,
            min_range: min_scan_range(&self.scan, self.config.lidar.max_range),
            status,
            goal: env.goal,
            goal_radius: env.config.goal_radius,
        };
        let path = (self.config.progress_reference == ProgressReference::PathLookahead).then_some(&self.path);
        let breakdown = compute_reward(&t, &self.config.reward, self.config.progress_reference, path)?;
        let step = env.step_index();
        self.maybe_replan();
        self.write_obs(obs)?;
        let info = StepInfo {
            status,
            step,
            reward: breakdown,
            map_seed: self.map_seed,
            final_observation: None,
            reset: None,
        };
        Ok((
            breakdown.total,
            matches!(status, Status::Success | Status::Collision),
            status == Status::Timeout,
            info,
        ))
    }

    fn maybe_replan(&mut self) {
        let env = self.env.as_ref().expect("episode running");
        self.steps_since_plan += 1;
        let pos = env.state().pose.position;
        let deviation = self.path.project(pos).1.distance(pos);
        let policy = self.config.replan;
        if self.steps_since_plan >= policy.every_steps || deviation > policy.max_deviation {
            // Keeps the old path when the robot sits too close to a wall to snap.
            if let Ok(p) = plan(env.world.grid(), pos, env.goal) {
                self.path = p;
            }
            self.steps_since_plan = 0;
        }
    }
}

/// `N` environments stepped together with auto-reset. Output buffers are
/// allocated once and overwritten in place by every step.
pub struct VecEnv {
    envs: Vec<NavEnv>,
    base_seed: u64,
    episodes: Vec<u64>,
    dim: usize,
    pub observations: Vec<f64>,
    pub rewards: Vec<f64>,
    pub terminated: Vec<bool>,
    pub truncated: Vec<bool>,
    pub infos: Vec<Option<StepInfo>>,
}

impl VecEnv {
    pub fn new(config: NavEnvConfig, n: usize, base_seed: u64) -> Result<Self, HarnessError> {
        let proto = NavEnv::new(config)?;
        let dim = proto.observation_dim();
        let mut v = Self {
            envs: vec![proto; n],
            base_seed,
            episodes: vec![0; n],
            dim,
            observations: vec![0.0; n * dim],
            rewards: vec![0.0; n],
            terminated: vec![false; n],
            truncated: vec![false; n],
            infos: vec![None; n],
        };
        v.reset_all()?;
        Ok(v)
    }

    /// Seed of episode `k` in slot `i`.
    pub fn slot_seed(base_seed: u64, i: usize, k: u64) -> u64 {
        derive_seed(derive_seed(base_seed, "vec_env", i as u64), "reset", k)
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn envs(&self) -> &[NavEnv] {
        &self.envs
    }

    pub fn observation(&self, i: usize) -> &[f64] {
        &self.observations[i * self.dim..(i + 1) * self.dim]
    }

    pub fn reset_all(&mut self) -> Result<Vec<ResetInfo>, HarnessError> {
        let base = self.base_seed;
        let dim = self.dim;
        let infos = self
            .envs
            .par_iter_mut()
            .zip(self.observations.par_chunks_mut(dim))
            .zip(self.episodes.par_iter_mut())
            .enumerate()
            .map(|(i, ((env, obs), k))| {
                let info = env.reset_into(Self::slot_seed(base, i, *k), obs);
                *k += 1;
                info
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.rewards.fill(0.0);
        self.terminated.fill(false);
        self.truncated.fill(false);
        self.infos.fill(None);
        Ok(infos)
    }

    /// Steps every slot with its action. Slots that finish are reset at once:
    /// their observation row holds the new episode's first observation and
    /// their info carries the terminal one.
    pub fn step(&mut self, actions: &[Action]) -> Result<(), HarnessError> {
        assert_eq!(actions.len(), self.envs.len(), "one action per env");
        let base = self.base_seed;
        let dim = self.dim;
        let results = self
            .envs
            .par_iter_mut()
            .zip(self.observations.par_chunks_mut(dim))
            .zip(self.episodes.par_iter_mut())
            .zip(actions.par_iter())
            .enumerate()
            .map(|(i, (((env, obs), k), a))| -> Result<_, HarnessError> {
                let (r, term, trunc, mut info) = env.step_into(*a, obs)?;
                if term || trunc {
                    info.final_observation = Some(obs.to_vec());
                    info.reset = Some(env.reset_into(Self::slot_seed(base, i, *k), obs)?);
                    *k += 1;
                }
                Ok((r, term, trunc, info))
            })
            .collect::<Result<Vec<_>, _>>()?;
        for (i, (r, term, trunc, info)) in results.into_iter().enumerate() {
            self.rewards[i] = r;
            self.terminated[i] = term;
            self.truncated[i] = trunc;
            self.infos[i] = Some(info);
        }
        Ok(())
    }
}

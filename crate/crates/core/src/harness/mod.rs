//! Seeded corpus evaluation: build a corpus, run one episode per map, and
//! aggregate per-generator outcome rates.

mod bench;
mod controller;
mod env;
mod report;

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::carrot::CarrotConfig;
use crate::geometry::Pose;
use crate::mapgen::{corpus_map_seed, generate, GeneratorConfig, GeneratorKind, Map, MapError};
use crate::planner::{plan, PlanError, PlannedPath};
use crate::rng::{derive_seed, SeededRng};
use crate::sim::{hex, initial_heading, log::TrajectoryLog, Env, EpisodeConfig, LidarConfig, SimError, Status, World};
use crate::tasks::{
    compute_reward, min_scan_range, write_observation, ObservationContext, ObservationSpec, ProgressReference,
    RewardWeights, TaskError, Transition,
};

pub use bench::{bench_worlds, run_bench, BenchConfig, BenchResult};
pub use controller::{
    CarrotController, Controller, ControllerError, ExternalController, StepFeedback, StepView, PROTOCOL_VERSION,
};
pub use env::{NavEnv, NavEnvConfig, ReplanPolicy, ResetInfo, StepInfo, StepResult, VecEnv};
pub use report::{aggregate, strip_wall_time, GeneratorRow, OverallRow, Report, REPORT_SCHEMA_VERSION};

/// Episodes evaluated between two writes of the record stream.
pub const RECORD_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartGoalRule {
    /// Node 0 and the node with the longest planned path from it; ties go to
    /// the lowest index.
    Farthest,
    /// Two distinct nodes drawn from the map seed.
    SeededRandom,
    /// Goal equals start; smoke tests only.
    SameNode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ControllerSpec {
    Carrot(CarrotConfig),
    /// Out-of-process policy over TCP JSON lines; the harness listens on
    /// `listen` and serves a single client.
    External { listen: String, timeout_ms: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalProtocol {
    pub maps_per_generator: usize,
    pub corpus_seed: u64,
    pub generators: Vec<GeneratorConfig>,
    pub controller: ControllerSpec,
    pub episode: EpisodeConfig,
    pub start_goal: StartGoalRule,
    pub reward: RewardWeights,
    pub progress_reference: ProgressReference,
    pub lidar: LidarConfig,
    pub observation: ObservationSpec,
}

impl EvalProtocol {
    /// All four generators with default parameters and a Carrot controller.
    pub fn carrot(maps_per_generator: usize, corpus_seed: u64, speed_cap: f64) -> Self {
        Self {
            maps_per_generator,
            corpus_seed,
            generators: GeneratorKind::ALL.iter().map(|k| GeneratorConfig::default_for(*k)).collect(),
            controller: ControllerSpec::Carrot(CarrotConfig::with_cap(speed_cap)),
            episode: EpisodeConfig::default(),
            start_goal: StartGoalRule::Farthest,
            reward: RewardWeights::default(),
            progress_reference: ProgressReference::GoalDistance,
            lidar: LidarConfig::default(),
            observation: ObservationSpec::default(),
        }
    }

    pub fn check(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidProtocol(m));
        if self.generators.is_empty() {
            return bad("no generators".into());
        }
        for (i, g) in self.generators.iter().enumerate() {
            if self.generators[..i].iter().any(|h| h.kind() == g.kind()) {
                return bad(format!("generator {} listed twice", g.kind()));
            }
            g.check().map_err(|e| HarnessError::InvalidProtocol(e.to_string()))?;
        }
        if !(self.episode.dt > 0.0) || self.episode.max_steps == 0 {
            return bad("episode needs dt > 0 and max_steps >= 1".into());
        }
        if self.observation.lidar_dim != self.lidar.ray_count {
            return bad("observation lidar_dim must equal lidar ray_count".into());
        }
        if let ControllerSpec::Carrot(c) = &self.controller {
            c.check().map_err(|e| HarnessError::InvalidProtocol(e.to_string()))?;
        }
        if self.progress_reference == ProgressReference::PathLookahead && self.start_goal == StartGoalRule::SameNode {
            return bad("path lookahead reward needs distinct start and goal".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    #[error("{kind} map {index}: {source}")]
    GenerationFailed {
        kind: GeneratorKind,
        index: usize,
        #[source]
        source: MapError,
    },
    #[error("{kind} map {index}: no path between start and goal: {source}")]
    Plan {
        kind: GeneratorKind,
        index: usize,
        #[source]
        source: PlanError,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("step called before reset")]
    NotReset,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One map of the corpus with its episode endpoints and reference path.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub generator: GeneratorKind,
    pub index: usize,
    pub map_seed: u64,
    pub world: Arc<World>,
    pub start_node: usize,
    pub goal_node: usize,
    pub path: PlannedPath,
}

impl CorpusEntry {
    pub fn episode_seed(&self) -> u64 {
        episode_seed(self.map_seed, 0)
    }
}

/// Seed of the `k`-th episode on a map.
pub fn episode_seed(map_seed: u64, k: u64) -> u64 {
    derive_seed(map_seed, "episode", k)
}

/// Start node, goal node and reference path on `world` under `rule`.
pub fn choose_endpoints(world: &World, rule: StartGoalRule, seed: u64) -> Result<(usize, usize, PlannedPath), PlanError> {
    let nodes = &world.map.nodes;
    let grid = world.grid();
    match rule {
        StartGoalRule::Farthest => {
            let mut best: Option<(usize, PlannedPath)> = None;
            for j in 1..nodes.len() {
                let p = plan(grid, nodes[0], nodes[j])?;
                if best.as_ref().is_none_or(|(_, b)| p.length > b.length) {
                    best = Some((j, p));
                }
            }
            let (goal, path) = best.ok_or(PlanError::NoPath)?;
            Ok((0, goal, path))
        }
        StartGoalRule::SeededRandom => {
            let mut rng = SeededRng::derived(seed, "start_goal", 0);
            let n = nodes.len() as u64;
            let s = rng.below(n) as usize;
            let g = (s + 1 + rng.below(n - 1) as usize) % nodes.len();
            Ok((s, g, plan(grid, nodes[s], nodes[g])?))
        }
        StartGoalRule::SameNode => Ok((0, 0, plan(grid, nodes[0], nodes[0])?)),
    }
}

/// Generates and prepares every corpus map; output is in generator order,
/// then map index, independent of the thread count.
pub fn build_corpus(protocol: &EvalProtocol) -> Result<Vec<CorpusEntry>, HarnessError> {
    protocol.check()?;
    let jobs: Vec<(&GeneratorConfig, usize)> = protocol
        .generators
        .iter()
        .flat_map(|g| (0..protocol.maps_per_generator).map(move |i| (g, i)))
        .collect();
    jobs.par_iter()
        .map(|(cfg, index)| {
            let kind = cfg.kind();
            let index = *index;
            let map_seed = corpus_map_seed(protocol.corpus_seed, kind, index as u64);
            let map = generate(cfg, map_seed).map_err(|source| HarnessError::GenerationFailed { kind, index, source })?;
            let world = Arc::new(World::new(map));
            let (start_node, goal_node, path) = choose_endpoints(&world, protocol.start_goal, map_seed)
                .map_err(|source| HarnessError::Plan { kind, index, source })?;
            Ok(CorpusEntry {
                generator: kind,
                index,
                map_seed,
                world,
                start_node,
                goal_node,
                path,
            })
        })
        .collect()
}

/// Corpus over existing maps, kept in the given order. Each map's index
/// counts maps of the same generator before it.
pub fn corpus_from_maps(maps: Vec<Map>, rule: StartGoalRule) -> Result<Vec<CorpusEntry>, HarnessError> {
    let mut seen: Vec<GeneratorKind> = Vec::new();
    let jobs: Vec<(Map, usize)> = maps
        .into_iter()
        .map(|m| {
            let index = seen.iter().filter(|k| **k == m.generator).count();
            seen.push(m.generator);
            (m, index)
        })
        .collect();
    jobs.into_par_iter()
        .map(|(map, index)| {
            let kind = map.generator;
            let map_seed = map.seed;
            let world = Arc::new(World::new(map));
            let (start_node, goal_node, path) =
                choose_endpoints(&world, rule, map_seed).map_err(|source| HarnessError::Plan { kind, index, source })?;
            Ok(CorpusEntry {
                generator: kind,
                index,
                map_seed,
                world,
                start_node,
                goal_node,
                path,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Collision,
    Timeout,
    ControllerFailure,
}

impl From<Status> for Outcome {
    fn from(s: Status) -> Self {
        match s {
            Status::Success => Outcome::Success,
            Status::Collision => Outcome::Collision,
            Status::Timeout => Outcome::Timeout,
            Status::Running => Outcome::ControllerFailure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub generator: GeneratorKind,
    pub index: usize,
    pub map_seed: u64,
    pub start_node: usize,
    pub goal_node: usize,
    pub outcome: Outcome,
    pub steps: u32,
    pub wall_time_s: f64,
    pub traveled: f64,
    pub astar_length: f64,
    /// Traveled over planned length; successes only.
    pub path_ratio: Option<f64>,
    /// Simulated seconds to reach the goal; successes only.
    pub time_to_goal: Option<f64>,
    pub reward_sum: f64,
    pub trajectory_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Scratch buffers reused across the steps of an episode.
struct Buffers {
    scan: Vec<f64>,
    obs: Vec<f64>,
}

/// Starts an episode; unlike [`Env::reset`] this accepts `start == goal`.
pub fn start_env(world: Arc<World>, start: usize, goal: usize, config: EpisodeConfig, seed: u64) -> Env {
    if start == goal {
        let pose = Pose::new(world.map.nodes[start], initial_heading(seed));
        Env::from_pose(world, pose, start, goal, config)
    } else {
        Env::reset(world, start, goal, config, seed).expect("valid distinct nodes")
    }
}

/// Smallest LiDAR range after a step, computed only when it can matter.
/// Every ray is at least as long as the sensor's clearance, so the laser term
/// is zero whenever the clearance reaches the threshold.
pub fn laser_min_range(env: &Env, lidar: &LidarConfig, threshold: f64, scan: &mut [f64]) -> f64 {
    let sensor = lidar.sensor_pose(env.state().pose).position;
    let clearance = env.world.index.distance_to_point(sensor);
    if clearance >= threshold {
        return clearance;
    }
    env.scan_into(lidar, scan);
    min_scan_range(scan, lidar.max_range)
}

/// Runs one episode of `entry` with `controller`, optionally logging every step.
pub fn run_episode(
    protocol: &EvalProtocol,
    entry: &CorpusEntry,
    controller: &mut dyn Controller,
    mut log: Option<&mut dyn Write>,
) -> EpisodeRecord {
    let t0 = Instant::now();
    let seed = entry.episode_seed();
    let mut env = start_env(entry.world.clone(), entry.start_node, entry.goal_node, protocol.episode, seed);
    let spec = &protocol.observation;
    let mut buf = Buffers {
        scan: vec![0.0; protocol.lidar.ray_count],
        obs: vec![0.0; spec.dim()],
    };
    let wants_obs = controller.needs_observation();
    let mut reward_sum = 0.0;
    let mut failure = None;

    let mut logger = log.as_mut().map(|w| TrajectoryLog::start(w, &env, seed));
    let fill = |env: &Env, buf: &mut Buffers| {
        if wants_obs {
            fill_observation(protocol, entry, env, buf);
        }
    };
    fill(&env, &mut buf);
    if let Err(e) = controller.begin(entry, wants_obs.then_some(&buf.obs[..])) {
        failure = Some(e.to_string());
    }
    while failure.is_none() && !env.status().is_terminal() {
        let view = StepView {
            env: &env,
            path: &entry.path,
            observation: wants_obs.then_some(&buf.obs[..]),
        };
        let action = match controller.act(&view) {
            Ok(a) => a,
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        };
        let prev = *env.state();
        let status = env.step(action).expect("loop only steps running episodes");
        let min_range = if wants_obs {
            fill(&env, &mut buf);
            min_scan_range(&buf.scan, protocol.lidar.max_range)
        } else {
            laser_min_range(&env, &protocol.lidar, protocol.reward.laser_threshold, &mut buf.scan)
        };
        let t = Transition {
            prev: &prev,
            next: env.state(),
            command: env.state().prev_command,
            min_range,
            status,
            goal: env.goal,
            goal_radius: env.config.goal_radius,
        };
        let path = (protocol.progress_reference == ProgressReference::PathLookahead).then_some(&entry.path);
        let r = compute_reward(&t, &protocol.reward, protocol.progress_reference, path).expect("path supplied");
        reward_sum += r.total;
        if let Some(l) = logger.as_mut().and_then(|l| l.as_mut().ok()) {
            let _ = l.record(&env);
        }
        let fb = StepFeedback {
            observation: wants_obs.then_some(&buf.obs[..]),
            reward: &r,
            status,
        };
        if let Err(e) = controller.feedback(&fb) {
            failure = Some(e.to_string());
        }
    }
    if let Some(Ok(l)) = logger {
        let _ = l.finish();
    }

    let outcome = if failure.is_some() { Outcome::ControllerFailure } else { Outcome::from(env.status()) };
    let success = outcome == Outcome::Success;
    EpisodeRecord {
        generator: entry.generator,
        index: entry.index,
        map_seed: entry.map_seed,
        start_node: entry.start_node,
        goal_node: entry.goal_node,
        outcome,
        steps: env.step_index(),
        wall_time_s: t0.elapsed().as_secs_f64(),
        traveled: env.traveled(),
        astar_length: entry.path.length,
        path_ratio: (success && entry.path.length > 0.0).then(|| env.traveled() / entry.path.length),
        time_to_goal: success.then(|| env.elapsed()),
        reward_sum,
        trajectory_hash: hex(&env.trajectory_hash()),
        failure,
    }
}

/// Observation for external controllers; subgoals follow the corpus path.
fn fill_observation(protocol: &EvalProtocol, entry: &CorpusEntry, env: &Env, buf: &mut Buffers) {
    env.scan_into(&protocol.lidar, &mut buf.scan);
    let subgoals = protocol
        .observation
        .subgoals_enabled
        .then(|| crate::planner::resample_subgoals(&entry.path, env.state().pose.position));
    let ctx = ObservationContext {
        state: env.state(),
        goal: env.goal,
        goal_radius: env.config.goal_radius,
        world_diagonal: env.world.map.diagonal(),
        subgoals: subgoals.as_ref(),
    };
    write_observation(&protocol.observation, &buf.scan, &ctx, &mut buf.obs).expect("buffers sized from the spec");
}

/// Where and how to persist per-episode output.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory for per-episode trajectory logs; `None` disables them.
    pub trajectory_dir: Option<PathBuf>,
}

fn trajectory_path(dir: &Path, e: &CorpusEntry) -> PathBuf {
    dir.join(format!("{}_{:04}.jsonl", e.generator, e.index))
}

fn run_logged(
    protocol: &EvalProtocol,
    entry: &CorpusEntry,
    controller: &mut dyn Controller,
    opts: &RunOptions,
) -> Result<EpisodeRecord, HarnessError> {
    match &opts.trajectory_dir {
        None => Ok(run_episode(protocol, entry, controller, None)),
        Some(dir) => {
            let mut f = io::BufWriter::new(std::fs::File::create(trajectory_path(dir, entry))?);
            let rec = run_episode(protocol, entry, controller, Some(&mut f));
            f.flush()?;
            Ok(rec)
        }
    }
}

/// Runs every corpus entry and streams one JSON line per episode to
/// `records` in corpus order. Carrot episodes run on the current rayon pool;
/// an external controller is served sequentially over one connection.
pub fn run_eval(
    protocol: &EvalProtocol,
    corpus: &[CorpusEntry],
    records: &mut dyn Write,
    opts: &RunOptions,
) -> Result<Vec<EpisodeRecord>, HarnessError> {
    protocol.check()?;
    if let Some(dir) = &opts.trajectory_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = Vec::with_capacity(corpus.len());
    let mut emit = |chunk: Vec<EpisodeRecord>, out: &mut Vec<EpisodeRecord>| -> Result<(), HarnessError> {
        for r in chunk {
            writeln!(records, "{}", serde_json::to_string(&r).expect("record serializes"))?;
            out.push(r);
        }
        records.flush()?;
        Ok(())
    };
    match &protocol.controller {
        ControllerSpec::Carrot(cfg) => {
            for chunk in corpus.chunks(RECORD_CHUNK) {
                let recs = chunk
                    .par_iter()
                    .map(|e| run_logged(protocol, e, &mut CarrotController::new(*cfg), opts))
                    .collect::<Result<Vec<_>, _>>()?;
                emit(recs, &mut out)?;
            }
        }
        ControllerSpec::External { listen, timeout_ms } => {
            let mut ctl = match ExternalController::listen(listen, *timeout_ms, protocol) {
                Ok(c) => Some(c),
                Err(e) => {
                    let recs = corpus.iter().map(|entry| failed_record(entry, &e.to_string())).collect();
                    emit(recs, &mut out)?;
                    None
                }
            };
            if let Some(c) = ctl.as_mut() {
                for entry in corpus {
                    let rec = run_logged(protocol, entry, c, opts)?;
                    emit(vec![rec], &mut out)?;
                }
                c.close();
            }
        }
    }
    Ok(out)
}

fn failed_record(entry: &CorpusEntry, why: &str) -> EpisodeRecord {
    EpisodeRecord {
        generator: entry.generator,
        index: entry.index,
        map_seed: entry.map_seed,
        start_node: entry.start_node,
        goal_node: entry.goal_node,
        outcome: Outcome::ControllerFailure,
        steps: 0,
        wall_time_s: 0.0,
        traveled: 0.0,
        astar_length: entry.path.length,
        path_ratio: None,
        time_to_goal: None,
        reward_sum: 0.0,
        trajectory_hash: String::new(),
        failure: Some(why.to_string()),
    }
}

/// Process exit code for a finished evaluation.
pub fn exit_code(records: &[EpisodeRecord]) -> i32 {
    if records.iter().any(|r| r.outcome == Outcome::ControllerFailure) {
        3
    } else {
        0
    }
}


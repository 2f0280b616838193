//! Scripted batch stepping for throughput and determinism measurements.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{episode_seed, start_env, HarnessError};
use crate::mapgen::{generate, GeneratorConfig, GeneratorKind, KindParams, SparseParams};
use crate::rng::derive_seed;
use crate::sim::{hex, Action, Env, EpisodeConfig, LidarConfig, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub envs: usize,
    pub steps: u32,
    pub seed: u64,
    /// Distinct maps shared round-robin by the envs.
    pub maps: usize,
    pub lidar: LidarConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            envs: 1024,
            steps: 500,
            seed: 0,
            maps: 16,
            lidar: LidarConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub threads: usize,
    pub envs: usize,
    pub steps: u32,
    pub env_steps: u64,
    pub resets: u64,
    /// Placed obstacle shapes per map.
    pub mean_obstacles: f64,
    /// Segments and circles per map, boundary walls included.
    pub mean_primitives: f64,
    pub wall_time_s: f64,
    pub env_steps_per_s: f64,
    pub hash: String,
}

/// Dense sparse-generator maps: 20 m worlds with about 200 obstacles each.
pub fn bench_worlds(count: usize, seed: u64) -> Result<Vec<Arc<World>>, HarnessError> {
    let mut cfg = GeneratorConfig::default_for(GeneratorKind::Sparse);
    cfg.world_size_range = (20.0, 20.0);
    cfg.spacing_range = (0.5, 0.6);
    cfg.params = KindParams::Sparse(SparseParams {
        density_range: (0.5, 0.5),
        size_range: (0.1, 0.3),
        ..SparseParams::default()
    });
    (0..count)
        .into_par_iter()
        .map(|i| {
            let map = generate(&cfg, derive_seed(seed, "bench_map", i as u64)).map_err(|source| {
                HarnessError::GenerationFailed {
                    kind: GeneratorKind::Sparse,
                    index: i,
                    source,
                }
            })?;
            Ok(Arc::new(World::new(map)))
        })
        .collect()
}

/// Fixed action of slot `i` at step `t`.
pub fn scripted_action(i: usize, t: u32) -> Action {
    let (i, t) = (i as f64, t as f64);
    Action::new(
        1.0 + 0.8 * (0.05 * t + i).sin(),
        0.3 * (0.07 * t + 2.0 * i).sin(),
        0.8 * (0.03 * t + 0.5 * i).sin(),
    )
}

struct Slot {
    env: Env,
    world: Arc<World>,
    index: usize,
    episodes: u64,
    hasher: Sha256,
    scan: Vec<f64>,
}

impl Slot {
    fn start(world: Arc<World>, index: usize, episodes: u64, seed: u64) -> Env {
        let s = episode_seed(derive_seed(seed, "bench_slot", index as u64), episodes);
        let n = world.map.nodes.len();
        start_env(world, (episodes as usize) % n, (episodes as usize + 1) % n, EpisodeConfig::default(), s)
    }
}

/// Steps `config.envs` envs for `config.steps` steps with a LiDAR scan per
/// env step, on a pool of `threads` workers. Finished episodes restart on the
/// next node pair. The hash covers every trajectory and the last scans.
pub fn run_bench(worlds: &[Arc<World>], config: &BenchConfig, threads: usize) -> BenchResult {
    assert!(!worlds.is_empty() && config.envs >= 1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(|| {
        let mut slots: Vec<Slot> = (0..config.envs)
            .into_par_iter()
            .map(|i| {
                let world = worlds[i % worlds.len()].clone();
                Slot {
                    env: Slot::start(world.clone(), i, 0, config.seed),
                    world,
                    index: i,
                    episodes: 0,
                    hasher: Sha256::new(),
                    scan: vec![0.0; config.lidar.ray_count],
                }
            })
            .collect();
        let t0 = Instant::now();
        for t in 0..config.steps {
            slots.par_iter_mut().for_each(|s| {
                s.env.step(scripted_action(s.index, t)).expect("slot env running");
                s.env.scan_into(&config.lidar, &mut s.scan);
                if s.env.status().is_terminal() {
                    s.hasher.update(s.env.trajectory_hash());
                    s.episodes += 1;
                    s.env = Slot::start(s.world.clone(), s.index, s.episodes, config.seed);
                }
            });
        }
        let wall = t0.elapsed().as_secs_f64();
        let mut h = Sha256::new();
        for s in &slots {
            h.update(s.hasher.clone().finalize());
            h.update(s.env.trajectory_hash());
            for v in &s.scan {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        let env_steps = config.envs as u64 * config.steps as u64;
        let obstacles: f64 = worlds.iter().map(|w| w.map.param_f64("placed_obstacles").unwrap_or(0.0)).sum();
        let primitives: usize = worlds.iter().map(|w| w.index.obstacle_count()).sum();
        BenchResult {
            threads,
            envs: config.envs,
            steps: config.steps,
            env_steps,
            resets: slots.iter().map(|s| s.episodes).sum(),
            mean_obstacles: obstacles / worlds.len() as f64,
            mean_primitives: primitives as f64 / worlds.len() as f64,
            wall_time_s: wall,
            env_steps_per_s: env_steps as f64 / wall.max(1e-9),
            hash: hex(&h.finalize()),
        }
    })
}

//! JSON Lines trajectory logs: one header record, then one record per step.

use std::io::{self, Write};

use serde_json::{json, Value};

use super::{Env, EpisodeConfig, Status};
use crate::mapgen::round_sig9;

fn r3(v: [f64; 3]) -> [f64; 3] {
    v.map(round_sig9)
}

pub fn header_record(env: &Env, episode_seed: u64) -> Value {
    let map = &env.world.map;
    json!({
        "type": "header",
        "map_seed": map.seed,
        "generator": map.generator,
        "start_node": env.start_node,
        "goal_node": env.goal_node,
        "goal": [round_sig9(env.goal.x), round_sig9(env.goal.y)],
        "episode_seed": episode_seed,
        "episode": episode_json(&env.config),
    })
}

fn episode_json(c: &EpisodeConfig) -> Value {
    serde_json::to_value(c).expect("episode config serializes")
}

pub fn step_record(env: &Env) -> Value {
    let s = env.state();
    json!({
        "type": "step",
        "step": env.step_index(),
        "pose": r3([s.pose.position.x, s.pose.position.y, s.pose.heading]),
        "velocity": r3(s.velocity.to_array()),
        "command": r3(s.prev_command.to_array()),
        "status": env.status(),
    })
}

/// Streams records of one episode to a writer.
pub struct TrajectoryLog<W: Write> {
    out: W,
}

impl<W: Write> TrajectoryLog<W> {
    pub fn start(mut out: W, env: &Env, episode_seed: u64) -> io::Result<Self> {
        writeln!(out, "{}", header_record(env, episode_seed))?;
        Ok(Self { out })
    }

    pub fn record(&mut self, env: &Env) -> io::Result<()> {
        writeln!(self.out, "{}", step_record(env))
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Reads the final status back from a log.
pub fn final_status(log: &str) -> Option<Status> {
    let last = log.lines().rev().find(|l| !l.trim().is_empty())?;
    let v: Value = serde_json::from_str(last).ok()?;
    serde_json::from_value(v.get("status")?.clone()).ok()
}

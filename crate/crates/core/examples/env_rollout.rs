//! Gym-style stepping: one `NavEnv` driven by Carrot, then a `VecEnv` batch
//! with auto-reset.
//!
//! Usage: `cargo run --release --example env_rollout -- [generator] [batch]`

use lidarnav::carrot::{carrot_act, CarrotConfig};
use lidarnav::harness::{NavEnv, NavEnvConfig, VecEnv};
use lidarnav::mapgen::GeneratorKind;
use lidarnav::sim::Action;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let kind: GeneratorKind = args.first().map_or(GeneratorKind::Graph, |s| s.parse().expect("generator"));
    let batch: usize = args.get(1).map_or(16, |s| s.parse().expect("batch"));

    let config = NavEnvConfig::new(kind, true);
    let mut env = NavEnv::new(config.clone()).expect("env");
    let carrot = CarrotConfig::default();
    for seed in 0..3 {
        let (obs, info) = env.reset(seed).expect("reset");
        let mut ret = 0.0;
        let end = loop {
            let a = carrot_act(env.state().expect("reset"), env.reference_path(), &carrot).expect("carrot");
            let r = env.step(a).expect("step");
            ret += r.reward;
            if r.terminated || r.truncated {
                break r.info;
            }
        };
        println!(
            "seed {seed}: map {} nodes {}->{}, A* {:.2} m, obs dim {}, {:?} after {} steps, return {ret:.2}",
            info.map_seed,
            info.start_node,
            info.goal_node,
            info.astar_length,
            obs.len(),
            end.status,
            end.step
        );
    }

    let mut vec = VecEnv::new(config, batch, 11).expect("vec env");
    vec.reset_all().expect("reset");
    let mut finished = 0;
    let mut total = 0.0;
    for t in 0..200 {
        let actions: Vec<Action> = (0..batch)
            .map(|i| Action::new(0.8, 0.0, 0.6 * ((t + 7 * i) as f64 * 0.05).sin()))
            .collect();
        vec.step(&actions).expect("step");
        total += vec.rewards.iter().sum::<f64>();
        finished += vec.terminated.iter().zip(&vec.truncated).filter(|(a, b)| **a || **b).count();
    }
    println!(
        "vec env: {batch} slots x 200 steps, {finished} episodes finished, mean reward per step {:.4}",
        total / (batch * 200) as f64
    );
}

//! Batched stepping throughput with a 1200-ray scan per env step.
//!
//! Usage: `cargo run --release --example batch_bench -- [envs] [steps] [threads...]`

use lidarnav::harness::{bench_worlds, run_bench, BenchConfig};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let envs: usize = args.first().map_or(256, |s| s.parse().expect("envs"));
    let steps: u32 = args.get(1).map_or(100, |s| s.parse().expect("steps"));
    let threads: Vec<usize> = if args.len() > 2 {
        args[2..].iter().map(|s| s.parse().expect("threads")).collect()
    } else {
        vec![1, rayon::current_num_threads()]
    };
    let config = BenchConfig {
        envs,
        steps,
        ..BenchConfig::default()
    };
    let worlds = bench_worlds(config.maps, config.seed).expect("bench maps");
    let shapes: f64 = worlds
        .iter()
        .map(|w| w.map.param_f64("placed_obstacles").unwrap_or(0.0))
        .sum::<f64>()
        / worlds.len() as f64;
    println!("{} maps, {shapes:.0} obstacles per map", worlds.len());
    let mut first_hash = None;
    for t in threads {
        let r = run_bench(&worlds, &config, t);
        println!(
            "threads {:>2}: {:>9.0} env-steps/s  ({} env-steps in {:.2}s, {} resets)  hash {}",
            t,
            r.env_steps_per_s,
            r.env_steps,
            r.wall_time_s,
            r.resets,
            &r.hash[..16]
        );
        if let Some(h) = &first_hash {
            assert_eq!(h, &r.hash, "trajectory hash depends on the thread count");
        }
        first_hash.get_or_insert(r.hash);
    }
}

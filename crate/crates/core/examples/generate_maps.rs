//! Generates a few maps per generator and prints their statistics.
//!
//!     cargo run --release --example generate_maps -- [count] [seed]

use std::time::Instant;

use lidarnav::mapgen::{corpus_map_seed, generate, GeneratorConfig, GeneratorKind};

fn main() {
    let mut args = std::env::args().skip(1);
    let count: u64 = args.next().map_or(10, |s| s.parse().expect("count"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    for kind in GeneratorKind::ALL {
        let cfg = GeneratorConfig::default_for(kind);
        let t = Instant::now();
        let (mut retries, mut segments, mut circles) = (0, 0, 0);
        for i in 0..count {
            let map = generate(&cfg, corpus_map_seed(seed, kind, i)).expect("map generates");
            retries += map.param_f64("attempt").unwrap_or(0.0) as u64;
            segments += map.segments.len();
            circles += map.circles.len();
        }
        println!(
            "{kind:<7} maps {count:>4}  retries {retries:>4}  segments/map {:>7.1}  circles/map {:>5.1}  {:.2} s",
            segments as f64 / count as f64,
            circles as f64 / count as f64,
            t.elapsed().as_secs_f64()
        );
    }
}

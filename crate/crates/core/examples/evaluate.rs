//! Carrot evaluation over a seeded corpus at several speed caps.
//!
//! Usage: `cargo run --release --example evaluate -- [maps_per_gen] [seed] [cap...]`

use std::time::Instant;

use lidarnav::carrot::CarrotConfig;
use lidarnav::harness::{aggregate, build_corpus, run_eval, ControllerSpec, EvalProtocol, RunOptions};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let maps: usize = args.first().map_or(25, |s| s.parse().expect("maps_per_gen"));
    let seed: u64 = args.get(1).map_or(7, |s| s.parse().expect("seed"));
    let caps: Vec<f64> = if args.len() > 2 {
        args[2..].iter().map(|s| s.parse().expect("cap")).collect()
    } else {
        vec![1.0, 1.5, 2.0]
    };

    let mut protocol = EvalProtocol::carrot(maps, seed, caps[0]);
    let t0 = Instant::now();
    let corpus = build_corpus(&protocol).expect("corpus");
    println!("corpus: {} maps in {:.1}s", corpus.len(), t0.elapsed().as_secs_f64());

    for cap in caps {
        protocol.controller = ControllerSpec::Carrot(CarrotConfig::with_cap(cap));
        let t0 = Instant::now();
        let records = run_eval(&protocol, &corpus, &mut std::io::sink(), &RunOptions::default()).expect("eval");
        let report = aggregate(&records, Some(&protocol));
        println!("\ncap {cap} m/s ({:.1}s)", t0.elapsed().as_secs_f64());
        print!("{}", report.table());
    }
}

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use lidarnav::carrot::CarrotConfig;
use lidarnav::harness::{
    aggregate, bench_worlds, build_corpus, choose_endpoints, corpus_from_maps, exit_code, run_bench, run_eval,
    BenchConfig, ControllerSpec, EvalProtocol, HarnessError, RunOptions, StartGoalRule,
};
use lidarnav::mapgen::{
    check_map, corpus_map_seed, generate, GeneratorConfig, GeneratorKind, KindParams, Map, WfcPreset,
    MAP_FORMAT_VERSION,
};
use lidarnav::planner::{plan, planning_grid, rasterize, DEFAULT_RESOLUTION};
use lidarnav::sim::World;

/// Procedural navigation maps, A* planning, batched LiDAR simulation and
/// controller evaluation.
#[derive(Parser)]
#[command(name = "lidarnav", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Base seed (corpus seed for gen/eval, bench seed for bench).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads; bench accepts a comma-separated list such as 1,8.
    #[arg(long, global = true, env = "LIDARNAV_THREADS")]
    threads: Option<String>,
    /// JSON config: a generator config or manifest for gen, a protocol or
    /// report for eval. Explicit flags take precedence.
    #[arg(long, global = true)]
    config_file: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate maps plus a manifest.
    Gen(GenArgs),
    /// Check map files; exits nonzero and names every failing file.
    Validate(ValidateArgs),
    /// Evaluate a controller over a seeded corpus or a map directory.
    Eval(EvalArgs),
    /// Measure batched stepping throughput and cross-thread determinism.
    Bench(BenchArgs),
    /// Write occupancy and inflated grids as PGM plus a planned path.
    Export(ExportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Generator kind: sparse, maze, graph or wfc.
    #[arg(long)]
    generator: Option<GeneratorKind>,
    /// Number of maps.
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// WFC preset: obstacle, labyrinth, warehouse or cavern.
    #[arg(long)]
    preset: Option<WfcPreset>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Map files or directories of map files.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ControllerKind {
    Carrot,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Farthest,
    SeededRandom,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_enum)]
    controller: Option<ControllerKind>,
    /// Carrot forward speed cap in m/s.
    #[arg(long)]
    speed_cap: Option<f64>,
    /// Maps per generator when generating the corpus.
    #[arg(long)]
    maps_per_gen: Option<usize>,
    /// Comma-separated generator subset.
    #[arg(long, value_delimiter = ',')]
    generators: Option<Vec<GeneratorKind>>,
    /// Evaluate the maps in this directory instead of generating a corpus.
    #[arg(long)]
    maps: Option<PathBuf>,
    /// Address the external controller connects to.
    #[arg(long)]
    listen: Option<String>,
    /// Connect and read timeout for the external controller.
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[arg(long, value_enum)]
    start_goal: Option<RuleArg>,
    /// Also write one trajectory log per episode.
    #[arg(long)]
    trajectories: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 1024)]
    envs: usize,
    #[arg(long, default_value_t = 500)]
    steps: u32,
    /// Distinct maps shared by the envs.
    #[arg(long, default_value_t = 16)]
    maps: usize,
}

#[derive(Args)]
struct ExportArgs {
    /// Map JSON file.
    #[arg(long)]
    map: PathBuf,
    /// Start node of the exported path (default: node 0).
    #[arg(long)]
    from: Option<usize>,
    /// Goal node of the exported path (default: farthest from the start).
    #[arg(long)]
    to: Option<usize>,
}

type CliResult = Result<ExitCode, String>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match parse_threads(cli.common.threads.as_deref()) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if !matches!(cli.cmd, Cmd::Bench(_)) {
        if let Some(n) = threads.first() {
            rayon::ThreadPoolBuilder::new().num_threads(*n).build_global().expect("global pool set once");
        }
    }
    let result = match &cli.cmd {
        Cmd::Gen(a) => cmd_gen(&cli.common, a),
        Cmd::Validate(a) => cmd_validate(a),
        Cmd::Eval(a) => cmd_eval(&cli.common, a),
        Cmd::Bench(a) => cmd_bench(&cli.common, a, &threads),
        Cmd::Export(a) => cmd_export(&cli.common, a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(1)
    })
}

fn parse_threads(s: Option<&str>) -> Result<Vec<usize>, String> {
    let Some(s) = s else { return Ok(Vec::new()) };
    s.split(',')
        .map(|t| match t.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(format!("invalid thread count '{t}'")),
        })
        .collect()
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// The value under `key` if present, else the whole document.
fn unwrap_key(v: Value, key: &str) -> Value {
    match v {
        Value::Object(mut m) if m.contains_key(key) => m.remove(key).expect("checked"),
        other => other,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))
}

fn create_dir(dir: &Path) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))
}

fn cmd_gen(common: &Common, a: &GenArgs) -> CliResult {
    let mut config: GeneratorConfig = match &common.config_file {
        Some(p) => serde_json::from_value(unwrap_key(read_json(p)?, "config")).map_err(|e| format!("{}: {e}", p.display()))?,
        None => GeneratorConfig::default_for(a.generator.ok_or("--generator is required without --config-file")?),
    };
    if let Some(kind) = a.generator {
        if kind != config.kind() {
            config = GeneratorConfig::default_for(kind);
        }
    }
    if let Some(p) = a.preset {
        match &mut config.params {
            KindParams::Wfc(w) => w.preset = Some(p),
            _ => return Err("--preset applies to the wfc generator only".into()),
        }
    }
    config.check().map_err(|e| e.to_string())?;
    let seed = common.seed.unwrap_or(0);
    let kind = config.kind();
    let out = common.out_dir.clone().unwrap_or_else(|| PathBuf::from("maps"));
    create_dir(&out)?;

    let maps: Vec<Result<Map, String>> = (0..a.count)
        .into_par_iter()
        .map(|i| {
            let s = corpus_map_seed(seed, kind, i as u64);
            generate(&config, s).map_err(|e| format!("{kind} map {i} (seed {s}): {e}"))
        })
        .collect();
    let mut entries = Vec::new();
    for (i, m) in maps.into_iter().enumerate() {
        let map = match m {
            Ok(m) => m,
            Err(e) => {
                eprintln!("generation failed: {e}");
                return Ok(ExitCode::from(2));
            }
        };
        let file = format!("{}_{}_{}.json", kind, i, map.seed);
        write_file(&out.join(&file), &map.to_json())?;
        entries.push(json!({ "index": i, "seed": map.seed, "file": file }));
    }
    let manifest = json!({
        "crate_version": env!("CARGO_PKG_VERSION"),
        "map_format_version": MAP_FORMAT_VERSION,
        "generator": kind,
        "corpus_seed": seed,
        "count": a.count,
        "config": config,
        "maps": entries,
    });
    write_file(&out.join("manifest.json"), &serde_json::to_string_pretty(&manifest).expect("json"))?;
    println!("wrote {} {kind} maps to {}", a.count, out.display());
    Ok(ExitCode::SUCCESS)
}

fn map_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, String> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| format!("{}: {e}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json") && f.file_name().is_some_and(|n| n != "manifest.json"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn load_map(path: &Path) -> Result<Map, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    Map::from_json(&text).map_err(|e| e.to_string())
}

fn cmd_validate(a: &ValidateArgs) -> CliResult {
    let files = map_files(&a.paths)?;
    let results: Vec<Result<(), String>> = files
        .par_iter()
        .map(|f| {
            let map = load_map(f)?;
            let r = map.param_f64("node_radius").unwrap_or(0.25);
            check_map(&map, r).map_err(|e| e.to_string())
        })
        .collect();
    let mut failed = 0;
    for (f, r) in files.iter().zip(&results) {
        match r {
            Ok(()) => println!("ok    {}", f.display()),
            Err(e) => {
                failed += 1;
                println!("FAIL  {}: {e}", f.display());
            }
        }
    }
    println!("{} maps, {failed} failed", files.len());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn eval_protocol(common: &Common, a: &EvalArgs) -> Result<EvalProtocol, String> {
    let mut p = match &common.config_file {
        Some(path) => serde_json::from_value(unwrap_key(read_json(path)?, "config"))
            .map_err(|e| format!("{}: {e}", path.display()))?,
        None => EvalProtocol::carrot(100, 0, 1.0),
    };
    if let Some(s) = common.seed {
        p.corpus_seed = s;
    }
    if let Some(n) = a.maps_per_gen {
        p.maps_per_generator = n;
    }
    if let Some(kinds) = &a.generators {
        p.generators = kinds
            .iter()
            .map(|k| p.generators.iter().find(|g| g.kind() == *k).cloned().unwrap_or_else(|| GeneratorConfig::default_for(*k)))
            .collect();
    }
    if let Some(r) = a.start_goal {
        p.start_goal = match r {
            RuleArg::Farthest => StartGoalRule::Farthest,
            RuleArg::SeededRandom => StartGoalRule::SeededRandom,
        };
    }
    let kind = a.controller.unwrap_or(match p.controller {
        ControllerSpec::Carrot(_) => ControllerKind::Carrot,
        ControllerSpec::External { .. } => ControllerKind::External,
    });
    p.controller = match (kind, &p.controller) {
        (ControllerKind::Carrot, ControllerSpec::Carrot(c)) => {
            ControllerSpec::Carrot(CarrotConfig { speed_cap: a.speed_cap.unwrap_or(c.speed_cap), ..*c })
        }
        (ControllerKind::Carrot, _) => ControllerSpec::Carrot(CarrotConfig::with_cap(a.speed_cap.unwrap_or(1.0))),
        (ControllerKind::External, prev) => {
            let (l, t) = match prev {
                ControllerSpec::External { listen, timeout_ms } => (listen.clone(), *timeout_ms),
                _ => ("127.0.0.1:7878".to_string(), 30_000),
            };
            ControllerSpec::External {
                listen: a.listen.clone().unwrap_or(l),
                timeout_ms: a.timeout_ms.unwrap_or(t),
            }
        }
    };
    p.check().map_err(|e| e.to_string())?;
    Ok(p)
}

fn cmd_eval(common: &Common, a: &EvalArgs) -> CliResult {
    let protocol = eval_protocol(common, a)?;
    let corpus = match &a.maps {
        Some(dir) => {
            let maps = map_files(std::slice::from_ref(dir))?
                .iter()
                .map(|f| load_map(f).map_err(|e| format!("{}: {e}", f.display())))
                .collect::<Result<Vec<_>, _>>()?;
            corpus_from_maps(maps, protocol.start_goal)
        }
        None => build_corpus(&protocol),
    };
    let corpus = match corpus {
        Ok(c) => c,
        Err(e @ (HarnessError::GenerationFailed { .. } | HarnessError::Plan { .. })) => {
            eprintln!("corpus failed: {e}");
            return Ok(ExitCode::from(2));
        }
        Err(e) => return Err(e.to_string()),
    };
    let out = common.out_dir.clone().unwrap_or_else(|| PathBuf::from("eval_out"));
    create_dir(&out)?;
    let episodes = out.join("episodes.jsonl");
    let mut sink = BufWriter::new(fs::File::create(&episodes).map_err(|e| format!("{}: {e}", episodes.display()))?);
    let opts = RunOptions {
        trajectory_dir: a.trajectories.then(|| out.join("trajectories")),
    };
    let records = run_eval(&protocol, &corpus, &mut sink, &opts).map_err(|e| e.to_string())?;
    sink.flush().map_err(|e| e.to_string())?;
    let report = aggregate(&records, Some(&protocol));
    write_file(&out.join("report.json"), &report.to_json())?;
    print!("{}", report.table());
    let failures = report.overall.controller_failures;
    if failures > 0 {
        eprintln!("{failures} episodes ended in controller failure");
    }
    Ok(ExitCode::from(exit_code(&records) as u8))
}

fn cmd_bench(common: &Common, a: &BenchArgs, threads: &[usize]) -> CliResult {
    if a.envs == 0 || a.maps == 0 {
        return Err("--envs and --maps must be at least 1".into());
    }
    let config = BenchConfig {
        envs: a.envs,
        steps: a.steps,
        seed: common.seed.unwrap_or(0),
        maps: a.maps,
        ..BenchConfig::default()
    };
    let counts = if threads.is_empty() { vec![1, rayon::current_num_threads()] } else { threads.to_vec() };
    let worlds = bench_worlds(config.maps, config.seed).map_err(|e| e.to_string())?;
    let mut results = Vec::new();
    for t in counts {
        let r = run_bench(&worlds, &config, t);
        println!(
            "threads {:>3}: {:>10.0} env-steps/s  ({} env-steps in {:.2}s)  hash {}",
            t, r.env_steps_per_s, r.env_steps, r.wall_time_s, r.hash
        );
        results.push(r);
    }
    let deterministic = results.windows(2).all(|w| w[0].hash == w[1].hash);
    if let (Some(first), Some(last)) = (results.first(), results.last()) {
        if results.len() > 1 {
            println!(
                "speedup {} vs {} threads: {:.2}x",
                last.threads,
                first.threads,
                last.env_steps_per_s / first.env_steps_per_s
            );
        }
    }
    if let Some(out) = &common.out_dir {
        create_dir(out)?;
        let doc = json!({ "config": config, "runs": results, "deterministic": deterministic });
        write_file(&out.join("bench.json"), &serde_json::to_string_pretty(&doc).expect("json"))?;
    }
    if !deterministic {
        eprintln!("trajectory hash differs between thread counts");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_export(common: &Common, a: &ExportArgs) -> CliResult {
    let map = load_map(&a.map).map_err(|e| format!("{}: {e}", a.map.display()))?;
    let out = common.out_dir.clone().unwrap_or_else(|| PathBuf::from("export"));
    create_dir(&out)?;
    let occupancy = rasterize(&map, DEFAULT_RESOLUTION);
    let inflated = planning_grid(&map);
    let pgm = |name: &str, g: &lidarnav::planner::OccupancyGrid| -> Result<(), String> {
        let path = out.join(name);
        let mut f = BufWriter::new(fs::File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?);
        g.write_pgm(&mut f).and_then(|_| f.flush()).map_err(|e| e.to_string())
    };
    pgm("occupancy.pgm", &occupancy)?;
    pgm("inflated.pgm", &inflated.grid)?;

    let n = map.nodes.len();
    let seed = map.seed;
    let world = World::new(map);
    let (from, to, path) = match (a.from, a.to) {
        (None, None) => choose_endpoints(&world, StartGoalRule::Farthest, seed).map_err(|e| e.to_string())?,
        (f, t) => {
            let (f, t) = (f.unwrap_or(0), t.unwrap_or(if f == Some(0) || f.is_none() { 1 } else { 0 }));
            if f >= n || t >= n {
                return Err(format!("node index out of range for a map with {n} nodes"));
            }
            let p = plan(world.grid(), world.map.nodes[f], world.map.nodes[t]).map_err(|e| e.to_string())?;
            (f, t, p)
        }
    };
    let pts: Vec<[f64; 2]> = path.waypoints.iter().map(|p| [p.x, p.y]).collect();
    let doc = json!({
        "from": from,
        "to": to,
        "length": path.length,
        "resolution": DEFAULT_RESOLUTION,
        "grid": [occupancy.width, occupancy.height],
        "waypoints": pts,
    });
    write_file(&out.join("path.json"), &serde_json::to_string_pretty(&doc).expect("json"))?;
    println!(
        "wrote {}x{} grids and a {:.2} m path ({from} -> {to}) to {}",
        occupancy.width,
        occupancy.height,
        path.length,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

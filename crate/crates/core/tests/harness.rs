use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::Duration;

use lidarnav::geometry::{normalize_angle, Segment, Vec2};
use lidarnav::harness::{
    aggregate, build_corpus, corpus_from_maps, exit_code, run_episode, run_eval, strip_wall_time, Controller,
    ControllerError, ControllerSpec, EpisodeRecord, EvalProtocol, Outcome, RunOptions, StartGoalRule,
    StepView,
};
use lidarnav::mapgen::{GeneratorConfig, GeneratorKind, Map};
use lidarnav::sim::log::final_status;
use lidarnav::sim::Action;
use serde_json::Value;

fn small_protocol(maps: usize, seed: u64, cap: f64) -> EvalProtocol {
    EvalProtocol::carrot(maps, seed, cap)
}

/// Turns toward the goal, then drives straight at it.
struct Beeline;

impl Controller for Beeline {
    fn act(&mut self, view: &StepView) -> Result<Action, ControllerError> {
        let s = view.env.state();
        let to_goal = view.env.goal - s.pose.position;
        let e = normalize_angle(to_goal.angle() - s.pose.heading);
        let vx = if e.abs() < 0.2 { 1.0 } else { 0.0 };
        Ok(Action::new(vx, 0.0, (2.0 * e).clamp(-2.0, 2.0)))
    }
}

/// Fixed command every step.
struct Constant(Action);

impl Controller for Constant {
    fn act(&mut self, _: &StepView) -> Result<Action, ControllerError> {
        Ok(self.0)
    }
}

#[test]
fn same_node_episodes_succeed_immediately() {
    let mut p = small_protocol(3, 1, 1.0);
    p.start_goal = StartGoalRule::SameNode;
    let corpus = build_corpus(&p).unwrap();
    let recs = run_eval(&p, &corpus, &mut Vec::new(), &RunOptions::default()).unwrap();
    assert_eq!(recs.len(), 12);
    for r in &recs {
        assert_eq!(r.outcome, Outcome::Success);
        assert!(r.steps <= 1);
    }
    let report = aggregate(&recs, Some(&p));
    assert_eq!(report.overall.success_pct, 100.0);
}

fn three_outcome_maps() -> Vec<Map> {
    // open: 3 m straight run
    let open = Map::empty(10.0, vec![Vec2::new(2.0, 5.0), Vec2::new(5.0, 5.0)]);
    // a wall between the nodes with a gap at the top: the beeline hits it
    let mut wall = Map::empty(10.0, vec![Vec2::new(2.0, 5.0), Vec2::new(6.0, 5.0)]);
    wall.segments.push(Segment::new(Vec2::new(4.0, 0.0), Vec2::new(4.0, 8.0)));
    // 8 m away: more than 60 steps at 1 m/s
    let far = Map::empty(10.0, vec![Vec2::new(1.0, 5.0), Vec2::new(9.0, 5.0)]);
    let mut maps = vec![open, wall, far];
    for (i, m) in maps.iter_mut().enumerate() {
        m.seed = i as u64;
    }
    maps
}

#[test]
fn forced_outcomes_split_evenly() {
    let corpus = corpus_from_maps(three_outcome_maps(), StartGoalRule::Farthest).unwrap();
    let mut p = small_protocol(1, 0, 1.0);
    p.episode.max_steps = 60;
    let recs: Vec<EpisodeRecord> = corpus.iter().map(|e| run_episode(&p, e, &mut Beeline, None)).collect();
    let outcomes: Vec<Outcome> = recs.iter().map(|r| r.outcome).collect();
    assert_eq!(outcomes, [Outcome::Success, Outcome::Collision, Outcome::Timeout]);
    assert_eq!(recs[2].steps, 60);
    let report = aggregate(&recs, None);
    let row = report.row(GeneratorKind::Sparse).unwrap();
    let third = 100.0 / 3.0;
    for v in [row.success_pct, row.collision_pct, row.timeout_pct] {
        assert!((v - third).abs() < 1e-9);
    }
    assert_eq!(row.mean_time_to_goal, recs[0].time_to_goal);
    assert!(recs[1].path_ratio.is_none() && recs[1].time_to_goal.is_none());
    // the reference path detours over the wall
    assert!(corpus[1].path.length > 4.0 + 2.0);
}

fn record(kind: GeneratorKind, outcome: Outcome, traveled: f64, astar: f64, ttg: Option<f64>) -> EpisodeRecord {
    let success = outcome == Outcome::Success;
    EpisodeRecord {
        generator: kind,
        index: 0,
        map_seed: 0,
        start_node: 0,
        goal_node: 1,
        outcome,
        steps: 10,
        wall_time_s: 0.5,
        traveled,
        astar_length: astar,
        path_ratio: success.then(|| traveled / astar),
        time_to_goal: ttg,
        reward_sum: 1.0,
        trajectory_hash: String::new(),
        failure: None,
    }
}

#[test]
fn aggregate_arithmetic() {
    let recs = vec![
        record(GeneratorKind::Maze, Outcome::Success, 5.1, 5.0, Some(4.0)),
        record(GeneratorKind::Maze, Outcome::Collision, 1.0, 5.0, None),
        record(GeneratorKind::Maze, Outcome::ControllerFailure, 0.0, 5.0, None),
        record(GeneratorKind::Wfc, Outcome::Timeout, 3.0, 9.0, None),
        record(GeneratorKind::Wfc, Outcome::Timeout, 3.0, 9.0, None),
    ];
    let r = aggregate(&recs, None);
    let maze = r.row(GeneratorKind::Maze).unwrap();
    assert_eq!((maze.episodes, maze.controller_failures), (3, 1));
    assert_eq!((maze.success_pct, maze.collision_pct, maze.timeout_pct), (50.0, 50.0, 0.0));
    assert!((maze.mean_path_ratio.unwrap() - 1.02).abs() < 1e-12);
    assert_eq!(maze.mean_time_to_goal, Some(4.0));
    let wfc = r.row(GeneratorKind::Wfc).unwrap();
    assert_eq!(wfc.timeout_pct, 100.0);
    assert_eq!(wfc.mean_time_to_goal, None);
    assert_eq!(wfc.mean_path_ratio, None);
    // overall rates are the mean of the rows
    assert_eq!(r.overall.success_pct, 25.0);
    assert_eq!(r.overall.timeout_pct, 50.0);
    assert_eq!(r.overall.controller_failures, 1);
    let json: Value = serde_json::from_str(&r.to_json()).unwrap();
    assert!(json["generators"][1]["mean_time_to_goal"].is_null());
    assert!(r.table().lines().count() == 4);
}

#[test]
fn report_recomputes_from_the_jsonl_records() {
    let p = small_protocol(4, 2, 1.5);
    let corpus = build_corpus(&p).unwrap();
    let mut out = Vec::new();
    let recs = run_eval(&p, &corpus, &mut out, &RunOptions::default()).unwrap();
    let report = aggregate(&recs, Some(&p));
    let lines: Vec<Value> = String::from_utf8(out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 16);
    for kind in GeneratorKind::ALL {
        let rows: Vec<&Value> = lines.iter().filter(|v| v["generator"] == kind.name()).collect();
        assert_eq!(rows.len(), 4);
        let n = rows.len() as f64;
        let pct = |o: &str| 100.0 * rows.iter().filter(|v| v["outcome"] == o).count() as f64 / n;
        let row = report.row(kind).unwrap();
        assert!((row.success_pct - pct("success")).abs() < 1e-9);
        assert!((row.collision_pct - pct("collision")).abs() < 1e-9);
        assert!((row.timeout_pct - pct("timeout")).abs() < 1e-9);
        let ratios: Vec<f64> = rows
            .iter()
            .filter(|v| v["outcome"] == "success")
            .map(|v| v["traveled"].as_f64().unwrap() / v["astar_length"].as_f64().unwrap())
            .collect();
        match row.mean_path_ratio {
            Some(m) => assert!((m - ratios.iter().sum::<f64>() / ratios.len() as f64).abs() < 1e-9),
            None => assert!(ratios.is_empty()),
        }
    }
}

#[test]
fn eval_output_is_independent_of_thread_count() {
    let p = small_protocol(3, 5, 1.0);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let corpus = build_corpus(&p).unwrap();
            let mut out = Vec::new();
            let recs = run_eval(&p, &corpus, &mut out, &RunOptions::default()).unwrap();
            let mut report: Value = serde_json::from_str(&aggregate(&recs, Some(&p)).to_json()).unwrap();
            strip_wall_time(&mut report);
            let mut lines = Vec::new();
            for l in String::from_utf8(out).unwrap().lines() {
                let mut v: Value = serde_json::from_str(l).unwrap();
                strip_wall_time(&mut v);
                lines.push(v.to_string());
            }
            (report.to_string(), lines)
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn trajectory_logs_are_written_per_episode() {
    let dir = tempfile::tempdir().unwrap();
    let p = small_protocol(1, 3, 1.0);
    let corpus = build_corpus(&p).unwrap();
    let opts = RunOptions {
        trajectory_dir: Some(dir.path().to_path_buf()),
    };
    let recs = run_eval(&p, &corpus, &mut Vec::new(), &opts).unwrap();
    for r in &recs {
        let path = dir.path().join(format!("{}_{:04}.jsonl", r.generator, r.index));
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().count() as u32, r.steps + 1);
        let status = final_status(&text).unwrap();
        assert_eq!(Outcome::from(status), r.outcome);
    }
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn connect(port: u16) -> TcpStream {
    for _ in 0..400 {
        if let Ok(s) = TcpStream::connect(("127.0.0.1", port)) {
            return s;
        }
        thread::sleep(Duration::from_millis(10));
    }
    panic!("harness never listened");
}

/// Minimal client: answers every observation with `action`; returns the
/// message types it saw.
fn scripted_client(port: u16, action: [f64; 3], garbage: bool) -> thread::JoinHandle<Vec<String>> {
    thread::spawn(move || {
        let stream = connect(port);
        let mut w = stream.try_clone().unwrap();
        let mut seen = Vec::new();
        for line in BufReader::new(stream).lines() {
            let Ok(line) = line else { break };
            let v: Value = serde_json::from_str(&line).unwrap();
            let ty = v["type"].as_str().unwrap().to_string();
            seen.push(ty.clone());
            let wants_action = match ty.as_str() {
                "hello" => {
                    assert_eq!(v["observation_spec"]["lidar_dim"], 1200);
                    assert_eq!(v["layout"].as_array().unwrap().len(), 5);
                    false
                }
                "reset" => {
                    assert_eq!(v["observation"].as_array().unwrap().len(), 1209);
                    true
                }
                "step" => !(v["terminated"].as_bool().unwrap() || v["truncated"].as_bool().unwrap()),
                "close" => break,
                other => panic!("unexpected {other}"),
            };
            if wants_action {
                let msg = if garbage {
                    "not json at all\n".to_string()
                } else {
                    format!("{}\n", serde_json::json!({"type": "action", "action": action}))
                };
                if w.write_all(msg.as_bytes()).is_err() {
                    break;
                }
            }
        }
        seen
    })
}

fn external_protocol(port: u16, timeout_ms: u64) -> EvalProtocol {
    let mut p = small_protocol(1, 4, 1.0);
    p.generators = vec![GeneratorConfig::default_for(GeneratorKind::Sparse), GeneratorConfig::default_for(GeneratorKind::Maze)];
    p.maps_per_generator = 2;
    p.episode.max_steps = 40;
    p.controller = ControllerSpec::External {
        listen: format!("127.0.0.1:{port}"),
        timeout_ms,
    };
    p
}

#[test]
fn external_controller_round_trip_matches_in_process_replay() {
    let port = free_port();
    let p = external_protocol(port, 5000);
    let corpus = build_corpus(&p).unwrap();
    let action = [0.4, 0.1, 0.3];
    let client = scripted_client(port, action, false);
    let recs = run_eval(&p, &corpus, &mut Vec::new(), &RunOptions::default()).unwrap();
    let seen = client.join().unwrap();
    assert_eq!(seen.first().map(String::as_str), Some("hello"));
    assert_eq!(seen.last().map(String::as_str), Some("close"));
    assert_eq!(seen.iter().filter(|s| *s == "reset").count(), corpus.len());
    assert_eq!(exit_code(&recs), 0);
    for (r, e) in recs.iter().zip(&corpus) {
        let local = run_episode(&p, e, &mut Constant(Action::from_array(action)), None);
        assert_ne!(r.outcome, Outcome::ControllerFailure);
        assert_eq!(r.trajectory_hash, local.trajectory_hash);
        assert_eq!(r.reward_sum, local.reward_sum);
        assert_eq!(r.outcome, local.outcome);
    }
}

#[test]
fn garbage_from_the_client_is_a_controller_failure() {
    let port = free_port();
    let p = external_protocol(port, 5000);
    let corpus = build_corpus(&p).unwrap();
    let client = scripted_client(port, [0.0; 3], true);
    let recs = run_eval(&p, &corpus, &mut Vec::new(), &RunOptions::default()).unwrap();
    client.join().unwrap();
    assert!(recs.iter().all(|r| r.outcome == Outcome::ControllerFailure && r.failure.is_some()));
    assert_eq!(exit_code(&recs), 3);
    let report = aggregate(&recs, Some(&p));
    assert_eq!(report.overall.controller_failures, recs.len());
}

#[test]
fn missing_client_fails_every_episode() {
    let p = external_protocol(free_port(), 50);
    let corpus = build_corpus(&p).unwrap();
    let mut out = Vec::new();
    let recs = run_eval(&p, &corpus, &mut out, &RunOptions::default()).unwrap();
    assert_eq!(recs.len(), corpus.len());
    assert!(recs.iter().all(|r| r.outcome == Outcome::ControllerFailure));
    assert_eq!(String::from_utf8(out).unwrap().lines().count(), corpus.len());
    assert_eq!(exit_code(&recs), 3);
}

#[test]
fn invalid_protocols_are_rejected() {
    let mut p = small_protocol(1, 0, 1.0);
    p.generators.push(GeneratorConfig::default_for(GeneratorKind::Maze));
    assert!(p.check().is_err());
    let mut p = small_protocol(1, 0, 1.0);
    p.observation.lidar_dim = 10;
    assert!(p.check().is_err());
    let mut p = small_protocol(1, 0, 1.0);
    p.start_goal = StartGoalRule::SameNode;
    p.progress_reference = lidarnav::tasks::ProgressReference::PathLookahead;
    assert!(p.check().is_err());
    let json = serde_json::to_string(&small_protocol(2, 9, 1.5)).unwrap();
    let back: EvalProtocol = serde_json::from_str(&json).unwrap();
    assert_eq!(back, small_protocol(2, 9, 1.5));
}

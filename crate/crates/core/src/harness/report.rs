use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{EpisodeRecord, EvalProtocol, Outcome};
use crate::mapgen::{GeneratorKind, MAP_FORMAT_VERSION};
use crate::tasks::OBSERVATION_SPEC_VERSION;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Outcome rates of one generator. Rates are percentages of the episodes
/// that did not end in a controller failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRow {
    pub generator: GeneratorKind,
    pub episodes: usize,
    pub controller_failures: usize,
    pub success_pct: f64,
    pub collision_pct: f64,
    pub timeout_pct: f64,
    pub mean_time_to_goal: Option<f64>,
    pub mean_path_ratio: Option<f64>,
    pub mean_reward: Option<f64>,
}

/// Rates averaged over generator rows; time and ratio pooled over all
/// successes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallRow {
    pub episodes: usize,
    pub controller_failures: usize,
    pub success_pct: f64,
    pub collision_pct: f64,
    pub timeout_pct: f64,
    pub mean_time_to_goal: Option<f64>,
    pub mean_path_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub crate_version: String,
    pub map_format_version: u32,
    pub observation_spec_version: u32,
    pub config: Option<EvalProtocol>,
    pub generators: Vec<GeneratorRow>,
    pub overall: OverallRow,
    pub wall_time_s: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn pct(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * k as f64 / n as f64
    }
}

fn row(generator: GeneratorKind, recs: &[&EpisodeRecord]) -> GeneratorRow {
    let count = |o| recs.iter().filter(|r| r.outcome == o).count();
    let failures = count(Outcome::ControllerFailure);
    let rated = recs.len() - failures;
    let successes = || recs.iter().filter(|r| r.outcome == Outcome::Success);
    GeneratorRow {
        generator,
        episodes: recs.len(),
        controller_failures: failures,
        success_pct: pct(count(Outcome::Success), rated),
        collision_pct: pct(count(Outcome::Collision), rated),
        timeout_pct: pct(count(Outcome::Timeout), rated),
        mean_time_to_goal: mean(successes().filter_map(|r| r.time_to_goal)),
        mean_path_ratio: mean(successes().filter_map(|r| r.path_ratio)),
        mean_reward: mean(recs.iter().filter(|r| r.outcome != Outcome::ControllerFailure).map(|r| r.reward_sum)),
    }
}

/// Builds the report from episode records. Generator rows follow the order in
/// which generators first appear in `records`.
pub fn aggregate(records: &[EpisodeRecord], config: Option<&EvalProtocol>) -> Report {
    let mut kinds: Vec<GeneratorKind> = Vec::new();
    for r in records {
        if !kinds.contains(&r.generator) {
            kinds.push(r.generator);
        }
    }
    let generators: Vec<GeneratorRow> = kinds
        .iter()
        .map(|k| {
            let recs: Vec<&EpisodeRecord> = records.iter().filter(|r| r.generator == *k).collect();
            row(*k, &recs)
        })
        .collect();
    let rows_mean = |f: fn(&GeneratorRow) -> f64| mean(generators.iter().map(f)).unwrap_or(0.0);
    let successes = || records.iter().filter(|r| r.outcome == Outcome::Success);
    let overall = OverallRow {
        episodes: records.len(),
        controller_failures: generators.iter().map(|g| g.controller_failures).sum(),
        success_pct: rows_mean(|g| g.success_pct),
        collision_pct: rows_mean(|g| g.collision_pct),
        timeout_pct: rows_mean(|g| g.timeout_pct),
        mean_time_to_goal: mean(successes().filter_map(|r| r.time_to_goal)),
        mean_path_ratio: mean(successes().filter_map(|r| r.path_ratio)),
    };
    Report {
        schema_version: REPORT_SCHEMA_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        map_format_version: MAP_FORMAT_VERSION,
        observation_spec_version: OBSERVATION_SPEC_VERSION,
        config: config.cloned(),
        generators,
        overall,
        wall_time_s: records.iter().map(|r| r.wall_time_s).sum(),
    }
}

impl Report {
    pub fn row(&self, kind: GeneratorKind) -> Option<&GeneratorRow> {
        self.generators.iter().find(|g| g.generator == kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table, one line per generator plus the mean.
    pub fn table(&self) -> String {
        let opt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |x| format!("{x:.p$}"));
        let mut s = format!(
            "{:<8} {:>6} {:>9} {:>10} {:>9} {:>8} {:>7}\n",
            "gen", "eps", "success%", "collision%", "timeout%", "ttg(s)", "ratio"
        );
        let mut line = |name: &str, eps: usize, su: f64, co: f64, to: f64, t: Option<f64>, r: Option<f64>| {
            s.push_str(&format!(
                "{:<8} {:>6} {:>9.1} {:>10.1} {:>9.1} {:>8} {:>7}\n",
                name,
                eps,
                su,
                co,
                to,
                opt(t, 2),
                opt(r, 3)
            ));
        };
        for g in &self.generators {
            line(g.generator.name(), g.episodes, g.success_pct, g.collision_pct, g.timeout_pct, g.mean_time_to_goal, g.mean_path_ratio);
        }
        let o = &self.overall;
        line("mean", o.episodes, o.success_pct, o.collision_pct, o.timeout_pct, o.mean_time_to_goal, o.mean_path_ratio);
        s
    }
}

/// Removes every `wall_time*` field, recursively, so reports and records
/// from separate runs compare byte for byte.
pub fn strip_wall_time(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.retain(|k, _| !k.starts_with("wall_time"));
            m.values_mut().for_each(strip_wall_time);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_wall_time),
        _ => {}
    }
}

//! Map interchange format (JSON, UTF-8, fixed field order, 9 significant digits).

use serde::{Deserialize, Serialize};

use super::{GeneratorKind, Map, MapError, ResolvedParams};
use crate::geometry::{CircleObstacle, Segment, Vec2};

pub const MAP_FORMAT_VERSION: u32 = 1;

/// Rounds to 9 significant decimal digits.
pub fn round_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    let r: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

#[derive(Serialize, Deserialize)]
struct MapFile {
    format_version: u32,
    seed: u64,
    generator: GeneratorKind,
    resolved_params: ResolvedParams,
    world_size: f64,
    segments: Vec<[f64; 4]>,
    circles: Vec<[f64; 3]>,
    nodes: Vec<[f64; 2]>,
}

pub(super) fn map_to_json(map: &Map) -> String {
    let r = round_sig9;
    let mut params = map.resolved_params.clone();
    for v in params.values_mut() {
        if let super::ParamValue::Num(x) = v {
            *x = r(*x);
        }
    }
    let file = MapFile {
        format_version: MAP_FORMAT_VERSION,
        seed: map.seed,
        generator: map.generator,
        resolved_params: params,
        world_size: r(map.world_size),
        segments: map.segments.iter().map(|s| [r(s.a.x), r(s.a.y), r(s.b.x), r(s.b.y)]).collect(),
        circles: map.circles.iter().map(|c| [r(c.center.x), r(c.center.y), r(c.radius)]).collect(),
        nodes: map.nodes.iter().map(|n| [r(n.x), r(n.y)]).collect(),
    };
    serde_json::to_string(&file).expect("map serializes")
}

pub(super) fn map_from_json(s: &str) -> Result<Map, MapError> {
    let f: MapFile = serde_json::from_str(s).map_err(|e| MapError::Parse(e.to_string()))?;
    if f.format_version != MAP_FORMAT_VERSION {
        return Err(MapError::Parse(format!("unsupported format_version {}", f.format_version)));
    }
    if !(f.world_size > 0.0) {
        return Err(MapError::Parse("world_size must be positive".into()));
    }
    let mut segments = Vec::with_capacity(f.segments.len());
    for [ax, ay, bx, by] in f.segments {
        let (a, b) = (Vec2::new(ax, ay), Vec2::new(bx, by));
        if a == b || !a.is_finite() || !b.is_finite() {
            return Err(MapError::Parse("degenerate or non-finite segment".into()));
        }
        segments.push(Segment::new(a, b));
    }
    let mut circles = Vec::with_capacity(f.circles.len());
    for [x, y, r] in f.circles {
        if !(r > 0.0) {
            return Err(MapError::Parse("circle radius must be positive".into()));
        }
        circles.push(CircleObstacle::new(Vec2::new(x, y), r));
    }
    Ok(Map {
        seed: f.seed,
        generator: f.generator,
        resolved_params: f.resolved_params,
        world_size: f.world_size,
        segments,
        circles,
        nodes: f.nodes.into_iter().map(|[x, y]| Vec2::new(x, y)).collect(),
    })
}

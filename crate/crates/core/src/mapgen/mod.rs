//! Procedural map generators with a navigability guarantee.
//!
//! [`generate`] samples the shared parameters, runs the kind-specific
//! generator, rounds the geometry to its serialized precision and validates
//! reachability between all navigation nodes on the planning grid. Failed
//! attempts are retried with derived sub-seeds.

mod format;
pub mod graph;
pub mod maze;
pub mod sparse;
pub mod wfc;

use std::collections::BTreeMap;
use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CircleObstacle, Segment, SpatialIndex, Vec2, DEFAULT_INDEX_CELL, ROBOT_RADIUS};
use crate::planner::{self, OccupancyGrid};
use crate::rng::{derive_seed, SeededRng};

pub use format::{round_sig9, MAP_FORMAT_VERSION};
pub use wfc::{Tileset, WfcPreset};

/// Attempts made by [`generate`] before giving up.
pub const MAX_GENERATION_ATTEMPTS: u64 = 32;

/// Grid resolution used when validating generated maps (matches the planner).
pub const VALIDATION_CELL: f64 = planner::DEFAULT_RESOLUTION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Sparse,
    Maze,
    Graph,
    Wfc,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 4] = [
        GeneratorKind::Sparse,
        GeneratorKind::Maze,
        GeneratorKind::Graph,
        GeneratorKind::Wfc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::Sparse => "sparse",
            GeneratorKind::Maze => "maze",
            GeneratorKind::Graph => "graph",
            GeneratorKind::Wfc => "wfc",
        }
    }

    /// Default corridor/gap range for this kind.
    pub fn default_spacing_range(self) -> (f64, f64) {
        match self {
            GeneratorKind::Graph => (0.7, 1.25),
            GeneratorKind::Wfc => (0.55, 1.0),
            _ => (0.5, 1.25),
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for GeneratorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sparse" => Ok(GeneratorKind::Sparse),
            "maze" => Ok(GeneratorKind::Maze),
            "graph" => Ok(GeneratorKind::Graph),
            "wfc" => Ok(GeneratorKind::Wfc),
            other => Err(format!("unknown generator '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseParams {
    /// Obstacles per square meter.
    pub density_range: (f64, f64),
    /// Weights over circle, convex polygon, non-convex polygon.
    pub shape_mix: [f64; 3],
    /// Range of obstacle circumradii in meters.
    pub size_range: (f64, f64),
}

impl Default for SparseParams {
    fn default() -> Self {
        Self {
            density_range: (0.05, 0.25),
            shape_mix: [0.4, 0.35, 0.25],
            size_range: (0.15, 0.6),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MazeParams {
    pub wall_removal_rate: f64,
    pub wall_thickness_range: (f64, f64),
}

impl Default for MazeParams {
    fn default() -> Self {
        Self {
            wall_removal_rate: 0.2,
            wall_thickness_range: (0.05, 0.25),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    pub seed_point_count_range: (usize, usize),
    pub point_removal_rate: f64,
    pub edge_removal_rate: f64,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self {
            seed_point_count_range: (12, 24),
            point_removal_rate: 0.2,
            edge_removal_rate: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WfcParams {
    /// `None` picks one of the four presets per map from the seed.
    pub preset: Option<WfcPreset>,
    /// Side of one tile in meters; `None` derives it from the sampled spacing.
    pub tile_size: Option<f64>,
    pub max_restarts: u32,
    /// Probability that a buffer cell receives a random obstacle.
    pub buffer_fill: f64,
}

impl Default for WfcParams {
    fn default() -> Self {
        Self {
            preset: None,
            tile_size: None,
            max_restarts: 20,
            buffer_fill: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "lowercase")]
pub enum KindParams {
    Sparse(SparseParams),
    Maze(MazeParams),
    Graph(GraphParams),
    Wfc(WfcParams),
}

impl KindParams {
    pub fn kind(&self) -> GeneratorKind {
        match self {
            KindParams::Sparse(_) => GeneratorKind::Sparse,
            KindParams::Maze(_) => GeneratorKind::Maze,
            KindParams::Graph(_) => GeneratorKind::Graph,
            KindParams::Wfc(_) => GeneratorKind::Wfc,
        }
    }

    pub fn default_for(kind: GeneratorKind) -> Self {
        match kind {
            GeneratorKind::Sparse => KindParams::Sparse(SparseParams::default()),
            GeneratorKind::Maze => KindParams::Maze(MazeParams::default()),
            GeneratorKind::Graph => KindParams::Graph(GraphParams::default()),
            GeneratorKind::Wfc => KindParams::Wfc(WfcParams::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub node_count: usize,
    pub node_radius: f64,
    pub spacing_range: (f64, f64),
    pub world_size_range: (f64, f64),
    pub params: KindParams,
}

impl GeneratorConfig {
    pub fn default_for(kind: GeneratorKind) -> Self {
        Self {
            node_count: 5,
            node_radius: 0.25,
            spacing_range: kind.default_spacing_range(),
            world_size_range: (10.0, 20.0),
            params: KindParams::default_for(kind),
        }
    }

    pub fn kind(&self) -> GeneratorKind {
        self.params.kind()
    }

    /// Checks the configuration invariants.
    pub fn check(&self) -> Result<(), MapError> {
        let bad = |m: &str| Err(MapError::InvalidConfig(m.to_string()));
        if self.node_count < 2 {
            return bad("node_count must be at least 2");
        }
        if !(self.node_radius > 0.0) {
            return bad("node_radius must be positive");
        }
        let (s0, s1) = self.spacing_range;
        let (w0, w1) = self.world_size_range;
        if !(s0 <= s1 && w0 <= w1 && w0 > 0.0) {
            return bad("ranges must satisfy min <= max");
        }
        // The planner inflates by the robot radius at 5 cm cells.
        let min_spacing = 2.0 * (planner::DEFAULT_INFLATION + planner::DEFAULT_RESOLUTION);
        if s0 < min_spacing - 1e-9 {
            return bad(&format!("spacing below {min_spacing} m cannot be planned through"));
        }
        match &self.params {
            KindParams::Sparse(p) => {
                if p.density_range.0 < 0.0 || p.density_range.0 > p.density_range.1 {
                    return bad("density_range must be non-negative and ordered");
                }
                let sum: f64 = p.shape_mix.iter().sum();
                if p.shape_mix.iter().any(|w| *w < 0.0) || (sum - 1.0).abs() > 1e-6 {
                    return bad("shape_mix weights must be non-negative and sum to 1");
                }
            }
            KindParams::Maze(p) => {
                if !(0.0..=1.0).contains(&p.wall_removal_rate) {
                    return bad("wall_removal_rate must lie in [0, 1]");
                }
                if !(p.wall_thickness_range.0 > 0.0 && p.wall_thickness_range.0 <= p.wall_thickness_range.1) {
                    return bad("wall thickness must be positive and ordered");
                }
            }
            KindParams::Graph(p) => {
                if !(0.0..=1.0).contains(&p.point_removal_rate) || !(0.0..=1.0).contains(&p.edge_removal_rate) {
                    return bad("removal rates must lie in [0, 1]");
                }
                if p.seed_point_count_range.1 < self.node_count.max(3)
                    || p.seed_point_count_range.0 > p.seed_point_count_range.1
                {
                    return bad("seed point range must admit node_count points");
                }
            }
            KindParams::Wfc(p) => {
                if p.max_restarts < 1 {
                    return bad("max_restarts must be at least 1");
                }
                if let Some(t) = p.tile_size {
                    if !(t > 0.0) {
                        return bad("tile_size must be positive");
                    }
                }
            }
        }
        Ok(())
    }
}

/// A concrete sampled parameter value recorded with a map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Num(f64),
    Text(String),
}

pub type ResolvedParams = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq)]
pub struct Map {
    pub seed: u64,
    pub generator: GeneratorKind,
    pub resolved_params: ResolvedParams,
    pub world_size: f64,
    pub segments: Vec<Segment>,
    pub circles: Vec<CircleObstacle>,
    pub nodes: Vec<Vec2>,
}

impl Map {
    /// An obstacle-free square world with boundary walls.
    pub fn empty(world_size: f64, nodes: Vec<Vec2>) -> Self {
        Self {
            seed: 0,
            generator: GeneratorKind::Sparse,
            resolved_params: ResolvedParams::new(),
            world_size,
            segments: boundary_segments(world_size),
            circles: Vec::new(),
            nodes,
        }
    }

    pub fn spatial_index(&self) -> SpatialIndex {
        SpatialIndex::new(self.segments.clone(), self.circles.clone(), DEFAULT_INDEX_CELL)
    }

    pub fn diagonal(&self) -> f64 {
        self.world_size * std::f64::consts::SQRT_2
    }

    pub fn param_f64(&self, key: &str) -> Option<f64> {
        match self.resolved_params.get(key)? {
            ParamValue::Num(v) => Some(*v),
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Text(_) => None,
        }
    }

    pub fn param_str(&self, key: &str) -> Option<&str> {
        match self.resolved_params.get(key)? {
            ParamValue::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Rounds every float to the serialized precision so that the in-memory
    /// map equals its reloaded form.
    pub fn canonicalize(&mut self) {
        let r = round_sig9;
        let rv = |v: Vec2| Vec2::new(r(v.x), r(v.y));
        self.world_size = r(self.world_size);
        for s in &mut self.segments {
            s.a = rv(s.a);
            s.b = rv(s.b);
        }
        self.segments.retain(|s| s.a != s.b);
        for c in &mut self.circles {
            c.center = rv(c.center);
            c.radius = r(c.radius);
        }
        for n in &mut self.nodes {
            *n = rv(*n);
        }
        for v in self.resolved_params.values_mut() {
            if let ParamValue::Num(x) = v {
                *x = r(*x);
            }
        }
    }

    pub fn to_json(&self) -> String {
        format::map_to_json(self)
    }

    pub fn from_json(s: &str) -> Result<Self, MapError> {
        format::map_from_json(s)
    }
}

pub fn boundary_segments(world_size: f64) -> Vec<Segment> {
    let w = world_size;
    let c = [Vec2::new(0.0, 0.0), Vec2::new(w, 0.0), Vec2::new(w, w), Vec2::new(0.0, w)];
    (0..4).map(|i| Segment::new(c[i], c[(i + 1) % 4])).collect()
}

#[derive(Debug, Error)]
pub enum MapError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("generation failed after {attempts} attempts (last: {last})")]
    GenerationFailed { attempts: u64, last: String },
    #[error("infeasible dimensions: {0}")]
    InfeasibleDims(String),
    #[error("wave function collapse contradicted {0} times")]
    WfcContradiction(u32),
    #[error("could not place {0}")]
    PlacementExhausted(String),
    #[error("map not navigable: unreachable nodes {0:?}")]
    NotNavigable(Vec<usize>),
    #[error("map parse error: {0}")]
    Parse(String),
    #[error("tileset error: {0}")]
    Tileset(String),
}

/// Shared values sampled once per generation attempt.
#[derive(Debug, Clone, Copy)]
pub struct Sampled {
    pub world_size: f64,
    pub spacing: f64,
}

/// Random stream and shared samples for one generation attempt. Replaying
/// the stream of the recorded `attempt` reproduces a map's intermediates.
pub fn attempt_stream(config: &GeneratorConfig, seed: u64, attempt: u64) -> (SeededRng, Sampled) {
    let mut rng = SeededRng::derived(seed, "mapgen", attempt);
    let sampled = Sampled {
        world_size: rng.uniform(config.world_size_range.0, config.world_size_range.1),
        spacing: rng.uniform(config.spacing_range.0, config.spacing_range.1),
    };
    (rng, sampled)
}

/// Generates a navigable map, deterministic in `(config, seed)`.
pub fn generate(config: &GeneratorConfig, seed: u64) -> Result<Map, MapError> {
    config.check()?;
    let mut last = String::new();
    for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let (mut rng, sampled) = attempt_stream(config, seed, attempt);
        let built = match &config.params {
            KindParams::Sparse(p) => sparse::generate_sparse(config, p, sampled, &mut rng),
            KindParams::Maze(p) => maze::generate_maze(config, p, sampled, &mut rng),
            KindParams::Graph(p) => graph::generate_graph(config, p, sampled, &mut rng),
            KindParams::Wfc(p) => wfc::generate_wfc(config, p, sampled, &mut rng),
        };
        let mut map = match built {
            Ok(m) => m,
            Err(e) => {
                last = e.to_string();
                continue;
            }
        };
        map.seed = seed;
        map.generator = config.kind();
        let rp = &mut map.resolved_params;
        rp.insert("attempt".into(), ParamValue::Int(attempt as i64));
        rp.insert("world_size".into(), ParamValue::Num(sampled.world_size));
        rp.insert("node_radius".into(), ParamValue::Num(config.node_radius));
        rp.entry("spacing".into()).or_insert(ParamValue::Num(sampled.spacing));
        map.canonicalize();
        match check_map(&map, config.node_radius) {
            Ok(()) => return Ok(map),
            Err(e) => last = e.to_string(),
        }
    }
    Err(MapError::GenerationFailed {
        attempts: MAX_GENERATION_ATTEMPTS,
        last,
    })
}

/// Every map invariant: geometry in bounds, node clearance, reachability.
pub fn check_map(map: &Map, node_radius: f64) -> Result<(), MapError> {
    let w = map.world_size;
    let inside = |p: Vec2| p.x >= -1e-9 && p.y >= -1e-9 && p.x <= w + 1e-9 && p.y <= w + 1e-9;
    if !map.segments.iter().all(|s| inside(s.a) && inside(s.b)) || !map.circles.iter().all(|c| inside(c.center)) {
        return Err(MapError::InfeasibleDims("geometry outside the world".into()));
    }
    let index = map.spatial_index();
    for (i, n) in map.nodes.iter().enumerate() {
        if !inside(*n) || index.distance_to_point(*n) < node_radius - 1e-9 {
            return Err(MapError::PlacementExhausted(format!("node {i} lacks clearance")));
        }
    }
    let report = validate_navigability(map, VALIDATION_CELL);
    if report.navigable {
        Ok(())
    } else {
        Err(MapError::NotNavigable(report.unreachable))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavigabilityReport {
    pub navigable: bool,
    /// Node indices not reachable from node 0.
    pub unreachable: Vec<usize>,
    /// Nodes whose cell could not be snapped to free space.
    pub unsnappable: Vec<usize>,
}

/// Rasterizes at `cell`, inflates by the robot radius and flood-fills from node 0.
pub fn validate_navigability(map: &Map, cell: f64) -> NavigabilityReport {
    let grid = planner::rasterize(map, cell);
    let inflated = planner::inflate(&grid, ROBOT_RADIUS);
    reachability(&inflated.grid, &map.nodes)
}

/// 4-connected flood fill from the first node's (snapped) cell.
pub fn reachability(grid: &OccupancyGrid, nodes: &[Vec2]) -> NavigabilityReport {
    let mut unsnappable = Vec::new();
    let cells: Vec<Option<usize>> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let c = grid.snap_free(*n, planner::SNAP_RADIUS);
            if c.is_none() {
                unsnappable.push(i);
            }
            c
        })
        .collect();
    let Some(Some(start)) = cells.first().copied() else {
        return NavigabilityReport {
            navigable: nodes.is_empty(),
            unreachable: (0..nodes.len()).collect(),
            unsnappable,
        };
    };
    let mut seen = vec![false; grid.width * grid.height];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(c) = queue.pop_front() {
        let (x, y) = (c % grid.width, c / grid.width);
        let mut visit = |nx: usize, ny: usize| {
            let n = ny * grid.width + nx;
            if !seen[n] && !grid.occupied[n] {
                seen[n] = true;
                queue.push_back(n);
            }
        };
        if x > 0 {
            visit(x - 1, y);
        }
        if x + 1 < grid.width {
            visit(x + 1, y);
        }
        if y > 0 {
            visit(x, y - 1);
        }
        if y + 1 < grid.height {
            visit(x, y + 1);
        }
    }
    let unreachable: Vec<usize> = cells
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_some_and(|c| seen[c]))
        .map(|(i, _)| i)
        .collect();
    NavigabilityReport {
        navigable: unreachable.is_empty(),
        unreachable,
        unsnappable,
    }
}

/// Rejection-samples `count` node positions from `candidate` draws.
///
/// Each accepted node keeps `node_radius` clearance from obstacles and at
/// least `4 * node_radius` from other nodes.
pub(crate) fn place_nodes(
    count: usize,
    node_radius: f64,
    index: &SpatialIndex,
    rng: &mut SeededRng,
    mut candidate: impl FnMut(&mut SeededRng) -> Option<Vec2>,
    mut reject: impl FnMut(Vec2) -> bool,
) -> Result<Vec<Vec2>, MapError> {
    let mut nodes: Vec<Vec2> = Vec::with_capacity(count);
    let min_sep = 4.0 * node_radius;
    let mut tries = 0;
    while nodes.len() < count {
        tries += 1;
        if tries > 4000 {
            return Err(MapError::PlacementExhausted(format!("{count} navigation nodes")));
        }
        let Some(p) = candidate(rng) else { continue };
        if reject(p) || nodes.iter().any(|n| n.distance(p) < min_sep) {
            continue;
        }
        if index.distance_to_point(p) < node_radius + 1e-6 {
            continue;
        }
        nodes.push(p);
    }
    Ok(nodes)
}

/// Stable seed for map `index` of a generator within a corpus.
pub fn corpus_map_seed(corpus_seed: u64, kind: GeneratorKind, index: u64) -> u64 {
    derive_seed(corpus_seed, kind.name(), index)
}

//! Wave Function Collapse layouts from 3×3 tile presets.
//!
//! Tilesets live in `tilesets/*.json`. Each tile has a weight and a 3-row
//! pattern (`#` occupied, `.` free, `b` buffer, first row on top) and the file
//! lists, for every tile and side (`up`, `right`, `down`, `left`), the tiles
//! allowed next to it. Adjacency must be symmetric.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{place_nodes, GeneratorConfig, Map, MapError, ParamValue, Sampled, WfcParams};
use crate::geometry::{CircleObstacle, Segment, Vec2};
use crate::rng::SeededRng;

pub const TILE_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WfcPreset {
    Obstacle,
    Labyrinth,
    Warehouse,
    Cavern,
}

impl WfcPreset {
    pub const ALL: [WfcPreset; 4] = [
        WfcPreset::Obstacle,
        WfcPreset::Labyrinth,
        WfcPreset::Warehouse,
        WfcPreset::Cavern,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WfcPreset::Obstacle => "obstacle",
            WfcPreset::Labyrinth => "labyrinth",
            WfcPreset::Warehouse => "warehouse",
            WfcPreset::Cavern => "cavern",
        }
    }

    pub fn tileset(self) -> &'static Tileset {
        static SETS: OnceLock<Vec<Tileset>> = OnceLock::new();
        let sets = SETS.get_or_init(|| {
            [
                include_str!("../../tilesets/obstacle.json"),
                include_str!("../../tilesets/labyrinth.json"),
                include_str!("../../tilesets/warehouse.json"),
                include_str!("../../tilesets/cavern.json"),
            ]
            .iter()
            .map(|s| Tileset::from_json(s).expect("bundled tileset is valid"))
            .collect()
        });
        &sets[self as usize]
    }
}

impl fmt::Display for WfcPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for WfcPreset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WfcPreset::ALL
            .into_iter()
            .find(|p| p.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown wfc preset '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Occupied,
    Free,
    Buffer,
}

/// Side order used for adjacency masks: up (+y), right (+x), down, left.
pub const SIDES: [&str; 4] = ["up", "right", "down", "left"];
const OFFSETS: [(i64, i64); 4] = [(0, 1), (1, 0), (0, -1), (-1, 0)];

#[derive(Debug, Clone)]
pub struct Tile {
    pub name: String,
    pub weight: f64,
    /// `cells[row][col]`, row 0 on top.
    pub cells: [[CellKind; TILE_DIM]; TILE_DIM],
}

#[derive(Debug, Clone)]
pub struct Tileset {
    pub name: String,
    pub tiles: Vec<Tile>,
    /// `allowed[t][side]`: bitmask of tiles that may sit on `side` of `t`.
    pub allowed: Vec<[u64; 4]>,
}

#[derive(Deserialize)]
struct TileFile {
    name: String,
    weight: f64,
    pattern: Vec<String>,
}

#[derive(Deserialize)]
struct TilesetFile {
    name: String,
    tile_dim: usize,
    tiles: Vec<TileFile>,
    adjacency: BTreeMap<String, BTreeMap<String, Vec<String>>>,
}

impl Tileset {
    pub fn from_json(s: &str) -> Result<Self, MapError> {
        let bad = |m: String| MapError::Tileset(m);
        let f: TilesetFile = serde_json::from_str(s).map_err(|e| bad(e.to_string()))?;
        if f.tile_dim != TILE_DIM {
            return Err(bad(format!("tile_dim must be {TILE_DIM}")));
        }
        if f.tiles.is_empty() || f.tiles.len() > 64 {
            return Err(bad("a tileset needs 1 to 64 tiles".into()));
        }
        let mut index = BTreeMap::new();
        let mut tiles = Vec::with_capacity(f.tiles.len());
        for (i, t) in f.tiles.iter().enumerate() {
            if index.insert(t.name.clone(), i).is_some() {
                return Err(bad(format!("duplicate tile '{}'", t.name)));
            }
            if !(t.weight > 0.0) {
                return Err(bad(format!("tile '{}' needs a positive weight", t.name)));
            }
            if t.pattern.len() != TILE_DIM || t.pattern.iter().any(|r| r.chars().count() != TILE_DIM) {
                return Err(bad(format!("tile '{}' pattern must be {TILE_DIM}x{TILE_DIM}", t.name)));
            }
            let mut cells = [[CellKind::Free; TILE_DIM]; TILE_DIM];
            for (r, row) in t.pattern.iter().enumerate() {
                for (c, ch) in row.chars().enumerate() {
                    cells[r][c] = match ch {
                        '#' => CellKind::Occupied,
                        '.' => CellKind::Free,
                        'b' => CellKind::Buffer,
                        other => return Err(bad(format!("tile '{}' has unknown cell '{other}'", t.name))),
                    };
                }
            }
            tiles.push(Tile {
                name: t.name.clone(),
                weight: t.weight,
                cells,
            });
        }
        let mut allowed = vec![[0u64; 4]; tiles.len()];
        for (name, sides) in &f.adjacency {
            let &i = index.get(name).ok_or_else(|| bad(format!("adjacency for unknown tile '{name}'")))?;
            for (side, list) in sides {
                let d = SIDES
                    .iter()
                    .position(|s| s == side)
                    .ok_or_else(|| bad(format!("unknown side '{side}'")))?;
                for other in list {
                    let &j = index.get(other).ok_or_else(|| bad(format!("unknown tile '{other}'")))?;
                    allowed[i][d] |= 1 << j;
                }
            }
        }
        for i in 0..tiles.len() {
            for d in 0..4 {
                for j in 0..tiles.len() {
                    let fwd = allowed[i][d] >> j & 1 == 1;
                    let back = allowed[j][(d + 2) % 4] >> i & 1 == 1;
                    if fwd != back {
                        return Err(bad(format!(
                            "adjacency between '{}' and '{}' is not symmetric",
                            tiles[i].name, tiles[j].name
                        )));
                    }
                }
            }
        }
        Ok(Self {
            name: f.name,
            tiles,
            allowed,
        })
    }

    fn full_mask(&self) -> u64 {
        if self.tiles.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.tiles.len()) - 1
        }
    }

    pub fn compatible(&self, a: usize, side: usize, b: usize) -> bool {
        self.allowed[a][side] >> b & 1 == 1
    }
}

/// A fully collapsed `side × side` tile grid, row-major with y up.
#[derive(Debug, Clone, PartialEq)]
pub struct WfcSolution {
    pub side: usize,
    pub tiles: Vec<usize>,
    pub restarts: u32,
}

/// Number of horizontally or vertically adjacent tile pairs that break the adjacency rules.
pub fn adjacency_violations(ts: &Tileset, sol: &WfcSolution) -> usize {
    let n = sol.side;
    let mut bad = 0;
    for y in 0..n {
        for x in 0..n {
            let t = sol.tiles[y * n + x];
            if x + 1 < n && !ts.compatible(t, 1, sol.tiles[y * n + x + 1]) {
                bad += 1;
            }
            if y + 1 < n && !ts.compatible(t, 0, sol.tiles[(y + 1) * n + x]) {
                bad += 1;
            }
        }
    }
    bad
}

fn entropy(ts: &Tileset, mask: u64) -> f64 {
    let (mut sum, mut sum_wlogw) = (0.0, 0.0);
    let mut m = mask;
    while m != 0 {
        let t = m.trailing_zeros() as usize;
        m &= m - 1;
        let w = ts.tiles[t].weight;
        sum += w;
        sum_wlogw += w * w.ln();
    }
    sum.ln() - sum_wlogw / sum
}

/// One collapse run; `None` on contradiction.
fn try_solve(ts: &Tileset, n: usize, rng: &mut SeededRng) -> Option<Vec<usize>> {
    let mut dom = vec![ts.full_mask(); n * n];
    let mut stack: Vec<usize> = Vec::new();
    loop {
        // Minimum-entropy undecided cell; small noise breaks ties.
        let mut best: Option<(f64, usize)> = None;
        for (i, &m) in dom.iter().enumerate() {
            if m.count_ones() > 1 {
                let h = entropy(ts, m) + 1e-6 * rng.unit();
                if best.is_none_or(|(bh, _)| h < bh) {
                    best = Some((h, i));
                }
            }
        }
        let Some((_, cell)) = best else { break };
        let options: Vec<usize> = (0..ts.tiles.len()).filter(|t| dom[cell] >> t & 1 == 1).collect();
        let weights: Vec<f64> = options.iter().map(|t| ts.tiles[*t].weight).collect();
        dom[cell] = 1 << options[rng.weighted(&weights)];
        stack.push(cell);
        while let Some(c) = stack.pop() {
            let (x, y) = ((c % n) as i64, (c / n) as i64);
            for (d, (dx, dy)) in OFFSETS.iter().enumerate() {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= n as i64 || ny >= n as i64 {
                    continue;
                }
                let mut reach = 0u64;
                let mut m = dom[c];
                while m != 0 {
                    let t = m.trailing_zeros() as usize;
                    m &= m - 1;
                    reach |= ts.allowed[t][d];
                }
                let ni = ny as usize * n + nx as usize;
                let narrowed = dom[ni] & reach;
                if narrowed == 0 {
                    return None;
                }
                if narrowed != dom[ni] {
                    dom[ni] = narrowed;
                    stack.push(ni);
                }
            }
        }
    }
    if dom.iter().any(|m| *m == 0) {
        return None;
    }
    Some(dom.iter().map(|m| m.trailing_zeros() as usize).collect())
}

/// Collapses a `side × side` grid, restarting on contradiction.
pub fn solve(ts: &Tileset, side: usize, max_restarts: u32, rng: &mut SeededRng) -> Result<WfcSolution, MapError> {
    for restarts in 0..max_restarts {
        if let Some(tiles) = try_solve(ts, side, rng) {
            return Ok(WfcSolution { side, tiles, restarts });
        }
    }
    Err(MapError::WfcContradiction(max_restarts))
}

/// Cell classification grid, row-major with y up; cells outside count as occupied.
#[derive(Debug, Clone, PartialEq)]
pub struct Bitmap {
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
    pub origin: Vec2,
    pub cells: Vec<CellKind>,
}

impl Bitmap {
    pub fn from_solution(ts: &Tileset, sol: &WfcSolution, cell_size: f64, origin: Vec2) -> Self {
        let w = sol.side * TILE_DIM;
        let mut cells = vec![CellKind::Occupied; w * w];
        for ty in 0..sol.side {
            for tx in 0..sol.side {
                let tile = &ts.tiles[sol.tiles[ty * sol.side + tx]];
                for (r, row) in tile.cells.iter().enumerate() {
                    for (c, k) in row.iter().enumerate() {
                        let (x, y) = (tx * TILE_DIM + c, ty * TILE_DIM + (TILE_DIM - 1 - r));
                        cells[y * w + x] = *k;
                    }
                }
            }
        }
        Self {
            width: w,
            height: w,
            cell_size,
            origin,
            cells,
        }
    }

    /// Parses rows of `#`, `.` and `b`, first row on top.
    pub fn from_rows(rows: &[&str], cell_size: f64, origin: Vec2) -> Self {
        let height = rows.len();
        let width = rows[0].len();
        let mut cells = vec![CellKind::Occupied; width * height];
        for (r, row) in rows.iter().enumerate() {
            for (c, ch) in row.chars().enumerate() {
                cells[(height - 1 - r) * width + c] = match ch {
                    '#' => CellKind::Occupied,
                    'b' => CellKind::Buffer,
                    _ => CellKind::Free,
                };
            }
        }
        Self {
            width,
            height,
            cell_size,
            origin,
            cells,
        }
    }

    pub fn center(&self, i: usize) -> Vec2 {
        let (x, y) = (i % self.width, i / self.width);
        self.origin + Vec2::new((x as f64 + 0.5) * self.cell_size, (y as f64 + 0.5) * self.cell_size)
    }

    /// 4-connected components of non-occupied cells; returns the label per cell
    /// (`usize::MAX` when occupied) and the size of every component.
    pub fn regions(&self) -> (Vec<usize>, Vec<usize>) {
        let mut label = vec![usize::MAX; self.cells.len()];
        let mut sizes = Vec::new();
        let mut stack = Vec::new();
        for s in 0..self.cells.len() {
            if self.cells[s] == CellKind::Occupied || label[s] != usize::MAX {
                continue;
            }
            let id = sizes.len();
            let mut size = 0;
            label[s] = id;
            stack.push(s);
            while let Some(c) = stack.pop() {
                size += 1;
                let (x, y) = (c % self.width, c / self.width);
                let mut nb = [None; 4];
                if x > 0 {
                    nb[0] = Some(c - 1);
                }
                if x + 1 < self.width {
                    nb[1] = Some(c + 1);
                }
                if y > 0 {
                    nb[2] = Some(c - self.width);
                }
                if y + 1 < self.height {
                    nb[3] = Some(c + self.width);
                }
                for n in nb.into_iter().flatten() {
                    if self.cells[n] != CellKind::Occupied && label[n] == usize::MAX {
                        label[n] = id;
                        stack.push(n);
                    }
                }
            }
            sizes.push(size);
        }
        (label, sizes)
    }

    /// Mask of the largest region (lowest label on ties).
    pub fn largest_region(&self) -> Vec<bool> {
        let (label, sizes) = self.regions();
        let Some(best) = (0..sizes.len()).max_by(|a, b| sizes[*a].cmp(&sizes[*b]).then(b.cmp(a))) else {
            return vec![false; self.cells.len()];
        };
        label.iter().map(|l| *l == best).collect()
    }

    /// Copy with everything outside the largest region filled.
    pub fn keep_largest_region(&self) -> Bitmap {
        let keep = self.largest_region();
        let mut out = self.clone();
        for (c, k) in out.cells.iter_mut().zip(&keep) {
            if !k {
                *c = CellKind::Occupied;
            }
        }
        out
    }

    fn occupied_at(&self, x: i64, y: i64) -> bool {
        x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 || self.cells[y as usize * self.width + x as usize] == CellKind::Occupied
    }

    /// Edges between occupied and non-occupied cells, merged into maximal segments.
    pub fn boundary_segments(&self) -> Vec<Segment> {
        let s = self.cell_size;
        let o = self.origin;
        let mut out = Vec::new();
        // Horizontal lines y = k between rows k-1 and k.
        for k in 0..=self.height as i64 {
            let mut run: Option<i64> = None;
            for x in 0..=self.width as i64 {
                let edge = x < self.width as i64 && self.occupied_at(x, k - 1) != self.occupied_at(x, k);
                match (edge, run) {
                    (true, None) => run = Some(x),
                    (false, Some(x0)) => {
                        let y = o.y + k as f64 * s;
                        out.push(Segment::new(Vec2::new(o.x + x0 as f64 * s, y), Vec2::new(o.x + x as f64 * s, y)));
                        run = None;
                    }
                    _ => {}
                }
            }
        }
        for k in 0..=self.width as i64 {
            let mut run: Option<i64> = None;
            for y in 0..=self.height as i64 {
                let edge = y < self.height as i64 && self.occupied_at(k - 1, y) != self.occupied_at(k, y);
                match (edge, run) {
                    (true, None) => run = Some(y),
                    (false, Some(y0)) => {
                        let x = o.x + k as f64 * s;
                        out.push(Segment::new(Vec2::new(x, o.y + y0 as f64 * s), Vec2::new(x, o.y + y as f64 * s)));
                        run = None;
                    }
                    _ => {}
                }
            }
        }
        out
    }
}

/// Turns a bitmap into a map: largest region kept, buffer cells filled with
/// probability `buffer_fill`, nodes placed on free cells of that region.
pub fn build_from_bitmap(
    bitmap: &Bitmap,
    world_size: f64,
    cfg: &GeneratorConfig,
    buffer_fill: f64,
    rng: &mut SeededRng,
) -> Result<Map, MapError> {
    let region = bitmap.keep_largest_region();
    let mut map = Map::empty(world_size, Vec::new());
    let w = world_size;
    let on_world_edge = |s: &Segment| {
        let e = 1e-9;
        (s.a.x.abs() < e && s.b.x.abs() < e)
            || (s.a.y.abs() < e && s.b.y.abs() < e)
            || ((s.a.x - w).abs() < e && (s.b.x - w).abs() < e)
            || ((s.a.y - w).abs() < e && (s.b.y - w).abs() < e)
    };
    map.segments.extend(region.boundary_segments().into_iter().filter(|s| !on_world_edge(s)));
    let cs = bitmap.cell_size;
    for (i, k) in region.cells.iter().enumerate() {
        if *k == CellKind::Buffer && rng.chance(buffer_fill) {
            let r = cs * rng.uniform(0.15, 0.4);
            let slack = cs / 2.0 - r;
            let c = region.center(i) + Vec2::new(rng.uniform(-slack, slack), rng.uniform(-slack, slack));
            map.circles.push(CircleObstacle::new(c, r));
        }
    }
    let free: Vec<usize> = (0..region.cells.len()).filter(|i| region.cells[*i] == CellKind::Free).collect();
    if free.is_empty() {
        return Err(MapError::PlacementExhausted("free region is empty".into()));
    }
    let index = map.spatial_index();
    map.nodes = place_nodes(
        cfg.node_count,
        cfg.node_radius,
        &index,
        rng,
        |rng| Some(region.center(free[rng.below(free.len() as u64) as usize])),
        |_| false,
    )?;
    Ok(map)
}

/// Everything produced along the way to a WFC map.
#[derive(Debug, Clone)]
pub struct WfcOutput {
    pub preset: WfcPreset,
    pub solution: WfcSolution,
    /// Bitmap as solved, before region selection.
    pub bitmap: Bitmap,
    pub map: Map,
}

pub fn generate_wfc_detailed(
    cfg: &GeneratorConfig,
    p: &WfcParams,
    s: Sampled,
    rng: &mut SeededRng,
) -> Result<WfcOutput, MapError> {
    let preset = match p.preset {
        Some(preset) => preset,
        None => WfcPreset::ALL[rng.below(4) as usize],
    };
    let ts = preset.tileset();
    let w = s.world_size;
    let tile = p.tile_size.unwrap_or(TILE_DIM as f64 * s.spacing);
    let side = (w / tile + 1e-9).floor() as usize;
    if side < 2 {
        return Err(MapError::InfeasibleDims(format!("fewer than 2x2 tiles of {tile:.3} m fit")));
    }
    // Derived tile sizes stretch to fill the world; explicit ones are centered.
    let (tile, offset) = match p.tile_size {
        None => (w / side as f64, 0.0),
        Some(t) => (t, (w - side as f64 * t) / 2.0),
    };
    let cell = tile / TILE_DIM as f64;
    let solution = solve(ts, side, p.max_restarts, rng)?;
    let bitmap = Bitmap::from_solution(ts, &solution, cell, Vec2::new(offset, offset));
    let mut map = build_from_bitmap(&bitmap, w, cfg, p.buffer_fill, rng)?;
    let rp = &mut map.resolved_params;
    rp.insert("spacing".into(), ParamValue::Num(s.spacing));
    rp.insert("preset".into(), ParamValue::Text(preset.name().into()));
    rp.insert("tiles_per_side".into(), ParamValue::Int(side as i64));
    rp.insert("tile_size".into(), ParamValue::Num(tile));
    rp.insert("cell_size".into(), ParamValue::Num(cell));
    rp.insert("restarts".into(), ParamValue::Int(solution.restarts as i64));
    Ok(WfcOutput {
        preset,
        solution,
        bitmap,
        map,
    })
}

pub(super) fn generate_wfc(cfg: &GeneratorConfig, p: &WfcParams, s: Sampled, rng: &mut SeededRng) -> Result<Map, MapError> {
    generate_wfc_detailed(cfg, p, s, rng).map(|o| o.map)
}

//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use std::collections::HashMap;

use lidarnav::geometry::{segments_intersect, CircleObstacle, Segment, Vec2};
use lidarnav::mapgen::wfc::{adjacency_violations, generate_wfc_detailed, CellKind};
use lidarnav::mapgen::{attempt_stream, GeneratorConfig, KindParams, Map};
use lidarnav::planner::OccupancyGrid;
use lidarnav::rng::SeededRng;

/// Path cost `a + b*sqrt(2)` with exact integer comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactCost {
    pub straight: i64,
    pub diagonal: i64,
}

impl Ord for ExactCost {
    fn cmp(&self, o: &Self) -> Ordering {
        // sign of (a1 - a2) + (b1 - b2)*sqrt(2)
        let da = self.straight - o.straight;
        let db = self.diagonal - o.diagonal;
        let sa = da.signum();
        let sb = db.signum();
        if sa >= 0 && sb >= 0 {
            return if sa == 0 && sb == 0 { Ordering::Equal } else { Ordering::Greater };
        }
        if sa <= 0 && sb <= 0 {
            return Ordering::Less;
        }
        // opposite signs: compare da^2 with 2 db^2
        let lhs = (da as i128) * (da as i128);
        let rhs = 2 * (db as i128) * (db as i128);
        if sa > 0 {
            lhs.cmp(&rhs)
        } else {
            rhs.cmp(&lhs)
        }
    }
}

impl PartialOrd for ExactCost {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Dijkstra over 8-connected free cells without corner cutting. Returns the
/// exact optimal cost, or `None` when either endpoint is blocked or the goal
/// is unreachable.
pub fn dijkstra(grid: &OccupancyGrid, start: usize, goal: usize) -> Option<ExactCost> {
    let (w, h) = (grid.width as i64, grid.height as i64);
    let free = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && !grid.occupied[(y * w + x) as usize];
    let (sx, sy) = (start as i64 % w, start as i64 / w);
    if !free(sx, sy) || grid.occupied[goal] {
        return None;
    }
    let mut best: Vec<Option<ExactCost>> = vec![None; grid.occupied.len()];
    let mut heap = BinaryHeap::new();
    let zero = ExactCost { straight: 0, diagonal: 0 };
    best[start] = Some(zero);
    heap.push(std::cmp::Reverse((zero, start)));
    while let Some(std::cmp::Reverse((c, idx))) = heap.pop() {
        if best[idx] != Some(c) {
            continue;
        }
        if idx == goal {
            return Some(c);
        }
        let (x, y) = (idx as i64 % w, idx as i64 / w);
        for dx in -1i64..=1 {
            for dy in -1i64..=1 {
                if (dx, dy) == (0, 0) || !free(x + dx, y + dy) {
                    continue;
                }
                let diag = dx != 0 && dy != 0;
                if diag && !(free(x + dx, y) && free(x, y + dy)) {
                    continue;
                }
                let nc = if diag {
                    ExactCost { diagonal: c.diagonal + 1, ..c }
                } else {
                    ExactCost { straight: c.straight + 1, ..c }
                };
                let n = ((y + dy) * w + x + dx) as usize;
                if best[n].is_none_or(|b| nc < b) {
                    best[n] = Some(nc);
                    heap.push(std::cmp::Reverse((nc, n)));
                }
            }
        }
    }
    None
}

/// Grid with each cell occupied independently with probability `p`.
pub fn random_grid(rng: &mut SeededRng, w: usize, h: usize, p: f64) -> OccupancyGrid {
    let mut g = OccupancyGrid::new(1.0, w, h, Vec2::ZERO);
    for o in g.occupied.iter_mut() {
        *o = rng.chance(p);
    }
    g
}

/// Ray parameter where `origin + t*dir` meets the closed segment `a..b`,
/// solved with Cramer's rule on the 2x2 system.
pub fn ray_segment(origin: Vec2, dir: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    // origin + t*dir = a + u*(b - a)  =>  [dir, a - b] [t u]^T = a - origin
    let (m11, m12, m21, m22) = (dir.x, a.x - b.x, dir.y, a.y - b.y);
    let (r1, r2) = (a.x - origin.x, a.y - origin.y);
    let det = m11 * m22 - m12 * m21;
    if det.abs() < 1e-14 {
        return None;
    }
    let t = (r1 * m22 - m12 * r2) / det;
    let u = (m11 * r2 - r1 * m21) / det;
    (t >= 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u)).then_some(t)
}

/// First non-negative root of |origin + t*dir - c|^2 = r^2 (0 when inside).
pub fn ray_circle(origin: Vec2, dir: Vec2, c: Vec2, r: f64) -> Option<f64> {
    let ox = origin.x - c.x;
    let oy = origin.y - c.y;
    let qa = dir.x * dir.x + dir.y * dir.y;
    let qb = 2.0 * (ox * dir.x + oy * dir.y);
    let qc = ox * ox + oy * oy - r * r;
    if qc <= 0.0 {
        return Some(0.0);
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return None;
    }
    let t = (-qb - disc.sqrt()) / (2.0 * qa);
    (t >= 0.0).then_some(t)
}

/// Nearest hit over every obstacle, capped at `max_range`.
pub fn brute_ray(segments: &[Segment], circles: &[CircleObstacle], origin: Vec2, dir: Vec2, max_range: f64) -> f64 {
    let s = segments.iter().filter_map(|s| ray_segment(origin, dir, s.a, s.b));
    let c = circles.iter().filter_map(|c| ray_circle(origin, dir, c.center, c.radius));
    s.chain(c).fold(max_range, f64::min)
}

/// Random segments and circles inside `[0, size]^2`.
pub fn random_scene(rng: &mut SeededRng, size: f64, n_segments: usize, n_circles: usize) -> (Vec<Segment>, Vec<CircleObstacle>) {
    let mut segs = Vec::with_capacity(n_segments);
    for _ in 0..n_segments {
        let a = Vec2::new(rng.uniform(0.0, size), rng.uniform(0.0, size));
        let len = rng.uniform(0.05, size * 0.3);
        let th = rng.uniform(-std::f64::consts::PI, std::f64::consts::PI);
        let b = a + Vec2::from_angle(th) * len;
        let clamp = |p: Vec2| Vec2::new(p.x.clamp(0.0, size), p.y.clamp(0.0, size));
        segs.push(Segment::new(a, clamp(b)));
    }
    let circles = (0..n_circles)
        .map(|_| {
            CircleObstacle::new(
                Vec2::new(rng.uniform(0.0, size), rng.uniform(0.0, size)),
                rng.uniform(0.05, size * 0.05),
            )
        })
        .collect();
    (segs, circles)
}

/// Liang-Barsky test: does the closed segment touch the closed box?
pub fn segment_touches_box(a: Vec2, b: Vec2, lo: Vec2, hi: Vec2, eps: f64) -> bool {
    let d = b - a;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [
        (-d.x, a.x - (lo.x - eps)),
        (d.x, (hi.x + eps) - a.x),
        (-d.y, a.y - (lo.y - eps)),
        (d.y, (hi.y + eps) - a.y),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return false;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    t0 <= t1
}

/// Union-find over `n` items.
pub struct Dsu(Vec<usize>);

impl Dsu {
    pub fn new(n: usize) -> Self {
        Dsu((0..n).collect())
    }

    pub fn find(&mut self, x: usize) -> usize {
        let p = self.0[x];
        if p == x {
            return x;
        }
        let r = self.find(p);
        self.0[x] = r;
        r
    }

    /// Returns false when `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Cell graph recovered from wall geometry: two neighbouring cells are
/// connected when the segment between their centers crosses no wall.
pub fn maze_graph(map: &Map) -> (usize, Vec<(usize, usize)>) {
    let n = map.param_f64("cols").unwrap() as usize;
    assert_eq!(map.param_f64("rows").unwrap() as usize, n);
    let pitch = map.param_f64("cell_pitch").unwrap();
    let t = map.param_f64("wall_thickness").unwrap();
    let o = map.param_f64("origin_offset").unwrap();
    let center = |x: usize, y: usize| {
        let c = |i: usize| o + t + i as f64 * pitch + (pitch - t) / 2.0;
        Vec2::new(c(x), c(y))
    };
    let open = |a: Vec2, b: Vec2| {
        let s = Segment::new(a, b);
        !map.segments.iter().any(|w| segments_intersect(&s, w))
    };
    let mut edges = Vec::new();
    for y in 0..n {
        for x in 0..n {
            if x + 1 < n && open(center(x, y), center(x + 1, y)) {
                edges.push((y * n + x, y * n + x + 1));
            }
            if y + 1 < n && open(center(x, y), center(x, y + 1)) {
                edges.push((y * n + x, (y + 1) * n + x));
            }
        }
    }
    (n * n, edges)
}

/// Replays the recorded attempt of a WFC map and checks every tile edge in
/// both directions plus node membership in the largest 4-connected open
/// region of the solved bitmap.
pub fn check_wfc_map(cfg: &GeneratorConfig, seed: u64, map: &Map) -> Result<(), String> {
    let KindParams::Wfc(p) = &cfg.params else {
        return Err("not a wfc config".into());
    };
    let attempt = map.param_f64("attempt").ok_or("no attempt recorded")? as u64;
    let (mut rng, sampled) = attempt_stream(cfg, seed, attempt);
    let out = generate_wfc_detailed(cfg, p, sampled, &mut rng).map_err(|e| e.to_string())?;
    let mut replayed = out.map.clone();
    replayed.canonicalize();
    if replayed.nodes != map.nodes {
        return Err("replay does not reproduce the map".into());
    }
    let ts = out.preset.tileset();
    let sol = &out.solution;
    if adjacency_violations(ts, sol) != 0 {
        return Err("adjacency violations reported".into());
    }
    let n = sol.side;
    for y in 0..n {
        for x in 0..n {
            let t = sol.tiles[y * n + x];
            if x + 1 < n {
                let r = sol.tiles[y * n + x + 1];
                if !(ts.compatible(t, 1, r) && ts.compatible(r, 3, t)) {
                    return Err(format!("bad horizontal pair at {x},{y}"));
                }
            }
            if y + 1 < n {
                let u = sol.tiles[(y + 1) * n + x];
                if !(ts.compatible(t, 0, u) && ts.compatible(u, 2, t)) {
                    return Err(format!("bad vertical pair at {x},{y}"));
                }
            }
        }
    }
    let bm = &out.bitmap;
    let open = |c: usize| bm.cells[c] != CellKind::Occupied;
    let mut dsu = Dsu::new(bm.cells.len());
    for c in (0..bm.cells.len()).filter(|c| open(*c)) {
        let (x, y) = (c % bm.width, c / bm.width);
        if x + 1 < bm.width && open(c + 1) {
            dsu.union(c, c + 1);
        }
        if y + 1 < bm.height && open(c + bm.width) {
            dsu.union(c, c + bm.width);
        }
    }
    let mut sizes: HashMap<usize, usize> = HashMap::new();
    for c in (0..bm.cells.len()).filter(|c| open(*c)) {
        *sizes.entry(dsu.find(c)).or_default() += 1;
    }
    let largest = sizes.values().copied().max().ok_or("no open cells")?;
    for node in &map.nodes {
        let gx = ((node.x - bm.origin.x) / bm.cell_size).floor() as usize;
        let gy = ((node.y - bm.origin.y) / bm.cell_size).floor() as usize;
        let c = gy * bm.width + gx;
        if !open(c) || sizes[&dsu.find(c)] != largest {
            return Err(format!("node {node:?} outside the largest region"));
        }
    }
    Ok(())
}

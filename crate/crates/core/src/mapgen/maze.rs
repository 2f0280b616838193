//! Prim's-algorithm mazes with optional wall removal and thick walls.

use super::{place_nodes, GeneratorConfig, Map, MapError, MazeParams, ParamValue, Sampled};
use crate::geometry::{Segment, Vec2};
use crate::rng::SeededRng;

/// Interior wall between two cells, identified by the lower cell index and orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Wall {
    pub cell: usize,
    /// `true` for the wall between `cell` and its right neighbour, `false` for the one above.
    pub east: bool,
}

/// Cell-level maze: which interior walls are still standing.
#[derive(Debug, Clone, PartialEq)]
pub struct MazeCells {
    pub cols: usize,
    pub rows: usize,
    /// Indexed by `2 * cell + (east as usize)`.
    pub standing: Vec<bool>,
    pub removed_walls: usize,
}

impl MazeCells {
    pub fn cell(&self, x: usize, y: usize) -> usize {
        y * self.cols + x
    }

    pub fn is_standing(&self, w: Wall) -> bool {
        self.standing[2 * w.cell + w.east as usize]
    }

    pub fn interior_walls(&self) -> Vec<Wall> {
        let mut out = Vec::new();
        for y in 0..self.rows {
            for x in 0..self.cols {
                let cell = self.cell(x, y);
                if x + 1 < self.cols {
                    out.push(Wall { cell, east: true });
                }
                if y + 1 < self.rows {
                    out.push(Wall { cell, east: false });
                }
            }
        }
        out
    }

    pub fn open_passages(&self) -> usize {
        self.interior_walls().iter().filter(|w| !self.is_standing(**w)).count()
    }
}

/// Randomized Prim's spanning tree over a `cols × rows` grid, then removes
/// `round(rate × remaining interior walls)` more walls at random.
pub fn carve(cols: usize, rows: usize, rate: f64, rng: &mut SeededRng) -> MazeCells {
    let n = cols * rows;
    let mut m = MazeCells {
        cols,
        rows,
        standing: vec![false; 2 * n],
        removed_walls: 0,
    };
    for w in m.interior_walls() {
        m.standing[2 * w.cell + w.east as usize] = true;
    }
    let mut in_maze = vec![false; n];
    let mut frontier: Vec<(Wall, usize)> = Vec::new();
    let push_walls = |c: usize, frontier: &mut Vec<(Wall, usize)>, in_maze: &[bool]| {
        let (x, y) = (c % cols, c / cols);
        let mut add = |w: Wall, other: usize| {
            if !in_maze[other] {
                frontier.push((w, other));
            }
        };
        if x + 1 < cols {
            add(Wall { cell: c, east: true }, c + 1);
        }
        if x > 0 {
            add(Wall { cell: c - 1, east: true }, c - 1);
        }
        if y + 1 < rows {
            add(Wall { cell: c, east: false }, c + cols);
        }
        if y > 0 {
            add(Wall { cell: c - cols, east: false }, c - cols);
        }
    };
    let start = rng.below(n as u64) as usize;
    in_maze[start] = true;
    push_walls(start, &mut frontier, &in_maze);
    while !frontier.is_empty() {
        let i = rng.below(frontier.len() as u64) as usize;
        let (w, other) = frontier.swap_remove(i);
        if in_maze[other] {
            continue;
        }
        m.standing[2 * w.cell + w.east as usize] = false;
        in_maze[other] = true;
        push_walls(other, &mut frontier, &in_maze);
    }
    let mut remaining: Vec<Wall> = m.interior_walls().into_iter().filter(|w| m.is_standing(*w)).collect();
    let k = (rate * remaining.len() as f64).round() as usize;
    rng.shuffle(&mut remaining);
    for w in &remaining[..k] {
        m.standing[2 * w.cell + w.east as usize] = false;
    }
    m.removed_walls = k;
    m
}

/// Metric placement of a cell maze inside a square world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MazeLayout {
    pub cols: usize,
    pub rows: usize,
    /// Corridor width plus wall thickness.
    pub pitch: f64,
    pub thickness: f64,
    /// Lower-left corner of the outer maze wall.
    pub origin: f64,
}

impl MazeLayout {
    pub fn fit(world: f64, spacing: f64, thickness: f64) -> Result<Self, MapError> {
        let pitch = spacing + thickness;
        let n = ((world - thickness) / pitch + 1e-9).floor();
        if n < 2.0 {
            return Err(MapError::InfeasibleDims(format!(
                "fewer than 2x2 maze cells fit (pitch {pitch:.3} m in {world:.3} m)"
            )));
        }
        let n = n as usize;
        Ok(Self {
            cols: n,
            rows: n,
            pitch,
            thickness,
            origin: (world - (n as f64 * pitch + thickness)) / 2.0,
        })
    }

    pub fn cell_center(&self, x: usize, y: usize) -> Vec2 {
        let c = |i: usize| self.origin + self.thickness + i as f64 * self.pitch + (self.pitch - self.thickness) / 2.0;
        Vec2::new(c(x), c(y))
    }

    /// Start coordinate of lattice block `k` (even = wall line, odd = corridor).
    fn block_start(&self, k: usize) -> f64 {
        self.origin + (k / 2) as f64 * self.pitch + if k % 2 == 1 { self.thickness } else { 0.0 }
    }

    fn block_end(&self, k: usize) -> f64 {
        self.block_start(k) + if k % 2 == 0 { self.thickness } else { self.pitch - self.thickness }
    }

    /// Wall rectangles as merged runs over the `(2c+1) × (2r+1)` block lattice.
    pub fn wall_rects(&self, cells: &MazeCells) -> Vec<(Vec2, Vec2)> {
        let (bw, bh) = (2 * self.cols + 1, 2 * self.rows + 1);
        // Wall piece between two cells along a lattice line; boundary pieces always stand.
        let piece = |bx: usize, by: usize| -> bool {
            if bx % 2 == 0 && by % 2 == 1 {
                let (x, y) = (bx / 2, by / 2);
                x == 0 || x == self.cols || cells.is_standing(Wall { cell: cells.cell(x - 1, y), east: true })
            } else if bx % 2 == 1 && by % 2 == 0 {
                let (x, y) = (bx / 2, by / 2);
                y == 0 || y == self.rows || cells.is_standing(Wall { cell: cells.cell(x, y - 1), east: false })
            } else {
                false
            }
        };
        let post = |bx: usize, by: usize| -> bool {
            (bx > 0 && piece(bx - 1, by))
                || (bx + 1 < bw && piece(bx + 1, by))
                || (by > 0 && piece(bx, by - 1))
                || (by + 1 < bh && piece(bx, by + 1))
        };
        let solid = |bx: usize, by: usize| if bx % 2 == 0 && by % 2 == 0 { post(bx, by) } else { piece(bx, by) };

        let mut rects = Vec::new();
        for horizontal in [true, false] {
            let (lines, len) = if horizontal { (bh, bw) } else { (bw, bh) };
            for line in (0..lines).step_by(2) {
                let at = |k: usize| if horizontal { solid(k, line) } else { solid(line, k) };
                let mut k = 0;
                while k < len {
                    if !at(k) {
                        k += 1;
                        continue;
                    }
                    let start = k;
                    while k < len && at(k) {
                        k += 1;
                    }
                    // A lone post is covered by the run in the other direction.
                    if k - start == 1 {
                        continue;
                    }
                    let (a0, a1) = (self.block_start(start), self.block_end(k - 1));
                    let (b0, b1) = (self.block_start(line), self.block_end(line));
                    rects.push(if horizontal {
                        (Vec2::new(a0, b0), Vec2::new(a1, b1))
                    } else {
                        (Vec2::new(b0, a0), Vec2::new(b1, a1))
                    });
                }
            }
        }
        rects
    }
}

pub fn rect_segments(lo: Vec2, hi: Vec2) -> [Segment; 4] {
    let c = [lo, Vec2::new(hi.x, lo.y), hi, Vec2::new(lo.x, hi.y)];
    [
        Segment::new(c[0], c[1]),
        Segment::new(c[1], c[2]),
        Segment::new(c[2], c[3]),
        Segment::new(c[3], c[0]),
    ]
}

pub(super) fn generate_maze(
    cfg: &GeneratorConfig,
    p: &MazeParams,
    s: Sampled,
    rng: &mut SeededRng,
) -> Result<Map, MapError> {
    let thickness = rng.uniform(p.wall_thickness_range.0, p.wall_thickness_range.1);
    let layout = MazeLayout::fit(s.world_size, s.spacing, thickness)?;
    let cells = carve(layout.cols, layout.rows, p.wall_removal_rate, rng);

    let mut map = Map::empty(s.world_size, Vec::new());
    for (lo, hi) in layout.wall_rects(&cells) {
        map.segments.extend(rect_segments(lo, hi));
    }
    let index = map.spatial_index();
    map.nodes = place_nodes(
        cfg.node_count,
        cfg.node_radius,
        &index,
        rng,
        |rng| {
            let x = rng.below(layout.cols as u64) as usize;
            let y = rng.below(layout.rows as u64) as usize;
            Some(layout.cell_center(x, y))
        },
        |_| false,
    )?;
    let rp = &mut map.resolved_params;
    rp.insert("spacing".into(), ParamValue::Num(s.spacing));
    rp.insert("wall_thickness".into(), ParamValue::Num(thickness));
    rp.insert("cols".into(), ParamValue::Int(layout.cols as i64));
    rp.insert("rows".into(), ParamValue::Int(layout.rows as i64));
    rp.insert("cell_pitch".into(), ParamValue::Num(layout.pitch));
    rp.insert("origin_offset".into(), ParamValue::Num(layout.origin));
    rp.insert("wall_removal_rate".into(), ParamValue::Num(p.wall_removal_rate));
    rp.insert("removed_walls".into(), ParamValue::Int(cells.removed_walls as i64));
    Ok(map)
}

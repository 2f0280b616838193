use std::io::Write;

use crate::geometry::{CircleObstacle, Segment, Vec2};
use crate::mapgen::Map;

const EPS: f64 = 1e-9;

/// Boolean occupancy over square cells; cell `(x, y)` covers
/// `[origin + x*res, origin + (x+1)*res] x [origin + y*res, origin + (y+1)*res]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub origin: Vec2,
    pub occupied: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(resolution: f64, width: usize, height: usize, origin: Vec2) -> Self {
        assert!(resolution > 0.0);
        Self {
            resolution,
            width,
            height,
            origin,
            occupied: vec![false; width * height],
        }
    }

    /// Grid covering a square world of side `world_size` anchored at the origin.
    pub fn for_world(world_size: f64, resolution: f64) -> Self {
        let n = cells_for(world_size, resolution);
        Self::new(resolution, n, n, Vec2::ZERO)
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    pub fn center(&self, idx: usize) -> Vec2 {
        let (x, y) = self.coords(idx);
        self.origin + Vec2::new((x as f64 + 0.5) * self.resolution, (y as f64 + 0.5) * self.resolution)
    }

    pub fn cell_of(&self, p: Vec2) -> Option<usize> {
        let gx = ((p.x - self.origin.x) / self.resolution).floor();
        let gy = ((p.y - self.origin.y) / self.resolution).floor();
        if gx < 0.0 || gy < 0.0 || gx >= self.width as f64 || gy >= self.height as f64 {
            return None;
        }
        Some(self.index(gx as usize, gy as usize))
    }

    pub fn is_free(&self, idx: usize) -> bool {
        !self.occupied[idx]
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|o| **o).count()
    }

    /// The free cell whose center is nearest to `p` within `radius`
    /// (the containing cell when it is free). Ties resolve to the lower index.
    pub fn snap_free(&self, p: Vec2, radius: f64) -> Option<usize> {
        if let Some(c) = self.cell_of(p) {
            if self.is_free(c) {
                return Some(c);
            }
        }
        let r = self.resolution;
        let gx = (p.x - self.origin.x) / r;
        let gy = (p.y - self.origin.y) / r;
        let span = (radius / r).ceil() + 1.0;
        let x0 = (gx - span).floor().max(0.0) as usize;
        let y0 = (gy - span).floor().max(0.0) as usize;
        let x1 = ((gx + span).ceil().max(0.0) as usize).min(self.width.saturating_sub(1));
        let y1 = ((gy + span).ceil().max(0.0) as usize).min(self.height.saturating_sub(1));
        let mut best: Option<(f64, usize)> = None;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let i = self.index(x, y);
                if self.occupied[i] {
                    continue;
                }
                let d = self.center(i).distance(p);
                if d <= radius && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, i));
                }
            }
        }
        best.map(|(_, i)| i)
    }

    fn mark_segment(&mut self, s: &Segment) {
        let r = self.resolution;
        let a = (s.a - self.origin) * (1.0 / r);
        let b = (s.b - self.origin) * (1.0 / r);
        let (xmin, xmax) = (a.x.min(b.x), a.x.max(b.x));
        let col_lo = ((xmin - EPS).ceil() - 1.0).max(0.0) as i64;
        let col_hi = ((xmax + EPS).floor() as i64).min(self.width as i64 - 1);
        let dx = b.x - a.x;
        for col in col_lo..=col_hi {
            let (ylo, yhi) = if dx.abs() < 1e-12 {
                (a.y.min(b.y), a.y.max(b.y))
            } else {
                let x0 = (col as f64).max(xmin);
                let x1 = ((col + 1) as f64).min(xmax);
                let y_at = |x: f64| a.y + (x - a.x) * (b.y - a.y) / dx;
                let (u, v) = (y_at(x0), y_at(x1));
                (u.min(v), u.max(v))
            };
            let row_lo = ((ylo - EPS).ceil() - 1.0).max(0.0) as i64;
            let row_hi = ((yhi + EPS).floor() as i64).min(self.height as i64 - 1);
            for row in row_lo..=row_hi {
                let i = self.index(col as usize, row as usize);
                self.occupied[i] = true;
            }
        }
    }

    fn mark_circle(&mut self, c: &CircleObstacle) {
        let r = self.resolution;
        let bb = c.bbox();
        let x0 = (((bb.min.x - self.origin.x) / r).floor() - 1.0).max(0.0) as usize;
        let y0 = (((bb.min.y - self.origin.y) / r).floor() - 1.0).max(0.0) as usize;
        let x1 = ((((bb.max.x - self.origin.x) / r).floor() + 1.0).max(0.0) as usize).min(self.width - 1);
        let y1 = ((((bb.max.y - self.origin.y) / r).floor() + 1.0).max(0.0) as usize).min(self.height - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let lo = self.origin + Vec2::new(x as f64 * r, y as f64 * r);
                let hi = lo + Vec2::new(r, r);
                let q = Vec2::new(c.center.x.clamp(lo.x, hi.x), c.center.y.clamp(lo.y, hi.y));
                if q.distance(c.center) <= c.radius + EPS {
                    let i = self.index(x, y);
                    self.occupied[i] = true;
                }
            }
        }
    }

    /// Writes the grid as a binary PGM (occupied black, free white), top row first.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        let mut row = vec![0u8; self.width];
        for y in (0..self.height).rev() {
            for (x, px) in row.iter_mut().enumerate() {
                *px = if self.occupied[self.index(x, y)] { 0 } else { 255 };
            }
            out.write_all(&row)?;
        }
        Ok(())
    }
}

/// Cells per side for a world of side `world_size`.
pub fn cells_for(world_size: f64, resolution: f64) -> usize {
    ((world_size / resolution) - EPS).ceil().max(1.0) as usize
}

/// Conservative rasterization: every cell whose closed square touches any
/// obstacle is occupied.
pub fn rasterize(map: &Map, resolution: f64) -> OccupancyGrid {
    let mut grid = OccupancyGrid::for_world(map.world_size, resolution);
    for s in &map.segments {
        grid.mark_segment(s);
    }
    for c in &map.circles {
        grid.mark_circle(c);
    }
    grid
}

/// Occupancy dilated by a Euclidean radius.
#[derive(Debug, Clone, PartialEq)]
pub struct InflatedGrid {
    pub base: OccupancyGrid,
    pub grid: OccupancyGrid,
    pub inflation_radius: f64,
}

/// Squared Euclidean distance transform (Felzenszwalb-Huttenlocher) in cell
/// units, measured between cell centers.
pub fn squared_distance_transform(grid: &OccupancyGrid) -> Vec<f64> {
    let (w, h) = (grid.width, grid.height);
    // Exceeds every real squared distance while keeping integer arithmetic exact.
    let inf = 2.0 * ((w + h) as f64).powi(2);
    let mut d: Vec<f64> = grid.occupied.iter().map(|o| if *o { 0.0 } else { inf }).collect();
    let mut f = vec![0.0; w.max(h)];
    let mut out = vec![0.0; w.max(h)];
    let mut v = vec![0usize; w.max(h)];
    let mut z = vec![0.0; w.max(h) + 1];
    for x in 0..w {
        for y in 0..h {
            f[y] = d[y * w + x];
        }
        edt_1d(&f[..h], &mut out[..h], &mut v, &mut z);
        for y in 0..h {
            d[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        f[..w].copy_from_slice(&d[y * w..(y + 1) * w]);
        edt_1d(&f[..w], &mut out[..w], &mut v, &mut z);
        d[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
    }
    d
}

fn edt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let meet = |q: usize, p: usize| ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s = meet(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = meet(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, dq) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dx = q as f64 - v[k] as f64;
        *dq = dx * dx + f[v[k]];
    }
}

/// Marks every cell whose center lies within `radius` of an occupied cell center.
pub fn inflate(grid: &OccupancyGrid, radius: f64) -> InflatedGrid {
    assert!(radius >= 0.0);
    let mut out = grid.clone();
    if radius > 0.0 && grid.occupied.iter().any(|o| *o) {
        let r_cells = radius / grid.resolution;
        let limit = r_cells * r_cells + 1e-9;
        let d = squared_distance_transform(grid);
        for (o, d) in out.occupied.iter_mut().zip(&d) {
            *o = *d <= limit;
        }
    }
    InflatedGrid {
        base: grid.clone(),
        grid: out,
        inflation_radius: radius,
    }
}

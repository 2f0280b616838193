use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::grid::OccupancyGrid;

/// Octile path cost as exact move counts; the metric value is
/// `straight + diagonal * sqrt(2)` cells. Distinct counts never compare
/// equal because sqrt(2) is irrational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct GridCost {
    pub straight: u32,
    pub diagonal: u32,
}

impl GridCost {
    pub fn value(self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }

    fn add(self, diagonal: bool) -> GridCost {
        if diagonal {
            GridCost {
                diagonal: self.diagonal + 1,
                ..self
            }
        } else {
            GridCost {
                straight: self.straight + 1,
                ..self
            }
        }
    }
}

/// Octile distance in cells between two grid indices.
pub fn octile(grid: &OccupancyGrid, a: usize, b: usize) -> f64 {
    let (ax, ay) = grid.coords(a);
    let (bx, by) = grid.coords(b);
    let dx = ax.abs_diff(bx) as f64;
    let dy = ay.abs_diff(by) as f64;
    dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy)
}

/// 8-neighbours of `idx`; a diagonal move needs both adjacent orthogonal cells free.
pub fn neighbors(grid: &OccupancyGrid, idx: usize, out: &mut Vec<(usize, bool)>) {
    out.clear();
    let (x, y) = grid.coords(idx);
    let (w, h) = (grid.width as i64, grid.height as i64);
    let free = |cx: i64, cy: i64| cx >= 0 && cy >= 0 && cx < w && cy < h && !grid.occupied[(cy * w + cx) as usize];
    let (x, y) = (x as i64, y as i64);
    for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
        if free(x + dx, y + dy) {
            out.push((((y + dy) * w + x + dx) as usize, false));
        }
    }
    for (dx, dy) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
        if free(x + dx, y + dy) && free(x + dx, y) && free(x, y + dy) {
            out.push((((y + dy) * w + x + dx) as usize, true));
        }
    }
}

#[derive(Debug, PartialEq)]
struct Open {
    f: f64,
    h: f64,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    // Reversed so the max-heap pops the lexicographically smallest (f, h, idx).
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f)
            .then_with(|| o.h.total_cmp(&self.h))
            .then_with(|| o.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// A* over free cells; returns the cell sequence and its cost, or `None`.
pub fn astar_cells(grid: &OccupancyGrid, start: usize, goal: usize) -> Option<(Vec<usize>, GridCost)> {
    if grid.occupied[start] || grid.occupied[goal] {
        return None;
    }
    let n = grid.width * grid.height;
    let mut g: Vec<f64> = vec![f64::INFINITY; n];
    let mut cost = vec![GridCost::default(); n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut nbrs = Vec::with_capacity(8);
    g[start] = 0.0;
    let h0 = octile(grid, start, goal);
    heap.push(Open { f: h0, h: h0, idx: start });
    while let Some(Open { idx, .. }) = heap.pop() {
        if closed[idx] {
            continue;
        }
        if idx == goal {
            let mut cells = vec![goal];
            let mut c = goal;
            while c != start {
                c = parent[c];
                cells.push(c);
            }
            cells.reverse();
            return Some((cells, cost[goal]));
        }
        closed[idx] = true;
        neighbors(grid, idx, &mut nbrs);
        for &(nb, diag) in &nbrs {
            if closed[nb] {
                continue;
            }
            let nc = cost[idx].add(diag);
            let ng = nc.value();
            if ng < g[nb] {
                g[nb] = ng;
                cost[nb] = nc;
                parent[nb] = idx;
                let h = octile(grid, nb, goal);
                heap.push(Open { f: ng + h, h, idx: nb });
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;

    #[test]
    fn open_grid_diagonal_cost() {
        let g = OccupancyGrid::new(1.0, 10, 10, Vec2::ZERO);
        let (cells, c) = astar_cells(&g, g.index(0, 0), g.index(9, 4)).unwrap();
        assert_eq!(c, GridCost { straight: 5, diagonal: 4 });
        assert_eq!(cells.len(), 10);
    }

    #[test]
    fn corner_cutting_is_forbidden() {
        let mut g = OccupancyGrid::new(1.0, 3, 3, Vec2::ZERO);
        let b = g.index(1, 0);
        g.occupied[b] = true;
        let (_, c) = astar_cells(&g, g.index(0, 0), g.index(1, 1)).unwrap();
        assert_eq!(c, GridCost { straight: 2, diagonal: 0 });
    }

    #[test]
    fn blocked_returns_none() {
        let mut g = OccupancyGrid::new(1.0, 5, 5, Vec2::ZERO);
        for y in 0..5 {
            let i = g.index(2, y);
            g.occupied[i] = true;
        }
        assert!(astar_cells(&g, g.index(0, 0), g.index(4, 4)).is_none());
    }
}

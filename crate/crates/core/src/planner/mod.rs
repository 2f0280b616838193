//! Occupancy rasterization, inflation, grid A* and path sampling.

mod astar;
mod grid;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{Vec2, ROBOT_RADIUS};
use crate::mapgen::Map;

pub use astar::{astar_cells, neighbors, octile, GridCost};
pub use grid::{cells_for, inflate, rasterize, squared_distance_transform, InflatedGrid, OccupancyGrid};

pub const DEFAULT_RESOLUTION: f64 = 0.05;
pub const DEFAULT_INFLATION: f64 = ROBOT_RADIUS;
/// Start/goal positions on occupied cells snap to free space within this radius.
pub const SNAP_RADIUS: f64 = 0.3;
/// Arc-length spacing of subgoal waypoints.
pub const SUBGOAL_SPACING: f64 = 0.5;
pub const SUBGOAL_COUNT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("no path between start and goal")]
    NoPath,
    #[error("{0} has no free cell within snapping radius")]
    SnapFailed(Endpoint),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Start,
    Goal,
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Endpoint::Start => "start",
            Endpoint::Goal => "goal",
        })
    }
}

/// Rasterizes and inflates a map with the default planning parameters.
pub fn planning_grid(map: &Map) -> InflatedGrid {
    inflate(&rasterize(map, DEFAULT_RESOLUTION), DEFAULT_INFLATION)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannedPath {
    pub waypoints: Vec<Vec2>,
    pub length: f64,
    #[serde(skip)]
    pub grid_cost: GridCost,
}

impl PlannedPath {
    pub fn from_waypoints(waypoints: Vec<Vec2>) -> Self {
        assert!(!waypoints.is_empty(), "path needs at least one waypoint");
        let length = waypoints.windows(2).map(|w| w[0].distance(w[1])).sum();
        Self {
            waypoints,
            length,
            grid_cost: GridCost::default(),
        }
    }

    pub fn start(&self) -> Vec2 {
        self.waypoints[0]
    }

    pub fn goal(&self) -> Vec2 {
        *self.waypoints.last().expect("nonempty path")
    }

    /// Closest point on the polyline to `p` as `(arc_length, point)`.
    /// Ties resolve to the smaller arc length.
    pub fn project(&self, p: Vec2) -> (f64, Vec2) {
        if self.waypoints.len() == 1 {
            return (0.0, self.waypoints[0]);
        }
        let mut best = (f64::INFINITY, 0.0, self.waypoints[0]);
        let mut s = 0.0;
        for w in self.waypoints.windows(2) {
            let d = w[1] - w[0];
            let len = d.norm();
            let t = if len > 0.0 {
                ((p - w[0]).dot(d) / (len * len)).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let q = w[0] + d * t;
            let dist = q.distance(p);
            if dist < best.0 {
                best = (dist, s + t * len, q);
            }
            s += len;
        }
        (best.1, best.2)
    }

    /// Point at arc length `s`, clamped to the endpoints.
    pub fn point_at(&self, s: f64) -> Vec2 {
        if s <= 0.0 {
            return self.waypoints[0];
        }
        let mut acc = 0.0;
        for w in self.waypoints.windows(2) {
            let len = w[0].distance(w[1]);
            if acc + len >= s && len > 0.0 {
                return w[0].lerp(w[1], (s - acc) / len);
            }
            acc += len;
        }
        self.goal()
    }

    /// Polyline as a JSON array of `[x, y]` pairs.
    pub fn to_json(&self) -> String {
        let pts: Vec<[f64; 2]> = self.waypoints.iter().map(|p| [p.x, p.y]).collect();
        serde_json::json!({ "length": self.length, "waypoints": pts }).to_string()
    }
}

/// Minimum-cost 8-connected path under the octile metric.
pub fn plan(grid: &InflatedGrid, start: Vec2, goal: Vec2) -> Result<PlannedPath, PlanError> {
    let g = &grid.grid;
    let s = g.snap_free(start, SNAP_RADIUS).ok_or(PlanError::SnapFailed(Endpoint::Start))?;
    let t = g.snap_free(goal, SNAP_RADIUS).ok_or(PlanError::SnapFailed(Endpoint::Goal))?;
    if s == t {
        return Ok(PlannedPath {
            waypoints: vec![goal],
            length: 0.0,
            grid_cost: GridCost::default(),
        });
    }
    let (cells, cost) = astar_cells(g, s, t).ok_or(PlanError::NoPath)?;
    let mut waypoints: Vec<Vec2> = cells.iter().map(|c| g.center(*c)).collect();
    waypoints[0] = start;
    *waypoints.last_mut().expect("nonempty") = goal;
    let mut path = PlannedPath::from_waypoints(waypoints);
    path.grid_cost = cost;
    Ok(path)
}

/// Line-of-sight shortcutting over free cells. Not used by default.
pub fn smooth(path: &PlannedPath, grid: &OccupancyGrid) -> PlannedPath {
    let pts = &path.waypoints;
    if pts.len() < 3 {
        return path.clone();
    }
    let mut out = vec![pts[0]];
    let mut anchor = 0;
    while anchor < pts.len() - 1 {
        let mut next = anchor + 1;
        for j in (anchor + 2..pts.len()).rev() {
            if line_of_sight(grid, pts[anchor], pts[j]) {
                next = j;
                break;
            }
        }
        out.push(pts[next]);
        anchor = next;
    }
    let mut p = PlannedPath::from_waypoints(out);
    p.grid_cost = path.grid_cost;
    p
}

fn line_of_sight(grid: &OccupancyGrid, a: Vec2, b: Vec2) -> bool {
    let steps = (a.distance(b) / (grid.resolution * 0.25)).ceil().max(1.0) as usize;
    (0..=steps).all(|k| {
        let p = a.lerp(b, k as f64 / steps as f64);
        grid.cell_of(p).is_some_and(|c| grid.is_free(c))
    })
}

/// Five direction vectors along the path ahead of `robot`.
///
/// Waypoints sit at 0.5 m arc-length steps past the robot's projection and
/// clamp to the goal. The first vector points from the robot to the first
/// waypoint, the rest between consecutive waypoints; coincident waypoints give
/// zero vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgoalVector {
    pub directions: [Vec2; SUBGOAL_COUNT],
    pub waypoints: [Vec2; SUBGOAL_COUNT],
}

impl SubgoalVector {
    pub fn flat(&self) -> [f64; 2 * SUBGOAL_COUNT] {
        let mut out = [0.0; 2 * SUBGOAL_COUNT];
        for (i, d) in self.directions.iter().enumerate() {
            out[2 * i] = d.x;
            out[2 * i + 1] = d.y;
        }
        out
    }
}

pub fn resample_subgoals(path: &PlannedPath, robot: Vec2) -> SubgoalVector {
    let (s0, _) = path.project(robot);
    let mut waypoints = [Vec2::ZERO; SUBGOAL_COUNT];
    for (k, w) in waypoints.iter_mut().enumerate() {
        *w = path.point_at(s0 + SUBGOAL_SPACING * (k + 1) as f64);
    }
    let mut directions = [Vec2::ZERO; SUBGOAL_COUNT];
    directions[0] = (waypoints[0] - robot).normalized_or_zero();
    for k in 1..SUBGOAL_COUNT {
        let d = waypoints[k] - waypoints[k - 1];
        directions[k] = if d.norm() > 1e-9 { d.normalized_or_zero() } else { Vec2::ZERO };
    }
    SubgoalVector { directions, waypoints }
}

/// Point `distance` ahead of the robot's projection onto the path, clamped to the goal.
pub fn lookahead_point(path: &PlannedPath, robot: Vec2, distance: f64) -> Vec2 {
    debug_assert!(distance > 0.0);
    let (s0, _) = path.project(robot);
    path.point_at(s0 + distance)
}

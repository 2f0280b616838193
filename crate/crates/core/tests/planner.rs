mod common;

use lidarnav::geometry::{CircleObstacle, Segment, Vec2};
use lidarnav::mapgen::Map;
use lidarnav::planner::{
    astar_cells, inflate, plan, planning_grid, rasterize, resample_subgoals, OccupancyGrid, PlanError, PlannedPath,
};
use lidarnav::rng::SeededRng;
use proptest::prelude::*;

fn check_cell_path(grid: &OccupancyGrid, cells: &[usize]) -> (i64, i64) {
    let (mut s, mut d) = (0, 0);
    for w in cells.windows(2) {
        let (ax, ay) = grid.coords(w[0]);
        let (bx, by) = grid.coords(w[1]);
        let (dx, dy) = (bx as i64 - ax as i64, by as i64 - ay as i64);
        assert!(dx.abs() <= 1 && dy.abs() <= 1 && (dx, dy) != (0, 0), "non-adjacent step");
        assert!(grid.is_free(w[1]));
        if dx != 0 && dy != 0 {
            assert!(grid.is_free(grid.index(bx, ay)) && grid.is_free(grid.index(ax, by)), "corner cut");
            d += 1;
        } else {
            s += 1;
        }
    }
    (s, d)
}

#[test]
fn astar_cost_equals_dijkstra_on_random_grids() {
    let mut found = 0;
    for g in 0..50u64 {
        let mut rng = SeededRng::derived(3, "grid", g);
        let mut grid = common::random_grid(&mut rng, 64, 64, 0.3);
        let start = grid.index(rng.below(64) as usize, rng.below(64) as usize);
        let goal = grid.index(rng.below(64) as usize, rng.below(64) as usize);
        if g % 5 != 0 {
            grid.occupied[start] = false;
            grid.occupied[goal] = false;
        }
        let ours = astar_cells(&grid, start, goal);
        let oracle = common::dijkstra(&grid, start, goal);
        match (ours, oracle) {
            (Some((cells, cost)), Some(o)) => {
                found += 1;
                assert_eq!((cost.straight as i64, cost.diagonal as i64), (o.straight, o.diagonal), "grid {g}");
                assert_eq!(check_cell_path(&grid, &cells), (o.straight, o.diagonal));
                assert_eq!((cells[0], *cells.last().unwrap()), (start, goal));
            }
            (None, None) => {}
            (a, b) => panic!("grid {g}: astar {:?} vs oracle {:?}", a.map(|x| x.1), b),
        }
    }
    assert!(found >= 10, "too few reachable pairs: {found}");
}

#[test]
fn diagonal_squeeze_is_blocked() {
    // two occupied cells touching at a corner: no diagonal passage between them
    let mut g = OccupancyGrid::new(1.0, 2, 2, Vec2::ZERO);
    g.occupied[1] = true;
    g.occupied[2] = true;
    assert!(astar_cells(&g, g.index(0, 0), g.index(1, 1)).is_none());
    assert!(common::dijkstra(&g, g.index(0, 0), g.index(1, 1)).is_none());
}

#[test]
fn blocked_endpoint_is_no_path() {
    let mut g = OccupancyGrid::new(1.0, 4, 4, Vec2::ZERO);
    g.occupied[5] = true;
    assert!(astar_cells(&g, 5, 0).is_none());
    assert!(astar_cells(&g, 0, 5).is_none());
}

#[test]
fn l_shaped_path_arc_length() {
    let p = PlannedPath::from_waypoints(vec![Vec2::new(0.0, 0.0), Vec2::new(3.0, 0.0), Vec2::new(3.0, 4.0)]);
    assert_eq!(p.length, 7.0);
    assert_eq!(p.point_at(5.0), Vec2::new(3.0, 2.0));
    assert_eq!(p.point_at(99.0), Vec2::new(3.0, 4.0));
    let (s, q) = p.project(Vec2::new(4.0, 1.0));
    assert_eq!((s, q), (4.0, Vec2::new(3.0, 1.0)));
    let sg = resample_subgoals(&p, Vec2::new(2.5, 0.0));
    assert_eq!(sg.waypoints[0], Vec2::new(3.0, 0.0));
    assert_eq!(sg.waypoints[1], Vec2::new(3.0, 0.5));
    assert_eq!(sg.directions[1], Vec2::new(0.0, 1.0));
}

#[test]
fn planned_length_matches_polyline_and_grid_cost() {
    let mut map = Map::empty(6.0, vec![]);
    map.segments.push(Segment::new(Vec2::new(3.0, 0.0), Vec2::new(3.0, 4.0)));
    let grid = planning_grid(&map);
    let (a, b) = (Vec2::new(1.025, 1.025), Vec2::new(4.975, 1.025));
    let p = plan(&grid, a, b).unwrap();
    let poly: f64 = p.waypoints.windows(2).map(|w| w[0].distance(w[1])).sum();
    assert!((p.length - poly).abs() < 1e-9);
    // endpoints sit at cell centers, so the polyline is exactly the octile cost
    assert!((p.length - p.grid_cost.value() * 0.05).abs() < 1e-9);
    // the detour goes around the wall end, above y = 4 + inflation
    assert!(p.waypoints.iter().any(|w| w.y > 4.2));
}

#[test]
fn enclosed_goal_reports_no_path() {
    let mut map = Map::empty(6.0, vec![]);
    let (lo, hi) = (Vec2::new(3.5, 3.5), Vec2::new(5.5, 5.5));
    for s in lidarnav::mapgen::maze::rect_segments(lo, hi) {
        map.segments.push(s);
    }
    let grid = planning_grid(&map);
    assert_eq!(plan(&grid, Vec2::new(1.0, 1.0), Vec2::new(4.5, 4.5)), Err(PlanError::NoPath));
}

#[test]
fn rasterization_is_exact_supercover() {
    let mut rng = SeededRng::new(21);
    for _ in 0..40 {
        let size = rng.uniform(2.0, 5.0);
        let (segs, circles) = common::random_scene(&mut rng, size, 6, 3);
        let mut map = Map::empty(size, vec![]);
        map.segments.extend(segs);
        map.circles.extend(circles);
        let res = rng.uniform(0.04, 0.2);
        let grid = rasterize(&map, res);
        for i in 0..grid.occupied.len() {
            let (x, y) = grid.coords(i);
            let lo = Vec2::new(x as f64 * res, y as f64 * res);
            let hi = lo + Vec2::new(res, res);
            // a tiny margin on both sides brackets floating-point ties
            let strict = map.segments.iter().any(|s| common::segment_touches_box(s.a, s.b, lo, hi, -1e-7))
                || map.circles.iter().any(|c| box_circle(lo, hi, c) < c.radius - 1e-7);
            let loose = map.segments.iter().any(|s| common::segment_touches_box(s.a, s.b, lo, hi, 1e-7))
                || map.circles.iter().any(|c| box_circle(lo, hi, c) <= c.radius + 1e-7);
            if strict {
                assert!(grid.occupied[i], "missed cell {x},{y}");
            }
            if !loose {
                assert!(!grid.occupied[i], "extra cell {x},{y}");
            }
        }
    }
}

fn box_circle(lo: Vec2, hi: Vec2, c: &CircleObstacle) -> f64 {
    let q = Vec2::new(c.center.x.clamp(lo.x, hi.x), c.center.y.clamp(lo.y, hi.y));
    q.distance(c.center)
}

#[test]
fn inflation_matches_brute_force_distance() {
    let mut rng = SeededRng::new(8);
    for _ in 0..10 {
        let grid = common::random_grid(&mut rng, 40, 30, 0.03);
        let radius = rng.uniform(0.5, 4.0);
        let inflated = inflate(&grid, radius);
        let occ: Vec<(f64, f64)> = (0..grid.occupied.len())
            .filter(|i| grid.occupied[*i])
            .map(|i| (grid.coords(i).0 as f64, grid.coords(i).1 as f64))
            .collect();
        for i in 0..grid.occupied.len() {
            let (x, y) = (grid.coords(i).0 as f64, grid.coords(i).1 as f64);
            let d = occ.iter().map(|(ox, oy)| ((x - ox).powi(2) + (y - oy).powi(2)).sqrt()).fold(f64::INFINITY, f64::min);
            assert_eq!(inflated.grid.occupied[i], d <= radius + 1e-9, "cell {x},{y} d={d} r={radius}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn astar_optimal_and_valid(seed in 0u64..100_000, w in 2usize..24, h in 2usize..24, p in 0.0f64..0.45) {
        let mut rng = SeededRng::new(seed);
        let grid = common::random_grid(&mut rng, w, h, p);
        let s = rng.below((w * h) as u64) as usize;
        let t = rng.below((w * h) as u64) as usize;
        let ours = astar_cells(&grid, s, t);
        let oracle = common::dijkstra(&grid, s, t);
        prop_assert_eq!(ours.is_some(), oracle.is_some());
        if let (Some((cells, c)), Some(o)) = (ours, oracle) {
            prop_assert_eq!((c.straight as i64, c.diagonal as i64), (o.straight, o.diagonal));
            prop_assert_eq!(check_cell_path(&grid, &cells), (o.straight, o.diagonal));
        }
    }

    #[test]
    fn point_at_lies_on_path_with_matching_projection(s in 0.0f64..12.0) {
        let p = PlannedPath::from_waypoints(vec![Vec2::new(0.0, 0.0), Vec2::new(4.0, 0.0), Vec2::new(4.0, 3.0), Vec2::new(8.0, 6.0)]);
        let q = p.point_at(s);
        let (s2, q2) = p.project(q);
        prop_assert!((q - q2).norm() < 1e-9);
        prop_assert!((s.min(p.length) - s2).abs() < 1e-9);
    }
}

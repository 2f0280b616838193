//! Plans an A* path between two nodes of a generated map and draws it.
//!
//!     cargo run --release --example plan_path -- [generator] [seed]

use lidarnav::geometry::Vec2;
use lidarnav::mapgen::{generate, GeneratorConfig, GeneratorKind};
use lidarnav::planner::{plan, planning_grid, resample_subgoals};

fn main() {
    let mut args = std::env::args().skip(1);
    let kind: GeneratorKind = args.next().map_or(GeneratorKind::Maze, |s| s.parse().expect("generator"));
    let seed: u64 = args.next().map_or(7, |s| s.parse().expect("seed"));
    let map = generate(&GeneratorConfig::default_for(kind), seed).expect("map generates");
    let grid = planning_grid(&map);
    let (start, goal) = (map.nodes[0], map.nodes[1]);
    let path = plan(&grid, start, goal).expect("generated maps are navigable");
    println!(
        "{kind} seed {seed}: world {:.2} m, {} segments, {} circles, path {:.2} m over {} waypoints",
        map.world_size,
        map.segments.len(),
        map.circles.len(),
        path.length,
        path.waypoints.len()
    );
    if let Some(p) = map.param_str("preset") {
        println!("preset {p}");
    }
    let sg = resample_subgoals(&path, start);
    println!("first subgoal directions: {:?}", sg.directions.map(|d| (d.x, d.y)));

    // One character per 0.25 m: '#' occupied, '+' inflated, '*' path, 'S'/'G' endpoints.
    let step = 0.25;
    let n = (map.world_size / step).ceil() as usize;
    let base = &grid.base;
    let mut rows = vec![vec![' '; n]; n];
    for (y, row) in rows.iter_mut().enumerate() {
        for (x, ch) in row.iter_mut().enumerate() {
            let p = Vec2::new((x as f64 + 0.5) * step, (y as f64 + 0.5) * step);
            if let Some(c) = base.cell_of(p) {
                if base.occupied[c] {
                    *ch = '#';
                } else if grid.grid.occupied[c] {
                    *ch = '+';
                }
            }
        }
    }
    let mut mark = |p: Vec2, c: char| {
        let (x, y) = ((p.x / step) as usize, (p.y / step) as usize);
        if x < n && y < n {
            rows[y][x] = c;
        }
    };
    for w in &path.waypoints {
        mark(*w, '*');
    }
    mark(start, 'S');
    mark(goal, 'G');
    for row in rows.iter().rev() {
        println!("{}", row.iter().collect::<String>());
    }
}

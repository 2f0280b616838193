//! Scattered obstacles of mixed shape with a guaranteed pairwise gap.

use super::{place_nodes, GeneratorConfig, Map, MapError, ParamValue, Sampled, SparseParams};
use crate::geometry::{CircleObstacle, Segment, Vec2};
use crate::rng::SeededRng;

/// One placed obstacle.
#[derive(Debug, Clone, PartialEq)]
pub enum SparseShape {
    Circle(CircleObstacle),
    /// Closed outline, convex or not, given by its vertices in order.
    Polygon(Vec<Vec2>),
}

impl SparseShape {
    fn edges(&self) -> Vec<Segment> {
        match self {
            SparseShape::Circle(_) => Vec::new(),
            SparseShape::Polygon(v) => (0..v.len()).map(|i| Segment::new(v[i], v[(i + 1) % v.len()])).collect(),
        }
    }

    /// Smallest coordinate margin to the square `[0, w]²`.
    fn wall_clearance(&self, w: f64) -> f64 {
        let m = |p: Vec2| p.x.min(p.y).min(w - p.x).min(w - p.y);
        match self {
            SparseShape::Circle(c) => m(c.center) - c.radius,
            SparseShape::Polygon(v) => v.iter().map(|p| m(*p)).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        match self {
            SparseShape::Circle(c) => c.center.distance(p) <= c.radius,
            SparseShape::Polygon(v) => point_in_polygon(v, p),
        }
    }

    fn anchor(&self) -> Vec2 {
        match self {
            SparseShape::Circle(c) => c.center,
            SparseShape::Polygon(v) => v[0],
        }
    }

    /// Gap between two shapes; zero when one lies inside the other.
    pub fn clearance(&self, other: &SparseShape) -> f64 {
        if self.contains(other.anchor()) || other.contains(self.anchor()) {
            return 0.0;
        }
        let d = match (self, other) {
            (SparseShape::Circle(a), SparseShape::Circle(b)) => a.center.distance(b.center) - a.radius - b.radius,
            (SparseShape::Circle(c), p @ SparseShape::Polygon(_)) | (p @ SparseShape::Polygon(_), SparseShape::Circle(c)) => {
                p.edges().iter().map(|e| e.distance_to_point(c.center)).fold(f64::INFINITY, f64::min) - c.radius
            }
            (a, b) => {
                let eb = b.edges();
                a.edges()
                    .iter()
                    .flat_map(|x| eb.iter().map(move |y| x.distance_to_segment(y)))
                    .fold(f64::INFINITY, f64::min)
            }
        };
        d.max(0.0)
    }
}

pub fn point_in_polygon(v: &[Vec2], p: Vec2) -> bool {
    let mut inside = false;
    let mut j = v.len() - 1;
    for i in 0..v.len() {
        let (a, b) = (v[i], v[j]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Andrew's monotone chain; counter-clockwise, no collinear points.
fn convex_hull(mut pts: Vec<Vec2>) -> Vec<Vec2> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && (hull[hull.len() - 1] - hull[hull.len() - 2]).cross(p - hull[hull.len() - 2]) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn sample_shape(p: &SparseParams, world: f64, rng: &mut SeededRng) -> SparseShape {
    let r = rng.uniform(p.size_range.0, p.size_range.1);
    let c = Vec2::new(rng.uniform(0.0, world), rng.uniform(0.0, world));
    match rng.weighted(&p.shape_mix) {
        0 => SparseShape::Circle(CircleObstacle::new(c, r)),
        1 => loop {
            let k = rng.range_inclusive(4, 7) as usize;
            let pts: Vec<Vec2> = (0..k)
                .map(|_| {
                    let a = rng.uniform(0.0, std::f64::consts::TAU);
                    c + Vec2::from_angle(a) * (r * rng.uniform(0.5, 1.0))
                })
                .collect();
            let hull = convex_hull(pts);
            if hull.len() >= 3 {
                break SparseShape::Polygon(hull);
            }
        },
        _ => {
            // Star-shaped outline with alternating deep and shallow radii.
            let k = rng.range_inclusive(5, 9) as usize;
            let phase = rng.uniform(0.0, std::f64::consts::TAU);
            let pts = (0..k)
                .map(|i| {
                    let a = phase + std::f64::consts::TAU * (i as f64 + rng.uniform(-0.25, 0.25)) / k as f64;
                    let scale = if i % 2 == 0 { rng.uniform(0.75, 1.0) } else { rng.uniform(0.3, 0.55) };
                    c + Vec2::from_angle(a) * (r * scale)
                })
                .collect();
            SparseShape::Polygon(pts)
        }
    }
}

/// Rejection-samples shapes until `target` are placed or the budget runs out.
pub fn place_shapes(p: &SparseParams, world: f64, spacing: f64, target: usize, rng: &mut SeededRng) -> Vec<SparseShape> {
    let mut shapes: Vec<SparseShape> = Vec::with_capacity(target);
    let budget = 40 * target + 100;
    for _ in 0..budget {
        if shapes.len() >= target {
            break;
        }
        let s = sample_shape(p, world, rng);
        if s.wall_clearance(world) < spacing {
            continue;
        }
        if shapes.iter().all(|o| o.clearance(&s) >= spacing) {
            shapes.push(s);
        }
    }
    shapes
}

pub(super) fn generate_sparse(
    cfg: &GeneratorConfig,
    p: &SparseParams,
    s: Sampled,
    rng: &mut SeededRng,
) -> Result<Map, MapError> {
    let w = s.world_size;
    let density = rng.uniform(p.density_range.0, p.density_range.1);
    let target = (density * w * w).round() as usize;
    let shapes = place_shapes(p, w, s.spacing, target, rng);

    let mut map = Map::empty(w, Vec::new());
    for shape in &shapes {
        match shape {
            SparseShape::Circle(c) => map.circles.push(*c),
            SparseShape::Polygon(_) => map.segments.extend(shape.edges()),
        }
    }
    let index = map.spatial_index();
    let r = cfg.node_radius;
    map.nodes = place_nodes(
        cfg.node_count,
        r,
        &index,
        rng,
        |rng| Some(Vec2::new(rng.uniform(r, w - r), rng.uniform(r, w - r))),
        |q| shapes.iter().any(|s| s.contains(q)),
    )?;
    let rp = &mut map.resolved_params;
    rp.insert("spacing".into(), ParamValue::Num(s.spacing));
    rp.insert("density".into(), ParamValue::Num(density));
    rp.insert("target_obstacles".into(), ParamValue::Int(target as i64));
    rp.insert("placed_obstacles".into(), ParamValue::Int(shapes.len() as i64));
    Ok(map)
}

//! Corridor networks over a Delaunay graph of random seed points.
//!
//! The free region is the union of one rectangle per kept edge and a small
//! 16-gon at every point. Walls are the parts of each polygon outline that do
//! not lie inside another polygon, i.e. the boundary of the union.

use super::{place_nodes, GeneratorConfig, GraphParams, Map, MapError, ParamValue, Sampled};
use crate::geometry::{Segment, Vec2};
use crate::rng::SeededRng;

const VERTEX_SIDES: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNetwork {
    pub points: Vec<Vec2>,
    /// Delaunay edges as `(i, j)` with `i < j`, sorted.
    pub candidate_edges: Vec<(usize, usize)>,
    pub mst_edges: Vec<(usize, usize)>,
    /// MST edges plus the surviving extra edges, sorted.
    pub kept_edges: Vec<(usize, usize)>,
}

pub fn delaunay_edges(points: &[Vec2]) -> Vec<(usize, usize)> {
    let pts: Vec<delaunator::Point> = points.iter().map(|p| delaunator::Point { x: p.x, y: p.y }).collect();
    let tri = delaunator::triangulate(&pts);
    let mut edges: Vec<(usize, usize)> = tri
        .triangles
        .chunks_exact(3)
        .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    edges
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Kruskal over the given edges; ties broken by index pair.
pub fn minimum_spanning_tree(points: &[Vec2], edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut order: Vec<&(usize, usize)> = edges.iter().collect();
    order.sort_by(|a, b| {
        let la = points[a.0].distance(points[a.1]);
        let lb = points[b.0].distance(points[b.1]);
        la.total_cmp(&lb).then(a.cmp(b))
    });
    let mut parent: Vec<usize> = (0..points.len()).collect();
    let mut out = Vec::new();
    for &&(a, b) in &order {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            out.push((a, b));
        }
    }
    out.sort_unstable();
    out
}

/// Connects `points` and keeps each non-tree edge with probability `1 - edge_removal_rate`.
pub fn build_network(points: Vec<Vec2>, edge_removal_rate: f64, rng: &mut SeededRng) -> Result<GraphNetwork, MapError> {
    let candidate_edges = delaunay_edges(&points);
    if candidate_edges.is_empty() {
        return Err(MapError::InfeasibleDims("seed points are degenerate".into()));
    }
    let mst_edges = minimum_spanning_tree(&points, &candidate_edges);
    if mst_edges.len() + 1 != points.len() {
        return Err(MapError::InfeasibleDims("seed points are degenerate".into()));
    }
    let mut kept_edges = Vec::with_capacity(candidate_edges.len());
    for e in &candidate_edges {
        if mst_edges.binary_search(e).is_ok() || rng.chance(1.0 - edge_removal_rate) {
            kept_edges.push(*e);
        }
    }
    Ok(GraphNetwork {
        points,
        candidate_edges,
        mst_edges,
        kept_edges,
    })
}

/// Dart-throwing with a minimum separation; may return fewer than `count` points.
fn sample_points(count: usize, world: f64, margin: f64, min_sep: f64, rng: &mut SeededRng) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = Vec::with_capacity(count);
    for _ in 0..count * 200 {
        if pts.len() == count {
            break;
        }
        let p = Vec2::new(rng.uniform(margin, world - margin), rng.uniform(margin, world - margin));
        if pts.iter().all(|q| q.distance(p) >= min_sep) {
            pts.push(p);
        }
    }
    pts
}

/// Counter-clockwise convex polygons whose union is the corridor network.
pub fn corridor_polygons(net: &GraphNetwork, width: f64) -> Vec<Vec<Vec2>> {
    let h = width / 2.0;
    let mut polys = Vec::new();
    for &(i, j) in &net.kept_edges {
        let (a, b) = (net.points[i], net.points[j]);
        let n = (b - a).normalized_or_zero().perp() * h;
        polys.push(vec![a - n, b - n, b + n, a + n]);
    }
    let circum = h / (std::f64::consts::PI / VERTEX_SIDES as f64).cos();
    for p in &net.points {
        polys.push(
            (0..VERTEX_SIDES)
                .map(|k| *p + Vec2::from_angle(std::f64::consts::TAU * k as f64 / VERTEX_SIDES as f64) * circum)
                .collect(),
        );
    }
    polys
}

/// Parameter interval of `s` lying strictly inside convex CCW polygon `poly`.
fn inside_interval(s: &Segment, poly: &[Vec2]) -> Option<(f64, f64)> {
    const EPS: f64 = 1e-9;
    let d = s.b - s.a;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for k in 0..poly.len() {
        let (q, r) = (poly[k], poly[(k + 1) % poly.len()]);
        let e = r - q;
        let len = e.norm();
        // Outward normal for CCW order.
        let n = Vec2::new(e.y, -e.x) * (1.0 / len);
        // Need n·(a + t d − q) <= −EPS.
        let num = n.dot(s.a - q) + EPS;
        let den = n.dot(d);
        if den.abs() < 1e-15 {
            if num > 0.0 {
                return None;
            }
        } else {
            let t = -num / den;
            if den < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
        if t0 >= t1 {
            return None;
        }
    }
    Some((t0, t1))
}

fn bbox_of(poly: &[Vec2]) -> (Vec2, Vec2) {
    poly.iter().fold(
        (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
        |(lo, hi), p| (Vec2::new(lo.x.min(p.x), lo.y.min(p.y)), Vec2::new(hi.x.max(p.x), hi.y.max(p.y))),
    )
}

/// Boundary of the union of convex polygons as a list of segments.
pub fn union_boundary(polys: &[Vec<Vec2>]) -> Vec<Segment> {
    let boxes: Vec<(Vec2, Vec2)> = polys.iter().map(|p| bbox_of(p)).collect();
    let mut out = Vec::new();
    for (i, poly) in polys.iter().enumerate() {
        for k in 0..poly.len() {
            let s = Segment::new(poly[k], poly[(k + 1) % poly.len()]);
            let (slo, shi) = (
                Vec2::new(s.a.x.min(s.b.x), s.a.y.min(s.b.y)),
                Vec2::new(s.a.x.max(s.b.x), s.a.y.max(s.b.y)),
            );
            let mut cuts: Vec<(f64, f64)> = Vec::new();
            for (j, other) in polys.iter().enumerate() {
                let (lo, hi) = boxes[j];
                if j == i || hi.x < slo.x || lo.x > shi.x || hi.y < slo.y || lo.y > shi.y {
                    continue;
                }
                if let Some(iv) = inside_interval(&s, other) {
                    cuts.push(iv);
                }
            }
            cuts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut t = 0.0;
            let len = s.length();
            let mut emit = |t0: f64, t1: f64| {
                if (t1 - t0) * len > 1e-6 {
                    out.push(Segment::new(s.a.lerp(s.b, t0), s.a.lerp(s.b, t1)));
                }
            };
            for (c0, c1) in cuts {
                if c0 > t {
                    emit(t, c0);
                }
                t = t.max(c1);
            }
            if t < 1.0 {
                emit(t, 1.0);
            }
        }
    }
    out
}

pub(super) fn generate_graph(
    cfg: &GeneratorConfig,
    p: &GraphParams,
    s: Sampled,
    rng: &mut SeededRng,
) -> Result<Map, MapError> {
    let w = s.world_size;
    let width = s.spacing;
    let (lo, hi) = p.seed_point_count_range;
    let count = rng.range_inclusive(lo as u64, hi as u64) as usize;
    let mut pts = sample_points(count, w, width + 0.1, 2.0 * width, rng);
    let remove = (p.point_removal_rate * pts.len() as f64).round() as usize;
    for _ in 0..remove {
        let i = rng.below(pts.len() as u64) as usize;
        pts.remove(i);
    }
    if pts.len() < cfg.node_count.max(3) {
        return Err(MapError::InfeasibleDims(format!(
            "{} seed points survive, need {}",
            pts.len(),
            cfg.node_count.max(3)
        )));
    }
    let net = build_network(pts, p.edge_removal_rate, rng)?;

    let mut map = Map::empty(w, Vec::new());
    map.segments.extend(union_boundary(&corridor_polygons(&net, width)));
    let index = map.spatial_index();
    let points = &net.points;
    map.nodes = place_nodes(
        cfg.node_count,
        cfg.node_radius,
        &index,
        rng,
        |rng| Some(points[rng.below(points.len() as u64) as usize]),
        |_| false,
    )?;
    let rp = &mut map.resolved_params;
    rp.insert("spacing".into(), ParamValue::Num(width));
    rp.insert("seed_points".into(), ParamValue::Int(count as i64));
    rp.insert("surviving_points".into(), ParamValue::Int(net.points.len() as i64));
    rp.insert("candidate_edges".into(), ParamValue::Int(net.candidate_edges.len() as i64));
    rp.insert("kept_edges".into(), ParamValue::Int(net.kept_edges.len() as i64));
    Ok(map)
}

//! Planar primitives, exact ray/shape queries and a uniform-grid spatial index.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Half-extents of the default robot footprint (0.32 m x 0.24 m).
pub const ROBOT_HALF_EXTENTS: (f64, f64) = (0.16, 0.12);

/// Radius of the circle circumscribing the default footprint.
pub const ROBOT_RADIUS: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction, or zero for a (near) zero vector.
    pub fn normalized_or_zero(self) -> Vec2 {
        let n = self.norm();
        if n > 1e-12 {
            self * (1.0 / n)
        } else {
            Vec2::ZERO
        }
    }

    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Counter-clockwise rotation by `theta`.
    pub fn rotated(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec2,
    pub heading: f64,
}

impl Pose {
    pub fn new(position: Vec2, heading: f64) -> Self {
        Self {
            position,
            heading: normalize_angle(heading),
        }
    }

    /// Expresses a world-frame vector in this pose's body frame (x forward, y left).
    pub fn to_body(&self, v: Vec2) -> Vec2 {
        v.rotated(-self.heading)
    }

    pub fn to_world(&self, v: Vec2) -> Vec2 {
        v.rotated(self.heading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        debug_assert!(a != b, "degenerate segment");
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        let d = self.b - self.a;
        let len2 = d.norm_sq();
        if len2 == 0.0 {
            return self.a;
        }
        let t = ((p - self.a).dot(d) / len2).clamp(0.0, 1.0);
        self.a + d * t
    }

    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        self.closest_point(p).distance(p)
    }

    pub fn bbox(&self) -> Aabb {
        Aabb {
            min: Vec2::new(self.a.x.min(self.b.x), self.a.y.min(self.b.y)),
            max: Vec2::new(self.a.x.max(self.b.x), self.a.y.max(self.b.y)),
        }
    }

    /// Ray parameter of the first hit, if any, for a ray `origin + t * dir`.
    pub fn ray_hit(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        let e = self.b - self.a;
        let denom = dir.cross(e);
        let w = self.a - origin;
        if denom.abs() < 1e-15 {
            // Parallel: only a collinear overlap can hit; report the nearest endpoint ahead.
            if w.cross(dir).abs() > 1e-12 {
                return None;
            }
            let ta = (self.a - origin).dot(dir);
            let tb = (self.b - origin).dot(dir);
            let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
            if hi < 0.0 {
                return None;
            }
            return Some(lo.max(0.0));
        }
        let t = w.cross(e) / denom;
        let u = w.cross(dir) / denom;
        if t >= 0.0 && (0.0..=1.0).contains(&u) {
            Some(t)
        } else {
            None
        }
    }

    /// Minimum distance between two segments.
    pub fn distance_to_segment(&self, o: &Segment) -> f64 {
        if segments_intersect(self, o) {
            return 0.0;
        }
        self.distance_to_point(o.a)
            .min(self.distance_to_point(o.b))
            .min(o.distance_to_point(self.a))
            .min(o.distance_to_point(self.b))
    }
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(s: &Segment, t: &Segment) -> bool {
    let d1 = orient(t.a, t.b, s.a);
    let d2 = orient(t.a, t.b, s.b);
    let d3 = orient(s.a, s.b, t.a);
    let d4 = orient(s.a, s.b, t.b);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Vec2, q: Vec2, r: Vec2, d: f64| {
        d == 0.0
            && r.x >= p.x.min(q.x)
            && r.x <= p.x.max(q.x)
            && r.y >= p.y.min(q.y)
            && r.y <= p.y.max(q.y)
    };
    on(t.a, t.b, s.a, d1) || on(t.a, t.b, s.b, d2) || on(s.a, s.b, t.a, d3) || on(s.a, s.b, t.b, d4)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleObstacle {
    pub center: Vec2,
    pub radius: f64,
}

impl CircleObstacle {
    pub fn new(center: Vec2, radius: f64) -> Self {
        debug_assert!(radius > 0.0);
        Self { center, radius }
    }

    pub fn bbox(&self) -> Aabb {
        let r = Vec2::new(self.radius, self.radius);
        Aabb {
            min: self.center - r,
            max: self.center + r,
        }
    }

    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        (self.center.distance(p) - self.radius).max(0.0)
    }

    pub fn ray_hit(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        let m = origin - self.center;
        let c = m.norm_sq() - self.radius * self.radius;
        if c <= 0.0 {
            return Some(0.0);
        }
        let b = m.dot(dir);
        if b > 0.0 {
            return None;
        }
        let disc = b * b - c;
        if disc < 0.0 {
            return None;
        }
        // Numerically stable smaller root: t = c / (-b + sqrt(disc)).
        let q = -b + disc.sqrt();
        Some(c / q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.min.x <= o.max.x && o.min.x <= self.max.x && self.min.y <= o.max.y && o.min.y <= self.max.y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedRect {
    pub center: Vec2,
    pub heading: f64,
    pub half_extents: (f64, f64),
}

impl OrientedRect {
    pub fn new(center: Vec2, heading: f64, half_extents: (f64, f64)) -> Self {
        debug_assert!(half_extents.0 > 0.0 && half_extents.1 > 0.0);
        Self {
            center,
            heading,
            half_extents,
        }
    }

    /// The default robot footprint at `pose`.
    pub fn robot(pose: Pose) -> Self {
        Self::new(pose.position, pose.heading, ROBOT_HALF_EXTENTS)
    }

    pub fn axes(&self) -> (Vec2, Vec2) {
        let u = Vec2::from_angle(self.heading);
        (u, u.perp())
    }

    pub fn corners(&self) -> [Vec2; 4] {
        let (u, v) = self.axes();
        let (hx, hy) = self.half_extents;
        let c = self.center;
        [
            c + u * hx + v * hy,
            c - u * hx + v * hy,
            c - u * hx - v * hy,
            c + u * hx - v * hy,
        ]
    }

    pub fn bbox(&self) -> Aabb {
        let (u, v) = self.axes();
        let (hx, hy) = self.half_extents;
        let ex = (u.x * hx).abs() + (v.x * hy).abs();
        let ey = (u.y * hx).abs() + (v.y * hy).abs();
        Aabb {
            min: self.center - Vec2::new(ex, ey),
            max: self.center + Vec2::new(ex, ey),
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let (u, v) = self.axes();
        let d = p - self.center;
        d.dot(u).abs() <= self.half_extents.0 && d.dot(v).abs() <= self.half_extents.1
    }

    /// Separating-axis test against a closed segment.
    pub fn intersects_segment(&self, s: &Segment) -> bool {
        let (u, v) = self.axes();
        let (hx, hy) = self.half_extents;
        let a = s.a - self.center;
        let b = s.b - self.center;
        for (axis, h) in [(u, hx), (v, hy)] {
            let pa = a.dot(axis);
            let pb = b.dot(axis);
            if pa.min(pb) > h || pa.max(pb) < -h {
                return false;
            }
        }
        let n = (b - a).perp();
        let ps = a.dot(n);
        let r = hx * u.dot(n).abs() + hy * v.dot(n).abs();
        ps.abs() <= r
    }

    /// Closest-point test against a disk.
    pub fn intersects_circle(&self, c: &CircleObstacle) -> bool {
        let (u, v) = self.axes();
        let d = c.center - self.center;
        let lx = d.dot(u).clamp(-self.half_extents.0, self.half_extents.0);
        let ly = d.dot(v).clamp(-self.half_extents.1, self.half_extents.1);
        let closest = u * lx + v * ly;
        (d - closest).norm_sq() <= c.radius * c.radius
    }
}

/// Obstacle set with a uniform-grid broad phase.
///
/// Segment ids are `0..segments.len()`, circle ids follow. Every obstacle is
/// listed in each cell overlapped by its bounding box.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    segments: Vec<Segment>,
    circles: Vec<CircleObstacle>,
    origin: Vec2,
    cell_size: f64,
    cols: usize,
    rows: usize,
    cell_start: Vec<u32>,
    items: Vec<u32>,
}

pub const DEFAULT_INDEX_CELL: f64 = 1.0;

impl SpatialIndex {
    pub fn new(segments: Vec<Segment>, circles: Vec<CircleObstacle>, cell_size: f64) -> Self {
        assert!(cell_size > 0.0);
        let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        let boxes: Vec<Aabb> = segments
            .iter()
            .map(Segment::bbox)
            .chain(circles.iter().map(CircleObstacle::bbox))
            .collect();
        for b in &boxes {
            min = Vec2::new(min.x.min(b.min.x), min.y.min(b.min.y));
            max = Vec2::new(max.x.max(b.max.x), max.y.max(b.max.y));
        }
        if boxes.is_empty() {
            min = Vec2::ZERO;
            max = Vec2::new(cell_size, cell_size);
        }
        let cols = (((max.x - min.x) / cell_size).floor() as usize + 1).max(1);
        let rows = (((max.y - min.y) / cell_size).floor() as usize + 1).max(1);
        let mut index = Self {
            segments,
            circles,
            origin: min,
            cell_size,
            cols,
            rows,
            cell_start: Vec::new(),
            items: Vec::new(),
        };
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); cols * rows];
        for (id, b) in boxes.iter().enumerate() {
            let (c0, r0) = index.cell_of_clamped(b.min);
            let (c1, r1) = index.cell_of_clamped(b.max);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    buckets[r * cols + c].push(id as u32);
                }
            }
        }
        let mut start = Vec::with_capacity(cols * rows + 1);
        let mut items = Vec::new();
        for b in &buckets {
            start.push(items.len() as u32);
            items.extend_from_slice(b);
        }
        start.push(items.len() as u32);
        index.cell_start = start;
        index.items = items;
        index
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn circles(&self) -> &[CircleObstacle] {
        &self.circles
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn obstacle_count(&self) -> usize {
        self.segments.len() + self.circles.len()
    }

    fn cell_of_clamped(&self, p: Vec2) -> (usize, usize) {
        let c = ((p.x - self.origin.x) / self.cell_size).floor();
        let r = ((p.y - self.origin.y) / self.cell_size).floor();
        (
            (c.max(0.0) as usize).min(self.cols - 1),
            (r.max(0.0) as usize).min(self.rows - 1),
        )
    }

    fn cell_items(&self, c: usize, r: usize) -> &[u32] {
        let i = r * self.cols + c;
        &self.items[self.cell_start[i] as usize..self.cell_start[i + 1] as usize]
    }

    /// Candidate obstacle ids whose cells overlap `bbox` (may contain duplicates).
    pub fn candidates(&self, bbox: &Aabb) -> impl Iterator<Item = u32> + '_ {
        let (c0, r0) = self.cell_of_clamped(bbox.min);
        let (c1, r1) = self.cell_of_clamped(bbox.max);
        (r0..=r1).flat_map(move |r| (c0..=c1).flat_map(move |c| self.cell_items(c, r).iter().copied()))
    }

    fn hit_id(&self, id: u32, origin: Vec2, dir: Vec2) -> Option<f64> {
        let id = id as usize;
        if id < self.segments.len() {
            self.segments[id].ray_hit(origin, dir)
        } else {
            self.circles[id - self.segments.len()].ray_hit(origin, dir)
        }
    }

    /// Distance to the first obstacle along the ray, or `max_range` if none.
    pub fn ray_cast(&self, origin: Vec2, direction: Vec2, max_range: f64) -> f64 {
        debug_assert!((direction.norm() - 1.0).abs() < 1e-9);
        let inv = self.cell_size.recip();
        let gx = (origin.x - self.origin.x) * inv;
        let gy = (origin.y - self.origin.y) * inv;
        let mut best = max_range;
        let cols = self.cols as i64;
        let rows = self.rows as i64;

        // Amanatides-Woo traversal in grid units; rays starting outside are advanced to entry.
        let mut t_entry = 0.0f64;
        if !(gx >= 0.0 && gx < cols as f64 && gy >= 0.0 && gy < rows as f64) {
            let mut t0 = 0.0f64;
            let mut t1 = f64::INFINITY;
            for (o, d, n) in [(gx, direction.x, cols as f64), (gy, direction.y, rows as f64)] {
                if d.abs() < 1e-300 {
                    if o < 0.0 || o >= n {
                        return best;
                    }
                } else {
                    let a = (0.0 - o) / d;
                    let b = (n - o) / d;
                    t0 = t0.max(a.min(b));
                    t1 = t1.min(a.max(b));
                }
            }
            if t0 > t1 || t0 * self.cell_size > max_range {
                return best;
            }
            t_entry = t0;
        }
        let px = gx + direction.x * t_entry;
        let py = gy + direction.y * t_entry;
        let mut cx = (px.floor() as i64).clamp(0, cols - 1);
        let mut cy = (py.floor() as i64).clamp(0, rows - 1);
        let step_x = if direction.x > 0.0 { 1 } else { -1 };
        let step_y = if direction.y > 0.0 { 1 } else { -1 };
        let t_delta_x = if direction.x != 0.0 { (1.0 / direction.x).abs() } else { f64::INFINITY };
        let t_delta_y = if direction.y != 0.0 { (1.0 / direction.y).abs() } else { f64::INFINITY };
        let mut t_max_x = if direction.x > 0.0 {
            ((cx + 1) as f64 - gx) / direction.x
        } else if direction.x < 0.0 {
            (cx as f64 - gx) / direction.x
        } else {
            f64::INFINITY
        };
        let mut t_max_y = if direction.y > 0.0 {
            ((cy + 1) as f64 - gy) / direction.y
        } else if direction.y < 0.0 {
            (cy as f64 - gy) / direction.y
        } else {
            f64::INFINITY
        };
        loop {
            for &id in self.cell_items(cx as usize, cy as usize) {
                if let Some(t) = self.hit_id(id, origin, direction) {
                    if t < best {
                        best = t;
                    }
                }
            }
            let t_exit = t_max_x.min(t_max_y) * self.cell_size;
            if best <= t_exit || t_exit >= max_range {
                break;
            }
            if t_max_x < t_max_y {
                cx += step_x;
                if cx < 0 || cx >= cols {
                    break;
                }
                t_max_x += t_delta_x;
            } else {
                cy += step_y;
                if cy < 0 || cy >= rows {
                    break;
                }
                t_max_y += t_delta_y;
            }
        }
        best.max(0.0)
    }

    /// Exhaustive reference raycast over every obstacle.
    pub fn ray_cast_exhaustive(&self, origin: Vec2, direction: Vec2, max_range: f64) -> f64 {
        let n = (self.segments.len() + self.circles.len()) as u32;
        (0..n)
            .filter_map(|id| self.hit_id(id, origin, direction))
            .fold(max_range, f64::min)
    }

    /// Exact overlap test of an oriented rectangle with the obstacle set; contact counts.
    pub fn rect_intersects(&self, rect: &OrientedRect) -> bool {
        let bbox = rect.bbox();
        let ns = self.segments.len();
        self.candidates(&bbox).any(|id| {
            let id = id as usize;
            if id < ns {
                let s = &self.segments[id];
                s.bbox().overlaps(&bbox) && rect.intersects_segment(s)
            } else {
                let c = &self.circles[id - ns];
                c.bbox().overlaps(&bbox) && rect.intersects_circle(c)
            }
        })
    }

    /// Tests `substeps` interpolated placements of `rect` translated by `delta`
    /// (both endpoints included).
    pub fn swept_rect_intersects(&self, rect: &OrientedRect, delta: Vec2, substeps: usize) -> bool {
        let n = substeps.max(1);
        (0..=n).any(|k| {
            let t = k as f64 / n as f64;
            let r = OrientedRect {
                center: rect.center + delta * t,
                ..*rect
            };
            self.rect_intersects(&r)
        })
    }

    /// Minimum distance from `p` to any obstacle.
    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        let s = self.segments.iter().map(|s| s.distance_to_point(p));
        let c = self.circles.iter().map(|c| c.distance_to_point(p));
        s.chain(c).fold(f64::INFINITY, f64::min)
    }
}

/// Substep count that keeps every interpolated placement within 5 cm of the last.
pub fn required_substeps(travel: f64) -> usize {
    ((travel / 0.05).ceil() as usize).max(1)
}

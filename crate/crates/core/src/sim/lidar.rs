use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, SpatialIndex, Vec2};
use crate::rng::SeededRng;

/// Planar LiDAR. The physical sensor has 3200 rays over 360°; only the
/// forward 270° window with 1200 rays is simulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "LidarSpec")]
pub struct LidarConfig {
    pub ray_count: usize,
    pub fov_deg: f64,
    pub max_range: f64,
    /// Sensor pose in the robot body frame.
    pub mount: Pose,
    /// Standard deviation of additive range noise in meters; 0 disables it.
    pub noise_std: f64,
    #[serde(skip)]
    directions: Vec<Vec2>,
}

#[derive(Deserialize)]
struct LidarSpec {
    ray_count: usize,
    fov_deg: f64,
    max_range: f64,
    #[serde(default)]
    mount: Pose,
    #[serde(default)]
    noise_std: f64,
}

impl From<LidarSpec> for LidarConfig {
    fn from(s: LidarSpec) -> Self {
        Self {
            mount: s.mount,
            noise_std: s.noise_std,
            ..Self::new(s.ray_count, s.fov_deg, s.max_range)
        }
    }
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self::new(1200, 270.0, 30.0)
    }
}

impl LidarConfig {
    pub fn new(ray_count: usize, fov_deg: f64, max_range: f64) -> Self {
        assert!(ray_count >= 1 && fov_deg > 0.0 && fov_deg <= 360.0 && max_range > 0.0);
        let mut cfg = Self {
            ray_count,
            fov_deg,
            max_range,
            mount: Pose::default(),
            noise_std: 0.0,
            directions: Vec::new(),
        };
        cfg.directions = (0..ray_count).map(|i| Vec2::from_angle(cfg.bearing(i))).collect();
        cfg
    }

    /// Bearing of ray `i` relative to the sensor heading, in radians.
    pub fn bearing(&self, i: usize) -> f64 {
        let fov = self.fov_deg.to_radians();
        if self.ray_count == 1 {
            return 0.0;
        }
        // A full circle would duplicate the first ray at the last index.
        let span = if self.fov_deg >= 360.0 {
            fov * (self.ray_count - 1) as f64 / self.ray_count as f64
        } else {
            fov
        };
        -span / 2.0 + i as f64 * span / (self.ray_count - 1) as f64
    }

    /// World pose of the sensor for a robot at `pose`.
    pub fn sensor_pose(&self, pose: Pose) -> Pose {
        Pose {
            position: pose.position + pose.to_world(self.mount.position),
            heading: pose.heading + self.mount.heading,
        }
    }

    /// Normalized ranges in [0, 1]; 1 means no return within `max_range`.
    pub fn scan(&self, index: &SpatialIndex, pose: Pose) -> Vec<f64> {
        let mut out = vec![0.0; self.ray_count];
        self.scan_into(index, pose, &mut out);
        out
    }

    pub fn scan_into(&self, index: &SpatialIndex, pose: Pose, out: &mut [f64]) {
        assert_eq!(out.len(), self.ray_count);
        if self.directions.len() != self.ray_count {
            // ray_count or fov changed after construction
            let fresh = Self::new(self.ray_count, self.fov_deg, self.max_range);
            return Self { directions: fresh.directions, ..self.clone() }.scan_into(index, pose, out);
        }
        let s = self.sensor_pose(pose);
        let (c, sn) = (s.heading.cos(), s.heading.sin());
        for (o, d) in out.iter_mut().zip(&self.directions) {
            let dir = Vec2::new(c * d.x - sn * d.y, sn * d.x + c * d.y);
            *o = index.ray_cast(s.position, dir, self.max_range) / self.max_range;
        }
    }

    /// Scan with Gaussian range noise, clamped back into [0, 1].
    pub fn scan_noisy(&self, index: &SpatialIndex, pose: Pose, rng: &mut SeededRng) -> Vec<f64> {
        let mut out = self.scan(index, pose);
        if self.noise_std > 0.0 {
            for v in &mut out {
                *v = (*v + rng.normal() * self.noise_std / self.max_range).clamp(0.0, 1.0);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CircleObstacle, Segment, DEFAULT_INDEX_CELL};

    #[test]
    fn bearings_span_270_degrees() {
        let l = LidarConfig::default();
        assert!((l.bearing(0) + 135f64.to_radians()).abs() < 1e-12);
        assert!((l.bearing(1199) - 135f64.to_radians()).abs() < 1e-12);
        // Ray 600 sits just past straight ahead: half a spacing.
        let step = 270f64.to_radians() / 1199.0;
        assert!((l.bearing(600) - step / 2.0).abs() < 1e-12);
    }

    #[test]
    fn front_ray_reads_wall_distance() {
        let idx = SpatialIndex::new(
            vec![Segment::new(Vec2::new(5.0, -10.0), Vec2::new(5.0, 10.0))],
            vec![],
            DEFAULT_INDEX_CELL,
        );
        let l = LidarConfig::new(3, 270.0, 30.0);
        let s = l.scan(&idx, Pose::new(Vec2::ZERO, 0.0));
        assert!((s[1] - 5.0 / 30.0).abs() < 1e-12);
        assert_eq!(s[0], 1.0);
    }

    #[test]
    fn rotating_by_one_spacing_shifts_scan() {
        let idx = SpatialIndex::new(vec![], vec![CircleObstacle::new(Vec2::ZERO, 2.0)], DEFAULT_INDEX_CELL);
        let l = LidarConfig::new(90, 360.0, 30.0);
        let step = l.bearing(1) - l.bearing(0);
        // Off-center robot so the scan is not constant.
        let p = Vec2::new(5.0, 0.0);
        let base = l.scan(&idx, Pose::new(p, 0.3));
        let rotated = l.scan(&idx, Pose::new(p, 0.3 + step));
        for i in 0..89 {
            assert!((rotated[i] - base[i + 1]).abs() < 1e-9);
        }
    }

    #[test]
    fn mount_offset_moves_origin() {
        let idx = SpatialIndex::new(
            vec![Segment::new(Vec2::new(5.0, -10.0), Vec2::new(5.0, 10.0))],
            vec![],
            DEFAULT_INDEX_CELL,
        );
        let mut l = LidarConfig::new(3, 270.0, 30.0);
        l.mount = Pose::new(Vec2::new(0.1, 0.0), 0.0);
        let s = l.scan(&idx, Pose::new(Vec2::ZERO, 0.0));
        assert!((s[1] * 30.0 - 4.9).abs() < 1e-12);
    }
}

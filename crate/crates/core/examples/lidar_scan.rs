//! A single 1200-ray scan from the first node of a generated map, checked
//! against the exhaustive intersection routine and drawn as a coarse polar
//! histogram.
//!
//! Usage: `cargo run --release --example lidar_scan -- [generator] [seed]`

use lidarnav::geometry::Pose;
use lidarnav::mapgen::{generate, GeneratorConfig, GeneratorKind};
use lidarnav::sim::LidarConfig;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let kind: GeneratorKind = args.first().map_or(GeneratorKind::Wfc, |s| s.parse().expect("generator"));
    let seed: u64 = args.get(1).map_or(1, |s| s.parse().expect("seed"));

    let map = generate(&GeneratorConfig::default_for(kind), seed).expect("generation");
    let index = map.spatial_index();
    let lidar = LidarConfig::default();
    let pose = Pose::new(map.nodes[0], 0.0);
    let scan = lidar.scan(&index, pose);

    let sensor = lidar.sensor_pose(pose);
    let mut worst = 0.0f64;
    for (i, r) in scan.iter().enumerate() {
        let dir = lidarnav::geometry::Vec2::from_angle(sensor.heading + lidar.bearing(i));
        let exact = index.ray_cast_exhaustive(sensor.position, dir, lidar.max_range) / lidar.max_range;
        worst = worst.max((r - exact).abs());
    }
    println!(
        "{kind} map {seed}: {} rays from ({:.2}, {:.2}), min {:.2} m, max error vs exhaustive {worst:.1e}",
        scan.len(),
        pose.position.x,
        pose.position.y,
        scan.iter().fold(f64::INFINITY, |m, v| m.min(*v)) * lidar.max_range
    );

    // 24 equal sectors across the field of view; bar length tracks the sector minimum
    let per = scan.len() / 24;
    for s in 0..24 {
        let m = scan[s * per..(s + 1) * per].iter().fold(f64::INFINITY, |a, b| a.min(*b)) * lidar.max_range;
        let bar = "#".repeat((m * 4.0).round().min(60.0) as usize);
        println!("{:>4.0} deg {m:>6.2} m {bar}", lidar.bearing(s * per).to_degrees());
    }
}

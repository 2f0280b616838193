pub mod geometry;
pub mod mapgen;
pub mod planner;
pub mod rng;
pub mod sim;
pub mod tasks;
pub mod carrot;
pub mod harness;

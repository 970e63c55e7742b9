//! A small 2-D driving world: a rectangular loop track, unicycle cars with
//! a planar scanner, and pedestrians that appear on the track.

pub mod geometry;
pub mod lidar;
pub mod track;
pub mod vehicle;
pub mod world;

pub use geometry::Vec2;
pub use lidar::{Disc, LidarConfig};
pub use track::{TrackConfig, TrackMap};
pub use vehicle::{VehicleConfig, VehicleState};
pub use world::{
    run_scenario, run_scenario_with, CarAudit, CarResult, ControlMode, CrashCause, CrashInfo, PedestrianConfig,
    Scenario, ScenarioResult, SimError,
};

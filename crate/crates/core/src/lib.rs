//! Post-perception driving stack running closed-loop in a deterministic 2D world.
//!
//! The pipeline mirrors a modular agent: detections are tracked with a
//! per-object unscented Kalman filter, tracks are predicted along lanes,
//! a behavior layer negotiates with other agents and picks a lane, a
//! sampling planner scores 132 candidate trajectories with five weighted
//! costs, and decoupled PID controllers with a feed-forward table turn
//! the chosen trajectory into throttle, brake and steering.
//!
//! Cost weights can be learned from demonstrations with Maximum Margin
//! Planning (see [`irl`]), and [`scoring`] turns simulator infraction
//! events into a Leaderboard-style driving score.

pub mod agent;
pub mod behavior;
pub mod controller;
pub mod error;
pub mod geometry;
pub mod irl;
pub mod map;
pub mod planner;
pub mod predictor;
pub mod scoring;
pub mod sim;
pub mod tracker;
pub mod world;

pub use error::{Error, Result};
pub use geometry::{OrientedBox, Path, PathPoint, Pose2D};
pub use map::{Lane, LaneMap, RoutePlan};
pub use world::{DetectedObject, EgoState, ObjectCategory, TrafficSignal};

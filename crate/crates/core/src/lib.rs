//! Resilient supervisory control for autonomous intersections under sensor
//! spoofing.
//!
//! Vehicles move along straight roads that cross in a conflict zone. A
//! supervisor restricts the speeds they may pick each step so that no two
//! vehicles on crossing roads share the zone and every vehicle eventually
//! leaves. Measurements may be spoofed for bounded stretches of time; a CUSUM
//! detector bounds what the attacker can do unnoticed, and a set-membership
//! estimator keeps a state set that provably contains the true positions.
//!
//! * [`model`]: dynamics, geometry, reachability, grid quantizer
//! * [`detector`], [`attacker`], [`estimator`]: the attack/defence loop
//! * [`des`]: finite abstraction and observer
//! * [`supervisor`]: resilient and baseline synthesis
//! * [`sim`]: closed-loop simulation, traces and sweeps
//! * [`verify`]: executable acceptance checks

pub mod attacker;
pub mod config;
pub mod des;
pub mod detector;
pub mod estimator;
pub mod exec;
pub mod model;
pub mod numeric;
pub mod sim;
pub mod supervisor;
pub mod verify;

pub use config::{ConfigError, ConfigFile, IntersectionConfig, ScenarioConfig};
pub use exec::Exec;
pub use model::{BoxUnion, Cell, CellSet, Control};
pub use sim::{Outcome, RunTrace};
pub use supervisor::{BaselineTable, ResilientTable, SupervisorKind};

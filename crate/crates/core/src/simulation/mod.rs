//! Microscopic traffic simulation: demand expansion, routing, and the
//! car-following engine that produces the average-speed objective.

mod demand;
mod engine;
mod result;
mod routing;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::NodeId;

pub use demand::{
    build_trips, Multiplier, OdEntry, OdFlow, TrafficDemand, TrafficWave, Trip, TripPlan,
    UnroutedVehicle, Window,
};
pub use engine::{follow_speed, next_speed, simulate, SimState, VehicleView};
pub use result::{average_speed, SimResult, StepCounters, VehicleRecord};
pub use routing::{free_flow_time, shortest_path, Route, Router};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("invalid demand: {0}")]
    Demand(String),
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("route of vehicle {0} does not follow the network")]
    RouteNotOnNetwork(u32),
    #[error("simulation result holds no vehicles")]
    EmptyResult,
    #[error("demand file: {0}")]
    Io(#[from] std::io::Error),
    #[error("demand file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Simulation parameters. Distances in meters, times in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    /// Driver speed noise in `[0, 1]`.
    pub sigma: f64,
    pub accel: f64,
    pub decel: f64,
    /// Reaction time.
    pub tau: f64,
    pub min_gap: f64,
    pub vehicle_length: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1.0,
            horizon: 3600.0,
            sigma: 0.5,
            accel: 2.6,
            decel: 4.5,
            tau: 1.0,
            min_gap: 2.5,
            vehicle_length: 5.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("dt", self.dt),
            ("accel", self.accel),
            ("decel", self.decel),
            ("tau", self.tau),
            ("min_gap", self.min_gap),
            ("vehicle_length", self.vehicle_length),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(SimError::Config(format!("{name} must be > 0")));
            }
        }
        if !(self.horizon >= self.dt) || !self.horizon.is_finite() {
            return Err(SimError::Config("horizon must be >= dt".into()));
        }
        if !(0.0..=1.0).contains(&self.sigma) {
            return Err(SimError::Config("sigma must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Number of ticks needed to reach the horizon.
    pub fn ticks(&self) -> u64 {
        (self.horizon / self.dt - 1e-9).ceil() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = SimConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.ticks(), 3600);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let bad = [
            SimConfig { dt: 0.0, ..Default::default() },
            SimConfig { horizon: 0.5, ..Default::default() },
            SimConfig { sigma: 1.5, ..Default::default() },
            SimConfig { decel: -1.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn follow_speed_examples() {
        let cfg = SimConfig::default();
        assert_eq!(follow_speed(0.0, 0.0, 0.0, &cfg), 0.0);
        let expected = 10.0 + (30.0 - 10.0 * 1.0) / (1.0 + (10.0 + 10.0) / (2.0 * 4.5));
        assert!((follow_speed(10.0, 10.0, 30.0, &cfg) - expected).abs() < 1e-12);
        assert!((follow_speed(10.0, 10.0, 30.0, &cfg) - 16.2069).abs() < 1e-4);
        assert!(follow_speed(10.0, 0.0, 1e6, &cfg) > 100.0);
    }
}

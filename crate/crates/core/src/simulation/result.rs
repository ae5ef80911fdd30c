use std::io;

use serde::Serialize;

use super::SimError;

/// Per-vehicle outcome of one simulation run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VehicleRecord {
    pub vehicle_id: u32,
    #[serde(rename = "route_length_m")]
    pub route_length: f64,
    #[serde(rename = "travel_time_s")]
    pub travel_time: f64,
    #[serde(rename = "distance_m")]
    pub distance: f64,
    #[serde(skip)]
    pub depart_time: f64,
    pub arrived: bool,
    pub reachable: bool,
}

/// Counters sampled at the end of every tick.
///
/// `released = inserted + queued` and `inserted = arrived + running` hold at
/// every tick.
#[derive(Clone, Debug, PartialEq)]
pub struct StepCounters {
    pub time: f64,
    /// Trips whose departure time has passed.
    pub released: u32,
    /// Trips that entered the network.
    pub inserted: u32,
    pub arrived: u32,
    pub running: u32,
    /// Released trips still waiting at their origin.
    pub queued: u32,
    /// Smallest bumper gap on any lane, `+inf` when undefined.
    pub min_gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimResult {
    pub records: Vec<VehicleRecord>,
    pub horizon: f64,
    pub counters: Vec<StepCounters>,
}

impl SimResult {
    /// Total vehicle count `I`, unreachable vehicles included.
    pub fn vehicle_count(&self) -> usize {
        self.records.len()
    }

    pub fn arrived_count(&self) -> usize {
        self.records.iter().filter(|r| r.arrived).count()
    }

    fn vehicle_speed(&self, r: &VehicleRecord) -> f64 {
        if !r.reachable {
            0.0
        } else if r.arrived {
            r.route_length / r.travel_time
        } else {
            let window = self.horizon - r.depart_time;
            if window > 0.0 {
                r.distance / window
            } else {
                0.0
            }
        }
    }

    /// Mean travel time over routed vehicles (censored ones truncated at the
    /// horizon). Reported alongside the speed objective.
    pub fn mean_travel_time(&self) -> Option<f64> {
        let routed: Vec<f64> =
            self.records.iter().filter(|r| r.reachable).map(|r| r.travel_time).collect();
        (!routed.is_empty()).then(|| routed.iter().sum::<f64>() / routed.len() as f64)
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Average vehicle speed over all `I` vehicles (the speed objective).
///
/// Arrived vehicles contribute route length over travel time, censored ones
/// the distance covered over the time they were in the system, and
/// unreachable ones zero.
pub fn average_speed(result: &SimResult) -> Result<f64, SimError> {
    if result.records.is_empty() {
        return Err(SimError::EmptyResult);
    }
    let total: f64 = result.records.iter().map(|r| result.vehicle_speed(r)).sum();
    Ok(total / result.records.len() as f64)
}

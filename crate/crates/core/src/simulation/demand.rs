//! Origin-destination demand, traffic waves and their expansion into
//! individually routed trips.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::routing::Router;
use super::SimError;
use crate::network::{Network, NodeId, RoadId};
use crate::seed;

/// Half-open time window `[start, end)` in seconds, written as `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window(pub f64, pub f64);

impl Window {
    pub fn start(&self) -> f64 {
        self.0
    }

    pub fn end(&self) -> f64 {
        self.1
    }

    fn is_valid(&self) -> bool {
        self.0.is_finite() && self.1.is_finite() && self.0 < self.1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdEntry {
    pub origin: NodeId,
    pub destination: NodeId,
    pub count: u32,
    pub window: Window,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OdFlow {
    pub entries: Vec<OdEntry>,
}

/// Scales one base entry by `factor`. Extra vehicles depart inside `window`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    pub entry: usize,
    pub factor: f64,
    pub window: Window,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrafficWave {
    #[serde(default)]
    pub extra_entries: Vec<OdEntry>,
    #[serde(default)]
    pub multipliers: Vec<Multiplier>,
}

impl TrafficWave {
    pub fn is_empty(&self) -> bool {
        self.extra_entries.is_empty() && self.multipliers.is_empty()
    }

    /// OD pairs touched by the wave, in first-seen order.
    pub fn od_pairs(&self, base: &OdFlow) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        let touched = self
            .multipliers
            .iter()
            .filter_map(|m| base.entries.get(m.entry))
            .chain(&self.extra_entries);
        for e in touched {
            let pair = (e.origin, e.destination);
            if !out.contains(&pair) {
                out.push(pair);
            }
        }
        out
    }
}

/// Base flow plus wave, as stored in the demand file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrafficDemand {
    pub od: OdFlow,
    #[serde(default)]
    pub wave: TrafficWave,
}

impl TrafficDemand {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("demand serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks windows, counts, factors, indices and node references.
    pub fn validate(&self, net: &Network) -> Result<(), SimError> {
        let check_entry = |e: &OdEntry, what: &str| -> Result<(), SimError> {
            if !e.window.is_valid() {
                return Err(SimError::Demand(format!("{what}: window must satisfy t0 < t1")));
            }
            if e.origin == e.destination {
                return Err(SimError::Demand(format!("{what}: origin equals destination")));
            }
            for n in [e.origin, e.destination] {
                if !net.has_node(n) {
                    return Err(SimError::UnknownNode(n));
                }
            }
            Ok(())
        };
        for (i, e) in self.od.entries.iter().enumerate() {
            check_entry(e, &format!("od[{i}]"))?;
        }
        for (i, e) in self.wave.extra_entries.iter().enumerate() {
            check_entry(e, &format!("wave.extra_entries[{i}]"))?;
        }
        for (i, m) in self.wave.multipliers.iter().enumerate() {
            if m.entry >= self.od.entries.len() {
                return Err(SimError::Demand(format!(
                    "wave.multipliers[{i}]: entry {} does not exist",
                    m.entry
                )));
            }
            if !(m.factor >= 0.0) || !m.factor.is_finite() {
                return Err(SimError::Demand(format!("wave.multipliers[{i}]: factor must be >= 0")));
            }
            if !m.window.is_valid() {
                return Err(SimError::Demand(format!(
                    "wave.multipliers[{i}]: window must satisfy t0 < t1"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trip {
    pub vehicle_id: u32,
    pub origin: NodeId,
    pub destination: NodeId,
    pub route: Vec<RoadId>,
    pub depart_time: f64,
}

/// A vehicle whose OD pair has no path on the (modified) network.
#[derive(Clone, Debug, PartialEq)]
pub struct UnroutedVehicle {
    pub vehicle_id: u32,
    pub depart_time: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TripPlan {
    pub trips: Vec<Trip>,
    pub unreachable: Vec<UnroutedVehicle>,
}

impl TripPlan {
    pub fn unreachable_count(&self) -> usize {
        self.unreachable.len()
    }

    pub fn vehicle_count(&self) -> usize {
        self.trips.len() + self.unreachable.len()
    }
}

/// Count of vehicles an entry contributes under its multipliers: the base
/// departures kept in the entry window, then one `(window, extra)` batch per
/// multiplier that adds vehicles.
fn expand_counts(count: u32, multipliers: &[&Multiplier]) -> (u32, Vec<(Window, u32)>) {
    let base = count as f64;
    let mut kept = base;
    let mut extra = Vec::new();
    for m in multipliers {
        let delta = (base * m.factor).round_ties_even() - base;
        if delta < 0.0 {
            kept += delta;
        } else if delta > 0.0 {
            extra.push((m.window, delta as u32));
        }
    }
    (kept.max(0.0) as u32, extra)
}

/// Expands demand into per-vehicle trips routed on `net`.
///
/// Vehicle ids are assigned in expansion order: base entries (kept departures,
/// then multiplier extras) followed by wave extra entries. Departure times are
/// drawn for every vehicle, routed or not, so the departure schedule depends
/// only on the demand and the seed.
pub fn build_trips(
    demand: &TrafficDemand,
    net: &Network,
    seed: u64,
) -> Result<TripPlan, SimError> {
    demand.validate(net)?;
    let mut rng = seed::rng(seed);
    let mut router = Router::new(net);
    let mut routes: HashMap<(NodeId, NodeId), Option<Vec<RoadId>>> = HashMap::new();
    let mut plan = TripPlan::default();
    let mut next_id = 0u32;

    let mut batches: Vec<(&OdEntry, Window, u32)> = Vec::new();
    for (idx, entry) in demand.od.entries.iter().enumerate() {
        let mults: Vec<&Multiplier> =
            demand.wave.multipliers.iter().filter(|m| m.entry == idx).collect();
        let (kept, extra) = expand_counts(entry.count, &mults);
        batches.push((entry, entry.window, kept));
        batches.extend(extra.into_iter().map(|(w, n)| (entry, w, n)));
    }
    for entry in &demand.wave.extra_entries {
        batches.push((entry, entry.window, entry.count));
    }

    for (entry, window, n) in batches {
        let od = (entry.origin, entry.destination);
        let route = match routes.entry(od) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => e.insert(router.shortest_path(od.0, od.1)?.map(|r| r.roads)),
        };
        for _ in 0..n {
            let depart_time = rng.gen_range(window.start()..window.end());
            let vehicle_id = next_id;
            next_id += 1;
            match route {
                Some(roads) => plan.trips.push(Trip {
                    vehicle_id,
                    origin: od.0,
                    destination: od.1,
                    route: roads.clone(),
                    depart_time,
                }),
                None => plan.unreachable.push(UnroutedVehicle { vehicle_id, depart_time }),
            }
        }
    }
    Ok(plan)
}

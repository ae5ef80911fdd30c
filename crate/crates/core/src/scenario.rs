//! Synthetic experiment inputs: rectangular grid networks, base OD flows and
//! random traffic waves. Every generator is a pure function of its spec.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{
    Lane, LaneId, LaneRef, Network, NodeId, ReversalConstraints, Road, RoadId,
};
use crate::seed;
use crate::simulation::{Multiplier, OdEntry, OdFlow, TrafficWave, Window};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid flow: {0}")]
    Flow(String),
    #[error("invalid wave: {0}")]
    Wave(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub block_length: f64,
    pub lanes_per_direction: usize,
    pub vmax: f64,
    pub reversible_fraction: f64,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            rows: 4,
            cols: 4,
            block_length: 200.0,
            lanes_per_direction: 2,
            vmax: 13.9,
            reversible_fraction: 1.0,
            seed: 0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.rows < 2 {
            return Err(ScenarioError::Grid(format!("rows must be >= 2, got {}", self.rows)));
        }
        if self.cols < 2 {
            return Err(ScenarioError::Grid(format!("cols must be >= 2, got {}", self.cols)));
        }
        if !(self.block_length > 0.0) {
            return Err(ScenarioError::Grid("block_length must be > 0".into()));
        }
        if self.lanes_per_direction == 0 {
            return Err(ScenarioError::Grid("lanes_per_direction must be >= 1".into()));
        }
        if !(self.vmax > 0.0) {
            return Err(ScenarioError::Grid("vmax must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.reversible_fraction) {
            return Err(ScenarioError::Grid("reversible_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn road_count(&self) -> usize {
        2 * (self.rows * (self.cols - 1) + self.cols * (self.rows - 1))
    }

    pub fn lane_count(&self) -> usize {
        self.road_count() * self.lanes_per_direction
    }
}

/// Builds a `rows x cols` grid. Node `(r, c)` has id `r * cols + c`; each
/// adjacent pair gets two opposite roads. A seeded `reversible_fraction` of
/// all lanes is marked reversible, in road/lane id order. A road whose lanes
/// are all reversible gets an exclusion between its first two lanes, so no
/// direction can be emptied.
pub fn generate_grid(spec: &GridSpec) -> Result<Network, ScenarioError> {
    spec.validate()?;
    let node = |r: usize, c: usize| NodeId((r * spec.cols + c) as u32);
    let nodes = (0..spec.node_count()).map(|i| NodeId(i as u32)).collect();

    let mut pairs = Vec::new();
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            if c + 1 < spec.cols {
                pairs.push((node(r, c), node(r, c + 1)));
            }
            if r + 1 < spec.rows {
                pairs.push((node(r, c), node(r + 1, c)));
            }
        }
    }

    let mut roads = Vec::with_capacity(pairs.len() * 2);
    let mut next_lane = 0u32;
    for (a, b) in pairs {
        for (from, to) in [(a, b), (b, a)] {
            let lanes = (0..spec.lanes_per_direction)
                .map(|_| {
                    next_lane += 1;
                    Lane { id: LaneId(next_lane - 1), vmax: spec.vmax, reversible: false }
                })
                .collect();
            roads.push(Road { id: RoadId(roads.len() as u32), from, to, length: spec.block_length, lanes });
        }
    }

    let total = next_lane as usize;
    let chosen = (spec.reversible_fraction * total as f64).round() as usize;
    let mut rng = seed::rng(seed::derive(spec.seed, "reversible"));
    let mut picked: Vec<usize> = sample(&mut rng, total, chosen).into_vec();
    picked.sort_unstable();
    for lane_id in &picked {
        let road = &mut roads[*lane_id / spec.lanes_per_direction];
        road.lanes[*lane_id % spec.lanes_per_direction].reversible = true;
    }

    let mut reversible_lanes = Vec::with_capacity(chosen);
    let mut bit_of: BTreeMap<LaneId, usize> = BTreeMap::new();
    for road in &roads {
        for lane in road.lanes.iter().filter(|l| l.reversible) {
            bit_of.insert(lane.id, reversible_lanes.len());
            reversible_lanes.push(LaneRef { road: road.id, lane: lane.id, reverse_to: (road.to, road.from) });
        }
    }

    let mut constraints = ReversalConstraints::default();
    for road in &roads {
        if road.lanes.len() >= 2 && road.lanes.iter().all(|l| l.reversible) {
            constraints
                .mutual_exclusions
                .push((bit_of[&road.lanes[0].id], bit_of[&road.lanes[1].id]));
        }
    }

    Ok(Network { nodes, roads, reversible_lanes, constraints })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub vehicles_total: u32,
    /// Number of distinct OD pairs sharing the vehicles; `None` draws a fresh
    /// pair per vehicle.
    pub od_pairs: Option<usize>,
    /// Departures are spread over `[0, horizon)`.
    pub horizon: f64,
    pub seed: u64,
}

fn draw_pair<R: Rng>(nodes: &[NodeId], rng: &mut R) -> (NodeId, NodeId) {
    let picks = sample(rng, nodes.len(), 2);
    (nodes[picks.index(0)], nodes[picks.index(1)])
}

/// Spreads `vehicles_total` over uniformly drawn OD pairs (origin differs
/// from destination). Entries keep the order in which pairs were first drawn.
pub fn generate_base_flow(net: &Network, spec: &FlowSpec) -> Result<OdFlow, ScenarioError> {
    if net.nodes.len() < 2 {
        return Err(ScenarioError::Flow("network needs at least 2 nodes".into()));
    }
    if !(spec.horizon > 0.0) {
        return Err(ScenarioError::Flow("horizon must be > 0".into()));
    }
    let mut rng = seed::rng(seed::derive(spec.seed, "flow"));
    let fixed: Option<Vec<(NodeId, NodeId)>> = match spec.od_pairs {
        Some(0) => return Err(ScenarioError::Flow("od_pairs must be >= 1".into())),
        Some(k) => Some((0..k).map(|_| draw_pair(&net.nodes, &mut rng)).collect()),
        None => None,
    };
    let mut order: Vec<(NodeId, NodeId)> = Vec::new();
    let mut counts: BTreeMap<(NodeId, NodeId), u32> = BTreeMap::new();
    for _ in 0..spec.vehicles_total {
        let pair = match &fixed {
            Some(pairs) => pairs[rng.gen_range(0..pairs.len())],
            None => draw_pair(&net.nodes, &mut rng),
        };
        let count = counts.entry(pair).or_insert(0);
        if *count == 0 {
            order.push(pair);
        }
        *count += 1;
    }
    let window = Window(0.0, spec.horizon);
    Ok(OdFlow {
        entries: order
            .into_iter()
            .map(|(origin, destination)| OdEntry {
                origin,
                destination,
                count: counts[&(origin, destination)],
                window,
            })
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveSpec {
    pub num_hot_od_pairs: usize,
    pub demand_multiplier: f64,
    pub window: Window,
    pub seed: u64,
}

/// Picks `num_hot_od_pairs` distinct entries of `flow` and scales each by
/// `demand_multiplier` inside the wave window. Returns the wave and the OD
/// pairs it touches.
pub fn generate_wave(
    flow: &OdFlow,
    spec: &WaveSpec,
) -> Result<(TrafficWave, Vec<(NodeId, NodeId)>), ScenarioError> {
    if !(spec.demand_multiplier > 1.0) {
        return Err(ScenarioError::Wave("demand_multiplier must be > 1".into()));
    }
    if !(spec.window.start() < spec.window.end()) {
        return Err(ScenarioError::Wave("window must satisfy t0 < t1".into()));
    }
    if spec.num_hot_od_pairs > flow.entries.len() {
        return Err(ScenarioError::Wave(format!(
            "num_hot_od_pairs {} exceeds {} flow entries",
            spec.num_hot_od_pairs,
            flow.entries.len()
        )));
    }
    let mut rng = seed::rng(seed::derive(spec.seed, "wave"));
    let mut hot = sample(&mut rng, flow.entries.len(), spec.num_hot_od_pairs).into_vec();
    hot.sort_unstable();
    let wave = TrafficWave {
        extra_entries: Vec::new(),
        multipliers: hot
            .iter()
            .map(|&entry| Multiplier { entry, factor: spec.demand_multiplier, window: spec.window })
            .collect(),
    };
    let pairs = wave.od_pairs(flow);
    Ok((wave, pairs))
}

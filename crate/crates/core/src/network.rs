//! Road network model, the reversible-lane set, reversal policy constraints
//! and the application of a reversal mask to a network.
//!
//! A [`Network`] owns an ordered list of [`LaneRef`]s. The order defines the
//! chromosome: bit `i` of a [`ReversalMask`] decides whether
//! `reversible_lanes[i]` is flipped to the opposite direction.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub u32);

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct RoadId(pub u32);

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct LaneId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for RoadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

impl fmt::Display for LaneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub id: LaneId,
    /// Maximum speed in m/s.
    #[serde(rename = "vmax_ms")]
    pub vmax: f64,
    pub reversible: bool,
}

/// A directed road. All lanes share the road's direction and length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Road {
    pub id: RoadId,
    pub from: NodeId,
    pub to: NodeId,
    #[serde(rename = "length_m")]
    pub length: f64,
    pub lanes: Vec<Lane>,
}

impl Road {
    pub fn max_vmax(&self) -> Option<f64> {
        self.lanes.iter().map(|l| l.vmax).reduce(f64::max)
    }
}

/// Points at a reversible lane and names the node pair of the road it joins
/// once reversed, i.e. `(road.to, road.from)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LaneRef {
    pub road: RoadId,
    pub lane: LaneId,
    pub reverse_to: (NodeId, NodeId),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReversalConstraints {
    /// Unordered bit pairs that may not both be set.
    #[serde(rename = "mutex", default)]
    pub mutual_exclusions: Vec<(usize, usize)>,
    /// `(i, j)`: bit `i` may be set only if bit `j` is set.
    #[serde(rename = "implies", default)]
    pub dependencies: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub nodes: Vec<NodeId>,
    pub roads: Vec<Road>,
    #[serde(rename = "reversible_order")]
    pub reversible_lanes: Vec<LaneRef>,
    #[serde(default)]
    pub constraints: ReversalConstraints,
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("mask length {got} does not match {expected} reversible lanes")]
    MaskLength { expected: usize, got: usize },
    #[error("constraint references bit {index} but only {len} bits exist")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("constraint pair {{{0},{0}}} references the same bit twice")]
    SelfPair(usize),
    #[error("dependency cycle through bit {0}")]
    DependencyCycle(usize),
    #[error("infeasible mask, violated constraints: {}", join(.0))]
    Infeasible(Vec<ConstraintViolation>),
    #[error("invalid network: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("invalid mask string: {0}")]
    ParseMask(String),
    #[error("network file: {0}")]
    Io(#[from] std::io::Error),
    #[error("network file: {0}")]
    Json(#[from] serde_json::Error),
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// A broken structural invariant, naming the offending entity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    DuplicateNode(NodeId),
    DuplicateRoad(RoadId),
    UnknownNode { road: RoadId, node: NodeId },
    SelfLoop(RoadId),
    NonPositiveLength(RoadId),
    NoLanes(RoadId),
    NonPositiveVmax { road: RoadId, lane: LaneId },
    DuplicateLane(LaneId),
    DanglingLaneRef { index: usize, road: RoadId, lane: LaneId },
    NotReversible { index: usize, lane: LaneId },
    WrongReverseTarget { index: usize, lane: LaneId },
    DuplicateLaneRef { index: usize, lane: LaneId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateNode(n) => write!(f, "node {n} listed twice"),
            Violation::DuplicateRoad(r) => write!(f, "road {r} listed twice"),
            Violation::UnknownNode { road, node } => {
                write!(f, "road {road} references unknown node {node}")
            }
            Violation::SelfLoop(r) => write!(f, "road {r} starts and ends at the same node"),
            Violation::NonPositiveLength(r) => write!(f, "road {r} has non-positive length"),
            Violation::NoLanes(r) => write!(f, "road {r} has no lanes"),
            Violation::NonPositiveVmax { road, lane } => {
                write!(f, "lane {lane} on road {road} has non-positive vmax")
            }
            Violation::DuplicateLane(l) => write!(f, "lane id {l} used more than once"),
            Violation::DanglingLaneRef { index, road, lane } => {
                write!(f, "reversible_order[{index}] points at missing lane {lane} on road {road}")
            }
            Violation::NotReversible { index, lane } => {
                write!(f, "reversible_order[{index}] lane {lane} is not marked reversible")
            }
            Violation::WrongReverseTarget { index, lane } => {
                write!(f, "reversible_order[{index}] lane {lane} reverse_to is not the opposite of its road")
            }
            Violation::DuplicateLaneRef { index, lane } => {
                write!(f, "reversible_order[{index}] repeats lane {lane}")
            }
        }
    }
}

/// A violated reversal constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintViolation {
    /// Both bits of an exclusion pair are set. Stored with `.0 < .1`.
    Mutex(usize, usize),
    /// `.0` is set while the bit it depends on, `.1`, is clear.
    Implies(usize, usize),
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintViolation::Mutex(i, j) => write!(f, "{{{i},{j}}}"),
            ConstraintViolation::Implies(i, j) => write!(f, "({i}=>{j})"),
        }
    }
}

/// The binary decision vector. Position `i` corresponds to
/// `Network::reversible_lanes[i]`; `true` means the lane is reversed.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ReversalMask {
    bits: Vec<bool>,
}

impl ReversalMask {
    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![false; len] }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i] = !self.bits[i];
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }
}

impl fmt::Display for ReversalMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for ReversalMask {
    type Err = NetworkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(NetworkError::ParseMask(format!(
                    "unexpected character {other:?} in {s:?}"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(ReversalMask::from_bits)
    }
}

impl ReversalConstraints {
    /// Checks index ranges, self pairs and acyclicity of the dependency graph.
    pub fn validate(&self, n: usize) -> Result<(), NetworkError> {
        for &(i, j) in self.mutual_exclusions.iter().chain(&self.dependencies) {
            for idx in [i, j] {
                if idx >= n {
                    return Err(NetworkError::IndexOutOfRange { index: idx, len: n });
                }
            }
            if i == j {
                return Err(NetworkError::SelfPair(i));
            }
        }
        // Kahn's algorithm over i => j edges.
        let mut indegree = vec![0usize; n];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(i, j) in &self.dependencies {
            out[i].push(j);
            indegree[j] += 1;
        }
        let mut stack: Vec<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = stack.pop() {
            seen += 1;
            for &w in &out[v] {
                indegree[w] -= 1;
                if indegree[w] == 0 {
                    stack.push(w);
                }
            }
        }
        if seen < n {
            let culprit = (0..n).find(|&v| indegree[v] > 0).unwrap_or(0);
            return Err(NetworkError::DependencyCycle(culprit));
        }
        Ok(())
    }
}

/// Lists every constraint the mask violates, sorted by ascending index.
pub fn check_constraints(
    mask: &ReversalMask,
    cons: &ReversalConstraints,
) -> Result<Vec<ConstraintViolation>, NetworkError> {
    let n = mask.len();
    let mut out = Vec::new();
    for &(i, j) in &cons.mutual_exclusions {
        let hi = i.max(j);
        if hi >= n {
            return Err(NetworkError::IndexOutOfRange { index: hi, len: n });
        }
        if mask.get(i) && mask.get(j) {
            out.push(ConstraintViolation::Mutex(i.min(j), hi));
        }
    }
    for &(i, j) in &cons.dependencies {
        let hi = i.max(j);
        if hi >= n {
            return Err(NetworkError::IndexOutOfRange { index: hi, len: n });
        }
        if mask.get(i) && !mask.get(j) {
            out.push(ConstraintViolation::Implies(i, j));
        }
    }
    out.sort_by_key(|v| (violation_key(v), *v));
    out.dedup();
    Ok(out)
}

fn violation_key(v: &ConstraintViolation) -> usize {
    match *v {
        ConstraintViolation::Mutex(i, _) => i,
        ConstraintViolation::Implies(i, _) => i,
    }
}

/// Makes a mask feasible by clearing bits only.
///
/// The lowest-index violation is resolved first (an exclusion pair loses its
/// higher bit, a dependency loses its antecedent), then constraints are
/// re-checked until none remain.
pub fn repair(
    mask: &ReversalMask,
    cons: &ReversalConstraints,
) -> Result<ReversalMask, NetworkError> {
    let mut out = mask.clone();
    loop {
        let violations = check_constraints(&out, cons)?;
        let Some(first) = violations.first() else {
            return Ok(out);
        };
        match *first {
            ConstraintViolation::Mutex(_, hi) => out.set(hi, false),
            ConstraintViolation::Implies(antecedent, _) => out.set(antecedent, false),
        }
    }
}

impl Network {
    pub fn reversible_count(&self) -> usize {
        self.reversible_lanes.len()
    }

    pub fn lane_count(&self) -> usize {
        self.roads.iter().map(|r| r.lanes.len()).sum()
    }

    pub fn road(&self, id: RoadId) -> Option<&Road> {
        self.roads.iter().find(|r| r.id == id)
    }

    pub fn has_node(&self, id: NodeId) -> bool {
        self.nodes.contains(&id)
    }

    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    /// Reads a network file and rejects it unless it is structurally valid and
    /// its constraint set is well formed.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        let net = Self::from_json(&std::fs::read_to_string(path)?)?;
        let violations = validate_network(&net);
        if !violations.is_empty() {
            return Err(NetworkError::Invalid(violations));
        }
        net.constraints.validate(net.reversible_count())?;
        Ok(net)
    }

    /// Applies a feasible mask. See [`apply_reversal`].
    pub fn reversed(&self, mask: &ReversalMask) -> Result<Network, NetworkError> {
        apply_reversal(self, mask)
    }
}

/// Returns every structural invariant the network breaks. Empty means valid.
pub fn validate_network(net: &Network) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut nodes = HashSet::new();
    for n in &net.nodes {
        if !nodes.insert(*n) {
            out.push(Violation::DuplicateNode(*n));
        }
    }
    let mut roads = HashSet::new();
    let mut lanes: HashMap<LaneId, (RoadId, bool)> = HashMap::new();
    let mut lane_location: HashMap<(RoadId, LaneId), (NodeId, NodeId, bool)> = HashMap::new();
    for road in &net.roads {
        if !roads.insert(road.id) {
            out.push(Violation::DuplicateRoad(road.id));
        }
        for node in [road.from, road.to] {
            if !nodes.contains(&node) {
                out.push(Violation::UnknownNode { road: road.id, node });
            }
        }
        if road.from == road.to {
            out.push(Violation::SelfLoop(road.id));
        }
        if !(road.length > 0.0) {
            out.push(Violation::NonPositiveLength(road.id));
        }
        if road.lanes.is_empty() {
            out.push(Violation::NoLanes(road.id));
        }
        for lane in &road.lanes {
            if !(lane.vmax > 0.0) {
                out.push(Violation::NonPositiveVmax { road: road.id, lane: lane.id });
            }
            if lanes.insert(lane.id, (road.id, lane.reversible)).is_some() {
                out.push(Violation::DuplicateLane(lane.id));
            }
            lane_location.insert((road.id, lane.id), (road.from, road.to, lane.reversible));
        }
    }
    let mut seen = HashSet::new();
    for (index, r) in net.reversible_lanes.iter().enumerate() {
        match lane_location.get(&(r.road, r.lane)) {
            None => out.push(Violation::DanglingLaneRef { index, road: r.road, lane: r.lane }),
            Some(&(from, to, reversible)) => {
                if !reversible {
                    out.push(Violation::NotReversible { index, lane: r.lane });
                }
                if r.reverse_to != (to, from) {
                    out.push(Violation::WrongReverseTarget { index, lane: r.lane });
                }
            }
        }
        if !seen.insert(r.lane) {
            out.push(Violation::DuplicateLaneRef { index, lane: r.lane });
        }
    }
    out
}

/// Builds the network that results from reversing every lane whose bit is set.
///
/// A reversed lane leaves its road and is appended to the road running between
/// the same nodes in the opposite direction (the lowest-id one if several
/// exist). That road is created with the same length when absent. Roads left
/// without lanes are dropped. The lane keeps its id and vmax, and its
/// `LaneRef` is rewritten to point at the new location so that reversing the
/// same bits again restores the original lane layout.
pub fn apply_reversal(net: &Network, mask: &ReversalMask) -> Result<Network, NetworkError> {
    let n = net.reversible_count();
    if mask.len() != n {
        return Err(NetworkError::MaskLength { expected: n, got: mask.len() });
    }
    let violations = check_constraints(mask, &net.constraints)?;
    if !violations.is_empty() {
        return Err(NetworkError::Infeasible(violations));
    }

    let mut out = net.clone();
    let mut next_road_id = net.roads.iter().map(|r| r.id.0 + 1).max().unwrap_or(0);
    for i in mask.ones() {
        let lane_ref = &net.reversible_lanes[i];
        let src = out
            .roads
            .iter()
            .position(|r| r.id == lane_ref.road)
            .ok_or_else(|| dangling(i, lane_ref))?;
        let lane_pos = out.roads[src]
            .lanes
            .iter()
            .position(|l| l.id == lane_ref.lane)
            .ok_or_else(|| dangling(i, lane_ref))?;
        let lane = out.roads[src].lanes.remove(lane_pos);
        let length = out.roads[src].length;
        let (from, to) = lane_ref.reverse_to;

        let dst = out
            .roads
            .iter()
            .enumerate()
            .filter(|(_, r)| r.from == from && r.to == to)
            .min_by_key(|(_, r)| r.id)
            .map(|(idx, _)| idx);
        let dst = match dst {
            Some(idx) => idx,
            None => {
                out.roads.push(Road {
                    id: RoadId(next_road_id),
                    from,
                    to,
                    length,
                    lanes: Vec::new(),
                });
                next_road_id += 1;
                out.roads.len() - 1
            }
        };
        let dst_id = out.roads[dst].id;
        out.roads[dst].lanes.push(lane);
        out.reversible_lanes[i] = LaneRef {
            road: dst_id,
            lane: lane_ref.lane,
            reverse_to: (to, from),
        };
    }
    out.roads.retain(|r| !r.lanes.is_empty());
    Ok(out)
}

fn dangling(index: usize, r: &LaneRef) -> NetworkError {
    NetworkError::Invalid(vec![Violation::DanglingLaneRef { index, road: r.road, lane: r.lane }])
}

/// Road id → lane ids, used by tests comparing lane layouts.
pub fn lane_layout(net: &Network) -> BTreeMap<(NodeId, NodeId), BTreeSet<LaneId>> {
    let mut out: BTreeMap<(NodeId, NodeId), BTreeSet<LaneId>> = BTreeMap::new();
    for road in &net.roads {
        out.entry((road.from, road.to))
            .or_default()
            .extend(road.lanes.iter().map(|l| l.id));
    }
    out
}

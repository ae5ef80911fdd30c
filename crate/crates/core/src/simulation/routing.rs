//! Free-flow shortest paths.
//!
//! Ties between equally fast routes are broken toward the smallest next node
//! id at every step (and the smallest road id between parallel roads), which
//! yields the lexicographically smallest node sequence among optimal routes.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use super::SimError;
use crate::network::{Network, NodeId, Road, RoadId};

/// Traversal time at the fastest lane's speed.
pub fn free_flow_time(road: &Road) -> f64 {
    road.length / road.max_vmax().expect("routing graph only holds roads with lanes")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Route {
    pub nodes: Vec<NodeId>,
    pub roads: Vec<RoadId>,
    pub cost: f64,
}

/// One-shot shortest path. Use [`Router`] for many queries on one network.
pub fn shortest_path(
    net: &Network,
    origin: NodeId,
    destination: NodeId,
) -> Result<Option<Route>, SimError> {
    Router::new(net).shortest_path(origin, destination)
}

#[derive(Copy, Clone, PartialEq)]
struct Entry {
    cost: f64,
    node: NodeId,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Reverse Dijkstra: free-flow time from every node to `destination`.
fn distances_to(
    net: &Network,
    incoming: &HashMap<NodeId, Vec<usize>>,
    destination: NodeId,
) -> HashMap<NodeId, f64> {
    let mut dist: HashMap<NodeId, f64> = HashMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(destination, 0.0);
    heap.push(Entry { cost: 0.0, node: destination });
    while let Some(Entry { cost, node }) = heap.pop() {
        if cost > dist[&node] {
            continue;
        }
        for &idx in incoming.get(&node).into_iter().flatten() {
            let road = &net.roads[idx];
            let next = cost + free_flow_time(road);
            if dist.get(&road.from).is_none_or(|&d| next < d) {
                dist.insert(road.from, next);
                heap.push(Entry { cost: next, node: road.from });
            }
        }
    }
    dist
}

/// Caches the distance-to-destination field per destination.
pub struct Router<'a> {
    net: &'a Network,
    outgoing: HashMap<NodeId, Vec<usize>>,
    incoming: HashMap<NodeId, Vec<usize>>,
    to_dest: HashMap<NodeId, HashMap<NodeId, f64>>,
}

impl<'a> Router<'a> {
    pub fn new(net: &'a Network) -> Self {
        let mut outgoing: HashMap<NodeId, Vec<usize>> = HashMap::new();
        let mut incoming: HashMap<NodeId, Vec<usize>> = HashMap::new();
        for (idx, road) in net.roads.iter().enumerate() {
            if road.lanes.is_empty() {
                continue;
            }
            outgoing.entry(road.from).or_default().push(idx);
            incoming.entry(road.to).or_default().push(idx);
        }
        Self { net, outgoing, incoming, to_dest: HashMap::new() }
    }

    pub fn shortest_path(
        &mut self,
        origin: NodeId,
        destination: NodeId,
    ) -> Result<Option<Route>, SimError> {
        for n in [origin, destination] {
            if !self.net.has_node(n) {
                return Err(SimError::UnknownNode(n));
            }
        }
        let Self { net, outgoing, incoming, to_dest } = self;
        let net: &Network = net;
        let dist = to_dest
            .entry(destination)
            .or_insert_with(|| distances_to(net, incoming, destination));
        let Some(&total) = dist.get(&origin) else {
            return Ok(None);
        };

        let mut nodes = vec![origin];
        let mut roads = Vec::new();
        let mut here = origin;
        while here != destination {
            let d_here = dist[&here];
            let tol = 1e-9 * d_here.max(1.0);
            let next = outgoing
                .get(&here)
                .into_iter()
                .flatten()
                .map(|&idx| &net.roads[idx])
                .filter(|r| {
                    dist.get(&r.to)
                        .is_some_and(|&d| (free_flow_time(r) + d - d_here).abs() <= tol)
                })
                .min_by_key(|r| (r.to, r.id))
                .expect("a node with finite distance has an optimal outgoing road");
            roads.push(next.id);
            nodes.push(next.to);
            here = next.to;
            if nodes.len() > net.nodes.len() + 1 {
                unreachable!("optimal walk revisited a node");
            }
        }
        Ok(Some(Route { nodes, roads, cost: total }))
    }
}

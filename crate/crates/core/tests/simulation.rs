use std::collections::HashMap;

use contraflow::network::{Lane, LaneId, Network, NodeId, ReversalConstraints, Road, RoadId};
use contraflow::scenario::{generate_base_flow, generate_grid, FlowSpec, GridSpec};
use contraflow::simulation::{
    average_speed, build_trips, next_speed, shortest_path, simulate, OdFlow, SimConfig, SimState,
    TrafficDemand, TrafficWave, Trip, TripPlan,
};
use proptest::prelude::*;

fn road(id: u32, from: u32, to: u32, length: f64, vmax: f64) -> Road {
    Road {
        id: RoadId(id),
        from: NodeId(from),
        to: NodeId(to),
        length,
        lanes: vec![Lane { id: LaneId(id), vmax, reversible: false }],
    }
}

fn net(nodes: u32, roads: Vec<Road>) -> Network {
    Network {
        nodes: (0..nodes).map(NodeId).collect(),
        roads,
        reversible_lanes: vec![],
        constraints: ReversalConstraints::default(),
    }
}

fn trip(id: u32, route: &[u32], nodes: (u32, u32), depart: f64) -> Trip {
    Trip {
        vehicle_id: id,
        origin: NodeId(nodes.0),
        destination: NodeId(nodes.1),
        route: route.iter().map(|&r| RoadId(r)).collect(),
        depart_time: depart,
    }
}

/// Standalone discrete integrator: the vehicle spends its first tick being
/// placed on the road, then accelerates by `a*dt` per tick up to `vmax` and
/// arrives on the tick its front passes the road end.
fn kinematic_oracle(length: f64, vmax: f64, a: f64, dt: f64) -> f64 {
    let mut t = dt;
    let (mut x, mut v) = (0.0, 0.0);
    while x < length {
        v = f64::min(v + a * dt, vmax);
        x += v * dt;
        t += dt;
    }
    t
}

#[test]
fn single_vehicle_travel_time_matches_oracle() {
    let n = net(2, vec![road(0, 0, 1, 500.0, 10.0)]);
    let plan = TripPlan { trips: vec![trip(0, &[0], (0, 1), 0.0)], unreachable: vec![] };
    let cfg = SimConfig { sigma: 0.0, ..Default::default() };
    let result = simulate(&n, &plan, &cfg).unwrap();
    let expected = kinematic_oracle(500.0, 10.0, 2.6, 1.0);
    assert_eq!(expected, 53.0);
    assert_eq!(result.records[0].travel_time, expected);
    assert!(result.records[0].arrived);
    assert!((average_speed(&result).unwrap() - 500.0 / 53.0).abs() < 1e-12);
}

#[test]
fn lone_vehicle_accelerates_by_a_dt_until_vmax() {
    let n = net(2, vec![road(0, 0, 1, 5000.0, 10.0)]);
    let plan = TripPlan { trips: vec![trip(0, &[0], (0, 1), 0.0)], unreachable: vec![] };
    let cfg = SimConfig { sigma: 0.0, ..Default::default() };
    let mut state = SimState::new(&n, &plan, &cfg).unwrap();
    state.step();
    let mut speeds = Vec::new();
    for _ in 0..6 {
        state.step();
        speeds.push(state.on_network()[0].speed);
    }
    let expected = [2.6, 5.2, 7.8, 10.0, 10.0, 10.0];
    for (s, e) in speeds.iter().zip(expected) {
        assert!((s - e).abs() < 1e-12, "{speeds:?}");
    }
}

#[test]
fn empty_network_only_advances_the_clock() {
    let n = net(2, vec![road(0, 0, 1, 100.0, 10.0)]);
    let mut state = SimState::new(&n, &TripPlan::default(), &SimConfig::default()).unwrap();
    state.step();
    assert_eq!(state.time(), 1.0);
    assert!(state.on_network().is_empty());
    let c = &state.counters()[0];
    assert_eq!((c.released, c.inserted, c.arrived, c.running, c.queued), (0, 0, 0, 0, 0));
}

#[test]
fn zero_trips_give_empty_result() {
    let n = net(2, vec![road(0, 0, 1, 100.0, 10.0)]);
    let result = simulate(&n, &TripPlan::default(), &SimConfig { horizon: 10.0, ..Default::default() }).unwrap();
    assert_eq!(result.vehicle_count(), 0);
    assert!(average_speed(&result).is_err());
}

/// A -> B -> C where B -> C is a crawl lane, so the second vehicle stands at
/// the end of A -> B and the rest queue up behind it.
fn blocked_corridor() -> (Network, TripPlan) {
    let n = net(3, vec![road(0, 0, 1, 300.0, 12.0), road(1, 1, 2, 100.0, 0.01)]);
    let trips = (0..6).map(|i| trip(i, &[0, 1], (0, 2), i as f64 * 3.0)).collect();
    (n, TripPlan { trips, unreachable: vec![] })
}

#[test]
fn follower_never_overlaps_a_stopped_leader() {
    for sigma in [0.0, 0.5] {
        let (n, plan) = blocked_corridor();
        let cfg = SimConfig { sigma, horizon: 400.0, seed: 3, ..Default::default() };
        let mut state = SimState::new(&n, &plan, &cfg).unwrap();
        let mut saw_stopped_pair = false;
        for _ in 0..200 {
            state.step();
            let c = state.counters().last().unwrap();
            assert!(c.min_gap >= 0.0, "negative gap {} at t={}", c.min_gap, c.time);
            let on_a: Vec<_> = state.on_network().into_iter().filter(|v| v.road == RoadId(0)).collect();
            if on_a.len() >= 2 && on_a[0].speed == 0.0 {
                saw_stopped_pair = true;
            }
        }
        assert!(saw_stopped_pair, "scenario never produced a stopped leader");
    }
}

#[test]
fn simulation_is_deterministic_and_seed_sensitive() {
    let grid = generate_grid(&GridSpec { rows: 3, cols: 3, ..Default::default() }).unwrap();
    let od = generate_base_flow(&grid, &FlowSpec { vehicles_total: 150, od_pairs: None, horizon: 600.0, seed: 1 }).unwrap();
    let demand = TrafficDemand { od, wave: TrafficWave::default() };
    let plan = build_trips(&demand, &grid, 7).unwrap();
    let cfg = SimConfig { horizon: 900.0, seed: 5, ..Default::default() };
    let a = simulate(&grid, &plan, &cfg).unwrap();
    let b = simulate(&grid, &plan, &cfg).unwrap();
    assert_eq!(a, b);
    let c = simulate(&grid, &plan, &SimConfig { seed: 6, ..cfg.clone() }).unwrap();
    assert_ne!(a, c);
    for r in &a.records {
        assert!(r.travel_time <= a.horizon);
        assert!(r.distance <= r.route_length + cfg.vehicle_length);
    }
}

#[test]
fn censored_vehicles_are_truncated_at_horizon() {
    let n = net(2, vec![road(0, 0, 1, 5000.0, 10.0)]);
    let plan = TripPlan { trips: vec![trip(0, &[0], (0, 1), 10.0)], unreachable: vec![] };
    let cfg = SimConfig { sigma: 0.0, horizon: 100.0, ..Default::default() };
    let r = simulate(&n, &plan, &cfg).unwrap();
    let rec = &r.records[0];
    assert!(!rec.arrived);
    assert_eq!(rec.travel_time, 90.0);
    assert!(rec.distance > 0.0 && rec.distance < 5000.0);
}

#[test]
fn routes_off_the_network_are_rejected() {
    let n = net(3, vec![road(0, 0, 1, 100.0, 10.0), road(1, 1, 2, 100.0, 10.0)]);
    let plan = TripPlan { trips: vec![trip(0, &[1, 0], (1, 1), 0.0)], unreachable: vec![] };
    assert!(simulate(&n, &plan, &SimConfig::default()).is_err());
}

// --- shortest path against exhaustive enumeration ---

fn enumerate_best(n: &Network, origin: NodeId, dest: NodeId) -> Option<(f64, Vec<NodeId>)> {
    fn walk(
        n: &Network,
        here: NodeId,
        dest: NodeId,
        path: &mut Vec<NodeId>,
        cost: f64,
        out: &mut Vec<(f64, Vec<NodeId>)>,
    ) {
        if here == dest {
            out.push((cost, path.clone()));
            return;
        }
        for r in n.roads.iter().filter(|r| r.from == here && !r.lanes.is_empty()) {
            if path.contains(&r.to) {
                continue;
            }
            let w = r.length / r.lanes.iter().map(|l| l.vmax).fold(0.0, f64::max);
            path.push(r.to);
            walk(n, r.to, dest, path, cost + w, out);
            path.pop();
        }
    }
    let mut all = Vec::new();
    walk(n, origin, dest, &mut vec![origin], 0.0, &mut all);
    let best = all.iter().map(|(c, _)| *c).fold(f64::INFINITY, f64::min);
    all.into_iter()
        .filter(|(c, _)| (c - best).abs() <= 1e-9 * best.max(1.0))
        .min_by(|a, b| a.1.cmp(&b.1))
        .map(|(_, p)| (best, p))
}

fn arb_graph() -> impl Strategy<Value = Network> {
    (2u32..=6).prop_flat_map(|nodes| {
        let edge = (0..nodes, 0..nodes, 1u32..6, prop_oneof![Just(5.0), Just(10.0)]);
        proptest::collection::vec(edge, 1..14).prop_map(move |edges| {
            let roads = edges
                .into_iter()
                .filter(|(a, b, _, _)| a != b)
                .enumerate()
                .map(|(i, (a, b, len, v))| road(i as u32, a, b, len as f64 * 10.0, v))
                .collect();
            net(nodes, roads)
        })
    })
}

proptest! {
    #[test]
    fn shortest_path_matches_enumeration(n in arb_graph()) {
        for o in &n.nodes {
            for d in &n.nodes {
                if o == d {
                    continue;
                }
                let got = shortest_path(&n, *o, *d).unwrap();
                let want = enumerate_best(&n, *o, *d);
                match (got, want) {
                    (None, None) => {}
                    (Some(route), Some((cost, nodes))) => {
                        prop_assert!((route.cost - cost).abs() <= 1e-9 * cost.max(1.0));
                        prop_assert_eq!(route.nodes, nodes);
                    }
                    (g, w) => prop_assert!(false, "mismatch {:?} vs {:?}", g, w),
                }
            }
        }
    }

    #[test]
    fn noise_only_lowers_speed(
        v in 0.0f64..20.0,
        vmax in 1.0f64..20.0,
        gap in 0.0f64..200.0,
        vl in 0.0f64..20.0,
        sigma in 0.0f64..=1.0,
        u in 0.0f64..1.0,
        has_leader in any::<bool>(),
    ) {
        let leader = has_leader.then_some((gap, vl));
        let noisy = SimConfig { sigma, ..Default::default() };
        let clean = SimConfig { sigma: 0.0, ..Default::default() };
        prop_assert!(next_speed(v, vmax, leader, &noisy, u) <= next_speed(v, vmax, leader, &clean, u));
    }
}

fn small_scenario(seed: u64, vehicles: u32) -> (Network, TripPlan) {
    let grid = generate_grid(&GridSpec { rows: 2, cols: 3, block_length: 80.0, ..Default::default() }).unwrap();
    let od = generate_base_flow(&grid, &FlowSpec { vehicles_total: vehicles, od_pairs: Some(3), horizon: 200.0, seed })
        .unwrap();
    let plan = build_trips(&TrafficDemand { od, wave: TrafficWave::default() }, &grid, seed).unwrap();
    (grid, plan)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn safety_speed_bounds_and_conservation(seed in 0u64..1000, vehicles in 1u32..120, noisy in any::<bool>()) {
        let (grid, plan) = small_scenario(seed, vehicles);
        let cfg = SimConfig { sigma: if noisy { 0.5 } else { 0.0 }, horizon: 400.0, seed, ..Default::default() };
        let mut state = SimState::new(&grid, &plan, &cfg).unwrap();
        let mut last_speed: HashMap<u32, f64> = HashMap::new();
        for _ in 0..400 {
            state.step();
            let c = state.counters().last().unwrap().clone();
            prop_assert!(c.min_gap >= 0.0);
            prop_assert_eq!(c.released, c.arrived + c.running + c.queued);
            prop_assert_eq!(c.inserted, c.arrived + c.running);
            for v in state.on_network() {
                prop_assert!(v.speed >= 0.0 && v.speed <= v.lane_vmax + 1e-12);
                if let Some(prev) = last_speed.get(&v.vehicle_id) {
                    prop_assert!(v.speed <= prev + cfg.accel * cfg.dt + 1e-9);
                }
                last_speed.insert(v.vehicle_id, v.speed);
            }
        }
    }
}

#[test]
fn unreachable_vehicles_count_with_zero_speed() {
    let n = net(2, vec![road(0, 0, 1, 500.0, 10.0)]);
    let demand = TrafficDemand {
        od: OdFlow {
            entries: vec![
                contraflow::simulation::OdEntry {
                    origin: NodeId(0),
                    destination: NodeId(1),
                    count: 1,
                    window: contraflow::simulation::Window(0.0, 0.5),
                },
                contraflow::simulation::OdEntry {
                    origin: NodeId(1),
                    destination: NodeId(0),
                    count: 1,
                    window: contraflow::simulation::Window(0.0, 0.5),
                },
            ],
        },
        wave: TrafficWave::default(),
    };
    let plan = build_trips(&demand, &n, 0).unwrap();
    let cfg = SimConfig { sigma: 0.0, horizon: 200.0, ..Default::default() };
    let result = simulate(&n, &plan, &cfg).unwrap();
    assert_eq!(result.vehicle_count(), 2);
    let arrived = &result.records.iter().find(|r| r.arrived).unwrap();
    let speed = arrived.route_length / arrived.travel_time;
    assert!((average_speed(&result).unwrap() - speed / 2.0).abs() < 1e-12);
}

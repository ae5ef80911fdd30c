//! Discrete-time car-following simulation.
//!
//! Each tick: due trips join their origin's FIFO queue, queue heads enter the
//! least-occupied lane of their first road when its rear gap allows, and then
//! every vehicle already on the network is advanced lane by lane, front to
//! back. Vehicles inserted during a tick start moving on the next one.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::Rng as _;

use super::demand::TripPlan;
use super::result::{SimResult, StepCounters, VehicleRecord};
use super::{SimConfig, SimError};
use crate::network::{LaneId, Network, NodeId, RoadId};
use crate::seed;

/// Krauss safe speed: the fastest speed from which the follower can still stop
/// behind a leader that brakes at `decel`, given one reaction time `tau`.
pub fn follow_speed(v: f64, v_leader: f64, gap: f64, cfg: &SimConfig) -> f64 {
    let tau = cfg.tau;
    let safe = v_leader + (gap - v_leader * tau) / (tau + (v + v_leader) / (2.0 * cfg.decel));
    safe.max(0.0)
}

/// One vehicle's speed update. `leader` is `(gap, leader_speed)` where `gap`
/// is the free space in front minus `min_gap`, and `u` is the uniform draw
/// used for the speed noise.
pub fn next_speed(v: f64, vmax: f64, leader: Option<(f64, f64)>, cfg: &SimConfig, u: f64) -> f64 {
    let mut desired = vmax.min(v + cfg.accel * cfg.dt);
    if let Some((gap, v_leader)) = leader {
        desired = desired.min(follow_speed(v, v_leader, gap, cfg));
    }
    let mut next = (desired - cfg.sigma * cfg.accel * cfg.dt * u).max(0.0);
    if let Some((gap, _)) = leader {
        // Never close more than the available space within one tick.
        next = next.min(gap / cfg.dt);
    }
    next
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Pending,
    Queued,
    Running,
    Arrived,
}

#[derive(Clone, Debug)]
struct Vehicle {
    vehicle_id: u32,
    origin: NodeId,
    depart_time: f64,
    route: Vec<usize>,
    route_length: f64,
    leg: usize,
    lane: usize,
    pos: f64,
    speed: f64,
    done_distance: f64,
    status: Status,
    travel_time: Option<f64>,
    moved_tick: Option<u64>,
}

#[derive(Clone, Debug)]
struct SimLane {
    id: LaneId,
    vmax: f64,
    vehicles: VecDeque<usize>,
}

#[derive(Clone, Debug)]
struct SimRoad {
    id: RoadId,
    length: f64,
    lanes: Vec<SimLane>,
}

impl SimRoad {
    /// Least-occupied lane; ties go to the lowest lane id (lanes are kept
    /// sorted by id).
    fn entry_lane(&self) -> usize {
        self.lanes
            .iter()
            .enumerate()
            .min_by_key(|(_, l)| l.vehicles.len())
            .map(|(i, _)| i)
            .expect("simulated roads have lanes")
    }
}

/// Read-only view of a vehicle on the network.
#[derive(Clone, Debug, PartialEq)]
pub struct VehicleView {
    pub vehicle_id: u32,
    pub road: RoadId,
    pub lane: LaneId,
    pub position: f64,
    pub speed: f64,
    pub lane_vmax: f64,
}

/// Mutable simulation state advanced by [`SimState::step`].
pub struct SimState {
    cfg: SimConfig,
    roads: Vec<SimRoad>,
    vehicles: Vec<Vehicle>,
    pending: Vec<usize>,
    next_pending: usize,
    origin_queues: BTreeMap<NodeId, VecDeque<usize>>,
    unreachable: Vec<(u32, f64)>,
    tick: u64,
    rng: seed::Rng,
    released: u32,
    inserted: u32,
    arrived: u32,
    counters: Vec<StepCounters>,
}

impl SimState {
    pub fn new(net: &Network, plan: &TripPlan, cfg: &SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let mut roads: Vec<SimRoad> = net
            .roads
            .iter()
            .filter(|r| !r.lanes.is_empty())
            .map(|r| {
                let mut lanes: Vec<SimLane> = r
                    .lanes
                    .iter()
                    .map(|l| SimLane { id: l.id, vmax: l.vmax, vehicles: VecDeque::new() })
                    .collect();
                lanes.sort_by_key(|l| l.id);
                SimRoad { id: r.id, length: r.length, lanes }
            })
            .collect();
        roads.sort_by_key(|r| r.id);
        let index: HashMap<RoadId, usize> =
            roads.iter().enumerate().map(|(i, r)| (r.id, i)).collect();
        let ends: Vec<(NodeId, NodeId)> = roads
            .iter()
            .map(|r| {
                let road = net.road(r.id).expect("road exists");
                (road.from, road.to)
            })
            .collect();

        let mut vehicles = Vec::with_capacity(plan.trips.len());
        for trip in &plan.trips {
            let route = trip
                .route
                .iter()
                .map(|id| index.get(id).copied().ok_or(SimError::RouteNotOnNetwork(trip.vehicle_id)))
                .collect::<Result<Vec<_>, _>>()?;
            let connected = !route.is_empty()
                && ends[route[0]].0 == trip.origin
                && ends[*route.last().unwrap()].1 == trip.destination
                && route.windows(2).all(|w| ends[w[0]].1 == ends[w[1]].0);
            if !connected {
                return Err(SimError::RouteNotOnNetwork(trip.vehicle_id));
            }
            vehicles.push(Vehicle {
                vehicle_id: trip.vehicle_id,
                origin: trip.origin,
                depart_time: trip.depart_time,
                route_length: route.iter().map(|&r| roads[r].length).sum(),
                route,
                leg: 0,
                lane: 0,
                pos: 0.0,
                speed: 0.0,
                done_distance: 0.0,
                status: Status::Pending,
                travel_time: None,
                moved_tick: None,
            });
        }
        let mut pending: Vec<usize> = (0..vehicles.len()).collect();
        pending.sort_by(|&a, &b| {
            vehicles[a]
                .depart_time
                .total_cmp(&vehicles[b].depart_time)
                .then(vehicles[a].vehicle_id.cmp(&vehicles[b].vehicle_id))
        });
        Ok(Self {
            cfg: cfg.clone(),
            roads,
            vehicles,
            pending,
            next_pending: 0,
            origin_queues: BTreeMap::new(),
            unreachable: plan.unreachable.iter().map(|u| (u.vehicle_id, u.depart_time)).collect(),
            tick: 0,
            rng: seed::rng(cfg.seed),
            released: 0,
            inserted: 0,
            arrived: 0,
            counters: Vec::new(),
        })
    }

    /// Simulation clock in seconds (start of the next tick).
    pub fn time(&self) -> f64 {
        self.tick as f64 * self.cfg.dt
    }

    pub fn counters(&self) -> &[StepCounters] {
        &self.counters
    }

    pub fn on_network(&self) -> Vec<VehicleView> {
        let mut out = Vec::new();
        for road in &self.roads {
            for lane in &road.lanes {
                for &v in &lane.vehicles {
                    let veh = &self.vehicles[v];
                    out.push(VehicleView {
                        vehicle_id: veh.vehicle_id,
                        road: road.id,
                        lane: lane.id,
                        position: veh.pos,
                        speed: veh.speed,
                        lane_vmax: lane.vmax,
                    });
                }
            }
        }
        out
    }

    /// Smallest bumper-to-bumper gap between consecutive vehicles of any lane,
    /// `+inf` when no lane holds two vehicles.
    pub fn min_bumper_gap(&self) -> f64 {
        let len = self.cfg.vehicle_length;
        let mut min = f64::INFINITY;
        for road in &self.roads {
            for lane in &road.lanes {
                for pair in lane.vehicles.iter().collect::<Vec<_>>().windows(2) {
                    let gap = self.vehicles[*pair[0]].pos - len - self.vehicles[*pair[1]].pos;
                    min = min.min(gap);
                }
            }
        }
        min
    }

    /// Advances the state by one tick of `dt` seconds.
    pub fn step(&mut self) {
        let now = self.time();
        let end = (self.tick + 1) as f64 * self.cfg.dt;
        self.release(now);
        self.insert();
        for r in 0..self.roads.len() {
            for l in 0..self.roads[r].lanes.len() {
                self.advance_lane(r, l, end);
            }
        }
        self.tick += 1;
        let running = self.inserted - self.arrived;
        self.counters.push(StepCounters {
            time: end,
            released: self.released,
            inserted: self.inserted,
            arrived: self.arrived,
            running,
            queued: self.released - self.inserted,
            min_gap: self.min_bumper_gap(),
        });
    }

    fn release(&mut self, now: f64) {
        while let Some(&v) = self.pending.get(self.next_pending) {
            if self.vehicles[v].depart_time > now {
                break;
            }
            self.next_pending += 1;
            self.vehicles[v].status = Status::Queued;
            self.released += 1;
            let origin = self.vehicles[v].origin;
            self.origin_queues.entry(origin).or_default().push_back(v);
        }
    }

    fn rear_space(&self, road: usize, lane: usize) -> f64 {
        match self.roads[road].lanes[lane].vehicles.back() {
            Some(&last) => self.vehicles[last].pos - self.cfg.vehicle_length,
            None => f64::INFINITY,
        }
    }

    fn insert(&mut self) {
        let origins: Vec<NodeId> = self.origin_queues.keys().copied().collect();
        for origin in origins {
            while let Some(&v) = self.origin_queues[&origin].front() {
                let road = self.vehicles[v].route[0];
                let lane = self.roads[road].entry_lane();
                if self.rear_space(road, lane) < self.cfg.min_gap {
                    break;
                }
                self.origin_queues.get_mut(&origin).unwrap().pop_front();
                let veh = &mut self.vehicles[v];
                veh.status = Status::Running;
                veh.lane = lane;
                veh.pos = 0.0;
                veh.speed = 0.0;
                veh.moved_tick = Some(self.tick);
                self.roads[road].lanes[lane].vehicles.push_back(v);
                self.inserted += 1;
            }
        }
    }

    fn advance_lane(&mut self, r: usize, l: usize, end: f64) {
        let snapshot: Vec<usize> = self.roads[r].lanes[l].vehicles.drain(..).collect();
        let length = self.roads[r].length;
        let vmax = self.roads[r].lanes[l].vmax;
        let mut kept = VecDeque::with_capacity(snapshot.len());
        // (rear position, speed) of the nearest vehicle ahead that stays on this lane.
        let mut leader: Option<(f64, f64)> = None;

        for v in snapshot {
            if self.vehicles[v].moved_tick == Some(self.tick) {
                let veh = &self.vehicles[v];
                leader = Some((veh.pos - self.cfg.vehicle_length, veh.speed));
                kept.push_back(v);
                continue;
            }
            let (pos, speed) = (self.vehicles[v].pos, self.vehicles[v].speed);
            let ahead = leader.map(|(rear, vl)| ((rear - pos - self.cfg.min_gap).max(0.0), vl));
            let u: f64 = self.rng.gen();
            let new_speed = next_speed(speed, vmax, ahead, &self.cfg, u);
            let new_pos = pos + new_speed * self.cfg.dt;
            self.vehicles[v].moved_tick = Some(self.tick);

            if new_pos < length {
                self.vehicles[v].pos = new_pos;
                self.vehicles[v].speed = new_speed;
            } else if self.vehicles[v].leg + 1 == self.vehicles[v].route.len() {
                let veh = &mut self.vehicles[v];
                veh.done_distance += length;
                veh.pos = 0.0;
                veh.speed = new_speed;
                veh.status = Status::Arrived;
                veh.travel_time = Some(end - veh.depart_time);
                self.arrived += 1;
                continue;
            } else {
                let next_road = self.vehicles[v].route[self.vehicles[v].leg + 1];
                let next_lane = self.roads[next_road].entry_lane();
                let space = self.rear_space(next_road, next_lane);
                if space >= self.cfg.min_gap {
                    let overshoot = (new_pos - length)
                        .min(space - self.cfg.min_gap)
                        .min(self.roads[next_road].length);
                    let lane_vmax = self.roads[next_road].lanes[next_lane].vmax;
                    let veh = &mut self.vehicles[v];
                    veh.done_distance += length;
                    veh.leg += 1;
                    veh.lane = next_lane;
                    veh.pos = overshoot;
                    veh.speed = new_speed.min(lane_vmax);
                    self.roads[next_road].lanes[next_lane].vehicles.push_back(v);
                    continue;
                }
                // Blocked: hold at the stop line.
                self.vehicles[v].pos = length;
                self.vehicles[v].speed = 0.0;
            }
            let veh = &self.vehicles[v];
            leader = Some((veh.pos - self.cfg.vehicle_length, veh.speed));
            kept.push_back(v);
        }
        // Routes never revisit a road, so nothing was pushed onto this lane
        // while it was drained.
        self.roads[r].lanes[l].vehicles = kept;
    }

    /// Runs to the horizon and collects per-vehicle records.
    pub fn finish(mut self) -> SimResult {
        let ticks = self.cfg.ticks();
        while self.tick < ticks {
            self.step();
        }
        let horizon = self.time();
        let mut records: Vec<VehicleRecord> = self
            .vehicles
            .iter()
            .map(|v| {
                let arrived = v.status == Status::Arrived;
                let (travel_time, distance) = if arrived {
                    (v.travel_time.expect("arrived vehicles have a travel time"), v.route_length)
                } else {
                    let on_road = if v.status == Status::Running { v.pos } else { 0.0 };
                    ((horizon - v.depart_time).max(0.0), v.done_distance + on_road)
                };
                VehicleRecord {
                    vehicle_id: v.vehicle_id,
                    route_length: v.route_length,
                    travel_time,
                    distance,
                    depart_time: v.depart_time,
                    arrived,
                    reachable: true,
                }
            })
            .collect();
        records.extend(self.unreachable.iter().map(|&(vehicle_id, depart_time)| VehicleRecord {
            vehicle_id,
            route_length: 0.0,
            travel_time: 0.0,
            distance: 0.0,
            depart_time,
            arrived: false,
            reachable: false,
        }));
        records.sort_by_key(|r| r.vehicle_id);
        SimResult { records, horizon, counters: self.counters }
    }
}

/// Simulates `plan` on `net` from time 0 to the configured horizon.
pub fn simulate(net: &Network, plan: &TripPlan, cfg: &SimConfig) -> Result<SimResult, SimError> {
    Ok(SimState::new(net, plan, cfg)?.finish())
}

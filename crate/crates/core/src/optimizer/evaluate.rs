//! Simulation-backed fitness evaluation and the record of evaluated masks.

use std::collections::HashMap;
use std::io;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use super::{Fitness, OptError};
use crate::network::{apply_reversal, Network, ReversalMask};
use crate::seed;
use crate::simulation::{average_speed, build_trips, simulate, SimConfig, TrafficDemand};

/// Everything needed to score a mask: base network, demand and simulator
/// settings.
#[derive(Clone, Debug)]
pub struct Problem {
    pub network: Network,
    pub demand: TrafficDemand,
    pub sim: SimConfig,
}

impl Problem {
    pub fn new(network: Network, demand: TrafficDemand, sim: SimConfig) -> Self {
        Self { network, demand, sim }
    }

    pub fn mask_len(&self) -> usize {
        self.network.reversible_count()
    }

    /// Seed for departure-time draws. It does not depend on the mask, so all
    /// masks face the same departure schedule within a replication.
    pub fn trip_seed(&self, replication: usize) -> u64 {
        seed::derive_with(self.sim.seed, "trips", &(replication as u64).to_le_bytes())
    }

    /// Seed for the driver speed noise, derived from the mask bits so the
    /// result does not depend on evaluation order.
    pub fn noise_seed(&self, mask: &ReversalMask, replication: usize) -> u64 {
        let mut extra = (replication as u64).to_le_bytes().to_vec();
        extra.extend(mask.to_string().bytes());
        seed::derive_with(self.sim.seed, "noise", &extra)
    }

    /// Average speed of one simulated replication.
    pub fn simulate_once(&self, mask: &ReversalMask, replication: usize) -> Result<f64, OptError> {
        let net = apply_reversal(&self.network, mask)?;
        let plan = build_trips(&self.demand, &net, self.trip_seed(replication))?;
        let cfg = SimConfig { seed: self.noise_seed(mask, replication), ..self.sim.clone() };
        let result = simulate(&net, &plan, &cfg)?;
        Ok(average_speed(&result)?)
    }
}

#[derive(Serialize, Deserialize)]
struct CacheRow {
    mask_bits: String,
    z1: f64,
    z2: usize,
}

/// Thread-safe record of evaluated masks.
#[derive(Debug, Default)]
pub struct EvalCache {
    entries: RwLock<HashMap<ReversalMask, Fitness>>,
    hits: AtomicU64,
    misses: AtomicU64,
    simulations: AtomicU64,
}

impl EvalCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    /// Number of simulation runs performed through this cache.
    pub fn simulations(&self) -> u64 {
        self.simulations.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lookup without touching the counters.
    pub fn peek(&self, mask: &ReversalMask) -> Option<Fitness> {
        self.entries.read().unwrap().get(mask).copied()
    }

    /// Lookup that counts a hit when found.
    pub fn lookup(&self, mask: &ReversalMask) -> Option<Fitness> {
        let found = self.peek(mask);
        if found.is_some() {
            self.hits.fetch_add(1, Ordering::Relaxed);
        }
        found
    }

    /// Stores a value unless one is already present; the stored value wins.
    fn store(&self, mask: &ReversalMask, fitness: Fitness) -> Fitness {
        *self.entries.write().unwrap().entry(mask.clone()).or_insert(fitness)
    }

    /// All entries ordered by mask bits.
    pub fn entries(&self) -> Vec<(ReversalMask, Fitness)> {
        let mut out: Vec<_> =
            self.entries.read().unwrap().iter().map(|(m, f)| (m.clone(), *f)).collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Writes `mask_bits,z1,z2` rows for warm restarts.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), OptError> {
        let mut w = csv::Writer::from_writer(out);
        for (mask, f) in self.entries() {
            w.serialize(CacheRow { mask_bits: mask.to_string(), z1: f.z1, z2: f.z2 })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(input: R) -> Result<Self, OptError> {
        let cache = Self::new();
        for row in csv::Reader::from_reader(input).deserialize() {
            let row: CacheRow = row?;
            let mask: ReversalMask = row.mask_bits.parse()?;
            if mask.count_ones() != row.z2 {
                return Err(OptError::Config(format!(
                    "cache row {} has z2 {} but {} set bits",
                    row.mask_bits,
                    row.z2,
                    mask.count_ones()
                )));
            }
            cache.store(&mask, Fitness { z1: row.z1, z2: row.z2 });
        }
        Ok(cache)
    }
}

/// Scores a feasible mask: z1 is the mean average speed over `replications`
/// simulations, z2 the number of reversed lanes. Cached masks are returned
/// without simulating.
pub fn evaluate(
    problem: &Problem,
    mask: &ReversalMask,
    replications: usize,
    cache: &EvalCache,
) -> Result<Fitness, OptError> {
    if let Some(f) = cache.lookup(mask) {
        return Ok(f);
    }
    cache.misses.fetch_add(1, Ordering::Relaxed);
    let replications = replications.max(1);
    let mut total = 0.0;
    for r in 0..replications {
        total += problem.simulate_once(mask, r)?;
        cache.simulations.fetch_add(1, Ordering::Relaxed);
    }
    let fitness = Fitness { z1: total / replications as f64, z2: mask.count_ones() };
    Ok(cache.store(mask, fitness))
}

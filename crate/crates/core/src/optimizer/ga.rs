//! The generational loop: initialize, evaluate, sort, then rebuild the whole
//! population through tournament, crossover, mutation and repair. No
//! individual is carried over unchanged, so the Pareto archive is the only
//! memory of good solutions.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::evaluate::{evaluate, EvalCache, Problem};
use super::operators::{mutate, one_point_crossover, tournament_select};
use super::pareto::{non_dominated_sort, ParetoArchive};
use super::{GaConfig, Individual, OptError};
use crate::network::{repair, NodeId, ReversalMask};
use crate::seed::{self, Rng as SeededRng};
use crate::simulation::Router;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenerationStats {
    pub generation: usize,
    /// Best z1 over every evaluation so far (running maximum).
    pub best_z1: f64,
    /// Mean z1 of this generation's population.
    pub mean_z1: f64,
    pub archive_size: usize,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub archive: ParetoArchive,
    pub history: Vec<GenerationStats>,
    /// Archive copies taken at the configured snapshot generations.
    pub snapshots: BTreeMap<usize, ParetoArchive>,
    pub final_population: Vec<Individual>,
    /// Every mask evaluated during the run, in first-evaluation order.
    pub evaluated: Vec<ReversalMask>,
}

pub fn write_history_csv<W: io::Write>(history: &[GenerationStats], out: W) -> Result<(), OptError> {
    let mut w = csv::Writer::from_writer(out);
    for row in history {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Bits whose reversal adds a lane to a road on the free-flow route of a
/// wave OD pair.
pub fn wave_proximal_bits(problem: &Problem) -> Result<Vec<usize>, OptError> {
    let net = &problem.network;
    let mut router = Router::new(net);
    let mut wave_roads: HashSet<(NodeId, NodeId)> = HashSet::new();
    for (o, d) in problem.demand.wave.od_pairs(&problem.demand.od) {
        if let Some(route) = router.shortest_path(o, d)? {
            wave_roads.extend(route.nodes.windows(2).map(|w| (w[0], w[1])));
        }
    }
    Ok(net
        .reversible_lanes
        .iter()
        .enumerate()
        .filter(|(_, r)| wave_roads.contains(&r.reverse_to))
        .map(|(i, _)| i)
        .collect())
}

struct Breeder<'a> {
    problem: &'a Problem,
    cfg: &'a GaConfig,
    rng: SeededRng,
}

impl Breeder<'_> {
    /// Repair, then enforce the change cap by clearing random set bits, then
    /// repair again in case the cap broke a dependency.
    fn finalize(&mut self, mask: &ReversalMask) -> Result<ReversalMask, OptError> {
        let cons = &self.problem.network.constraints;
        let mut out = repair(mask, cons)?;
        if let Some(cap) = self.cfg.z2_cap {
            let ones: Vec<usize> = out.ones().collect();
            if ones.len() > cap {
                for k in sample(&mut self.rng, ones.len(), ones.len() - cap) {
                    out.set(ones[k], false);
                }
                out = repair(&out, cons)?;
            }
        }
        Ok(out)
    }

    fn random_subset(&mut self, pool: &[usize], n: usize, min: usize) -> ReversalMask {
        let k = self.rng.gen_range(min..=pool.len());
        let mut mask = ReversalMask::zeros(n);
        for idx in sample(&mut self.rng, pool.len(), k) {
            mask.set(pool[idx], true);
        }
        mask
    }

    /// Initial masks have a uniformly drawn number of set bits, so the first
    /// population spreads across the z2 axis. The wave-seeded share only sets
    /// bits from `proximal`.
    fn initial_population(&mut self, proximal: &[usize]) -> Result<Vec<Individual>, OptError> {
        let n = self.problem.mask_len();
        let all: Vec<usize> = (0..n).collect();
        let seeded = if proximal.is_empty() {
            0
        } else {
            (self.cfg.wave_seed_fraction * self.cfg.pop_size as f64).round() as usize
        };
        (0..self.cfg.pop_size)
            .map(|i| {
                let raw = if i < seeded {
                    self.random_subset(proximal, n, 1)
                } else {
                    self.random_subset(&all, n, 0)
                };
                Ok(Individual::new(self.finalize(&raw)?))
            })
            .collect()
    }

    fn offspring(&mut self, parents: &[Individual]) -> Result<Vec<Individual>, OptError> {
        let mut next = Vec::with_capacity(self.cfg.pop_size);
        while next.len() < self.cfg.pop_size {
            let p1 = tournament_select(parents, &mut self.rng)?.mask.clone();
            let p2 = tournament_select(parents, &mut self.rng)?.mask.clone();
            let (c1, c2) = one_point_crossover(&p1, &p2, self.cfg.crossover_rate, &mut self.rng)?;
            for child in [c1, c2] {
                let child = mutate(&child, self.cfg.mutation_rate, &mut self.rng);
                next.push(Individual::new(self.finalize(&child)?));
            }
        }
        next.truncate(self.cfg.pop_size);
        Ok(next)
    }
}

/// Evaluates a population, simulating each distinct unseen mask exactly once
/// (in parallel on the current rayon pool).
pub fn evaluate_population(
    problem: &Problem,
    pop: &mut [Individual],
    replications: usize,
    cache: &EvalCache,
) -> Result<Vec<ReversalMask>, OptError> {
    let fresh: BTreeSet<ReversalMask> = pop
        .iter()
        .filter(|ind| cache.peek(&ind.mask).is_none())
        .map(|ind| ind.mask.clone())
        .collect();
    let fresh: Vec<ReversalMask> = fresh.into_iter().collect();
    fresh
        .par_iter()
        .map(|mask| evaluate(problem, mask, replications, cache).map(|_| ()))
        .collect::<Result<Vec<()>, _>>()?;

    let mut first_seen: HashSet<&ReversalMask> = fresh.iter().collect();
    for ind in pop.iter_mut() {
        let fitness = if first_seen.remove(&ind.mask) {
            cache.peek(&ind.mask)
        } else {
            cache.lookup(&ind.mask)
        };
        ind.fitness = Some(fitness.expect("evaluated above"));
    }
    Ok(fresh)
}

/// Runs the optimizer. Evaluations go through `cache`, which may be pre-filled
/// from an earlier run.
pub fn run(problem: &Problem, cfg: &GaConfig, cache: &EvalCache) -> Result<RunResult, OptError> {
    cfg.validate()?;
    let n = problem.mask_len();
    if n < 2 {
        return Err(OptError::Config(format!("need at least 2 reversible lanes, found {n}")));
    }
    problem.network.constraints.validate(n)?;
    problem.demand.validate(&problem.network)?;

    let proximal = if cfg.wave_seed_fraction > 0.0 {
        wave_proximal_bits(problem)?
    } else {
        Vec::new()
    };
    let mut breeder = Breeder { problem, cfg, rng: seed::rng(seed::derive(cfg.seed, "ga")) };

    let mut archive = ParetoArchive::new();
    let mut history = Vec::with_capacity(cfg.generations + 1);
    let mut snapshots = BTreeMap::new();
    let mut evaluated = Vec::new();
    let mut seen = HashSet::new();
    let mut best = f64::NEG_INFINITY;

    let mut pop = breeder.initial_population(&proximal)?;
    for generation in 0..=cfg.generations {
        if generation > 0 {
            pop = breeder.offspring(&pop)?;
        }
        evaluate_population(problem, &mut pop, cfg.replications, cache)?;
        for ind in &pop {
            let f = ind.fitness.expect("population evaluated");
            archive.insert(&ind.mask, f);
            best = best.max(f.z1);
            if seen.insert(ind.mask.clone()) {
                evaluated.push(ind.mask.clone());
            }
        }
        non_dominated_sort(&mut pop)?;
        let mean = pop.iter().map(|i| i.fitness.unwrap().z1).sum::<f64>() / pop.len() as f64;
        history.push(GenerationStats {
            generation,
            best_z1: best,
            mean_z1: mean,
            archive_size: archive.len(),
        });
        if cfg.snapshot_generations.contains(&generation) {
            snapshots.insert(generation, archive.clone());
        }
    }

    Ok(RunResult { archive, history, snapshots, final_population: pop, evaluated })
}

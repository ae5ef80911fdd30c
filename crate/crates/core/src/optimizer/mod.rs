//! Multi-objective genetic algorithm over reversal masks.
//!
//! Objectives: maximize the simulated average speed (`z1`) and minimize the
//! number of reversed lanes (`z2`).

mod evaluate;
mod ga;
mod operators;
mod pareto;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{NetworkError, ReversalMask};
use crate::simulation::SimError;

pub use evaluate::{evaluate, EvalCache, Problem};
pub use ga::{evaluate_population, run, wave_proximal_bits, write_history_csv, GenerationStats, RunResult};
pub use operators::{crossover_at, mutate, one_point_crossover, tournament_select};
pub use pareto::{dominates, non_dominated_ranks, non_dominated_sort, ParetoArchive};

pub const CROSSOVER_PRESETS: [f64; 3] = [0.10, 0.25, 0.50];
pub const MUTATION_PRESETS: [f64; 3] = [0.05, 0.10, 0.15];

#[derive(Debug, Error)]
pub enum OptError {
    #[error("invalid optimizer config: {0}")]
    Config(String),
    #[error("individual {0} has no fitness")]
    Unevaluated(usize),
    #[error("individual {0} has no rank")]
    Unranked(usize),
    #[error("tournament needs at least 2 individuals, got {0}")]
    PopulationTooSmall(usize),
    #[error("mask lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fitness {
    /// Average speed in m/s, maximized.
    pub z1: f64,
    /// Number of reversed lanes, minimized.
    pub z2: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub mask: ReversalMask,
    pub fitness: Option<Fitness>,
    pub rank: Option<usize>,
}

impl Individual {
    pub fn new(mask: ReversalMask) -> Self {
        Self { mask, fitness: None, rank: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub pop_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub replications: usize,
    pub seed: u64,
    /// Fixed-change mode: masks are cut down to at most this many set bits.
    pub z2_cap: Option<usize>,
    /// Share of the initial population drawn only from wave-adjacent lanes.
    pub wave_seed_fraction: f64,
    pub snapshot_generations: Vec<usize>,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            pop_size: 30,
            generations: 50,
            crossover_rate: 0.50,
            mutation_rate: 0.15,
            replications: 1,
            seed: 0,
            z2_cap: None,
            wave_seed_fraction: 0.0,
            snapshot_generations: vec![15, 30, 50],
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), OptError> {
        if self.pop_size < 4 || !self.pop_size.is_multiple_of(2) {
            return Err(OptError::Config(format!(
                "pop_size must be even and >= 4, got {}",
                self.pop_size
            )));
        }
        for (name, p) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(OptError::Config(format!("{name} must lie in (0, 1], got {p}")));
            }
        }
        if self.replications == 0 {
            return Err(OptError::Config("replications must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.wave_seed_fraction) {
            return Err(OptError::Config("wave_seed_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        GaConfig::default().validate().unwrap();
        for bad in [
            GaConfig { pop_size: 5, ..Default::default() },
            GaConfig { pop_size: 2, ..Default::default() },
            GaConfig { crossover_rate: 0.0, ..Default::default() },
            GaConfig { mutation_rate: 1.5, ..Default::default() },
            GaConfig { replications: 0, ..Default::default() },
            GaConfig { wave_seed_fraction: 2.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        assert!(CROSSOVER_PRESETS.contains(&GaConfig::default().crossover_rate));
        assert!(MUTATION_PRESETS.contains(&GaConfig::default().mutation_rate));
    }
}

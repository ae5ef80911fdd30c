//! Lane-reversal optimization via simulation.
//!
//! A binary mask selects which reversible lanes of a road network flip
//! direction. Each mask is scored by a microscopic car-following simulation
//! (average vehicle speed, maximized) and by the number of reversed lanes
//! (minimized). A multi-objective genetic algorithm searches the mask space
//! and keeps every non-dominated mask it meets in a Pareto archive.
//!
//! - [`network`]: road network, reversal constraints, mask application
//! - [`simulation`]: demand expansion, routing, car-following engine
//! - [`optimizer`]: dominance, genetic operators, cached evaluation, GA loop
//! - [`scenario`]: grid networks, base flows and traffic waves

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod network;
pub mod optimizer;
pub mod scenario;
pub mod seed;
pub mod simulation;

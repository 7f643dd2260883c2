//! Multi-agent routing and scheduling through coalition formation.
//!
//! Agents form, disband and reform coalitions to work spatially distributed
//! nodes that carry workloads, profits, time windows and precedences. The
//! crate provides
//!
//!  * the problem model and its objective ([`model`]),
//!  * a feasibility validator ([`feasibility`]),
//!  * seeded coalition value functions ([`values`]),
//!  * the Bounded Node Traversal anytime heuristic ([`bnt`]),
//!  * an earliest-deadline-first baseline ([`edf`]),
//!  * an exhaustive solver for small instances and the team orienteering
//!    reduction ([`exact`]),
//!  * scenario generation from incident records ([`scenarios`]),
//!  * and the experiment harness with bootstrap statistics ([`bench`]).
//!
//! Batch work (experiment grids, replicated runs) goes through [`par`], which
//! uses rayon when the `parallel` feature is on and plain iteration otherwise.
//!
//! ```
//! use marsc::{bnt, feasibility, model, scenarios::{synth_instance, ScenarioParams}};
//!
//! let params = ScenarioParams { n_agents: 3, ratio: 2, seed: 7, ..Default::default() };
//! let instance = synth_instance(&params).unwrap();
//! let solution = bnt::solve_bnt(&instance, &bnt::BntConfig::default());
//! assert!(feasibility::validate(&solution, &instance).is_empty());
//! assert!(model::score(&solution, &instance) >= 0.0);
//! ```

pub mod bench;
pub mod bnt;
pub mod edf;
pub mod exact;
pub mod feasibility;
pub mod model;
pub mod par;
pub mod rng;
pub mod scenarios;
pub mod values;

#[cfg(test)]
pub(crate) mod testutil;

pub use model::{Instance, Solution};

//! Re-optimization of service function chain placement under reconfiguration
//! cost.
//!
//! Given an [`Instance`] and the currently deployed [`NetworkState`], the
//! solvers search for a new placement and routing minimizing
//! `(1 - alpha) * cost_np + alpha * cost_rec`, where `cost_np` is the
//! normalized server energy and `cost_rec` averages six normalized
//! reconfiguration terms (see [`cost`]).
//!
//! ```
//! use sfc_reconfig::{generate_scenario, initial_state, solver, ScenarioSize};
//!
//! let inst = generate_scenario(ScenarioSize::Small, 7, None).unwrap();
//! let state = initial_state(&inst).unwrap();
//! let opts = solver::SolverOptions::anneal(1);
//! let res = solver::solve(&inst, &state, 1.0, &opts).unwrap();
//! assert_eq!(res.solution.breakdown.cost_rec, 0.0);
//! ```

pub mod cost;
pub mod error;
pub mod feasibility;
pub mod fixtures;
pub mod io;
pub mod milp;
pub mod model;
pub mod scenario;
pub mod solver;
pub mod space;
pub mod sweep;
pub mod topology;

pub use cost::{total_cost, CostBreakdown, CostEngine, CostTerms};
pub use error::{Error, Result};
pub use feasibility::{validate, ViolationKind, ViolationReport};
pub use model::{Configuration, Flow, Instance, NetworkState, ReconfigSolution, Server, Sfc, VnfType};
pub use scenario::{generate_scenario, initial_state, ScenarioOverrides, ScenarioSize};
pub use space::{CandidateSet, Decision};
pub use topology::{build_leaf_spine, Topology};

//! Deterministic, configurable branch-and-bound MILP solver with a
//! bounded-variable primal simplex core.

pub mod bnb;
pub mod config;
pub mod simplex;

pub use bnb::{branch_and_bound, Limits, SolveResult, SolveStatus};
pub use config::{
    sample_config, BranchingRule, ConfigParseError, ConfigSpace, NodeSelection, SolverConfig,
};
pub use simplex::{solve_lp_relaxation, LpError, LpOutcome};

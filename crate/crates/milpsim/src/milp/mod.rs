//! MILP instance definition, MPS subset IO, synthetic generators and
//! assignment evaluation.

pub mod generate;
pub mod instance;
pub mod mps;

pub use generate::{generate_instance, generate_with_planted, Family, GenerateError};
pub use instance::{
    evaluate_assignment, Assignment, FeasibilityReport, InstanceError, MilpInstance, Sense,
    VarKind, FEASIBILITY_TOL,
};
pub use mps::{parse_mps, write_mps, MpsError};

//! Radial-network optimal power flow: the branch-flow conic relaxation,
//! closed-form strong-duality conditions with constructive Slater points,
//! explicit conic duals, and a homogeneous self-dual interior-point solver
//! used to measure primal–dual gaps.

pub mod cases;
pub mod conditions;
pub mod dual;
pub mod experiment;
pub mod formulation;
pub mod network;
pub mod program;
pub mod solver;
pub mod sparse;

pub use conditions::{certify_strong_duality, check_conditions, Certification, Condition, ConditionReport, SlaterCertificate, Verdict};
pub use dual::{build_dual, duality_gap, DualProgram};
pub use experiment::{GapStudyResult, InstanceSpec, ReportFormat};
pub use formulation::{build_opf_cr, ObjectiveSpec, PhysicalPoint, ReformPoint};
pub use network::{parse_network, Network, NetworkError, NetworkSource, NodeLimits, ValidationError};
pub use program::{Cone, ConicProgram};
pub use solver::{solve, Solution, SolverOptions, Status};

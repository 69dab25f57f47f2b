//! Moment relaxations of the OPF problem and interpretation of their solutions.

pub mod basis;
pub mod relaxation;
pub mod solution;

pub use basis::{apply_lift, basis_size, LiftedVariableMap, MonomialBasis};
pub use relaxation::{
    add_reactive_penalty, build_relaxation, localizing_matrix, localizing_order, moment_matrix, pin_injection,
    BlockOrigin, Constraint, MomentProblem, RelaxationOptions,
};
pub use solution::{
    check_rank, extract_voltages, moment_matrix_value, second_moment_block, solve_relaxation,
    voltages_from_second_moments, RankVerdict, RelaxationResult, SolverStats, DEFAULT_RANK_TOL,
};

//! q-calculus primitives and q-Duhamel solvers for linear Cauchy problems
//! posed on geometric time lattices.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below fix the scalar to `f64`.

pub mod duhamel;
pub mod error;
pub mod linalg;
pub mod operators;
pub mod propagator;
pub mod qcore;
pub mod scalar;
pub mod verify;

pub use duhamel::{
    solve_classical_korder, solve_classical_system, solve_coupled, solve_q_first, solve_q_korder,
    solve_q_second, solve_q_system, CoupledOrder, CoupledResult, CoupledSystem, DuhamelOptions,
    DuhamelResult, Evaluation, QuadratureAnchor, SolveMode,
};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use operators::{
    assemble_jackson_dx, assemble_rubin_dx, block_first_order, block_mixed, block_second_order,
    companion_kth, BlockOperator, LinearOperator, SignConvention, SpatialGrid,
};
pub use propagator::{
    propagate_from_lattice_point, propagate_from_origin, step_implicit, AuxiliaryProblem,
    CauchyProblem, Forcing, LatticeSolution, PolynomialForcing, ZeroForcing,
};
pub use qcore::{
    inverse_jackson_derivative, jackson_derivative, jackson_integral, q_bracket, q_exponential,
    q_factorial, q_leibniz_parametric, rubin_derivative, ExpMode, JacksonSum, QParam, TimeLattice,
};
pub use scalar::Real;
pub use verify::{
    identity_suite, initial_condition_check, limit_study, oracle_q_integral, q_residual,
    IdentityReport, LimitStudy, ResidualReport,
};

pub type QParam64 = QParam<f64>;
pub type TimeLattice64 = TimeLattice<f64>;
pub type Matrix64 = Matrix<f64>;
pub type LinearOperator64 = LinearOperator<f64>;
pub type CauchyProblem64 = CauchyProblem<f64>;
pub type LatticeSolution64 = LatticeSolution<f64>;
pub type DuhamelResult64 = DuhamelResult<f64>;

pub type QParam32 = QParam<f32>;
pub type TimeLattice32 = TimeLattice<f32>;
pub type Matrix32 = Matrix<f32>;
pub type LatticeSolution32 = LatticeSolution<f32>;

//! Primal-dual interior-point solver for linear, second-order cone and
//! semidefinite programs in standard form, plus a dense simplex for small
//! LPs.

mod builder;
mod cone;
mod ipm;
pub mod linalg;
mod presolve;
mod problem;
pub mod reference;
mod schur;
mod simplex;

pub use builder::{BlockId, DualBuilder, Var};
pub use ipm::solve;
pub use presolve::dense_independent_rows;
pub use problem::{Cone, ConicProblem, ConicSolution, IterateRecord, SolverOptions, SparseMatrix, Status};
pub use simplex::{solve_lp, VarBound};

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

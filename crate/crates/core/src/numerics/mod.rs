//! Dense numerical kernel: least squares, symmetric eigendecomposition and
//! interior-point LP/QP solvers.
//!
//! Problem sizes in this crate are small (a few thousand variables at most),
//! so everything here is dense and single-threaded.

pub mod dense;
pub mod eig;
pub mod lp;
pub mod lstsq;
pub mod qp;

use serde::{Deserialize, Serialize};

pub use eig::{eig_sym, hermitian_eigenvalues, spectral_norm, SymmetricEigen};
pub use lp::{solve_lp, LpOptions, LpSolution};
pub use lstsq::least_squares;
pub use qp::{solve_qp, QpOptions, QpProblem, QpSolution};

/// Primal feasibility tolerance of [`solve_lp`], scaled by `1 + ‖b‖`.
pub const LP_FEASIBILITY_TOL: f64 = 1e-6;
/// Relative duality-gap tolerance of [`solve_lp`].
pub const LP_GAP_TOL: f64 = 1e-6;
/// Scaled KKT tolerance of [`solve_qp`].
pub const QP_KKT_TOL: f64 = 1e-6;
/// `‖Aᴴ(b − Ax)‖ ≤ LS_ORTHOGONALITY_TOL · ‖A‖ · ‖b‖` for [`least_squares`].
pub const LS_ORTHOGONALITY_TOL: f64 = 1e-8;
/// Eigen-residual tolerance of [`eig_sym`], relative to `‖S‖`.
pub const EIG_RESIDUAL_TOL: f64 = 1e-8;
/// Orthonormality tolerance of the eigenvectors returned by [`eig_sym`].
pub const EIG_ORTHO_TOL: f64 = 1e-9;
/// Iteration cap shared by the interior-point solvers.
pub const IPM_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Optimal,
    MaxIter,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverReport {
    pub status: SolverStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    /// Numerical rank, for solvers that detect it.
    pub rank: Option<usize>,
}

impl SolverReport {
    pub fn is_optimal(&self) -> bool {
        self.status == SolverStatus::Optimal
    }
}

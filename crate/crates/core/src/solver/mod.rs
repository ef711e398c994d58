//! l_p projection of a point onto a polyhedron.
//!
//! `p = 2` is solved by a dual active-set (Goldfarb-Idnani) method with
//! identity Hessian. `p = 1` and `p = inf` are solved through the epigraph
//! linear program `min t s.t. |v - x|_p <= t, v in P`, written in terms of the
//! extreme points ("atoms") of the unit l_p ball: `v = x + sum_k nu_k a_k`,
//! `t = sum_k nu_k`. The LP then has one row per constraint of `P` and its
//! columns are generated on demand by a closed-form pricing oracle, which
//! keeps the basis small even when the input dimension is large.

mod qp;
mod simplex;

use alloc::vec::Vec;
use core::fmt;

use crate::geometry::Polyhedron;
use crate::linalg::Norm;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Constraint violation accepted in a returned point.
    pub feas: f64,
    /// Absolute optimality gap.
    pub opt: f64,
    pub max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { feas: 1e-6, opt: 1e-5, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub status: ProjectionStatus,
    /// Minimizer; empty unless `status == Optimal`.
    pub point: Vec<f64>,
    /// `|x - point|_p`; `+inf` unless `status == Optimal`.
    pub distance: f64,
    pub iterations: usize,
}

impl ProjectionResult {
    fn optimal(x: &[f64], point: Vec<f64>, norm: Norm, iterations: usize) -> ProjectionResult {
        let distance = norm.dist(x, &point);
        ProjectionResult { status: ProjectionStatus::Optimal, point, distance, iterations }
    }

    fn infeasible(iterations: usize) -> ProjectionResult {
        ProjectionResult {
            status: ProjectionStatus::Infeasible,
            point: Vec::new(),
            distance: f64::INFINITY,
            iterations,
        }
    }

    fn failure(iterations: usize) -> ProjectionResult {
        ProjectionResult {
            status: ProjectionStatus::NumericalFailure,
            point: Vec::new(),
            distance: f64::INFINITY,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == ProjectionStatus::Optimal
    }
}

/// The solver hit its iteration cap or lost numerical accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverError {
    pub iterations: usize,
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "projection solver failed after {} iterations", self.iterations)
    }
}

impl core::error::Error for SolverError {}

/// `argmin_{v in poly} |x - v|_p`.
pub fn project(x: &[f64], poly: &Polyhedron, norm: Norm, tol: &Tolerances) -> ProjectionResult {
    debug_assert_eq!(x.len(), poly.dim());
    if poly.is_statically_infeasible() {
        return ProjectionResult::infeasible(0);
    }
    if poly.num_rows() == 0 {
        return ProjectionResult::optimal(x, x.to_vec(), norm, 0);
    }
    let result = match norm {
        Norm::L2 => qp::project_l2(x, poly, tol),
        Norm::L1 | Norm::Linf => simplex::project_gauge(x, poly, norm, tol),
    };
    match result {
        Ok(r) if r.is_optimal() && poly.max_violation(&r.point) > tol.feas => ProjectionResult::failure(r.iterations),
        Ok(r) => r,
        Err(e) => ProjectionResult::failure(e.iterations),
    }
}

/// Whether `poly` has a point satisfying every constraint to `tol.feas`;
/// runs only the phase-one part of the LP.
pub fn feasible(poly: &Polyhedron, tol: &Tolerances) -> Result<bool, SolverError> {
    if poly.is_statically_infeasible() {
        return Ok(false);
    }
    if poly.num_rows() == 0 {
        return Ok(true);
    }
    let origin = alloc::vec![0.0; poly.dim()];
    simplex::phase_one(&origin, poly, tol)
}

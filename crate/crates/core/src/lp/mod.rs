//! Dense standard-form linear programming:
//!
//! ```text
//!     minimize    cᵀu
//!     subject to  E u = b,  u ≥ 0
//! ```
//!
//! [`solve_lp`] is a homogeneous self-dual interior-point method with a
//! Mehrotra predictor-corrector step. [`brute_force_lp`] enumerates every
//! basis and serves as a test oracle for tiny problems.

mod brute;
mod ipm;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, RandomStream, Vector};

pub use brute::{brute_force_lp, random_small_lp, BRUTE_FORCE_MAX_VARS};
pub use ipm::solve_lp;

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub cost: Vector,
    pub eq_matrix: Matrix,
    pub eq_rhs: Vector,
}

impl LpProblem {
    pub fn new(cost: Vector, eq_matrix: Matrix, eq_rhs: Vector) -> Result<Self> {
        if eq_matrix.ncols() != cost.len() || eq_matrix.nrows() != eq_rhs.len() {
            return Err(Error::DimensionMismatch(format!(
                "cost has {} entries, E is {}x{}, b has {} entries",
                cost.len(),
                eq_matrix.nrows(),
                eq_matrix.ncols(),
                eq_rhs.len()
            )));
        }
        let finite = cost
            .iter()
            .chain(eq_matrix.iter())
            .chain(eq_rhs.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("LP data must be finite".into()));
        }
        Ok(Self {
            cost,
            eq_matrix,
            eq_rhs,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn n_eq(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn objective(&self, point: &Vector) -> f64 {
        self.cost.dot(point)
    }

    /// ‖E u − b‖₂ / (1 + ‖b‖₂)
    pub fn primal_residual(&self, point: &Vector) -> f64 {
        (&self.eq_matrix * point - &self.eq_rhs).norm() / (1.0 + self.eq_rhs.norm())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

/// Dual variables for `E u = b` (`y`) and `u ≥ 0` (`s`).
#[derive(Debug, Clone, PartialEq)]
pub struct LpDual {
    pub y: Vector,
    pub s: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub point: Option<Vector>,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub dual: Option<LpDual>,
}

impl LpSolution {
    pub(crate) fn without_point(status: LpStatus, iterations: usize) -> Self {
        let objective = match status {
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::NAN,
        };
        Self {
            status,
            point: None,
            objective,
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            gap: f64::NAN,
            iterations,
            dual: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// The optimal point, or the status as an error.
    pub fn into_point(self) -> Result<Vector> {
        match (self.status, self.point) {
            (LpStatus::Optimal, Some(p)) => Ok(p),
            (status, _) => Err(Error::Solver(status)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iterations: usize,
    /// Extra iterations taken after the tolerances are first met.
    pub polish_iterations: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            max_iterations: 200,
            polish_iterations: 2,
        }
    }
}

/// Equality rows after removing linear dependencies.
pub(crate) enum ReducedRows {
    /// Indices of an independent subset of rows spanning the original row space.
    Independent(Vec<usize>),
    /// Some dependent row has a right-hand side inconsistent with the rest.
    Inconsistent,
}

/// Gaussian elimination with partial pivoting on `[E | b]` to find an
/// independent row subset and detect contradictory equalities.
pub(crate) fn reduce_rows(eq_matrix: &Matrix, eq_rhs: &Vector) -> ReducedRows {
    let (rows, cols) = eq_matrix.shape();
    let mut work = eq_matrix.clone();
    let mut rhs: DVector<f64> = eq_rhs.clone();
    let scale = eq_matrix.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * scale;
    let mut is_pivot = vec![false; rows];

    for col in 0..cols {
        let pivot = (0..rows)
            .filter(|&r| !is_pivot[r])
            .map(|r| (r, work[(r, col)].abs()))
            .filter(|&(_, v)| v > tol)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((p, _)) = pivot else { continue };
        is_pivot[p] = true;
        let pivot_row = work.row(p).clone_owned();
        let pivot_rhs = rhs[p];
        for r in 0..rows {
            if is_pivot[r] {
                continue;
            }
            let f = work[(r, col)] / pivot_row[col];
            if f != 0.0 {
                for j in 0..cols {
                    work[(r, j)] -= f * pivot_row[j];
                }
                rhs[r] -= f * pivot_rhs;
            }
        }
    }

    let rhs_scale = 1.0 + eq_rhs.amax();
    for r in 0..rows {
        if !is_pivot[r] && rhs[r].abs() > 1e-9 * rhs_scale {
            return ReducedRows::Inconsistent;
        }
    }
    ReducedRows::Independent((0..rows).filter(|&r| is_pivot[r]).collect())
}

pub(crate) fn select_rows(m: &Matrix, v: &Vector, keep: &[usize]) -> (Matrix, Vector) {
    let sub = Matrix::from_fn(keep.len(), m.ncols(), |i, j| m[(keep[i], j)]);
    let rhs = Vector::from_iterator(keep.len(), keep.iter().map(|&i| v[i]));
    (sub, rhs)
}

/// Convenience for tests and oracles: a fresh stream-backed small LP.
pub fn random_small_lp_seeded(seed: u64, index: u64) -> LpProblem {
    let mut stream: RandomStream = crate::numerics::derive_stream(seed, &[index]);
    random_small_lp(&mut stream)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduce_rows_detects_contradiction() {
        let e = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let b = Vector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(reduce_rows(&e, &b), ReducedRows::Inconsistent));
        let b = Vector::from_vec(vec![1.0, 1.0]);
        match reduce_rows(&e, &b) {
            ReducedRows::Independent(keep) => assert_eq!(keep.len(), 1),
            ReducedRows::Inconsistent => panic!("consistent duplicate rows"),
        }
    }

    #[test]
    fn problem_rejects_bad_shapes() {
        let r = LpProblem::new(Vector::zeros(2), Matrix::zeros(1, 3), Vector::zeros(1));
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
        let r = LpProblem::new(
            Vector::from_vec(vec![f64::NAN]),
            Matrix::zeros(0, 1),
            Vector::zeros(0),
        );
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }
}

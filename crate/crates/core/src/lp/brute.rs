//! Exhaustive vertex enumeration for tiny standard-form LPs.

use itertools::Itertools;
use nalgebra::SVD;

use super::{reduce_rows, select_rows, LpDual, LpProblem, LpSolution, LpStatus, ReducedRows};
use crate::error::{invalid, Result};
use crate::numerics::{Matrix, RandomStream, Vector};

pub const BRUTE_FORCE_MAX_VARS: usize = 12;

const NONNEG_TOL: f64 = 1e-9;

/// Basic solution for the columns `basis`, if that basis is nonsingular.
fn basic_solution(e: &Matrix, b: &Vector, basis: &[usize]) -> Option<Vector> {
    let n = e.ncols();
    if basis.is_empty() {
        return Some(Vector::zeros(n));
    }
    let sub = e.select_columns(basis);
    let svd = SVD::new(sub.clone(), false, false);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if min.is_nan() || min <= 1e-10 * max.max(1.0) {
        return None;
    }
    let xb = sub.lu().solve(b)?;
    let mut x = Vector::zeros(n);
    for (i, &j) in basis.iter().enumerate() {
        x[j] = xb[i];
    }
    Some(x)
}

fn is_nonnegative(x: &Vector) -> bool {
    x.iter().all(|v| *v >= -NONNEG_TOL)
}

/// Enumerate every basic feasible solution and return the best one.
///
/// Unboundedness is decided by enumerating the extreme rays of
/// `{d ≥ 0 : E d = 0, 1ᵀd = 1}` and checking for `cᵀd < 0`.
pub fn brute_force_lp(problem: &LpProblem) -> Result<LpSolution> {
    let n = problem.n_vars();
    if n > BRUTE_FORCE_MAX_VARS {
        return Err(invalid(format!(
            "brute force limited to {BRUTE_FORCE_MAX_VARS} variables, got {n}"
        )));
    }
    let keep = match reduce_rows(&problem.eq_matrix, &problem.eq_rhs) {
        ReducedRows::Inconsistent => return Ok(LpSolution::without_point(LpStatus::Infeasible, 0)),
        ReducedRows::Independent(keep) => keep,
    };
    let (e, b) = select_rows(&problem.eq_matrix, &problem.eq_rhs, &keep);
    let rank = e.nrows();
    let c = &problem.cost;

    let mut best: Option<(f64, Vector)> = None;
    let mut visited = 0;
    for basis in (0..n).combinations(rank) {
        visited += 1;
        let Some(x) = basic_solution(&e, &b, &basis) else {
            continue;
        };
        if !is_nonnegative(&x) {
            continue;
        }
        let x = x.map(|v| v.max(0.0));
        let obj = c.dot(&x);
        if best.as_ref().is_none_or(|(o, _)| obj < *o) {
            best = Some((obj, x));
        }
    }
    let Some((objective, point)) = best else {
        return Ok(LpSolution::without_point(LpStatus::Infeasible, visited));
    };

    // Extreme rays of the recession cone.
    let mut ray_matrix = e.clone().insert_row(rank, 1.0);
    let mut ray_rhs = Vector::zeros(rank + 1);
    ray_rhs[rank] = 1.0;
    if let ReducedRows::Independent(k) = reduce_rows(&ray_matrix, &ray_rhs) {
        let (m, r) = select_rows(&ray_matrix, &ray_rhs, &k);
        ray_matrix = m;
        ray_rhs = r;
        for basis in (0..n).combinations(ray_matrix.nrows()) {
            visited += 1;
            let Some(d) = basic_solution(&ray_matrix, &ray_rhs, &basis) else {
                continue;
            };
            if is_nonnegative(&d) && c.dot(&d) < -NONNEG_TOL {
                return Ok(LpSolution::without_point(LpStatus::Unbounded, visited));
            }
        }
    }

    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective,
        primal_residual: problem.primal_residual(&point),
        dual_residual: 0.0,
        gap: 0.0,
        iterations: visited,
        point: Some(point),
        dual: None::<LpDual>,
    })
}

/// Random LP with 1..=6 variables and 0..=4 equality rows drawing from a mix
/// of feasible/infeasible right-hand sides and bounded/unbounded costs, with
/// occasional duplicated (consistent or contradictory) rows.
pub fn random_small_lp(stream: &mut RandomStream) -> LpProblem {
    let n = 1 + stream.below(6) as usize;
    let rows = (stream.below(5) as usize).min(n);
    let mut e = Matrix::from_fn(rows, n, |_, _| stream.standard_normal());

    let b = if stream.coin() {
        let x = Vector::from_fn(n, |_, _| {
            if stream.below(3) == 0 {
                0.0
            } else {
                stream.uniform_open_closed() * 2.0
            }
        });
        &e * x
    } else {
        Vector::from_fn(rows, |_, _| stream.standard_normal())
    };

    let c = if stream.coin() {
        let y = Vector::from_fn(rows, |_, _| stream.standard_normal());
        let s = Vector::from_fn(n, |_, _| stream.uniform_open_closed());
        e.tr_mul(&y) + s
    } else {
        Vector::from_fn(n, |_, _| stream.standard_normal())
    };

    let mut b = b;
    if rows > 0 && rows < 4 && stream.below(10) == 0 {
        let r = stream.below(rows as u64) as usize;
        let row = e.row(r).clone_owned();
        let shift = if stream.coin() { 0.0 } else { 1.0 };
        e = e.insert_row(rows, 0.0);
        e.row_mut(rows).copy_from(&row);
        let extra = b[r] + shift;
        b = b.insert_row(rows, extra);
    }
    LpProblem::new(c, e, b).expect("consistent shapes")
}

//! Homogeneous self-dual interior-point method.
//!
//! The embedding works with `(u, τ, y, s, κ)`, `u, s, τ, κ ≥ 0`:
//!
//! ```text
//!     E u − b τ          = 0
//!     Eᵀy + s − c τ      = 0
//!     −cᵀu + bᵀy − κ     = 0
//! ```
//!
//! An optimal pair is read off as `(u/τ, y/τ, s/τ)` when `τ` stays away from
//! zero. When `τ → 0` the iterates converge to a Farkas certificate of
//! primal or dual infeasibility instead.

use log::trace;
use nalgebra::{Cholesky, DMatrix};

use super::{
    reduce_rows, select_rows, LpDual, LpOptions, LpProblem, LpSolution, LpStatus, ReducedRows,
};
use crate::numerics::{Matrix, Vector};

const STEP_FRACTION: f64 = 0.99;

struct Iterate {
    u: Vector,
    tau: f64,
    y: Vector,
    s: Vector,
    kappa: f64,
}

struct Direction {
    du: Vector,
    dtau: f64,
    dy: Vector,
    ds: Vector,
    dkappa: f64,
}

struct Residuals {
    primal: Vector,
    dual: Vector,
    gap: f64,
}

/// Factorization of the normal matrix `E diag(d) Eᵀ` shared by the
/// predictor and the corrector of one iteration.
///
/// The triangular factor comes from a QR decomposition of `diag(√d) Eᵀ`
/// rather than a Cholesky factorization of the explicitly formed product,
/// which keeps the condition number from squaring near degenerate vertices.
struct NormalSystem<'a> {
    e: &'a Matrix,
    d: Vector,
    factor: Option<DMatrix<f64>>,
}

impl<'a> NormalSystem<'a> {
    fn new(e: &'a Matrix, d: Vector) -> Option<Self> {
        let rows = e.nrows();
        if rows == 0 {
            return Some(Self { e, d, factor: None });
        }
        let mut scaled = e.transpose();
        for (j, mut row) in scaled.row_iter_mut().enumerate() {
            row *= d[j].sqrt();
        }
        let factor = if scaled.nrows() >= rows {
            let r = scaled.clone().qr().r();
            let max_diag = r.diagonal().amax();
            let min_diag = r
                .diagonal()
                .iter()
                .fold(f64::INFINITY, |m, v| m.min(v.abs()));
            if min_diag > 1e-13 * max_diag {
                Some(r)
            } else {
                None
            }
        } else {
            None
        };
        let factor = match factor {
            Some(r) => r,
            None => regularized_cholesky(&scaled)?,
        };
        Some(Self {
            e,
            d,
            factor: Some(factor),
        })
    }

    fn solve(&self, rhs: &Vector) -> Vector {
        match &self.factor {
            Some(r) => {
                let z = r
                    .tr_solve_upper_triangular(rhs)
                    .expect("nonsingular factor");
                r.solve_upper_triangular(&z).expect("nonsingular factor")
            }
            None => Vector::zeros(0),
        }
    }
}

/// Upper Cholesky factor of `WᵀW + δI` for the smallest diagonal shift `δ`
/// in a short geometric ladder that makes the factorization succeed.
fn regularized_cholesky(scaled: &Matrix) -> Option<DMatrix<f64>> {
    let mut normal: DMatrix<f64> = scaled.tr_mul(scaled);
    let rows = normal.nrows();
    let max_diag = normal.diagonal().amax().max(1e-300);
    let mut shift = 1e-14 * max_diag;
    for _ in 0..8 {
        for i in 0..rows {
            normal[(i, i)] += shift;
        }
        if let Some(chol) = Cholesky::new(normal.clone()) {
            return Some(chol.l().transpose());
        }
        shift *= 100.0;
    }
    None
}

fn max_step(v: &Vector, dv: &Vector) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

fn scalar_step(v: f64, dv: f64) -> f64 {
    if dv < 0.0 {
        -v / dv
    } else {
        f64::INFINITY
    }
}

fn complementarity(it: &Iterate) -> f64 {
    (it.u.dot(&it.s) + it.tau * it.kappa) / (it.u.len() + 1) as f64
}

/// Solve `min cᵀu s.t. E u = b, u ≥ 0`.
///
/// Linearly dependent equality rows are dropped first and contradictory
/// ones reported as [`LpStatus::Infeasible`]. No randomness is involved:
/// the same problem always yields the same iterates.
pub fn solve_lp(problem: &LpProblem, options: &LpOptions) -> LpSolution {
    let keep = match reduce_rows(&problem.eq_matrix, &problem.eq_rhs) {
        ReducedRows::Inconsistent => return LpSolution::without_point(LpStatus::Infeasible, 0),
        ReducedRows::Independent(keep) => keep,
    };
    let (e, b) = select_rows(&problem.eq_matrix, &problem.eq_rhs, &keep);
    let c = &problem.cost;
    let n = c.len();

    if n == 0 {
        // All rows were zero and consistent.
        return finish(
            problem,
            &keep,
            Vector::zeros(0),
            Vector::zeros(keep.len()),
            Vector::zeros(0),
            0,
        );
    }

    let mut sol = hsd(c, &e, &b, options);
    if sol.status == LpStatus::Unbounded {
        // A dual-infeasibility certificate does not rule out primal
        // infeasibility; settle it with a pure feasibility problem.
        let feas = hsd(&Vector::zeros(n), &e, &b, options);
        if feas.status == LpStatus::Infeasible {
            sol.status = LpStatus::Infeasible;
        }
    }
    match sol.status {
        LpStatus::Optimal => {
            let (u, y, s) = sol.point.expect("optimal point");
            finish(problem, &keep, u, y, s, sol.iterations)
        }
        status => LpSolution::without_point(status, sol.iterations),
    }
}

struct RawSolution {
    status: LpStatus,
    point: Option<(Vector, Vector, Vector)>,
    iterations: usize,
}

fn finish(
    problem: &LpProblem,
    keep: &[usize],
    u: Vector,
    y_reduced: Vector,
    s: Vector,
    iterations: usize,
) -> LpSolution {
    let mut y = Vector::zeros(problem.n_eq());
    for (i, &row) in keep.iter().enumerate() {
        y[row] = y_reduced[i];
    }
    let pobj = problem.objective(&u);
    let dobj = problem.eq_rhs.dot(&y);
    let dual_res = (problem.eq_matrix.transpose() * &y + &s - &problem.cost).norm()
        / (1.0 + problem.cost.norm());
    LpSolution {
        status: LpStatus::Optimal,
        objective: pobj,
        primal_residual: problem.primal_residual(&u),
        dual_residual: dual_res,
        gap: (pobj - dobj).abs() / (1.0 + pobj.abs()),
        iterations,
        point: Some(u),
        dual: Some(LpDual { y, s }),
    }
}

fn hsd(c: &Vector, e: &Matrix, b: &Vector, opts: &LpOptions) -> RawSolution {
    let n = c.len();
    let rows = e.nrows();
    let mut it = Iterate {
        u: Vector::from_element(n, 1.0),
        tau: 1.0,
        y: Vector::zeros(rows),
        s: Vector::from_element(n, 1.0),
        kappa: 1.0,
    };
    let b_norm = b.norm();
    let c_norm = c.norm();
    let et = e.transpose();

    // Once converged, a few extra iterations tighten the point well below
    // the tolerances; the converged iterate with the smallest worst-case
    // residual is kept.
    let mut converged: Option<(f64, RawSolution)> = None;
    let mut polished = 0;

    for iter in 0..opts.max_iterations {
        let res = Residuals {
            primal: b * it.tau - e * &it.u,
            dual: c * it.tau - &et * &it.y - &it.s,
            gap: it.kappa + c.dot(&it.u) - b.dot(&it.y),
        };
        let mu = complementarity(&it);

        let pobj = c.dot(&it.u) / it.tau;
        let dobj = b.dot(&it.y) / it.tau;
        let pres = res.primal.norm() / it.tau / (1.0 + b_norm);
        let dres = res.dual.norm() / it.tau / (1.0 + c_norm);
        let rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs());
        trace!("ipm {iter}: pres {pres:.3e} dres {dres:.3e} gap {rel_gap:.3e} mu {mu:.3e} tau {:.3e} kappa {:.3e}", it.tau, it.kappa);
        if pres <= opts.feas_tol && dres <= opts.feas_tol && rel_gap <= opts.gap_tol {
            let merit = pres.max(dres).max(rel_gap);
            if converged.as_ref().is_none_or(|(best, _)| merit <= *best) {
                let sol = RawSolution {
                    status: LpStatus::Optimal,
                    point: Some((&it.u / it.tau, &it.y / it.tau, &it.s / it.tau)),
                    iterations: iter,
                };
                converged = Some((merit, sol));
            }
            if polished >= opts.polish_iterations || mu == 0.0 {
                break;
            }
            polished += 1;
        }

        if converged.is_none() && it.tau < it.kappa {
            // Farkas: Eᵀy ≤ 0 with bᵀy > 0.
            let by = b.dot(&it.y);
            if by > 0.0 {
                let violation = (&et * &it.y).map(|v| v.max(0.0)).norm();
                if violation <= opts.feas_tol * by {
                    return RawSolution {
                        status: LpStatus::Infeasible,
                        point: None,
                        iterations: iter,
                    };
                }
            }
            // Ray: E u = 0, u ≥ 0 with cᵀu < 0.
            let cu = c.dot(&it.u);
            if cu < 0.0 {
                let violation = (e * &it.u).norm();
                if violation <= opts.feas_tol * -cu {
                    return RawSolution {
                        status: LpStatus::Unbounded,
                        point: None,
                        iterations: iter,
                    };
                }
            }
        }

        let d = it.u.component_div(&it.s);
        let Some(normal) = NormalSystem::new(e, d) else {
            break;
        };

        // Predictor (affine scaling).
        let rxs_aff = -it.u.component_mul(&it.s);
        let rtk_aff = -it.tau * it.kappa;
        let aff = direction(&it, &res, &normal, c, b, 1.0, &rxs_aff, rtk_aff);
        let alpha_aff = step_length(&it, &aff).min(1.0);
        let mu_aff = {
            let u = &it.u + &aff.du * alpha_aff;
            let s = &it.s + &aff.ds * alpha_aff;
            let t = it.tau + alpha_aff * aff.dtau;
            let k = it.kappa + alpha_aff * aff.dkappa;
            (u.dot(&s) + t * k) / (n + 1) as f64
        };
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector with second-order term.
        let target = sigma * mu;
        let rxs = (&rxs_aff - aff.du.component_mul(&aff.ds)).add_scalar(target);
        let rtk = rtk_aff - aff.dtau * aff.dkappa + target;
        let dir = direction(&it, &res, &normal, c, b, 1.0 - sigma, &rxs, rtk);
        let alpha = (STEP_FRACTION * step_length(&it, &dir)).min(1.0);

        it.u += &dir.du * alpha;
        it.s += &dir.ds * alpha;
        it.y += &dir.dy * alpha;
        it.tau += alpha * dir.dtau;
        it.kappa += alpha * dir.dkappa;

        let finite = it.tau.is_finite()
            && it.kappa.is_finite()
            && it.u.iter().chain(it.y.iter()).all(|v| v.is_finite());
        if !finite || it.tau <= 0.0 || alpha < 1e-12 {
            break;
        }
    }
    converged.map(|(_, sol)| sol).unwrap_or(RawSolution {
        status: LpStatus::NumericalFailure,
        point: None,
        iterations: opts.max_iterations,
    })
}

fn step_length(it: &Iterate, dir: &Direction) -> f64 {
    max_step(&it.u, &dir.du)
        .min(max_step(&it.s, &dir.ds))
        .min(scalar_step(it.tau, dir.dtau))
        .min(scalar_step(it.kappa, dir.dkappa))
}

/// Newton direction for residual reduction factor `eta` and complementarity
/// right-hand sides `rxs` (for `U ds + S du`) and `rtk` (for `κ dτ + τ dκ`).
#[allow(clippy::too_many_arguments)]
fn direction(
    it: &Iterate,
    res: &Residuals,
    normal: &NormalSystem,
    c: &Vector,
    b: &Vector,
    eta: f64,
    rxs: &Vector,
    rtk: f64,
) -> Direction {
    let e = normal.e;
    let d = &normal.d;
    let r1 = &res.dual * eta - rxs.component_div(&it.u);

    let p = normal.solve(&(&res.primal * eta + e * d.component_mul(&r1)));
    let q = normal.solve(&(e * d.component_mul(c) + b));
    let u_part = d.component_mul(&(e.tr_mul(&p) - &r1));
    let v_part = d.component_mul(&(e.tr_mul(&q) - c));

    let num = eta * res.gap + c.dot(&u_part) - b.dot(&p) + rtk / it.tau;
    let den = -c.dot(&v_part) + b.dot(&q) + it.kappa / it.tau;
    let dtau = num / den;

    let du = &u_part + &v_part * dtau;
    let dy = &p + &q * dtau;
    let ds = (rxs - it.s.component_mul(&du)).component_div(&it.u);
    let dkappa = (rtk - it.kappa * dtau) / it.tau;
    Direction {
        du,
        dtau,
        dy,
        ds,
        dkappa,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{brute_force_lp, random_small_lp_seeded};

    fn lp(c: &[f64], rows: usize, e: &[f64], b: &[f64]) -> LpProblem {
        LpProblem::new(
            Vector::from_row_slice(c),
            Matrix::from_row_slice(rows, c.len(), e),
            Vector::from_row_slice(b),
        )
        .unwrap()
    }

    #[test]
    fn nonnegativity_floor() {
        let s = solve_lp(&lp(&[1.0], 0, &[], &[]), &LpOptions::default());
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(s.objective.abs() < 1e-8);
        assert!(s.point.unwrap()[0].abs() < 1e-8);
    }

    #[test]
    fn simplex_constraint() {
        let s = solve_lp(
            &lp(&[1.0, 1.0], 1, &[1.0, 1.0], &[1.0]),
            &LpOptions::default(),
        );
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-8);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let s = solve_lp(
            &lp(&[1.0, 0.0], 2, &[1.0, 0.0, 1.0, 0.0], &[1.0, 2.0]),
            &LpOptions::default(),
        );
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn free_descent_is_unbounded() {
        let s = solve_lp(&lp(&[-1.0], 0, &[], &[]), &LpOptions::default());
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn negative_rhs_is_infeasible() {
        let s = solve_lp(
            &lp(&[1.0, 1.0], 1, &[1.0, 1.0], &[-1.0]),
            &LpOptions::default(),
        );
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn infeasible_with_descent_ray_reports_infeasible() {
        // u1 + u2 = −1 has no nonnegative solution, yet u3 is a descent ray.
        let s = solve_lp(
            &lp(&[0.0, 0.0, -1.0], 1, &[1.0, 1.0, 0.0], &[-1.0]),
            &LpOptions::default(),
        );
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn kkt_residuals_on_random_optimal_lps() {
        let opts = LpOptions::default();
        let mut optimal = 0;
        for i in 0..200 {
            let p = random_small_lp_seeded(11, i);
            let s = solve_lp(&p, &opts);
            if s.status != LpStatus::Optimal {
                continue;
            }
            optimal += 1;
            let u = s.point.as_ref().unwrap();
            let dual = s.dual.as_ref().unwrap();
            assert!(u.iter().all(|v| *v >= -opts.feas_tol));
            assert!(s.primal_residual <= opts.feas_tol, "{}", s.primal_residual);
            assert!(s.dual_residual <= opts.feas_tol, "{}", s.dual_residual);
            let compl = u.dot(&dual.s).abs() / (1.0 + s.objective.abs());
            assert!(compl <= 1e-7, "complementarity {compl}");
        }
        assert!(optimal > 30);
    }

    #[test]
    fn positive_cost_scaling_keeps_status_and_optimum() {
        let opts = LpOptions::default();
        for i in 0..60 {
            let p = random_small_lp_seeded(21, i);
            let mut q = p.clone();
            q.cost *= 7.5;
            let a = solve_lp(&p, &opts);
            let b = solve_lp(&q, &opts);
            assert_eq!(a.status, b.status);
            if a.status == LpStatus::Optimal {
                assert!((7.5 * a.objective - b.objective).abs() < 1e-6 * (1.0 + b.objective.abs()));
            }
        }
    }

    #[test]
    fn matches_brute_force_on_a_few_instances() {
        for seed in 0..10 {
            for i in 0..300 {
                let p = random_small_lp_seeded(seed, i);
                let a = solve_lp(&p, &LpOptions::default());
                let b = brute_force_lp(&p).unwrap();
                assert_eq!(a.status, b.status, "seed {seed} instance {i}: {p:?}");
                if a.status == LpStatus::Optimal {
                    assert!(
                        (a.objective - b.objective).abs() <= 1e-6,
                        "seed {seed} instance {i}"
                    );
                }
            }
        }
    }
}

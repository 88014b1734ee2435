//! Success classification for the generalized demixing program.
//!
//! Two independent protocols:
//!
//! * practical: solve the program and compare `x̂` with `x0`;
//! * theorem: solve the three perturbation programs and require every
//!   optimal perturbation to vanish. The three flags correspond to
//!   `null(A) ∩ S(x0) = {0}`, `null(B) ∩ S(y0) = {0}` and
//!   `−A·S(x0) ∩ B·S(y0) = {0}`, where `S(a) = {h : ‖a + h‖₁ ≤ ‖a‖₁}`.
//!
//! Both use a strict `≤ tol` threshold with no hysteresis band.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::l1programs::{solve_gdp, verify_step5, verify_step6, verify_step7, DemixInstance};
use crate::lp::{LpOptions, LpStatus};
use crate::numerics::{l1_norm, l2_norm, Vector};

pub const DEFAULT_TOL: f64 = 1e-5;

/// `h ∈ S(a)`, i.e. `‖a + h‖₁ ≤ ‖a‖₁ + slack`.
pub fn in_affine_l1_ball(a: &Vector, h: &Vector, slack: f64) -> bool {
    l1_norm((a + h).as_slice()) <= l1_norm(a.as_slice()) + slack
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub x_error: f64,
    pub y_error: f64,
    pub practical_success: bool,
    pub tol: f64,
    /// LP status when the solver did not reach an optimum.
    pub solver_failure: Option<LpStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub norm_x2: f64,
    pub norm_y2: f64,
    pub norm_x3: f64,
    pub norm_y3: f64,
    pub tol: f64,
    pub cond1: bool,
    pub cond2: bool,
    pub cond3: bool,
    pub theorem_success: bool,
    pub solver_failure: Option<LpStatus>,
}

fn failure_status(e: Error) -> LpStatus {
    match e {
        Error::Solver(s) => s,
        _ => LpStatus::NumericalFailure,
    }
}

/// Solve the demixing program and declare success when `‖x̂ − x0‖₂ ≤ tol`.
/// Solver failures classify as failure with `solver_failure` set.
pub fn practical_success(inst: &DemixInstance, tol: f64, opts: &LpOptions) -> RecoveryReport {
    match solve_gdp(inst, opts) {
        Ok(sol) => {
            let x_error = l2_norm((Vector::from_vec(sol.x_hat) - &inst.x0).as_slice());
            let y_error = l2_norm((Vector::from_vec(sol.y_hat) - &inst.y0).as_slice());
            RecoveryReport {
                x_error,
                y_error,
                practical_success: x_error <= tol,
                tol,
                solver_failure: None,
            }
        }
        Err(e) => RecoveryReport {
            x_error: f64::NAN,
            y_error: f64::NAN,
            practical_success: false,
            tol,
            solver_failure: Some(failure_status(e)),
        },
    }
}

/// Solve the three perturbation programs and apply the `≤ tol` threshold
/// to each optimal perturbation.
pub fn theorem_success(inst: &DemixInstance, tol: f64, opts: &LpOptions) -> VerificationReport {
    let mut failure = None;
    let mut norm_of = |r: crate::Result<Vector>| match r {
        Ok(v) => l2_norm(v.as_slice()),
        Err(e) => {
            failure.get_or_insert(failure_status(e));
            f64::NAN
        }
    };
    let norm_x2 = norm_of(verify_step5(&inst.a, &inst.x0, opts));
    let norm_y2 = norm_of(verify_step6(&inst.b, &inst.y0, opts));
    let (norm_x3, norm_y3) = match verify_step7(inst, opts) {
        Ok((x, y)) => (l2_norm(x.as_slice()), l2_norm(y.as_slice())),
        Err(e) => {
            failure.get_or_insert(failure_status(e));
            (f64::NAN, f64::NAN)
        }
    };
    VerificationReport::from_norms(norm_x2, norm_y2, norm_x3, norm_y3, tol, failure)
}

impl VerificationReport {
    pub fn from_norms(
        norm_x2: f64,
        norm_y2: f64,
        norm_x3: f64,
        norm_y3: f64,
        tol: f64,
        solver_failure: Option<LpStatus>,
    ) -> Self {
        // NaN norms (failed solves) compare false.
        let cond1 = norm_x2 <= tol;
        let cond2 = norm_y2 <= tol;
        let cond3 = norm_x3 <= tol && norm_y3 <= tol;
        Self {
            norm_x2,
            norm_y2,
            norm_x3,
            norm_y3,
            tol,
            cond1,
            cond2,
            cond3,
            theorem_success: cond1 && cond2 && cond3,
            solver_failure,
        }
    }

    /// Re-threshold the same norms at another tolerance.
    pub fn with_tol(&self, tol: f64) -> Self {
        Self::from_norms(
            self.norm_x2,
            self.norm_y2,
            self.norm_x3,
            self.norm_y3,
            tol,
            self.solver_failure,
        )
    }
}

impl RecoveryReport {
    pub fn with_tol(&self, tol: f64) -> Self {
        Self {
            practical_success: self.x_error <= tol,
            tol,
            ..self.clone()
        }
    }
}

//! ℓ1 programs lowered to standard-form LPs.
//!
//! Every program splits free vectors into nonnegative parts (`x = x⁺ − x⁻`)
//! and turns the `‖y‖₁` budget into an equality with one slack. The
//! verification programs optimize over shifted variables `w = x0 + x` so that
//! the lowering stays in pure standard form.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lp::{solve_lp, LpOptions, LpProblem, LpStatus};
use crate::numerics::{
    count_nonzeros, gaussian_matrix, l1_norm, spike_signal, Matrix, RandomStream, Vector,
};

/// One observation `z = A x0 + B y0` together with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct DemixInstance {
    pub n1: usize,
    pub n2: usize,
    pub m: usize,
    pub k1: usize,
    pub k2: usize,
    pub a: Matrix,
    pub b: Matrix,
    pub x0: Vector,
    pub y0: Vector,
    pub z: Vector,
    pub seed: u64,
}

impl DemixInstance {
    /// Build an instance from its parts; `z` is computed from the truth.
    pub fn new(a: Matrix, b: Matrix, x0: Vector, y0: Vector, seed: u64) -> Result<Self> {
        if a.nrows() != b.nrows() || a.ncols() != x0.len() || b.ncols() != y0.len() {
            return Err(Error::DimensionMismatch(format!(
                "A is {}x{}, B is {}x{}, x0 has {}, y0 has {} entries",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                x0.len(),
                y0.len()
            )));
        }
        let z = &a * &x0 + &b * &y0;
        Ok(Self {
            n1: x0.len(),
            n2: y0.len(),
            m: a.nrows(),
            k1: count_nonzeros(x0.as_slice()),
            k2: count_nonzeros(y0.as_slice()),
            a,
            b,
            x0,
            y0,
            z,
            seed,
        })
    }

    /// Draw `x0`, `y0` (±1 spikes), then `A` and `B` (standard normal),
    /// in that order, from `stream`.
    pub fn sample(
        n1: usize,
        n2: usize,
        m: usize,
        k1: usize,
        k2: usize,
        seed: u64,
        stream: &mut RandomStream,
    ) -> Result<Self> {
        let x0 = spike_signal(n1, k1, stream)?;
        let y0 = spike_signal(n2, k2, stream)?;
        let a = gaussian_matrix(m, n1, stream);
        let b = gaussian_matrix(m, n2, stream);
        Self::new(a, b, x0, y0, seed)
    }

    /// Deterministic instance for a seed, using `derive_stream(seed, [])`.
    pub fn generate(
        n1: usize,
        n2: usize,
        m: usize,
        k1: usize,
        k2: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut stream = crate::numerics::derive_stream(seed, &[]);
        Self::sample(n1, n2, m, k1, k2, seed, &mut stream)
    }

    /// Check the shape, sparsity and observation invariants, e.g. after
    /// loading from a file.
    pub fn validate(&self) -> Result<()> {
        let shapes_ok = self.a.shape() == (self.m, self.n1)
            && self.b.shape() == (self.m, self.n2)
            && self.x0.len() == self.n1
            && self.y0.len() == self.n2
            && self.z.len() == self.m;
        if !shapes_ok {
            return Err(Error::DimensionMismatch(
                "instance fields disagree with n1, n2, m".into(),
            ));
        }
        if count_nonzeros(self.x0.as_slice()) != self.k1
            || count_nonzeros(self.y0.as_slice()) != self.k2
        {
            return Err(invalid("sparsity counts disagree with x0/y0"));
        }
        let all_finite = [&self.a, &self.b]
            .iter()
            .all(|m| m.iter().all(|v| v.is_finite()))
            && [&self.x0, &self.y0, &self.z]
                .iter()
                .all(|v| v.iter().all(|e| e.is_finite()));
        if !all_finite {
            return Err(invalid("instance entries must be finite"));
        }
        let expected = &self.a * &self.x0 + &self.b * &self.y0;
        let scale = expected.norm().max(self.z.norm()).max(1.0);
        if (&expected - &self.z).norm() > 1e-12 * scale {
            return Err(invalid("z differs from A·x0 + B·y0"));
        }
        Ok(())
    }

    pub fn budget(&self) -> f64 {
        l1_norm(self.y0.as_slice())
    }

    /// The same instance with truth and observation scaled by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.x0 *= c;
        out.y0 *= c;
        out.z *= c;
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdpSolution {
    pub x_hat: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
}

/// `[M₁, −M₁, M₂, −M₂, …]`
fn split_columns(mats: &[&Matrix]) -> Matrix {
    let rows = mats.first().map_or(0, |m| m.nrows());
    let cols: usize = mats.iter().map(|m| 2 * m.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut offset = 0;
    for m in mats {
        let n = m.ncols();
        out.columns_mut(offset, n).copy_from(m);
        out.columns_mut(offset + n, n).copy_from(&(-*m));
        offset += 2 * n;
    }
    out
}

fn join(plus_minus: &[f64]) -> Vector {
    let n = plus_minus.len() / 2;
    Vector::from_iterator(n, (0..n).map(|i| plus_minus[i] - plus_minus[n + i]))
}

/// `min ‖x‖₁ s.t. A x = z` as `min 1ᵀ(x⁺ + x⁻) s.t. A(x⁺ − x⁻) = z`.
pub fn lower_bp(a: &Matrix, z: &Vector) -> Result<LpProblem> {
    if a.nrows() != z.len() {
        return Err(Error::DimensionMismatch(format!(
            "A has {} rows, z has {}",
            a.nrows(),
            z.len()
        )));
    }
    let n = a.ncols();
    LpProblem::new(
        Vector::from_element(2 * n, 1.0),
        split_columns(&[a]),
        z.clone(),
    )
}

/// `min ‖x‖₁ s.t. A x + B y = z, ‖y‖₁ ≤ budget`, variables
/// `[x⁺, x⁻, y⁺, y⁻, s]`.
pub fn lower_budgeted(a: &Matrix, b: &Matrix, z: &Vector, budget: f64) -> Result<LpProblem> {
    if a.nrows() != z.len() || b.nrows() != z.len() {
        return Err(Error::DimensionMismatch(format!(
            "A has {} rows, B has {}, z has {}",
            a.nrows(),
            b.nrows(),
            z.len()
        )));
    }
    let (n1, n2, m) = (a.ncols(), b.ncols(), z.len());
    let nvars = 2 * n1 + 2 * n2 + 1;
    let mut cost = Vector::zeros(nvars);
    cost.rows_mut(0, 2 * n1).fill(1.0);
    let mut e = Matrix::zeros(m + 1, nvars);
    e.view_mut((0, 0), (m, 2 * n1 + 2 * n2))
        .copy_from(&split_columns(&[a, b]));
    e.view_mut((m, 2 * n1), (1, 2 * n2 + 1)).fill(1.0);
    let rhs = z.clone().insert_row(m, budget);
    LpProblem::new(cost, e, rhs)
}

fn solve_lowered(problem: &LpProblem, opts: &LpOptions) -> Result<(Vec<f64>, f64)> {
    let sol = solve_lp(problem, opts);
    let objective = sol.objective;
    let point = sol.into_point()?;
    Ok((point.as_slice().to_vec(), objective))
}

/// Basis pursuit: `min ‖x‖₁ s.t. A x = z`.
pub fn solve_bp(a: &Matrix, z: &Vector, opts: &LpOptions) -> Result<Vector> {
    let (u, _) = solve_lowered(&lower_bp(a, z)?, opts)?;
    Ok(join(&u))
}

/// `min ‖x‖₁ s.t. A x + B y = z, ‖y‖₁ ≤ budget` for arbitrary data.
/// LP statuses other than optimal are returned as [`Error::Solver`].
pub fn solve_budgeted(
    a: &Matrix,
    b: &Matrix,
    z: &Vector,
    budget: f64,
    opts: &LpOptions,
) -> Result<GdpSolution> {
    if budget.is_nan() || budget < 0.0 {
        return Err(invalid("budget must be nonnegative"));
    }
    let (n1, n2) = (a.ncols(), b.ncols());
    let (u, objective) = solve_lowered(&lower_budgeted(a, b, z, budget)?, opts)?;
    Ok(GdpSolution {
        x_hat: join(&u[..2 * n1]).as_slice().to_vec(),
        y_hat: join(&u[2 * n1..2 * n1 + 2 * n2]).as_slice().to_vec(),
        objective,
        status: LpStatus::Optimal,
    })
}

/// The generalized demixing program on an instance, with budget `‖y0‖₁`.
///
/// The truth is always feasible, so an infeasible verdict from the LP layer
/// is reported as [`LpStatus::NumericalFailure`].
pub fn solve_gdp(inst: &DemixInstance, opts: &LpOptions) -> Result<GdpSolution> {
    solve_budgeted(&inst.a, &inst.b, &inst.z, inst.budget(), opts).map_err(|e| match e {
        Error::Solver(LpStatus::Infeasible) => Error::Solver(LpStatus::NumericalFailure),
        other => other,
    })
}

/// Sparse + sparse demixing `z = x + U y`: the generalized program with
/// `A = I`, `B = U`. A non-orthogonal `U` is accepted with a warning.
pub fn solve_dp(u: &Matrix, z: &Vector, y0: &Vector, opts: &LpOptions) -> Result<GdpSolution> {
    let n = u.nrows();
    if u.ncols() != n || z.len() != n || y0.len() != n {
        return Err(Error::DimensionMismatch(
            "U must be square and match z, y0".into(),
        ));
    }
    let gram_err = (u.tr_mul(u) - Matrix::identity(n, n)).amax();
    if gram_err > 1e-8 {
        warn!("U is not orthogonal (max |UᵀU − I| = {gram_err:.3e}); solving anyway");
    }
    solve_budgeted(&Matrix::identity(n, n), u, z, l1_norm(y0.as_slice()), opts).map_err(|e| match e
    {
        Error::Solver(LpStatus::Infeasible) => Error::Solver(LpStatus::NumericalFailure),
        other => other,
    })
}

/// `min ‖x0 + x‖₁ s.t. A x = 0`, lowered over `w = x0 + x`.
pub fn lower_step5(a: &Matrix, x0: &Vector) -> Result<LpProblem> {
    if a.ncols() != x0.len() {
        return Err(Error::DimensionMismatch(format!(
            "A has {} columns, x0 has {}",
            a.ncols(),
            x0.len()
        )));
    }
    lower_bp(a, &(a * x0))
}

/// Optimal perturbation `x̂₂` of `min ‖x0 + x‖₁ s.t. A x = 0`.
pub fn verify_step5(a: &Matrix, x0: &Vector, opts: &LpOptions) -> Result<Vector> {
    let (u, _) = solve_lowered(&lower_step5(a, x0)?, opts).map_err(infeasible_is_numerical)?;
    Ok(join(&u) - x0)
}

/// Optimal perturbation `ŷ₂` of `min ‖y0 + y‖₁ s.t. B y = 0`.
pub fn verify_step6(b: &Matrix, y0: &Vector, opts: &LpOptions) -> Result<Vector> {
    verify_step5(b, y0, opts)
}

/// `min ‖x0 + x‖₁ s.t. A x + B y = 0, ‖y0 + y‖₁ ≤ ‖y0‖₁`, lowered over
/// `(w, v) = (x0 + x, y0 + y)`.
pub fn lower_step7(inst: &DemixInstance) -> Result<LpProblem> {
    let rhs = &inst.a * &inst.x0 + &inst.b * &inst.y0;
    lower_budgeted(&inst.a, &inst.b, &rhs, inst.budget())
}

/// Optimal perturbation pair `(x̂₃, ŷ₃)` of the joint verification program.
pub fn verify_step7(inst: &DemixInstance, opts: &LpOptions) -> Result<(Vector, Vector)> {
    let (u, _) = solve_lowered(&lower_step7(inst)?, opts).map_err(infeasible_is_numerical)?;
    let (n1, n2) = (inst.n1, inst.n2);
    let x = join(&u[..2 * n1]) - &inst.x0;
    let y = join(&u[2 * n1..2 * n1 + 2 * n2]) - &inst.y0;
    Ok((x, y))
}

fn infeasible_is_numerical(e: Error) -> Error {
    match e {
        Error::Solver(LpStatus::Infeasible | LpStatus::Unbounded) => {
            Error::Solver(LpStatus::NumericalFailure)
        }
        other => other,
    }
}

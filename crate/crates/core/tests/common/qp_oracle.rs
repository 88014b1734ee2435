//! Euclidean projection onto an ℓ1 descent cone by active-set enumeration.
//!
//! The cone is written as `{y : G y ≤ 0}` with one row per sign pattern `ε`
//! on the off-support: `rᵢ = σᵢ` on the support and `rᵢ = εᵢ` off it. For
//! every linearly independent subset `W` of rows the equality-constrained
//! projection `y = g − G_Wᵀ λ` is formed; the KKT point (`λ ≥ 0`, `G y ≤ 0`)
//! is the projection. Exponential in the off-support size, so `n ≤ 4`.

use demixlab::numerics::{Matrix, Vector};

const KKT_TOL: f64 = 1e-10;

pub fn cone_rows(n: usize, support: &[(usize, f64)]) -> Matrix {
    let off: Vec<usize> = (0..n)
        .filter(|i| !support.iter().any(|(j, _)| j == i))
        .collect();
    let count = 1usize << off.len();
    let mut g = Matrix::zeros(count, n);
    for pattern in 0..count {
        for &(i, s) in support {
            g[(pattern, i)] = s;
        }
        for (bit, &i) in off.iter().enumerate() {
            g[(pattern, i)] = if pattern >> bit & 1 == 1 { 1.0 } else { -1.0 };
        }
    }
    g
}

fn subsets_up_to(total: usize, max_size: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(
        start: usize,
        total: usize,
        max_size: usize,
        cur: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize]),
    ) {
        f(cur);
        if cur.len() == max_size {
            return;
        }
        for i in start..total {
            cur.push(i);
            rec(i + 1, total, max_size, cur, f);
            cur.pop();
        }
    }
    rec(0, total, max_size, &mut Vec::new(), f);
}

/// Projection of `g` onto `{y : rows·y ≤ 0}`.
pub fn project(rows: &Matrix, g: &Vector) -> Vector {
    let n = g.len();
    let mut best: Option<Vector> = None;
    subsets_up_to(rows.nrows(), n, &mut |w| {
        let y = if w.is_empty() {
            g.clone()
        } else {
            let gw = rows.select_rows(w);
            let gram = &gw * gw.transpose();
            let Some(chol) = gram.clone().cholesky() else {
                return;
            };
            if gram.determinant().abs() < 1e-9 {
                return;
            }
            let lambda = chol.solve(&(&gw * g));
            if lambda.iter().any(|l| *l < -KKT_TOL) {
                return;
            }
            g - gw.transpose() * lambda
        };
        if (rows * &y).iter().all(|v| *v <= KKT_TOL) {
            let better = best
                .as_ref()
                .is_none_or(|b| (&y - g).norm() < (b - g).norm());
            if better {
                best = Some(y);
            }
        }
    });
    best.expect("the origin is always a KKT point")
}

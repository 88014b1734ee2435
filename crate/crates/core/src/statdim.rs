//! Statistical dimension of ℓ1 descent cones and the approximate kinematic
//! formula.
//!
//! For `x0` with support `S` and signs `σ`, the descent cone of `‖·‖₁` is
//! `C = {y : Σ_{i∈S} σᵢyᵢ + Σ_{i∉S} |yᵢ| ≤ 0}` and its polar is the cone
//! generated by the subdifferential `∂‖x0‖₁`. By Moreau decomposition
//! `‖Π_C(g)‖² = dist(g, C°)² = min_{t≥0} J(t)` with
//!
//! ```text
//!     J(t) = Σ_{i∈S} (gᵢ − t σᵢ)² + Σ_{i∉S} max(|gᵢ| − t, 0)²
//! ```
//!
//! which is minimized exactly by walking the breakpoints `|gᵢ|`, i ∉ S.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{derive_stream, gaussian_vector, RandomStream, Vector};

/// Entries with magnitude at or below this are treated as off-support.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

pub const DEFAULT_SAMPLES: usize = 100_000;

/// Sign/support description of `D(‖·‖₁, x0)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescentConeSpec {
    ambient_dim: usize,
    support_signs: BTreeMap<usize, i8>,
}

impl DescentConeSpec {
    pub fn new(ambient_dim: usize, support_signs: BTreeMap<usize, i8>) -> Result<Self> {
        for (&i, &s) in &support_signs {
            if i >= ambient_dim {
                return Err(invalid(format!(
                    "support index {i} out of range for dimension {ambient_dim}"
                )));
            }
            if s != 1 && s != -1 {
                return Err(invalid(format!("sign at index {i} must be ±1, got {s}")));
            }
        }
        Ok(Self {
            ambient_dim,
            support_signs,
        })
    }

    /// Cone at `(1, …, 1, 0, …, 0)` with `k` leading ones. Up to a signed
    /// permutation every `k`-sparse point gives the same statistical dimension.
    pub fn leading(ambient_dim: usize, k: usize) -> Result<Self> {
        if k > ambient_dim {
            return Err(invalid(format!(
                "sparsity {k} exceeds dimension {ambient_dim}"
            )));
        }
        Self::new(ambient_dim, (0..k).map(|i| (i, 1)).collect())
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn support_signs(&self) -> &BTreeMap<usize, i8> {
        &self.support_signs
    }

    pub fn sparsity(&self) -> usize {
        self.support_signs.len()
    }
}

/// Support and signs of `x0`. At `x0 = 0` the support is empty and the cone
/// is `{0}`, so its statistical dimension is 0.
pub fn descent_cone_of(x0: &Vector) -> DescentConeSpec {
    let support_signs = x0
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > SUPPORT_THRESHOLD)
        .map(|(i, v)| (i, if *v > 0.0 { 1 } else { -1 }))
        .collect();
    DescentConeSpec {
        ambient_dim: x0.len(),
        support_signs,
    }
}

/// `‖Π_C(g)‖²` for the descent cone `C` described by `spec`.
pub fn polar_distance_sq(spec: &DescentConeSpec, g: &[f64]) -> Result<f64> {
    if g.len() != spec.ambient_dim {
        return Err(Error::DimensionMismatch(format!(
            "g has {} entries, cone lives in dimension {}",
            g.len(),
            spec.ambient_dim
        )));
    }
    let k = spec.support_signs.len();
    let mut signed_sum = 0.0;
    let mut off: Vec<f64> = Vec::with_capacity(g.len() - k);
    let mut supp = spec.support_signs.iter().peekable();
    for (i, gi) in g.iter().enumerate() {
        match supp.peek() {
            Some((&j, &s)) if j == i => {
                signed_sum += f64::from(s) * gi;
                supp.next();
            }
            _ => off.push(gi.abs()),
        }
    }
    off.sort_unstable_by(|a, b| b.total_cmp(a));

    // On the segment where exactly the j largest |gᵢ| (i ∉ S) exceed t,
    // J'(t) = 2((k + j) t − signed_sum − prefix_j). J' is nondecreasing, so
    // the first segment whose stationary point clears its lower end holds
    // the minimizer.
    let mut prefix = 0.0;
    let mut t_star = 0.0;
    for j in 0..=off.len() {
        if j > 0 {
            prefix += off[j - 1];
        }
        let lower = off.get(j).copied().unwrap_or(0.0);
        let count = k + j;
        if count == 0 {
            // J ≡ 0 above the largest breakpoint.
            t_star = lower;
            break;
        }
        let t = (signed_sum + prefix) / count as f64;
        if t >= lower {
            t_star = t;
            break;
        }
    }
    let t = t_star.max(0.0);

    let mut value = 0.0;
    for (i, gi) in g.iter().enumerate() {
        let r = match spec.support_signs.get(&i) {
            Some(&s) => gi - t * f64::from(s),
            None => (gi.abs() - t).max(0.0),
        };
        value += r * r;
    }
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatDimEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Monte-Carlo estimate of `E‖Π_C(g)‖²`.
///
/// One base seed is drawn from `stream`; sample `i` then uses its own
/// `derive_stream(base, [i])`. Samples are evaluated in parallel and summed
/// in index order, so the result does not depend on the worker count.
pub fn estimate_statdim(
    spec: &DescentConeSpec,
    samples: usize,
    stream: &mut RandomStream,
) -> Result<StatDimEstimate> {
    if samples < 2 {
        return Err(invalid("at least two samples are required"));
    }
    let base = stream.next_u64();
    let n = spec.ambient_dim;
    let values: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let g = gaussian_vector(n, &mut derive_stream(base, &[i]));
            polar_distance_sq(spec, g.as_slice()).expect("dimension checked")
        })
        .collect();
    let count = samples as f64;
    let mean = values.iter().sum::<f64>() / count;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
    Ok(StatDimEstimate {
        mean,
        std_error: (var / count).sqrt(),
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Intersection is trivial with probability at least `1 − η`.
    SuccessBound,
    /// Intersection is nontrivial with probability at least `1 − η`.
    FailureBound,
    Inconclusive,
    /// A required statistical dimension was not supplied.
    Unavailable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub regime: Regime,
    pub a_eta: f64,
    /// `δ(C) + δ(K)`
    pub lhs: f64,
    /// `d − a_η √d`; the success regime needs `lhs ≤ success_rhs`.
    pub success_rhs: f64,
    /// `d + a_η √d`; the failure regime needs `lhs ≥ failure_rhs`.
    pub failure_rhs: f64,
    /// Bound on the probability that the intersection is trivial: a lower
    /// bound `1 − η` under `SuccessBound`, an upper bound `η` under
    /// `FailureBound`, and the vacuous lower bound 0 otherwise.
    pub probability_bound: f64,
}

impl BoundReport {
    fn unavailable(a_eta: f64) -> Self {
        Self {
            regime: Regime::Unavailable,
            a_eta,
            lhs: f64::NAN,
            success_rhs: f64::NAN,
            failure_rhs: f64::NAN,
            probability_bound: 0.0,
        }
    }
}

/// `a_η = √(8 ln(4/η))`.
pub fn a_eta(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(invalid(format!("eta must lie in (0, 1), got {eta}")));
    }
    Ok((8.0 * (4.0 / eta).ln()).sqrt())
}

fn classify(lhs: f64, d: f64, eta: f64) -> Result<BoundReport> {
    let a = a_eta(eta)?;
    let margin = a * d.sqrt();
    let success_rhs = d - margin;
    let failure_rhs = d + margin;
    let (regime, probability_bound) = if lhs <= success_rhs {
        (Regime::SuccessBound, 1.0 - eta)
    } else if lhs >= failure_rhs {
        (Regime::FailureBound, eta)
    } else {
        (Regime::Inconclusive, 0.0)
    };
    Ok(BoundReport {
        regime,
        a_eta: a,
        lhs,
        success_rhs,
        failure_rhs,
        probability_bound,
    })
}

/// Approximate kinematic formula for two cones in `R^d` under a random
/// rotation.
pub fn kinematic_bound(delta_c: f64, delta_k: f64, d: usize, eta: f64) -> Result<BoundReport> {
    if !(delta_c >= 0.0 && delta_k >= 0.0) {
        return Err(invalid("statistical dimensions must be nonnegative"));
    }
    classify(delta_c + delta_k, d as f64, eta)
}

/// Inputs for [`gdp_measurement_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementInputs {
    pub n1: usize,
    pub n2: usize,
    pub m: usize,
    pub delta_x: f64,
    pub delta_y: f64,
    /// `δ(A·D(‖·‖₁, x0))`, caller-supplied when known.
    pub delta_ax: Option<f64>,
    /// `δ(B·D(‖·‖₁, y0))`, caller-supplied when known.
    pub delta_by: Option<f64>,
    pub etas: [f64; 3],
}

/// The three measurement-count conditions for Gaussian `A`, `B`.
///
/// The first two compare `D(‖·‖₁, x0)` against `null(A)`, whose statistical
/// dimension is `n1 − m`, so the success regime reads
/// `m ≥ δ_x + a_η √n1` and the failure regime `m ≤ δ_x − a_η √n1`. The third
/// needs the statistical dimensions of the mapped cones in `R^m`, which have
/// no known closed form; without them the report is [`Regime::Unavailable`].
pub fn gdp_measurement_check(inputs: &MeasurementInputs) -> Result<[BoundReport; 3]> {
    let MeasurementInputs {
        n1,
        n2,
        m,
        delta_x,
        delta_y,
        delta_ax,
        delta_by,
        etas,
    } = *inputs;
    for d in [delta_x, delta_y]
        .into_iter()
        .chain(delta_ax)
        .chain(delta_by)
    {
        if d.is_nan() || d < 0.0 {
            return Err(invalid("statistical dimensions must be nonnegative"));
        }
    }
    let first = classify(delta_x + n1 as f64 - m as f64, n1 as f64, etas[0])?;
    let second = classify(delta_y + n2 as f64 - m as f64, n2 as f64, etas[1])?;
    let third = match (delta_ax, delta_by) {
        (Some(ax), Some(by)) => classify(ax + by, m as f64, etas[2])?,
        _ => BoundReport::unavailable(a_eta(etas[2])?),
    };
    Ok([first, second, third])
}

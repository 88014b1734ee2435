//! Seeded random generation, dense storage and norms.
//!
//! Matrices are [`nalgebra::DMatrix`] and therefore column-major; every
//! generator in this module fills entries in storage order so that a given
//! [`RandomStream`] always yields bit-identical output.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A single-owner deterministic random source.
///
/// The 64-bit `state` seeds a ChaCha8 generator; uniforms come from its
/// 53-bit float output and normals from the Box-Muller transform.
#[derive(Debug, Clone)]
pub struct RandomStream {
    state: u64,
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl RandomStream {
    pub fn from_state(state: u64) -> Self {
        Self {
            state,
            rng: ChaCha8Rng::seed_from_u64(state),
            spare_normal: None,
        }
    }

    /// The seed-derived state this stream was created from.
    pub fn state(&self) -> u64 {
        self.state
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on (0, 1].
    pub fn uniform_open_closed(&mut self) -> f64 {
        1.0 - self.rng.random::<f64>()
    }

    /// Uniform integer in `0..bound`. `bound` must be positive.
    pub fn below(&mut self, bound: u64) -> u64 {
        self.rng.random_range(0..bound)
    }

    pub fn coin(&mut self) -> bool {
        self.rng.random::<bool>()
    }

    /// Standard normal via Box-Muller; pairs are produced two at a time and
    /// the second one is cached for the next call.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform_open_closed();
        let u2 = self.rng.random::<f64>();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// Derive an independent stream from a master seed and a tuple of labels.
///
/// The state is `h_0 = mix64(seed + γ)` followed by
/// `h_{i+1} = mix64(h_i ^ mix64(label_i + (i + 2)·γ))`, where γ is the
/// 64-bit golden-ratio increment. Label order matters; call order does not.
pub fn derive_stream(master_seed: u64, labels: &[u64]) -> RandomStream {
    let mut h = mix64(master_seed.wrapping_add(GOLDEN_GAMMA));
    for (i, &label) in labels.iter().enumerate() {
        let salt = GOLDEN_GAMMA.wrapping_mul(i as u64 + 2);
        h = mix64(h ^ mix64(label.wrapping_add(salt)));
    }
    RandomStream::from_state(h)
}

/// `rows × cols` matrix of i.i.d. standard normals, filled column by column.
pub fn gaussian_matrix(rows: usize, cols: usize, stream: &mut RandomStream) -> Matrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| stream.standard_normal()).collect();
    Matrix::from_vec(rows, cols, data)
}

pub fn gaussian_vector(len: usize, stream: &mut RandomStream) -> Vector {
    Vector::from_iterator(len, (0..len).map(|_| stream.standard_normal()))
}

/// Length-`n` vector with exactly `k` entries equal to ±1 on a uniformly
/// random support (seeded partial Fisher-Yates) with fair signs.
pub fn spike_signal(n: usize, k: usize, stream: &mut RandomStream) -> Result<Vector> {
    if k > n {
        return Err(invalid(format!("sparsity {k} exceeds length {n}")));
    }
    let mut index: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + stream.below((n - i) as u64) as usize;
        index.swap(i, j);
    }
    let mut v = Vector::zeros(n);
    for &i in &index[..k] {
        v[i] = if stream.coin() { 1.0 } else { -1.0 };
    }
    Ok(v)
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn count_nonzeros(v: &[f64]) -> usize {
    v.iter().filter(|x| **x != 0.0).count()
}

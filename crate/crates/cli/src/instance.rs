//! JSON instance files.
//!
//! Floats are written in shortest round-trip form and parsed with full
//! precision, so `load(save(inst)) == inst` bit for bit.

use std::path::Path;

use anyhow::{bail, Context, Result};
use demixlab::l1programs::DemixInstance;
use demixlab::numerics::{Matrix, Vector};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema_version: u32,
    pub n1: usize,
    pub n2: usize,
    pub m: usize,
    pub k1: usize,
    pub k2: usize,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub z: Vec<f64>,
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(name: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<Matrix> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        bail!("{name} must be {nrows} rows of {ncols} entries");
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl InstanceFile {
    pub fn from_instance(inst: &DemixInstance) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n1: inst.n1,
            n2: inst.n2,
            m: inst.m,
            k1: inst.k1,
            k2: inst.k2,
            seed: inst.seed,
            x0: inst.x0.as_slice().to_vec(),
            y0: inst.y0.as_slice().to_vec(),
            a: rows_of(&inst.a),
            b: rows_of(&inst.b),
            z: inst.z.as_slice().to_vec(),
        }
    }

    /// Rebuild the instance and check that every stored field is consistent,
    /// including `z = A x0 + B y0`.
    pub fn into_instance(self) -> Result<DemixInstance> {
        if self.schema_version != SCHEMA_VERSION {
            bail!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            );
        }
        let inst = DemixInstance {
            n1: self.n1,
            n2: self.n2,
            m: self.m,
            k1: self.k1,
            k2: self.k2,
            a: matrix_from_rows("A", &self.a, self.m, self.n1)?,
            b: matrix_from_rows("B", &self.b, self.m, self.n2)?,
            x0: Vector::from_vec(self.x0),
            y0: Vector::from_vec(self.y0),
            z: Vector::from_vec(self.z),
            seed: self.seed,
        };
        inst.validate()?;
        Ok(inst)
    }
}

pub fn to_json(inst: &DemixInstance) -> String {
    let mut s = serde_json::to_string_pretty(&InstanceFile::from_instance(inst))
        .expect("plain data serializes");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> Result<DemixInstance> {
    let file: InstanceFile = serde_json::from_str(text).context("malformed instance file")?;
    file.into_instance()
}

pub fn load(path: &Path) -> Result<DemixInstance> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    from_json(&text).with_context(|| format!("loading {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let inst = DemixInstance::generate(7, 9, 5, 2, 3, 11).unwrap();
        let back = from_json(&to_json(&inst)).unwrap();
        assert_eq!(back, inst);
        for (a, b) in back.a.iter().zip(inst.a.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rejects_inconsistent_files() {
        let inst = DemixInstance::generate(4, 4, 3, 1, 1, 2).unwrap();
        let mut f = InstanceFile::from_instance(&inst);
        f.z[0] += 1.0;
        assert!(f.clone().into_instance().is_err());
        let mut g = InstanceFile::from_instance(&inst);
        g.a.pop();
        assert!(g.into_instance().is_err());
        let mut h = InstanceFile::from_instance(&inst);
        h.schema_version = 99;
        assert!(h.into_instance().is_err());
        assert!(from_json("{\"n1\": 1}").is_err());
    }
}

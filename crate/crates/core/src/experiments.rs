//! Phase-transition sweeps over `(k, m)` grids.
//!
//! Every trial owns the stream `derive_stream(master_seed, [cell, trial])`,
//! where cells are numbered with the k-pair index outer and the m index
//! inner. Trials run in parallel and are folded back in index order, so a
//! grid is bit-identical for any worker count.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::{practical_success, theorem_success, DEFAULT_TOL};
use crate::error::{invalid, Result};
use crate::l1programs::DemixInstance;
use crate::lp::LpOptions;
use crate::numerics::derive_stream;

pub const CSV_HEADER: &str =
    "k1,k2,m,trials,practical_successes,theorem_successes,disagreements,solver_failures";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Practical,
    Theorem,
    Both,
}

impl Mode {
    fn practical(self) -> bool {
        matches!(self, Mode::Practical | Mode::Both)
    }

    fn theorem(self) -> bool {
        matches!(self, Mode::Theorem | Mode::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Oracle {
    Practical,
    Theorem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGridConfig {
    pub n1: usize,
    pub n2: usize,
    pub k_values: Vec<(usize, usize)>,
    pub m_values: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    pub mode: Mode,
    pub tol: f64,
}

pub const DEFAULT_TRIALS: usize = 50;

impl PhaseGridConfig {
    /// Equal dimensions and sparsities, `k = 0, s, 2s, …, n` and
    /// `m = s, 2s, …, n`.
    pub fn square(n: usize, stride: usize, trials: usize, master_seed: u64) -> Result<Self> {
        if stride == 0 {
            return Err(invalid("stride must be positive"));
        }
        Ok(Self {
            n1: n,
            n2: n,
            k_values: (0..=n).step_by(stride).map(|k| (k, k)).collect(),
            m_values: (stride..=n).step_by(stride).collect(),
            trials,
            master_seed,
            mode: Mode::Both,
            tol: DEFAULT_TOL,
        })
    }

    /// `n1 = n2 = 100`, stride 5, 50 trials per cell.
    pub fn fig3_desk(master_seed: u64) -> Self {
        Self::square(100, 5, DEFAULT_TRIALS, master_seed).expect("valid preset")
    }

    /// `n1 = 100`, `n2 = 160`, `m = 10, 20, …, 100`, 100 trials per cell.
    /// The sparsity plane is sampled at `k1 = 0, 10, …, 100` crossed with
    /// `k2 = 0, 16, …, 160`.
    pub fn n1n2_paper(master_seed: u64) -> Self {
        let k_values = (0..=100)
            .step_by(10)
            .flat_map(|k1| (0..=160).step_by(16).map(move |k2| (k1, k2)))
            .collect();
        Self {
            n1: 100,
            n2: 160,
            k_values,
            m_values: (10..=100).step_by(10).collect(),
            trials: 100,
            master_seed,
            mode: Mode::Both,
            tol: DEFAULT_TOL,
        }
    }

    /// `n1 = n2 = 50`, stride 5, 5 trials per cell (550 instances).
    pub fn desk50(master_seed: u64) -> Self {
        Self::square(50, 5, 5, master_seed).expect("valid preset")
    }

    pub fn preset(name: &str, master_seed: u64) -> Result<Self> {
        match name {
            "fig3-desk" => Ok(Self::fig3_desk(master_seed)),
            "n1n2-paper" => Ok(Self::n1n2_paper(master_seed)),
            "desk-50" => Ok(Self::desk50(master_seed)),
            _ => Err(invalid(format!(
                "unknown preset {name:?}; expected fig3-desk, n1n2-paper or desk-50"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.k_values.is_empty() || self.m_values.is_empty() {
            return Err(invalid(
                "grid must have at least one k pair and one m value",
            ));
        }
        if let Some(&(k1, k2)) = self
            .k_values
            .iter()
            .find(|(k1, k2)| *k1 > self.n1 || *k2 > self.n2)
        {
            return Err(invalid(format!(
                "sparsity pair ({k1}, {k2}) exceeds dimensions ({}, {})",
                self.n1, self.n2
            )));
        }
        if self.m_values.contains(&0) {
            return Err(invalid("m values must be positive"));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(invalid("tol must be nonnegative"));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.k_values.len() * self.m_values.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCellResult {
    pub k1: usize,
    pub k2: usize,
    pub m: usize,
    pub trials: usize,
    pub practical_successes: usize,
    pub theorem_successes: usize,
    pub disagreements: usize,
    /// Trials in which at least one LP did not reach an optimum.
    pub solver_failures: usize,
}

impl PhaseCellResult {
    pub fn probability(&self, oracle: Oracle) -> f64 {
        let s = match oracle {
            Oracle::Practical => self.practical_successes,
            Oracle::Theorem => self.theorem_successes,
        };
        s as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub config: PhaseGridConfig,
    pub cells: Vec<PhaseCellResult>,
}

#[derive(Debug, Clone, Copy, Default)]
struct TrialOutcome {
    practical: bool,
    theorem: bool,
    solver_failure: bool,
}

fn run_trial(
    config: &PhaseGridConfig,
    (k1, k2): (usize, usize),
    m: usize,
    cell: usize,
    trial: usize,
    opts: &LpOptions,
) -> TrialOutcome {
    let mut stream = derive_stream(config.master_seed, &[cell as u64, trial as u64]);
    let seed = stream.state();
    let inst = DemixInstance::sample(config.n1, config.n2, m, k1, k2, seed, &mut stream)
        .expect("validated config");
    let mut out = TrialOutcome::default();
    if config.mode.practical() {
        let r = practical_success(&inst, config.tol, opts);
        out.practical = r.practical_success;
        out.solver_failure |= r.solver_failure.is_some();
    }
    if config.mode.theorem() {
        let r = theorem_success(&inst, config.tol, opts);
        out.theorem = r.theorem_success;
        out.solver_failure |= r.solver_failure.is_some();
    }
    if out.solver_failure {
        log::warn!("solver failure at k=({k1}, {k2}) m={m} trial {trial}");
    }
    out
}

pub fn run_phase_grid(config: &PhaseGridConfig) -> Result<PhaseGrid> {
    run_phase_grid_with(config, &LpOptions::default())
}

pub fn run_phase_grid_with(config: &PhaseGridConfig, opts: &LpOptions) -> Result<PhaseGrid> {
    config.validate()?;
    let n_m = config.m_values.len();
    let trials = config.trials;
    let outcomes: Vec<TrialOutcome> = (0..config.n_cells() * trials)
        .into_par_iter()
        .map(|idx| {
            let (cell, trial) = (idx / trials, idx % trials);
            let k = config.k_values[cell / n_m];
            let m = config.m_values[cell % n_m];
            run_trial(config, k, m, cell, trial, opts)
        })
        .collect();

    let cells = outcomes
        .chunks(trials)
        .enumerate()
        .map(|(cell, chunk)| {
            let (k1, k2) = config.k_values[cell / n_m];
            let mut r = PhaseCellResult {
                k1,
                k2,
                m: config.m_values[cell % n_m],
                trials,
                practical_successes: 0,
                theorem_successes: 0,
                disagreements: 0,
                solver_failures: 0,
            };
            for t in chunk {
                r.practical_successes += usize::from(t.practical);
                r.theorem_successes += usize::from(t.theorem);
                r.disagreements +=
                    usize::from(config.mode == Mode::Both && t.practical != t.theorem);
                r.solver_failures += usize::from(t.solver_failure);
            }
            r
        })
        .collect();
    Ok(PhaseGrid {
        config: config.clone(),
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementStats {
    pub cells: usize,
    pub trials: usize,
    pub agreement_rate: f64,
}

pub fn agreement_stats(grid: &PhaseGrid) -> Result<AgreementStats> {
    if grid.config.mode != Mode::Both {
        return Err(invalid(
            "agreement statistics need a grid run with mode Both",
        ));
    }
    let trials: usize = grid.cells.iter().map(|c| c.trials).sum();
    let disagreements: usize = grid.cells.iter().map(|c| c.disagreements).sum();
    Ok(AgreementStats {
        cells: grid.cells.len(),
        trials,
        agreement_rate: 1.0 - disagreements as f64 / trials as f64,
    })
}

pub fn to_csv(grid: &PhaseGrid) -> String {
    let mut out = String::with_capacity(40 * (grid.cells.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for c in &grid.cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            c.k1,
            c.k2,
            c.m,
            c.trials,
            c.practical_successes,
            c.theorem_successes,
            c.disagreements,
            c.solver_failures
        )
        .expect("writing to a String");
    }
    out
}

/// Binary graymap (P5) of the empirical success probability. Columns follow
/// the k pairs in config order, rows run from the largest m at the top to the
/// smallest at the bottom. Pixel value is `round(255·p)`.
pub fn to_pgm(grid: &PhaseGrid, oracle: Oracle) -> Result<Vec<u8>> {
    let wanted = match oracle {
        Oracle::Practical => grid.config.mode.practical(),
        Oracle::Theorem => grid.config.mode.theorem(),
    };
    if !wanted {
        return Err(invalid(format!(
            "grid was not run with the {oracle:?} oracle"
        )));
    }
    let width = grid.config.k_values.len();
    let n_m = grid.config.m_values.len();
    let mut rows: Vec<usize> = (0..n_m).collect();
    rows.sort_by(|&a, &b| grid.config.m_values[b].cmp(&grid.config.m_values[a]));

    let mut out = format!("P5\n{width} {n_m}\n255\n").into_bytes();
    for r in rows {
        for col in 0..width {
            let p = grid.cells[col * n_m + r].probability(oracle);
            out.push((255.0 * p).round() as u8);
        }
    }
    Ok(out)
}

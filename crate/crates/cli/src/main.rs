//! `demixlab` command-line front end.
//!
//! Exit codes: 0 when a classifying command reports success, 1 when it
//! reports failure, 2 on any error.

mod instance;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use demixlab::certificate::{practical_success, theorem_success, DEFAULT_TOL};
use demixlab::experiments::{self, Mode, Oracle, PhaseGridConfig};
use demixlab::l1programs::DemixInstance;
use demixlab::lp::LpOptions;
use demixlab::numerics::derive_stream;
use demixlab::statdim::{
    descent_cone_of, estimate_statdim, gdp_measurement_check, BoundReport, DescentConeSpec,
    MeasurementInputs, Regime, DEFAULT_SAMPLES,
};

const THREADS_ENV: &str = "DEMIXLAB_THREADS";

#[derive(Parser)]
#[command(
    name = "demixlab",
    version,
    about = "Generalized l1 demixing experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance file.
    Gen(GenArgs),
    /// Solve the demixing program and compare with the ground truth.
    Solve(CheckArgs),
    /// Run the three-program success certificate.
    Verify(CheckArgs),
    /// Sweep a (k, m) grid and write CSV and graymap outputs.
    Phase(PhaseArgs),
    /// Monte-Carlo statistical dimension of an l1 descent cone.
    Statdim(StatdimArgs),
    /// Kinematic-formula measurement bounds.
    Bounds(BoundsArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n1: usize,
    #[arg(long)]
    n2: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    k1: usize,
    #[arg(long)]
    k2: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, visible_alias = "out-path")]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long = "in", visible_alias = "in-path")]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Practical,
    Theorem,
    Both,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Practical => Mode::Practical,
            ModeArg::Theorem => Mode::Theorem,
            ModeArg::Both => Mode::Both,
        }
    }
}

#[derive(Args)]
struct PhaseArgs {
    /// fig3-desk, n1n2-paper or desk-50. Explicit grid flags override it.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    /// Comma-separated sparsities; `k` means k1 = k2 = k, `k1:k2` a pair.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<String>>,
    /// Comma-separated measurement counts.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    csv_out: Option<PathBuf>,
    #[arg(long = "pgm-out-practical", visible_alias = "pgm-practical")]
    pgm_practical: Option<PathBuf>,
    #[arg(long = "pgm-out-theorem", visible_alias = "pgm-theorem")]
    pgm_theorem: Option<PathBuf>,
}

#[derive(Args)]
struct StatdimArgs {
    #[arg(long, conflicts_with = "input", requires = "k")]
    n: Option<usize>,
    #[arg(long, requires = "n")]
    k: Option<usize>,
    /// Estimate for the cones at x0 and y0 of an instance file.
    #[arg(long = "in", visible_alias = "in-path", required_unless_present = "n")]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    n1: usize,
    #[arg(long)]
    n2: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    delta_x: f64,
    #[arg(long)]
    delta_y: f64,
    #[arg(long)]
    delta_ax: Option<f64>,
    #[arg(long)]
    delta_by: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    eta1: f64,
    #[arg(long, default_value_t = 0.1)]
    eta2: f64,
    #[arg(long, default_value_t = 0.1)]
    eta3: f64,
}

/// Write `bytes` to a temporary file beside `path` and rename it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("{THREADS_ENV} must be a nonnegative integer, got {raw:?}"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol >= 0.0 && tol.is_finite()) {
        bail!("--tol must be a finite nonnegative number");
    }
    Ok(())
}

fn classification(success: bool) -> ExitCode {
    if success {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_gen(a: &GenArgs) -> Result<ExitCode> {
    let inst = DemixInstance::generate(a.n1, a.n2, a.m, a.k1, a.k2, a.seed)?;
    write_atomic(&a.out, instance::to_json(&inst).as_bytes())?;
    println!(
        "wrote {} (n1={} n2={} m={} k1={} k2={} seed={})",
        a.out.display(),
        a.n1,
        a.n2,
        a.m,
        a.k1,
        a.k2,
        a.seed
    );
    Ok(ExitCode::SUCCESS)
}

fn status_line(failure: Option<demixlab::lp::LpStatus>) -> String {
    failure.map_or_else(|| "none".to_string(), |s| format!("{s:?}"))
}

fn cmd_solve(a: &CheckArgs) -> Result<ExitCode> {
    check_tol(a.tol)?;
    let inst = instance::load(&a.input)?;
    let r = practical_success(&inst, a.tol, &LpOptions::default());
    println!("x_error: {:e}", r.x_error);
    println!("y_error: {:e}", r.y_error);
    println!("tol: {:e}", r.tol);
    println!("solver_failure: {}", status_line(r.solver_failure));
    println!("success: {}", r.practical_success);
    Ok(classification(r.practical_success))
}

fn cmd_verify(a: &CheckArgs) -> Result<ExitCode> {
    check_tol(a.tol)?;
    let inst = instance::load(&a.input)?;
    let r = theorem_success(&inst, a.tol, &LpOptions::default());
    println!("norm_x2: {:e}", r.norm_x2);
    println!("norm_y2: {:e}", r.norm_y2);
    println!("norm_x3: {:e}", r.norm_x3);
    println!("norm_y3: {:e}", r.norm_y3);
    println!("tol: {:e}", r.tol);
    println!("cond1: {}", r.cond1);
    println!("cond2: {}", r.cond2);
    println!("cond3: {}", r.cond3);
    println!("solver_failure: {}", status_line(r.solver_failure));
    println!("success: {}", r.theorem_success);
    Ok(classification(r.theorem_success))
}

fn parse_k(items: &[String]) -> Result<Vec<(usize, usize)>> {
    items
        .iter()
        .map(|s| {
            let s = s.trim();
            let parse = |t: &str| {
                t.trim()
                    .parse::<usize>()
                    .with_context(|| format!("bad sparsity {s:?}"))
            };
            match s.split_once(':') {
                Some((a, b)) => Ok((parse(a)?, parse(b)?)),
                None => parse(s).map(|k| (k, k)),
            }
        })
        .collect()
}

fn phase_config(a: &PhaseArgs) -> Result<PhaseGridConfig> {
    let mut cfg = match &a.preset {
        Some(name) => PhaseGridConfig::preset(name, a.seed)?,
        None => {
            let (Some(n1), Some(k), Some(m)) = (a.n1, &a.k, &a.m) else {
                bail!("without --preset, --n1, --k and --m are required");
            };
            PhaseGridConfig {
                n1,
                n2: a.n2.unwrap_or(n1),
                k_values: parse_k(k)?,
                m_values: m.clone(),
                trials: experiments::DEFAULT_TRIALS,
                master_seed: a.seed,
                mode: Mode::Both,
                tol: DEFAULT_TOL,
            }
        }
    };
    if a.preset.is_some() {
        if let Some(n1) = a.n1 {
            cfg.n1 = n1;
        }
        if let Some(n2) = a.n2 {
            cfg.n2 = n2;
        }
        if let Some(k) = &a.k {
            cfg.k_values = parse_k(k)?;
        }
        if let Some(m) = &a.m {
            cfg.m_values = m.clone();
        }
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(mode) = a.mode {
        cfg.mode = mode.into();
    }
    if let Some(tol) = a.tol {
        check_tol(tol)?;
        cfg.tol = tol;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_phase(a: &PhaseArgs) -> Result<ExitCode> {
    let cfg = phase_config(a)?;
    // Reject impossible output requests before spending time on the grid.
    if a.pgm_practical.is_some() && cfg.mode == Mode::Theorem {
        bail!("--pgm-out-practical needs mode practical or both");
    }
    if a.pgm_theorem.is_some() && cfg.mode == Mode::Practical {
        bail!("--pgm-out-theorem needs mode theorem or both");
    }
    log::info!("running {} cells x {} trials", cfg.n_cells(), cfg.trials);
    let grid = experiments::run_phase_grid(&cfg)?;

    if let Some(p) = &a.csv_out {
        write_atomic(p, experiments::to_csv(&grid).as_bytes())?;
    }
    if let Some(p) = &a.pgm_practical {
        write_atomic(p, &experiments::to_pgm(&grid, Oracle::Practical)?)?;
    }
    if let Some(p) = &a.pgm_theorem {
        write_atomic(p, &experiments::to_pgm(&grid, Oracle::Theorem)?)?;
    }
    if a.csv_out.is_none() {
        print!("{}", experiments::to_csv(&grid));
    }
    let trials: usize = grid.cells.iter().map(|c| c.trials).sum();
    let failures: usize = grid.cells.iter().map(|c| c.solver_failures).sum();
    eprintln!(
        "cells: {} trials: {trials} solver_failures: {failures}",
        grid.cells.len()
    );
    if cfg.mode == Mode::Both {
        eprintln!(
            "agreement_rate: {}",
            experiments::agreement_stats(&grid)?.agreement_rate
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn print_estimate(
    label: &str,
    spec: &DescentConeSpec,
    samples: usize,
    seed: u64,
    labels: &[u64],
) -> Result<()> {
    let e = estimate_statdim(spec, samples, &mut derive_stream(seed, labels))?;
    println!(
        "{label}: n={} k={} mean={} std_error={} samples={}",
        spec.ambient_dim(),
        spec.sparsity(),
        e.mean,
        e.std_error,
        e.samples
    );
    Ok(())
}

fn cmd_statdim(a: &StatdimArgs) -> Result<ExitCode> {
    match (&a.input, a.n, a.k) {
        (Some(path), _, _) => {
            let inst = instance::load(path)?;
            print_estimate(
                "delta_x",
                &descent_cone_of(&inst.x0),
                a.samples,
                a.seed,
                &[0],
            )?;
            print_estimate(
                "delta_y",
                &descent_cone_of(&inst.y0),
                a.samples,
                a.seed,
                &[1],
            )?;
        }
        (None, Some(n), Some(k)) => print_estimate(
            "delta",
            &DescentConeSpec::leading(n, k)?,
            a.samples,
            a.seed,
            &[],
        )?,
        _ => bail!("give either --n and --k or --in"),
    }
    Ok(ExitCode::SUCCESS)
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::SuccessBound => "success-bound",
        Regime::FailureBound => "failure-bound",
        Regime::Inconclusive => "inconclusive",
        Regime::Unavailable => "unavailable",
    }
}

fn print_bound(index: usize, r: &BoundReport) {
    if r.regime == Regime::Unavailable {
        println!(
            "condition {index}: unavailable a_eta={} (mapped-cone dimensions not supplied)",
            r.a_eta
        );
        return;
    }
    println!(
        "condition {index}: {} a_eta={} lhs={} success_rhs={} failure_rhs={} probability_bound={}",
        regime_name(r.regime),
        r.a_eta,
        r.lhs,
        r.success_rhs,
        r.failure_rhs,
        r.probability_bound
    );
}

fn cmd_bounds(a: &BoundsArgs) -> Result<ExitCode> {
    let reports = gdp_measurement_check(&MeasurementInputs {
        n1: a.n1,
        n2: a.n2,
        m: a.m,
        delta_x: a.delta_x,
        delta_y: a.delta_y,
        delta_ax: a.delta_ax,
        delta_by: a.delta_by,
        etas: [a.eta1, a.eta2, a.eta3],
    })?;
    for (i, r) in reports.iter().enumerate() {
        print_bound(i + 1, r);
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    configure_threads()?;
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Phase(a) => cmd_phase(a),
        Command::Statdim(a) => cmd_statdim(a),
        Command::Bounds(a) => cmd_bounds(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

//! Command-line front end: fix, validate, generate and sweep density-matrix
//! files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use rdmfix::error::{RdmError, Result};
use rdmfix::fixer::{fix_doci, fix_regular, parse_order, FixConfig};
use rdmfix::io::{report_json, sweep_csv, RdmFile};
use rdmfix::pairing::{
    exact_doci_rdms, pccd_solve, response_doci_rdms, PairingModel, DEFAULT_FD_STEP,
};
use rdmfix::rdm::{embed_to_spin, validate_doci, validate_spin, Doci2Rdm, ValidationReport};
use rdmfix::specproj::ProjectionStrategy;
use rdmfix::sweep::{run_sweep, FixMode, SweepParams};

#[derive(Parser)]
#[command(
    name = "rdmfix",
    about = "Restore two-particle density matrices to approximate N-representability",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fix a density-matrix file so it satisfies the positivity conditions.
    Fix(FixArgs),
    /// Check a density-matrix file against every condition and print a report.
    Validate { input: PathBuf },
    /// Sweep the pairing-model coupling and tabulate energies and costs.
    Sweep(SweepArgs),
    /// Generate pairing-model density-matrix files.
    Gen(GenArgs),
}

#[derive(Args)]
struct FixArgs {
    input: PathBuf,
    /// Restoration loop: `regular` expects a SPIN file, `doci` a DOCI file.
    #[arg(long)]
    mode: FixMode,
    /// Eigenvalue tolerance at convergence.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Trace tolerance at convergence.
    #[arg(long, default_value_t = 1e-10)]
    tol_trace: f64,
    #[arg(long, default_value_t = 500)]
    max_sweeps: usize,
    /// Order in which the condition families are repaired.
    #[arg(long, default_value = "PQG")]
    order: String,
    /// Spectrum repair: `bisection` or `zero-and-shift`.
    #[arg(long, default_value = "bisection")]
    strategy: ProjectionStrategy,
    /// Rescale exchange rows toward the pair occupations each sweep.
    #[arg(long)]
    enforce_rho_consistency: bool,
    /// Fixed output file.
    #[arg(long, short)]
    output: PathBuf,
    /// JSON report file.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 12)]
    levels: usize,
    #[arg(long, default_value_t = 6)]
    pairs: usize,
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    #[arg(long, allow_hyphen_values = true)]
    gmin: f64,
    #[arg(long, allow_hyphen_values = true)]
    gmax: f64,
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value = "doci")]
    mode: FixMode,
    #[arg(long, default_value_t = 500)]
    max_sweeps: usize,
    /// Output table (CSV with a schema comment).
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    /// `exact`, `response` or `noisy`.
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 12)]
    levels: usize,
    #[arg(long, default_value_t = 6)]
    pairs: usize,
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    #[arg(long, allow_hyphen_values = true)]
    g: f64,
    /// Noise scale for `--kind noisy`.
    #[arg(long, default_value_t = 1e-3)]
    noise: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output representation: `doci` or `spin`.
    #[arg(long, default_value = "doci")]
    representation: String,
    #[arg(long, short)]
    output: PathBuf,
}

fn main() -> ExitCode {
    env_logger::init();
    if let Ok(threads) = std::env::var("RDMFIX_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: RDMFIX_THREADS must be a positive integer");
                return ExitCode::from(1);
            }
        }
    }
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fix(args) => cmd_fix(args),
        Command::Validate { input } => cmd_validate(input),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Gen(args) => cmd_gen(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn cmd_fix(args: FixArgs) -> Result<u8> {
    let cfg = FixConfig {
        tol_trace: args.tol_trace,
        tol_eig: args.tol,
        max_sweeps: args.max_sweeps,
        order: parse_order(&args.order)?,
        strategy: args.strategy,
        enforce_rho_consistency: args.enforce_rho_consistency,
        ..FixConfig::default()
    };
    let file = RdmFile::read_path(&args.input)?;
    let (mode_name, initial, fixed_file, report, final_state): (
        &str,
        ValidationReport,
        RdmFile,
        _,
        ValidationReport,
    ) = match (&args.mode, file) {
        (FixMode::Regular, RdmFile::Spin(g2)) => {
            let initial = validate_spin(&g2)?;
            let (fixed, report) = fix_regular(&g2, &cfg)?;
            let final_state = validate_spin(&fixed)?;
            ("regular", initial, RdmFile::Spin(fixed), report, final_state)
        }
        (FixMode::Doci, RdmFile::Doci(r)) => {
            let initial = validate_doci(&r)?;
            let (fixed, report) = fix_doci(&r, &cfg)?;
            let final_state = validate_doci(&fixed)?;
            ("doci", initial, RdmFile::Doci(fixed), report, final_state)
        }
        (mode, file) => {
            return Err(RdmError::Domain(format!(
                "mode {mode:?} expects a {} file but the input is {}",
                match mode {
                    FixMode::Regular => "SPIN",
                    FixMode::Doci => "DOCI",
                },
                file.representation()
            )));
        }
    };

    fixed_file.write_path(&args.output)?;
    std::fs::write(
        &args.report,
        report_json(mode_name, &report, &initial, &final_state),
    )?;

    println!(
        "{} sweeps, converged: {}, cost {:.3e}",
        report.sweeps_used, report.converged, report.final_cost
    );
    println!("violations before: {:.3e}", initial.max_violation());
    println!("violations after:  {:.3e}", final_state.max_violation());
    Ok(if report.converged { 0 } else { 2 })
}

fn cmd_validate(input: PathBuf) -> Result<u8> {
    let report = match RdmFile::read_path(&input)? {
        RdmFile::Spin(g2) => validate_spin(&g2)?,
        RdmFile::Doci(r) => validate_doci(&r)?,
    };
    for line in report.summary_lines() {
        println!("{line}");
    }
    let violations = report.violations(1e-8);
    if violations.is_empty() {
        println!("all conditions satisfied");
        Ok(0)
    } else {
        println!("violated: {}", violations.join(", "));
        Ok(2)
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<u8> {
    let mut params = SweepParams::new(
        args.levels,
        args.pairs,
        args.spacing,
        args.gmin,
        args.gmax,
        args.steps,
        args.mode,
    );
    params.fix.max_sweeps = args.max_sweeps;
    let rows = run_sweep(&params)?;
    std::fs::write(&args.output, sweep_csv(&rows))?;
    println!("wrote {} rows to {}", rows.len(), args.output.display());
    Ok(0)
}

fn cmd_gen(args: GenArgs) -> Result<u8> {
    let model = PairingModel::picket_fence(args.levels, args.pairs, args.spacing, args.g)?;
    let rdm = match args.kind.as_str() {
        "exact" => exact_doci_rdms(&model)?,
        "response" => {
            let base = pccd_solve(&model, None);
            let resp = response_doci_rdms(&model, &base, DEFAULT_FD_STEP)?;
            if !resp.all_converged {
                eprintln!("warning: a projected-equation solve did not converge");
            }
            resp.rdm
        }
        "noisy" => {
            let exact = exact_doci_rdms(&model)?;
            add_seniority_noise(&exact, args.noise, args.seed)?
        }
        other => {
            return Err(RdmError::Domain(format!(
                "unknown kind '{other}' (expected exact, response or noisy)"
            )));
        }
    };
    let file = match args.representation.as_str() {
        "doci" => RdmFile::Doci(rdm),
        "spin" => RdmFile::Spin(embed_to_spin(&rdm)),
        other => {
            return Err(RdmError::Domain(format!(
                "unknown representation '{other}' (expected doci or spin)"
            )));
        }
    };
    file.write_path(&args.output)?;
    println!("wrote {} file to {}", file.representation(), args.output.display());
    Ok(0)
}

/// Symmetric Gaussian noise on both seniority-zero blocks, keeping the
/// exchange diagonal at zero; deterministic for a given seed.
fn add_seniority_noise(r: &Doci2Rdm, scale: f64, seed: u64) -> Result<Doci2Rdm> {
    if scale < 0.0 {
        return Err(RdmError::Domain(format!("noise scale {scale} is negative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = r.l();
    let mut pi = r.pair_matrix().clone();
    let mut d = r.exchange_matrix().clone();
    for a in 0..l {
        for b in a..l {
            let e: f64 = StandardNormal.sample(&mut rng);
            pi[(a, b)] += scale * e;
            if a != b {
                pi[(b, a)] = pi[(a, b)];
                let f: f64 = StandardNormal.sample(&mut rng);
                d[(a, b)] += scale * f;
                d[(b, a)] = d[(a, b)];
            }
        }
    }
    Doci2Rdm::new(l, r.n(), pi, d)
}

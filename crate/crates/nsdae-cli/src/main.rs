//! Command-line front end: experiment sweeps, pencil analysis, the
//! nilpotent amplification demo, and manifest validation.
//!
//! Exit codes: 0 on success, 1 for usage/configuration problems, 2 for
//! numerical failures.

mod config;
mod experiment;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use nsdae::error::Error;
use nsdae::pencil::{
    build_imex_pencil, build_projection_pencil, build_simple_pencil, MatrixPair,
    SaddleSystemDescriptor,
};
use nsdae::schemes::nilpotent_example_solve;

#[derive(Parser)]
#[command(name = "nsdae", version, about = "DAE-aware time stepping for incompressible flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a configured (scheme, tau, lintol) sweep and write a
    /// diagnostics CSV.
    Run(RunArgs),
    /// Classify a matrix pencil: regularity, Kronecker index, causality.
    AnalyzePencil(AnalyzePencilArgs),
    /// Error-amplification table of the index-2 nilpotent recurrence.
    NilpotentDemo(NilpotentArgs),
    /// Validate a system manifest and report its dimensions.
    ImportCheck { manifest: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Number of concurrent runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Write every state as a MatrixMarket array file.
    #[arg(long)]
    dump_states: bool,
    /// Suppress the timestamp comment, for byte-reproducible output.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Args)]
struct AnalyzePencilArgs {
    /// Build the pencil of a named scheme from a saddle descriptor
    /// (requires --mass, --jacobian, --divergence, --tau).
    #[arg(long, value_parser = ["imex", "projection", "simple"])]
    scheme: Option<String>,
    /// MatrixMarket file of E for a raw pair.
    #[arg(long, requires = "a_matrix", conflicts_with = "scheme")]
    e_matrix: Option<PathBuf>,
    /// MatrixMarket file of A for a raw pair.
    #[arg(long)]
    a_matrix: Option<PathBuf>,
    #[arg(long, requires = "scheme")]
    mass: Option<PathBuf>,
    #[arg(long, requires = "scheme")]
    jacobian: Option<PathBuf>,
    #[arg(long, requires = "scheme")]
    divergence: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
}

#[derive(Args)]
struct NilpotentArgs {
    /// Time steps to tabulate (repeat the flag).
    #[arg(long = "tau", required = true)]
    taus: Vec<f64>,
    /// Size of the one-sample perturbation of the data sequence.
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) | Error::Parse { .. } | Error::Io(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through the error path too
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::AnalyzePencil(args) => cmd_analyze_pencil(args),
        Command::NilpotentDemo(args) => cmd_nilpotent_demo(args),
        Command::ImportCheck { manifest } => cmd_import_check(manifest),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn cmd_run(args: RunArgs) -> nsdae::Result<()> {
    let cfg = config::ExperimentConfig::read(&args.config)?;
    let opts = experiment::RunOptions {
        jobs: args.jobs,
        dump_states: args.dump_states,
        no_timestamp: args.no_timestamp,
    };
    experiment::execute(&cfg, &opts)
}

fn cmd_analyze_pencil(args: AnalyzePencilArgs) -> nsdae::Result<()> {
    let pair = match (&args.scheme, &args.e_matrix) {
        (Some(scheme), None) => {
            let need = |o: &Option<PathBuf>, what: &str| {
                o.clone().ok_or_else(|| {
                    Error::InvalidConfig(format!("--scheme needs --{what}"))
                })
            };
            let mass = nsdae::mmio::read_matrix(need(&args.mass, "mass")?)?;
            let k_v = nsdae::mmio::read_matrix(need(&args.jacobian, "jacobian")?)?;
            let b = nsdae::mmio::read_matrix(need(&args.divergence, "divergence")?)?;
            let d = SaddleSystemDescriptor::new(mass, k_v, b)?;
            match scheme.as_str() {
                "imex" => build_imex_pencil(&d, args.tau)?,
                "projection" => build_projection_pencil(&d, args.tau)?,
                "simple" => build_simple_pencil(&d, args.tau)?,
                _ => unreachable!("clap restricts the values"),
            }
        }
        (None, Some(e_path)) => {
            let a_path = args
                .a_matrix
                .as_ref()
                .expect("clap enforces --a-matrix with --e-matrix");
            let e = nsdae::mmio::read_matrix(e_path)?;
            let a = nsdae::mmio::read_matrix(a_path)?;
            MatrixPair::new(e, a)?
        }
        _ => {
            return Err(Error::InvalidConfig(
                "give either --scheme with a descriptor or --e-matrix/--a-matrix".into(),
            ));
        }
    };
    println!("{}", pair.analyze()?);
    Ok(())
}

fn cmd_nilpotent_demo(args: NilpotentArgs) -> nsdae::Result<()> {
    // fixed 2x2 index-2 nilpotent block; data with one perturbed sample
    let n_mat = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let len = 12usize;
    let base: Vec<DVector<f64>> = (0..len)
        .map(|k| DVector::from_vec(vec![0.2 * k as f64, (k as f64 * 0.4).sin()]))
        .collect();
    let mut perturbed = base.clone();
    perturbed[len / 2][1] += args.epsilon;

    println!("tau,max_state_shift,amplification");
    for &tau in &args.taus {
        let clean = nilpotent_example_solve(&n_mat, &base, tau)?;
        let noisy = nilpotent_example_solve(&n_mat, &perturbed, tau)?;
        let shift = clean
            .iter()
            .zip(&noisy)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0f64, f64::max);
        let amplification = if args.epsilon == 0.0 {
            0.0
        } else {
            shift / args.epsilon
        };
        println!("{tau:.16e},{shift:.16e},{amplification:.16e}");
    }
    Ok(())
}

fn cmd_import_check(manifest: PathBuf) -> nsdae::Result<()> {
    let sys = nsdae::import::import_system(&manifest)?;
    println!(
        "ok: n = {}, m = {}, Re = {}, convection = {}, nnz(M) = {}, nnz(A) = {}, nnz(B) = {}",
        sys.n(),
        sys.m(),
        sys.reynolds,
        match &sys.convection {
            nsdae::system::Convection::Zero => "none (Stokes/Oseen)",
            nsdae::system::Convection::Tensor(_) => "tensor",
            nsdae::system::Convection::Eval(_) => "grid-attached",
        },
        sys.mass.nnz(),
        sys.a_lin.nnz(),
        sys.b.nnz(),
    );
    Ok(())
}

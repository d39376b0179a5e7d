use std::path::PathBuf;
use std::process::ExitCode;

use anosov_cli::{report, suites, RunConfig};
use anosov_core::Error;
use clap::{Parser, Subcommand};

/// Exit status: 0 all checks pass, 1 a check failed, 2 bad input, 3 request refused.
const EXIT_FAILED: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_REFUSED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "anosov", version, about = "Verification runs for suspension Anosov flows")]
struct Cli {
    /// Run configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides `[run] seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overrides the solver tolerance `[solver] tol`.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Randomized exterior-algebra identities.
    AlgebraSelftest,
    /// Model description, group law, cocycle, volume and rate constants.
    Model,
    /// Contraction-rate fits and the asymmetry verdict.
    Rates {
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Livšic solver checks.
    Solve {
        #[arg(long)]
        degree: Option<usize>,
        /// Only the closed-form oracle sites and convergence slopes.
        #[arg(long)]
        oracle: bool,
    },
    /// L² norms, the adjoint identity and the star identity.
    Adjoint,
    /// Orthogonality of L_X-exact (n-1)-forms to i_X Ω.
    Orthogonality,
    /// Periodic-orbit integrals.
    Obstruction,
    /// Weak closedness of α.
    WeakClosed,
    /// Every suite.
    All,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::AlgebraSelftest => "algebra-selftest",
            Command::Model => "model",
            Command::Rates { .. } => "rates",
            Command::Solve { .. } => "solve",
            Command::Adjoint => "adjoint",
            Command::Orthogonality => "orthogonality",
            Command::Obstruction => "obstruction",
            Command::WeakClosed => "weak-closed",
            Command::All => "all",
        }
    }
}

fn resolve(cli: &Cli) -> anosov_core::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if let Some(t) = cli.tol {
        cfg.solver.tol = t;
    }
    match &cli.command {
        Command::Rates { samples: Some(n) } => cfg.rates.samples = *n,
        Command::Solve { degree: Some(d), .. } => cfg.solver.degree = *d,
        _ => {}
    }
    Ok(cfg)
}

fn exit_for(err: &Error) -> u8 {
    match err {
        Error::DegreeRefused { .. } | Error::NoContraction(_) => EXIT_REFUSED,
        _ => EXIT_INPUT,
    }
}

fn init_threads() {
    if let Some(n) = std::env::var("ANOSOV_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("anosov: {e}");
            return ExitCode::from(exit_for(&e));
        }
    };
    let command = cli.command.name();
    let flow = match suites::build_flow(&cfg) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("anosov: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    if let Command::Solve { .. } = cli.command {
        if let Err(e) = suites::check_solve_degree(&flow, cfg.solver.degree) {
            eprintln!("anosov: {e}");
            return ExitCode::from(EXIT_REFUSED);
        }
    }
    let oracle_only = matches!(cli.command, Command::Solve { oracle: true, .. });
    let reports = match suites::run(command, &flow, &cfg, oracle_only) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("anosov: {e}");
            return ExitCode::from(exit_for(&e));
        }
    };
    let written = match report::write_outputs(&cfg.output_dir, command, &cfg, &reports) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("anosov: cannot write reports to {}: {e}", cfg.output_dir.display());
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let pass = reports.iter().all(|r| r.pass);
    if !cli.quiet || !pass {
        for r in &reports {
            println!("{:<18} {}  ({}/{} checks)", r.suite, if r.pass { "PASS" } else { "FAIL" }, r.checks.iter().filter(|c| c.pass).count(), r.checks.len());
            for c in r.failures() {
                println!("    {}: {:e} (tolerance {:e})", c.name, c.value, c.tolerance);
            }
        }
        if !cli.quiet {
            println!("reports: {}", written[0].display());
        }
    }
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILED)
    }
}

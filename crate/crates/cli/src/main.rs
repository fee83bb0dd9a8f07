//! `degpot`: kernels, potentials, boundary integral solves and convergence studies for
//! `u_t - a(t)Δu` from a TOML run configuration.

mod commands;
mod config;
mod error;
mod io;
mod study;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{load_config, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "degpot", version, about = "Potentials of the degenerate heat operator u_t - a(t)Δu")]
struct Cli {
    /// Worker threads; 1 gives byte-identical output across runs. DEGPOT_THREADS overrides.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// The fundamental solution ε(x, s).
    Kernel {
        #[command(subcommand)]
        action: KernelAction,
    },
    /// Evaluate a potential at the points of a CSV file.
    Potential {
        #[command(subcommand)]
        action: PotentialAction,
    },
    /// Jump relations and trace formulae.
    Verify {
        #[command(subcommand)]
        action: VerifyAction,
    },
    /// Cauchy, Poisson and Dirichlet problems.
    Solve {
        #[command(subcommand)]
        action: SolveAction,
    },
    /// Convergence study over a resolution ladder.
    Study {
        #[arg(long)]
        config: PathBuf,
        /// trace, jump, ibvp-inverse or poisson-gaussian.
        #[arg(long)]
        target: String,
        /// refine_space, refine_time, refine_both or horizon_sweep.
        #[arg(long)]
        study: String,
        /// Potential of the trace target: volume or poisson.
        #[arg(long)]
        which: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum KernelAction {
    /// Print ε(x, s) for `s = a1(t) - a1(τ)`.
    Eval {
        #[arg(long)]
        n: usize,
        /// Comma-separated coordinates.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x: Vec<f64>,
        #[arg(long, allow_negative_numbers = true)]
        s: f64,
    },
    /// Normalization, Fourier or delta-limit check for the configured coefficient.
    Check {
        #[arg(long)]
        which: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum PotentialAction {
    Eval {
        /// V, P, S or D.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        config: PathBuf,
        /// CSV with columns x, y[, z], t.
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum VerifyAction {
    Jump {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    Trace {
        /// volume or poisson.
        #[arg(long)]
        which: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum SolveAction {
    /// `u = Vf + Pφ` in the whole space.
    Cauchy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// `u = Pφ`.
    Poisson {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Zero initial data and Dirichlet data from `density.boundary`.
    Ibvp {
        #[arg(long)]
        config: PathBuf,
        /// Evaluation points; interior probes when absent.
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        phi: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

/// Thread count: DEGPOT_THREADS, then `--threads`, then one thread when the configuration
/// turns parallelism off; zero leaves the choice to rayon.
fn thread_count(flag: Option<usize>, parallel: bool) -> Result<usize, CliError> {
    if let Ok(v) = std::env::var("DEGPOT_THREADS") {
        return v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("DEGPOT_THREADS: `{v}` is not a thread count")));
    }
    Ok(flag.unwrap_or(if parallel { 0 } else { 1 }))
}

fn init_threads(flag: Option<usize>, parallel: bool) -> Result<(), CliError> {
    let n = thread_count(flag, parallel)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn configured(path: &Path, threads: Option<usize>) -> Result<RunConfig, CliError> {
    let cfg = load_config(path)?;
    init_threads(threads, cfg.parallel)?;
    Ok(cfg)
}

fn pick<'a>(flag: &'a Option<PathBuf>, fallback: &'a Option<PathBuf>) -> Option<&'a Path> {
    flag.as_deref().or(fallback.as_deref())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = cli.threads;
    match cli.command {
        Command::Kernel { action } => match action {
            KernelAction::Eval { n, x, s } => {
                println!("{}", commands::kernel_eval(n, &x, s)?);
                Ok(())
            }
            KernelAction::Check { which, config, report } => {
                let cfg = configured(&config, threads)?;
                commands::kernel_check(&cfg, &which, pick(&report, &cfg.output.report))
            }
        },
        Command::Potential {
            action: PotentialAction::Eval { kind, config, points, out },
        } => {
            let cfg = configured(&config, threads)?;
            commands::potential_eval(&cfg, &kind, &points, pick(&out, &cfg.output.out))
        }
        Command::Verify { action } => match action {
            VerifyAction::Jump { config, report } => {
                let cfg = configured(&config, threads)?;
                commands::verify_jump(&cfg, pick(&report, &cfg.output.report))
            }
            VerifyAction::Trace {
                which,
                config,
                out,
                report,
            } => {
                let cfg = configured(&config, threads)?;
                commands::verify_trace(&cfg, &which, pick(&out, &cfg.output.out), pick(&report, &cfg.output.report))
            }
        },
        Command::Solve { action } => match action {
            SolveAction::Cauchy { config, points, out } => {
                let cfg = configured(&config, threads)?;
                commands::solve_whole_space(&cfg, true, &points, pick(&out, &cfg.output.out))
            }
            SolveAction::Poisson { config, points, out } => {
                let cfg = configured(&config, threads)?;
                commands::solve_whole_space(&cfg, false, &points, pick(&out, &cfg.output.out))
            }
            SolveAction::Ibvp {
                config,
                points,
                out,
                phi,
                report,
            } => {
                let cfg = configured(&config, threads)?;
                commands::solve_ibvp_command(
                    &cfg,
                    points.as_deref(),
                    pick(&out, &cfg.output.out),
                    phi.as_deref(),
                    pick(&report, &cfg.output.report),
                )
            }
        },
        Command::Study {
            config,
            target,
            study,
            which,
            out,
        } => {
            let cfg = configured(&config, threads)?;
            let target = study::Target::parse(&target, which.as_deref(), &cfg)?;
            let study = study::Study::parse(&study)?;
            study::study_command(&cfg, target, study, pick(&out, &cfg.output.out))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("degpot: {e}");
            e.exit_code()
        }
        Err(_) => ExitCode::from(4),
    }
}

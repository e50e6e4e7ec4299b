use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use evoproc::config::{self, Config};
use evoproc::dump::ProcessDump;
use evoproc::harness::{self, write_atomic};
use evoproc::Error;

#[derive(Parser, Debug)]
#[command(
    name = "evoproc",
    version,
    about = "Evolution processes for time-dependent sectorial families"
)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sector, Hölder and perturbation reports for every family member.
    CheckHypotheses { config: PathBuf },
    /// Build the process of one member and check the process axioms.
    Propagate {
        config: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        /// Also write the process grid to `process.bin`.
        #[arg(long)]
        dump: bool,
    },
    /// Semilinear trajectories of one member from the configured initial states.
    Solve {
        config: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        /// Also run the configured absorbing-ball experiment.
        #[arg(long)]
        absorbing: bool,
    },
    /// Convergence rates along the eps grid.
    Rates { config: PathBuf },
    /// Write a ready-made configuration: rd-paper, wave-paper or scalar-sanity.
    Example { name: String },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Config(_) | Error::Json(_) | Error::Parse { .. } => 2,
        _ => 1,
    }
}

fn load(path: &Path, seed: Option<u64>) -> evoproc::Result<Config> {
    let mut cfg = Config::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> evoproc::Result<bool> {
    let out = &cli.out;
    match &cli.command {
        Command::Example { name } => {
            let cfg = config::example(name).ok_or_else(|| {
                Error::Config(format!(
                    "unknown example {name:?}; choose one of {}",
                    config::EXAMPLE_NAMES.join(", ")
                ))
            })?;
            let path = out.join(format!("{name}.json"));
            write_atomic(&path, format!("{}\n", cfg.to_json()).as_bytes())?;
            println!("{}", path.display());
            Ok(true)
        }
        Command::CheckHypotheses { config } => {
            let cfg = load(config, cli.seed)?;
            let report = harness::check_hypotheses(&cfg)?;
            write_atomic(&out.join("hypotheses.json"), harness::to_json(&report)?.as_bytes())?;
            for m in &report.members {
                println!(
                    "eps={:<8} sector={} worst_c_x={:.3e} eta={:.3e} xi={:.3e}",
                    m.eps,
                    if m.sector.ok { "ok" } else { "FAIL" },
                    m.sector.worst_c_x,
                    m.eta,
                    m.xi
                );
            }
            Ok(report.ok)
        }
        Command::Propagate { config, eps, dump } => {
            let cfg = load(config, cli.seed)?;
            let (p, report) = harness::propagate_member(&cfg, *eps)?;
            write_atomic(&out.join("process_axioms.json"), harness::to_json(&report)?.as_bytes())?;
            if *dump {
                write_atomic(&out.join("process.bin"), &ProcessDump::from_process(&p).encode())?;
            }
            println!(
                "cocycle={:.3e} discretization_tol={:.3e} generator_residual={:.3e} delta={}",
                report.axioms.cocycle_defect.unwrap_or(0.0),
                report.discretization_tol,
                report.axioms.generator_residual,
                report.delta
            );
            Ok(true)
        }
        Command::Solve { config, eps, absorbing } => {
            let mut cfg = load(config, cli.seed)?;
            if !absorbing {
                cfg.absorbing = None;
            }
            let (trajs, report) = harness::solve_member(&cfg, *eps)?;
            for (k, tr) in trajs.iter().enumerate() {
                write_atomic(
                    &out.join(format!("trajectory_{k}.csv")),
                    harness::trajectory_csv(tr).as_bytes(),
                )?;
                write_atomic(
                    &out.join(format!("trajectory_{k}_states.csv")),
                    harness::trajectory_states_csv(tr).as_bytes(),
                )?;
            }
            write_atomic(&out.join("solve.json"), harness::to_json(&report)?.as_bytes())?;
            println!(
                "{} trajectories, picard iterations {:?}",
                trajs.len(),
                report.picard_iterations
            );
            if let Some(a) = &report.absorbing {
                println!("absorbing radius E={:.4} spread={:.3}", a.radius_e, a.spread);
            }
            Ok(true)
        }
        Command::Rates { config } => {
            let cfg = load(config, cli.seed)?;
            let report = harness::run_rate_experiment(&cfg)?;
            write_atomic(&out.join("report.json"), harness::to_json(&report)?.as_bytes())?;
            write_atomic(&out.join("rates.csv"), report.to_csv().as_bytes())?;
            if let Some(f) = &report.failure {
                eprintln!("stage {} failed: {}", f.stage, f.message);
            }
            for (name, c) in &report.checks {
                println!("{name}: {} ({})", if c.pass { "pass" } else { "FAIL" }, c.rule);
            }
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Debug
        } else {
            log::LevelFilter::Warn
        })
        .parse_default_env()
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set up {n} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    log::debug!("{cli:?}");
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

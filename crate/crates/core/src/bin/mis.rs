use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mis_core::experiment::{run_robustness, run_sweep};
use mis_core::oracle::{self, OracleCheck};
use mis_core::output::OutputFiles;
use mis_core::scenario::{Scenario, Scheme};
use mis_core::{MisError, Result};

#[derive(Parser)]
#[command(name = "mis", version, about = "Movable intelligent surface experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scheme over the configured sweep.
    Sweep(RunArgs),
    /// Freeze nominal designs and inject the configured errors.
    Robustness(RunArgs),
    /// Parse and check a scenario file, then print it with every default resolved.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run reference oracles on small seeded instances.
    Oracle {
        #[arg(long, value_enum, default_value_t = OracleKind::All)]
        kind: OracleKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds; override `seeds`.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Schemes to run; override `schemes`. Repeatable or comma-separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    scheme: Option<Vec<Scheme>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    All,
    XiMonteCarlo,
    BruteForce,
    Gradient,
    RankOne,
}

fn resolve(args: &RunArgs) -> Result<Scenario> {
    let mut s = Scenario::load(&args.config)?;
    if let Some(out) = &args.out {
        s.output.dir = out.clone();
    }
    if let Some(seeds) = &args.seeds {
        s.seeds = seeds.clone();
    }
    if let Some(schemes) = &args.scheme {
        s.schemes = schemes.clone();
    }
    s.validate()?;
    Ok(s)
}

fn run(args: &RunArgs, robustness: bool) -> Result<()> {
    let s = resolve(args)?;
    let spec = if robustness {
        Some(
            s.robustness
                .clone()
                .ok_or_else(|| MisError::Config("robustness run needs a [robustness] section".into()))?,
        )
    } else {
        None
    };
    let mut files = OutputFiles::create(&s.output.dir)?;
    files.write_manifest(if robustness { "robustness" } else { "sweep" }, &s)?;
    let rows = match &spec {
        Some(spec) => run_robustness(&s, spec, args.workers)?,
        None => run_sweep(&s, args.workers)?,
    };
    files.write_rows(&rows)?;
    eprintln!("{} rows -> {}", rows.len(), files.csv_path.display());
    Ok(())
}

fn print_checks(checks: &[OracleCheck]) -> bool {
    for c in checks {
        println!(
            "{} {}: value {:.9e} reference {:.9e} error {:.3e} (tol {:.1e})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.reference,
            c.error,
            c.tolerance
        );
    }
    checks.iter().all(|c| c.pass)
}

fn oracles(kind: OracleKind, seed: u64) -> Result<Vec<OracleCheck>> {
    match kind {
        OracleKind::All => oracle::run_all(seed),
        OracleKind::XiMonteCarlo => {
            let (_, stats) = oracle::random_instance(6, 6, 4, 1, 10.0, seed)?;
            let v = mis_core::linalg::random_phases(&mut mis_core::channel::substream(seed, 1), stats.m());
            Ok(vec![oracle::xi_monte_carlo(&stats, 0, &v, 100_000, seed, 0.02)?])
        }
        OracleKind::BruteForce => oracle::brute_force(seed),
        OracleKind::Gradient => oracle::gradients(seed),
        OracleKind::RankOne => Ok(vec![oracle::rank_one(seed)?]),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sweep(a) => run(a, false),
        Command::Robustness(a) => run(a, true),
        Command::ValidateConfig { config } => Scenario::load(config).and_then(|s| {
            print!("{}", s.to_toml()?);
            Ok(())
        }),
        Command::Oracle { kind, seed } => oracles(*kind, *seed).map(|c| {
            if !print_checks(&c) {
                std::process::exit(1);
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

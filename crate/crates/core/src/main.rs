use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use aoi_forge::error::Result;
use aoi_forge::experiments::{
    run_sweep, run_trace_experiment, thread_count, validate, write_sweep, write_trace_bundle, RunManifest, Scenario,
};

/// Age-of-information optimization and simulation for wireless control loops.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one topology and simulate its AoI trace under each access mode.
    Trace {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimize over the scenario's power and link-count grid.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in numerical self-checks.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn prepare(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Trace { scenario, out } => {
            let sc = Scenario::load(&scenario)?;
            prepare(&out)?;
            let bundle = run_trace_experiment(&sc)?;
            let mut manifest = RunManifest::new("trace", &sc, 1);
            manifest.files = write_trace_bundle(&bundle, &out)?;
            manifest.write(&out)?;
            for m in &bundle.modes {
                let emp = m.empirical_psi.map_or("n/a".to_string(), |v| format!("{v:.6}"));
                println!(
                    "{:<4} psi {:.6} empirical {emp} iterations {} ({:?})",
                    m.mode.label(),
                    m.optimized_psi(),
                    m.report.iterations,
                    m.report.status
                );
            }
            println!("wrote {} files to {}", manifest.files.len() + 1, out.display());
            Ok(true)
        }
        Command::Sweep { scenario, out } => {
            let sc = Scenario::load(&scenario)?;
            prepare(&out)?;
            let threads = thread_count();
            let table = run_sweep(&sc, threads)?;
            let mut manifest = RunManifest::new("sweep", &sc, threads);
            manifest.files = write_sweep(&table, &out)?;
            manifest.nondeterministic_columns = vec!["runtime_s".into()];
            manifest.failures = table.failures();
            manifest.write(&out)?;
            for r in &table.rows {
                let psi = r.psi_mean.map_or("n/a".to_string(), |v| format!("{v:.6}"));
                println!("{:<4} K={:<2} q={:>5.1} dBm  psi {psi}  failed {}", r.mode.label(), r.links, r.power_dbm, r.seeds_failed);
            }
            println!("{} points on {threads} threads, {} failed", table.points.len(), table.failures());
            Ok(true)
        }
        Command::Validate { seed } => {
            let checks = validate::run_checks(seed);
            for c in &checks {
                println!("{} {:<40} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

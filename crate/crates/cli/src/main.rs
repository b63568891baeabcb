use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use etreg_core::analysis::{compute_metrics, Metrics};
use etreg_core::hybridsim::SimStatus;
use etreg_core::report;
use etreg_core::scenario::Scenario;
use etreg_core::Error;

#[derive(Parser)]
#[command(name = "etreg", version, about = "Event-triggered output regulation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trace, trigger log and metrics.
    Simulate {
        scenario: PathBuf,
        /// Output directory. Falls back to $ETREG_OUT, then the scenario's
        /// `output.dir`, then `out`.
        #[arg(long, env = "ETREG_OUT")]
        out: Option<PathBuf>,
    },
    /// Run the scenario once per delta and print a summary table.
    Sweep {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        delta: Vec<f64>,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        jobs: Option<usize>,
        /// Also write the summary to this file.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Check the design: internal model, observer, gains, coordinate chain.
    Verify { scenario: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Simulate { scenario, out } => cmd_simulate(&scenario, out),
        Command::Sweep {
            scenario,
            delta,
            jobs,
            summary,
        } => cmd_sweep(&scenario, &delta, jobs, summary.as_deref()),
        Command::Verify { scenario } => cmd_verify(&scenario),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

type CliResult = Result<ExitCode, Box<dyn std::error::Error>>;

fn cmd_simulate(path: &Path, out: Option<PathBuf>) -> CliResult {
    let sc = Scenario::load(path)?;
    let comps = sc.build()?;
    let dir = out
        .or_else(|| sc.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let res = match comps.simulate() {
        Ok(r) => r,
        Err(e @ Error::NonFiniteState { .. }) => {
            eprintln!("status: NonFiniteState ({e})");
            return Ok(ExitCode::from(3));
        }
        Err(e) => return Err(e.into()),
    };
    fs::create_dir_all(&dir)?;
    let mut w = BufWriter::new(fs::File::create(dir.join(&sc.output.trace))?);
    report::write_trace(&mut w, &res)?;
    w.flush()?;
    let mut w = BufWriter::new(fs::File::create(dir.join(&sc.output.triggers))?);
    report::write_trigger_log(&mut w, &res)?;
    w.flush()?;
    // Runs stopped by a guard may not reach the tail window.
    match compute_metrics(&res, comps.tail_window) {
        Ok(metrics) => {
            fs::write(dir.join(&sc.output.metrics), serde_json::to_string_pretty(&metrics)? + "\n")?;
            println!(
                "{}: {} triggers, tail sup |e| = {} on [{}, {}], wrote {}",
                sc.name.as_deref().unwrap_or("scenario"),
                metrics.trigger_count_total,
                metrics.tail_sup_error,
                metrics.tail_window.0,
                metrics.tail_window.1,
                dir.display()
            );
        }
        Err(e) if res.status != SimStatus::Completed => eprintln!("no metrics: {e}"),
        Err(e) => return Err(e.into()),
    }
    if res.status == SimStatus::Completed {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("status: {} at t = {}", res.status, res.final_state.t);
        Ok(ExitCode::from(3))
    }
}

fn sweep_one(sc: &Scenario, delta: f64) -> Result<Metrics, String> {
    let comps = sc.with_delta(delta).build().map_err(|e| e.to_string())?;
    let res = comps.simulate().map_err(|e| e.to_string())?;
    if res.status != SimStatus::Completed {
        return Err(format!("status {}", res.status));
    }
    compute_metrics(&res, comps.tail_window).map_err(|e| e.to_string())
}

fn cmd_sweep(path: &Path, deltas: &[f64], jobs: Option<usize>, summary: Option<&Path>) -> CliResult {
    let sc = Scenario::load(path)?;
    let mut deltas = deltas.to_vec();
    deltas.sort_by(|a, b| b.total_cmp(a));
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build()?;
    let results: Vec<Result<Metrics, String>> = pool.install(|| {
        use rayon::prelude::*;
        deltas.par_iter().map(|&d| sweep_one(&sc, d)).collect()
    });

    let mut table = String::from(report::SWEEP_HEADER);
    table.push('\n');
    let mut failed = false;
    for (d, r) in deltas.iter().zip(&results) {
        match r {
            Ok(m) => {
                table.push_str(&report::sweep_row(*d, sc.trigger.sigma, m));
                table.push('\n');
            }
            Err(msg) => {
                failed = true;
                eprintln!("delta = {d}: {msg}");
            }
        }
    }
    print!("{table}");
    if let Some(p) = summary {
        fs::write(p, &table)?;
    }
    Ok(if failed { ExitCode::from(3) } else { ExitCode::SUCCESS })
}

fn cmd_verify(path: &Path) -> CliResult {
    let sc = Scenario::load(path)?;
    let rep = sc.verify();
    print!("{rep}");
    match rep.first_failure() {
        None => {
            println!("all checks passed");
            Ok(ExitCode::SUCCESS)
        }
        Some(c) => {
            eprintln!("verification failed at '{}': {}", c.name, c.detail);
            Ok(ExitCode::from(1))
        }
    }
}

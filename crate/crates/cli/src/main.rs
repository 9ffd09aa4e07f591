// Negated comparisons are deliberate: NaN must fail range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod run;
mod scenario;
mod validate;

use run::Abort;
use scenario::{Mode, Scenario};

const EXIT_VALIDATION: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_ABORT: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "stickyflow", version, about = "Sticky and splitting particle dynamics for pressureless Euler systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario and write its CSV files.
    Run {
        /// Scenario file, or the name of a bundled scenario.
        scenario: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the scenario's mode.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Runs are deterministic; `none` is the only accepted value.
        #[arg(long, value_parser = ["none"])]
        seed: Option<String>,
    },
    /// Check recorded fronts against the Rankine-Hugoniot and Oleinik conditions.
    Validate {
        /// A fronts.csv written by `run`.
        fronts: PathBuf,
        /// The scenario that produced it.
        scenario: String,
        /// trajectories.csv with prescribed velocities; confined scenarios only.
        /// Defaults to the file next to `fronts`.
        #[arg(long)]
        trajectories: Option<PathBuf>,
        #[arg(long, value_parser = ["entropic", "projected"], default_value = "entropic")]
        mode: String,
    },
    /// List the bundled scenarios.
    #[command(name = "list_scenarios")]
    ListScenarios,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, out, mode, seed: _ } => cmd_run(&scenario, &out, mode),
        Command::Validate { fronts, scenario, trajectories, mode } => {
            cmd_validate(&fronts, &scenario, trajectories.as_deref(), &mode)
        }
        Command::ListScenarios => {
            for (name, text) in scenario::BUNDLED {
                let summary: Vec<&str> =
                    text.lines().map_while(|l| l.strip_prefix('#')).map(str::trim).collect();
                println!("{name:<16} {}", summary.join(" "));
            }
            ExitCode::SUCCESS
        }
    }
}

fn load(name: &str) -> Result<Scenario, ExitCode> {
    Scenario::load(name).map_err(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(EXIT_USAGE)
    })
}

fn cmd_run(name: &str, out: &std::path::Path, mode: Option<Mode>) -> ExitCode {
    let mut scenario = match load(name) {
        Ok(s) => s,
        Err(code) => return code,
    };
    if let Some(mode) = mode {
        scenario.mode = mode;
    }
    let runs = match run::execute(&scenario) {
        Ok(runs) => runs,
        Err(e) if e.is::<Abort>() => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_ABORT);
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Err(e) = run::write_outputs(&scenario, &runs, out) {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_USAGE);
    }
    let mut failed = false;
    for r in &runs {
        let failures = r.validation.failures().count();
        print!(
            "{}: {} samples, {} events, {} front checks, {} failed, max RH residual {:.3e}",
            r.mode,
            r.samples.len(),
            r.events.len(),
            r.validation.rows.len(),
            failures,
            r.validation.max_rh_residual()
        );
        if let Some((err, tol)) = r.oracle_check {
            print!(", oracle W2 {err:.3e} (tolerance {tol:.3e})");
        } else if let Some(Some(last)) = r.oracle_w2.last() {
            print!(", final oracle W2 {last:.3e}");
        }
        println!();
        failed |= (r.mode == "entropic" && failures > 0) || r.oracle_failed();
    }
    if failed {
        ExitCode::from(EXIT_VALIDATION)
    } else {
        ExitCode::SUCCESS
    }
}

fn cmd_validate(fronts: &std::path::Path, name: &str, trajectories: Option<&std::path::Path>, mode: &str) -> ExitCode {
    let scenario = match load(name) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let report = match validate::validate(&scenario, fronts, trajectories, mode) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let written = (|| -> anyhow::Result<()> {
        let mut out = io::stdout().lock();
        writeln!(out, "{}", run::SCHEMA_LINE)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(run::validation_header())?;
        run::write_validation_rows(&mut w, mode, &report)?;
        w.flush()?;
        Ok(())
    })();
    if let Err(e) = written {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_USAGE);
    }
    let failures = report.failures().count();
    eprintln!("{} front checks, {failures} failed, max RH residual {:.3e}", report.rows.len(), report.max_rh_residual());
    if failures > 0 {
        ExitCode::from(EXIT_VALIDATION)
    } else {
        ExitCode::SUCCESS
    }
}

//! `etalab`: command-line front end.
//!
//! Exit codes: 0 success, 1 internal or numerical failure (including a
//! failed selftest), 2 configuration or parse error, 3 analytic
//! precondition violated (spectral gap), 4 budget exceeded. No output file
//! is written unless the run succeeds.

mod commands;
mod config;
mod report;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use etalab::Error;

use crate::config::{Cli, RunConfig};
use crate::report::{convergence_csv, write_atomic, Diagnostics, Payload, ReportEnvelope};

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) | Error::Invalid(_) | Error::Unsupported(_) => 2,
        Error::Gap(_) => 3,
        Error::Budget { .. } => 4,
        Error::Numerical(_) => 1,
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("etalab: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let config = match RunConfig::from_cli(cli) {
        Ok(c) => c,
        Err(e) => return fail(2, e),
    };
    if let Some(n) = config.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(1, format!("thread pool: {e}"));
        }
    }

    let start = Instant::now();
    let outcome = match commands::run(&config) {
        Ok(o) => o,
        Err(e) => return fail(exit_code(&e), e),
    };
    let wall = start.elapsed().as_secs_f64();
    if let Some(limit) = config.budget.wall_time_secs {
        if wall > limit {
            return fail(4, format!("wall time {wall:.2} s exceeded the budget of {limit} s"));
        }
    }

    let selftest_failed = matches!(&outcome.payload, Payload::Selftest(checks) if checks.iter().any(|c| !c.pass));
    let csv = match (&config.csv, &outcome.payload) {
        (Some(_), Payload::Convergence(rep)) => Some(convergence_csv(rep)),
        _ => None,
    };
    let diagnostics = Diagnostics {
        wall_time_secs: wall,
        warnings: outcome.warnings,
        flagged: outcome.flagged,
        flagged_rows: outcome.flagged_rows,
    };
    let envelope = ReportEnvelope::new(config.clone(), outcome.payload, diagnostics);
    let json = envelope.to_json();

    if let (Some(path), Some(text)) = (&config.csv, &csv) {
        if let Err(e) = write_atomic(path, text) {
            return fail(1, format!("cannot write {}: {e}", path.display()));
        }
    }
    match &config.json {
        Some(path) => {
            if let Err(e) = write_atomic(path, &json) {
                return fail(1, format!("cannot write {}: {e}", path.display()));
            }
        }
        None => print!("{json}"),
    }
    for w in &envelope.diagnostics.warnings {
        eprintln!("etalab: warning: {w}");
    }
    if selftest_failed {
        return fail(1, "selftest failed");
    }
    ExitCode::SUCCESS
}

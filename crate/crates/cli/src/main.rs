mod args;
mod commands;
mod io;
mod report;

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use clap::Parser;
use handlebody::graphgroups::JordanTable;
use handlebody::ToleranceConfig;

use args::{Cli, Command};
use commands::Env;
use report::RunReport;

fn tolerances(cli: &Cli) -> Result<ToleranceConfig> {
    let g = &cli.global;
    let mut cfg = match &g.config {
        Some(path) => io::load_json(path)?,
        None => ToleranceConfig::default(),
    };
    if let Some(v) = g.tol_orth {
        cfg.tol_orth = v;
    }
    if let Command::Realize { tol: Some(v), .. } = cli.command {
        cfg.tol_orth = v;
    }
    if let Some(v) = g.tol_classify {
        cfg.tol_classify = v;
    }
    if let Some(v) = g.tol_geom {
        cfg.tol_geom = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<RunReport> {
    let start = Instant::now();
    let cfg = tolerances(cli)?;
    let table: JordanTable = match &cli.global.jordan_table {
        Some(path) => io::load_json(path)?,
        None => JordanTable::default(),
    };
    let env = Env {
        cfg,
        table: &table,
        seed: cli.global.seed,
        out: cli.global.out.as_deref(),
    };
    let outcome = commands::run(&cli.command, &env)?;
    let out_used = outcome.out_used;
    let report = RunReport::new(
        std::env::args().collect(),
        env.seed,
        cfg,
        outcome,
        start.elapsed(),
    );
    match (&cli.global.out, out_used) {
        (Some(path), false) => io::write_json(path, &report)?,
        _ => {
            // A closed pipe (e.g. `| head`) is not an error for the run itself.
            let _ = writeln!(
                std::io::stdout().lock(),
                "{}",
                serde_json::to_string_pretty(&report)?
            );
        }
    }
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => report.exit_code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

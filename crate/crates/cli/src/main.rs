mod args;
mod commands;
mod config;
mod output;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;

use args::{Cli, Command};
use config::{RunConfig, SCAN_RANGE};

fn run(cli: Cli) -> Result<()> {
    let (cfg, doc) = match &cli.command {
        Command::Threshold(c) => {
            let cfg = RunConfig::resolve(c, SCAN_RANGE)?;
            let doc = commands::threshold(&cfg)?;
            (cfg, doc)
        }
        Command::Detector(c) => {
            let cfg = RunConfig::resolve(c, SCAN_RANGE)?;
            let doc = commands::detector(&cfg)?;
            (cfg, doc)
        }
        Command::Keyrate(a) => {
            let cfg = RunConfig::resolve(&a.common, SCAN_RANGE)?;
            let doc = commands::keyrate(&cfg, a.lambda)?;
            (cfg, doc)
        }
        Command::Scan(c) => {
            let cfg = RunConfig::resolve(c, SCAN_RANGE)?;
            let doc = commands::scan(&cfg)?;
            (cfg, doc)
        }
        Command::Tmin(c) => {
            let cfg = RunConfig::resolve(c, SCAN_RANGE)?;
            let doc = commands::tmin(&cfg)?;
            (cfg, doc)
        }
        Command::Contour(a) => {
            let cfg = RunConfig::resolve(&a.common, SCAN_RANGE)?;
            let doc = commands::contour(&cfg, a.q_max, a.q_points, a.y_points)?;
            (cfg, doc)
        }
        Command::CompareStages(a) => {
            let cfg = RunConfig::resolve(&a.common, commands::COMPARE_RANGE)?;
            let doc = commands::compare_stages(&cfg, a.n_max, a.fit)?;
            (cfg, doc)
        }
    };
    doc.emit(cfg.format, cfg.output.as_deref())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

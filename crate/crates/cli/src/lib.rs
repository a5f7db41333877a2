//! Command line front end for `constrained-nod`.

pub mod commands;
pub mod scenario;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::commands::{Outcome, OutputFile};
use crate::scenario::{Overrides, Scenario};

#[derive(Debug, Parser)]
#[command(name = "cnod", version, about = "Projection-constrained opinion dynamics on graphs")]
pub struct Cli {
    /// Scenario JSON; the built-in complete(6) example when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding the scenario's `output`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    #[arg(long = "u-min", global = true, allow_negative_numbers = true)]
    pub u_min: Option<f64>,
    #[arg(long = "u-max", global = true, allow_negative_numbers = true)]
    pub u_max: Option<f64>,
    #[arg(long = "u-steps", global = true)]
    pub u_steps: Option<usize>,
    /// Print the scenario with every default filled in and exit.
    #[arg(long = "print-config", global = true)]
    pub print_config: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Integrate the scenario; writes trajectory.csv and summary.json.
    Simulate,
    /// Unfolding overlay plus Newton continuation; writes diagram.csv and reduction.json.
    Bifurcate,
    /// Exact and closed-form centrality; writes centrality.csv and centrality.json.
    Centrality,
    /// Runs invariant checks; writes verify.txt.
    Verify,
    /// Final states over the u grid; writes sweep.csv.
    Sweep,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] constrained_nod::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0} verification check(s) failed")]
    VerifyFailed(usize),
    #[error("no subcommand given; try --help")]
    MissingCommand,
}

impl CliError {
    /// 2 for invalid input, 3 for numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numeric() => 3,
            _ => 2,
        }
    }
}

pub fn load_scenario(cli: &Cli) -> Result<Scenario, CliError> {
    let mut s = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            Scenario::from_json(&text)?
        }
        None => Scenario::example(),
    };
    s.apply(&Overrides {
        seed: cli.seed,
        dt: cli.dt,
        horizon: cli.horizon,
        u_min: cli.u_min,
        u_max: cli.u_max,
        u_steps: cli.u_steps,
        out: cli.out.as_ref().map(|p| p.to_string_lossy().into_owned()),
    });
    Ok(s.resolved())
}

fn write_outputs(dir: &Path, files: &[OutputFile]) -> Result<(), CliError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    for f in files {
        let path = dir.join(&f.name);
        fs::write(&path, &f.contents).map_err(io(&path))?;
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

/// Executes the parsed command line; returns the text for stdout.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let scenario = load_scenario(cli)?;
    if cli.print_config {
        return Ok(scenario.to_pretty_json() + "\n");
    }
    let command = cli.command.ok_or(CliError::MissingCommand)?;
    let dir = PathBuf::from(&scenario.output);
    if command == Command::Verify {
        let checks = commands::verify(&scenario)?;
        let report = commands::verify_report(&scenario, &checks);
        write_outputs(
            &dir,
            &[OutputFile {
                name: "verify.txt".into(),
                contents: report.clone(),
            }],
        )?;
        let failed = checks.iter().filter(|c| c.outcome == Outcome::Fail).count();
        if failed > 0 {
            print!("{report}");
            return Err(CliError::VerifyFailed(failed));
        }
        return Ok(report);
    }
    let files = match command {
        Command::Simulate => commands::simulate(&scenario)?,
        Command::Bifurcate => commands::bifurcate(&scenario)?,
        Command::Centrality => commands::centrality(&scenario)?,
        Command::Sweep => commands::sweep(&scenario)?,
        Command::Verify => unreachable!(),
    };
    write_outputs(&dir, &files)?;
    Ok(files
        .iter()
        .map(|f| format!("wrote {}\n", dir.join(&f.name).display()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["cnod", "bifurcate", "--u-min", "0.05", "--u-steps", "11", "--seed", "3"]).unwrap();
        assert_eq!(cli.command, Some(Command::Bifurcate));
        assert_eq!(cli.u_min, Some(0.05));
        assert_eq!(cli.u_steps, Some(11));
        let s = load_scenario(&cli).unwrap();
        assert_eq!(s.seed, 3);
        assert_eq!(s.sweep.u_min, Some(0.05));
    }

    #[test]
    fn exit_codes() {
        let e = CliError::Core(constrained_nod::Error::Divergence { time: 1.0 });
        assert_eq!(e.exit_code(), 3);
        let e = CliError::Core(constrained_nod::Error::Validation("x".into()));
        assert_eq!(e.exit_code(), 2);
        assert_eq!(CliError::VerifyFailed(1).exit_code(), 2);
    }
}

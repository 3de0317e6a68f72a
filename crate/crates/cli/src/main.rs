//! `neqsteady`: runs one analysis of a TOML scenario and writes a CSV or
//! JSON report.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 numerical failure.

mod commands;
mod errors;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use neqsteady_core::linear::SweepParameter;
use neqsteady_core::rates::LambShift;

use crate::commands::Report;
use crate::errors::{exit_code, UsageError};

#[derive(Debug, Parser)]
#[command(name = "neqsteady", version, about = "Stationary states, currents and KMS diagnostics of open quantum systems")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Scenario file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Report destination; standard output when absent.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Seed for randomly drawn initial states.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Overrides `lamb_shift` from the scenario.
    #[arg(long, global = true, value_enum)]
    lamb_shift: Option<LambArg>,
    /// Added to every level before computing β_S(ε) = -ln ρ_εε / ε.
    #[arg(long, global = true, default_value_t = 0.0, allow_negative_numbers = true)]
    energy_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LambArg {
    Pv,
    None,
}

impl From<LambArg> for LambShift {
    fn from(v: LambArg) -> Self {
        match v {
            LambArg::Pv => LambShift::Pv,
            LambArg::None => LambShift::None,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the scenario and list the rates per Bohr frequency and reservoir.
    Validate,
    /// Stationary populations and the β_S profile.
    Steady {
        /// Also write the stationary density matrix here.
        #[arg(long, value_name = "PATH")]
        state_out: Option<PathBuf>,
    },
    /// Populations along a transient.
    Evolve {
        /// `ground`, `random` (drawn with --seed) or a density-matrix file.
        #[arg(long, default_value = "random")]
        initial: String,
        #[arg(long)]
        t_final: Option<f64>,
        #[arg(long)]
        n_samples: Option<usize>,
        /// Also write the final density matrix here.
        #[arg(long, value_name = "PATH")]
        state_out: Option<PathBuf>,
    },
    /// Stationary micro-currents per reservoir and Bohr frequency.
    Currents,
    /// Transport coefficients of a two-bath scenario.
    Onsager,
    /// Local KMS certification of the stationary state.
    Kms,
    /// Dynamical detailed balance and the symmetry defect.
    Ddb,
    /// Currents and entropy production along one bath parameter.
    Sweep {
        /// delta_beta, delta_mu, beta0 or mu0.
        #[arg(long)]
        param: String,
        /// `start:stop:n`, n points including both ends.
        #[arg(long, allow_hyphen_values = true)]
        range: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NEQSTEADY_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    let path = g
        .config
        .as_deref()
        .ok_or_else(|| UsageError("--config is required".into()))?;
    let scenario = neqsteady_core::scenario::load_scenario(path)?;
    let lamb = g
        .lamb_shift
        .map(LambShift::from)
        .or(scenario.lamb_shift)
        .unwrap_or_default();
    let ctx = commands::Context {
        scenario: &scenario,
        lamb,
        seed: g.seed,
        energy_offset: g.energy_offset,
    };
    let report = match &cli.command {
        Command::Validate => commands::validate(&ctx)?,
        Command::Steady { state_out } => commands::steady(&ctx, state_out.as_deref())?,
        Command::Evolve {
            initial,
            t_final,
            n_samples,
            state_out,
        } => commands::evolve(&ctx, initial, *t_final, *n_samples, state_out.as_deref())?,
        Command::Currents => commands::currents(&ctx)?,
        Command::Onsager => commands::onsager(&ctx)?,
        Command::Kms => commands::kms(&ctx)?,
        Command::Ddb => commands::ddb(&ctx)?,
        Command::Sweep { param, range } => {
            let param: SweepParameter = param.parse().map_err(UsageError)?;
            let values = parse_range(range)?;
            commands::sweep(&ctx, param, &values)?
        }
    };
    emit(&report, g)
}

/// `start:stop:n` → n evenly spaced values including both ends.
fn parse_range(s: &str) -> Result<Vec<f64>, UsageError> {
    let bad = || UsageError(format!("range {s:?} is not start:stop:n"));
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts[..] else {
        return Err(bad());
    };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(bad());
    }
    match n {
        0 => Err(UsageError(format!("range {s:?} is empty"))),
        1 => Ok(vec![a]),
        _ => Ok((0..n)
            .map(|i| {
                if i == n - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect()),
    }
}

fn emit(report: &Report, g: &GlobalArgs) -> anyhow::Result<()> {
    let mut sink: Box<dyn Write> = match &g.out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match g.format {
        Format::Csv => report.table.write_csv(&mut sink).context("writing CSV")?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut sink, &report.json()).context("writing JSON")?;
            writeln!(sink)?;
        }
    }
    sink.flush().context("flushing report")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsing() {
        assert_eq!(parse_range("0:0.2:3").unwrap(), vec![0.0, 0.1, 0.2]);
        assert_eq!(parse_range("-1:1:1").unwrap(), vec![-1.0]);
        assert_eq!(parse_range("0:1:5").unwrap().last(), Some(&1.0));
        assert!(parse_range("0:1:0").is_err());
        assert!(parse_range("0:1").is_err());
        assert!(parse_range("0:x:3").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}

//! `slln`: simulation and strong-law diagnostics from the command line.
//!
//! Exit status: 0 success or expectation met, 1 expectation failed,
//! 2 usage or configuration error, 3 numerical or resource error.

mod build;
mod commands;
mod config;
mod exit;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};
use slln_core::suite::DEFAULT_SEED;
use slln_core::ThreadBudget;

use commands::Run;
use config::Config;
use exit::{Failure, USAGE};
use output::OutDir;

#[derive(Debug, Parser)]
#[command(name = "slln", version, about = "Random field simulation and strong-law diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Sectioned key = value configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one key, as section.key=value. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads; 0 uses every core. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write one realization of a field.
    Simulate,
    /// Monte Carlo moments of scalars, box sums or the LFSS scaling law.
    EstimateMoments,
    /// Moment series, recursion inequalities and orthogonal-field conditions.
    CheckConditions,
    /// Tail-sup decay of normalized partial sums.
    Slln,
    /// Toeplitz transform of a sequence on the lattice.
    Toeplitz,
    /// Run the acceptance criteria and print a pass/fail table.
    PaperSuite {
        /// Print the criteria without running them.
        #[arg(long)]
        list: bool,
        /// Comma list of criterion ids.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::EstimateMoments => "estimate-moments",
            Command::CheckConditions => "check-conditions",
            Command::Slln => "slln",
            Command::Toeplitz => "toeplitz",
            Command::PaperSuite { .. } => "paper-suite",
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
            Config::parse(&text).map_err(|e| Failure::config(format!("{}: {}", path.display(), e.message)))?
        }
        None => Config::default(),
    };
    for s in &cli.set {
        cfg.set(s)?;
    }
    Ok(cfg)
}

fn usage(name: &str) -> String {
    let mut cmd = Cli::command();
    let help = cmd
        .find_subcommand_mut(name)
        .map(|c| c.render_help().to_string())
        .unwrap_or_default();
    format!("{help}\nno configuration given: pass --config FILE and/or --set section.key=value\n")
}

fn execute(cli: &Cli) -> Result<u8, Failure> {
    let name = cli.command.name();
    if let Command::PaperSuite { list: true, .. } = cli.command {
        commands::list_criteria();
        return Ok(exit::OK);
    }
    let cfg = load_config(cli)?;
    if cfg.is_empty() && !matches!(cli.command, Command::PaperSuite { .. }) {
        eprint!("{}", usage(name));
        return Ok(USAGE);
    }
    let threads = ThreadBudget::new(cli.threads);
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    let mut out = OutDir::create(&cli.out)?;
    let mut run = Run {
        seed,
        threads: &threads,
        cfg: &cfg,
        out: &mut out,
    };
    let code = match &cli.command {
        Command::Simulate => commands::simulate(&mut run)?,
        Command::EstimateMoments => commands::estimate_moments(&mut run)?,
        Command::CheckConditions => commands::check_conditions(&mut run)?,
        Command::Slln => commands::slln(&mut run)?,
        Command::Toeplitz => commands::toeplitz(&mut run)?,
        Command::PaperSuite { only, .. } => commands::paper_suite(&mut run, only)?,
    };
    let config_path = cli.config.as_ref().map_or_else(|| "-".to_string(), |p| p.display().to_string());
    let info = [
        ("command", name.to_string()),
        ("config", config_path),
        ("seed", seed.to_string()),
        ("threads", threads.threads().to_string()),
        ("status", code.to_string()),
    ];
    out.finish(&info, &cfg)?;
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use evodom::commands::{self, SweepAxis};
use evodom::{exit, parse_config_str, CliError};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// Reproduction indexes, thresholds and regime
    Indexes,
    /// Integrate from the initial data to t_end
    Simulate,
    /// Periodic state by the period map and by monotone iteration
    Periodic,
    /// Indexes along a parameter axis
    Sweep,
    /// Check candidate upper/lower solutions
    Verify,
}

/// Two-species competition on a periodically evolving domain.
#[derive(Debug, Parser)]
#[command(name = "evodom", version)]
struct Args {
    command: Command,
    /// JSON configuration; may be omitted when --preset is given
    #[arg(long)]
    config: Option<PathBuf>,
    /// example5_1, example5_2 or example5_3; replaces the model block
    #[arg(long)]
    preset: Option<String>,
    /// Output directory (default: the config's `out`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sweep axis: m_amplitude, d1 or d2
    #[arg(long)]
    axis: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    from: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    to: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Upper candidate for verify (trajectory CSV schema)
    #[arg(long)]
    upper: Option<PathBuf>,
    /// Lower candidate for verify
    #[arg(long)]
    lower: Option<PathBuf>,
}

fn run(args: &Args) -> Result<u8, CliError> {
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        None if args.preset.is_some() => "{}".to_string(),
        None => return Err(CliError::Config("--config is required unless --preset is given".into())),
    };
    let run = parse_config_str(&text, args.preset.as_deref()).map_err(|e| match (e, &args.config) {
        (CliError::Config(msg), Some(p)) => CliError::Config(format!("{}: {msg}", p.display())),
        (e, _) => e,
    })?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(&run.config.out));
    let stdout = std::io::stdout();
    let mut log = stdout.lock();
    let code = match args.command {
        Command::Indexes => commands::cmd_indexes(&run, &out, &mut log)?,
        Command::Simulate => commands::cmd_simulate(&run, &out, &mut log)?,
        Command::Periodic => commands::cmd_periodic(&run, &out, &mut log)?,
        Command::Sweep => {
            let missing = |what: &str| CliError::Config(format!("sweep needs --{what}"));
            let name = args.axis.as_deref().ok_or_else(|| missing("axis"))?;
            let axis = SweepAxis::from_name(name)
                .ok_or_else(|| CliError::Config(format!("unknown axis `{name}`, expected m_amplitude, d1 or d2")))?;
            let from = args.from.ok_or_else(|| missing("from"))?;
            let to = args.to.ok_or_else(|| missing("to"))?;
            let steps = args.steps.ok_or_else(|| missing("steps"))?;
            commands::cmd_sweep(&run, &out, &mut log, axis, from, to, steps)?
        }
        Command::Verify => {
            commands::cmd_verify(&run, &out, &mut log, args.upper.as_deref(), args.lower.as_deref())?
        }
    };
    log.flush().ok();
    Ok(code)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::CONFIG } else { exit::OK });
        }
    };
    match run(&args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

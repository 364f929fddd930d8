use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use estalg::{parse_config_with, run, CliError, Command, Overrides, RunDir};

#[derive(Parser)]
#[command(name = "estalg", version, about = "Estimation algebras and nonlinear filters on coordinate charts")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// System configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Root under which run directories are created.
    #[arg(long, global = true, env = "ESTALG_OUT", default_value = "runs")]
    out: PathBuf,
    /// Tolerance override, e.g. `--tol rank=1e-6`; repeatable.
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE", value_parser = parse_tol)]
    tol: Vec<(String, f64)>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Close {L0, h_i} under brackets up to the configured bounds.
    Probe,
    /// Triangular certificate from critical points (compact charts).
    Certificate,
    /// Certificate from a connecting gradient flow.
    FlowCert,
    /// Print L0, B_i = [L0, h_i] and C_ij = [[L0, h_i], h_j].
    Brackets,
    /// Simulate the state and observation paths.
    Simulate,
    /// Run the configured filters on a simulated path.
    Filter,
    /// Re-parse and validate every report of the run.
    Report,
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got {s:?}"))?;
    let v: f64 = value.trim().parse().map_err(|e| format!("{value:?}: {e}"))?;
    Ok((name.trim().to_string(), v))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Probe => Command::Probe,
        Cmd::Certificate => Command::Certificate,
        Cmd::FlowCert => Command::FlowCert,
        Cmd::Brackets => Command::Brackets,
        Cmd::Simulate => Command::Simulate,
        Cmd::Filter => Command::Filter,
        Cmd::Report => Command::Report,
    };
    let Some(path) = cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(2);
    };
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let overrides = Overrides { seed: cli.seed, tolerances: cli.tol };
    let result = parse_config_with(&text, &overrides).map_err(CliError::from).and_then(|cfg| {
        let dir = RunDir::new(&cli.out, &cfg);
        run(command, &cfg, &dir, &mut std::io::stdout().lock())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprint!("{e}");
            if !matches!(e, CliError::Config(_)) {
                eprintln!();
            }
            ExitCode::from(e.exit_code())
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dogwalk_cli::{cmd_dump_builtin, cmd_plot, cmd_run, parse_mode};
use dogwalk_core::Mode;

#[derive(Parser)]
#[command(
    name = "dogwalk",
    version,
    about = "Leader/follower ASV-AUV obstacle avoidance simulator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario or suite config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override a config value, e.g. `--set paradigm.beta=0.3`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Plot a trace written by `run`.
    Plot {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a builtin scenario as a config file.
    DumpBuiltin {
        /// case1, case2, case3 or obscured_tank.
        name: String,
        #[arg(long, default_value = "dog_walking", value_parser = mode_arg)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
    },
}

fn mode_arg(s: &str) -> Result<Mode, String> {
    parse_mode(s).ok_or_else(|| format!("unknown mode '{s}' (baseline or dog_walking)"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(match cli.cmd {
        Cmd::Run { config, out, set } => cmd_run(&config, &set, &out),
        Cmd::Plot { trace, out } => cmd_plot(&trace, &out),
        Cmd::DumpBuiltin { name, mode, out } => cmd_dump_builtin(&name, mode, &out),
    })
}

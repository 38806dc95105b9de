use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lanemerge_cli::{cmd_compare, cmd_plot, cmd_run, cmd_sweep, cmd_validate, LoadOptions};

/// Rule-compliant highway lane-merge planner and simulator.
#[derive(Parser)]
#[command(name = "lanemerge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Override a config value, e.g. `merge.rho_c=2.0` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Override the integration step (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Override the channel seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn options(self) -> LoadOptions {
        LoadOptions {
            overrides: self.set,
            dt: self.dt,
            seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trace, metrics and plots.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        no_plots: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run several scenarios and tabulate their metrics.
    Compare {
        #[arg(required = true, num_args = 2..)]
        configs: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        no_plots: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run a parameter grid given as `key=start:stop:step` specs.
    Sweep {
        config: PathBuf,
        #[arg(required = true)]
        params: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Check configs without running them.
    Validate {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a scenario and render only its figures.
    Plot {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let code = match Cli::parse().command {
        Command::Run {
            config,
            out,
            no_plots,
            common,
        } => cmd_run(&config, &out, &common.options(), !no_plots),
        Command::Compare {
            configs,
            out,
            no_plots,
            common,
        } => cmd_compare(&configs, &out, &common.options(), !no_plots),
        Command::Sweep {
            config,
            params,
            out,
            common,
        } => cmd_sweep(&config, &params, &out, &common.options()),
        Command::Validate { configs, common } => cmd_validate(&configs, &common.options()),
        Command::Plot {
            config,
            out,
            common,
        } => cmd_plot(&config, &out, &common.options()),
    };
    ExitCode::from(code as u8)
}

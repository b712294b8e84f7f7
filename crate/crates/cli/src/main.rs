use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use metarisk_cli::{cmd_bounds, cmd_env_sample, cmd_packing, cmd_risk_sweep, cmd_verify, CommonArgs, PackingArgs};

#[derive(Parser)]
#[command(name = "metarisk", version, about = "Risk sweeps, bounds and verification suites for hierarchical meta linear regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Bundled config: fig3a or fig3b.
    #[arg(long)]
    preset: Option<String>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo repetitions per grid point.
    #[arg(long)]
    reps: Option<usize>,
}

impl From<Common> for CommonArgs {
    fn from(c: Common) -> Self {
        CommonArgs {
            config: c.config,
            preset: c.preset,
            seed: c.seed,
            out: c.out,
            reps: c.reps,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Exact and Monte Carlo risk with bounds over a grid.
    RiskSweep(Common),
    /// Upper and lower bounds beside the exact risk.
    Bounds(Common),
    /// Matrix, information and packing verification suites.
    Verify(Common),
    /// Greedy packing of the unit ball.
    Packing {
        #[command(flatten)]
        common: Common,
        /// Dimension.
        #[arg(long = "dim")]
        d: Option<usize>,
        /// Packing radius, in (0, 1/4].
        #[arg(long)]
        delta: Option<f64>,
        /// Consecutive rejections before stopping.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Environment utilities.
    Env {
        #[command(subcommand)]
        action: EnvAction,
    },
}

#[derive(Subcommand)]
enum EnvAction {
    /// Sample an environment and one set of observations.
    Sample(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::RiskSweep(c) => cmd_risk_sweep(&c.into()),
        Command::Bounds(c) => cmd_bounds(&c.into()),
        Command::Verify(c) => cmd_verify(&c.into()),
        Command::Packing { common, d, delta, budget } => cmd_packing(&common.into(), PackingArgs { d, delta, budget }),
        Command::Env {
            action: EnvAction::Sample(c),
        } => cmd_env_sample(&c.into()),
    };
    match result {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", out.stdout);
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmrac_cli::{cmd_compare, cmd_pe_check, cmd_refine, cmd_simulate, CliResult, CompareOverrides, Overrides};
use mmrac_core::simulator::ControllerMode;

/// Multiple-model reference adaptive control: refine corner sets, simulate
/// closed loops and check regressor excitation.
#[derive(Parser)]
#[command(name = "mmrac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Intersect the corner set with the matching set and write the refined scenario.
    Refine {
        scenario: PathBuf,
        /// Output scenario file (default: <scenario>.refined.toml).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Simulate one controller and write series.csv and summary.json.
    Simulate {
        scenario: PathBuf,
        /// Output directory.
        #[arg(short, long)]
        out: PathBuf,
        /// mmrac, single_model or identification_only.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<ControllerMode>,
        #[command(flatten)]
        grid: Grid,
        /// Also write SVG plots.
        #[arg(long)]
        svg: bool,
    },
    /// Run the blended and single-model controllers on the same scenario.
    Compare {
        scenario: PathBuf,
        /// Output directory.
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        grid: Grid,
        /// Sampling step for the blended run only
        #[arg(long)]
        mmrac_dt: Option<f64>,
        /// Final time for the blended run only
        #[arg(long)]
        mmrac_t_end: Option<f64>,
        /// Sampling step for the single-model run only
        #[arg(long)]
        single_dt: Option<f64>,
        /// Final time for the single-model run only
        #[arg(long)]
        single_t_end: Option<f64>,
        /// Also write SVG plots.
        #[arg(long)]
        svg: bool,
    },
    /// Windowed regressor excitation levels of a simulated series.
    PeCheck {
        series: PathBuf,
        /// Window length T in seconds.
        #[arg(long)]
        window: f64,
        /// Window start spacing in seconds (default: T).
        #[arg(long)]
        stride: Option<f64>,
        /// Filter pole (default: read from summary.json next to the series).
        #[arg(long)]
        lambda: Option<f64>,
    },
}

#[derive(Args, Clone, Copy)]
struct Grid {
    /// Sampling step in seconds.
    #[arg(long)]
    dt: Option<f64>,
    /// Final time in seconds.
    #[arg(long)]
    t_end: Option<f64>,
}

fn parse_mode(s: &str) -> Result<ControllerMode, String> {
    s.parse().map_err(|e: mmrac_core::Error| e.to_string())
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> CliResult<()> {
    match cmd {
        Command::Refine { scenario, out: dest } => cmd_refine(&scenario, dest.as_deref(), out).map(drop),
        Command::Simulate {
            scenario,
            out: dir,
            mode,
            grid,
            svg,
        } => {
            let o = Overrides {
                mode,
                dt: grid.dt,
                t_end: grid.t_end,
            };
            cmd_simulate(&scenario, &dir, o, svg, out).map(drop)
        }
        Command::Compare {
            scenario,
            out: dir,
            grid,
            mmrac_dt,
            mmrac_t_end,
            single_dt,
            single_t_end,
            svg,
        } => {
            let o = CompareOverrides {
                both: Overrides {
                    mode: None,
                    dt: grid.dt,
                    t_end: grid.t_end,
                },
                mmrac: Overrides {
                    mode: None,
                    dt: mmrac_dt,
                    t_end: mmrac_t_end,
                },
                single_model: Overrides {
                    mode: None,
                    dt: single_dt,
                    t_end: single_t_end,
                },
            };
            cmd_compare(&scenario, &dir, o, svg, out).map(drop)
        }
        Command::PeCheck {
            series,
            window,
            stride,
            lambda,
        } => cmd_pe_check(&series, window, stride, lambda, out).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match dispatch(cli.command, &mut lock) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

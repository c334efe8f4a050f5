use std::path::PathBuf;
use std::process::ExitCode;

use bec_josephson::cli::{self, plot, Subcommand};
use clap::Parser;

#[derive(Parser)]
#[command(
    version,
    about = "Two-condensate Josephson dynamics and relative-phase dephasing"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Subcommand)]
enum Command {
    /// Classical two-mode Josephson equations against their closed form.
    TwoMode(RunArgs),
    /// Thomas-Fermi radius, breathing and phase coefficients.
    Hydro(RunArgs),
    /// Coupled Gross-Pitaevskii evolution.
    Gpe(RunArgs),
    /// Phase/number fluctuation moments and the correlation function.
    Moments(RunArgs),
    /// Perturbative dephasing rates and the moment pipeline fit.
    Dephasing(RunArgs),
    /// Exact two-mode quantum dynamics.
    Oracle(RunArgs),
    /// Grid over one or two configuration keys.
    Sweep(RunArgs),
    /// Line plot of CSV columns as SVG.
    Plot {
        csv: PathBuf,
        /// Column for the horizontal axis.
        #[arg(long, default_value = "t")]
        x: String,
        /// Columns for the vertical axis.
        #[arg(long = "y", required = true)]
        ys: Vec<String>,
        #[arg(long, short)]
        output: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// INI file; unset keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `section.key=value`; repeatable, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write an SVG plot next to every CSV.
    #[arg(long)]
    svg: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let (sub, run) = match args.command {
        Command::TwoMode(r) => (Subcommand::TwoMode, r),
        Command::Hydro(r) => (Subcommand::Hydro, r),
        Command::Gpe(r) => (Subcommand::Gpe, r),
        Command::Moments(r) => (Subcommand::Moments, r),
        Command::Dephasing(r) => (Subcommand::Dephasing, r),
        Command::Oracle(r) => (Subcommand::Oracle, r),
        Command::Sweep(r) => (Subcommand::Sweep, r),
        Command::Plot { csv, x, ys, output } => {
            let ys: Vec<&str> = ys.iter().map(String::as_str).collect();
            return match plot::emit_plot(&csv, &x, &ys, &output) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(cli::exit_code(&e) as u8)
                }
            };
        }
    };
    let code = cli::run(
        sub,
        run.config.as_deref(),
        &run.overrides,
        run.out.as_deref(),
        run.svg,
    );
    ExitCode::from(code as u8)
}

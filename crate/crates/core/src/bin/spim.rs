use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use spim::conditions::{
    geometric_mean_condition, high_snr_condition, log_form_condition, two_path_margin,
};
use spim::experiment::{
    reproduce_figure, run_experiment, write_outputs, ExperimentSpec, FigureId, Overrides,
};

/// Spectral efficiency of spatial path index modulation vs conventional beamforming.
#[derive(Debug, Parser)]
#[command(name = "spim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment spec (TOML) and emit its CSV.
    Run {
        spec_file: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Regenerate a figure's data and plot script.
    Reproduce {
        /// One of fig2..fig8.
        fig_id: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Evaluate the superiority conditions for a gain profile.
    CheckConditions {
        /// Path gains, strongest first.
        #[arg(long, value_delimiter = ',', required = true)]
        gains: Vec<f64>,
        #[arg(long)]
        n0: f64,
        /// Array gain of every steered path.
        #[arg(long, default_value_t = 64.0)]
        array_gain: f64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Debug, Args)]
struct RunFlags {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    mc_samples: Option<usize>,
    /// Use the large-array effective channel.
    #[arg(long)]
    asymptotic: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

impl RunFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            trials: self.trials,
            mc_samples: self.mc_samples,
            asymptotic: self.asymptotic,
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { spec_file, run } => {
            let Format::Csv = run.format;
            let mut spec = ExperimentSpec::from_file(&spec_file)?;
            spec.apply(&run.overrides())?;
            let table = run_experiment(&spec)?;
            if spec.outputs.csv.is_some() {
                write_outputs(&spec, &table)?;
            } else {
                std::io::stdout()
                    .lock()
                    .write_all(table.to_csv().as_bytes())?;
            }
        }
        Command::Reproduce { fig_id, out, run } => {
            let Format::Csv = run.format;
            let id: FigureId = fig_id.parse()?;
            let result = reproduce_figure(id, &out, &run.overrides())?;
            println!("{}", result.csv.display());
            println!("{}", result.plot_script.display());
        }
        Command::CheckConditions {
            gains,
            n0,
            array_gain,
        } => {
            if gains.len() < 2 {
                bail!("--gains needs at least two values");
            }
            let g = vec![array_gain; gains.len()];
            let verdict =
                geometric_mean_condition(&gains, &g, n0).context("geometric-mean condition")?;
            let mut out = std::io::stdout().lock();
            writeln!(out, "paths={}", gains.len())?;
            if gains.len() == 2 {
                writeln!(
                    out,
                    "two_path_margin={}",
                    two_path_margin(gains[0], gains[1])?
                )?;
            }
            writeln!(out, "tau={}", verdict.tau)?;
            writeln!(out, "geo_mean={}", verdict.geo_mean)?;
            writeln!(out, "holds={}", verdict.holds)?;
            writeln!(out, "holds_high_snr={}", high_snr_condition(&gains)?)?;
            writeln!(out, "holds_log_form={}", log_form_condition(&gains)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

//! Command-line front end for translation-chain experiments.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 backend
//! failure, 3 corrupt stored data.

pub mod analyze;
pub mod config;
pub mod error;
pub mod run;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use hopchain::analysis::export::{matrix_counts_csv, matrix_csv, parse_curve_csv};
use hopchain::analysis::fit_ael;
use hopchain::catalog::Topology;
use hopchain::gleu::{gleu, tokenize, DEFAULT_MAX_ORDER};

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "hopchain",
    version,
    about = "Sequential machine-translation experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute or resume every chain in a config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Chains executed concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Override the config's topology.
        #[arg(long, value_enum)]
        topology: Option<TopologyArg>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Curves, fits, size trajectories and pair matrices for run directories.
    Analyze {
        /// Run directories, or directories containing them.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Group by chain mode or label; repeatable. Defaults to one group
        /// per mode.
        #[arg(long)]
        group: Vec<String>,
        #[arg(long, default_value = "analysis")]
        out: PathBuf,
    },
    /// GLEU of a candidate file against a reference file.
    Score {
        candidate: PathBuf,
        reference: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_ORDER)]
        max_order: usize,
    },
    /// Fit the power law to a `t,value` curve CSV.
    Fit { curve: PathBuf },
    /// Pair matrix over run directories.
    Heatmap {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Write matrix.csv and matrix_counts.csv here instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum TopologyArg {
    Pivot,
    Direct,
}

impl From<TopologyArg> for Topology {
    fn from(t: TopologyArg) -> Self {
        match t {
            TopologyArg::Pivot => Topology::Pivot,
            TopologyArg::Direct => Topology::Direct,
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            jobs,
            topology,
            out,
        } => {
            run::cmd_run(&run::RunOptions {
                config,
                jobs,
                topology: topology.map(Topology::from),
                out,
            })?;
        }
        Command::Analyze { runs, group, out } => {
            analyze::cmd_analyze(&runs, &group, &out)?;
        }
        Command::Score {
            candidate,
            reference,
            max_order,
        } => {
            let cand = tokenize(&read_text(&candidate)?);
            let refr = tokenize(&read_text(&reference)?);
            let score =
                gleu(&cand, &refr, max_order).map_err(|e| CliError::Usage(e.to_string()))?;
            println!("{:.6}", score.value);
        }
        Command::Fit { curve } => {
            let label = curve.display().to_string();
            let parsed = parse_curve_csv(&label, &read_text(&curve)?)?;
            let fit = fit_ael(&parsed)?;
            println!("alpha={:.9} rmse={:.9} n={}", fit.alpha, fit.rmse, fit.n);
        }
        Command::Heatmap { runs, out } => {
            let matrix = analyze::cmd_heatmap(&runs)?;
            match out {
                Some(dir) => {
                    fs::create_dir_all(&dir)
                        .map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
                    for (name, body) in [
                        ("matrix.csv", matrix_csv(&matrix)),
                        ("matrix_counts.csv", matrix_counts_csv(&matrix)),
                    ] {
                        let p = dir.join(name);
                        fs::write(&p, body)
                            .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                    }
                }
                None => print!("{}", matrix_csv(&matrix)),
            }
            match matrix.mean() {
                Some(m) => eprintln!("mean off-diagonal accuracy: {m:.6}"),
                None => eprintln!("mean off-diagonal accuracy: undefined (no comparable pairs)"),
            }
            if matrix.low_validity {
                eprintln!("note: scores compare texts across languages (direct topology)");
            }
        }
    }
    Ok(())
}

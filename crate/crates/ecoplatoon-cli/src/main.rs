//! Command-line entry point. Exit codes: 0 success, 1 usage or
//! configuration mistakes, 2 runtime failures.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use ecoplatoon_cli::config::{load_run_config, RunConfig};
use ecoplatoon_cli::{
    cmd_analyze_graph, cmd_compare, cmd_eval, cmd_export, cmd_sweep, cmd_train, exit_code_for,
    usage, AnalyzeTarget, EvalTarget,
};

#[derive(Parser)]
#[command(
    name = "ecoplatoon",
    version,
    about = "Mixed-platoon traffic control: training, evaluation, and graph analysis"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Overrides shared by every config-consuming subcommand. Precedence:
/// flags beat ECOPLATOON_* environment variables beat the config file.
#[derive(Args)]
struct Overrides {
    /// Run configuration file (flat key=value lines)
    #[arg(long)]
    config: PathBuf,
    /// Override train.seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override train.ablation (ddpg, mgat, stw, nstw)
    #[arg(long)]
    ablation: Option<String>,
    /// Override stw.mode (as-written, prose)
    #[arg(long)]
    mode: Option<String>,
}

impl Overrides {
    fn load(&self) -> Result<RunConfig> {
        let mut flags = Vec::new();
        if let Some(seed) = self.seed {
            flags.push(("train.seed".to_string(), seed.to_string()));
        }
        if let Some(ab) = &self.ablation {
            flags.push(("train.ablation".to_string(), ab.clone()));
        }
        if let Some(mode) = &self.mode {
            flags.push(("stw.mode".to_string(), mode.clone()));
        }
        load_run_config(&self.config, &flags)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a controller and write the run directory
    Train {
        #[command(flatten)]
        overrides: Overrides,
        /// Run directory to create
        #[arg(long)]
        out: PathBuf,
        /// Overwrite a non-empty run directory
        #[arg(long)]
        force: bool,
    },
    /// Roll out a checkpoint or the idm baseline and write metrics
    Eval {
        #[command(flatten)]
        overrides: Overrides,
        /// Checkpoint file to evaluate
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Evaluate a controller-free baseline instead (only "idm")
        #[arg(long)]
        baseline: Option<String>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Tabulate summary metrics across run directories
    Compare {
        /// Directories containing summary.txt
        dirs: Vec<PathBuf>,
    },
    /// Spectral entropy and information intensity of a nested graph
    AnalyzeGraph {
        /// Graph dump file to analyze
        dump: Option<PathBuf>,
        /// Build the initial graph of a configured scenario instead
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override train.ablation for --config analysis
        #[arg(long)]
        ablation: Option<String>,
        /// Override stw.mode for --config analysis
        #[arg(long)]
        mode: Option<String>,
        /// Built-in demo: "fig4" contrasts two spectral-entropy cases
        #[arg(long)]
        demo: Option<String>,
    },
    /// Train and evaluate a family of runs along one dimension
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
        /// Sweep dimension: ablation or penetration
        #[arg(long)]
        dimension: String,
        /// Parent directory for the per-run directories
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Write the initial nested graph of a configured scenario as a dump
    Export {
        #[command(flatten)]
        overrides: Overrides,
        /// Output dump file
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

fn run(cli: Cli) -> Result<String> {
    match cli.cmd {
        Cmd::Train { overrides, out, force } => cmd_train(&overrides.load()?, &out, force),
        Cmd::Eval { overrides, checkpoint, baseline, out, force } => {
            let target = match (checkpoint, baseline) {
                (Some(path), None) => EvalTarget::Checkpoint(path),
                (None, Some(name)) if name == "idm" => EvalTarget::BaselineIdm,
                (None, Some(name)) => {
                    return Err(usage(format!("unknown baseline '{name}'; only idm exists")))
                }
                (Some(_), Some(_)) => {
                    return Err(usage("pass either --checkpoint or --baseline, not both"))
                }
                (None, None) => {
                    return Err(usage("eval needs --checkpoint <file> or --baseline idm"))
                }
            };
            cmd_eval(&overrides.load()?, &target, &out, force)
        }
        Cmd::Compare { dirs } => cmd_compare(&dirs),
        Cmd::AnalyzeGraph { dump, config, ablation, mode, demo } => {
            let target = match (demo, dump, config) {
                (Some(name), None, None) => {
                    if name != "fig4" {
                        return Err(usage(format!("unknown demo '{name}'; only fig4 exists")));
                    }
                    AnalyzeTarget::Demo
                }
                (None, Some(path), None) => AnalyzeTarget::Dump(path),
                (None, None, Some(path)) => {
                    let mut flags = Vec::new();
                    if let Some(ab) = ablation {
                        flags.push(("train.ablation".to_string(), ab));
                    }
                    if let Some(m) = mode {
                        flags.push(("stw.mode".to_string(), m));
                    }
                    AnalyzeTarget::Config(Box::new(load_run_config(&path, &flags)?))
                }
                _ => {
                    return Err(usage(
                        "analyze-graph needs exactly one of: a dump path, --config <file>, or --demo fig4",
                    ))
                }
            };
            cmd_analyze_graph(&target)
        }
        Cmd::Sweep { overrides, dimension, out, force } => {
            cmd_sweep(&overrides.load()?, &dimension, &out, force)
        }
        Cmd::Export { overrides, out, force } => cmd_export(&overrides.load()?, &out, force),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 2 on bad arguments by default; this tool reserves
            // 2 for runtime failures, so remap argument mistakes to 1.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(report) => {
            println!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}

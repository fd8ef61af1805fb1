//! `ideaevo` command-line front end.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 for
//! runtime and I/O failures.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "ideaevo",
    version,
    about = "Collective decision making as evolution of ideas"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write its metrics, event log and resolved config.
    Run(RunArgs),
    /// Heterogeneity x bias sweep with balanced groups.
    Sweep(SweepArgs),
    /// Compare the behavioural presets G0..G7.
    Groups(GroupsArgs),
    /// Enumerate a landscape and report its global optimum.
    Oracle(OracleArgs),
    /// Rebuild the idea genealogy from an event log.
    Genealogy(GenealogyArgs),
}

/// Simulation parameters; each overrides the value from `--config`.
#[derive(Debug, Args, Default, Clone)]
pub struct SimArgs {
    /// key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Aspects of the problem.
    #[arg(long = "M")]
    pub dims: Option<String>,
    /// Representative ideas.
    #[arg(long = "n")]
    pub representatives: Option<String>,
    /// Agents.
    #[arg(long = "N")]
    pub agents: Option<String>,
    /// Initial ideas.
    #[arg(long = "k")]
    pub initial_ideas: Option<String>,
    /// Iterations (full rotations).
    #[arg(long = "T")]
    pub iterations: Option<String>,
    /// Within-group heterogeneity.
    #[arg(long)]
    pub nu: Option<String>,
    /// Group-level bias.
    #[arg(long)]
    pub beta: Option<String>,
    /// Preferential sample size.
    #[arg(long)]
    pub rp: Option<String>,
    /// Per-bit mutation probability.
    #[arg(long)]
    pub pm: Option<String>,
    /// Intelligent-mutation offspring count.
    #[arg(long)]
    pub rm: Option<String>,
    /// Per-aspect crossover swap probability.
    #[arg(long)]
    pub ps: Option<String>,
    /// Behavioural preset (G0..G7).
    #[arg(long)]
    pub group: Option<String>,
}

impl SimArgs {
    /// Flag overrides as `(config key, value)` pairs.
    pub fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let pairs: [(&'static str, &Option<String>); 12] = [
            ("M", &self.dims),
            ("n", &self.representatives),
            ("N", &self.agents),
            ("k", &self.initial_ideas),
            ("T", &self.iterations),
            ("nu", &self.nu),
            ("beta", &self.beta),
            ("rp", &self.rp),
            ("pm", &self.pm),
            ("rm", &self.rm),
            ("ps", &self.ps),
            ("group", &self.group),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                out.push((k, v.clone()));
            }
        }
        if let Some(seed) = self.seed {
            out.push(("seed", seed.to_string()));
        }
        out
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HarnessArgs {
    /// Replicates per cell.
    #[arg(long = "R")]
    pub replicates: Option<String>,
    /// Worker threads; does not change the output bytes.
    #[arg(long)]
    pub jobs: Option<String>,
    /// Permutations for the significance tests.
    #[arg(long)]
    pub permutations: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub harness: HarnessArgs,
    /// Comma-separated heterogeneity levels.
    #[arg(long = "nu-values")]
    pub nu_values: Option<String>,
    /// Comma-separated bias levels.
    #[arg(long = "beta-values")]
    pub beta_values: Option<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GroupsArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub harness: HarnessArgs,
    /// Comma-separated presets to compare.
    #[arg(long)]
    pub groups: Option<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Enumerate the biased master landscape instead of the true one.
    #[arg(long)]
    pub master: bool,
    /// Largest M that may be enumerated.
    #[arg(long, default_value_t = ideaevo::landscape::DEFAULT_ENUMERATION_CAP)]
    pub cap: u32,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenealogyArgs {
    /// Event log written by `run`.
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

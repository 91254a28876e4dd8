mod commands;
mod output;
mod recipe;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dfa_meet::mc::Mode;
use dfa_meet::LogBase;

/// Meeting, coalescence and synchronization times of random walks on random DFAs.
#[derive(Debug, Parser)]
#[command(name = "dfa-meet", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Master seed.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads (defaults to DFA_MEET_THREADS, then to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for relative output paths and recipe artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a random DFA and write it as JSON.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stationary law and total-variation mixing profile of a DFA walk.
    Exact {
        #[arg(long)]
        dfa: PathBuf,
        /// Longest time evaluated in the mixing profile.
        #[arg(long, default_value_t = 1000)]
        t_cap: usize,
        #[arg(long, default_value = "e")]
        log_base: LogBase,
        /// Write JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hitting-time quantities of the diagonal in the auxiliary pair chain.
    Fvtl {
        #[arg(long)]
        dfa: PathBuf,
        /// Return-mass horizon: "auto" for ceil(log^5 n), or an integer.
        #[arg(long = "T", default_value = "auto")]
        horizon: String,
        #[arg(long, default_value_t = 0.15)]
        eps: f64,
        #[arg(long, default_value = "e")]
        log_base: LogBase,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment and write per-trial results as CSV.
    Simulate {
        #[arg(long)]
        mode: Mode,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        trials: u64,
        /// Step cap; defaults to 50 n ceil(ln n).
        #[arg(long)]
        cap: Option<u64>,
        /// Use this DFA for every trial instead of a fresh one per trial.
        #[arg(long)]
        fixed_dfa: Option<PathBuf>,
        /// Fixed start pair "x,y" for the pairwise modes.
        #[arg(long)]
        starts: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the run manifest as JSON.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Compare a results file with a reference law.
    Verify {
        #[arg(long)]
        results: PathBuf,
        /// geom:auto | geom:<rate> | exp:<rate> | kingman
        #[arg(long)]
        against: String,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a named end-to-end reproduction.
    Recipe(recipe::RecipeArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = &cli.global;
    let result = match cli.command {
        Command::Gen { n, r, out } => commands::gen(g, n, r, &out),
        Command::Exact { dfa, t_cap, log_base, out } => commands::exact(g, &dfa, t_cap, log_base, out.as_deref()),
        Command::Fvtl { dfa, horizon, eps, log_base, out } => {
            commands::fvtl(g, &dfa, &horizon, eps, log_base, out.as_deref())
        }
        Command::Simulate { mode, n, r, trials, cap, fixed_dfa, starts, out, manifest } => commands::simulate(
            g,
            commands::SimulateArgs { mode, n, r, trials, cap, fixed_dfa, starts, out, manifest },
        ),
        Command::Verify { results, against, report } => commands::verify(g, &results, &against, report.as_deref()),
        Command::Recipe(args) => recipe::run(g, &args),
    };
    match result {
        Ok(status) => status,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

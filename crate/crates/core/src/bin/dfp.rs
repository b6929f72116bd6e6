use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nearpot_dfp::experiment::{self, ExperimentConfig, NetworkKind, Overrides, VerifyOptions};
use nearpot_dfp::Result;

#[derive(Parser)]
#[command(name = "dfp", version, about = "Decentralized fictitious play experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured experiment and write CSVs, charts and reports.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Print the potential certificate, equilibria and closeness checks of a game.
    VerifyGame {
        game: PathBuf,
        /// Potential game to measure the distance to.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        alpha_bar: f64,
        #[arg(long, default_value_t = 0.01)]
        eps_bar: f64,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Run the target-assignment preset on a ring and a star.
    ReproduceFig1 {
        #[command(flatten)]
        run: RunFlags,
    },
    /// Recompute the run checks from a stored output directory.
    Analyze {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunFlags {
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Comma-separated network kinds, replacing the configured ones.
    #[arg(long, value_delimiter = ',')]
    network: Option<Vec<NetworkArg>>,
    #[arg(long)]
    strict_assumptions: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum NetworkArg {
    Centralized,
    Ring,
    Star,
    Complete,
}

impl From<NetworkArg> for NetworkKind {
    fn from(a: NetworkArg) -> Self {
        match a {
            NetworkArg::Centralized => NetworkKind::Centralized,
            NetworkArg::Ring => NetworkKind::Ring,
            NetworkArg::Star => NetworkKind::Star,
            NetworkArg::Complete => NetworkKind::Complete,
        }
    }
}

fn run_with(mut config: ExperimentConfig, flags: RunFlags) -> Result<()> {
    config.apply(&Overrides {
        seed: flags.seed,
        runs: flags.runs,
        networks: flags.network.map(|v| v.into_iter().map(Into::into).collect()),
        strict_assumptions: flags.strict_assumptions,
    })?;
    let out = flags.out.or_else(|| config.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let result = experiment::simulate(&config, &out)?;
    for v in &result.variants {
        let one_to_one = v.runs.iter().filter(|r| r.summary.one_to_one == Some(true)).count();
        let err = v.aggregate.avg_belief_error.last().copied().unwrap_or(0.0);
        print!("{}: {} runs, final mean estimation error {err:.6}", v.name, v.runs.len());
        if v.runs.iter().any(|r| r.summary.one_to_one.is_some()) {
            print!(", one-to-one {one_to_one}/{}", v.runs.len());
        }
        println!();
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate { config, run } => ExperimentConfig::read(&config).and_then(|c| run_with(c, run)),
        Command::ReproduceFig1 { run } => run_with(ExperimentConfig::fig1_preset(), run),
        Command::VerifyGame { game, reference, alpha_bar, eps_bar, samples, seed, json } => {
            let opts = VerifyOptions { alpha_bar, eps_bar, samples, seed };
            experiment::verify_game_files(&game, reference.as_deref(), &opts).map(|o| {
                if json {
                    println!("{}", serde_json::to_string_pretty(&o.report).expect("report serializes"));
                } else {
                    print!("{}", o.report);
                }
            })
        }
        Command::Analyze { out } => experiment::analyze(&out).map(|a| print!("{a}")),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

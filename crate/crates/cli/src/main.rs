use std::path::PathBuf;
use std::process;

use clap::{Parser, Subcommand};

use tripforge_cli::commands::{self, PredictRequest};
use tripforge_cli::{exit_code, usage_error, CommonArgs, Task};
use tripforge_core::domain::Gender;

#[derive(Parser)]
#[command(
    name = "tripforge",
    version,
    about = "Bike-share trip data analysis and trip prediction",
    after_help = "Set TRIPFORGE_THREADS to cap data parallelism."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus in the default CSV layout.
    Synth {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Number of trips to generate.
        #[arg(long, default_value_t = 10_000)]
        trips: usize,
        /// Number of stations to generate.
        #[arg(long, default_value_t = 30)]
        stations: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ingest a corpus and write the composition/temporal/duration/spatial/
    /// balance reports (JSON plus CSV twins).
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train one model and evaluate it on the held-out time fold.
    Train {
        /// destination (classifier) or duration (regressor).
        #[arg(long, value_enum)]
        task: Task,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train both tasks under every feature mask and tabulate the results.
    Ablate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Rank likely destinations for a hypothetical departure.
    Predict {
        /// Destination model file (model.json from `train --task destination`).
        #[arg(long)]
        model: PathBuf,
        /// Duration model file (model.json from `train --task duration`).
        #[arg(long)]
        duration_model: PathBuf,
        #[arg(long)]
        stations: PathBuf,
        #[arg(long, default_value = "default")]
        preset: String,
        /// Origin station id.
        #[arg(long)]
        origin: u32,
        /// Departure time in the preset's timestamp format.
        #[arg(long)]
        start: String,
        /// Rider kind: subscriber or customer.
        #[arg(long, default_value = "customer")]
        user: String,
        /// Subscriber gender: male, female, or unknown.
        #[arg(long, default_value = "unknown")]
        gender: String,
        #[arg(long)]
        birth_year: Option<u16>,
        /// Number of destinations to print.
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Synth { seed, trips, stations, out } => {
            commands::run_synth(seed, trips, stations, &out)
        }
        Command::Analyze { common } => commands::run_analyze(&common.resolve()?),
        Command::Train { task, common } => {
            commands::run_train(&common.resolve()?, task).map(|_| ())
        }
        Command::Ablate { common } => {
            let config = common.resolve()?;
            commands::run_ablate(&config)?;
            println!("ablation table in {}", config.out.join("ablation.csv").display());
            Ok(())
        }
        Command::Predict {
            model,
            duration_model,
            stations,
            preset,
            origin,
            start,
            user,
            gender,
            birth_year,
            k,
        } => {
            let subscriber = match user.to_ascii_lowercase().as_str() {
                "subscriber" => true,
                "customer" => false,
                other => return Err(usage_error(format!("unknown user kind `{other}`"))),
            };
            let gender = match gender.to_ascii_lowercase().as_str() {
                "male" => Gender::Male,
                "female" => Gender::Female,
                "unknown" => Gender::Unknown,
                other => return Err(usage_error(format!("unknown gender `{other}`"))),
            };
            let rows = commands::run_predict(&PredictRequest {
                model,
                duration_model,
                stations,
                preset,
                origin,
                start,
                subscriber,
                gender,
                birth_year,
                k,
            })?;
            commands::print_predictions(&rows);
            Ok(())
        }
    }
}

fn init_thread_pool() {
    #[cfg(feature = "parallel")]
    if let Ok(value) = std::env::var("TRIPFORGE_THREADS") {
        match value.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => log::warn!("ignoring TRIPFORGE_THREADS={value}: not a positive integer"),
        }
    }
}

fn main() {
    env_logger::init();
    init_thread_pool();
    let cli = Cli::parse();
    if let Err(err) = run(cli.command) {
        eprintln!("error: {err:#}");
        process::exit(exit_code(&err));
    }
}

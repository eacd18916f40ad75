mod args;
mod commands;
mod error;
mod manifest;
mod settings;

use clap::Parser;

use args::{BenchmarkCommand, Cli, Command};
use error::{CliError, CliResult};
use manifest::RunManifest;
use settings::Settings;

const WORKERS_ENV: &str = "DEMD_WORKERS";

fn worker_count(flag: Option<usize>) -> CliResult<usize> {
    let from_env = match std::env::var(WORKERS_ENV) {
        Ok(raw) => Some(
            raw.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("{WORKERS_ENV} must be a positive integer, got '{raw}'")))?,
        ),
        Err(_) => None,
    };
    let workers = flag
        .or(from_env)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(CliError::Usage("worker count must be positive".into()));
    }
    Ok(workers)
}

fn run(cli: Cli) -> CliResult<()> {
    let workers = worker_count(cli.workers)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let settings = Settings::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Embed(a) => commands::embed(a, &settings, RunManifest::new("embed", workers)),
        Command::Distances(a) => commands::distances(a, RunManifest::new("distances", workers)),
        Command::Knn(a) => commands::knn(a, &settings, RunManifest::new("knn", workers)),
        Command::Benchmark(BenchmarkCommand::Line(a)) => {
            commands::benchmark_line(a, &settings, RunManifest::new("benchmark line", workers))
        }
        Command::Benchmark(BenchmarkCommand::SwissRoll(a)) => {
            commands::benchmark_swiss_roll(a, &settings, RunManifest::new("benchmark swiss-roll", workers))
        }
        Command::Gradcheck(a) => commands::gradcheck(a, &settings, RunManifest::new("gradcheck", workers)),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("demd: {err}");
        std::process::exit(err.exit_code());
    }
}

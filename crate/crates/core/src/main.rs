use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use unicrop::pipeline::{run_from_file, Overrides};
use unicrop::select::Criterion;
use unicrop::synth::{generate, SynthConfig};

#[derive(Parser)]
#[command(name = "unicrop", version, about = "Configuration-driven crop-yield data pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline from a key=value config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "select-k")]
        select_k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_criterion)]
        criterion: Option<Criterion>,
        /// Fixtures only; never use the HTTP fetcher.
        #[arg(long)]
        offline: bool,
    },
    /// Write a synthetic benchmark (fields, mapping, fixtures, config).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 600)]
        fields: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

fn parse_criterion(s: &str) -> Result<Criterion, String> {
    s.parse().map_err(|_| format!("expected ratio or difference, got `{s}`"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run { config, select_k, seed, criterion, offline } => {
            let overrides = Overrides { select_k, seed, criterion, offline };
            match run_from_file(&config, &overrides) {
                Ok(report) => {
                    for o in &report.outcomes {
                        let what = if o.skipped { "skipped" } else { "done" };
                        println!("{:<14} {what:<8} {:>8.2}s", o.stage.as_str(), o.seconds);
                    }
                    println!("artifacts in {}", report.output_dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Synth { out, fields, seed } => match generate(&out, &SynthConfig { fields, seed, ..Default::default() }) {
            Ok(s) => {
                println!(
                    "{} fixture files ({} withheld), noise sd {:.1}, oracle R2 {:.3}",
                    s.fixture_files, s.missing_files, s.noise_sd, s.oracle_r2
                );
                println!("config: {}", s.config_path.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}

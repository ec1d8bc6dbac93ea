use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use qjasim::cli::{run_experiment, ExperimentConfig, ExperimentMethod};
use qjasim::Error;

/// Quantum Jarzynski annealing experiments.
#[derive(Debug, Parser)]
#[command(name = "qjasim", version)]
struct Args {
    /// qa, qja, qa-interp, je-check, dilate-check, fig1 or spectrum.
    #[arg(value_parser = parse_method)]
    method: ExperimentMethod,

    /// JSON config file; optional for fig1.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<ExperimentMethod, String> {
    ExperimentMethod::parse(s).ok_or_else(|| {
        let names: Vec<&str> = ExperimentMethod::ALL.iter().map(|m| m.name()).collect();
        format!("unknown method {s:?}; valid methods: {}", names.join(", "))
    })
}

fn load(args: &Args) -> qjasim::Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_file(path, Some(args.method))?,
        None if args.method == ExperimentMethod::Fig1 => ExperimentConfig::fig1(0),
        None => {
            return Err(Error::Config(vec![qjasim::cli::ConfigIssue {
                path: "--config".into(),
                expected: format!("a config file for method {}", args.method),
                found: "nothing".into(),
            }]))
        }
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    Ok(config)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        e if e.is_numeric() => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let outcome = load(&args).and_then(|config| run_experiment(&config));
    match outcome {
        Ok(bundle) => {
            for line in &bundle.summary {
                println!("{line}");
            }
            println!(
                "wrote {} files to {} (config {})",
                bundle.manifest.files.len() + 1,
                bundle.dir.display(),
                &bundle.manifest.config_hash[..12]
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use cfmimo::experiment::{parse_spec, run};

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Roc,
    SnrSurvey,
    Compare,
    Validate,
}

/// Activity-detection experiments for cell-free and co-located massive MIMO.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// TOML experiment spec; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; 1 runs serially.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted overrides such as `geometry.L=80`, applied after the file.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut overrides = cli.overrides;
    if let Some(mode) = cli.mode {
        let name = mode.to_possible_value().expect("no skipped variants");
        overrides.push(format!("mode=\"{}\"", name.get_name()));
    }
    if let Some(seed) = cli.seed {
        overrides.push(format!("geometry.seed={seed}"));
    }
    if let Some(n) = cli.trials {
        overrides.push(format!("n_trials={n}"));
    }
    if let Some(n) = cli.workers {
        overrides.push(format!("workers={n}"));
    }
    if let Some(dir) = cli.out {
        overrides.push(format!("output_dir={}", toml::Value::String(dir.display().to_string())));
    }

    let spec = match parse_spec(cli.config.as_deref(), &overrides) {
        Ok(spec) => spec,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&spec) {
        Ok(summary) => {
            for line in &summary.lines {
                println!("{line}");
            }
            println!("results in {}", spec.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

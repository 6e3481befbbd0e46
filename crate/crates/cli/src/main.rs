use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nvpes_cli::{parse_config, run, Command, ConfigError, Format, RunError, RunOptions};

/// Photon emission statistics of a single NV center.
#[derive(Debug, Parser)]
#[command(name = "nvpes", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps; defaults to the number of cores.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Record wall time in the metadata (outputs then differ between runs).
    #[arg(long)]
    record_timing: bool,
}

fn execute(cli: &Cli) -> Result<bool, RunError> {
    let text = std::fs::read_to_string(&cli.config).map_err(|e| RunError::Io {
        path: cli.config.clone(),
        source: e,
    })?;
    let cfg = parse_config(&text)?;
    let opts = RunOptions {
        out: cli.out.clone(),
        seed: cli.seed,
        format: cli.format,
        record_timing: cli.record_timing,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(ConfigError {
                line: 0,
                message: "--workers must be >= 1".into(),
            }
            .into());
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().expect("thread pool");
    let outcome = pool.install(|| run(cli.command, &cfg, &opts))?;
    for f in &outcome.files {
        log::info!("wrote {}", f.display());
    }
    if !outcome.checks_passed {
        eprintln!(
            "{}",
            serde_json::json!({
                "error": "invariant",
                "message": "invariant checks failed; see metadata.json",
                "max_normalization_error": outcome.invariants.max_normalization_error,
            })
        );
    }
    Ok(outcome.checks_passed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(2)
        }
    }
}

mod args;
mod commands;
mod config;
mod error;
mod manifest;

use std::process::ExitCode;

use chrono::Utc;
use clap::Parser;
use serde_json::Value;
use tracing_subscriber::EnvFilter;

use args::{Cli, Command};
use commands::Ctx;
use config::FileConfig;
use error::Failure;
use manifest::{new_run_id, RunManifest};

async fn dispatch(ctx: &Ctx, command: &Command, m: &mut RunManifest) -> Result<Value, Failure> {
    match command {
        Command::Harvest(a) => commands::harvest(ctx, a, m).await,
        Command::Classify(a) => commands::classify(ctx, a, m).await,
        Command::Assess(a) => commands::assess(ctx, a, m).await,
        Command::Analyze(a) => commands::analyze(ctx, a, m),
        Command::Footprint(a) => commands::footprint(ctx, a, m),
        Command::Consistency(a) => commands::consistency(ctx, a, m).await,
        Command::Benchmark(a) => commands::benchmark(ctx, a, m).await,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_new(&cli.log).unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();

    let run_id = match &cli.command {
        Command::Classify(a) => a.run_id.clone(),
        _ => None,
    }
    .unwrap_or_else(|| new_run_id(Utc::now()));
    let mut manifest = RunManifest::start(cli.command.name(), run_id.clone());

    let result = FileConfig::load(cli.config.as_deref()).and_then(|file| {
        let ctx = Ctx {
            out: cli.out.clone(),
            file,
            run_id,
        };
        let rt = tokio::runtime::Runtime::new().map_err(Failure::internal)?;
        rt.block_on(dispatch(&ctx, &cli.command, &mut manifest))
    });

    manifest.finished_at = Some(Utc::now());
    let code = match result {
        Ok(outcome) => {
            manifest.status = "ok".into();
            manifest.outcome = outcome;
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {f}");
            manifest.status = "failed".into();
            manifest.error_category = Some(f.category);
            manifest.error = Some(format!("{f}"));
            ExitCode::from(f.category.exit_code())
        }
    };
    if let Err(e) = manifest.write(&cli.out) {
        eprintln!("error: cannot write manifest: {e}");
        return ExitCode::from(error::Category::Storage.exit_code());
    }
    code
}

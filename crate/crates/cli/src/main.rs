use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use kinetext_cli::commands::{self, Command, Context};
use kinetext_cli::config::PipelineConfig;

/// Motion capture to text: tokenization, classification, instruction data and feedback.
#[derive(Debug, Parser)]
#[command(name = "kinetext", version)]
struct Cli {
    /// Directory for every artifact of the run.
    #[arg(long, global = true, default_value = "run")]
    run_dir: PathBuf,
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set vq.steps=2000`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Print the result as JSON instead of a summary line.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let run = || -> kinetext::Result<commands::Outcome> {
        let mut config = match &cli.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        for o in &cli.overrides {
            config.apply_override(o)?;
        }
        let ctx = Context { run_dir: cli.run_dir.clone(), config, argv: std::env::args().collect() };
        commands::run(&cli.command, &ctx)
    };
    match run() {
        Ok(out) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&out.json).unwrap_or_default());
            } else {
                println!("{}", out.summary);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("kinetext {}: error: {}", cli.command.name(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

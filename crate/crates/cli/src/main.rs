use clap::{Parser, Subcommand};
use sparsedom_cli::config::{Command, RunConfig};
use sparsedom_cli::suite::{run_suite, Scale};
use sparsedom_cli::{commands, config};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sparsedom", version, about = "Sparse domination, weighted bounds and Riesz transform experiments")]
struct Cli {
    #[command(subcommand)]
    action: Action,
}

#[derive(Subcommand)]
enum Action {
    /// Run one command; remaining `--key value` pairs override the config file.
    Run {
        command: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        flags: Vec<String>,
    },
    /// Run the acceptance battery or its quick subset.
    Suite {
        name: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the keys of a command.
    Keys { command: String },
}

fn run(cli: Cli) -> Result<bool, String> {
    match cli.action {
        Action::Run { command, config, flags } => {
            let cmd: Command = command.parse().map_err(|e: config::ConfigError| e.to_string())?;
            let text = match &config {
                Some(p) => Some(std::fs::read_to_string(p).map_err(|e| format!("cannot read config `{}`: {e}", p.display()))?),
                None => None,
            };
            let cfg = RunConfig::new(cmd, text.as_deref(), &flags).map_err(|e| format!("{e}\n\n{}", RunConfig::usage(cmd)))?;
            let outcome = commands::run(&cfg).map_err(|e| e.to_string())?;
            let files = outcome.write(&cfg, &cfg.out_dir()).map_err(|e| e.to_string())?;
            for (k, v) in &outcome.summary {
                println!("{k} = {v}");
            }
            for f in files {
                println!("wrote {}", f.display());
            }
            for f in &outcome.failures {
                eprintln!("FAILED: {f}");
            }
            Ok(outcome.passed())
        }
        Action::Suite { name, seed, out } => {
            let scale: Scale = name.parse()?;
            let (results, outcome) = run_suite(scale, seed).map_err(|e| e.to_string())?;
            let dir = out.unwrap_or_else(|| PathBuf::from(format!("out/suite-{name}")));
            let head = vec![("command".to_string(), "suite".to_string()), ("config.name".into(), name.clone()), ("config.seed".into(), seed.to_string())];
            outcome.write_with(&outcome.manifest_with(&head), &dir).map_err(|e| e.to_string())?;
            let failed: Vec<String> = results.iter().filter(|r| !r.pass).map(|r| r.id.to_string()).collect();
            if !failed.is_empty() {
                eprintln!("failed criteria: {}", failed.join(", "));
            }
            Ok(failed.is_empty())
        }
        Action::Keys { command } => {
            let cmd: Command = command.parse().map_err(|e: config::ConfigError| e.to_string())?;
            print!("{}", RunConfig::usage(cmd));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

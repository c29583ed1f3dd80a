use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use relulab_cli::{load_config, run, thread_cap, CliError, SUMMARY_FILE};

#[derive(Parser)]
#[command(name = "relulab", version, about = "Run relulab experiments from JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory (overrides `outputs.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed (overrides `seed`).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            println!("{}: ok ({} mode, problem {})", config.display(), cfg.mode_name.as_str(), cfg.problem_hash());
            Ok(true)
        }
        Command::Run { config, out, seed } => {
            let mut cfg = load_config(&config)?;
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = thread_cap()? {
                // fails only if a pool already exists, in which case it is kept
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            let summary = run(&cfg)?;
            for c in &summary.checks {
                let tag = if c.pass { "PASS" } else { "FAIL" };
                println!("{tag} {}: {:e} (tolerance {:e})", c.name, c.value, c.tolerance);
            }
            println!("wrote {}", cfg.out_dir.join(SUMMARY_FILE).display());
            Ok(summary.all_pass())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

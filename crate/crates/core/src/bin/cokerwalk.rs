use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cokerwalk::harness::{builtin, execute, Overrides, BUILTINS, CONFIG_SCHEMA};

#[derive(Parser)]
#[command(
    name = "cokerwalk",
    version,
    about = "Walk bounds and cokernel statistics experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment config; exit 0 when every row passes, 1 otherwise,
    /// 2 for an invalid config, 3 when a size cap is hit, 4 on i/o errors.
    Run {
        /// Config file, or builtin:NAME for a shipped config.
        #[arg(long)]
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        /// CSV output path; the JSON sidecar goes next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the shipped experiment configs.
    List,
    /// Print a shipped config.
    Show { name: String },
    /// Print the config JSON schema.
    Schema,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Cmd::Run {
            config,
            seed,
            threads,
            out,
        } => {
            let overrides = Overrides {
                seed,
                threads,
                output_path: out,
            };
            let (code, output) = execute(&config, &overrides);
            if let Some(o) = output {
                let failed = o.failures().count();
                eprintln!("{} rows, {} failed", o.rows.len(), failed);
                for r in o.failures().take(20) {
                    eprintln!("FAIL {} {} value={}", r.experiment_id, r.statistic_name, r.value);
                }
            }
            ExitCode::from(code as u8)
        }
        Cmd::List => {
            for b in BUILTINS {
                println!("{:<22} {}", b.name, b.description);
            }
            ExitCode::SUCCESS
        }
        Cmd::Show { name } => match builtin(&name) {
            Some(b) => {
                print!("{}", b.json);
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("no builtin experiment {name:?}");
                ExitCode::from(2)
            }
        },
        Cmd::Schema => {
            print!("{CONFIG_SCHEMA}");
            ExitCode::SUCCESS
        }
    }
}

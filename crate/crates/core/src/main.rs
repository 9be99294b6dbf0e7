use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sparsefield::cli::{self, SimConfig, Suite};

#[derive(Parser)]
#[command(
    name = "sparsefield",
    version,
    about = "Sparse stochastic fields driven by Levy white noise"
)]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a field from a configuration file and write CSV, PGM and sidecar.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed of the configuration.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a verification suite and print one PASS/FAIL line per check.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var(cli::THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .map_err(|_| format!("{}: '{v}' is not a thread count", cli::THREADS_ENV))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match args.cmd {
        Cmd::Simulate { config, seed, out } => {
            let run = || -> Result<cli::Outputs, cli::CliError> {
                let mut cfg = SimConfig::load(&config)?;
                if let Some(s) = seed {
                    cfg.seed = s;
                }
                cli::simulate(&cfg, &out)
            };
            match run() {
                Ok(o) => {
                    println!("wrote {}", o.csv.display());
                    if let Some(p) = o.pgm {
                        println!("wrote {}", p.display());
                    }
                    println!("wrote {}", o.sidecar.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Cmd::Verify { suite, seed } => {
            let checks = cli::run_suite(suite, seed);
            for c in &checks {
                println!("{c}");
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            println!("{} checks, {failed} failed", checks.len());
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}

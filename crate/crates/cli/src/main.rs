use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mallows_lab_cli::cache::{resolve_dir, EnsembleCache};
use mallows_lab_cli::{run_experiment, verify_suite, CliError, Fixture, RunOptions, BUILD_ID};

#[derive(Parser)]
#[command(name = "mallows-lab", version = BUILD_ID, about = "Mallows-distance CLT experiments on Gibbsian spin chains")]
struct Cli {
    /// Worker threads for sampling and reports (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Ensemble cache directory [env: MALLOWS_LAB_CACHE, default: .mallows-lab-cache].
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Overrides `seed` in [model].
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `directory` in [output].
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Always resample; neither read nor write the cache.
        #[arg(long)]
        no_cache: bool,
        /// Run every loop on the calling thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Run the built-in oracle and invariant checks.
    Verify {
        #[arg(long, value_enum, default_value = "none", hide = true)]
        fixture: FixtureArg,
    },
    /// Manage the ensemble cache.
    Cache {
        /// Delete every cached ensemble.
        #[arg(long)]
        clear: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureArg {
    None,
    FlippedSign,
    SkipKolmogorov,
}

fn configure_threads(threads: Option<usize>) -> Result<(), CliError> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(CliError::Setting("--threads must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Run {
            config,
            seed,
            out_dir,
            no_cache,
            sequential,
        } => {
            let opts = RunOptions {
                seed,
                out_dir,
                cache_dir: cli.cache_dir,
                no_cache,
                sequential,
            };
            let summary = run_experiment(&config, &opts)?;
            println!(
                "wrote {} artifacts to {} (cache {})",
                summary.artifacts.len(),
                summary.out_dir.display(),
                if opts.no_cache {
                    "disabled"
                } else if summary.cache_hit {
                    "hit"
                } else {
                    "miss"
                }
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { fixture } => {
            let fixture = match fixture {
                FixtureArg::None => Fixture::None,
                FixtureArg::FlippedSign => Fixture::FlippedSign,
                FixtureArg::SkipKolmogorov => Fixture::SkipKolmogorov,
            };
            let report = verify_suite(fixture);
            for c in &report.checks {
                println!("{c}");
            }
            if report.passed() {
                println!("verify: PASS");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("verify: FAIL");
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Cache { clear } => {
            let cache = EnsembleCache::new(resolve_dir(cli.cache_dir.as_deref()));
            if clear {
                let n = cache.clear().map_err(CliError::io(format!("clearing {}", cache.dir().display())))?;
                println!("removed {n} cached ensembles from {}", cache.dir().display());
            } else {
                println!("{}", cache.dir().display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

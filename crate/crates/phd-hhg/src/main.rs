use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phd_hhg::commands::{export_table, nscale_test, toy_verify, DEFAULT_TOY_G0};
use phd_hhg::config::{parse_config, ConfigError};
use phd_hhg::run::{run, RunError};

/// Perturbative Heisenberg dynamics for quantum-optical harmonic generation.
#[derive(Parser)]
#[command(name = "phd-hhg", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the calculation described by a TOML config file.
    Run {
        config: PathBuf,
        /// Output directory, overriding `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare PHD against exact propagation of a two-level emitter and one mode.
    ToyVerify {
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_TOY_G0)]
        g0_list: Vec<f64>,
    },
    /// Check the N-emitter moment expansion against brute-force enumeration.
    NscaleTest {
        #[arg(long, default_value_t = 100)]
        draws: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Print one entry of a stored transition-dipole table as CSV.
    ExportTable {
        table: PathBuf,
        /// Entry indices as `m,n`.
        #[arg(long, value_delimiter = ',', required = true)]
        row: Vec<usize>,
    },
}

fn dispatch(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run { config, out } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| ConfigError::Invalid(format!("cannot read {}: {e}", config.display())))?;
            let cfg = parse_config(&text)?;
            let (_, files) = run(&cfg, out.as_deref())?;
            for f in files {
                println!("{}", f.display());
            }
        }
        Command::ToyVerify { g0_list } => {
            let report = toy_verify(&g0_list, std::io::stdout().lock())?;
            eprintln!("slope {:.4}", report.slope);
        }
        Command::NscaleTest { draws, seed } => {
            let r = nscale_test(draws, seed)?;
            println!("ok: {} cases, max relative error {:e}", r.cases, r.max_rel_error);
        }
        Command::ExportTable { table, row } => {
            let [m, n] = row[..] else {
                return Err(ConfigError::Invalid(format!("--row takes two indices m,n, got {}", row.len())).into());
            };
            export_table(&table, m, n, std::io::stdout().lock())?
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(v) = std::env::var("PHD_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: thread pool: {e}");
                    return ExitCode::from(1);
                }
            }
            _ => {
                eprintln!("error: PHD_THREADS must be a positive integer, got '{v}'");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

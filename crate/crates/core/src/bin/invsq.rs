//! Command-line front end: `verify`, `constants` and `evolve`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use invsq::cli::{
    check_output_dir, constants_table, default_config_toml, error_status, evolve_dump, exit_status,
    parse_config, write_atomic, RunConfig, Suite, THREADS_ENV,
};

#[derive(Parser)]
#[command(
    name = "invsq",
    version,
    about = "Numerical verification of inverse-square dispersive estimates"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites and write `summary.csv` plus one JSON per experiment.
    #[command(after_help = defaults_help())]
    Verify {
        /// Suite to run; repeat for several. Defaults to the config list, else all.
        #[arg(long = "suite", value_name = "NAME")]
        suites: Vec<String>,
        /// TOML configuration; sections are suites.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (overrides `out` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed of the random profiles (overrides `seed` in the config).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the smoothing constant table.
    Constants {
        /// Comma-separated ν values.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0.5,1.118033988749895,1.5,2,2.5,3.5"
        )]
        nu_grid: Vec<f64>,
        /// Comma-separated α values.
        #[arg(long, value_delimiter = ',', default_value = "0.25")]
        alpha: Vec<f64>,
    },
    /// Dump solution snapshots `t,r,re,im,abs` as CSV.
    #[command(after_help = defaults_help())]
    Evolve {
        /// TOML configuration; reads the `[evolve]` section.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output file (overrides `evolve.out`); stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn defaults_help() -> String {
    format!(
        "Defaults (TOML):\n\n{}\nThread count: set {THREADS_ENV}.",
        default_config_toml()
    )
}

fn load(path: Option<&PathBuf>) -> Result<RunConfig, ExitCode> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| {
            eprintln!("error: cannot read {}: {e}", p.display());
            ExitCode::from(2)
        })?,
        None => String::new(),
    };
    parse_config(&text).map_err(|e| {
        let name = path
            .map(|p| p.display().to_string())
            .unwrap_or_else(|| "<defaults>".into());
        eprintln!("error: {name}: {e}");
        ExitCode::from(2)
    })
}

fn fail(e: invsq::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(error_status(&e) as u8)
}

fn init_threads() -> Result<(), ExitCode> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| {
        eprintln!("error: {THREADS_ENV} must be a positive integer, got {v:?}");
        ExitCode::from(2)
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| {
            eprintln!("error: thread pool: {e}");
            ExitCode::from(2)
        })
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(code) = init_threads() {
        return code;
    }
    match args.command {
        Command::Verify {
            suites,
            config,
            out,
            seed,
        } => {
            let mut cfg = match load(config.as_ref()) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if !suites.is_empty() {
                cfg.suites.clear();
                for name in &suites {
                    match Suite::from_name(name) {
                        Some(s) => cfg.suites.push(s),
                        None => {
                            let known: Vec<_> = Suite::ALL.iter().map(|s| s.name()).collect();
                            eprintln!("error: unknown suite {name:?}; known: {}", known.join(", "));
                            return ExitCode::from(2);
                        }
                    }
                }
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dir = out
                .or(cfg.out.clone())
                .unwrap_or_else(|| PathBuf::from("invsq-out"));
            if let Err(e) = check_output_dir(&dir) {
                return fail(e);
            }
            let summary = match invsq::cli::run(&cfg) {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            for row in &summary.rows {
                let r = &row.report;
                println!(
                    "{:<5} {:<13} {:<28} computed={:.6e} reference={:.6e} tol={:.1e}",
                    if r.pass { "PASS" } else { "FAIL" },
                    row.suite.name(),
                    r.experiment,
                    r.computed,
                    r.reference,
                    r.tolerance
                );
            }
            if let Err(e) = summary.write(&dir) {
                return fail(e);
            }
            println!("wrote {}", dir.join("summary.csv").display());
            ExitCode::from(exit_status(&summary) as u8)
        }
        Command::Constants { nu_grid, alpha } => {
            println!("{:>12} {:>8} {:>12}", "nu", "alpha", "C");
            for (nu, a, c) in constants_table(&nu_grid, &alpha) {
                match c {
                    Some(c) => println!("{nu:>12.6} {a:>8.4} {c:>12.6}"),
                    None => println!("{nu:>12.6} {a:>8.4} {:>12}", "excluded"),
                }
            }
            ExitCode::SUCCESS
        }
        Command::Evolve { config, out } => {
            let cfg = match load(config.as_ref()) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let csv = match evolve_dump(&cfg.evolve) {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            match out.or(cfg.evolve.out.clone()) {
                Some(p) => match write_atomic(&p, csv.as_bytes()) {
                    Ok(()) => ExitCode::SUCCESS,
                    Err(e) => fail(e),
                },
                None => {
                    print!("{csv}");
                    ExitCode::SUCCESS
                }
            }
        }
    }
}

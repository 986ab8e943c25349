use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use levelset::harness::{
    oracle_allocation_rows, run_experiment, solve_design, summarize_files, write_allocations, write_summary,
    DesignSolveConfig, ExperimentConfig, InstanceConfig,
};
use levelset::Error;

#[derive(Parser)]
#[command(name = "levelset", version, about = "Level set estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write metrics (and allocation exports) to a directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds or a half-open range `a..b`.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Aggregate metric CSVs into mean and standard error per checkpoint.
    Summarize {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a standalone design problem with Frank-Wolfe.
    DesignSolve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate an instance and write its replay document.
    EnvGenerate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Compute the gap-weighted lower-bound allocation of a generated instance.
    OracleAllocation {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seeds: Option<String>,
    },
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, Error> {
    let bad = || Error::Config {
        path: "--seeds".into(),
        message: format!("expected `a,b,c` or `a..b`, got `{s}`"),
    };
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a >= b {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
}

fn load<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Config {
        path: format!("{}:{}:{}", path.display(), e.line(), e.column()),
        message: e.to_string(),
    })
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text)?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            config,
            out,
            seeds,
            jobs,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seeds {
                cfg.seeds = parse_seeds(&s)?;
            }
            let out = out.or_else(|| cfg.output.clone()).ok_or_else(|| Error::Config {
                path: "output".into(),
                message: "no output directory given (--out or `output`)".into(),
            })?;
            for p in run_experiment(&cfg, &out, jobs)? {
                println!("{}", p.display());
            }
        }
        Command::Summarize { inputs, out } => {
            let rows = summarize_files(&inputs)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            write_summary(fs::File::create(&out)?, &rows)?;
        }
        Command::DesignSolve { config, out } => {
            let cfg: DesignSolveConfig = load(&config)?;
            let res = solve_design(&cfg)?;
            write_or_print(out.as_deref(), &serde_json::to_string_pretty(&res)?)?;
        }
        Command::EnvGenerate { config, out, seeds } => {
            let mut cfg: InstanceConfig = load(&config)?;
            if let Some(s) = seeds {
                cfg.seed = parse_seeds(&s)?[0];
            }
            let env = levelset::env::generate(&cfg.instance, cfg.seed)?;
            write_or_print(out.as_deref(), &serde_json::to_string_pretty(&env.to_document())?)?;
        }
        Command::OracleAllocation { config, out, seeds } => {
            let mut cfg: InstanceConfig = load(&config)?;
            if let Some(s) = seeds {
                cfg.seed = parse_seeds(&s)?[0];
            }
            let rows = oracle_allocation_rows(&cfg)?;
            let mut buf = Vec::new();
            write_allocations(&mut buf, &rows)?;
            write_or_print(out.as_deref(), String::from_utf8_lossy(&buf).trim_end())?;
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Schema(_) | Error::InvalidInput(_) | Error::Json(_) | Error::DimensionMismatch(..) => 2,
        Error::Numerical { .. } | Error::RankDeficient(_) | Error::DegenerateInstance(_) | Error::InsufficientSamples { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

//! Command line. Exit codes: 0 all declared checks pass, 1 a check failed,
//! 2 usage, config or I/O error, 3 blow-up where none is expected.

use crate::checkpoint::Checkpoint;
use crate::config::{Config, Experiment};
use crate::ensemble;
use crate::error::HarnessError;
use crate::experiments::{self, Context};
use crate::report::{Format, Report, RunMeta};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "wcgl", version, about = "Wick-renormalized stochastic Ginzburg-Landau experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (all cores by default). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Subcommand, Debug)]
enum Command {
    RunRegularity(Common),
    RunWellposedness(Common),
    RunCoupling(Common),
    RunErgodicity(Common),
    /// Fast invariant suite; needs no config.
    Verify(Common),
    /// Continues a checkpoint to `--until` (the embedded horizon by default).
    Resume {
        checkpoint: PathBuf,
        #[arg(long)]
        until: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(c: &Common, expected: Experiment) -> Result<Config, HarnessError> {
    let path = c.config.as_ref().ok_or_else(|| {
        crate::config::ConfigError::Invalid(format!("--config is required for {}", expected.name()))
    })?;
    let mut cfg = Config::load(path)?;
    if cfg.experiment != expected {
        return Err(crate::config::ConfigError::Invalid(format!(
            "config declares experiment `{}` but the command runs `{}`",
            cfg.experiment.name(),
            expected.name()
        ))
        .into());
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn format_of(c: &Common) -> Format {
    match c.format {
        FormatArg::Json => Format::Json,
        FormatArg::Csv => Format::Csv,
    }
}

fn emit(rep: &Report, dir: &Path, format: Format, seconds: f64, threads: Option<usize>) -> Result<(), HarnessError> {
    for c in &rep.checks {
        println!(
            "{} {} value={:.6e} tolerance=\"{}\" n={}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance,
            c.sample_size
        );
    }
    for p in rep.write(dir, format)? {
        println!("wrote {}", p.display());
    }
    RunMeta::new(&rep.experiment, seconds, threads.unwrap_or_else(rayon::current_num_threads)).write(dir)?;
    Ok(())
}

fn exit_code(rep: &Report) -> i32 {
    if rep.unexpected_blowups > 0 {
        EXIT_BLOWUP
    } else if rep.passed() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

fn execute(cmd: Command) -> Result<i32, HarnessError> {
    let start = Instant::now();
    let (common, experiment) = match &cmd {
        Command::RunRegularity(c) => (c, Some(Experiment::Regularity)),
        Command::RunWellposedness(c) => (c, Some(Experiment::Wellposedness)),
        Command::RunCoupling(c) => (c, Some(Experiment::Coupling)),
        Command::RunErgodicity(c) => (c, Some(Experiment::Ergodicity)),
        Command::Verify(c) => (c, None),
        Command::Resume { common, .. } => (common, None),
    };
    let format = format_of(common);
    let threads = common.threads;
    match (&cmd, experiment) {
        (Command::Verify(c), _) => {
            let (seed, dir) = match &c.config {
                Some(p) => {
                    let cfg = Config::load(p)?;
                    (c.seed.unwrap_or(cfg.seed), c.out.clone().unwrap_or(cfg.output_dir))
                }
                None => (c.seed.unwrap_or(0), c.out.clone().unwrap_or_else(|| PathBuf::from("out"))),
            };
            let rep = ensemble::with_threads(threads, || experiments::verify::run(seed))?;
            emit(&rep, &dir, format, start.elapsed().as_secs_f64(), threads)?;
            Ok(exit_code(&rep))
        }
        (Command::Resume { checkpoint, until, common }, _) => {
            let ck = Checkpoint::load(checkpoint)?;
            let dir = common.out.clone().unwrap_or_else(|| ck.config.output_dir.clone());
            let (rep, last) = ensemble::with_threads(threads, || experiments::resume::run(&ck, *until))?;
            emit(&rep, &dir, format, start.elapsed().as_secs_f64(), threads)?;
            let path = dir.join("resume_final.ckpt");
            last.save(&path)?;
            println!("wrote {}", path.display());
            Ok(exit_code(&rep))
        }
        (_, Some(exp)) => {
            let cfg = load_config(common, exp)?;
            let ctx = Context { out_dir: Some(cfg.output_dir.clone()) };
            let rep = ensemble::with_threads(threads, || experiments::run(&cfg, &ctx))?;
            emit(&rep, &cfg.output_dir, format, start.elapsed().as_secs_f64(), threads)?;
            Ok(exit_code(&rep))
        }
        _ => unreachable!("every run command names its experiment"),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_blowup() {
                EXIT_BLOWUP
            } else {
                EXIT_USAGE
            }
        }
    }
}

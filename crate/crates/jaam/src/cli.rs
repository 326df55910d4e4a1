//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, Mode, PRESETS};
use crate::error::HarnessError;
use crate::harness;
use crate::output::{self, RunManifest};

#[derive(Debug, Parser)]
#[command(
    name = "jaam",
    version,
    about = "Jump-adapted adaptive Milstein experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Strong errors against a coupled reference; writes errors.csv and slopes.csv.
    Convergence(RunArgs),
    /// Stepping time per path on independent noise; writes timing.csv.
    Efficiency(RunArgs),
    /// Backstop frequency over a rho sweep; writes backstop.csv.
    Backstop(RunArgs),
    /// One recorded trajectory; writes trace.csv.
    Path(RunArgs),
    /// List the preset names.
    Presets,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML or JSON config file.
    #[arg(conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Halve the path count and keep the four largest h_max values.
    #[arg(long)]
    desk_scale: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Override the path count M.
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the per-step trace of one JA-AMM path.
    #[arg(long)]
    trace: bool,
    /// Path index for `path` and `--trace`.
    #[arg(long, default_value_t = 0)]
    path_index: u64,
    #[arg(long, conflicts_with = "workers")]
    single_worker: bool,
    #[arg(long)]
    workers: Option<usize>,
}

impl RunArgs {
    fn resolve(&self, mode: Mode) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::from_path(path)?,
            (None, Some(name)) => ExperimentConfig::preset(name)?,
            (None, None) => ExperimentConfig::default(),
        };
        cfg.mode = mode;
        if self.desk_scale {
            cfg = cfg.desk_scale();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(paths) = self.paths {
            cfg.paths = paths;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = Some(out.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn workers(&self) -> usize {
        if self.single_worker {
            1
        } else {
            self.workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        }
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

fn out_dir(cfg: &ExperimentConfig, command: &str) -> Result<PathBuf, HarnessError> {
    let dir = cfg
        .out_dir
        .clone()
        .unwrap_or_else(|| Path::new("out").join(command));
    fs::create_dir_all(&dir).map_err(|e| HarnessError::io(dir.display().to_string(), e))?;
    Ok(dir)
}

fn execute(command: &str, mode: Mode, args: &RunArgs) -> Result<(), HarnessError> {
    let started = unix_now();
    let cfg = args.resolve(mode)?;
    let workers = args.workers();
    let dir = out_dir(&cfg, command)?;
    let mut outputs = Vec::new();
    let mut reference_ratio = None;
    let mut emit = |name: &str| {
        outputs.push(name.to_string());
        dir.join(name)
    };

    match mode {
        Mode::Convergence => {
            let table = harness::convergence_experiment(&cfg, workers)?;
            output::write_errors(&table, &emit("errors.csv"))?;
            output::write_slopes(&table, &emit("slopes.csv"))?;
            reference_ratio = table.reference_ratio;
            for s in &table.slopes {
                println!(
                    "{:<8} slope {:.3} (residual {:.3})",
                    s.scheme, s.fit.slope, s.fit.residual
                );
            }
        }
        Mode::Efficiency => {
            let table = harness::efficiency_experiment(&cfg, workers)?;
            output::write_timing(&table, &emit("timing.csv"))?;
            for row in &table.rows {
                let times: Vec<String> = row
                    .results
                    .iter()
                    .map(|r| format!("{} {:.3e}s", r.scheme, r.cpu_seconds))
                    .collect();
                println!("h_max {:.3e}: {}", row.h_max, times.join(", "));
            }
        }
        Mode::Backstop => {
            let rows = harness::backstop_experiment(&cfg, workers)?;
            output::write_backstop(&rows, &emit("backstop.csv"))?;
            for r in &rows {
                println!(
                    "rho {:>6} h_max {:.3e}: frequency {:.4e} (jump term {:.4e})",
                    r.rho, r.h_max, r.frequency, r.jump_term
                );
            }
        }
        Mode::Path => {}
    }
    if mode == Mode::Path || args.trace {
        let (record, schedule) = harness::single_path(&cfg, args.path_index)?;
        output::write_trace(&record, &emit("trace.csv"))?;
        println!(
            "path {}: {} steps, {} jumps (scheduled {}), {} backstop steps, endpoint {:?}",
            args.path_index,
            record.steps,
            record.jumps,
            schedule.len(),
            record.backstop_steps,
            record.endpoint
        );
    }
    if mode != Mode::Path {
        output::write_plot_script(&dir)?;
        outputs.push("plot.py".into());
    }
    outputs.push("manifest.json".into());
    let manifest = RunManifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: cfg.seed,
        config: cfg,
        workers,
        started_unix: started,
        finished_unix: unix_now(),
        output_dir: dir.clone(),
        outputs,
        reference_ratio,
    };
    output::write_manifest(&manifest, &dir.join("manifest.json"))
}

pub fn run(cli: Cli) -> Result<(), HarnessError> {
    match &cli.command {
        Command::Convergence(a) => execute("convergence", Mode::Convergence, a),
        Command::Efficiency(a) => execute("efficiency", Mode::Efficiency, a),
        Command::Backstop(a) => execute("backstop", Mode::Backstop, a),
        Command::Path(a) => execute("path", Mode::Path, a),
        Command::Presets => {
            for name in PRESETS {
                println!("{name}");
            }
            Ok(())
        }
    }
}

/// Parses `args` and runs; exit code 1 for usage and configuration errors,
/// 2 when a path aborts numerically.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code())
        }
    }
}

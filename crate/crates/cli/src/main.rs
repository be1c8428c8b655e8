//! Batch experiment runner: configure a run, simulate, evaluate the
//! inequality ledger, and emit deterministic reports.
//!
//! Exit codes: 0 all checks pass (fitted-constant checks report, never
//! fail), 2 an inequality failed, 1 anything else went wrong.

mod checks;
mod config;
mod report;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use cel_core::biot_savart::{velocity_direct, velocity_spectral};
use cel_core::fields::{read_snapshot, write_snapshot};
use cel_core::norms::{NormReport, NORM_REPORT_CSV_HEADER};

use config::{ExperimentConfig, MethodKind};

#[derive(Parser)]
#[command(name = "cel", about = "2D incompressible Euler runs with a verification ledger")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate, evaluate every check, write fields and reports.
    Run(ConfigArgs),
    /// Evaluate only the named checks; nothing is written.
    Verify {
        /// Comma-separated check names.
        #[arg(long, value_delimiter = ',')]
        checks: Vec<String>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Print the norm report of a stored field snapshot.
    Norms { snapshot: PathBuf },
    /// Compare the spectral velocity against direct kernel summation on
    /// the configured initial data.
    OracleCompare(ConfigArgs),
}

/// Config file plus per-key overrides; flags win over the file, the file
/// over defaults. A repeated flag keeps its last value, so a scripted base
/// invocation can be overridden by appending.
#[derive(Args)]
struct ConfigArgs {
    #[arg(long, overrides_with = "config")]
    config: Option<PathBuf>,
    #[arg(long, overrides_with = "preset")]
    preset: Option<String>,
    #[arg(long, overrides_with = "input")]
    input: Option<PathBuf>,
    #[arg(long, overrides_with = "n")]
    n: Option<usize>,
    #[arg(long = "L", overrides_with = "half_width")]
    half_width: Option<f64>,
    #[arg(long, overrides_with = "dt")]
    dt: Option<f64>,
    #[arg(long = "T", overrides_with = "t_end")]
    t_end: Option<f64>,
    #[arg(long, overrides_with = "checkpoints")]
    checkpoints: Option<usize>,
    /// `spectral` or `semi_lagrangian`.
    #[arg(long, overrides_with = "method")]
    method: Option<String>,
    /// Mollification radii; repeat the flag for several.
    #[arg(long = "eps")]
    eps_list: Vec<f64>,
    #[arg(long, overrides_with = "seed")]
    seed: Option<u32>,
    #[arg(long, overrides_with = "output")]
    output: Option<PathBuf>,
    /// Print the effective config as TOML and exit.
    #[arg(long)]
    emit_config: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                ExperimentConfig::from_toml(&text)?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(p) = &self.preset {
            config.preset = Some(p.clone());
            config.input = None;
        }
        if let Some(p) = &self.input {
            config.input = Some(p.clone());
            config.preset = None;
        }
        if let Some(v) = self.n {
            config.n = v;
        }
        if let Some(v) = self.half_width {
            config.half_width = v;
        }
        if let Some(v) = self.dt {
            config.dt = v;
        }
        if let Some(v) = self.t_end {
            config.t_end = v;
        }
        if let Some(v) = self.checkpoints {
            config.checkpoints = v;
        }
        if let Some(m) = &self.method {
            config.method = match m.as_str() {
                "spectral" => MethodKind::Spectral,
                "semi_lagrangian" => MethodKind::SemiLagrangian,
                other => anyhow::bail!("unknown method `{other}`; use spectral or semi_lagrangian"),
            };
        }
        if !self.eps_list.is_empty() {
            config.eps_list = self.eps_list.clone();
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(p) = &self.output {
            config.output = p.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

fn main() -> ExitCode {
    if let Err(err) = cap_threads() {
        eprintln!("error: {err:#}");
        return ExitCode::from(1);
    }
    match dispatch() {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn cap_threads() -> anyhow::Result<()> {
    if let Ok(raw) = std::env::var("CEL_THREADS") {
        let k: usize = raw
            .parse()
            .ok()
            .filter(|&k| k > 0)
            .with_context(|| format!("CEL_THREADS must be a positive integer, got `{raw}`"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .context("installing the capped thread pool")?;
    }
    Ok(())
}

fn dispatch() -> anyhow::Result<u8> {
    match Cli::parse().command {
        Command::Run(args) => {
            if args.emit_config {
                print!("{}", args.resolve()?.to_toml());
                return Ok(0);
            }
            run(&args.resolve()?)
        }
        Command::Verify { checks, config } => {
            if config.emit_config {
                print!("{}", config.resolve()?.to_toml());
                return Ok(0);
            }
            verify(&checks, &config.resolve()?)
        }
        Command::Norms { snapshot } => {
            let field = read_snapshot(&snapshot)?;
            let report = NormReport::compute(&field, 0.0, &[])?;
            println!("{NORM_REPORT_CSV_HEADER}");
            println!("{}", report.csv_row());
            Ok(0)
        }
        Command::OracleCompare(args) => oracle_compare(&args.resolve()?),
    }
}

fn run(config: &ExperimentConfig) -> anyhow::Result<u8> {
    fs::create_dir_all(config.output.join("fields"))
        .with_context(|| format!("creating output directory {}", config.output.display()))?;
    fs::write(config.output.join("config.toml"), config.to_toml())?;

    let traj = checks::run_trajectory(config)?;

    let mut reports = Vec::new();
    for (k, field) in traj.fields().iter().enumerate() {
        write_snapshot(field, &config.output.join(format!("fields/checkpoint_{k:04}.bin")))?;
        reports.push(NormReport::compute(field, traj.times()[k], &[])?);
    }
    fs::write(config.output.join("norms.csv"), report::norms_csv(&reports))?;

    let names: Vec<String> = checks::CHECK_NAMES.iter().map(|s| s.to_string()).collect();
    let ledger = checks::evaluate(&names, &traj, config)?;
    fs::write(config.output.join("ledger.csv"), report::ledger_csv(&ledger))?;
    let summary = report::summary(&ledger);
    fs::write(config.output.join("summary.txt"), &summary)?;
    print!("{summary}");

    Ok(checks::exit_code(&ledger) as u8)
}

fn verify(names: &[String], config: &ExperimentConfig) -> anyhow::Result<u8> {
    checks::validate_names(names)?;
    let traj = checks::run_trajectory(config)?;
    let ledger = checks::evaluate(names, &traj, config)?;
    print!("{}", report::summary(&ledger));
    Ok(checks::exit_code(&ledger) as u8)
}

/// Two independent velocity routes on the same data. The direct route
/// windows the free-space field, whose slowly decaying tail leaves a
/// constant offset in the box average; both the raw distance and the
/// mean-adjusted distance over the data's support disk are reported.
fn oracle_compare(config: &ExperimentConfig) -> anyhow::Result<u8> {
    let omega0 = checks::load_initial(config)?;
    let grid = omega0.grid();
    let spectral = velocity_spectral(&omega0);
    let direct = velocity_direct(&omega0)?;

    let d1 = spectral.u1.try_sub(&direct.u1)?;
    let d2 = spectral.u2.try_sub(&direct.u2)?;
    let (m1, m2) = (d1.mean(), d2.mean());
    let half = grid.half_width() / 2.0;
    let mut raw_num = 0.0;
    let mut den_full = 0.0;
    let mut core_num = 0.0;
    let mut core_den = 0.0;
    for i in 0..grid.n() {
        for j in 0..grid.n() {
            let p1 = d1.get(i, j);
            let p2 = d2.get(i, j);
            let b1 = direct.u1.get(i, j);
            let b2 = direct.u2.get(i, j);
            raw_num += p1 * p1 + p2 * p2;
            den_full += b1 * b1 + b2 * b2;
            let [x, y] = grid.node(i, j);
            if x * x + y * y <= half * half {
                core_num += (p1 - m1).powi(2) + (p2 - m2).powi(2);
                core_den += b1 * b1 + b2 * b2;
            }
        }
    }
    println!("relative L2, whole box, raw: {:e}", (raw_num / den_full).sqrt());
    println!("direct-route mean offset: ({m1:e}, {m2:e})");
    println!(
        "relative L2, support disk, mean-adjusted: {:e}",
        (core_num / core_den).sqrt()
    );
    Ok(0)
}

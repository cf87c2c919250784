use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mpcc_cli::table::render;
use mpcc_cli::{run_experiment, Algorithm, ExperimentConfig, HarnessError, InstanceSource, TableFormat};
use mpcc_core::ioc_fem::emit_instance;

/// Seeded MPCC solver experiments on the inverse optimal control benchmark.
#[derive(Debug, Parser)]
#[command(name = "mpcc", version)]
struct Args {
    /// TOML config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `ioc` or `file:PATH`.
    #[arg(long)]
    instance: Option<InstanceSource>,
    /// Lower bound w_a of the IOC instance.
    #[arg(long, allow_hyphen_values = true)]
    wa: Option<f64>,
    /// Observation u_o of the IOC instance.
    #[arg(long, allow_hyphen_values = true)]
    u_obs: Option<f64>,
    #[arg(long, value_enum)]
    algorithm: Option<Algorithm>,
    /// Use seeds 1..=N.
    #[arg(long, conflicts_with = "seed_list")]
    seeds: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<TableFormat>,
    /// Leave wall-time columns empty.
    #[arg(long)]
    no_timings: bool,
    /// Write the assembled IOC instance as JSON to PATH and exit.
    #[arg(long, value_name = "PATH")]
    emit_instance: Option<PathBuf>,
}

fn build_config(args: &Args) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(i) = &args.instance {
        cfg.instance = i.clone();
    }
    if let Some(wa) = args.wa {
        cfg.ioc.w_a = wa;
    }
    if let Some(u) = args.u_obs {
        cfg.ioc.u_obs = u;
    }
    if let Some(a) = args.algorithm {
        cfg.algorithm = a;
    }
    if let Some(n) = args.seeds {
        cfg.seeds = (1..=n).collect();
    }
    if let Some(list) = &args.seed_list {
        cfg.seeds = list.clone();
    }
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    if let Some(f) = args.format {
        cfg.format = f;
    }
    if args.no_timings {
        cfg.timings = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: &Args) -> Result<bool, HarnessError> {
    let cfg = build_config(args)?;
    if let Some(path) = &args.emit_instance {
        let sidecar = emit_instance(&cfg.ioc, path)?;
        eprintln!("wrote {} and {}", path.display(), sidecar.display());
        return Ok(true);
    }
    let rows = run_experiment(&cfg)?;
    match &cfg.out {
        Some(path) => mpcc_cli::emit_table(&rows, cfg.format, path, cfg.timings)?,
        None => print!("{}", render(&rows, cfg.format, cfg.timings)?),
    }
    Ok(rows.iter().all(|r| r.status.is_converged()))
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

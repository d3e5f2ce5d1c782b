use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stylecast::config::RunConfig;
use stylecast::pipeline::{run_pipeline, run_stage, write_manifest, Stage};
use stylecast::synthetic::{generate_synthetic, SyntheticSpec};
use stylecast::Error;

#[derive(Parser)]
#[command(name = "stylecast", version, about = "Style influence discovery and forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `seasonal` or `deseason`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    records: Option<PathBuf>,
    #[arg(long)]
    metadata: Option<PathBuf>,
    /// Any config key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write the manifest.
    Run(RunArgs),
    /// Write a synthetic corpus with planted influence edges.
    Generate {
        /// JSON synthetic spec; defaults apply to missing fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    Styles(RunArgs),
    Panel(RunArgs),
    Influence(RunArgs),
    Rank(RunArgs),
    Correlate(RunArgs),
    Dynamics(RunArgs),
    ExportGraph(RunArgs),
    Forecast(RunArgs),
    Evaluate(RunArgs),
}

fn resolve(a: &RunArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for kv in &a.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = a.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = &a.out {
        cfg.out = o.clone();
    }
    if let Some(m) = &a.mode {
        cfg.mode = m.parse()?;
    }
    if let Some(r) = &a.records {
        cfg.records = Some(r.clone());
    }
    if let Some(m) = &a.metadata {
        cfg.metadata = Some(m.clone());
    }
    Ok(cfg)
}

fn execute(cmd: Command) -> Result<(), Error> {
    let (stage, args) = match cmd {
        Command::Run(a) => {
            let cfg = resolve(&a)?;
            let m = run_pipeline(&cfg)?;
            println!("wrote {} artifacts to {}", m.artifacts.len(), cfg.out.display());
            return Ok(());
        }
        Command::Generate { spec, seed, out } => {
            let mut s: SyntheticSpec = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
                    serde_json::from_str(&text)?
                }
                None => SyntheticSpec::default(),
            };
            if let Some(seed) = seed {
                s.seed = seed;
            }
            std::fs::create_dir_all(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            let truth = generate_synthetic(&s, &out)?;
            println!(
                "wrote {} cities, {} planted edges to {}",
                truth.cities.len(),
                truth.edges.len(),
                out.display()
            );
            return Ok(());
        }
        Command::Styles(a) => (Stage::Styles, a),
        Command::Panel(a) => (Stage::Panel, a),
        Command::Influence(a) => (Stage::Influence, a),
        Command::Rank(a) => (Stage::Rank, a),
        Command::Correlate(a) => (Stage::Correlate, a),
        Command::Dynamics(a) => (Stage::Dynamics, a),
        Command::ExportGraph(a) => (Stage::ExportGraph, a),
        Command::Forecast(a) => (Stage::Forecast, a),
        Command::Evaluate(a) => (Stage::Evaluate, a),
    };
    let cfg = resolve(&args)?;
    run_stage(stage, &cfg)?;
    write_manifest(&cfg)?;
    println!("{stage} done");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

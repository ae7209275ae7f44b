//! `mpsvqc`: data generation, two-stage training, evaluation, verification
//! suites, topology comparison and sweeps.

mod common;
mod experiments;
mod report;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mpsvqc::checkpoint::Checkpoint;
use mpsvqc::data::{gen_synthetic, GenParams};
use mpsvqc::run::RunDir;
use mpsvqc::verify::{self, Suite};
use mpsvqc::{Error, Result};

#[derive(Parser)]
#[command(name = "mpsvqc", version, about = "MPS fusion-compression and variational quantum classifier toolkit")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// TOML run config with training keys; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run directory. Defaults to `runs/<subcommand>`.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for batch evaluation (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Replace a finished run directory.
    #[arg(long, global = true)]
    pub force: bool,
    /// Log progress (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

impl Global {
    pub fn out_dir(&self, subcommand: &str) -> PathBuf {
        self.out_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(subcommand))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic tri-modal embedding dataset.
    GenData(GenDataArgs),
    /// Run training stage 1 (projector) or stage 2 (circuit classifier).
    Train(train::TrainArgs),
    /// Score a dataset with trained checkpoints.
    Eval(train::EvalArgs),
    /// Run the registered property checks.
    Verify(VerifyArgs),
    /// Chain vs brick-wall discrepancy under parameter scaling.
    CompareTopologies(experiments::CompareArgs),
    /// Grid over fused width, qubit count and training-data ratio.
    Sweep(experiments::SweepArgs),
    /// Summaries and charts of finished runs.
    Report(report::ReportArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    d_emb: usize,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, default_value_t = 2.0)]
    margin: f64,
    #[arg(long, default_value_t = 0.3)]
    sigma: f64,
    #[arg(long, value_parser = ["bin", "csv"], default_value = "bin")]
    format: String,
    /// Dataset file name inside the run directory.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// mps | vqc | trotter | all
    #[arg(long, default_value = "all")]
    suite: String,
    /// Stage-one checkpoint to audit alongside the mps suite.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

fn gen_data(g: &Global, a: &GenDataArgs) -> Result<bool> {
    let p = GenParams {
        n: a.n,
        d_emb: a.d_emb,
        rho: a.rho,
        margin: a.margin,
        sigma: a.sigma,
        seed: g.seed.unwrap_or(0),
    };
    p.validate()?;
    let data = gen_synthetic(&p)?;
    let mut run = RunDir::create(&g.out_dir("gen-data"), "gen-data", p.seed, g.force)?;
    run.set_config(&p)?;
    run.write_json("config-resolved.json", &p)?;
    let csv = a.format == "csv";
    let name = a
        .out
        .clone()
        .unwrap_or_else(|| if csv { "dataset.csv" } else { "dataset.mmeb" }.into());
    let path = run.path(&name);
    if csv {
        data.save_csv(&path)?;
    } else {
        data.save_mmeb(&path)?;
    }
    run.record(&name);
    run.finish()?;
    println!("wrote {} rows to {}", data.len(), path.display());
    Ok(true)
}

fn run_verify(g: &Global, a: &VerifyArgs) -> Result<bool> {
    let suite: Suite = a.suite.parse()?;
    let seed = g.seed.unwrap_or(0);
    let loaded = a.checkpoint.as_ref().map(|p| Checkpoint::load(p));
    let ck = match &loaded {
        Some(Ok(ck)) => Some(ck),
        Some(Err(e)) => {
            println!("mps      checkpoint-container               FAIL  {e}");
            return Ok(false);
        }
        None => None,
    };
    let report = verify::run(suite, seed, ck)?;
    print!("{}", report.table());
    if !report.trotter.is_empty() {
        print!("\n{}", report.trotter_csv());
    }
    if let Some(dir) = &g.out_dir {
        let mut run = RunDir::create(dir, "verify", seed, g.force)?;
        if let Some(p) = &a.checkpoint {
            run.add_input(p)?;
        }
        run.set_config(&serde_json::json!({ "suite": a.suite, "seed": seed }))?;
        run.write("verify.txt", report.table().as_bytes())?;
        run.write_json("verify.json", &report)?;
        if !report.trotter.is_empty() {
            run.write("trotter.csv", report.trotter_csv().as_bytes())?;
        }
        run.finish()?;
    }
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    if !failed.is_empty() {
        eprintln!("violated: {}", failed.join(", "));
    }
    Ok(failed.is_empty())
}

fn dispatch(cli: &Cli) -> Result<bool> {
    let g = &cli.global;
    if let Some(n) = g.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::GenData(a) => gen_data(g, a),
        Command::Train(a) => train::train(g, a),
        Command::Eval(a) => train::eval(g, a),
        Command::Verify(a) => run_verify(g, a),
        Command::CompareTopologies(a) => experiments::compare(g, a),
        Command::Sweep(a) => experiments::sweep(g, a),
        Command::Report(a) => report::report(g, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    env_logger::Builder::new()
        .filter_level(match cli.global.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        })
        .format_timestamp(None)
        .init();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}


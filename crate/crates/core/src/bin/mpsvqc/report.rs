use std::path::{Path, PathBuf};

use clap::Args;

use mpsvqc::run::{line_chart_svg, RunDir, RunManifest, Series};
use mpsvqc::train::StepRecord;
use mpsvqc::{Error, Result};

use crate::common::display;
use crate::experiments::{sweep_chart, sweep_csv, SweepRow};
use crate::Global;

#[derive(Args)]
pub struct ReportArgs {
    /// Finished run directories (train, sweep, ...). Repeatable.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
}

struct RunSummary {
    label: String,
    subcommand: String,
    steps: Vec<StepRecord>,
    test_acer: Option<f64>,
    sweep: Vec<SweepRow>,
}

fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Format(format!("{}: {e}", path.display()))))
        .collect()
}

fn summarize(dir: &Path) -> Result<RunSummary> {
    let manifest = RunManifest::load(dir)?;
    let steps = match dir.join("report.csv") {
        p if p.exists() => read_csv(&p)?,
        _ => Vec::new(),
    };
    let sweep = match dir.join("sweep.csv") {
        p if p.exists() => read_csv(&p)?,
        _ => Vec::new(),
    };
    let test_acer = std::fs::read_to_string(dir.join("metrics.json"))
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .and_then(|v| v.pointer("/test/acer").or(v.pointer("/acer")).and_then(|x| x.as_f64()));
    Ok(RunSummary {
        label: dir
            .file_name()
            .map_or_else(|| display(dir), |n| n.to_string_lossy().into_owned()),
        subcommand: manifest.subcommand,
        steps,
        test_acer,
        sweep,
    })
}

fn max_jump(steps: &[StepRecord]) -> f64 {
    steps
        .windows(2)
        .map(|w| (w[1].loss - w[0].loss).abs())
        .fold(0.0, f64::max)
}

pub fn report(g: &Global, a: &ReportArgs) -> Result<bool> {
    let runs: Vec<RunSummary> = a.inputs.iter().map(|d| summarize(d)).collect::<Result<_>>()?;
    let mut out = RunDir::create(&g.out_dir("report"), "report", g.seed.unwrap_or(0), g.force)?;
    for d in &a.inputs {
        for f in ["report.csv", "sweep.csv", "metrics.json"] {
            if d.join(f).exists() {
                out.add_input(&d.join(f))?;
            }
        }
    }
    out.set_config(&serde_json::json!({ "inputs": a.inputs.iter().map(|p| display(p)).collect::<Vec<_>>() }))?;

    let fmt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    let mut table = String::from("run,subcommand,steps,final_step_loss,max_loss_jump,test_acer\n");
    for r in &runs {
        table.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.label,
            r.subcommand,
            r.steps.len(),
            fmt(r.steps.last().map(|s| s.loss)),
            if r.steps.len() > 1 { max_jump(&r.steps).to_string() } else { String::new() },
            fmt(r.test_acer)
        ));
    }
    out.write("summary.csv", table.as_bytes())?;
    print!("{table}");

    let losses: Vec<Series> = runs
        .iter()
        .filter(|r| !r.steps.is_empty())
        .map(|r| Series {
            name: r.label.clone(),
            points: r.steps.iter().map(|s| (s.step as f64, s.loss)).collect(),
        })
        .collect();
    if !losses.is_empty() {
        out.write("loss.svg", line_chart_svg("training loss", "step", "loss", &losses).as_bytes())?;
    }
    let rows: Vec<SweepRow> = runs.iter().flat_map(|r| r.sweep.iter().cloned()).collect();
    if !rows.is_empty() {
        out.write("sweep.csv", sweep_csv(&rows).as_bytes())?;
        out.write("sweep.svg", sweep_chart(&rows).as_bytes())?;
    }
    out.finish()?;
    Ok(true)
}

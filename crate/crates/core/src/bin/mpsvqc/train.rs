use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use mpsvqc::checkpoint::Checkpoint;
use mpsvqc::data::{EmbeddingDataset, SplitSpec};
use mpsvqc::metrics::{roc, roc_csv, MetricsReport};
use mpsvqc::mps::MpsProjector;
use mpsvqc::run::RunDir;
use mpsvqc::train::{
    stage1_init, stage1_scores, stage1_train, stage2_scores, stage2_train, EpochRecord,
    StageOneHead, TrainConfig, TrainReport,
};
use mpsvqc::vqc::{AnsatzSpec, VqcModel};
use mpsvqc::{Error, Result};

use crate::common::{
    display, load_splits, loss_chart, metrics_or_none, resolve_config,
    write_resolved, CircuitFlags, DataArgs, TrainFlags,
};
use crate::Global;

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub stage: Option<u8>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Stage-one checkpoint (required for stage 2).
    #[arg(long)]
    pub mps_checkpoint: Option<PathBuf>,
    /// Circuit description file; defaults to the config's circuit keys.
    #[arg(long)]
    pub circuit: Option<PathBuf>,
    #[arg(long)]
    pub d_fused: Option<usize>,
    #[arg(long)]
    pub nq: Option<usize>,
    #[command(flatten)]
    pub circuit_flags: CircuitFlags,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub mps_checkpoint: Option<PathBuf>,
    /// Stage-two checkpoint; without it the stage-one head is scored.
    #[arg(long)]
    pub vqc_checkpoint: Option<PathBuf>,
    #[arg(long, value_parser = ["train", "test", "all"], default_value = "test")]
    pub subset: String,
}

#[derive(Serialize)]
struct ResolvedTrain<'a> {
    train: &'a TrainConfig,
    split: &'a SplitSpec,
    data: String,
    mps_checkpoint: Option<String>,
    circuit: Option<&'a AnsatzSpec>,
}

#[derive(Serialize)]
pub struct TrainMetrics<'a> {
    pub stage: u8,
    pub epochs: &'a [EpochRecord],
    pub final_loss: Option<f64>,
    pub max_loss_jump: f64,
    pub params: usize,
    pub train: Option<MetricsReport>,
    pub test: Option<MetricsReport>,
}

pub fn load_stage_one(path: &Path) -> Result<(MpsProjector, StageOneHead)> {
    Checkpoint::load(path)?.to_stage_one()
}

/// Stage-two model plus the projector it was trained on; the recorded
/// projector checksum must match.
pub fn load_stage_two(mps: &MpsProjector, path: &Path) -> Result<VqcModel> {
    let ck = Checkpoint::load(path)?;
    let model = ck.to_stage_two()?;
    if ck.recorded_mps_checksum().as_deref() != Some(mps.checksum().as_str()) {
        return Err(Error::Config(format!(
            "{} was trained on a different projector checkpoint",
            path.display()
        )));
    }
    Ok(model)
}

fn write_training(
    run: &mut RunDir,
    stage: u8,
    report: &TrainReport,
    params: usize,
    train: Option<MetricsReport>,
    test: Option<MetricsReport>,
    test_scores: &[f64],
    test_labels: &[u8],
) -> Result<()> {
    run.write("report.csv", report.steps_csv().as_bytes())?;
    run.write_json(
        "metrics.json",
        &TrainMetrics {
            stage,
            epochs: &report.epochs,
            final_loss: report.final_loss(),
            max_loss_jump: report.max_loss_jump(),
            params,
            train,
            test,
        },
    )?;
    if let Ok(points) = roc(test_scores, test_labels) {
        run.write("roc.csv", roc_csv(&points).as_bytes())?;
    }
    let title = format!("stage {stage} training loss");
    run.write("loss.svg", loss_chart(report, &title).as_bytes())?;
    Ok(())
}

pub fn train(g: &Global, a: &TrainArgs) -> Result<bool> {
    let mut cfg = resolve_config(g, &a.flags)?;
    a.circuit_flags.apply(&mut cfg);
    if let Some(d) = a.d_fused {
        cfg.d_fused = d;
    }
    if let Some(n) = a.nq {
        cfg.n_qubits = n;
    }
    if let Some(s) = a.stage {
        cfg.stage = s;
    }
    cfg.validate()?;
    if cfg.stage == 2 && a.mps_checkpoint.is_none() {
        return Err(Error::Config("stage 2 needs --mps-checkpoint".into()));
    }
    let spec = match (&a.circuit, cfg.stage) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Some(AnsatzSpec::from_toml(&text)?)
        }
        (None, 2) => Some(cfg.ansatz()?),
        (None, _) => None,
    };
    let splits = load_splits(&a.data, cfg.seed)?;
    let mut run = RunDir::create(&g.out_dir("train"), "train", cfg.seed, g.force)?;
    run.add_input(&a.data.data)?;
    if let Some(p) = &a.mps_checkpoint {
        run.add_input(p)?;
    }
    if let Some(p) = &a.circuit {
        run.add_input(p)?;
    }
    let hash = write_resolved(
        &mut run,
        &ResolvedTrain {
            train: &cfg,
            split: &splits.spec,
            data: display(&a.data.data),
            mps_checkpoint: a.mps_checkpoint.as_deref().map(display),
            circuit: spec.as_ref(),
        },
    )?;

    if cfg.stage == 1 {
        let (mps, head) = stage1_init(splits.train.width(), &cfg)?;
        let mut last_good: Option<(MpsProjector, StageOneHead)> = None;
        let result = stage1_train(mps, head, &splits.train, &cfg, &mut |_, m, h| {
            last_good = Some((m.clone(), h.clone()));
            Ok(())
        });
        let out = match result {
            Ok(out) => out,
            Err(e @ Error::Diverged { .. }) => {
                if let Some((m, h)) = &last_good {
                    let ck = Checkpoint::stage_one(m, h, cfg.seed, &hash);
                    ck.save(&run.path("last-good.ckpt"))?;
                    eprintln!("saved last good epoch to {}", run.path("last-good.ckpt").display());
                }
                return Err(e);
            }
            Err(e) => return Err(e),
        };
        Checkpoint::stage_one(&out.mps, &out.head, cfg.seed, &hash).save(&run.path("stage1.ckpt"))?;
        run.record("stage1.ckpt");
        let train_scores = stage1_scores(&out.mps, &out.head, &splits.train)?;
        let test_scores = stage1_scores(&out.mps, &out.head, &splits.test)?;
        let train_m = metrics_or_none(&train_scores, splits.train.labels());
        let test_m = metrics_or_none(&test_scores, splits.test.labels());
        summarize(1, &out.report, train_m.as_ref(), test_m.as_ref());
        write_training(
            &mut run,
            1,
            &out.report,
            out.mps.param_count(),
            train_m,
            test_m,
            &test_scores,
            splits.test.labels(),
        )?;
    } else {
        let spec = spec.expect("stage 2 resolves a circuit");
        let ck_path = a.mps_checkpoint.as_ref().expect("checked above");
        let (mps, _) = load_stage_one(ck_path)?;
        let out = stage2_train(&mps, &spec, &splits.train, Some(&splits.test), &cfg)?;
        Checkpoint::stage_two(&out.model, &out.mps_checksum, cfg.seed, &hash)
            .save(&run.path("stage2.ckpt"))?;
        run.record("stage2.ckpt");
        run.write("circuit.toml", spec.to_toml().as_bytes())?;
        let train_scores = stage2_scores(&mps, &out.model, &splits.train)?;
        let test_scores = stage2_scores(&mps, &out.model, &splits.test)?;
        let train_m = metrics_or_none(&train_scores, splits.train.labels());
        let test_m = metrics_or_none(&test_scores, splits.test.labels());
        summarize(2, &out.report, train_m.as_ref(), test_m.as_ref());
        write_training(
            &mut run,
            2,
            &out.report,
            out.model.param_count(),
            train_m,
            test_m,
            &test_scores,
            splits.test.labels(),
        )?;
    }
    run.finish()?;
    Ok(true)
}

fn summarize(stage: u8, r: &TrainReport, train: Option<&MetricsReport>, test: Option<&MetricsReport>) {
    let acer = |m: Option<&MetricsReport>| m.map_or("n/a".to_string(), |m| format!("{:.4}", m.acer));
    println!(
        "stage {stage}: {} epochs, final loss {}, train ACER {}, test ACER {}",
        r.epochs.len(),
        r.final_loss().map_or("n/a".into(), |l| format!("{l:.6}")),
        acer(train),
        acer(test)
    );
    if let Some(m) = test {
        println!(
            "  test TPR@FPR={:e}: {:.4}, AUC {:.5}",
            m.tpr_at_fpr.target, m.tpr_at_fpr.value, m.auc
        );
    }
}

pub fn eval(g: &Global, a: &EvalArgs) -> Result<bool> {
    let Some(mps_path) = &a.mps_checkpoint else {
        return Err(Error::Config("eval needs --mps-checkpoint".into()));
    };
    let seed = g.seed.unwrap_or(0);
    let splits = load_splits(&a.data, seed)?;
    let data: &EmbeddingDataset = match a.subset.as_str() {
        "train" => &splits.train,
        "test" => &splits.test,
        _ => &splits.full,
    };
    let (mps, head) = load_stage_one(mps_path)?;
    let scores = match &a.vqc_checkpoint {
        Some(p) => stage2_scores(&mps, &load_stage_two(&mps, p)?, data)?,
        None => stage1_scores(&mps, &head, data)?,
    };
    let metrics = MetricsReport::compute(
        &scores,
        data.labels(),
        crate::common::THRESHOLD,
        crate::common::FPR_TARGET,
    )?;
    let mut run = RunDir::create(&g.out_dir("eval"), "eval", seed, g.force)?;
    run.add_input(&a.data.data)?;
    run.add_input(mps_path)?;
    if let Some(p) = &a.vqc_checkpoint {
        run.add_input(p)?;
    }
    write_resolved(
        &mut run,
        &serde_json::json!({
            "data": display(&a.data.data),
            "split": splits.spec,
            "subset": a.subset,
            "mps_checkpoint": display(mps_path),
            "vqc_checkpoint": a.vqc_checkpoint.as_deref().map(display),
        }),
    )?;
    run.write_json("metrics.json", &metrics)?;
    run.write("roc.csv", roc_csv(&roc(&scores, data.labels())?).as_bytes())?;
    let mut body = String::from("row,label,score\n");
    for (i, s) in scores.iter().enumerate() {
        body.push_str(&format!("{i},{},{s}\n", data.labels()[i]));
    }
    run.write("scores.csv", body.as_bytes())?;
    run.finish()?;
    println!(
        "{} rows: APCER {:.4} BPCER {:.4} ACER {:.4} TPR@FPR={:e} {:.4} AUC {:.5}",
        data.len(),
        metrics.apcer,
        metrics.bpcer,
        metrics.acer,
        metrics.tpr_at_fpr.target,
        metrics.tpr_at_fpr.value,
        metrics.auc
    );
    Ok(true)
}

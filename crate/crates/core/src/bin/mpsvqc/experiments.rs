use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use serde::{Deserialize, Serialize};

use mpsvqc::data::nested_subset;
use mpsvqc::metrics::MetricsReport;
use mpsvqc::mps::MpsProjector;
use mpsvqc::run::{file_digest, line_chart_svg, sha256_hex, RunDir, RunManifest, Series};
use mpsvqc::train::{stage1_init, stage1_train, stage2_scores, stage2_train, TrainConfig};
use mpsvqc::vqc::{log_grid, topology_discrepancy, AnsatzSpec, EntanglerKind, Topology, TopologyProbe};
use mpsvqc::{Error, Result};

use crate::common::{
    display, load_splits, metrics_or_none, parse, parse_list, resolve_config,
    write_resolved, DataArgs, TrainFlags, FPR_TARGET, THRESHOLD,
};
use crate::train::load_stage_one;
use crate::Global;

#[derive(Args)]
pub struct CompareArgs {
    #[arg(long, default_value_t = 4)]
    pub nq: usize,
    #[arg(long, value_parser = parse::<EntanglerKind>, default_value = "heisenberg")]
    pub entangler: EntanglerKind,
    /// Comma-separated τ values; defaults to 9 log-spaced points in [1e-3, 1e-1].
    #[arg(long)]
    pub tau_grid: Option<String>,
    /// Zero every single-qubit dressing angle.
    #[arg(long)]
    pub zero_dressings: bool,
    /// With --mps-checkpoint, also train both topologies and report test ACER.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub mps_checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub flags: TrainFlags,
}

/// Discrepancies at or below this are rounding noise; no slope is fitted.
const EXACT_TOL: f64 = 1e-12;

#[derive(Serialize)]
struct CompareSummary {
    n_qubits: usize,
    entangler: EntanglerKind,
    zero_dressings: bool,
    slope: Option<f64>,
    prefactor: f64,
    max_discrepancy: f64,
    acer: Option<BTreeMap<String, f64>>,
}

pub fn compare(g: &Global, a: &CompareArgs) -> Result<bool> {
    let taus = match &a.tau_grid {
        Some(s) => parse_list::<f64>(s)?,
        None => log_grid(1e-3, 1e-1, 9),
    };
    if taus.len() < 3 {
        return Err(Error::Config(format!(
            "--tau-grid needs at least 3 points for a slope, got {}",
            taus.len()
        )));
    }
    if let Some(t) = taus.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Error::Config(format!("τ values must be positive, got {t}")));
    }
    if a.data.is_some() != a.mps_checkpoint.is_some() {
        return Err(Error::Config("--data and --mps-checkpoint go together".into()));
    }
    let cfg = resolve_config(g, &a.flags)?;
    let fit = topology_discrepancy(&TopologyProbe {
        n_qubits: a.nq,
        entangler: a.entangler,
        taus: taus.clone(),
        seed: cfg.seed,
        zero_dressings: a.zero_dressings,
    })?;

    let mut run = RunDir::create(&g.out_dir("compare-topologies"), "compare-topologies", cfg.seed, g.force)?;
    write_resolved(
        &mut run,
        &serde_json::json!({
            "n_qubits": a.nq,
            "entangler": a.entangler,
            "taus": taus,
            "zero_dressings": a.zero_dressings,
            "seed": cfg.seed,
            "train": a.data.as_ref().map(|_| &cfg),
            "data": a.data.as_deref().map(display),
            "mps_checkpoint": a.mps_checkpoint.as_deref().map(display),
        }),
    )?;
    let mut table = String::from("tau,discrepancy\n");
    for (t, e) in fit.taus.iter().zip(&fit.errors) {
        table.push_str(&format!("{t:e},{e:e}\n"));
    }
    run.write("topology.csv", table.as_bytes())?;
    print!("{table}");

    let acer = match (&a.data, &a.mps_checkpoint) {
        (Some(data), Some(ck)) => {
            run.add_input(data)?;
            run.add_input(ck)?;
            let (mps, _) = load_stage_one(ck)?;
            let data_args = DataArgs {
                data: data.clone(),
                train_frac: 0.8,
                test_frac: 0.2,
            };
            let splits = load_splits(&data_args, cfg.seed)?;
            let mut out = BTreeMap::new();
            for topo in [Topology::Chain, Topology::Brickwall] {
                let cfg = TrainConfig {
                    stage: 2,
                    n_qubits: a.nq,
                    topology: topo,
                    entangler: a.entangler,
                    ..cfg.clone()
                };
                let spec = cfg.ansatz()?;
                let o = stage2_train(&mps, &spec, &splits.train, Some(&splits.test), &cfg)?;
                let s = stage2_scores(&mps, &o.model, &splits.test)?;
                let m = MetricsReport::compute(&s, splits.test.labels(), THRESHOLD, FPR_TARGET)?;
                println!("{topo}: test ACER {:.4}", m.acer);
                out.insert(topo.to_string(), m.acer);
            }
            Some(out)
        }
        _ => None,
    };
    let max_discrepancy = fit.errors.iter().cloned().fold(0.0, f64::max);
    let summary = CompareSummary {
        n_qubits: a.nq,
        entangler: a.entangler,
        zero_dressings: a.zero_dressings,
        slope: (fit.slope.is_finite() && max_discrepancy > EXACT_TOL).then_some(fit.slope),
        prefactor: fit.prefactor,
        max_discrepancy,
        acer,
    };
    match summary.slope {
        Some(s) => println!("fitted slope {s:.4} (prefactor {:.4e})", fit.prefactor),
        None => println!("no slope: max discrepancy {max_discrepancy:e} <= {EXACT_TOL:e}"),
    }
    run.write_json("summary.json", &summary)?;
    run.finish()?;
    Ok(true)
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated fused widths.
    #[arg(long, default_value = "4")]
    pub d_fused: String,
    /// Comma-separated qubit counts.
    #[arg(long, default_value = "4")]
    pub nq: String,
    /// Comma-separated training-data ratios in (0, 1].
    #[arg(long, default_value = "1.0")]
    pub data_ratio: String,
    #[arg(long, value_parser = parse::<EntanglerKind>)]
    pub entangler: Option<EntanglerKind>,
    #[command(flatten)]
    pub flags: TrainFlags,
}

/// One finished grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub d_fused: usize,
    pub nq: usize,
    pub ratio: f64,
    pub n_train: usize,
    pub acer: f64,
    pub tpr_at_fpr: f64,
    pub params: usize,
}

#[derive(Serialize)]
struct CellKey<'a> {
    train: &'a TrainConfig,
    ratio: f64,
    data_sha256: &'a str,
    train_frac: f64,
    test_frac: f64,
}

fn cell_dir(d: usize, nq: usize, ratio: f64) -> String {
    format!("cells/d{d}-nq{nq}-r{ratio}")
}

/// A previously finished cell with the same key, if any.
fn cached_cell(dir: &std::path::Path, key: &str) -> Option<SweepRow> {
    let m = RunManifest::load(dir).ok()?;
    if m.config.get("cell_hash")?.as_str()? != key {
        return None;
    }
    let text = std::fs::read_to_string(dir.join("row.json")).ok()?;
    serde_json::from_str(&text).ok()
}

pub fn sweep(g: &Global, a: &SweepArgs) -> Result<bool> {
    let widths: Vec<usize> = parse_list(&a.d_fused)?;
    let qubits: Vec<usize> = parse_list(&a.nq)?;
    let mut ratios: Vec<f64> = parse_list(&a.data_ratio)?;
    if widths.is_empty() || qubits.is_empty() || ratios.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    ratios.sort_by(f64::total_cmp);
    let mut base = resolve_config(g, &a.flags)?;
    if let Some(e) = a.entangler {
        base.entangler = e;
    }
    base.validate()?;
    let splits = load_splits(&a.data, base.seed)?;
    let data_sha = file_digest(&a.data.data)?;

    let mut run = RunDir::create(&g.out_dir("sweep"), "sweep", base.seed, g.force)?;
    run.add_input(&a.data.data)?;
    write_resolved(
        &mut run,
        &serde_json::json!({
            "train": base,
            "split": splits.spec,
            "data": display(&a.data.data),
            "d_fused": widths,
            "nq": qubits,
            "data_ratio": ratios,
        }),
    )?;

    let subsets: Vec<Vec<usize>> = ratios
        .iter()
        .map(|&r| nested_subset(&splits.train_idx, r, base.seed))
        .collect::<Result<_>>()?;
    for w in subsets.windows(2) {
        let nested = w[0].iter().all(|i| w[1].binary_search(i).is_ok());
        if !nested {
            return Err(Error::Numeric("data-ratio subsets are not nested".into()));
        }
    }
    let mut nesting = String::from("ratio,n_train,subset_of_next\n");
    for (k, (r, s)) in ratios.iter().zip(&subsets).enumerate() {
        let next = if k + 1 < ratios.len() { "true" } else { "" };
        nesting.push_str(&format!("{r},{},{next}\n", s.len()));
        log::info!("ratio {r}: {} training rows", s.len());
    }
    run.write("subsets.csv", nesting.as_bytes())?;

    let mut rows = Vec::new();
    let mut timing = String::from("d_fused,nq,ratio,cached,wall_clock_s\n");
    for &d in &widths {
        for (ri, &ratio) in ratios.iter().enumerate() {
            let train = splits.full.subset(&subsets[ri])?;
            let mut stage_one: Option<MpsProjector> = None;
            for &nq in &qubits {
                let cfg = TrainConfig {
                    d_fused: d,
                    n_qubits: nq,
                    topology: Topology::Chain,
                    ..base.clone()
                };
                cfg.validate()?;
                let key_json = serde_json::to_vec(&CellKey {
                    train: &cfg,
                    ratio,
                    data_sha256: &data_sha,
                    train_frac: splits.spec.train,
                    test_frac: splits.spec.test,
                })
                .map_err(|e| Error::Config(e.to_string()))?;
                let key = sha256_hex(&key_json);
                let name = cell_dir(d, nq, ratio);
                let dir = run.path(&name);
                let t0 = Instant::now();
                if let Some(row) = cached_cell(&dir, &key) {
                    log::info!("{name}: cached");
                    timing.push_str(&format!("{d},{nq},{ratio},true,0\n"));
                    rows.push(row);
                    continue;
                }
                if stage_one.is_none() {
                    let (m, h) = stage1_init(train.width(), &cfg)?;
                    stage_one = Some(stage1_train(m, h, &train, &cfg, &mut |_, _, _| Ok(()))?.mps);
                }
                let mps = stage_one.as_ref().expect("trained above");
                let spec: AnsatzSpec = cfg.ansatz()?;
                let out = stage2_train(mps, &spec, &train, Some(&splits.test), &cfg)?;
                let scores = stage2_scores(mps, &out.model, &splits.test)?;
                let m = metrics_or_none(&scores, splits.test.labels()).ok_or_else(|| {
                    Error::Metric("test split needs both classes for sweep metrics".into())
                })?;
                let row = SweepRow {
                    d_fused: d,
                    nq,
                    ratio,
                    n_train: train.len(),
                    acer: m.acer,
                    tpr_at_fpr: m.tpr_at_fpr.value,
                    params: mps.param_count() + out.model.param_count(),
                };
                let mut cell = RunDir::create(&dir, "sweep-cell", cfg.seed, true)?;
                cell.set_config(&serde_json::json!({ "cell_hash": key, "train": cfg, "ratio": ratio }))?;
                cell.write_json("metrics.json", &m)?;
                cell.write_json("row.json", &row)?;
                cell.finish()?;
                let secs = t0.elapsed().as_secs_f64();
                timing.push_str(&format!("{d},{nq},{ratio},false,{secs:.3}\n"));
                println!("{name}: ACER {:.4} TPR@FPR {:.4} params {}", row.acer, row.tpr_at_fpr, row.params);
                rows.push(row);
            }
        }
    }
    for r in &rows {
        for k in ["metrics.json", "row.json", "manifest.json"] {
            run.record(&format!("{}/{k}", cell_dir(r.d_fused, r.nq, r.ratio)));
        }
    }
    run.write("sweep.csv", sweep_csv(&rows).as_bytes())?;
    run.write("sweep.svg", sweep_chart(&rows).as_bytes())?;
    std::fs::write(run.path("timing.csv"), timing).map_err(|e| Error::io(run.path("timing.csv"), e))?;
    run.finish()?;
    Ok(true)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("d_fused,nq,ratio,n_train,acer,tpr_at_fpr,params\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.d_fused, r.nq, r.ratio, r.n_train, r.acer, r.tpr_at_fpr, r.params
        ));
    }
    s
}

/// ACER against data ratio, one line per `(d_fused, nq)`.
pub fn sweep_chart(rows: &[SweepRow]) -> String {
    let mut groups: BTreeMap<(usize, usize), Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.d_fused, r.nq)).or_default().push((r.ratio, r.acer));
    }
    let series: Vec<Series> = groups
        .into_iter()
        .map(|((d, nq), points)| Series {
            name: format!("D={d} Nq={nq}"),
            points,
        })
        .collect();
    line_chart_svg("ACER vs training-data ratio", "data ratio", "ACER", &series)
}

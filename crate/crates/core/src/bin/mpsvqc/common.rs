use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::Serialize;

use mpsvqc::data::{split, EmbeddingDataset, SplitSpec};
use mpsvqc::metrics::MetricsReport;
use mpsvqc::mps::MpsMode;
use mpsvqc::run::{sha256_hex, RunDir};
use mpsvqc::train::{TrainConfig, TrainReport};
use mpsvqc::vqc::{EntanglerKind, Topology};
use mpsvqc::{Error, Result};

use crate::Global;

/// Operating threshold and FPR target of every reported metric.
pub const THRESHOLD: f64 = 0.5;
pub const FPR_TARGET: f64 = 1e-3;

/// clap adapter for the library's `FromStr` types.
pub fn parse<T: FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|e| Error::Config(format!("bad list entry `{t}`: {e}")))
        })
        .collect()
}

/// Training overrides shared by `train`, `compare-topologies` and `sweep`.
#[derive(Args, Debug, Clone, Default)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub eta_max: Option<f64>,
    #[arg(long)]
    pub eta_min: Option<f64>,
    #[arg(long)]
    pub clip: Option<f64>,
    #[arg(long, value_parser = parse::<MpsMode>)]
    pub mode: Option<MpsMode>,
    #[arg(long)]
    pub chi_init: Option<usize>,
    #[arg(long)]
    pub chi_set: Option<usize>,
    #[arg(long)]
    pub truncate_every: Option<usize>,
}

/// Circuit overrides for commands that train a single circuit family.
#[derive(Args, Debug, Clone, Default)]
pub struct CircuitFlags {
    #[arg(long, value_parser = parse::<Topology>)]
    pub topology: Option<Topology>,
    #[arg(long, value_parser = parse::<EntanglerKind>)]
    pub entangler: Option<EntanglerKind>,
}

impl CircuitFlags {
    pub fn apply(&self, c: &mut TrainConfig) {
        if let Some(t) = self.topology {
            c.topology = t;
        }
        if let Some(e) = self.entangler {
            c.entangler = e;
        }
    }
}

/// Defaults, then the config file, then flags.
pub fn resolve_config(g: &Global, f: &TrainFlags) -> Result<TrainConfig> {
    let mut c = match &g.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            toml::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => TrainConfig::default(),
    };
    macro_rules! apply {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = f.$flag.clone() { c.$field = v; })*
        };
    }
    apply!(epochs => epochs, batch_size => batch_size, eta_max => eta_max, eta_min => eta_min,
        clip => clip, mode => mode, chi_init => chi_init, chi_set => chi_set,
        truncate_every => truncate_every);
    if let Some(s) = g.seed {
        c.seed = s;
    }
    Ok(c)
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Embedding dataset (.mmeb or .csv).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 0.2)]
    pub test_frac: f64,
}

pub struct Splits {
    pub spec: SplitSpec,
    pub train_idx: Vec<usize>,
    pub full: EmbeddingDataset,
    pub train: EmbeddingDataset,
    pub test: EmbeddingDataset,
}

pub fn load_splits(a: &DataArgs, seed: u64) -> Result<Splits> {
    let full = EmbeddingDataset::load(&a.data)?;
    let spec = SplitSpec {
        train: a.train_frac,
        test: a.test_frac,
        seed,
        ..Default::default()
    };
    let (tr, te) = split(&full, &spec)?;
    Ok(Splits {
        train: full.subset(&tr)?,
        test: full.subset(&te)?,
        train_idx: tr,
        spec,
        full,
    })
}

/// Metrics are undefined for single-class score sets; those report `null`.
pub fn metrics_or_none(scores: &[f64], labels: &[u8]) -> Option<MetricsReport> {
    MetricsReport::compute(scores, labels, THRESHOLD, FPR_TARGET).ok()
}

/// Writes `config-resolved.json`, records it in the manifest and returns
/// its digest for checkpoint headers.
pub fn write_resolved<T: Serialize>(run: &mut RunDir, resolved: &T) -> Result<String> {
    run.set_config(resolved)?;
    let path = run.write_json("config-resolved.json", resolved)?;
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn loss_chart(report: &TrainReport, title: &str) -> String {
    let series = mpsvqc::run::Series {
        name: "step loss".into(),
        points: report
            .steps
            .iter()
            .map(|s| (s.step as f64, s.loss))
            .collect(),
    };
    mpsvqc::run::line_chart_svg(title, "step", "loss", &[series])
}

pub fn display(p: &Path) -> String {
    p.display().to_string()
}

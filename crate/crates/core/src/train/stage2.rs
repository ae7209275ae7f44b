use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::stage1::encode_all;
use super::{
    acer_at, clip_gradient, optimizer_step, EpochRecord, OptimizerState, StepRecord, TrainConfig,
    TrainReport,
};
use crate::data::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::mps::{projector_feature, MpsProjector};
use crate::vqc::{AnsatzSpec, VqcModel};

pub struct StageTwoOutcome {
    pub model: VqcModel,
    pub report: TrainReport,
    pub mps_checksum: String,
}

const SHUFFLE_STREAM: u64 = 0x5eed_0002;

/// Frozen projector features for every row.
pub fn stage2_features(mps: &MpsProjector, data: &EmbeddingDataset) -> Result<Vec<Vec<f64>>> {
    encode_all(data)?
        .par_iter()
        .map(|x| projector_feature(mps, x))
        .collect()
}

fn standardization(features: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = features[0].len();
    let n = features.len() as f64;
    let mut mean = vec![0.0; d];
    for h in features {
        for (m, x) in mean.iter_mut().zip(h) {
            *m += x / n;
        }
    }
    let mut var = vec![0.0; d];
    for h in features {
        for k in 0..d {
            var[k] += (h[k] - mean[k]).powi(2) / n;
        }
    }
    let scale = var
        .into_iter()
        .map(|v| if v.sqrt() > 1e-8 { v.sqrt() } else { 1.0 })
        .collect();
    (mean, scale)
}

fn scores(model: &VqcModel, features: &[Vec<f64>]) -> Result<Vec<f64>> {
    features.par_iter().map(|h| model.predict(h)).collect()
}

/// Stage two: the projector is only read (its checksum is verified after
/// training); features are computed once and the circuit classifier is
/// trained on them with binary cross-entropy.
pub fn stage2_train(
    mps: &MpsProjector,
    spec: &AnsatzSpec,
    train: &EmbeddingDataset,
    test: Option<&EmbeddingDataset>,
    cfg: &TrainConfig,
) -> Result<StageTwoOutcome> {
    cfg.validate()?;
    spec.validate()?;
    let checksum = mps.checksum();
    let feats = stage2_features(mps, train)?;
    let test_feats = test.map(|t| stage2_features(mps, t)).transpose()?;
    let (mean, scale) = standardization(&feats);
    let mut model = VqcModel::init(
        spec,
        mps.d_fused(),
        mean,
        scale,
        cfg.circuit_init_scale,
        cfg.seed,
    )?;
    let labels = train.labels();
    let n = train.len();
    let mut schedule = cfg.schedule(n)?;
    let mut params = model.params_flat();
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.adam, params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..n).collect();
    let mut report = TrainReport::default();
    let mut last_good = None;
    let mut step = 0;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let per: Vec<_> = chunk
                .par_iter()
                .map(|&i| model.loss_grad(&feats[i], labels[i] as usize))
                .collect::<Result<Vec<_>>>()?;
            let inv = 1.0 / chunk.len() as f64;
            let mut grad = vec![0.0; params.len()];
            let mut loss = 0.0;
            for g in &per {
                loss += g.loss;
                for (a, b) in grad.iter_mut().zip(&g.flat) {
                    *a += b;
                }
            }
            loss *= inv;
            grad.iter_mut().for_each(|g| *g *= inv);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged {
                    step,
                    last_good_epoch: last_good,
                });
            }
            let (clipped, pre) = clip_gradient(&grad, cfg.clip)?;
            let post = clipped.iter().map(|x| x * x).sum::<f64>().sqrt();
            let lr = schedule.next_rate();
            optimizer_step(&mut params, &clipped, &mut opt, lr)?;
            model.set_params_flat(&params)?;
            report.steps.push(StepRecord {
                step,
                epoch,
                loss,
                lr,
                grad_norm_pre: pre,
                grad_norm_post: post,
            });
            loss_sum += loss;
            batches += 1;
            step += 1;
        }
        let train_acer = acer_at(&scores(&model, &feats)?, labels, 0.5);
        let test_acer = match (&test_feats, test) {
            (Some(f), Some(t)) => Some(acer_at(&scores(&model, f)?, t.labels(), 0.5)),
            _ => None,
        };
        report.epochs.push(EpochRecord {
            epoch,
            mean_loss: loss_sum / batches.max(1) as f64,
            train_acer,
            test_acer,
            max_bond: None,
            discarded_weight: None,
        });
        log::info!(
            "stage2 epoch {epoch}: loss {:.6} train acer {train_acer:.4} test acer {test_acer:?}",
            loss_sum / batches.max(1) as f64
        );
        last_good = Some(epoch);
    }
    if mps.checksum() != checksum {
        return Err(Error::Numeric("frozen projector changed during stage two".into()));
    }
    Ok(StageTwoOutcome {
        model,
        report,
        mps_checksum: checksum,
    })
}

/// Liveness scores of a trained classifier on a dataset.
pub fn stage2_scores(mps: &MpsProjector, model: &VqcModel, data: &EmbeddingDataset) -> Result<Vec<f64>> {
    scores(model, &stage2_features(mps, data)?)
}

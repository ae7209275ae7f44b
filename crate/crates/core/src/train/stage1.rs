use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    acer_at, clip_gradient, optimizer_step, EpochRecord, OptimizerState, StageOneHead, StepRecord,
    TrainConfig, TrainReport,
};
use crate::data::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::mps::{
    angle_encode, grad_mps, init_mps, stage_one_predict, MpsInit, MpsMode, MpsProjector,
    ProductState,
};

pub struct StageOneOutcome {
    pub mps: MpsProjector,
    pub head: StageOneHead,
    pub report: TrainReport,
}

/// Seed offset separating the shuffle stream from parameter init.
const SHUFFLE_STREAM: u64 = 0x5eed_0001;

pub(crate) fn encode_all(data: &EmbeddingDataset) -> Result<Vec<ProductState>> {
    (0..data.len())
        .into_par_iter()
        .map(|i| angle_encode(&data.row(i)))
        .collect()
}

fn live_scores(mps: &MpsProjector, head: &StageOneHead, xs: &[ProductState]) -> Result<Vec<f64>> {
    xs.par_iter()
        .map(|x| stage_one_predict(mps, head, x).map(|p| p[1]))
        .collect()
}

fn pack(mps: &MpsProjector, head: &StageOneHead) -> Vec<f64> {
    let mut v = mps.params_flat();
    v.extend_from_slice(head.weights());
    v
}

fn unpack(flat: &[f64], mps: &mut MpsProjector, head: &mut StageOneHead) -> Result<()> {
    let k = mps.param_count();
    mps.set_params_flat(&flat[..k])?;
    head.weights_mut().copy_from_slice(&flat[k..]);
    Ok(())
}

/// Stage-one liveness probabilities for every row.
pub fn stage1_scores(mps: &MpsProjector, head: &StageOneHead, data: &EmbeddingDataset) -> Result<Vec<f64>> {
    live_scores(mps, head, &encode_all(data)?)
}

/// Initial projector (seeded) and zero head for a dataset of this width.
pub fn stage1_init(width: usize, cfg: &TrainConfig) -> Result<(MpsProjector, StageOneHead)> {
    cfg.validate()?;
    let mps = init_mps(&MpsInit {
        length: width,
        chi_init: cfg.chi_init,
        d_fused: cfg.d_fused,
        center: cfg.center.unwrap_or(width / 2),
        mode: cfg.mode,
        seed: cfg.seed,
    })?;
    Ok((mps, StageOneHead::zeros(cfg.classes, cfg.d_fused)))
}

/// Stage one: projector plus temporary dense head under softmax
/// cross-entropy. `on_epoch` sees every completed epoch's state, so a
/// caller can keep a last-good snapshot for the divergence guard.
pub fn stage1_train(
    mps: MpsProjector,
    head: StageOneHead,
    data: &EmbeddingDataset,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(usize, &MpsProjector, &StageOneHead) -> Result<()>,
) -> Result<StageOneOutcome> {
    cfg.validate()?;
    if mps.len() != data.width() {
        return Err(Error::Dimension(format!(
            "projector has {} sites, rows have {} features",
            mps.len(),
            data.width()
        )));
    }
    if head.d_fused() != mps.d_fused() {
        return Err(Error::Dimension("head width differs from the projector output".into()));
    }
    let (mut mps, mut head) = (mps, head);
    let xs = encode_all(data)?;
    let labels = data.labels();
    let n = data.len();

    let mut schedule = cfg.schedule(n)?;
    let mut params = pack(&mps, &head);
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.adam, params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..n).collect();
    let mut report = TrainReport::default();
    let mut last_good: Option<usize> = None;
    let mut step = 0;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&ProductState, usize)> =
                chunk.iter().map(|&i| (&xs[i], labels[i] as usize)).collect();
            let g = grad_mps(&mps, &head, &batch).map_err(|e| match e {
                Error::Numeric(_) => Error::Diverged {
                    step,
                    last_good_epoch: last_good,
                },
                other => other,
            })?;
            if !g.loss.is_finite() {
                return Err(Error::Diverged {
                    step,
                    last_good_epoch: last_good,
                });
            }
            let mut flat = g.mps.flat;
            flat.extend_from_slice(&g.head);
            let (clipped, pre) = clip_gradient(&flat, cfg.clip)?;
            let post = clipped.iter().map(|x| x * x).sum::<f64>().sqrt();
            let lr = schedule.next_rate();
            optimizer_step(&mut params, &clipped, &mut opt, lr)?;
            unpack(&params, &mut mps, &mut head)?;
            report.steps.push(StepRecord {
                step,
                epoch,
                loss: g.loss,
                lr,
                grad_norm_pre: pre,
                grad_norm_post: post,
            });
            loss_sum += g.loss;
            batches += 1;
            step += 1;
        }

        let mut discarded = None;
        if mps.mode() == MpsMode::Standard {
            let shape_before: Vec<usize> = mps.bond_extents();
            let last = epoch + 1 == cfg.epochs;
            let due = cfg.truncate_every > 0 && (epoch + 1) % cfg.truncate_every == 0;
            if (due || last) && mps.max_bond() > cfg.chi_set {
                let (t, rep) = mps.sweep_truncate(cfg.chi_set)?;
                discarded = Some(rep.total_discarded());
                mps = t;
            } else {
                mps = mps.canonicalize(mps.center())?;
            }
            params = pack(&mps, &head);
            if mps.bond_extents() != shape_before {
                opt = OptimizerState::new(cfg.optimizer, cfg.adam, params.len());
            }
        }

        let scores = live_scores(&mps, &head, &xs)?;
        report.epochs.push(EpochRecord {
            epoch,
            mean_loss: loss_sum / batches.max(1) as f64,
            train_acer: acer_at(&scores, labels, 0.5),
            test_acer: None,
            max_bond: Some(mps.max_bond()),
            discarded_weight: discarded,
        });
        log::info!(
            "stage1 epoch {epoch}: loss {:.6} acer {:.4} max_bond {}",
            loss_sum / batches.max(1) as f64,
            report.epochs.last().unwrap().train_acer,
            mps.max_bond()
        );
        on_epoch(epoch, &mps, &head)?;
        last_good = Some(epoch);
    }
    Ok(StageOneOutcome { mps, head, report })
}

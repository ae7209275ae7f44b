//! Reverse-mode gradients of the stage-one objective (projector → dense
//! head → softmax cross-entropy) with respect to every projector parameter.

use rayon::prelude::*;

use super::contract::{carry_step, contract_physical, site_dims};
use super::encode::ProductState;
use super::{MpsMode, MpsProjector};
use crate::error::{Error, Result};
use crate::tensor::NORMALIZE_EPS;
use crate::train::{cross_entropy, softmax, StageOneHead};

/// Gradient in the layout of [`MpsProjector::params_flat`].
#[derive(Debug, Clone, PartialEq)]
pub struct MpsGrad {
    pub flat: Vec<f64>,
    site_offsets: Vec<usize>,
}

impl MpsGrad {
    fn zeros(mps: &MpsProjector) -> Self {
        let mut site_offsets = Vec::with_capacity(mps.len() + 1);
        let mut k = 0;
        for t in mps.sites() {
            site_offsets.push(k);
            k += t.len();
        }
        site_offsets.push(k);
        Self {
            flat: vec![0.0; mps.param_count()],
            site_offsets,
        }
    }

    pub fn site(&self, n: usize) -> &[f64] {
        &self.flat[self.site_offsets[n]..self.site_offsets[n + 1]]
    }

    fn site_mut(&mut self, n: usize) -> &mut [f64] {
        let (a, b) = (self.site_offsets[n], self.site_offsets[n + 1]);
        &mut self.flat[a..b]
    }

    fn tail_mut(&mut self) -> &mut [f64] {
        let k = *self.site_offsets.last().unwrap();
        &mut self.flat[k..]
    }

    pub fn norm(&self) -> f64 {
        self.flat.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Batch-mean loss and gradients of the stage-one objective.
#[derive(Debug, Clone)]
pub struct StageOneGrad {
    pub loss: f64,
    pub mps: MpsGrad,
    pub head: Vec<f64>,
}

struct SampleGrad {
    loss: f64,
    mps: Vec<f64>,
    head: Vec<f64>,
}

/// Feature vector fed to the stage-one head for one sample.
pub fn projector_feature(mps: &MpsProjector, phi: &ProductState) -> Result<Vec<f64>> {
    match mps.mode() {
        MpsMode::Standard => super::contract_sequential(mps, phi).map(|f| f.values),
        MpsMode::Activated => super::activated_forward(mps, phi).map(|f| f.values),
    }
}

/// Class probabilities of the stage-one model.
pub fn stage_one_predict(
    mps: &MpsProjector,
    head: &StageOneHead,
    phi: &ProductState,
) -> Result<Vec<f64>> {
    let h = projector_feature(mps, phi)?;
    Ok(softmax(&head.logits(&h)))
}

/// Head gradient and upstream gradient w.r.t. the feature vector.
fn head_backward(head: &StageOneHead, h: &[f64], label: usize) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let logits = head.logits(h);
    let loss = cross_entropy(&logits, label)?;
    let mut gz = softmax(&logits);
    gz[label] -= 1.0;
    let d = head.d_fused();
    let mut g_head = vec![0.0; head.classes() * d];
    let mut g_h = vec![0.0; d];
    for (k, &g) in gz.iter().enumerate() {
        for j in 0..d {
            g_head[k * d + j] = g * h[j];
            g_h[j] += g * head.weights()[k * d + j];
        }
    }
    Ok((loss, g_head, g_h))
}

fn standard_sample(
    mps: &MpsProjector,
    head: &StageOneHead,
    phi: &ProductState,
    label: usize,
) -> Result<SampleGrad> {
    let len = mps.len();
    // forward with caches
    let mut inputs: Vec<(Vec<f64>, usize)> = Vec::with_capacity(len);
    let mut blocks = Vec::with_capacity(len);
    let mut raws: Vec<Vec<f64>> = Vec::with_capacity(len);
    let mut norms = Vec::with_capacity(len);
    let mut v = vec![1.0];
    let mut lv = 1;
    for n in 0..len {
        let (left, right, feat) = site_dims(mps, n);
        let block = contract_physical(mps.site(n).data(), left, right, feat, phi.site(n));
        let (u, lo) = carry_step(&v, lv, &block, left, right, feat);
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let c = norm + NORMALIZE_EPS;
        let y: Vec<f64> = u.iter().map(|x| x / c).collect();
        inputs.push((v, lv));
        blocks.push(block);
        raws.push(u);
        norms.push(norm);
        v = y;
        lv = lo;
    }
    let (loss, g_head, mut g_y) = head_backward(head, &v, label)?;

    let mut grad = MpsGrad::zeros(mps);
    for n in (0..len).rev() {
        let (left, right, feat) = site_dims(mps, n);
        let u = &raws[n];
        let norm = norms[n];
        let c = norm + NORMALIZE_EPS;
        let dot: f64 = u.iter().zip(&g_y).map(|(a, b)| a * b).sum();
        let g_u: Vec<f64> = if norm > 0.0 {
            u.iter()
                .zip(&g_y)
                .map(|(&ui, &gi)| gi / c - ui * dot / (norm * c * c))
                .collect()
        } else {
            g_y.iter().map(|g| g / c).collect()
        };

        let (vin, lvin) = &inputs[n];
        let lvin = *lvin;
        let lo = lvin.max(feat);
        let block = &blocks[n];
        let mut g_block = vec![0.0; left * right * feat];
        let mut g_v = vec![0.0; left * lvin];
        for a in 0..left {
            for b in 0..right {
                for l in 0..lo {
                    let iv = a * lvin + if lvin > 1 { l } else { 0 };
                    let ib = (a * right + b) * feat + if feat > 1 { l } else { 0 };
                    let gu = g_u[b * lo + l];
                    g_block[ib] += vin[iv] * gu;
                    g_v[iv] += block[ib] * gu;
                }
            }
        }
        let phi_n = phi.site(n);
        let gs = grad.site_mut(n);
        let inner = right * feat;
        for a in 0..left {
            for (s, &p) in phi_n.iter().enumerate() {
                let dst = &mut gs[(a * 2 + s) * inner..(a * 2 + s + 1) * inner];
                let src = &g_block[a * inner..(a + 1) * inner];
                for (o, &g) in dst.iter_mut().zip(src) {
                    *o = p * g;
                }
            }
        }
        g_y = g_v;
    }
    Ok(SampleGrad {
        loss,
        mps: grad.flat,
        head: g_head,
    })
}

fn activated_sample(
    mps: &MpsProjector,
    head_w: &StageOneHead,
    phi: &ProductState,
    label: usize,
) -> Result<SampleGrad> {
    let len = mps.len();
    let chi = mps.bond_extents()[0];
    let d = mps.d_fused();
    let mut carries = Vec::with_capacity(len + 1);
    let mut blocks = Vec::with_capacity(len);
    let mut tanhs = Vec::with_capacity(len);
    let mut v = vec![0.0; chi];
    for n in 0..len {
        let block = contract_physical(mps.site(n).data(), chi, chi, 1, phi.site(n));
        let mut delta = mps.biases()[n].clone();
        for a in 0..chi {
            for b in 0..chi {
                delta[b] += v[a] * block[a * chi + b];
            }
        }
        let t: Vec<f64> = delta.iter().map(|x| x.tanh()).collect();
        carries.push(v.clone());
        for (vb, tb) in v.iter_mut().zip(&t) {
            *vb += tb;
        }
        blocks.push(block);
        tanhs.push(t);
    }
    let feat_head = mps.head().expect("activated projector has a head").data();
    let mut h = vec![0.0; d];
    for a in 0..chi {
        for l in 0..d {
            h[l] += v[a] * feat_head[a * d + l];
        }
    }
    let (loss, g_head_w, g_h) = head_backward(head_w, &h, label)?;

    let mut grad = MpsGrad::zeros(mps);
    let mut g_v = vec![0.0; chi];
    {
        let tail = grad.tail_mut();
        for a in 0..chi {
            for l in 0..d {
                tail[a * d + l] = v[a] * g_h[l];
                g_v[a] += feat_head[a * d + l] * g_h[l];
            }
        }
    }
    let bias_base = chi * d;
    for n in (0..len).rev() {
        let t = &tanhs[n];
        let g_delta: Vec<f64> = g_v
            .iter()
            .zip(t)
            .map(|(g, tb)| g * (1.0 - tb * tb))
            .collect();
        grad.tail_mut()[bias_base + n * chi..bias_base + (n + 1) * chi].copy_from_slice(&g_delta);
        let vin = &carries[n];
        let block = &blocks[n];
        let phi_n = phi.site(n);
        let mut g_prev = g_v.clone();
        let gs = grad.site_mut(n);
        for a in 0..chi {
            for b in 0..chi {
                let gb = vin[a] * g_delta[b];
                gs[(a * 2) * chi + b] = phi_n[0] * gb;
                gs[(a * 2 + 1) * chi + b] = phi_n[1] * gb;
                g_prev[a] += block[a * chi + b] * g_delta[b];
            }
        }
        g_v = g_prev;
    }
    Ok(SampleGrad {
        loss,
        mps: grad.flat,
        head: g_head_w,
    })
}

/// Batch-mean stage-one loss and its gradients, by reverse accumulation
/// through the exact forward computation (normalization in standard mode,
/// tanh residual updates in activated mode).
///
/// Per-sample work may run on a thread pool; the reduction is an ordered
/// sum so the result does not depend on the worker count.
pub fn grad_mps(
    mps: &MpsProjector,
    head: &StageOneHead,
    batch: &[(&ProductState, usize)],
) -> Result<StageOneGrad> {
    if batch.is_empty() {
        return Err(Error::Config("gradient batch is empty".into()));
    }
    if head.d_fused() != mps.d_fused() {
        return Err(Error::Dimension(format!(
            "head expects d_fused {}, projector has {}",
            head.d_fused(),
            mps.d_fused()
        )));
    }
    let per_sample: Vec<Result<SampleGrad>> = batch
        .par_iter()
        .map(|(phi, label)| {
            if phi.len() != mps.len() {
                return Err(Error::Dimension(format!(
                    "product state has {} sites, mps has {}",
                    phi.len(),
                    mps.len()
                )));
            }
            match mps.mode() {
                MpsMode::Standard => standard_sample(mps, head, phi, *label),
                MpsMode::Activated => activated_sample(mps, head, phi, *label),
            }
        })
        .collect();
    let mut total = MpsGrad::zeros(mps);
    let mut head_grad = vec![0.0; head.weights().len()];
    let mut loss = 0.0;
    for s in per_sample {
        let s = s?;
        loss += s.loss;
        for (t, g) in total.flat.iter_mut().zip(&s.mps) {
            *t += g;
        }
        for (t, g) in head_grad.iter_mut().zip(&s.head) {
            *t += g;
        }
    }
    let inv = 1.0 / batch.len() as f64;
    total.flat.iter_mut().for_each(|g| *g *= inv);
    head_grad.iter_mut().for_each(|g| *g *= inv);
    if let Some(k) = total.flat.iter().position(|g| !g.is_finite()) {
        let site = total
            .site_offsets
            .iter()
            .rposition(|&o| o <= k)
            .unwrap_or(0)
            .min(mps.len() - 1);
        return Err(Error::Numeric(format!(
            "non-finite gradient at parameter {k} (site {site})"
        )));
    }
    Ok(StageOneGrad {
        loss: loss * inv,
        mps: total,
        head: head_grad,
    })
}

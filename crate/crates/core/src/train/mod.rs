//! Two-stage training: the projector with a temporary dense head, then the
//! circuit classifier on frozen projector features.

mod loss;
mod optim;
mod report;
mod schedule;
mod stage1;
mod stage2;

pub use loss::{bce_from_probability, clip_gradient, cross_entropy, sigmoid, softmax, BCE_EPS};
pub use optim::{optimizer_step, AdamParams, OptimizerKind, OptimizerState};
pub use report::{EpochRecord, StepRecord, TrainReport};
pub use schedule::{cosine_lr, WarmRestarts};
pub use stage1::{stage1_init, stage1_scores, stage1_train, StageOneOutcome};
pub use stage2::{stage2_features, stage2_scores, stage2_train, StageTwoOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mps::MpsMode;
use crate::vqc::{CartanOrder, EntanglerKind, Topology};

/// Dense `K × D` map from the projector output to class logits, used only
/// during stage one.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOneHead {
    classes: usize,
    d_fused: usize,
    weights: Vec<f64>,
}

impl StageOneHead {
    pub fn zeros(classes: usize, d_fused: usize) -> Self {
        Self {
            classes,
            d_fused,
            weights: vec![0.0; classes * d_fused],
        }
    }

    pub fn from_weights(classes: usize, d_fused: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != classes * d_fused {
            return Err(Error::Dimension(format!(
                "head needs {} weights, got {}",
                classes * d_fused,
                weights.len()
            )));
        }
        Ok(Self {
            classes,
            d_fused,
            weights,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn d_fused(&self) -> usize {
        self.d_fused
    }

    /// Row-major `(class, feature)`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn logits(&self, h: &[f64]) -> Vec<f64> {
        self.weights
            .chunks(self.d_fused)
            .map(|row| row.iter().zip(h).map(|(w, x)| w * x).sum())
            .collect()
    }
}

/// Every tunable of both training stages. Keys match the run-config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub stage: u8,
    pub epochs: usize,
    pub batch_size: usize,
    pub eta_max: f64,
    pub eta_min: f64,
    /// Restart cycle length in steps; `None` means one epoch of steps.
    pub restart_period: Option<usize>,
    pub restart_mult: usize,
    pub clip: f64,
    pub seed: u64,
    pub classes: usize,
    pub optimizer: OptimizerKind,
    pub adam: AdamParams,

    pub mode: MpsMode,
    pub chi_init: usize,
    pub chi_set: usize,
    pub d_fused: usize,
    /// Orthogonality center; `None` means `L / 2`.
    pub center: Option<usize>,
    /// Truncating sweep every this many epochs (standard mode); 0 disables.
    pub truncate_every: usize,

    pub n_qubits: usize,
    pub topology: Topology,
    pub entangler: EntanglerKind,
    pub cartan_order: CartanOrder,
    /// Measured qubits; `None` means all.
    pub measured: Option<Vec<usize>>,
    /// Scale of the random initial circuit parameters.
    pub circuit_init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            stage: 1,
            epochs: 20,
            batch_size: 64,
            eta_max: 1e-2,
            eta_min: 1e-5,
            restart_period: None,
            restart_mult: 1,
            clip: 1.0,
            seed: 0,
            classes: 2,
            optimizer: OptimizerKind::Adam,
            adam: AdamParams::default(),
            mode: MpsMode::Standard,
            chi_init: 4,
            chi_set: 4,
            d_fused: 4,
            center: None,
            truncate_every: 5,
            n_qubits: 4,
            topology: Topology::Chain,
            entangler: EntanglerKind::Cnot,
            cartan_order: CartanOrder::RightFirst,
            measured: None,
            circuit_init_scale: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.stage != 1 && self.stage != 2 {
            return bad(format!("stage must be 1 or 2, got {}", self.stage));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.eta_min >= 0.0 && self.eta_min <= self.eta_max && self.eta_max.is_finite()) {
            return bad(format!(
                "need 0 <= eta_min <= eta_max, got {} and {}",
                self.eta_min, self.eta_max
            ));
        }
        if self.restart_period == Some(0) {
            return bad("restart_period must be at least 1".into());
        }
        if self.restart_mult == 0 {
            return bad("restart_mult must be at least 1".into());
        }
        if !(self.clip > 0.0) {
            return bad(format!("clip must be positive, got {}", self.clip));
        }
        if self.classes != 2 {
            return bad(format!("only binary tasks are supported, got {} classes", self.classes));
        }
        if self.chi_init == 0 || self.chi_set == 0 || self.d_fused == 0 {
            return bad("chi_init, chi_set and d_fused must be at least 1".into());
        }
        if self.n_qubits == 0 || self.n_qubits > crate::vqc::MAX_QUBITS {
            return bad(format!(
                "n_qubits must be in 1..={}, got {}",
                crate::vqc::MAX_QUBITS,
                self.n_qubits
            ));
        }
        if !(self.circuit_init_scale >= 0.0) {
            return bad("circuit_init_scale must be non-negative".into());
        }
        Ok(())
    }

    /// Circuit described by the circuit keys.
    pub fn ansatz(&self) -> Result<crate::vqc::AnsatzSpec> {
        let mut spec = crate::vqc::AnsatzSpec::uniform(self.n_qubits, self.topology, self.entangler);
        spec.cartan_order = self.cartan_order;
        if let Some(m) = &self.measured {
            spec.measured = m.clone();
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn steps_per_epoch(&self, n: usize) -> usize {
        n.div_ceil(self.batch_size)
    }

    pub(crate) fn schedule(&self, n: usize) -> Result<WarmRestarts> {
        let period = self
            .restart_period
            .unwrap_or_else(|| self.steps_per_epoch(n).max(1));
        WarmRestarts::new(self.eta_min, self.eta_max, period, self.restart_mult)
    }
}

/// Fraction-based ACER at a fixed probability threshold, without the
/// single-class guard of the metrics module.
pub(crate) fn acer_at(scores: &[f64], labels: &[u8], threshold: f64) -> f64 {
    let (mut fp, mut na, mut fneg, mut nb) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &y) in scores.iter().zip(labels) {
        if y == 1 {
            nb += 1;
            if s < threshold {
                fneg += 1;
            }
        } else {
            na += 1;
            if s >= threshold {
                fp += 1;
            }
        }
    }
    let rate = |k: usize, n: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    0.5 * (rate(fp, na) + rate(fneg, nb))
}

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
    pub grad_norm_pre: f64,
    pub grad_norm_post: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    /// ACER at the 0.5 probability threshold on the training rows.
    pub train_acer: f64,
    pub test_acer: Option<f64>,
    /// Largest virtual bond after the epoch's gauge/truncation step
    /// (stage one only).
    pub max_bond: Option<usize>,
    /// Weight discarded by a truncating sweep run at the end of this epoch.
    pub discarded_weight: Option<f64>,
}

/// Per-step and per-epoch training log.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
}

impl TrainReport {
    /// `report.csv`: `step,epoch,loss,lr,grad_norm_pre,grad_norm_post`.
    pub fn steps_csv(&self) -> String {
        let mut s = String::from("step,epoch,loss,lr,grad_norm_pre,grad_norm_post\n");
        for r in &self.steps {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.step, r.epoch, r.loss, r.lr, r.grad_norm_pre, r.grad_norm_post
            ));
        }
        s
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mean_loss)
    }

    /// Largest absolute change between consecutive step losses.
    pub fn max_loss_jump(&self) -> f64 {
        self.steps
            .windows(2)
            .map(|w| (w[1].loss - w[0].loss).abs())
            .fold(0.0, f64::max)
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `η_min + ½(η_max − η_min)(1 + cos(π t / T_r))`.
pub fn cosine_lr(t: usize, period: usize, eta_min: f64, eta_max: f64) -> Result<f64> {
    if period == 0 || t > period {
        return Err(Error::Schedule { t, period });
    }
    let x = std::f64::consts::PI * t as f64 / period as f64;
    Ok(eta_min + 0.5 * (eta_max - eta_min) * (1.0 + x.cos()))
}

/// Cosine annealing with warm restarts, advanced once per optimizer step.
///
/// The cycle counter runs `0..=T_r`; the step after `t = T_r` restarts at
/// `t = 0` with `T_r` multiplied by the restart multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmRestarts {
    pub eta_min: f64,
    pub eta_max: f64,
    pub period: usize,
    pub mult: usize,
    t: usize,
}

impl WarmRestarts {
    pub fn new(eta_min: f64, eta_max: f64, period: usize, mult: usize) -> Result<Self> {
        if period == 0 {
            return Err(Error::Config("restart period must be at least 1".into()));
        }
        if mult == 0 {
            return Err(Error::Config("restart multiplier must be at least 1".into()));
        }
        if !(eta_min <= eta_max) || eta_min < 0.0 {
            return Err(Error::Config(format!(
                "need 0 <= eta_min <= eta_max, got {eta_min} and {eta_max}"
            )));
        }
        Ok(Self {
            eta_min,
            eta_max,
            period,
            mult,
            t: 0,
        })
    }

    /// Rate for the current step, then advances the counter.
    pub fn next_rate(&mut self) -> f64 {
        let eta = cosine_lr(self.t, self.period, self.eta_min, self.eta_max)
            .expect("counter stays within the cycle");
        if self.t == self.period {
            self.t = 0;
            self.period *= self.mult;
        } else {
            self.t += 1;
        }
        eta
    }
}

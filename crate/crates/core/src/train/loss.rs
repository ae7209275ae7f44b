use crate::error::{Error, Result};

/// Probability clamp applied before taking logs in the binary loss.
pub const BCE_EPS: f64 = 1e-12;

/// Softmax with max-subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// `−log softmax(logits)[label]` via log-sum-exp.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(Error::Label {
            label,
            classes: logits.len(),
        });
    }
    if let Some(z) = logits.iter().find(|z| !z.is_finite()) {
        return Err(Error::Numeric(format!("non-finite logit {z}")));
    }
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    Ok((lse - logits[label]).max(0.0))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of a probability, clamped to `[ε, 1−ε]`.
pub fn bce_from_probability(p: f64, label: usize) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    if label == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Rescales `g` onto the ball of radius `delta` when its norm exceeds it.
/// Returns the clipped vector and the pre-clip norm.
pub fn clip_gradient(g: &[f64], delta: f64) -> Result<(Vec<f64>, f64)> {
    if !(delta > 0.0) {
        return Err(Error::Config(format!("clip threshold must be positive, got {delta}")));
    }
    if let Some(k) = g.iter().position(|x| !x.is_finite()) {
        return Err(Error::Numeric(format!("non-finite gradient entry {k}")));
    }
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > delta {
        let s = delta / norm;
        Ok((g.iter().map(|x| x * s).collect(), norm))
    } else {
        Ok((g.to_vec(), norm))
    }
}

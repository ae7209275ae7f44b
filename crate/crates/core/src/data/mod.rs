//! Tri-modal embedding datasets: synthetic generation, the MMEB1 binary
//! container, a CSV mode, and seeded splits.

mod io;
mod split;

pub use io::{write_atomic, MMEB_MAGIC, MMEB_VERSION};
pub use split::{nested_subset, split, SplitSpec};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODALITIES: [&str; 3] = ["rgb", "depth", "ir"];

/// Largest `f32` strictly below one.
const F32_BELOW_ONE: f32 = 1.0 - f32::EPSILON / 2.0;

/// Parameters of [`gen_synthetic`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub n: usize,
    pub d_emb: usize,
    pub rho: f64,
    pub margin: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            n: 1000,
            d_emb: 8,
            rho: 0.5,
            margin: 2.0,
            sigma: 0.3,
            seed: 0,
        }
    }
}

impl GenParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.d_emb == 0 {
            return Err(Error::Config("d_emb must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho must be in [0, 1), got {}", self.rho)));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::Config(format!("margin must be >= 0, got {}", self.margin)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }

    /// Leading coordinates of each modality that carry the class signal.
    pub fn class_coords(&self) -> usize {
        (self.d_emb / 4).max(1)
    }
}

/// Labeled rows of three equal-width modality embeddings, stored as `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    d_emb: usize,
    labels: Vec<u8>,
    /// Row-major; each row is rgb, depth, ir.
    features: Vec<f32>,
    pub provenance: String,
}

impl EmbeddingDataset {
    /// Validates labels and the open-interval contract.
    pub fn new(d_emb: usize, labels: Vec<u8>, features: Vec<f32>, provenance: String) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Config("dataset has no rows".into()));
        }
        if d_emb == 0 {
            return Err(Error::Config("d_emb must be at least 1".into()));
        }
        if features.len() != labels.len() * 3 * d_emb {
            return Err(Error::Dimension(format!(
                "{} rows of width {} need {} values, got {}",
                labels.len(),
                3 * d_emb,
                labels.len() * 3 * d_emb,
                features.len()
            )));
        }
        if let Some(k) = labels.iter().position(|&y| y > 1) {
            return Err(Error::Format(format!("row {k}: label {} is not 0 or 1", labels[k])));
        }
        let width = 3 * d_emb;
        if let Some(k) = features.iter().position(|v| !(v.abs() < 1.0)) {
            return Err(Error::Range {
                row: k / width,
                column: k % width,
                value: features[k] as f64,
            });
        }
        Ok(Self {
            d_emb,
            labels,
            features,
            provenance,
        })
    }

    pub fn d_emb(&self) -> usize {
        self.d_emb
    }

    /// Features per row (`3 · d_emb`).
    pub fn width(&self) -> usize {
        3 * self.d_emb
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn row_f32(&self, i: usize) -> &[f32] {
        let w = self.width();
        &self.features[i * w..(i + 1) * w]
    }

    /// Concatenated rgb, depth, ir features promoted to `f64`.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.row_f32(i).iter().map(|&x| x as f64).collect()
    }

    pub fn modality(&self, i: usize, m: usize) -> &[f32] {
        &self.row_f32(i)[m * self.d_emb..(m + 1) * self.d_emb]
    }

    pub fn count_live(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let w = self.width();
        let mut labels = Vec::with_capacity(indices.len());
        let mut features = Vec::with_capacity(indices.len() * w);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Dimension(format!("row {i} out of range ({})", self.len())));
            }
            labels.push(self.labels[i]);
            features.extend_from_slice(self.row_f32(i));
        }
        Self::new(self.d_emb, labels, features, format!("{} [subset]", self.provenance))
    }
}

fn to_open_interval(x: f64) -> f32 {
    (x as f32).clamp(-F32_BELOW_ONE, F32_BELOW_ONE)
}

/// Synthetic tri-modal embeddings with a tunable shared latent.
///
/// The first `max(1, d_emb/4)` coordinates of modality `m` sit at
/// `±(margin/2)·u_m` (sign by class, `u_m` a random unit vector); the rest
/// carry `√ρ·z_shared + √(1−ρ)·z_m`. Noise `σ` is added everywhere and the
/// result is squashed by `tanh`. Labels alternate, so the classes differ in
/// size by at most one.
pub fn gen_synthetic(p: &GenParams) -> Result<EmbeddingDataset> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut normal = move || -> f64 { StandardNormal.sample(&mut rng) };
    let k = p.class_coords();
    let d = p.d_emb;
    let dirs: Vec<Vec<f64>> = (0..3)
        .map(|_| {
            let v: Vec<f64> = (0..k).map(|_| normal()).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            v.into_iter().map(|x| x / n).collect()
        })
        .collect();
    let (a, b) = (p.rho.sqrt(), (1.0 - p.rho).sqrt());
    let mut labels = Vec::with_capacity(p.n);
    let mut features = Vec::with_capacity(p.n * 3 * d);
    for i in 0..p.n {
        let y = (i % 2) as u8;
        let sign = if y == 1 { 1.0 } else { -1.0 };
        let shared: Vec<f64> = (0..d).map(|_| normal()).collect();
        for dir in &dirs {
            for c in 0..d {
                let own = normal();
                let pre = if c < k {
                    sign * 0.5 * p.margin * dir[c]
                } else {
                    a * shared[c] + b * own
                };
                let noisy = pre + p.sigma * normal();
                features.push(to_open_interval(noisy.tanh()));
            }
        }
        labels.push(y);
    }
    EmbeddingDataset::new(
        d,
        labels,
        features,
        format!(
            "synthetic n={} d_emb={} rho={} margin={} sigma={} seed={}",
            p.n, p.d_emb, p.rho, p.margin, p.sigma, p.seed
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_balanced() {
        let p = GenParams {
            n: 101,
            ..Default::default()
        };
        let a = gen_synthetic(&p).unwrap();
        assert_eq!(a, gen_synthetic(&p).unwrap());
        let live = a.count_live();
        assert!((live as i64 - (a.len() - live) as i64).abs() <= 1);
        assert!(a.features.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn invalid_parameters() {
        for p in [
            GenParams { n: 0, ..Default::default() },
            GenParams { rho: 1.0, ..Default::default() },
            GenParams { rho: -0.1, ..Default::default() },
            GenParams { margin: -1.0, ..Default::default() },
            GenParams { sigma: f64::NAN, ..Default::default() },
        ] {
            assert!(matches!(gen_synthetic(&p), Err(Error::Config(_))));
        }
    }

    #[test]
    fn saturated_values_stay_inside() {
        let p = GenParams {
            n: 20,
            margin: 80.0,
            sigma: 0.0,
            ..Default::default()
        };
        let d = gen_synthetic(&p).unwrap();
        assert!(d.features.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn range_violation_is_located() {
        let mut f = vec![0.0f32; 6];
        f[4] = 1.5;
        match EmbeddingDataset::new(1, vec![0, 1], f, String::new()) {
            Err(Error::Range { row, column, value }) => {
                assert_eq!((row, column), (1, 1));
                assert_eq!(value, 1.5);
            }
            other => panic!("{other:?}"),
        }
    }
}

use super::encode::ProductState;
use super::{MpsMode, MpsProjector, PHYS_DIM};
use crate::error::{Error, Result};
use crate::tensor::NORMALIZE_EPS;

/// Longest chain the dense reference contraction accepts.
pub const FULL_CONTRACTION_MAX_LEN: usize = 12;

/// Output of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedFeature {
    pub values: Vec<f64>,
    /// Sum of `ln(‖u‖ + ε)` over every normalization applied.
    pub norm_log: f64,
}

impl FusedFeature {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Unit-norm copy (zero stays zero).
    pub fn direction(&self) -> Vec<f64> {
        let n = self.norm();
        if n == 0.0 {
            return self.values.clone();
        }
        self.values.iter().map(|x| x / n).collect()
    }
}

/// Per-site diagnostics of a sequential contraction.
#[derive(Debug, Clone)]
pub struct SequentialTrace {
    pub feature: FusedFeature,
    /// Norm of each intermediate before normalization.
    pub raw_norms: Vec<f64>,
    /// Norm of each intermediate as carried to the next site.
    pub carried_norms: Vec<f64>,
}

/// Row-major `(left, right, feat)` block `Σ_s A[a, s, b, f] φ_s`.
pub(crate) fn contract_physical(
    data: &[f64],
    left: usize,
    right: usize,
    feat: usize,
    phi: [f64; 2],
) -> Vec<f64> {
    let block = right * feat;
    let mut out = vec![0.0; left * block];
    for a in 0..left {
        let base = a * PHYS_DIM * block;
        let dst = &mut out[a * block..(a + 1) * block];
        for (s, &p) in phi.iter().enumerate() {
            let src = &data[base + s * block..base + (s + 1) * block];
            for (o, &x) in dst.iter_mut().zip(src) {
                *o += p * x;
            }
        }
    }
    out
}

/// Shapes of one site: `(left, right, feat)`.
pub(crate) fn site_dims(mps: &MpsProjector, n: usize) -> (usize, usize, usize) {
    let s = mps.site(n).shape();
    (s[0], s[2], if s.len() == 4 { s[3] } else { 1 })
}

/// `u[b, l] = Σ_a v[a, l_v] B[a, b, l_f]`, where exactly one of the carry
/// width `lv` and the block feature width `feat` may exceed one.
pub(crate) fn carry_step(
    v: &[f64],
    lv: usize,
    block: &[f64],
    left: usize,
    right: usize,
    feat: usize,
) -> (Vec<f64>, usize) {
    let lo = lv.max(feat);
    let mut u = vec![0.0; right * lo];
    for a in 0..left {
        for b in 0..right {
            for l in 0..lo {
                let vv = v[a * lv + if lv > 1 { l } else { 0 }];
                let bb = block[(a * right + b) * feat + if feat > 1 { l } else { 0 }];
                u[b * lo + l] += vv * bb;
            }
        }
    }
    (u, lo)
}

fn check_input(mps: &MpsProjector, phi: &ProductState) -> Result<()> {
    if phi.len() != mps.len() {
        return Err(Error::Dimension(format!(
            "product state has {} sites, mps has {}",
            phi.len(),
            mps.len()
        )));
    }
    Ok(())
}

/// Reference contraction: materializes `Ψ` and the dense product vector and
/// sums over every physical configuration.
pub fn contract_full(mps: &MpsProjector, phi: &ProductState) -> Result<FusedFeature> {
    if mps.mode() != MpsMode::Standard {
        return Err(Error::Config("contract_full requires standard mode".into()));
    }
    check_input(mps, phi)?;
    if mps.len() > FULL_CONTRACTION_MAX_LEN {
        return Err(Error::OracleScale {
            max: FULL_CONTRACTION_MAX_LEN,
            got: mps.len(),
        });
    }
    let psi = mps.materialize()?;
    let dense = phi.to_dense();
    let d = mps.d_fused();
    let mut values = vec![0.0; d];
    for (cfg, &amp) in dense.iter().enumerate() {
        for (l, out) in values.iter_mut().enumerate() {
            *out += psi.data()[cfg * d + l] * amp;
        }
    }
    Ok(FusedFeature {
        values,
        norm_log: 0.0,
    })
}

/// Left-to-right contraction with optional per-site Frobenius normalization.
pub fn contract_sequential_trace(
    mps: &MpsProjector,
    phi: &ProductState,
    normalize: bool,
) -> Result<SequentialTrace> {
    if mps.mode() != MpsMode::Standard {
        return Err(Error::Config(
            "sequential contraction requires standard mode".into(),
        ));
    }
    check_input(mps, phi)?;
    let mut v = vec![1.0];
    let mut lv = 1;
    let mut norm_log = 0.0;
    let mut raw_norms = Vec::with_capacity(mps.len());
    let mut carried_norms = Vec::with_capacity(mps.len());
    for n in 0..mps.len() {
        let (left, right, feat) = site_dims(mps, n);
        let block = contract_physical(mps.site(n).data(), left, right, feat, phi.site(n));
        let (mut u, lo) = carry_step(&v, lv, &block, left, right, feat);
        let raw = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        raw_norms.push(raw);
        if normalize {
            let c = raw + NORMALIZE_EPS;
            u.iter_mut().for_each(|x| *x /= c);
            norm_log += c.ln();
            if u.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite intermediate at site {n} after normalization"
                )));
            }
            carried_norms.push(raw / c);
        } else {
            carried_norms.push(raw);
        }
        v = u;
        lv = lo;
    }
    Ok(SequentialTrace {
        feature: FusedFeature {
            values: v,
            norm_log,
        },
        raw_norms,
        carried_norms,
    })
}

/// Normalized left-to-right contraction; the output is the carried vector
/// after the last site and `norm_log` records the stripped scale.
pub fn contract_sequential(mps: &MpsProjector, phi: &ProductState) -> Result<FusedFeature> {
    contract_sequential_trace(mps, phi, true).map(|t| t.feature)
}

/// Nonlinear residual recurrence
/// `v ← v + tanh(Σ A v φ + b)` from a zero carry, followed by the feature
/// head.
pub fn activated_forward(mps: &MpsProjector, phi: &ProductState) -> Result<FusedFeature> {
    if mps.mode() != MpsMode::Activated {
        return Err(Error::Config("activated_forward requires activated mode".into()));
    }
    check_input(mps, phi)?;
    let chi = mps.bond_extents()[0];
    let mut v = vec![0.0; chi];
    for n in 0..mps.len() {
        let block = contract_physical(mps.site(n).data(), chi, chi, 1, phi.site(n));
        let bias = &mps.biases()[n];
        let mut delta = bias.clone();
        for a in 0..chi {
            let va = v[a];
            if va == 0.0 {
                continue;
            }
            for (b, d) in delta.iter_mut().enumerate() {
                *d += va * block[a * chi + b];
            }
        }
        for (vb, d) in v.iter_mut().zip(&delta) {
            *vb += d.tanh();
        }
    }
    let head = mps.head().expect("validated activated projector has a head");
    let d = mps.d_fused();
    let mut values = vec![0.0; d];
    for a in 0..chi {
        for (l, out) in values.iter_mut().enumerate() {
            *out += v[a] * head.data()[a * d + l];
        }
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite activated output".into()));
    }
    Ok(FusedFeature {
        values,
        norm_log: 0.0,
    })
}

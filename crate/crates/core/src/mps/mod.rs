//! Matrix product state projector used as the fusion-compression stage.
//!
//! Site `n` holds a tensor labeled `(a{n}, s{n}, a{n+1})`; the site at the
//! orthogonality center additionally carries the feature leg `l` of extent
//! `d_fused`. In activated mode the chain has a single hidden width χ on
//! every bond (including the boundaries), each site owns a bias vector,
//! and the feature leg lives on a separate `χ × d_fused` head attached to
//! the center site.

mod contract;
mod encode;
mod grad;

pub use contract::{
    activated_forward, contract_full, contract_sequential, contract_sequential_trace,
    FusedFeature, SequentialTrace, FULL_CONTRACTION_MAX_LEN,
};
pub use encode::{angle_encode, concat_modalities, ProductState};
pub use grad::{grad_mps, projector_feature, stage_one_predict, MpsGrad, StageOneGrad};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{
    left_isometry_residual, lq_split, qr_split, right_isometry_residual, svd_truncate,
};
use crate::tensor::{contract as tcontract, Tensor};

/// Physical leg extent; angle encoding produces two-component sites.
pub const PHYS_DIM: usize = 2;
pub const FEATURE_LABEL: &str = "l";
/// Input label of the activated-mode feature head.
pub const HEAD_INPUT_LABEL: &str = "v";
const SCRATCH_BOND: &str = "__bond";
const INIT_NOISE: f64 = 0.01;

pub fn bond_label(n: usize) -> String {
    format!("a{n}")
}

pub fn phys_label(n: usize) -> String {
    format!("s{n}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MpsMode {
    Standard,
    Activated,
}

impl std::str::FromStr for MpsMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(MpsMode::Standard),
            "activated" => Ok(MpsMode::Activated),
            other => Err(Error::Config(format!(
                "unknown mps mode `{other}` (expected standard|activated)"
            ))),
        }
    }
}

impl std::fmt::Display for MpsMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MpsMode::Standard => "standard",
            MpsMode::Activated => "activated",
        })
    }
}

/// Chain of site tensors with one feature-output leg.
#[derive(Debug, Clone, PartialEq)]
pub struct MpsProjector {
    sites: Vec<Tensor>,
    center: usize,
    d_fused: usize,
    mode: MpsMode,
    biases: Vec<Vec<f64>>,
    head: Option<Tensor>,
}

/// Parameters for [`init_mps`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MpsInit {
    pub length: usize,
    pub chi_init: usize,
    pub d_fused: usize,
    pub center: usize,
    pub mode: MpsMode,
    pub seed: u64,
}

/// Canonical-form residuals per site. Entries for the center are zero.
#[derive(Debug, Clone)]
pub struct CanonicalResiduals {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl CanonicalResiduals {
    pub fn max(&self) -> f64 {
        self.left
            .iter()
            .chain(&self.right)
            .copied()
            .fold(0.0, f64::max)
    }
}

/// One local SVD update performed by [`MpsProjector::sweep_truncate`].
#[derive(Debug, Clone)]
pub struct TruncationStep {
    /// Bond index `k` of the bond between sites `k-1` and `k`.
    pub bond: usize,
    pub kept: usize,
    pub discarded_weight: f64,
    /// Squared Frobenius error of the truncated local factorization.
    pub residual_sq: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TruncationReport {
    pub steps: Vec<TruncationStep>,
}

impl TruncationReport {
    pub fn total_discarded(&self) -> f64 {
        self.steps.iter().map(|s| s.discarded_weight).sum()
    }

    /// Discarded weight summed per bond index (length `L + 1`).
    pub fn per_bond(&self, length: usize) -> Vec<f64> {
        let mut out = vec![0.0; length + 1];
        for s in &self.steps {
            out[s.bond] += s.discarded_weight;
        }
        out
    }
}

fn site_labels(n: usize, with_feature: bool) -> Vec<String> {
    let mut l = vec![bond_label(n), phys_label(n), bond_label(n + 1)];
    if with_feature {
        l.push(FEATURE_LABEL.to_string());
    }
    l
}

fn pow2_capped(k: usize) -> usize {
    if k >= usize::BITS as usize - 1 {
        usize::MAX
    } else {
        1usize << k
    }
}

/// Bond extents bounded by the exact-representation limit of a d = 2 chain.
fn capped_extents(length: usize, chi: usize) -> Vec<usize> {
    (0..=length)
        .map(|k| {
            if k == 0 || k == length {
                1
            } else {
                chi.min(pow2_capped(k)).min(pow2_capped(length - k))
            }
        })
        .collect()
}

impl MpsProjector {
    /// Assembles a projector from raw parts, validating every structural
    /// invariant.
    pub fn from_parts(
        sites: Vec<Tensor>,
        center: usize,
        d_fused: usize,
        mode: MpsMode,
        biases: Vec<Vec<f64>>,
        head: Option<Tensor>,
    ) -> Result<Self> {
        let mps = Self {
            sites,
            center,
            d_fused,
            mode,
            biases,
            head,
        };
        mps.validate()?;
        Ok(mps)
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.sites.len();
        if len == 0 {
            return Err(Error::Config("mps needs at least one site".into()));
        }
        if self.center >= len {
            return Err(Error::Config(format!(
                "center {} outside chain of length {len}",
                self.center
            )));
        }
        if self.d_fused == 0 {
            return Err(Error::Config("d_fused must be at least 1".into()));
        }
        let feature_on_site = self.mode == MpsMode::Standard;
        for (n, t) in self.sites.iter().enumerate() {
            let want = site_labels(n, feature_on_site && n == self.center);
            if t.labels() != want.as_slice() {
                return Err(Error::Config(format!(
                    "site {n} has labels {:?}, expected {want:?}",
                    t.labels()
                )));
            }
            if t.shape()[1] != PHYS_DIM {
                return Err(Error::Config(format!("site {n} physical extent must be 2")));
            }
            if want.len() == 4 && t.shape()[3] != self.d_fused {
                return Err(Error::Config(format!(
                    "feature leg extent {} != d_fused {}",
                    t.shape()[3],
                    self.d_fused
                )));
            }
            if n + 1 < len && t.shape()[2] != self.sites[n + 1].shape()[0] {
                return Err(Error::Config(format!(
                    "bond {} extents disagree: {} vs {}",
                    n + 1,
                    t.shape()[2],
                    self.sites[n + 1].shape()[0]
                )));
            }
        }
        let ext = self.bond_extents();
        match self.mode {
            MpsMode::Standard => {
                if ext[0] != 1 || ext[len] != 1 {
                    return Err(Error::Config("boundary bond extents must be 1".into()));
                }
                if self.head.is_some() || !self.biases.is_empty() {
                    return Err(Error::Config(
                        "standard mode carries no biases or separate head".into(),
                    ));
                }
            }
            MpsMode::Activated => {
                let chi = ext[0];
                if ext.iter().any(|&e| e != chi) {
                    return Err(Error::Config(format!(
                        "activated mode needs one uniform bond width, got {ext:?}"
                    )));
                }
                if self.biases.len() != len || self.biases.iter().any(|b| b.len() != chi) {
                    return Err(Error::Config(format!(
                        "activated mode needs {len} bias vectors of width {chi}"
                    )));
                }
                let head = self
                    .head
                    .as_ref()
                    .ok_or_else(|| Error::Config("activated mode needs a feature head".into()))?;
                if head.labels() != [HEAD_INPUT_LABEL, FEATURE_LABEL]
                    || head.shape() != [chi, self.d_fused]
                {
                    return Err(Error::Config(format!(
                        "feature head must be ({HEAD_INPUT_LABEL}, {FEATURE_LABEL}) with shape [{chi}, {}]",
                        self.d_fused
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn d_fused(&self) -> usize {
        self.d_fused
    }

    pub fn mode(&self) -> MpsMode {
        self.mode
    }

    pub fn sites(&self) -> &[Tensor] {
        &self.sites
    }

    pub fn site(&self, n: usize) -> &Tensor {
        &self.sites[n]
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn head(&self) -> Option<&Tensor> {
        self.head.as_ref()
    }

    /// Extents of bonds `0..=L`.
    pub fn bond_extents(&self) -> Vec<usize> {
        let mut ext: Vec<usize> = self.sites.iter().map(|t| t.shape()[0]).collect();
        ext.push(self.sites.last().map_or(1, |t| t.shape()[2]));
        ext
    }

    pub fn max_bond(&self) -> usize {
        self.bond_extents().into_iter().max().unwrap_or(1)
    }

    /// Number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.sites.iter().map(Tensor::len).sum::<usize>()
            + self.head.as_ref().map_or(0, Tensor::len)
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Parameters flattened as sites, then head, then biases.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for t in &self.sites {
            out.extend_from_slice(t.data());
        }
        if let Some(h) = &self.head {
            out.extend_from_slice(h.data());
        }
        for b in &self.biases {
            out.extend_from_slice(b);
        }
        out
    }

    /// Overwrites parameters from the layout of [`MpsProjector::params_flat`].
    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut k = 0;
        for t in &mut self.sites {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[k..k + n]);
            k += n;
        }
        if let Some(h) = &mut self.head {
            let n = h.len();
            h.data_mut().copy_from_slice(&flat[k..k + n]);
            k += n;
        }
        for b in &mut self.biases {
            let n = b.len();
            b.copy_from_slice(&flat[k..k + n]);
            k += n;
        }
        Ok(())
    }

    /// SHA-256 over mode, shapes and little-endian parameter bytes.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.mode.to_string().as_bytes());
        h.update((self.center as u64).to_le_bytes());
        for t in &self.sites {
            for &e in t.shape() {
                h.update((e as u64).to_le_bytes());
            }
        }
        for x in self.params_flat() {
            h.update(x.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    fn require_standard(&self, what: &str) -> Result<()> {
        if self.mode != MpsMode::Standard {
            return Err(Error::Config(format!("{what} requires standard mode")));
        }
        Ok(())
    }

    /// Isometry residuals `‖A†A − I‖_F` left of the center and
    /// `‖AA† − I‖_F` right of it.
    pub fn canonical_residuals(&self) -> Result<CanonicalResiduals> {
        self.require_standard("canonical residuals")?;
        let len = self.len();
        let mut left = vec![0.0; len];
        let mut right = vec![0.0; len];
        for n in 0..len {
            let a = bond_label(n);
            let s = phys_label(n);
            let b = bond_label(n + 1);
            if n < self.center {
                left[n] = left_isometry_residual(&self.sites[n], &[&a, &s], &[&b])?;
            } else if n > self.center {
                right[n] = right_isometry_residual(&self.sites[n], &[&a], &[&s, &b])?;
            }
        }
        Ok(CanonicalResiduals { left, right })
    }

    fn order_site(&self, n: usize, t: Tensor) -> Result<Tensor> {
        let with_l = t.has_label(FEATURE_LABEL);
        t.permuted(&site_labels(n, with_l))
    }

    /// Moves the (possibly feature-carrying) factor of site `n` into site
    /// `n + 1`, leaving site `n` left-isometric.
    fn shift_right_exact(&mut self, n: usize) -> Result<()> {
        let a = bond_label(n);
        let s = phys_label(n);
        let b = bond_label(n + 1);
        let site = &self.sites[n];
        let mut cols = vec![b.as_str()];
        if site.has_label(FEATURE_LABEL) {
            cols.push(FEATURE_LABEL);
        }
        let (q, r) = qr_split(site, &[&a, &s], &cols, SCRATCH_BOND)?;
        let next = tcontract(&r, &self.sites[n + 1], &[(&b, &b)])?.relabel(SCRATCH_BOND, &b)?;
        self.sites[n] = q.relabel(SCRATCH_BOND, &b)?;
        self.sites[n + 1] = self.order_site(n + 1, next)?;
        Ok(())
    }

    /// Mirror of [`Self::shift_right_exact`] towards site `n - 1`.
    fn shift_left_exact(&mut self, n: usize) -> Result<()> {
        let a = bond_label(n);
        let s = phys_label(n);
        let b = bond_label(n + 1);
        let site = &self.sites[n];
        let mut rows = vec![a.as_str()];
        if site.has_label(FEATURE_LABEL) {
            rows.push(FEATURE_LABEL);
        }
        let (l, q) = lq_split(site, &rows, &[&s, &b], SCRATCH_BOND)?;
        let prev = tcontract(&self.sites[n - 1], &l, &[(&a, &a)])?.relabel(SCRATCH_BOND, &a)?;
        self.sites[n] = q.relabel(SCRATCH_BOND, &a)?;
        self.sites[n - 1] = self.order_site(n - 1, prev)?;
        Ok(())
    }

    /// Brings the chain into mixed canonical form around `target`, moving
    /// the feature leg there. The represented map is unchanged.
    pub fn canonicalize(&self, target: usize) -> Result<MpsProjector> {
        self.require_standard("canonicalize")?;
        if target >= self.len() {
            return Err(Error::Config(format!(
                "target center {target} outside chain of length {}",
                self.len()
            )));
        }
        let mut out = self.clone();
        for n in 0..target {
            out.shift_right_exact(n)?;
        }
        for n in (target + 1..out.len()).rev() {
            out.shift_left_exact(n)?;
        }
        out.center = target;
        out.validate()?;
        Ok(out)
    }

    fn shift_right_truncating(&mut self, n: usize, chi_set: usize) -> Result<TruncationStep> {
        let a = bond_label(n);
        let s = phys_label(n);
        let b = bond_label(n + 1);
        let site = &self.sites[n];
        let mut cols = vec![b.as_str()];
        if site.has_label(FEATURE_LABEL) {
            cols.push(FEATURE_LABEL);
        }
        let res = svd_truncate(site, &[&a, &s], &cols, Some(chi_set), SCRATCH_BOND)?;
        let approx = tcontract(&res.us(), &res.v, &[(SCRATCH_BOND, SCRATCH_BOND)])?;
        let residual_sq = sq_distance(&approx.permuted(site.labels())?, site);
        let step = TruncationStep {
            bond: n + 1,
            kept: res.s.len(),
            discarded_weight: res.discarded_weight,
            residual_sq,
        };
        let next = tcontract(&res.sv(), &self.sites[n + 1], &[(&b, &b)])?
            .relabel(SCRATCH_BOND, &b)?;
        self.sites[n] = res.u.relabel(SCRATCH_BOND, &b)?;
        self.sites[n + 1] = self.order_site(n + 1, next)?;
        Ok(step)
    }

    fn shift_left_truncating(&mut self, n: usize, chi_set: usize) -> Result<TruncationStep> {
        let a = bond_label(n);
        let s = phys_label(n);
        let b = bond_label(n + 1);
        let site = &self.sites[n];
        let mut rows = vec![a.as_str()];
        if site.has_label(FEATURE_LABEL) {
            rows.push(FEATURE_LABEL);
        }
        let res = svd_truncate(site, &rows, &[&s, &b], Some(chi_set), SCRATCH_BOND)?;
        let approx = tcontract(&res.us(), &res.v, &[(SCRATCH_BOND, SCRATCH_BOND)])?;
        let residual_sq = sq_distance(&approx.permuted(site.labels())?, site);
        let step = TruncationStep {
            bond: n,
            kept: res.s.len(),
            discarded_weight: res.discarded_weight,
            residual_sq,
        };
        let prev = tcontract(&self.sites[n - 1], &res.us(), &[(&a, &a)])?
            .relabel(SCRATCH_BOND, &a)?;
        self.sites[n] = res.v.relabel(SCRATCH_BOND, &a)?;
        self.sites[n - 1] = self.order_site(n - 1, prev)?;
        Ok(step)
    }

    /// Truncating sweep: one left-to-right pass over the whole chain
    /// followed by a right-to-left pass back to the current center, each
    /// bond keeping at most `chi_set` singular values.
    pub fn sweep_truncate(&self, chi_set: usize) -> Result<(MpsProjector, TruncationReport)> {
        self.require_standard("sweep_truncate")?;
        if chi_set < 1 {
            return Err(Error::Config("chi_set must be at least 1".into()));
        }
        let home = self.center;
        let mut out = self.canonicalize(0)?;
        let mut report = TruncationReport::default();
        for n in 0..out.len() - 1 {
            report.steps.push(out.shift_right_truncating(n, chi_set)?);
        }
        for n in (home + 1..out.len()).rev() {
            report.steps.push(out.shift_left_truncating(n, chi_set)?);
        }
        out.center = home;
        out.validate()?;
        Ok((out, report))
    }

    /// Full tensor `Ψ` with labels `(s0, …, s{L-1}, l)`. Exponential in L.
    pub fn materialize(&self) -> Result<Tensor> {
        self.require_standard("materialize")?;
        let len = self.len();
        if len > FULL_CONTRACTION_MAX_LEN {
            return Err(Error::OracleScale {
                max: FULL_CONTRACTION_MAX_LEN,
                got: len,
            });
        }
        let mut acc = self.sites[0].clone();
        for n in 1..len {
            let b = bond_label(n);
            acc = tcontract(&acc, &self.sites[n], &[(&b, &b)])?;
        }
        let mut order: Vec<String> = vec![bond_label(0)];
        order.extend((0..len).map(phys_label));
        order.push(bond_label(len));
        order.push(FEATURE_LABEL.to_string());
        let p = acc.permuted(&order)?;
        let mut labels: Vec<String> = (0..len).map(phys_label).collect();
        labels.push(FEATURE_LABEL.to_string());
        let mut shape = vec![PHYS_DIM; len];
        shape.push(self.d_fused);
        Tensor::new(&labels, &shape, p.into_data())
    }
}

fn sq_distance(a: &Tensor, b: &Tensor) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).powi(2))
        .sum()
}

/// Identity-embedded chain plus seeded Gaussian noise of scale 0.01.
///
/// Standard mode bonds are capped at `min(chi_init, 2^k, 2^(L-k))` and the
/// result is canonicalized around `center`. Activated mode uses width
/// `chi_init` on every bond.
pub fn init_mps(cfg: &MpsInit) -> Result<MpsProjector> {
    if cfg.length == 0 || cfg.chi_init == 0 || cfg.d_fused == 0 {
        return Err(Error::Config(
            "length, chi_init and d_fused must be at least 1".into(),
        ));
    }
    if cfg.center >= cfg.length {
        return Err(Error::Config(format!(
            "center {} outside chain of length {}",
            cfg.center, cfg.length
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut noise = || -> f64 { INIT_NOISE * Distribution::<f64>::sample(&StandardNormal, &mut rng) };
    let extents = match cfg.mode {
        MpsMode::Standard => capped_extents(cfg.length, cfg.chi_init),
        MpsMode::Activated => vec![cfg.chi_init; cfg.length + 1],
    };
    let mut sites = Vec::with_capacity(cfg.length);
    for n in 0..cfg.length {
        let with_l = cfg.mode == MpsMode::Standard && n == cfg.center;
        let mut shape = vec![extents[n], PHYS_DIM, extents[n + 1]];
        if with_l {
            shape.push(cfg.d_fused);
        }
        let t = Tensor::from_fn(&site_labels(n, with_l), &shape, |idx| {
            let delta = if idx[0] == idx[2] { 1.0 } else { 0.0 };
            delta + noise()
        })?;
        sites.push(t);
    }
    match cfg.mode {
        MpsMode::Standard => {
            MpsProjector::from_parts(sites, cfg.center, cfg.d_fused, cfg.mode, vec![], None)?
                .canonicalize(cfg.center)
        }
        MpsMode::Activated => {
            let chi = cfg.chi_init;
            let head = Tensor::from_fn(
                &[HEAD_INPUT_LABEL, FEATURE_LABEL],
                &[chi, cfg.d_fused],
                |idx| (if idx[0] == idx[1] { 1.0 } else { 0.0 }) + noise(),
            )?;
            let biases = (0..cfg.length)
                .map(|_| (0..chi).map(|_| noise()).collect())
                .collect();
            MpsProjector::from_parts(sites, cfg.center, cfg.d_fused, cfg.mode, biases, Some(head))
        }
    }
}

/// Standard chain with i.i.d. standard-normal entries, capped extents, and
/// mixed canonical form around `center`, scaled so `‖Ψ‖_F = 1`.
pub fn random_mps(length: usize, chi: usize, d_fused: usize, center: usize, seed: u64) -> Result<MpsProjector> {
    let mut mps = init_mps(&MpsInit {
        length,
        chi_init: chi,
        d_fused,
        center,
        mode: MpsMode::Standard,
        seed,
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a9d_31c5);
    let p: Vec<f64> = (0..mps.param_count())
        .map(|_| Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect();
    mps.set_params_flat(&p)?;
    let mut out = mps.canonicalize(center)?;
    let norm = out.sites[center].norm_fro();
    if norm > 0.0 {
        out.sites[center] = out.sites[center].scaled(1.0 / norm);
    }
    Ok(out)
}

/// Width-2 standard chain whose every site maps a unit carry to a carry of
/// norm exactly `gain`, for any input. Each site is `gain · Q_n (cos θ I +
/// sin θ J)` with `Q_n` a random rotation and `J` the quarter turn, so the
/// unnormalized output norm is `gain^L`. The feature leg (`d_fused = 2`)
/// sits on the last site.
pub fn gain_chain(length: usize, gain: f64, seed: u64) -> Result<MpsProjector> {
    if length < 2 {
        return Err(Error::Config("gain chain needs at least two sites".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rot = || {
        let t: f64 = rand::Rng::random_range(&mut rng, 0.0..std::f64::consts::TAU);
        [[t.cos(), -t.sin()], [t.sin(), t.cos()]]
    };
    // (cos I + sin J) with J = [[0,-1],[1,0]]: column b of slice s
    let j = [[0.0, -1.0], [1.0, 0.0]];
    let id = [[1.0, 0.0], [0.0, 1.0]];
    let slice = |q: &[[f64; 2]; 2], m: &[[f64; 2]; 2], a: usize, b: usize| {
        gain * (q[a][0] * m[0][b] + q[a][1] * m[1][b])
    };
    let mut sites = Vec::with_capacity(length);
    let first = Tensor::from_fn(&site_labels(0, false), &[1, PHYS_DIM, 2], |i| {
        gain * if i[1] == i[2] { 1.0 } else { 0.0 }
    })?;
    sites.push(first);
    for n in 1..length {
        let q = rot();
        let last = n + 1 == length;
        let shape: Vec<usize> = if last { vec![2, PHYS_DIM, 1, 2] } else { vec![2, PHYS_DIM, 2] };
        // carry v_a maps to Σ_a v_a A[a, s, b]; using the transpose keeps
        // the per-input map orthogonal
        let t = Tensor::from_fn(&site_labels(n, last), &shape, |i| {
            let m = if i[1] == 0 { &id } else { &j };
            let b = if last { i[3] } else { i[2] };
            slice(&q, m, b, i[0])
        })?;
        sites.push(t);
    }
    MpsProjector::from_parts(sites, length - 1, 2, MpsMode::Standard, vec![], None)
}

/// Parameter count of a standard chain with uniform interior width `chi`
/// and unit boundaries, evaluated without allocating the tensors.
pub fn standard_param_count(length: usize, chi: usize, d_fused: usize, center: usize) -> usize {
    let mut ext = vec![chi; length + 1];
    ext[0] = 1;
    ext[length] = 1;
    (0..length)
        .map(|n| ext[n] * PHYS_DIM * ext[n + 1] * if n == center { d_fused } else { 1 })
        .sum()
}

/// Same as [`standard_param_count`] for the activated layout: uniform width,
/// a `chi × d_fused` head, and one bias vector per site.
pub fn activated_param_count(length: usize, chi: usize, d_fused: usize) -> usize {
    length * chi * PHYS_DIM * chi + chi * d_fused + length * chi
}

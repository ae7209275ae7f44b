use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Product of single-site states `cos(π v)|0⟩ + sin(π v)|1⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductState {
    sites: Vec<[f64; 2]>,
    source_features: Vec<f64>,
    out_of_range: usize,
}

impl ProductState {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[[f64; 2]] {
        &self.sites
    }

    pub fn site(&self, n: usize) -> [f64; 2] {
        self.sites[n]
    }

    pub fn source_features(&self) -> &[f64] {
        &self.source_features
    }

    /// Number of source features that fell outside `(-1, 1)`.
    pub fn out_of_range(&self) -> usize {
        self.out_of_range
    }

    /// Amplitudes of the full `2^L` product vector, first site most significant.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![1.0];
        for site in &self.sites {
            let mut next = Vec::with_capacity(out.len() * 2);
            for &x in &out {
                next.push(x * site[0]);
                next.push(x * site[1]);
            }
            out = next;
        }
        out
    }
}

/// Angle-encodes each feature onto one site.
///
/// Values outside `(-1, 1)` are still encoded (the map is periodic) and
/// counted in [`ProductState::out_of_range`].
pub fn angle_encode(features: &[f64]) -> Result<ProductState> {
    let mut sites = Vec::with_capacity(features.len());
    let mut out_of_range = 0;
    for (n, &v) in features.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Numeric(format!("feature {n} is not finite ({v})")));
        }
        if v <= -1.0 || v >= 1.0 {
            out_of_range += 1;
        }
        let (s, c) = (PI * v).sin_cos();
        sites.push([c, s]);
    }
    if out_of_range > 0 {
        log::debug!("angle_encode: {out_of_range} feature(s) outside (-1, 1)");
    }
    Ok(ProductState {
        sites,
        source_features: features.to_vec(),
        out_of_range,
    })
}

/// Concatenates the three modality embeddings in rgb, depth, ir order.
pub fn concat_modalities(rgb: &[f64], depth: &[f64], ir: &[f64]) -> Result<Vec<f64>> {
    if rgb.len() != depth.len() || rgb.len() != ir.len() {
        return Err(Error::Dimension(format!(
            "modality lengths differ: rgb {}, depth {}, ir {}",
            rgb.len(),
            depth.len(),
            ir.len()
        )));
    }
    let mut v = Vec::with_capacity(3 * rgb.len());
    v.extend_from_slice(rgb);
    v.extend_from_slice(depth);
    v.extend_from_slice(ir);
    Ok(v)
}

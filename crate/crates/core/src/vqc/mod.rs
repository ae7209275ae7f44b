//! Exact statevector simulation of the variational classifier: angle
//! encoding, Cartan-block ansatz, Pauli-Z readout and parameter-shift
//! gradients.

mod ansatz;
mod gates;
mod state;
mod trotter;

pub use ansatz::{
    run_ansatz, AnsatzSpec, BlockLayout, CartanOrder, CompiledAnsatz, Jacobian, Topology,
    CIRCUIT_FILE_VERSION, ZYZ_ARITY,
};
pub use gates::{apply_entangler, apply_zyz, matmul2, ry_matrix, rz_matrix, zyz_matrix, EntanglerKind};
pub use state::{Pauli, Statevector, MAX_QUBITS};
pub use trotter::{
    commutator_norm, log_grid, pauli_matrix, topology_discrepancy, trotter_discrepancy,
    trotter_scan, SlopeFit, TopologyProbe,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::train::sigmoid;

/// `θ = W h + b` for a row-major `n_qubits × D` matrix `W`.
pub fn encoding_angles(h: &[f64], w: &[f64], b: &[f64], n_qubits: usize) -> Result<Vec<f64>> {
    let d = h.len();
    if w.len() != n_qubits * d || b.len() != n_qubits {
        return Err(Error::Dimension(format!(
            "projection must be {n_qubits}x{d} with {n_qubits} biases, got {} weights and {} biases",
            w.len(),
            b.len()
        )));
    }
    if h.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite feature in encoding".into()));
    }
    Ok((0..n_qubits)
        .map(|q| b[q] + w[q * d..(q + 1) * d].iter().zip(h).map(|(a, x)| a * x).sum::<f64>())
        .collect())
}

/// `⊗_j R_Y(θ_j)|0⟩` with `θ = W h + b`.
pub fn encode_features(h: &[f64], w: &[f64], b: &[f64], n_qubits: usize) -> Result<Statevector> {
    Statevector::product_ry(&encoding_angles(h, w, b, n_qubits)?)
}

/// Weighted Pauli-Z readout `σ(Σ w_j E_j + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutHead {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ReadoutHead {
    pub fn zeros(n: usize) -> Self {
        Self {
            weights: vec![0.0; n],
            bias: 0.0,
        }
    }

    pub fn logit(&self, expectations: &[f64]) -> Result<f64> {
        if expectations.len() != self.weights.len() {
            return Err(Error::Dimension(format!(
                "readout has {} weights, got {} expectations",
                self.weights.len(),
                expectations.len()
            )));
        }
        Ok(self.bias + self.weights.iter().zip(expectations).map(|(w, e)| w * e).sum::<f64>())
    }
}

pub fn readout(expectations: &[f64], head: &ReadoutHead) -> Result<f64> {
    Ok(sigmoid(head.logit(expectations)?))
}

/// Gradient of the readout probability with respect to every circuit
/// parameter, from the parameter-shift Jacobian chained through the sigmoid.
pub fn param_shift_grad(
    circuit: &CompiledAnsatz,
    params: &[f64],
    angles: &[f64],
    head: &ReadoutHead,
) -> Result<Vec<f64>> {
    let jac = circuit.jacobian(angles, params)?;
    let p = readout(&jac.values, head)?;
    let dp = p * (1.0 - p);
    let mut g = vec![0.0; params.len()];
    for (w, row) in head.weights.iter().zip(&jac.d_params) {
        for (gk, d) in g.iter_mut().zip(row) {
            *gk += dp * w * d;
        }
    }
    Ok(g)
}

/// Stage-two classifier: frozen feature standardization, angle projection,
/// circuit and readout.
#[derive(Debug, Clone)]
pub struct VqcModel {
    circuit: CompiledAnsatz,
    pub params: Vec<f64>,
    pub proj_w: Vec<f64>,
    pub proj_b: Vec<f64>,
    pub head: ReadoutHead,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
}

/// Loss and gradient in the layout of [`VqcModel::params_flat`].
#[derive(Debug, Clone)]
pub struct VqcGrad {
    pub loss: f64,
    pub probability: f64,
    pub flat: Vec<f64>,
}

impl VqcModel {
    /// Random circuit parameters (`N(0, init_scale²)`), projection rows of
    /// scale `1/√D`, zero projection bias and zero readout.
    pub fn init(
        spec: &AnsatzSpec,
        d_fused: usize,
        feature_mean: Vec<f64>,
        feature_scale: Vec<f64>,
        init_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        if feature_mean.len() != d_fused || feature_scale.len() != d_fused {
            return Err(Error::Dimension("standardization width differs from d_fused".into()));
        }
        let circuit = CompiledAnsatz::new(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let params = (0..circuit.param_count()).map(|_| init_scale * normal()).collect();
        let w_scale = 1.0 / (d_fused as f64).sqrt();
        let proj_w = (0..spec.n_qubits * d_fused).map(|_| w_scale * normal()).collect();
        Ok(Self {
            params,
            proj_w,
            proj_b: vec![0.0; spec.n_qubits],
            head: ReadoutHead::zeros(spec.measured.len()),
            feature_mean,
            feature_scale,
            circuit,
        })
    }

    pub fn from_parts(
        spec: &AnsatzSpec,
        params: Vec<f64>,
        proj_w: Vec<f64>,
        proj_b: Vec<f64>,
        head: ReadoutHead,
        feature_mean: Vec<f64>,
        feature_scale: Vec<f64>,
    ) -> Result<Self> {
        let circuit = CompiledAnsatz::new(spec)?;
        let d = feature_mean.len();
        let nq = spec.n_qubits;
        if params.len() != circuit.param_count()
            || proj_w.len() != nq * d
            || proj_b.len() != nq
            || head.weights.len() != spec.measured.len()
            || feature_scale.len() != d
        {
            return Err(Error::Dimension("classifier parts do not match the circuit".into()));
        }
        if feature_scale.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Numeric("feature scale must be positive".into()));
        }
        Ok(Self {
            circuit,
            params,
            proj_w,
            proj_b,
            head,
            feature_mean,
            feature_scale,
        })
    }

    pub fn spec(&self) -> &AnsatzSpec {
        self.circuit.spec()
    }

    pub fn circuit(&self) -> &CompiledAnsatz {
        &self.circuit
    }

    pub fn d_fused(&self) -> usize {
        self.feature_mean.len()
    }

    fn standardize(&self, h: &[f64]) -> Vec<f64> {
        h.iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    pub fn angles(&self, h: &[f64]) -> Result<Vec<f64>> {
        if h.len() != self.d_fused() {
            return Err(Error::Dimension(format!(
                "classifier expects {} features, got {}",
                self.d_fused(),
                h.len()
            )));
        }
        encoding_angles(&self.standardize(h), &self.proj_w, &self.proj_b, self.spec().n_qubits)
    }

    pub fn expectations(&self, h: &[f64]) -> Result<Vec<f64>> {
        let input = Statevector::product_ry(&self.angles(h)?)?;
        self.circuit.measure(&self.circuit.run(&input, &self.params)?)
    }

    /// Liveness probability.
    pub fn predict(&self, h: &[f64]) -> Result<f64> {
        readout(&self.expectations(h)?, &self.head)
    }

    pub fn param_count(&self) -> usize {
        self.params.len() + self.proj_w.len() + self.proj_b.len() + self.head.weights.len() + 1
    }

    /// Circuit parameters, projection weights, projection bias, readout
    /// weights, readout bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        v.extend_from_slice(&self.params);
        v.extend_from_slice(&self.proj_w);
        v.extend_from_slice(&self.proj_b);
        v.extend_from_slice(&self.head.weights);
        v.push(self.head.bias);
        v
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "classifier has {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut rest = flat;
        for dst in [&mut self.params, &mut self.proj_w, &mut self.proj_b, &mut self.head.weights] {
            let (a, b) = rest.split_at(dst.len());
            dst.copy_from_slice(a);
            rest = b;
        }
        self.head.bias = rest[0];
        Ok(())
    }

    /// Binary cross-entropy of one sample and its full gradient.
    pub fn loss_grad(&self, h: &[f64], label: usize) -> Result<VqcGrad> {
        let z = self.standardize(h);
        let angles = self.angles(h)?;
        let jac = self.circuit.jacobian(&angles, &self.params)?;
        let p = readout(&jac.values, &self.head)?;
        let loss = crate::train::bce_from_probability(p, label);
        let dz = p - label as f64;

        let mut flat = vec![0.0; self.param_count()];
        let np = self.params.len();
        let nq = self.spec().n_qubits;
        let d = z.len();
        let mut d_angle = vec![0.0; nq];
        for (j, w) in self.head.weights.iter().enumerate() {
            let de = dz * w;
            for (g, x) in flat[..np].iter_mut().zip(&jac.d_params[j]) {
                *g += de * x;
            }
            for (g, x) in d_angle.iter_mut().zip(&jac.d_angles[j]) {
                *g += de * x;
            }
        }
        for q in 0..nq {
            for k in 0..d {
                flat[np + q * d + k] = d_angle[q] * z[k];
            }
            flat[np + nq * d + q] = d_angle[q];
        }
        let off = np + nq * d + nq;
        for (j, e) in jac.values.iter().enumerate() {
            flat[off + j] = dz * e;
        }
        flat[off + jac.values.len()] = dz;
        Ok(VqcGrad {
            loss,
            probability: p,
            flat,
        })
    }
}

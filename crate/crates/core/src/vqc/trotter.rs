use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ansatz::{AnsatzSpec, CompiledAnsatz, Topology};
use super::gates::EntanglerKind;
use super::state::{Pauli, Statevector};
use crate::error::{Error, Result};
use crate::linalg::{expm, fit_loglog, is_hermitian, spectral_norm};

type C = Complex64;

const HERMITIAN_TOL: f64 = 1e-10;

/// Dense matrix of a Pauli word on `n` qubits (qubit 0 least significant).
pub fn pauli_matrix(n: usize, word: &[(usize, Pauli)]) -> DMatrix<C> {
    let dim = 1usize << n;
    let mut m = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut e = vec![C::new(0.0, 0.0); dim];
        e[col] = C::new(1.0, 0.0);
        let v = Statevector::from_amplitudes(e).expect("power of two");
        let out = v.apply_pauli_word(word);
        for (row, x) in out.into_iter().enumerate() {
            m[(row, col)] = x;
        }
    }
    m
}

/// `‖exp(−iτ(a+b)) − exp(−iτa)·exp(−iτb)‖₂`.
pub fn trotter_discrepancy(a: &DMatrix<C>, b: &DMatrix<C>, tau: f64) -> Result<f64> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "generators must be square and equal in size, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if !is_hermitian(a, HERMITIAN_TOL) || !is_hermitian(b, HERMITIAN_TOL) {
        return Err(Error::Numeric("generator is not Hermitian".into()));
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    let mi = C::new(0.0, -tau);
    let joint = expm(&((a + b) * mi));
    let split = expm(&(a * mi)) * expm(&(b * mi));
    Ok(spectral_norm(&(joint - split)))
}

/// Log-log fit of a discrepancy curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub taus: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
    /// `exp(intercept)`, i.e. the fitted `C` in `err ≈ C τ^slope`.
    pub prefactor: f64,
}

fn fit(taus: &[f64], errors: Vec<f64>) -> Result<SlopeFit> {
    if taus.len() < 3 {
        return Err(Error::Config(format!(
            "a slope fit needs at least 3 points, got {}",
            taus.len()
        )));
    }
    let (slope, intercept) = fit_loglog(taus, &errors)?;
    Ok(SlopeFit {
        taus: taus.to_vec(),
        errors,
        slope,
        prefactor: intercept.exp(),
    })
}

/// Trotter discrepancy over a τ grid with its log-log fit.
pub fn trotter_scan(a: &DMatrix<C>, b: &DMatrix<C>, taus: &[f64]) -> Result<SlopeFit> {
    let errors = taus
        .iter()
        .map(|&t| trotter_discrepancy(a, b, t))
        .collect::<Result<Vec<_>>>()?;
    fit(taus, errors)
}

pub fn commutator_norm(a: &DMatrix<C>, b: &DMatrix<C>) -> f64 {
    spectral_norm(&(a * b - b * a))
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Options for the chain vs brick-wall comparison.
#[derive(Debug, Clone)]
pub struct TopologyProbe {
    pub n_qubits: usize,
    pub entangler: EntanglerKind,
    pub taus: Vec<f64>,
    pub seed: u64,
    /// Zero every dressing angle (entanglers keep their random values).
    pub zero_dressings: bool,
}

/// Output-state distance between chain and brick-wall circuits sharing one
/// random parameter vector scaled by each τ, on a random product input.
pub fn topology_discrepancy(probe: &TopologyProbe) -> Result<SlopeFit> {
    let chain = AnsatzSpec::uniform(probe.n_qubits, Topology::Chain, probe.entangler);
    let brick = AnsatzSpec::uniform(probe.n_qubits, Topology::Brickwall, probe.entangler);
    let (cc, cb) = (CompiledAnsatz::new(&chain)?, CompiledAnsatz::new(&brick)?);
    let mut rng = ChaCha8Rng::seed_from_u64(probe.seed);
    let angles: Vec<f64> = (0..probe.n_qubits)
        .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect();
    let mut base: Vec<f64> = (0..cc.param_count())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    if probe.zero_dressings {
        let (blocks, _) = chain.layout();
        let mut keep = vec![false; base.len()];
        for b in &blocks {
            for k in 0..b.kind.arity() {
                keep[b.entangler + k] = true;
            }
        }
        for (k, p) in base.iter_mut().enumerate() {
            if !keep[k] {
                *p = 0.0;
            }
        }
    }
    let input = Statevector::product_ry(&angles)?;
    let mut errors = Vec::with_capacity(probe.taus.len());
    for &tau in &probe.taus {
        let p: Vec<f64> = base.iter().map(|x| x * tau).collect();
        errors.push(cc.run(&input, &p)?.distance(&cb.run(&input, &p)?));
    }
    if errors.contains(&0.0) {
        return Ok(SlopeFit {
            taus: probe.taus.clone(),
            errors,
            slope: f64::NAN,
            prefactor: 0.0,
        });
    }
    fit(&probe.taus, errors)
}

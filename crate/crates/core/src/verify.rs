//! Registered property checks behind the `verify` subcommand.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::linalg::expm;
use crate::mps::{
    angle_encode, contract_full, contract_sequential, contract_sequential_trace, gain_chain,
    grad_mps, init_mps, projector_feature, random_mps, MpsInit, MpsMode, MpsProjector,
    ProductState,
};
use crate::train::{cross_entropy, StageOneHead};
use crate::vqc::{
    apply_entangler, log_grid, param_shift_grad, pauli_matrix, topology_discrepancy,
    trotter_scan, AnsatzSpec, CompiledAnsatz, EntanglerKind, Pauli, ReadoutHead, SlopeFit,
    Statevector, Topology, TopologyProbe,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Mps,
    Vqc,
    Trotter,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mps" => Ok(Self::Mps),
            "vqc" => Ok(Self::Vqc),
            "trotter" => Ok(Self::Trotter),
            "all" => Ok(Self::All),
            other => Err(Error::Config(format!(
                "unknown suite `{other}` (expected mps|vqc|trotter|all)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub bound: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    /// `(τ, error)` rows of the Trotter scan, when that suite ran.
    pub trotter: Vec<(f64, f64)>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, suite: &'static str, name: &str, value: f64, passed: bool, bound: &str) {
        self.checks.push(Check {
            suite,
            name: name.into(),
            passed,
            value,
            bound: bound.into(),
        });
    }

    fn at_most(&mut self, suite: &'static str, name: &str, value: f64, tol: f64) {
        self.push(suite, name, value, value <= tol, &format!("<= {tol:e}"));
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:<8} {:<34} {:<6} {:>14}  bound\n", "suite", "check", "status", "value");
        for c in &self.checks {
            out.push_str(&format!(
                "{:<8} {:<34} {:<6} {:>14.6e}  {}\n",
                c.suite,
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.value,
                c.bound
            ));
        }
        out
    }

    pub fn trotter_csv(&self) -> String {
        let mut out = String::from("tau,error\n");
        for (t, e) in &self.trotter {
            out.push_str(&format!("{t:e},{e:e}\n"));
        }
        out
    }
}

pub fn run(suite: Suite, seed: u64, checkpoint: Option<&Checkpoint>) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    if matches!(suite, Suite::Mps | Suite::All) {
        mps_suite(&mut report, seed)?;
        if let Some(ck) = checkpoint {
            checkpoint_checks(&mut report, ck);
        }
    }
    if matches!(suite, Suite::Vqc | Suite::All) {
        vqc_suite(&mut report, seed)?;
    }
    if matches!(suite, Suite::Trotter | Suite::All) {
        trotter_suite(&mut report, seed)?;
    }
    Ok(report)
}

/// `|a − b| / max(|a|, |b|, floor)`.
fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

fn mps_suite(r: &mut VerifyReport, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let len = rng.random_range(1..=8);
        let center = rng.random_range(0..len);
        let mps = random_mps(len, rng.random_range(1..=4), rng.random_range(1..=4), center, seed + k)?;
        let v: Vec<f64> = (0..len).map(|_| rng.random_range(-0.99..0.99)).collect();
        let phi = angle_encode(&v)?;
        let a = contract_sequential(&mps, &phi)?.direction();
        let b = contract_full(&mps, &phi)?.direction();
        worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
    }
    r.at_most("mps", "oracle-equivalence", worst, 1e-8);

    let (mut iso, mut ey): (f64, f64) = (0.0, 0.0);
    for k in 0..50 {
        let len = rng.random_range(2..=32);
        let mps = random_mps(len, 6, 3, rng.random_range(0..len), seed + 1000 + k)?;
        iso = iso.max(mps.canonical_residuals()?.max());
        let (t, rep) = mps.sweep_truncate(rng.random_range(1..=4))?;
        iso = iso.max(t.canonical_residuals()?.max());
        for s in &rep.steps {
            ey = ey.max((s.residual_sq - s.discarded_weight).abs());
        }
    }
    r.at_most("mps", "canonical-residual", iso, 1e-10);
    r.at_most("mps", "eckart-young-identity", ey, 1e-10);

    let chain = gain_chain(200, 50.0, seed)?;
    let v: Vec<f64> = (0..200).map(|_| rng.random_range(-0.99..0.99)).collect();
    let phi = angle_encode(&v)?;
    let norm = contract_sequential_trace(&chain, &phi, true)?;
    let lowest = norm.carried_norms.iter().cloned().fold(f64::INFINITY, f64::min);
    let highest = norm.carried_norms.iter().cloned().fold(0.0, f64::max);
    r.push(
        "mps",
        "normalized-norm-band",
        lowest,
        lowest >= 1.0 - 2e-6 && highest <= 1.0,
        "in [1-2e-6, 1]",
    );
    let raw = contract_sequential_trace(&chain, &phi, false)?;
    let blown = raw.feature.values.iter().all(|x| !x.is_finite());
    r.push("mps", "unnormalized-control-overflows", raw.feature.norm(), blown, "non-finite");

    let enc: f64 = phi
        .sites()
        .iter()
        .map(|[c, s]| (c * c + s * s - 1.0).abs())
        .fold(0.0, f64::max);
    r.at_most("mps", "encoding-unit-norm", enc, 1e-12);

    for mode in [MpsMode::Standard, MpsMode::Activated] {
        let name = format!("gradient-fd-{mode}");
        r.at_most("mps", &name, mps_fd_error(mode, seed)?, 1e-4);
    }
    Ok(())
}

fn mean_ce(mps: &MpsProjector, head: &StageOneHead, batch: &[(ProductState, usize)]) -> Result<f64> {
    let mut s = 0.0;
    for (phi, y) in batch {
        s += cross_entropy(&head.logits(&projector_feature(mps, phi)?), *y)?;
    }
    Ok(s / batch.len() as f64)
}

/// Worst relative error (denominator floor 1e-6) of 100 sampled parameters.
fn mps_fd_error(mode: MpsMode, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x00fd);
    let mut mps = init_mps(&MpsInit {
        length: 8,
        chi_init: 4,
        d_fused: 3,
        center: 4,
        mode,
        seed,
    })?;
    let p: Vec<f64> = mps.params_flat().iter().map(|x| x + rng.random_range(-0.5..0.5)).collect();
    mps.set_params_flat(&p)?;
    let head = StageOneHead::from_weights(2, 3, (0..6).map(|_| rng.random_range(-2.0..2.0)).collect())?;
    let batch: Vec<(ProductState, usize)> = (0..4)
        .map(|k| {
            let v: Vec<f64> = (0..8).map(|_| rng.random_range(-0.9..0.9)).collect();
            angle_encode(&v).map(|phi| (phi, k % 2))
        })
        .collect::<Result<_>>()?;
    let refs: Vec<(&ProductState, usize)> = batch.iter().map(|(p, y)| (p, *y)).collect();
    let g = grad_mps(&mps, &head, &refs)?;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.random_range(0..p.len());
        let mut q = p.clone();
        let mut probe = mps.clone();
        q[k] = p[k] + h;
        probe.set_params_flat(&q)?;
        let fp = mean_ce(&probe, &head, &batch)?;
        q[k] = p[k] - h;
        probe.set_params_flat(&q)?;
        let fm = mean_ce(&probe, &head, &batch)?;
        worst = worst.max(rel_err((fp - fm) / (2.0 * h), g.mps.flat[k], 1e-6));
    }
    Ok(worst)
}

fn checkpoint_checks(r: &mut VerifyReport, ck: &Checkpoint) {
    let intact = ck.payload_intact();
    r.push("mps", "checkpoint-payload-digest", 0.0, intact, "matches header");
    if !intact {
        return;
    }
    match ck.to_stage_one() {
        Err(e) => {
            log::error!("checkpoint structure: {e}");
            r.push("mps", "checkpoint-structure", f64::NAN, false, "valid projector");
        }
        Ok((mps, _)) => {
            r.push("mps", "checkpoint-structure", 0.0, true, "valid projector");
            let finite = mps.params_flat().iter().all(|x| x.is_finite());
            r.push("mps", "checkpoint-finite", 0.0, finite, "all finite");
            if let Some(recorded) = ck.recorded_mps_checksum() {
                let same = recorded == mps.checksum();
                r.push("mps", "checkpoint-checksum", 0.0, same, "matches header");
            }
            if mps.mode() == MpsMode::Standard && finite {
                match mps.canonical_residuals() {
                    Ok(res) => r.at_most("mps", "checkpoint-canonical-residual", res.max(), 1e-10),
                    Err(_) => r.push("mps", "checkpoint-canonical-residual", f64::NAN, false, "<= 1e-10"),
                }
            }
        }
    }
}

const POOL: [EntanglerKind; 3] = [EntanglerKind::Cnot, EntanglerKind::Crz, EntanglerKind::Heisenberg];

fn vqc_suite(r: &mut VerifyReport, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0a0c);
    let mut drift: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=5);
        let topo = if rng.random_bool(0.5) { Topology::Chain } else { Topology::Brickwall };
        let spec = AnsatzSpec::uniform(n, topo, POOL[rng.random_range(0..3)]);
        let c = CompiledAnsatz::new(&spec)?;
        let p: Vec<f64> = (0..c.param_count()).map(|_| rng.random_range(-3.2..3.2)).collect();
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-3.2..3.2)).collect();
        let out = c.run(&Statevector::product_ry(&a)?, &p)?;
        drift = drift.max((out.norm_sqr() - 1.0).abs());
    }
    r.at_most("vqc", "norm-preservation", drift, 1e-10);

    let mut heis: f64 = 0.0;
    for _ in 0..20 {
        let alpha: Vec<f64> = (0..3).map(|_| rng.random_range(-3.2..3.2)).collect();
        let mut gen = DMatrix::<Complex64>::zeros(8, 8);
        for (k, p) in [Pauli::X, Pauli::Y, Pauli::Z].into_iter().enumerate() {
            gen += pauli_matrix(3, &[(0, p), (2, p)]) * Complex64::new(alpha[k], 0.0);
        }
        let u = expm(&(gen * Complex64::new(0.0, -1.0)));
        for z in 0..8 {
            let mut s = Statevector::basis(3, z)?;
            apply_entangler(&mut s, 0, 2, EntanglerKind::Heisenberg, &alpha)?;
            for (row, a) in s.amplitudes().iter().enumerate() {
                heis = heis.max((a - u[(row, z)]).norm());
            }
        }
    }
    r.at_most("vqc", "heisenberg-vs-expm", heis, 1e-10);

    let (mut shift_err, mut phase): (f64, f64) = (0.0, 0.0);
    let h = 1e-5;
    for kind in POOL {
        let spec = AnsatzSpec::uniform(4, Topology::Chain, kind);
        let c = CompiledAnsatz::new(&spec)?;
        let p: Vec<f64> = (0..c.param_count()).map(|_| rng.random_range(-3.2..3.2)).collect();
        let a: Vec<f64> = (0..4).map(|_| rng.random_range(-3.2..3.2)).collect();
        let head = ReadoutHead {
            weights: (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
            bias: 0.1,
        };
        let g = param_shift_grad(&c, &p, &a, &head)?;
        let prob = |q: &[f64]| -> Result<f64> {
            let e = c.measure(&c.run(&Statevector::product_ry(&a)?, q)?)?;
            crate::vqc::readout(&e, &head)
        };
        let mut q = p.clone();
        for k in 0..p.len() {
            q[k] = p[k] + h;
            let fp = prob(&q)?;
            q[k] = p[k] - h;
            let fm = prob(&q)?;
            q[k] = p[k];
            shift_err = shift_err.max(rel_err((fp - fm) / (2.0 * h), g[k], 1e-4));
        }
        for k in spec.phase_params() {
            phase = phase.max(g[k].abs());
        }
    }
    r.at_most("vqc", "parameter-shift-vs-fd", shift_err, 1e-5);
    r.at_most("vqc", "global-phase-gradient", phase, 1e-12);
    Ok(())
}

/// The two generators of the Trotter probe: `X₀X₁` and `Z₁Z₂` on three
/// qubits, whose commutator is nonzero.
pub fn trotter_generators() -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    (
        pauli_matrix(3, &[(0, Pauli::X), (1, Pauli::X)]),
        pauli_matrix(3, &[(1, Pauli::Z), (2, Pauli::Z)]),
    )
}

pub fn trotter_fit() -> Result<SlopeFit> {
    let (a, b) = trotter_generators();
    trotter_scan(&a, &b, &log_grid(1e-3, 1e-1, 9))
}

fn trotter_suite(r: &mut VerifyReport, seed: u64) -> Result<()> {
    let fit = trotter_fit()?;
    r.trotter = fit.taus.iter().cloned().zip(fit.errors.iter().cloned()).collect();
    r.push(
        "trotter",
        "trotter-slope",
        fit.slope,
        (fit.slope - 2.0).abs() <= 0.05,
        "2.0 +/- 0.05",
    );
    let topo = topology_discrepancy(&TopologyProbe {
        n_qubits: 4,
        entangler: EntanglerKind::Heisenberg,
        taus: log_grid(1e-3, 1e-1, 9),
        seed,
        zero_dressings: false,
    })?;
    r.push(
        "trotter",
        "topology-slope",
        topo.slope,
        (topo.slope - 2.0).abs() <= 0.1,
        "2.0 +/- 0.1",
    );
    Ok(())
}

use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::gates::{apply_cnot, EntanglerKind};
use super::state::{Pauli, Statevector, MAX_QUBITS};
use crate::error::{Error, Result};

type C = Complex64;

/// Parameters of one `e^{iθ_p} R_Z R_Y R_Z` dressing.
pub const ZYZ_ARITY: usize = 4;

pub const CIRCUIT_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Chain,
    Brickwall,
}

impl std::str::FromStr for Topology {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain" => Ok(Self::Chain),
            "brickwall" | "brick-wall" => Ok(Self::Brickwall),
            other => Err(Error::Config(format!(
                "unknown topology '{other}' (expected chain or brickwall)"
            ))),
        }
    }
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Chain => "chain",
            Self::Brickwall => "brickwall",
        })
    }
}

/// Time order inside a two-qubit block. `RightFirst` applies the right
/// dressings, then the entangler, then the left dressings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CartanOrder {
    RightFirst,
    LeftFirst,
}

/// Structure of the variational circuit. Block `k` acts on qubits
/// `(k, k+1)` with qubit `k` as control.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub n_qubits: usize,
    pub topology: Topology,
    /// One entangler per adjacent pair, indexed by the lower qubit.
    pub entanglers: Vec<EntanglerKind>,
    pub measured: Vec<usize>,
    pub cartan_order: CartanOrder,
}

/// Where each block's parameters live in the flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub pair: (usize, usize),
    pub kind: EntanglerKind,
    /// `[right_i, right_j]`, each a ZYZ quadruple.
    pub right: [usize; 2],
    pub entangler: usize,
    pub left: [usize; 2],
}

impl AnsatzSpec {
    pub fn uniform(n_qubits: usize, topology: Topology, kind: EntanglerKind) -> Self {
        Self {
            n_qubits,
            topology,
            entanglers: vec![kind; n_qubits.saturating_sub(1)],
            measured: (0..n_qubits).collect(),
            cartan_order: CartanOrder::RightFirst,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > MAX_QUBITS {
            return Err(Error::Config(format!(
                "n_qubits must be in 1..={MAX_QUBITS}, got {}",
                self.n_qubits
            )));
        }
        if self.entanglers.len() != self.n_qubits - 1 {
            return Err(Error::Config(format!(
                "{} qubits need {} entanglers, got {}",
                self.n_qubits,
                self.n_qubits - 1,
                self.entanglers.len()
            )));
        }
        if self.measured.is_empty() {
            return Err(Error::Config("measured-qubit set is empty".into()));
        }
        for (k, &q) in self.measured.iter().enumerate() {
            if q >= self.n_qubits {
                return Err(Error::Index {
                    qubit: q,
                    n_qubits: self.n_qubits,
                });
            }
            if self.measured[..k].contains(&q) {
                return Err(Error::Config(format!("qubit {q} measured twice")));
            }
        }
        Ok(())
    }

    pub fn block_param_count(kind: EntanglerKind) -> usize {
        4 * ZYZ_ARITY + kind.arity()
    }

    /// Parameter layout, block by block in pair order, then the terminal
    /// dressing on the last qubit.
    pub fn layout(&self) -> (Vec<BlockLayout>, usize) {
        let mut off = 0;
        let mut blocks = Vec::with_capacity(self.entanglers.len());
        for (k, &kind) in self.entanglers.iter().enumerate() {
            let b = BlockLayout {
                pair: (k, k + 1),
                kind,
                right: [off, off + ZYZ_ARITY],
                entangler: off + 2 * ZYZ_ARITY,
                left: [
                    off + 2 * ZYZ_ARITY + kind.arity(),
                    off + 3 * ZYZ_ARITY + kind.arity(),
                ],
            };
            off += Self::block_param_count(kind);
            blocks.push(b);
        }
        (blocks, off)
    }

    pub fn param_count(&self) -> usize {
        self.layout().1 + ZYZ_ARITY
    }

    /// Indices of blocks in application order.
    pub fn block_order(&self) -> Vec<usize> {
        let n = self.entanglers.len();
        match self.topology {
            Topology::Chain => (0..n).collect(),
            Topology::Brickwall => (0..n).step_by(2).chain((1..n).step_by(2)).collect(),
        }
    }

    /// Indices of every global-phase parameter.
    pub fn phase_params(&self) -> Vec<usize> {
        let (blocks, tail) = self.layout();
        let mut out: Vec<usize> = blocks
            .iter()
            .flat_map(|b| [b.right[0], b.right[1], b.left[0], b.left[1]])
            .collect();
        out.push(tail);
        out
    }

    pub fn to_toml(&self) -> String {
        let file = CircuitFile {
            version: CIRCUIT_FILE_VERSION,
            spec: self.clone(),
        };
        toml::to_string(&file).expect("circuit description serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: toml::Table =
            toml::from_str(text).map_err(|e| Error::Format(format!("circuit file: {e}")))?;
        match raw.get("version").and_then(|v| v.as_integer()) {
            Some(v) if v == CIRCUIT_FILE_VERSION as i64 => {}
            Some(v) => {
                return Err(Error::Format(format!(
                    "circuit file version {v} is not supported (expected {CIRCUIT_FILE_VERSION})"
                )))
            }
            None => return Err(Error::Format("circuit file has no version field".into())),
        }
        let file: CircuitFileIn =
            toml::from_str(text).map_err(|e| Error::Format(format!("circuit file: {e}")))?;
        let n = file.n_qubits;
        let entanglers = match (file.entanglers, file.entangler) {
            (Some(list), None) => list,
            (None, Some(kind)) => vec![kind; n.saturating_sub(1)],
            (None, None) => vec![EntanglerKind::Cnot; n.saturating_sub(1)],
            (Some(_), Some(_)) => {
                return Err(Error::Format(
                    "circuit file sets both 'entangler' and 'entanglers'".into(),
                ))
            }
        };
        let spec = Self {
            n_qubits: n,
            topology: file.topology,
            entanglers,
            measured: file.measured.unwrap_or_else(|| (0..n).collect()),
            cartan_order: file.cartan_order.unwrap_or(CartanOrder::RightFirst),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Serialize)]
struct CircuitFile {
    version: u32,
    #[serde(flatten)]
    spec: AnsatzSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitFileIn {
    #[allow(dead_code)]
    version: u32,
    n_qubits: usize,
    topology: Topology,
    entanglers: Option<Vec<EntanglerKind>>,
    entangler: Option<EntanglerKind>,
    measured: Option<Vec<usize>>,
    cartan_order: Option<CartanOrder>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Gate {
    /// `exp(−iφZ)` on one qubit.
    Rz(usize),
    /// `exp(−iφY)` on one qubit.
    Ry(usize),
    /// Scalar `e^{−iφ}`.
    Phase,
    Pauli(Vec<(usize, Pauli)>),
    Cnot(usize, usize),
}

/// One gate `exp(−i·coeff·x·P)` with `x = params[param]`, or a fixed gate.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Op {
    pub gate: Gate,
    pub param: Option<usize>,
    pub coeff: f64,
}

impl Op {
    fn apply(&self, state: &mut Statevector, params: &[f64], extra: f64) -> Result<()> {
        let phi = self.param.map_or(0.0, |k| self.coeff * params[k]) + extra;
        match &self.gate {
            Gate::Rz(q) => {
                let z = C::new(0.0, 0.0);
                state.apply_1q(*q, &[C::from_polar(1.0, -phi), z, z, C::from_polar(1.0, phi)])
            }
            Gate::Ry(q) => {
                let (s, c) = phi.sin_cos();
                let (c, s) = (C::new(c, 0.0), C::new(s, 0.0));
                state.apply_1q(*q, &[c, -s, s, c])
            }
            Gate::Phase => {
                state.scale(C::from_polar(1.0, -phi));
                Ok(())
            }
            Gate::Pauli(word) => state.apply_pauli_rotation(word, phi),
            Gate::Cnot(c, t) => apply_cnot(state, *c, *t),
        }
    }
}

/// Flattened gate list of an ansatz, ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct CompiledAnsatz {
    spec: AnsatzSpec,
    ops: Vec<Op>,
    n_params: usize,
}

fn push_zyz(ops: &mut Vec<Op>, q: usize, base: usize) {
    // e^{iθ_p} R_Z(z1) R_Y(y) R_Z(z2): R_Z(z2) acts first
    ops.push(Op { gate: Gate::Rz(q), param: Some(base + 3), coeff: 0.5 });
    ops.push(Op { gate: Gate::Ry(q), param: Some(base + 2), coeff: 0.5 });
    ops.push(Op { gate: Gate::Rz(q), param: Some(base + 1), coeff: 0.5 });
    ops.push(Op { gate: Gate::Phase, param: Some(base), coeff: -1.0 });
}

impl CompiledAnsatz {
    pub fn new(spec: &AnsatzSpec) -> Result<Self> {
        spec.validate()?;
        let (blocks, tail) = spec.layout();
        let mut ops = Vec::new();
        for k in spec.block_order() {
            let b = &blocks[k];
            let (i, j) = b.pair;
            let (first, second) = match spec.cartan_order {
                CartanOrder::RightFirst => (b.right, b.left),
                CartanOrder::LeftFirst => (b.left, b.right),
            };
            push_zyz(&mut ops, i, first[0]);
            push_zyz(&mut ops, j, first[1]);
            match b.kind {
                EntanglerKind::Cnot => ops.push(Op {
                    gate: Gate::Cnot(i, j),
                    param: None,
                    coeff: 0.0,
                }),
                EntanglerKind::Crz => {
                    ops.push(Op {
                        gate: Gate::Pauli(vec![(j, Pauli::Z)]),
                        param: Some(b.entangler),
                        coeff: 0.25,
                    });
                    ops.push(Op {
                        gate: Gate::Pauli(vec![(i, Pauli::Z), (j, Pauli::Z)]),
                        param: Some(b.entangler),
                        coeff: -0.25,
                    });
                }
                EntanglerKind::Heisenberg => {
                    for (k, p) in [Pauli::X, Pauli::Y, Pauli::Z].into_iter().enumerate() {
                        ops.push(Op {
                            gate: Gate::Pauli(vec![(i, p), (j, p)]),
                            param: Some(b.entangler + k),
                            coeff: 1.0,
                        });
                    }
                }
            }
            push_zyz(&mut ops, i, second[0]);
            push_zyz(&mut ops, j, second[1]);
        }
        push_zyz(&mut ops, spec.n_qubits - 1, tail);
        Ok(Self {
            spec: spec.clone(),
            ops,
            n_params: tail + ZYZ_ARITY,
        })
    }

    pub fn spec(&self) -> &AnsatzSpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        self.n_params
    }

    fn check(&self, state: &Statevector, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params {
            return Err(Error::Config(format!(
                "ansatz takes {} parameters, got {}",
                self.n_params,
                params.len()
            )));
        }
        if state.n_qubits() != self.spec.n_qubits {
            return Err(Error::Dimension(format!(
                "state has {} qubits, ansatz {}",
                state.n_qubits(),
                self.spec.n_qubits
            )));
        }
        Ok(())
    }

    pub fn run(&self, state: &Statevector, params: &[f64]) -> Result<Statevector> {
        self.check(state, params)?;
        let mut s = state.clone();
        for op in &self.ops {
            op.apply(&mut s, params, 0.0)?;
        }
        Ok(s)
    }

    /// Expectations `⟨Z_q⟩` for the measured set.
    pub fn measure(&self, state: &Statevector) -> Result<Vec<f64>> {
        self.spec.measured.iter().map(|&q| state.expect_z(q)).collect()
    }

    /// Measured expectations and their Jacobians with respect to the
    /// circuit parameters (`[measured][param]`) and the encoding angles
    /// (`[measured][qubit]`), all by two-term parameter shifts.
    pub fn jacobian(&self, angles: &[f64], params: &[f64]) -> Result<Jacobian> {
        let input = Statevector::product_ry(angles)?;
        self.check(&input, params)?;
        let m = self.spec.measured.len();

        let mut prefix = Vec::with_capacity(self.ops.len() + 1);
        let mut s = input.clone();
        for op in &self.ops {
            prefix.push(s.clone());
            op.apply(&mut s, params, 0.0)?;
        }
        let values = self.measure(&s)?;

        let run_from = |k: usize, shift: f64| -> Result<Vec<f64>> {
            let mut s = prefix[k].clone();
            self.ops[k].apply(&mut s, params, shift)?;
            for op in &self.ops[k + 1..] {
                op.apply(&mut s, params, 0.0)?;
            }
            self.measure(&s)
        };

        let mut d_params = vec![vec![0.0; self.n_params]; m];
        for (k, op) in self.ops.iter().enumerate() {
            let Some(p) = op.param else { continue };
            if op.gate == Gate::Phase {
                continue;
            }
            let plus = run_from(k, FRAC_PI_4)?;
            let minus = run_from(k, -FRAC_PI_4)?;
            for r in 0..m {
                d_params[r][p] += op.coeff * (plus[r] - minus[r]);
            }
        }

        let mut d_angles = vec![vec![0.0; angles.len()]; m];
        let mut shifted = angles.to_vec();
        for j in 0..angles.len() {
            let mut eval = |delta: f64| -> Result<Vec<f64>> {
                shifted[j] = angles[j] + delta;
                let out = self.run(&Statevector::product_ry(&shifted)?, params)?;
                shifted[j] = angles[j];
                self.measure(&out)
            };
            let plus = eval(std::f64::consts::FRAC_PI_2)?;
            let minus = eval(-std::f64::consts::FRAC_PI_2)?;
            for r in 0..m {
                d_angles[r][j] = 0.5 * (plus[r] - minus[r]);
            }
        }
        Ok(Jacobian {
            values,
            d_params,
            d_angles,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub values: Vec<f64>,
    pub d_params: Vec<Vec<f64>>,
    pub d_angles: Vec<Vec<f64>>,
}

/// Applies the ansatz to `state`.
pub fn run_ansatz(state: &Statevector, spec: &AnsatzSpec, params: &[f64]) -> Result<Statevector> {
    CompiledAnsatz::new(spec)?.run(state, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn counts_and_layout() {
        let s = AnsatzSpec::uniform(4, Topology::Chain, EntanglerKind::Cnot);
        assert_eq!(s.param_count(), 3 * 16 + 4);
        let s = AnsatzSpec::uniform(3, Topology::Chain, EntanglerKind::Heisenberg);
        assert_eq!(s.param_count(), 2 * 19 + 4);
        let (blocks, _) = s.layout();
        assert_eq!(blocks[1].right, [19, 23]);
        assert_eq!(blocks[1].entangler, 27);
        assert_eq!(blocks[1].left, [30, 34]);
        assert_eq!(AnsatzSpec::uniform(1, Topology::Chain, EntanglerKind::Cnot).param_count(), 4);
    }

    #[test]
    fn brickwall_order_covers_the_same_pairs() {
        let s = AnsatzSpec::uniform(6, Topology::Brickwall, EntanglerKind::Cnot);
        assert_eq!(s.block_order(), vec![0, 2, 4, 1, 3]);
        let mut o = s.block_order();
        o.sort();
        assert_eq!(o, (0..5).collect::<Vec<_>>());
    }

    #[test]
    fn zero_params_cnot_is_identity_on_zero_state() {
        let spec = AnsatzSpec::uniform(4, Topology::Chain, EntanglerKind::Cnot);
        let zero = Statevector::zero(4).unwrap();
        let out = run_ansatz(&zero, &spec, &vec![0.0; spec.param_count()]).unwrap();
        assert!(out.distance(&zero) < 1e-15);
    }

    #[test]
    fn norm_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for kind in [EntanglerKind::Cnot, EntanglerKind::Crz, EntanglerKind::Heisenberg] {
            for topo in [Topology::Chain, Topology::Brickwall] {
                let spec = AnsatzSpec::uniform(5, topo, kind);
                let c = CompiledAnsatz::new(&spec).unwrap();
                let p: Vec<f64> = (0..c.param_count()).map(|_| rng.random_range(-3.0..3.0)).collect();
                let a: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
                let out = c.run(&Statevector::product_ry(&a).unwrap(), &p).unwrap();
                assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn layout_errors() {
        let spec = AnsatzSpec::uniform(2, Topology::Chain, EntanglerKind::Cnot);
        let zero = Statevector::zero(2).unwrap();
        assert!(matches!(run_ansatz(&zero, &spec, &[0.0; 3]), Err(Error::Config(_))));
        let mut bad = spec.clone();
        bad.measured = vec![5];
        assert!(bad.validate().is_err());
    }

    #[test]
    fn circuit_file_roundtrip() {
        let mut spec = AnsatzSpec::uniform(3, Topology::Brickwall, EntanglerKind::Crz);
        spec.entanglers[1] = EntanglerKind::Heisenberg;
        spec.measured = vec![0, 2];
        let text = spec.to_toml();
        assert!(text.contains("version = 1"));
        assert_eq!(AnsatzSpec::from_toml(&text).unwrap(), spec);
        let short = "version = 1\nn_qubits = 4\ntopology = \"chain\"\nentangler = \"heisenberg\"\n";
        let s = AnsatzSpec::from_toml(short).unwrap();
        assert_eq!(s.entanglers, vec![EntanglerKind::Heisenberg; 3]);
        assert_eq!(s.measured, vec![0, 1, 2, 3]);
        assert!(matches!(
            AnsatzSpec::from_toml("version = 9\nn_qubits = 2\ntopology = \"chain\""),
            Err(Error::Format(_))
        ));
    }
}

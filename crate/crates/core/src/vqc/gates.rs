use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::state::{Pauli, Statevector};
use crate::error::{Error, Result};

type C = Complex64;

/// `R_Y(θ) = exp(−iθY/2)`.
pub fn ry_matrix(theta: f64) -> [C; 4] {
    let (s, c) = (0.5 * theta).sin_cos();
    [C::new(c, 0.0), C::new(-s, 0.0), C::new(s, 0.0), C::new(c, 0.0)]
}

/// `R_Z(θ) = diag(e^{−iθ/2}, e^{iθ/2})`.
pub fn rz_matrix(theta: f64) -> [C; 4] {
    let z = C::new(0.0, 0.0);
    [C::from_polar(1.0, -0.5 * theta), z, z, C::from_polar(1.0, 0.5 * theta)]
}

pub fn matmul2(a: &[C; 4], b: &[C; 4]) -> [C; 4] {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

/// `e^{iθ_p} R_Z(θ_z1) R_Y(θ_y) R_Z(θ_z2)`.
pub fn zyz_matrix(theta_p: f64, z1: f64, y: f64, z2: f64) -> [C; 4] {
    let m = matmul2(&rz_matrix(z1), &matmul2(&ry_matrix(y), &rz_matrix(z2)));
    let ph = C::from_polar(1.0, theta_p);
    m.map(|x| ph * x)
}

/// Applies the general single-qubit unitary of [`zyz_matrix`].
pub fn apply_zyz(
    state: &mut Statevector,
    qubit: usize,
    theta_p: f64,
    z1: f64,
    y: f64,
    z2: f64,
) -> Result<()> {
    state.apply_1q(qubit, &zyz_matrix(theta_p, z1, y, z2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntanglerKind {
    Cnot,
    Crz,
    Heisenberg,
}

impl EntanglerKind {
    pub fn arity(self) -> usize {
        match self {
            Self::Cnot => 0,
            Self::Crz => 1,
            Self::Heisenberg => 3,
        }
    }
}

impl std::str::FromStr for EntanglerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cnot" => Ok(Self::Cnot),
            "crz" => Ok(Self::Crz),
            "heisenberg" => Ok(Self::Heisenberg),
            other => Err(Error::Config(format!(
                "unknown entangler '{other}' (expected cnot, crz or heisenberg)"
            ))),
        }
    }
}

impl std::fmt::Display for EntanglerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Cnot => "cnot",
            Self::Crz => "crz",
            Self::Heisenberg => "heisenberg",
        })
    }
}

pub(crate) fn apply_cnot(state: &mut Statevector, control: usize, target: usize) -> Result<()> {
    state.check_qubit(control)?;
    state.check_qubit(target)?;
    if control == target {
        return Err(Error::Config(format!("cnot on repeated qubit {control}")));
    }
    let (bc, bt) = (1usize << control, 1usize << target);
    let amps = state.amps_mut();
    for k in 0..amps.len() {
        if k & bc != 0 && k & bt == 0 {
            amps.swap(k, k | bt);
        }
    }
    Ok(())
}

/// Applies one entangler of the pool to `(i, j)`; `i` is the control for
/// the controlled gates.
///
/// `crz(θ)` is `|0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ R_Z(θ)`; `heisenberg(α)` is
/// `exp(−i(α_x XX + α_y YY + α_z ZZ))`, applied as its three commuting
/// factors.
pub fn apply_entangler(
    state: &mut Statevector,
    i: usize,
    j: usize,
    kind: EntanglerKind,
    params: &[f64],
) -> Result<()> {
    if params.len() != kind.arity() {
        return Err(Error::Config(format!(
            "{kind} takes {} parameter(s), got {}",
            kind.arity(),
            params.len()
        )));
    }
    if i == j {
        return Err(Error::Config(format!("entangler on repeated qubit {i}")));
    }
    match kind {
        EntanglerKind::Cnot => apply_cnot(state, i, j),
        EntanglerKind::Crz => {
            let t = params[0];
            state.apply_pauli_rotation(&[(j, Pauli::Z)], 0.25 * t)?;
            state.apply_pauli_rotation(&[(i, Pauli::Z), (j, Pauli::Z)], -0.25 * t)
        }
        EntanglerKind::Heisenberg => {
            for (p, &a) in [Pauli::X, Pauli::Y, Pauli::Z].into_iter().zip(params) {
                state.apply_pauli_rotation(&[(i, p), (j, p)], a)?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_state(n: usize, seed: u64) -> Statevector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut amps: Vec<C> = (0..1 << n)
            .map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        Statevector::from_amplitudes(amps).unwrap()
    }

    #[test]
    fn zyz_identity_and_flip() {
        let s0 = random_state(2, 1);
        let mut s = s0.clone();
        apply_zyz(&mut s, 1, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(s, s0);
        for &p in &[0.0, 0.4, -2.0] {
            let mut s = Statevector::zero(1).unwrap();
            apply_zyz(&mut s, 0, p, 0.0, PI, 0.0).unwrap();
            assert!((s.expect_z(0).unwrap() + 1.0).abs() < 1e-15);
            assert!((s.amplitudes()[1] - C::from_polar(1.0, p)).norm() < 1e-15);
        }
        assert!(matches!(
            apply_zyz(&mut Statevector::zero(1).unwrap(), 3, 0.0, 0.0, 0.0, 0.0),
            Err(Error::Index { .. })
        ));
    }

    #[test]
    fn zyz_is_unitary_and_matches_sequence() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a: [f64; 4] = std::array::from_fn(|_| rng.random_range(-PI..PI));
            let m = zyz_matrix(a[0], a[1], a[2], a[3]);
            let mh = [m[0].conj(), m[2].conj(), m[1].conj(), m[3].conj()];
            let id = matmul2(&mh, &m);
            for (k, x) in id.iter().enumerate() {
                let want = if k == 0 || k == 3 { 1.0 } else { 0.0 };
                assert!((x - C::new(want, 0.0)).norm() < 1e-12);
            }
            let mut s1 = random_state(2, 4);
            let mut s2 = s1.clone();
            apply_zyz(&mut s1, 0, a[0], a[1], a[2], a[3]).unwrap();
            s2.apply_1q(0, &rz_matrix(a[3])).unwrap();
            s2.apply_1q(0, &ry_matrix(a[2])).unwrap();
            s2.apply_1q(0, &rz_matrix(a[1])).unwrap();
            s2.scale(C::from_polar(1.0, a[0]));
            assert!(s1.distance(&s2) < 1e-12);
        }
    }

    #[test]
    fn cnot_truth_table() {
        // qubit 1 is the control; |10⟩ means qubit 1 set, i.e. index 2
        let mut s = Statevector::basis(2, 0b10).unwrap();
        apply_entangler(&mut s, 1, 0, EntanglerKind::Cnot, &[]).unwrap();
        assert_eq!(s, Statevector::basis(2, 0b11).unwrap());
        let mut s = Statevector::basis(2, 0b01).unwrap();
        apply_entangler(&mut s, 1, 0, EntanglerKind::Cnot, &[]).unwrap();
        assert_eq!(s, Statevector::basis(2, 0b01).unwrap());
    }

    #[test]
    fn heisenberg_zero_is_identity() {
        let s0 = random_state(3, 5);
        let mut s = s0.clone();
        apply_entangler(&mut s, 0, 2, EntanglerKind::Heisenberg, &[0.0; 3]).unwrap();
        assert!(s.distance(&s0) < 1e-15);
    }

    #[test]
    fn heisenberg_factor_order_is_irrelevant() {
        let s0 = random_state(3, 6);
        let alpha = [0.3, -1.1, 0.8];
        let paulis = [Pauli::X, Pauli::Y, Pauli::Z];
        let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut reference: Option<Statevector> = None;
        for ord in orders {
            let mut s = s0.clone();
            for k in ord {
                s.apply_pauli_rotation(&[(0, paulis[k]), (1, paulis[k])], alpha[k])
                    .unwrap();
            }
            match &reference {
                None => reference = Some(s),
                Some(r) => assert!(r.distance(&s) < 1e-12),
            }
        }
    }

    #[test]
    fn crz_matches_controlled_rotation() {
        let theta = 0.9;
        let s0 = random_state(2, 7);
        let mut s = s0.clone();
        apply_entangler(&mut s, 0, 1, EntanglerKind::Crz, &[theta]).unwrap();
        // control qubit 0, target qubit 1: amplitudes with bit0 = 1 get R_Z on bit1
        let a = s0.amplitudes();
        let rz = rz_matrix(theta);
        let want = [a[0], rz[0] * a[1], a[2], rz[3] * a[3]];
        for (x, y) in s.amplitudes().iter().zip(want) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn arity_is_checked() {
        let mut s = Statevector::zero(2).unwrap();
        assert!(matches!(
            apply_entangler(&mut s, 0, 1, EntanglerKind::Crz, &[]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            apply_entangler(&mut s, 0, 1, EntanglerKind::Heisenberg, &[0.0]),
            Err(Error::Config(_))
        ));
    }
}

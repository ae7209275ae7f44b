use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 20;

type C = Complex64;

/// Pure state over `n_qubits`; basis index bit `q` is qubit `q`
/// (qubit 0 least significant).
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<C>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Statevector {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_width(n_qubits)?;
        let mut amps = vec![C::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = C::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let mut s = Self::zero(n_qubits)?;
        if index >= s.amps.len() {
            return Err(Error::Dimension(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        s.amps[0] = C::new(0.0, 0.0);
        s.amps[index] = C::new(1.0, 0.0);
        Ok(s)
    }

    pub fn from_amplitudes(amps: Vec<C>) -> Result<Self> {
        let n = amps.len();
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::Dimension(format!(
                "amplitude count {n} is not a power of two"
            )));
        }
        let n_qubits = n.trailing_zeros() as usize;
        check_width(n_qubits)?;
        Ok(Self { n_qubits, amps })
    }

    /// `⊗_j R_Y(θ_j)|0⟩`.
    pub fn product_ry(angles: &[f64]) -> Result<Self> {
        let n = angles.len();
        check_width(n)?;
        let halves: Vec<(f64, f64)> = angles
            .iter()
            .map(|t| {
                let (s, c) = (0.5 * t).sin_cos();
                (c, s)
            })
            .collect();
        let amps = (0..1usize << n)
            .map(|z| {
                let mut a = 1.0;
                for (q, &(c, s)) in halves.iter().enumerate() {
                    a *= if z >> q & 1 == 0 { c } else { s };
                }
                C::new(a, 0.0)
            })
            .collect();
        Ok(Self { n_qubits: n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C] {
        &self.amps
    }

    pub(crate) fn amps_mut(&mut self) -> &mut [C] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub(crate) fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::Index {
                qubit,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    /// Applies a 2×2 matrix `m` (row-major) to `qubit`.
    pub fn apply_1q(&mut self, qubit: usize, m: &[C; 4]) -> Result<()> {
        self.check_qubit(qubit)?;
        let bit = 1usize << qubit;
        for k in 0..self.amps.len() {
            if k & bit == 0 {
                let (a0, a1) = (self.amps[k], self.amps[k | bit]);
                self.amps[k] = m[0] * a0 + m[1] * a1;
                self.amps[k | bit] = m[2] * a0 + m[3] * a1;
            }
        }
        Ok(())
    }

    /// Applies a 4×4 matrix on `(i, j)` whose local basis index is
    /// `2·b_i + b_j`.
    pub fn apply_2q(&mut self, i: usize, j: usize, m: &[C; 16]) -> Result<()> {
        self.check_qubit(i)?;
        self.check_qubit(j)?;
        if i == j {
            return Err(Error::Config(format!("two-qubit gate on repeated qubit {i}")));
        }
        let (bi, bj) = (1usize << i, 1usize << j);
        for k in 0..self.amps.len() {
            if k & bi == 0 && k & bj == 0 {
                let idx = [k, k | bj, k | bi, k | bi | bj];
                let v = idx.map(|x| self.amps[x]);
                for (r, &x) in idx.iter().enumerate() {
                    self.amps[x] = (0..4).map(|c| m[4 * r + c] * v[c]).sum();
                }
            }
        }
        Ok(())
    }

    /// Applies `exp(−i φ P)` for a Pauli word `P` (`P² = I`), as
    /// `cos φ ψ − i sin φ Pψ`.
    pub fn apply_pauli_rotation(&mut self, word: &[(usize, Pauli)], phi: f64) -> Result<()> {
        for &(q, _) in word {
            self.check_qubit(q)?;
        }
        let pw = self.apply_pauli_word(word);
        let (s, c) = phi.sin_cos();
        let mis = C::new(0.0, -s);
        for (a, p) in self.amps.iter_mut().zip(pw) {
            *a = *a * c + mis * p;
        }
        Ok(())
    }

    /// Returns `Pψ` without modifying the state.
    pub(crate) fn apply_pauli_word(&self, word: &[(usize, Pauli)]) -> Vec<C> {
        let mut flip = 0usize;
        for &(q, p) in word {
            if p != Pauli::Z {
                flip |= 1 << q;
            }
        }
        let mut out = vec![C::new(0.0, 0.0); self.amps.len()];
        for (k, &a) in self.amps.iter().enumerate() {
            let mut ph = C::new(1.0, 0.0);
            for &(q, p) in word {
                let b = k >> q & 1;
                ph *= match (p, b) {
                    (Pauli::X, _) => C::new(1.0, 0.0),
                    (Pauli::Y, 0) => C::new(0.0, 1.0),
                    (Pauli::Y, _) => C::new(0.0, -1.0),
                    (Pauli::Z, 0) => C::new(1.0, 0.0),
                    (Pauli::Z, _) => C::new(-1.0, 0.0),
                };
            }
            out[k ^ flip] += ph * a;
        }
        out
    }

    pub fn scale(&mut self, factor: C) {
        self.amps.iter_mut().for_each(|a| *a *= factor);
    }

    /// Exact `⟨Z_qubit⟩`.
    pub fn expect_z(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(k, a)| if k >> qubit & 1 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum())
    }

    pub fn inner(&self, other: &Self) -> C {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Euclidean distance between amplitude vectors.
    pub fn distance(&self, other: &Self) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

fn check_width(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Config(format!(
            "qubit count must be in 1..={MAX_QUBITS}, got {n}"
        )));
    }
    Ok(())
}

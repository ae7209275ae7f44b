//! Dense reference implementations shared by the integration tests.
#![allow(dead_code)]

use mpsvqc::vqc::{AnsatzSpec, CartanOrder, EntanglerKind, Topology};
use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const KINDS: [EntanglerKind; 3] = [EntanglerKind::Cnot, EntanglerKind::Crz, EntanglerKind::Heisenberg];

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn mat2(a: [[C; 2]; 2]) -> DMatrix<C> {
    DMatrix::from_fn(2, 2, |r, k| a[r][k])
}

/// `U` on qubit `q` of `n` (qubit 0 least significant).
pub fn lift1(n: usize, q: usize, u: &DMatrix<C>) -> DMatrix<C> {
    let hi = DMatrix::<C>::identity(1 << (n - 1 - q), 1 << (n - 1 - q));
    let lo = DMatrix::<C>::identity(1 << q, 1 << q);
    hi.kronecker(u).kronecker(&lo)
}

pub fn ry(t: f64) -> DMatrix<C> {
    let (s, co) = (t / 2.0).sin_cos();
    mat2([[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]])
}

pub fn rz(t: f64) -> DMatrix<C> {
    mat2([[C::from_polar(1.0, -t / 2.0), c(0.0, 0.0)], [c(0.0, 0.0), C::from_polar(1.0, t / 2.0)]])
}

pub fn zyz(p: &[f64]) -> DMatrix<C> {
    (rz(p[1]) * ry(p[2]) * rz(p[3])) * C::from_polar(1.0, p[0])
}

pub fn pauli(k: usize) -> DMatrix<C> {
    match k {
        0 => mat2([[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]),
        1 => mat2([[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]]),
        _ => mat2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]),
    }
}

pub fn projector(n: usize, q: usize, bit: usize) -> DMatrix<C> {
    let mut p = DMatrix::zeros(2, 2);
    p[(bit, bit)] = c(1.0, 0.0);
    lift1(n, q, &p)
}

/// Scaling-and-squaring Taylor series.
pub fn taylor_expm(a: &DMatrix<C>) -> DMatrix<C> {
    let norm: f64 = a.iter().map(|x| x.norm()).sum();
    let s = norm.log2().ceil().max(0.0) as i32 + 1;
    let b = a / C::new(2f64.powi(s), 0.0);
    let dim = a.nrows();
    let mut term = DMatrix::<C>::identity(dim, dim);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &b / C::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

pub fn entangler_matrix(n: usize, i: usize, j: usize, kind: EntanglerKind, p: &[f64]) -> DMatrix<C> {
    match kind {
        EntanglerKind::Cnot => projector(n, i, 0) + projector(n, i, 1) * lift1(n, j, &pauli(0)),
        EntanglerKind::Crz => projector(n, i, 0) + projector(n, i, 1) * lift1(n, j, &rz(p[0])),
        EntanglerKind::Heisenberg => {
            let mut h = DMatrix::<C>::zeros(1 << n, 1 << n);
            for k in 0..3 {
                h += (lift1(n, i, &pauli(k)) * lift1(n, j, &pauli(k))) * C::new(p[k], 0.0);
            }
            taylor_expm(&(h * c(0.0, -1.0)))
        }
    }
}

/// Full circuit unitary assembled from Kronecker products, following the
/// documented parameter layout.
pub fn dense_unitary(spec: &AnsatzSpec, params: &[f64]) -> DMatrix<C> {
    let n = spec.n_qubits;
    let dim = 1 << n;
    let mut off = vec![0];
    for k in &spec.entanglers {
        off.push(off.last().unwrap() + 16 + k.arity());
    }
    let order: Vec<usize> = match spec.topology {
        Topology::Chain => (0..n - 1).collect(),
        Topology::Brickwall => (0..n - 1).step_by(2).chain((1..n - 1).step_by(2)).collect(),
    };
    let mut u = DMatrix::<C>::identity(dim, dim);
    for b in order {
        let o = off[b];
        let kind = spec.entanglers[b];
        let right = o;
        let left = o + 8 + kind.arity();
        let (first, second) = match spec.cartan_order {
            CartanOrder::RightFirst => (right, left),
            CartanOrder::LeftFirst => (left, right),
        };
        let dress = |base: usize| {
            lift1(n, b, &zyz(&params[base..base + 4])) * lift1(n, b + 1, &zyz(&params[base + 4..base + 8]))
        };
        let ent = entangler_matrix(n, b, b + 1, kind, &params[o + 8..o + 8 + kind.arity()]);
        u = dress(second) * ent * dress(first) * u;
    }
    let tail = *off.last().unwrap();
    lift1(n, n - 1, &zyz(&params[tail..tail + 4])) * u
}

pub fn random_params(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-3.2..3.2)).collect()
}

pub fn random_spec(rng: &mut ChaCha8Rng, n: usize) -> AnsatzSpec {
    let topology = if rng.random_bool(0.5) { Topology::Chain } else { Topology::Brickwall };
    let mut spec = AnsatzSpec::uniform(n, topology, EntanglerKind::Cnot);
    for e in spec.entanglers.iter_mut() {
        *e = KINDS[rng.random_range(0..3)];
    }
    if rng.random_bool(0.5) {
        spec.cartan_order = CartanOrder::LeftFirst;
    }
    spec
}

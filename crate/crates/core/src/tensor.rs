//! Dense tensors with named indices.
//!
//! Every index of a [`Tensor`] carries a string label; contractions,
//! permutations and matrix views are all expressed in terms of labels so
//! that sweep code never relies on positional conventions.

use std::fmt;
use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Scalar types a [`Tensor`] can hold.
pub trait Scalar:
    Copy + Add<Output = Self> + Mul<Output = Self> + PartialEq + fmt::Debug + Send + Sync + 'static
{
    fn zero() -> Self;
    fn from_f64(x: f64) -> Self;
    fn norm_sqr(self) -> f64;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn norm_sqr(self) -> f64 {
        self * self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Dense row-major tensor with one distinct label per index.
#[derive(Clone, PartialEq)]
pub struct Tensor<T = f64> {
    shape: Vec<usize>,
    labels: Vec<String>,
    data: Vec<T>,
}

impl<T: Scalar> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("labels", &self.labels)
            .field("shape", &self.shape)
            .field("len", &self.data.len())
            .finish()
    }
}

fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    strides
}

fn check_labels(labels: &[String]) -> Result<()> {
    for (i, a) in labels.iter().enumerate() {
        if labels[..i].contains(a) {
            return Err(Error::LabelCollision(a.clone()));
        }
    }
    Ok(())
}

impl<T: Scalar> Tensor<T> {
    pub fn new<S: AsRef<str>>(labels: &[S], shape: &[usize], data: Vec<T>) -> Result<Self> {
        if labels.len() != shape.len() {
            return Err(Error::Dimension(format!(
                "{} labels for a rank-{} shape",
                labels.len(),
                shape.len()
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {expected} elements, got {}",
                data.len()
            )));
        }
        let labels: Vec<String> = labels.iter().map(|s| s.as_ref().to_string()).collect();
        check_labels(&labels)?;
        Ok(Self {
            shape: shape.to_vec(),
            labels,
            data,
        })
    }

    pub fn zeros<S: AsRef<str>>(labels: &[S], shape: &[usize]) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(labels, shape, vec![T::zero(); n])
    }

    /// Builds a tensor by evaluating `f` at every multi-index in row-major order.
    pub fn from_fn<S: AsRef<str>>(
        labels: &[S],
        shape: &[usize],
        mut f: impl FnMut(&[usize]) -> T,
    ) -> Result<Self> {
        let n: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for k in (0..shape.len()).rev() {
                idx[k] += 1;
                if idx[k] < shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Self::new(labels, shape, data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.axis(label).is_some()
    }

    pub fn axis(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn extent(&self, label: &str) -> Option<usize> {
        self.axis(label).map(|k| self.shape[k])
    }

    fn axis_or_err(&self, label: &str) -> Result<usize> {
        self.axis(label).ok_or_else(|| {
            Error::Dimension(format!("label `{label}` not present in {:?}", self.labels))
        })
    }

    pub fn strides(&self) -> Vec<usize> {
        row_major_strides(&self.shape)
    }

    /// Row-major flat offset of a multi-index.
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &n)| {
                debug_assert!(i < n);
                acc * n + i
            })
    }

    /// Inverse of [`Tensor::offset`].
    pub fn unravel(&self, mut offset: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for k in (0..self.shape.len()).rev() {
            idx[k] = offset % self.shape[k];
            offset /= self.shape[k];
        }
        idx
    }

    pub fn get(&self, idx: &[usize]) -> T {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: T) {
        let k = self.offset(idx);
        self.data[k] = value;
    }

    pub fn relabel(mut self, from: &str, to: &str) -> Result<Self> {
        let k = self.axis_or_err(from)?;
        if from != to && self.has_label(to) {
            return Err(Error::LabelCollision(to.to_string()));
        }
        self.labels[k] = to.to_string();
        Ok(self)
    }

    /// Reorders indices so that labels appear in `order`.
    pub fn permuted<S: AsRef<str>>(&self, order: &[S]) -> Result<Self> {
        if order.len() != self.rank() {
            return Err(Error::Dimension(format!(
                "permutation of rank {} given {} labels",
                self.rank(),
                order.len()
            )));
        }
        let perm: Vec<usize> = order
            .iter()
            .map(|l| self.axis_or_err(l.as_ref()))
            .collect::<Result<_>>()?;
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }
        let src_strides = self.strides();
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let gather: Vec<usize> = perm.iter().map(|&p| src_strides[p]).collect();
        let n = self.data.len();
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; new_shape.len()];
        let mut src = 0usize;
        for _ in 0..n {
            data.push(self.data[src]);
            for k in (0..new_shape.len()).rev() {
                idx[k] += 1;
                src += gather[k];
                if idx[k] < new_shape[k] {
                    break;
                }
                src -= gather[k] * new_shape[k];
                idx[k] = 0;
            }
        }
        let labels: Vec<String> = order.iter().map(|l| l.as_ref().to_string()).collect();
        Self::new(&labels, &new_shape, data)
    }

    pub fn scaled(&self, alpha: T) -> Self {
        Self {
            shape: self.shape.clone(),
            labels: self.labels.clone(),
            data: self.data.iter().map(|&x| alpha * x).collect(),
        }
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// See [`contract`].
    pub fn contract(&self, other: &Self, pairs: &[(&str, &str)]) -> Result<Self> {
        contract(self, other, pairs)
    }
}

/// Sums over the paired indices of `a` and `b`.
///
/// The result carries `a`'s free labels followed by `b`'s, each in their
/// original order. An empty `pairs` list gives the outer product.
pub fn contract<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, pairs: &[(&str, &str)]) -> Result<Tensor<T>> {
    let mut paired_a = Vec::with_capacity(pairs.len());
    let mut paired_b = Vec::with_capacity(pairs.len());
    for &(la, lb) in pairs {
        let ka = a.axis_or_err(la)?;
        let kb = b.axis_or_err(lb)?;
        if paired_a.contains(&ka) || paired_b.contains(&kb) {
            return Err(Error::Dimension(format!(
                "index paired twice in ({la}, {lb})"
            )));
        }
        if a.shape[ka] != b.shape[kb] {
            return Err(Error::Dimension(format!(
                "pair ({la}, {lb}) has extents {} and {}",
                a.shape[ka], b.shape[kb]
            )));
        }
        paired_a.push(ka);
        paired_b.push(kb);
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|k| !paired_a.contains(k)).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|k| !paired_b.contains(k)).collect();

    let mut out_labels: Vec<String> = free_a.iter().map(|&k| a.labels[k].clone()).collect();
    for &k in &free_b {
        if out_labels.contains(&b.labels[k]) {
            return Err(Error::LabelCollision(b.labels[k].clone()));
        }
        out_labels.push(b.labels[k].clone());
    }
    let mut out_shape: Vec<usize> = free_a.iter().map(|&k| a.shape[k]).collect();
    out_shape.extend(free_b.iter().map(|&k| b.shape[k]));

    let order_a: Vec<&str> = free_a
        .iter()
        .chain(&paired_a)
        .map(|&k| a.labels[k].as_str())
        .collect();
    let order_b: Vec<&str> = paired_b
        .iter()
        .chain(&free_b)
        .map(|&k| b.labels[k].as_str())
        .collect();
    let ap = a.permuted(&order_a)?;
    let bp = b.permuted(&order_b)?;

    let m: usize = free_a.iter().map(|&k| a.shape[k]).product();
    let n: usize = free_b.iter().map(|&k| b.shape[k]).product();
    let inner: usize = paired_a.iter().map(|&k| a.shape[k]).product();

    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let arow = &ap.data[i * inner..(i + 1) * inner];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &x) in arow.iter().enumerate() {
            let brow = &bp.data[p * n..(p + 1) * n];
            for (o, &y) in orow.iter_mut().zip(brow) {
                *o = *o + x * y;
            }
        }
    }
    Tensor::new(&out_labels, &out_shape, out)
}

/// Returns `t / (‖t‖_F + eps)` together with the pre-normalization norm.
pub fn frobenius_normalize<T: Scalar>(t: &Tensor<T>, eps: f64) -> (Tensor<T>, f64) {
    let norm = t.norm_fro();
    let inv = 1.0 / (norm + eps);
    (t.scaled(T::from_f64(inv)), norm)
}

/// Default smoothing term for [`frobenius_normalize`].
pub const NORMALIZE_EPS: f64 = 1e-6;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(labels: &[&str], shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(labels, shape, |_| rng.random_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn identity_contraction() {
        let a = Tensor::new(&["i", "j"], &[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = Tensor::new(&["j"], &[2], vec![1.0, 2.0]).unwrap();
        let c = contract(&a, &b, &[("j", "j")]).unwrap();
        assert_eq!(c.labels(), &["i".to_string()]);
        assert_eq!(c.data(), &[1.0, 2.0]);
    }

    #[test]
    fn empty_pairs_is_outer_product() {
        let a = Tensor::new(&["i"], &[2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::new(&["j"], &[2], vec![3.0, 4.0]).unwrap();
        let c = contract(&a, &b, &[]).unwrap();
        assert_eq!(c.shape(), &[2, 2]);
        assert_eq!(c.data(), &[3.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn three_index_against_loop_nest() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random(&["x", "y", "k"], &[2, 3, 4], &mut rng);
        let b = random(&["k", "z"], &[4, 5], &mut rng);
        let c = contract(&a, &b, &[("k", "k")]).unwrap();
        assert_eq!(c.labels(), &["x", "y", "z"]);
        for x in 0..2 {
            for y in 0..3 {
                for z in 0..5 {
                    let mut s = 0.0;
                    for k in 0..4 {
                        s += a.get(&[x, y, k]) * b.get(&[k, z]);
                    }
                    assert!((c.get(&[x, y, z]) - s).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn extent_mismatch_is_dimension_error() {
        let a = Tensor::<f64>::zeros(&["i"], &[2]).unwrap();
        let b = Tensor::<f64>::zeros(&["i"], &[3]).unwrap();
        assert!(matches!(contract(&a, &b, &[("i", "i")]), Err(Error::Dimension(_))));
    }

    #[test]
    fn surviving_duplicate_is_collision() {
        let a = Tensor::<f64>::zeros(&["i", "k"], &[2, 2]).unwrap();
        let b = Tensor::<f64>::zeros(&["k", "i"], &[2, 2]).unwrap();
        assert!(matches!(
            contract(&a, &b, &[("k", "k")]),
            Err(Error::LabelCollision(l)) if l == "i"
        ));
    }

    #[test]
    fn shape_and_label_invariants() {
        assert!(Tensor::new(&["i", "i"], &[1, 1], vec![0.0]).is_err());
        assert!(Tensor::new(&["i"], &[3], vec![0.0; 2]).is_err());
        assert!(Tensor::new(&["i", "j"], &[3], vec![0.0; 3]).is_err());
    }

    #[test]
    fn permute_moves_elements() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(&["a", "b", "c"], &[2, 3, 4], &mut rng);
        let p = a.permuted(&["c", "a", "b"]).unwrap();
        assert_eq!(p.shape(), &[4, 2, 3]);
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..4 {
                    assert_eq!(a.get(&[i, j, k]), p.get(&[k, i, j]));
                }
            }
        }
    }

    #[test]
    fn offset_round_trip() {
        let t = Tensor::<f64>::zeros(&["a", "b", "c"], &[3, 1, 5]).unwrap();
        for k in 0..t.len() {
            assert_eq!(t.offset(&t.unravel(k)), k);
        }
    }

    #[test]
    fn normalize_zero_and_345() {
        let z = Tensor::<f64>::zeros(&["i"], &[3]).unwrap();
        let (out, n) = frobenius_normalize(&z, 1e-6);
        assert_eq!(n, 0.0);
        assert!(out.data().iter().all(|&x| x == 0.0));

        let v = Tensor::new(&["i"], &[2], vec![3.0, 4.0]).unwrap();
        let (out, n) = frobenius_normalize(&v, 1e-6);
        assert_eq!(n, 5.0);
        assert!((out.data()[0] - 0.6).abs() < 4e-7);
        assert!((out.data()[1] - 0.8).abs() < 4e-7);
    }

    #[test]
    fn complex_contraction() {
        let i = Complex64::new(0.0, 1.0);
        let a = Tensor::new(&["p"], &[2], vec![i, Complex64::new(1.0, 0.0)]).unwrap();
        let b = Tensor::new(&["p"], &[2], vec![i, i]).unwrap();
        let c = contract(&a, &b, &[("p", "p")]).unwrap();
        assert_eq!(c.data(), &[Complex64::new(-1.0, 1.0)]);
    }
}

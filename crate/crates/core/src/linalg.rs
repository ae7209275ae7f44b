//! Matrix factorizations over labeled tensors, plus a small complex
//! matrix toolbox (exponential, spectral norm) used by the circuit code.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Outcome of [`svd_truncate`].
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// Left isometry with labels `rows ++ [bond]`.
    pub u: Tensor,
    /// Retained singular values, descending.
    pub s: Vec<f64>,
    /// Right isometry with labels `[bond] ++ cols`.
    pub v: Tensor,
    /// Sum of squared dropped singular values.
    pub discarded_weight: f64,
}

impl SvdResult {
    /// `v` with each row scaled by its singular value.
    pub fn sv(&self) -> Tensor {
        let mut out = self.v.clone();
        let cols = out.len() / self.s.len().max(1);
        for (r, &s) in self.s.iter().enumerate() {
            for x in &mut out.data_mut()[r * cols..(r + 1) * cols] {
                *x *= s;
            }
        }
        out
    }

    /// `u` with each column scaled by its singular value.
    pub fn us(&self) -> Tensor {
        let mut out = self.u.clone();
        let k = self.s.len();
        for (i, x) in out.data_mut().iter_mut().enumerate() {
            *x *= self.s[i % k];
        }
        out
    }
}

fn group_extents(t: &Tensor, labels: &[&str]) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| {
            t.extent(l)
                .ok_or_else(|| Error::Dimension(format!("label `{l}` not in {:?}", t.labels())))
        })
        .collect()
}

/// Views `t` as a matrix whose rows run over `rows` and columns over `cols`.
/// The two label groups must partition the tensor's labels.
pub fn to_matrix(t: &Tensor, rows: &[&str], cols: &[&str]) -> Result<DMatrix<f64>> {
    if rows.len() + cols.len() != t.rank() {
        return Err(Error::Dimension(format!(
            "row/col groups {rows:?} / {cols:?} do not partition {:?}",
            t.labels()
        )));
    }
    let order: Vec<&str> = rows.iter().chain(cols).copied().collect();
    let p = t.permuted(&order)?;
    let m: usize = group_extents(t, rows)?.iter().product();
    let n: usize = group_extents(t, cols)?.iter().product();
    Ok(DMatrix::from_row_slice(m, n, p.data()))
}

/// Inverse of [`to_matrix`] for freshly labeled row and column groups.
pub fn from_matrix(
    m: &DMatrix<f64>,
    rows: &[(&str, usize)],
    cols: &[(&str, usize)],
) -> Result<Tensor> {
    let labels: Vec<&str> = rows.iter().chain(cols).map(|(l, _)| *l).collect();
    let shape: Vec<usize> = rows.iter().chain(cols).map(|(_, n)| *n).collect();
    let (nr, nc) = m.shape();
    let mut data = Vec::with_capacity(nr * nc);
    for i in 0..nr {
        for j in 0..nc {
            data.push(m[(i, j)]);
        }
    }
    Tensor::new(&labels, &shape, data)
}

/// Singular value decomposition of `t` viewed as a `rows × cols` matrix,
/// keeping at most `chi_set` singular values.
///
/// Singular values are sorted descending and each left singular vector is
/// sign-fixed so that its largest-magnitude entry is positive; ties keep
/// the first such entry. The new bond index is labeled `bond` on both
/// factors.
pub fn svd_truncate(
    t: &Tensor,
    rows: &[&str],
    cols: &[&str],
    chi_set: Option<usize>,
    bond: &str,
) -> Result<SvdResult> {
    if chi_set == Some(0) {
        return Err(Error::Config("chi_set must be at least 1".into()));
    }
    if !t.all_finite() {
        return Err(Error::Numeric("svd input has non-finite entries".into()));
    }
    let row_ext = group_extents(t, rows)?;
    let col_ext = group_extents(t, cols)?;
    let m = to_matrix(t, rows, cols)?;
    let (nr, nc) = m.shape();
    let rank_extent = nr.min(nc);

    let (u_full, s_full, vt_full) = jacobi_svd(&m);

    let mut order: Vec<usize> = (0..rank_extent).collect();
    order.sort_by(|&a, &b| s_full[b].total_cmp(&s_full[a]));

    let keep = chi_set.map_or(rank_extent, |c| c.min(rank_extent));
    let discarded_weight: f64 = order[keep..].iter().map(|&k| s_full[k] * s_full[k]).sum();

    let mut u = DMatrix::<f64>::zeros(nr, keep);
    let mut vt = DMatrix::<f64>::zeros(keep, nc);
    let mut s = Vec::with_capacity(keep);
    for (dst, &src) in order[..keep].iter().enumerate() {
        let col = u_full.column(src);
        let mut pivot = 0;
        for i in 1..nr {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        u.set_column(dst, &(col * sign));
        vt.set_row(dst, &(vt_full.row(src) * sign));
        s.push(s_full[src].max(0.0));
    }

    let row_groups: Vec<(&str, usize)> = rows.iter().copied().zip(row_ext).collect();
    let col_groups: Vec<(&str, usize)> = cols.iter().copied().zip(col_ext).collect();
    let u = from_matrix(&u, &row_groups, &[(bond, keep)])?;
    let v = from_matrix(&vt, &[(bond, keep)], &col_groups)?;
    Ok(SvdResult {
        u,
        s,
        v,
        discarded_weight,
    })
}

/// Thin SVD `m = u · diag(s) · vt` by one-sided Jacobi rotations.
/// Columns of `u` belonging to zero singular values are completed to an
/// orthonormal set.
pub fn jacobi_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    if m.nrows() < m.ncols() {
        let (u, s, vt) = jacobi_svd(&m.transpose());
        return (vt.transpose(), s, u.transpose());
    }
    let (nr, nc) = m.shape();
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(nc, nc);
    for _ in 0..60 {
        let mut rotated = false;
        for p in 0..nc {
            for q in p + 1..nc {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..mat.nrows() {
                        let (x, y) = (mat[(i, p)], mat[(i, q)]);
                        mat[(i, p)] = c * x - s * y;
                        mat[(i, q)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma = DVector::from_iterator(nc, a.column_iter().map(|c| c.norm()));
    let tiny = sigma.max() * f64::EPSILON * nr as f64;
    let mut u = DMatrix::<f64>::zeros(nr, nc);
    let mut filled = Vec::with_capacity(nc);
    let mut order: Vec<usize> = (0..nc).collect();
    order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]));
    for &j in &order {
        if sigma[j] > tiny {
            u.set_column(j, &(a.column(j) / sigma[j]));
            filled.push(j);
        }
    }
    let mut e = 0;
    for &j in &order {
        if filled.contains(&j) {
            continue;
        }
        loop {
            let mut cand = DVector::<f64>::zeros(nr);
            cand[e] = 1.0;
            e += 1;
            for _ in 0..2 {
                for &k in &filled {
                    let proj = u.column(k).dot(&cand);
                    cand -= u.column(k) * proj;
                }
            }
            let n = cand.norm();
            if n > 0.5 {
                u.set_column(j, &(cand / n));
                filled.push(j);
                break;
            }
        }
    }
    (u, sigma, v.transpose())
}

/// Thin QR of `t` viewed as `rows × cols`: returns `(q, r)` with `q`
/// labeled `rows ++ [bond]` (orthonormal columns) and `r` labeled
/// `[bond] ++ cols`. The diagonal of `r` is made nonnegative so the
/// factorization is unique for full-rank input.
pub fn qr_split(t: &Tensor, rows: &[&str], cols: &[&str], bond: &str) -> Result<(Tensor, Tensor)> {
    if !t.all_finite() {
        return Err(Error::Numeric("qr input has non-finite entries".into()));
    }
    let row_ext = group_extents(t, rows)?;
    let col_ext = group_extents(t, cols)?;
    let m = to_matrix(t, rows, cols)?;
    let (q, r) = thin_qr(m);
    let k = q.ncols();
    let row_groups: Vec<(&str, usize)> = rows.iter().copied().zip(row_ext).collect();
    let col_groups: Vec<(&str, usize)> = cols.iter().copied().zip(col_ext).collect();
    Ok((
        from_matrix(&q, &row_groups, &[(bond, k)])?,
        from_matrix(&r, &[(bond, k)], &col_groups)?,
    ))
}

/// LQ split of `t` viewed as `rows × cols`: returns `(l, q)` where `q`
/// (labeled `[bond] ++ cols`) has orthonormal rows.
pub fn lq_split(t: &Tensor, rows: &[&str], cols: &[&str], bond: &str) -> Result<(Tensor, Tensor)> {
    if !t.all_finite() {
        return Err(Error::Numeric("lq input has non-finite entries".into()));
    }
    let row_ext = group_extents(t, rows)?;
    let col_ext = group_extents(t, cols)?;
    let m = to_matrix(t, rows, cols)?;
    let (q, r) = thin_qr(m.transpose());
    let k = q.ncols();
    let row_groups: Vec<(&str, usize)> = rows.iter().copied().zip(row_ext).collect();
    let col_groups: Vec<(&str, usize)> = cols.iter().copied().zip(col_ext).collect();
    Ok((
        from_matrix(&r.transpose(), &row_groups, &[(bond, k)])?,
        from_matrix(&q.transpose(), &[(bond, k)], &col_groups)?,
    ))
}

fn thin_qr(m: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = m.qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for k in 0..r.nrows().min(r.ncols()) {
        if r[(k, k)] < 0.0 {
            r.row_mut(k).neg_mut();
            q.column_mut(k).neg_mut();
        }
    }
    (q, r)
}

/// `‖AᵀA − I‖_F` for `t` viewed as `rows × cols`.
pub fn left_isometry_residual(t: &Tensor, rows: &[&str], cols: &[&str]) -> Result<f64> {
    let m = to_matrix(t, rows, cols)?;
    let g = m.transpose() * &m;
    Ok((g - DMatrix::identity(m.ncols(), m.ncols())).norm())
}

/// `‖AAᵀ − I‖_F` for `t` viewed as `rows × cols`.
pub fn right_isometry_residual(t: &Tensor, rows: &[&str], cols: &[&str]) -> Result<f64> {
    let m = to_matrix(t, rows, cols)?;
    let g = &m * m.transpose();
    Ok((g - DMatrix::identity(m.nrows(), m.nrows())).norm())
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.unscale(2f64.powi(squarings as i32));
    let mut term = DMatrix::<Complex64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=24 {
        term = &term * &scaled / Complex64::new(k as f64, 0.0);
        sum += &term;
        if term.iter().all(|z| z.norm() < 1e-18) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<Complex64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

pub fn is_hermitian(a: &DMatrix<Complex64>, tol: f64) -> bool {
    a.is_square() && (a - a.adjoint()).iter().all(|z| z.norm() <= tol)
}

/// Least-squares fit of `log y = slope · log x + intercept`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Config(
            "log-log fit needs at least two matching points".into(),
        ));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Numeric(
            "log-log fit needs strictly positive finite values".into(),
        ));
    }
    let lx = DVector::from_iterator(xs.len(), xs.iter().map(|x| x.ln()));
    let ly = DVector::from_iterator(ys.len(), ys.iter().map(|y| y.ln()));
    let n = xs.len() as f64;
    let mx = lx.sum() / n;
    let my = ly.sum() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(ly.iter()).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(&["r", "c"], &[rows, cols], |_| rng.random_range(-1.0..1.0)).unwrap()
    }

    fn reconstruct(res: &SvdResult) -> Tensor {
        res.us().contract(&res.v, &[("b", "b")]).unwrap()
    }

    fn diff_sq(a: &Tensor, b: &Tensor) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).powi(2))
            .sum()
    }

    #[test]
    fn diagonal_rank_one() {
        let t = Tensor::new(&["r", "c"], &[2, 2], vec![3.0, 0.0, 0.0, 1.0]).unwrap();
        let res = svd_truncate(&t, &["r"], &["c"], Some(1), "b").unwrap();
        assert_eq!(res.s.len(), 1);
        assert!((res.s[0] - 3.0).abs() < 1e-14);
        assert!((res.discarded_weight - 1.0).abs() < 1e-14);
        assert!((diff_sq(&reconstruct(&res), &t).sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lossless_reconstruction_and_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (r, c) in [(5, 3), (3, 5), (6, 6), (1, 4)] {
            let t = random_matrix(r, c, &mut rng);
            let res = svd_truncate(&t, &["r"], &["c"], None, "b").unwrap();
            assert_eq!(res.discarded_weight, 0.0);
            assert!(diff_sq(&reconstruct(&res), &t).sqrt() <= 1e-10);
            assert!(left_isometry_residual(&res.u, &["r"], &["b"]).unwrap() <= 1e-10);
            assert!(right_isometry_residual(&res.v, &["b"], &["c"]).unwrap() <= 1e-10);
            assert!(res.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn sign_convention_is_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = random_matrix(4, 4, &mut rng);
        let res = svd_truncate(&t, &["r"], &["c"], None, "b").unwrap();
        for k in 0..4 {
            let col: Vec<f64> = (0..4).map(|i| res.u.get(&[i, k])).collect();
            let pivot = col
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(pivot > 0.0);
        }
        let again = svd_truncate(&t, &["r"], &["c"], None, "b").unwrap();
        assert_eq!(res.u, again.u);
        assert_eq!(res.v, again.v);
    }

    #[test]
    fn non_finite_rejected() {
        let t = Tensor::new(&["r", "c"], &[1, 2], vec![f64::NAN, 1.0]).unwrap();
        assert!(matches!(
            svd_truncate(&t, &["r"], &["c"], None, "b"),
            Err(Error::Numeric(_))
        ));
        assert!(matches!(
            svd_truncate(&t, &["r"], &["c"], Some(0), "b"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn qr_and_lq_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (r, c) in [(6, 3), (3, 6), (4, 4)] {
            let t = random_matrix(r, c, &mut rng);
            let (q, rr) = qr_split(&t, &["r"], &["c"], "b").unwrap();
            assert!(left_isometry_residual(&q, &["r"], &["b"]).unwrap() < 1e-12);
            let back = q.contract(&rr, &[("b", "b")]).unwrap();
            assert!(diff_sq(&back, &t) < 1e-24);

            let (l, q) = lq_split(&t, &["r"], &["c"], "b").unwrap();
            assert!(right_isometry_residual(&q, &["b"], &["c"]).unwrap() < 1e-12);
            let back = l.contract(&q, &[("b", "b")]).unwrap();
            assert!(diff_sq(&back, &t) < 1e-24);
        }
    }

    #[test]
    fn qr_of_isometry_is_identity_gauge() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let t = random_matrix(6, 3, &mut rng);
        let (q, _) = qr_split(&t, &["r"], &["c"], "c2").unwrap();
        let q = q.relabel("c2", "c").unwrap();
        let (q2, r2) = qr_split(&q, &["r"], &["c"], "b").unwrap();
        let q2 = q2.relabel("b", "c").unwrap();
        assert!(diff_sq(&q, &q2) < 1e-26);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((r2.get(&[i, j]) - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn expm_of_pauli_rotation() {
        // exp(-i θ X) = cos θ I - i sin θ X
        let theta = 0.7;
        let i = Complex64::new(0.0, 1.0);
        let x = DMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        );
        let e = expm(&(x.clone() * (-i * theta)));
        let expect = DMatrix::identity(2, 2) * Complex64::new(theta.cos(), 0.0) - x * (i * theta.sin());
        assert!((e - expect).norm() < 1e-14);
    }

    #[test]
    fn expm_of_large_diagonal() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(3.0, 0.0),
            Complex64::new(-2.0, 1.5),
        ]));
        let e = expm(&d);
        assert!((e[(0, 0)] - Complex64::new(3.0f64.exp(), 0.0)).norm() < 1e-12 * 3.0f64.exp());
        assert!((e[(1, 1)] - Complex64::new(-2.0, 1.5).exp()).norm() < 1e-13);
        assert!(e[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn loglog_fit_recovers_power() {
        let xs = [0.1, 0.01, 0.001];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        let (slope, icpt) = fit_loglog(&xs, &ys).unwrap();
        assert!((slope - 2.0).abs() < 1e-12);
        assert!((icpt.exp() - 3.0).abs() < 1e-10);
    }
}

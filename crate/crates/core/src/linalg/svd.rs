//! Singular value decomposition by Householder bidiagonalization followed by
//! implicit-shift QR sweeps on the bidiagonal (Golub–Kahan–Reinsch).
//!
//! Work arrays are column-major so the column sweeps and Givens rotations run
//! over contiguous memory.

use rayon::prelude::*;

use crate::error::{AlsiError, Result};
use crate::linalg::lowrank::svd_low_rank;
use crate::linalg::matrix::Matrix;
use crate::linalg::columns::{for_each_column, transpose_buf};
use crate::linalg::sign::canonicalize_pairs;
use crate::scalar::Real;

/// Rows per task when the row transformation is split across threads.
const ROW_BLOCK: usize = 256;

/// Thin SVD `a = u · diag(sigma) · vᵀ` with `k = min(rows, cols)` columns in `u` and `v`.
#[derive(Debug, Clone)]
pub struct SvdResult<T: Real = f64> {
    pub u: Matrix<T>,
    pub sigma: Vec<T>,
    pub v: Matrix<T>,
}

impl<T: Real> SvdResult<T> {
    /// `u · diag(sigma) · vᵀ`
    pub fn reconstruct(&self) -> Matrix<T> {
        let us = Matrix::from_fn(self.u.rows(), self.u.cols(), |i, j| {
            self.u[(i, j)] * self.sigma[j]
        });
        us.matmul_t(&self.v).expect("svd factors are conformable")
    }

    /// Number of singular values above `rank_eps · sigma_max`.
    pub fn numerical_rank(&self) -> usize {
        let cutoff = self.sigma.first().copied().unwrap_or_else(T::zero) * T::rank_eps();
        self.sigma.iter().take_while(|&&s| s > cutoff).count()
    }
}

/// Singular value decomposition of a finite, non-empty matrix.
///
/// Singular values are non-negative and non-increasing. Each left singular
/// vector has a non-negative largest-magnitude entry; the paired right vector
/// is flipped with it.
pub fn svd<T: Real>(a: &Matrix<T>) -> Result<SvdResult<T>> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(AlsiError::Contract(format!(
            "svd of an empty {m}x{n} matrix"
        )));
    }
    let factor = |x: &Matrix<T>| svd_low_rank(x, golub_kahan).unwrap_or_else(|| golub_kahan(x));
    let (mut u, sigma, mut v) = if m >= n {
        factor(a)?
    } else {
        let (u, s, v) = factor(&a.transpose())?;
        (v, s, u)
    };
    canonicalize_pairs(&mut u, Some(&mut v));
    Ok(SvdResult { u, sigma, v })
}

/// Core routine for `rows >= cols`; returns `u` (m×n), `s` (n) and `v` (n×n).
#[allow(clippy::many_single_char_names)]
fn golub_kahan<T: Real>(input: &Matrix<T>) -> Result<(Matrix<T>, Vec<T>, Matrix<T>)> {
    let (m, n) = input.shape();
    debug_assert!(m >= n);
    let zero = T::zero();
    let one = T::one();
    let two = T::lit(2.0);

    // column-major working copies
    let mut a = vec![zero; m * n];
    for i in 0..m {
        for j in 0..n {
            a[j * m + i] = input[(i, j)];
        }
    }
    let nu = n;
    let mut s = vec![zero; (m + 1).min(n)];
    let mut u = vec![zero; m * nu];
    let mut v = vec![zero; n * n];
    let mut e = vec![zero; n];
    let mut work = vec![zero; m];
    let mut pivot = vec![zero; m];

    let nct = (m - 1).min(n);
    let nrt = n.saturating_sub(2).min(m);
    for k in 0..nct.max(nrt) {
        if k < nct {
            // Householder for column k; diagonal lands in s[k]
            let mut norm = zero;
            for i in k..m {
                norm = norm.hypot(a[k * m + i]);
            }
            s[k] = norm;
            if s[k] != zero {
                if a[k * m + k] < zero {
                    s[k] = -s[k];
                }
                let sk = s[k];
                for x in &mut a[k * m + k..k * m + m] {
                    *x = *x / sk;
                }
                a[k * m + k] = a[k * m + k] + one;
            }
            s[k] = -s[k];
        }
        if k < nct && s[k] != zero {
            pivot[k..].copy_from_slice(&a[k * m + k..k * m + m]);
            reflect_columns(&mut a[(k + 1) * m..], m, k, &pivot[k..]);
        }
        for j in (k + 1)..n {
            // row k feeds the row transformation
            e[j] = a[j * m + k];
        }
        if k < nct {
            u[k * m + k..k * m + m].copy_from_slice(&a[k * m + k..k * m + m]);
        }
        if k < nrt {
            let mut norm = zero;
            for &x in &e[k + 1..n] {
                norm = norm.hypot(x);
            }
            e[k] = norm;
            if e[k] != zero {
                if e[k + 1] < zero {
                    e[k] = -e[k];
                }
                let ek = e[k];
                for x in &mut e[k + 1..n] {
                    *x = *x / ek;
                }
                e[k + 1] = e[k + 1] + one;
            }
            e[k] = -e[k];
            if k + 1 < m && e[k] != zero {
                {
                    let (ee, cols) = (&e[k + 1..n], &a[(k + 1) * m..]);
                    let fill = |start: usize, chunk: &mut [T]| {
                        for w in chunk.iter_mut() {
                            *w = zero;
                        }
                        for (jj, &ej) in ee.iter().enumerate() {
                            let col = &cols[jj * m + start..jj * m + start + chunk.len()];
                            for (w, &x) in chunk.iter_mut().zip(col) {
                                *w = *w + ej * x;
                            }
                        }
                    };
                    let rows = &mut work[k + 1..m];
                    if rows.len() * ee.len() >= 1 << 15 {
                        rows.par_chunks_mut(ROW_BLOCK)
                            .enumerate()
                            .for_each(|(b, chunk)| fill(k + 1 + b * ROW_BLOCK, chunk));
                    } else {
                        fill(k + 1, rows);
                    }
                }
                let (ee, ww) = (&e[k + 1..n], &work[k + 1..m]);
                let ek1 = ee[0];
                for_each_column(&mut a[(k + 1) * m..n * m], m, |jj, col| {
                    let t = -ee[jj] / ek1;
                    for (x, &w) in col[k + 1..].iter_mut().zip(ww) {
                        *x = *x + t * w;
                    }
                });
            }
            for i in (k + 1)..n {
                v[k * n + i] = e[i];
            }
        }
    }

    // final bidiagonal of order p
    let mut p = n.min(m + 1);
    if nct < n {
        s[nct] = a[nct * m + nct];
    }
    if m < p {
        s[p - 1] = zero;
    }
    if nrt + 1 < p {
        e[nrt] = a[(p - 1) * m + nrt];
    }
    e[p - 1] = zero;

    // generate U
    for j in nct..nu {
        for x in &mut u[j * m..j * m + m] {
            *x = zero;
        }
        u[j * m + j] = one;
    }
    for k in (0..nct).rev() {
        if s[k] != zero {
            pivot[k..].copy_from_slice(&u[k * m + k..k * m + m]);
            reflect_columns(&mut u[(k + 1) * m..], m, k, &pivot[k..]);
            for x in &mut u[k * m + k..k * m + m] {
                *x = -*x;
            }
            u[k * m + k] = one + u[k * m + k];
            for x in &mut u[k * m..k * m + k] {
                *x = zero;
            }
        } else {
            for x in &mut u[k * m..k * m + m] {
                *x = zero;
            }
            u[k * m + k] = one;
        }
    }

    // generate V
    for k in (0..n).rev() {
        if k < nrt && e[k] != zero {
            pivot[k + 1..n].copy_from_slice(&v[k * n + k + 1..k * n + n]);
            reflect_columns(&mut v[(k + 1) * n..], n, k + 1, &pivot[k + 1..n]);
        }
        for x in &mut v[k * n..k * n + n] {
            *x = zero;
        }
        v[k * n + k] = one;
    }

    // QR iteration on the bidiagonal
    let pp = p - 1;
    let eps = T::epsilon();
    let tiny = T::min_positive_value() / eps;
    let max_steps = 75 * n.max(10);
    let mut steps = 0usize;
    while p > 0 {
        // locate negligible superdiagonal / diagonal entries
        let mut k = p as isize - 2;
        while k >= 0 {
            let ku = k as usize;
            if e[ku].abs() <= tiny + eps * (s[ku].abs() + s[ku + 1].abs()) {
                e[ku] = zero;
                break;
            }
            k -= 1;
        }
        let kase;
        if k == p as isize - 2 {
            kase = 4;
        } else {
            let mut ks = p as isize - 1;
            while ks > k {
                let ksu = ks as usize;
                let t = (if ksu != p { e[ksu].abs() } else { zero })
                    + (if ks != k + 1 { e[ksu - 1].abs() } else { zero });
                if s[ksu].abs() <= tiny + eps * t {
                    s[ksu] = zero;
                    break;
                }
                ks -= 1;
            }
            if ks == k {
                kase = 3;
            } else if ks == p as isize - 1 {
                kase = 1;
            } else {
                kase = 2;
                k = ks;
            }
        }
        let k = (k + 1) as usize;

        match kase {
            // deflate negligible s[p-1]
            1 => {
                let mut f = e[p - 2];
                e[p - 2] = zero;
                for j in (k..=p - 2).rev() {
                    let t = s[j].hypot(f);
                    let cs = s[j] / t;
                    let sn = f / t;
                    s[j] = t;
                    if j != k {
                        f = -sn * e[j - 1];
                        e[j - 1] = cs * e[j - 1];
                    }
                    rotate_columns(&mut v, n, j, p - 1, cs, sn);
                }
            }
            // split at negligible s[k-1]
            2 => {
                let mut f = e[k - 1];
                e[k - 1] = zero;
                for j in k..p {
                    let t = s[j].hypot(f);
                    let cs = s[j] / t;
                    let sn = f / t;
                    s[j] = t;
                    f = -sn * e[j];
                    e[j] = cs * e[j];
                    rotate_columns(&mut u, m, j, k - 1, cs, sn);
                }
            }
            // one implicit-shift QR step
            3 => {
                steps += 1;
                if steps > max_steps {
                    return Err(AlsiError::FactorizationFailure {
                        routine: "svd",
                        matrix: "input".into(),
                        iterations: steps,
                    });
                }
                let scale = s[p - 1]
                    .abs()
                    .max(s[p - 2].abs())
                    .max(e[p - 2].abs())
                    .max(s[k].abs())
                    .max(e[k].abs());
                let sp = s[p - 1] / scale;
                let spm1 = s[p - 2] / scale;
                let epm1 = e[p - 2] / scale;
                let sk = s[k] / scale;
                let ek = e[k] / scale;
                let b = ((spm1 + sp) * (spm1 - sp) + epm1 * epm1) / two;
                let c = (sp * epm1) * (sp * epm1);
                let mut shift = zero;
                if b != zero || c != zero {
                    shift = (b * b + c).sqrt();
                    if b < zero {
                        shift = -shift;
                    }
                    shift = c / (b + shift);
                }
                let mut f = (sk + sp) * (sk - sp) + shift;
                let mut g = sk * ek;
                for j in k..(p - 1) {
                    let mut t = f.hypot(g);
                    let mut cs = f / t;
                    let mut sn = g / t;
                    if j != k {
                        e[j - 1] = t;
                    }
                    f = cs * s[j] + sn * e[j];
                    e[j] = cs * e[j] - sn * s[j];
                    g = sn * s[j + 1];
                    s[j + 1] = cs * s[j + 1];
                    rotate_columns(&mut v, n, j, j + 1, cs, sn);
                    t = f.hypot(g);
                    cs = f / t;
                    sn = g / t;
                    s[j] = t;
                    f = cs * e[j] + sn * s[j + 1];
                    s[j + 1] = -sn * e[j] + cs * s[j + 1];
                    g = sn * e[j + 1];
                    e[j + 1] = cs * e[j + 1];
                    if j < m - 1 {
                        rotate_columns(&mut u, m, j, j + 1, cs, sn);
                    }
                }
                e[p - 2] = f;
            }
            // convergence of s[k]
            _ => {
                let mut k = k;
                if s[k] <= zero {
                    s[k] = if s[k] < zero { -s[k] } else { zero };
                    for x in &mut v[k * n..k * n + pp + 1] {
                        *x = -*x;
                    }
                }
                while k < pp {
                    if s[k] >= s[k + 1] {
                        break;
                    }
                    s.swap(k, k + 1);
                    if k < n - 1 {
                        swap_columns(&mut v, n, k, k + 1);
                    }
                    if k < m - 1 {
                        swap_columns(&mut u, m, k, k + 1);
                    }
                    k += 1;
                }
                p -= 1;
            }
        }
    }

    s.truncate(n);
    Ok((
        Matrix::from_raw(m, nu, transpose_buf(&u, m, nu)),
        s,
        Matrix::from_raw(n, n, transpose_buf(&v, n, n)),
    ))
}

/// Apply the reflector stored in `pivot` (rows `start..`) to every column of
/// the column-major block `cols`.
fn reflect_columns<T: Real>(cols: &mut [T], rows: usize, start: usize, pivot: &[T]) {
    let lead = pivot[0];
    for_each_column(cols, rows, |_, col| {
        let col = &mut col[start..];
        let mut t = T::zero();
        for (&p, &x) in pivot.iter().zip(col.iter()) {
            t = t + p * x;
        }
        t = -t / lead;
        for (x, &p) in col.iter_mut().zip(pivot) {
            *x = *x + t * p;
        }
    });
}

/// Apply the plane rotation `(x_a, x_b) <- (c x_a + s x_b, -s x_a + c x_b)`
/// to columns `a` and `b` of a column-major buffer.
#[inline]
fn rotate_columns<T: Real>(buf: &mut [T], rows: usize, a: usize, b: usize, cs: T, sn: T) {
    debug_assert_ne!(a, b);
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let (head, tail) = buf.split_at_mut(hi * rows);
    let col_lo = &mut head[lo * rows..lo * rows + rows];
    let col_hi = &mut tail[..rows];
    let (col_a, col_b) = if a < b {
        (col_lo, col_hi)
    } else {
        (col_hi, col_lo)
    };
    for (xa, xb) in col_a.iter_mut().zip(col_b.iter_mut()) {
        let t = cs * *xa + sn * *xb;
        *xb = -sn * *xa + cs * *xb;
        *xa = t;
    }
}

#[inline]
fn swap_columns<T: Real>(buf: &mut [T], rows: usize, a: usize, b: usize) {
    for i in 0..rows {
        buf.swap(a * rows + i, b * rows + i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthonormal_columns(q: &Matrix<f64>) -> f64 {
        let g = q.transpose().matmul(q).unwrap();
        g.sub(&Matrix::identity(q.cols())).unwrap().max_abs()
    }

    #[test]
    fn identity_is_its_own_svd() {
        let r = svd(&Matrix::<f64>::identity(3)).unwrap();
        assert_eq!(r.sigma, vec![1.0, 1.0, 1.0]);
        assert!(r.u.sub(&Matrix::identity(3)).unwrap().max_abs() < 1e-15);
        assert!(r.v.sub(&Matrix::identity(3)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn diagonal_values_sorted() {
        let r = svd(&Matrix::<f64>::from_diag(&[2.0, 3.0])).unwrap();
        assert!((r.sigma[0] - 3.0).abs() < 1e-15 && (r.sigma[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn exchange_matrix_has_unit_singular_values() {
        // AᵀA = I, characteristic polynomial (λ-1)²
        let a = Matrix::<f64>::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let r = svd(&a).unwrap();
        for s in &r.sigma {
            assert!((s - 1.0).abs() < 1e-14);
        }
        assert!(r.reconstruct().rel_diff(&a) < 1e-14);
    }

    #[test]
    fn wide_tall_and_rank_deficient() {
        let tall = Matrix::<f64>::from_fn(7, 3, |i, j| ((i * 5 + j * 11) % 7) as f64 - 3.0);
        let wide = tall.transpose();
        let mut def = Matrix::<f64>::from_fn(5, 5, |i, j| (i + 1) as f64 * (j as f64 - 2.0));
        def[(0, 0)] += 1.0;
        for a in [tall, wide, def, Matrix::zeros(3, 3)] {
            let r = svd(&a).unwrap();
            let k = a.rows().min(a.cols());
            assert_eq!(r.u.shape(), (a.rows(), k));
            assert_eq!(r.v.shape(), (a.cols(), k));
            assert!(orthonormal_columns(&r.u) < 1e-12);
            assert!(orthonormal_columns(&r.v) < 1e-12);
            assert!(r.sigma.windows(2).all(|w| w[0] >= w[1]));
            let rec = r.reconstruct();
            assert!(rec.sub(&a).unwrap().frobenius_norm() <= 1e-12 * a.frobenius_norm().max(1.0));
        }
    }

    #[test]
    fn single_precision_works() {
        let a = Matrix::<f32>::from_fn(4, 4, |i, j| ((i * 3 + j) % 5) as f32 * 0.5 + if i == j { 2.0 } else { 0.0 });
        let r = svd(&a).unwrap();
        assert!(r.reconstruct().rel_diff(&a) < 1e-5);
    }
}

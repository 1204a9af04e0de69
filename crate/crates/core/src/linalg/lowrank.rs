//! Shortcut for large, numerically low-rank inputs. A column-pivoted
//! Householder QR stops once every residual column is negligible; the dense
//! solvers then run on the small core and the orthogonal factors supply the
//! null-space directions.

use crate::error::Result;
use crate::linalg::columns::{for_each_column, transpose_buf};
use crate::linalg::matrix::Matrix;
use crate::scalar::Real;

/// Smallest dimension for which the shortcut is attempted.
const MIN_DIM: usize = 128;

/// The shortcut is abandoned once the rank exceeds `dim / MAX_RANK_DIVISOR`.
const MAX_RANK_DIVISOR: usize = 4;

/// `H = I - beta · w wᵀ` acting on rows `offset..`.
struct Reflector<T> {
    offset: usize,
    w: Vec<T>,
    beta: T,
}

impl<T: Real> Reflector<T> {
    fn apply(&self, col: &mut [T]) {
        if self.beta == T::zero() {
            return;
        }
        let col = &mut col[self.offset..];
        let mut t = T::zero();
        for (&w, &x) in self.w.iter().zip(col.iter()) {
            t = t + w * x;
        }
        t = t * self.beta;
        for (x, &w) in col.iter_mut().zip(&self.w) {
            *x = *x - t * w;
        }
    }
}

struct Qr<T> {
    reflectors: Vec<Reflector<T>>,
    /// `rank × cols`, row-major, columns in the input order.
    r: Vec<T>,
    rank: usize,
}

/// Householder QR of the column-major `rows × cols` buffer `a`.
///
/// With `pivot`, the largest remaining column is brought forward at each step
/// and the factorization stops once no column norm exceeds `tol`; `None` is
/// returned if that takes more than `max_rank` steps. Without `pivot`, all
/// `min(rows, cols)` steps run.
fn householder_qr<T: Real>(
    mut a: Vec<T>,
    rows: usize,
    cols: usize,
    pivot: bool,
    tol: T,
    max_rank: usize,
) -> Option<Qr<T>> {
    let m = rows;
    let zero = T::zero();
    let sq = |col: &[T]| col.iter().fold(zero, |acc, &x| acc + x * x);
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut reflectors = Vec::new();
    let steps = rows.min(cols);
    let mut rank = steps;
    for j in 0..steps {
        if pivot {
            let mut best = j;
            let mut best_sq = -T::one();
            for c in j..cols {
                let s = sq(&a[c * m + j..c * m + m]);
                if s > best_sq {
                    best = c;
                    best_sq = s;
                }
            }
            if best_sq.sqrt() <= tol {
                rank = j;
                break;
            }
            if j >= max_rank {
                return None;
            }
            if best != j {
                for i in 0..m {
                    a.swap(j * m + i, best * m + i);
                }
                perm.swap(j, best);
            }
        }
        let x = &a[j * m + j..j * m + m];
        let norm = sq(x).sqrt();
        if norm == zero {
            reflectors.push(Reflector { offset: j, w: Vec::new(), beta: zero });
            continue;
        }
        let alpha = if x[0] > zero { -norm } else { norm };
        let mut w = x.to_vec();
        w[0] = w[0] - alpha;
        let beta = T::lit(2.0) / sq(&w);
        let h = Reflector { offset: j, w, beta };
        for_each_column(&mut a[(j + 1) * m..cols * m], m, |_, col| h.apply(col));
        a[j * m + j] = alpha;
        for x in &mut a[j * m + j + 1..j * m + m] {
            *x = zero;
        }
        reflectors.push(h);
    }
    let mut r = vec![zero; rank * cols];
    for (c, &orig) in perm.iter().enumerate() {
        for i in 0..rank.min(c + 1) {
            r[i * cols + orig] = a[c * m + i];
        }
    }
    Some(Qr { reflectors, r, rank })
}

/// First `k` columns of `H_0 H_1 ⋯` as a column-major `rows × k` buffer.
fn form_q<T: Real>(reflectors: &[Reflector<T>], rows: usize, k: usize) -> Vec<T> {
    let mut q = vec![T::zero(); rows * k];
    for j in 0..k {
        q[j * rows + j] = T::one();
    }
    for_each_column(&mut q, rows, |_, col| {
        for h in reflectors.iter().rev() {
            h.apply(col);
        }
    });
    q
}

fn tolerance<T: Real>(a: &Matrix<T>) -> Option<T> {
    let (m, n) = a.shape();
    if m.min(n) < MIN_DIM {
        return None;
    }
    let frob = a.frobenius_norm();
    if frob == T::zero() || !frob.is_finite() {
        return None;
    }
    Some(frob * T::epsilon() * T::lit(m.max(n) as f64).sqrt())
}

/// `[q[:, ..r] · core, q[:, r..k]]` as a row-major `rows × k` matrix.
fn rotate_leading<T: Real>(q: &[T], rows: usize, k: usize, core: &Matrix<T>) -> Matrix<T> {
    let r = core.rows();
    let zero = T::zero();
    let mut out = transpose_buf(q, rows, k);
    let mut acc = vec![zero; r];
    for i in 0..rows {
        for (j, a) in acc.iter_mut().enumerate() {
            let mut s = zero;
            for l in 0..r {
                s = s + q[l * rows + i] * core[(l, j)];
            }
            *a = s;
        }
        out[i * k..i * k + r].copy_from_slice(&acc);
    }
    Matrix::from_raw(rows, k, out)
}

/// Thin SVD for `rows >= cols` through the rank-revealing shortcut; `None`
/// when the input is small or not low-rank.
pub(crate) fn svd_low_rank<T: Real>(
    a: &Matrix<T>,
    dense: impl Fn(&Matrix<T>) -> Result<(Matrix<T>, Vec<T>, Matrix<T>)>,
) -> Option<Result<(Matrix<T>, Vec<T>, Matrix<T>)>> {
    let (m, n) = a.shape();
    debug_assert!(m >= n);
    let tol = tolerance(a)?;
    let colmajor = transpose_buf(a.as_slice(), n, m);
    let left = householder_qr(colmajor, m, n, true, tol, n / MAX_RANK_DIVISOR)?;
    let r = left.rank;
    if r == 0 {
        return None;
    }
    // a ≈ Q_r · R and Rᵀ = Z_r · T, so a ≈ Q_r · Tᵀ · Z_rᵀ
    let right = householder_qr(left.r, n, r, false, T::zero(), r)?;
    let core = Matrix::from_fn(r, r, |i, j| if j <= i { right.r[j * r + i] } else { T::zero() });
    let (cu, cs, cv) = match dense(&core) {
        Ok(f) => f,
        Err(e) => return Some(Err(e)),
    };
    let q = form_q(&left.reflectors, m, n);
    let z = form_q(&right.reflectors, n, n);
    let mut sigma = cs;
    sigma.resize(n, T::zero());
    Some(Ok((rotate_leading(&q, m, n, &cu), sigma, rotate_leading(&z, n, n, &cv))))
}

/// Symmetric eigendecomposition through the rank-revealing shortcut.
/// Returns column-major eigenvectors and unsorted eigenvalues.
pub(crate) fn eig_low_rank<T: Real>(
    a: &Matrix<T>,
    dense: impl Fn(&Matrix<T>) -> Result<(Vec<T>, Vec<T>)>,
) -> Option<Result<(Vec<T>, Vec<T>)>> {
    let n = a.rows();
    let tol = tolerance(a)?;
    // symmetric, so the row-major buffer serves as column-major
    let qr = householder_qr(a.as_slice().to_vec(), n, n, true, tol, n / MAX_RANK_DIVISOR)?;
    let r = qr.rank;
    if r == 0 {
        return None;
    }
    let q = form_q(&qr.reflectors, n, n);
    // core = Q_rᵀ a Q_r
    let aq: Vec<Vec<T>> = (0..r)
        .map(|l| {
            let ql = &q[l * n..l * n + n];
            (0..n)
                .map(|i| {
                    let row = &a.as_slice()[i * n..i * n + n];
                    row.iter().zip(ql).fold(T::zero(), |s, (&x, &y)| s + x * y)
                })
                .collect()
        })
        .collect();
    let mut core = Matrix::from_fn(r, r, |i, j| {
        q[i * n..i * n + n].iter().zip(&aq[j]).fold(T::zero(), |s, (&x, &y)| s + x * y)
    });
    let half = T::lit(0.5);
    for i in 0..r {
        for j in 0..i {
            let s = (core[(i, j)] + core[(j, i)]) * half;
            core[(i, j)] = s;
            core[(j, i)] = s;
        }
    }
    let (cv, mut values) = match dense(&core) {
        Ok(f) => f,
        Err(e) => return Some(Err(e)),
    };
    let cv = Matrix::from_raw(r, r, transpose_buf(&cv, r, r));
    let vectors = rotate_leading(&q, n, n, &cv);
    values.resize(n, T::zero());
    Some(Ok((transpose_buf(vectors.as_slice(), n, n), values)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{svd, sym_eig};

    fn factor(rows: usize, cols: usize, rank: usize, seed: u64) -> Matrix<f64> {
        // deterministic pseudo-random product of thin factors
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let l = Matrix::from_fn(rows, rank, |_, _| next());
        let r = Matrix::from_fn(rank, cols, |_, _| next());
        l.matmul(&r).unwrap()
    }

    fn orthonormal(q: &Matrix<f64>) -> f64 {
        let g = q.transpose().matmul(q).unwrap();
        g.sub(&Matrix::identity(q.cols())).unwrap().max_abs()
    }

    #[test]
    fn low_rank_svd_matches_dense_spectrum() {
        for (m, n) in [(200, 150), (150, 200), (160, 160)] {
            let a = factor(m, n, 6, (m * n) as u64);
            let fast = svd(&a).unwrap();
            let k = m.min(n);
            assert_eq!(fast.u.shape(), (m, k));
            assert_eq!(fast.v.shape(), (n, k));
            assert!(orthonormal(&fast.u) < 1e-12);
            assert!(orthonormal(&fast.v) < 1e-12);
            assert!(fast.reconstruct().rel_diff(&a) < 1e-12);
            assert_eq!(fast.numerical_rank(), 6);
            assert!(fast.sigma[6..].iter().all(|&s| s == 0.0));
        }
    }

    #[test]
    fn shortcut_declines_full_rank_and_small_inputs() {
        let full = Matrix::<f64>::from_fn(130, 130, |i, j| if i == j { 1.0 + i as f64 } else { 0.0 });
        let dense = |x: &Matrix<f64>| crate::linalg::svd(x).map(|r| (r.u, r.sigma, r.v));
        assert!(svd_low_rank(&full, dense).is_none());
        let small = factor(40, 30, 2, 3);
        assert!(svd_low_rank(&small, dense).is_none());
    }

    #[test]
    fn low_rank_symmetric_eig_keeps_signs() {
        let x = factor(180, 4, 4, 11);
        // x·diag(3,1,-1,-2)·xᵀ has two positive and two negative eigenvalues
        let w = [3.0, 1.0, -1.0, -2.0];
        let a = Matrix::from_fn(180, 180, |i, j| (0..4).map(|l| x[(i, l)] * w[l] * x[(j, l)]).sum());
        let r = sym_eig(&a).unwrap();
        assert!(orthonormal(&r.vectors) < 1e-12);
        assert!(r.reconstruct().rel_diff(&a) < 1e-12);
        assert!(r.values[0] > 0.0 && r.values[1] > 0.0);
        assert!(r.values[178] < 0.0 && r.values[179] < 0.0);
        assert!(r.values[2..178].iter().all(|&v| v == 0.0));
        assert!(r.values.windows(2).all(|p| p[0] >= p[1]));
    }
}

//! Symmetric eigendecomposition: Householder tridiagonalization followed by
//! the implicit QL algorithm, accumulating the orthogonal transforms.

use crate::error::{AlsiError, Result};
use crate::linalg::lowrank::eig_low_rank;
use crate::linalg::matrix::Matrix;
use crate::linalg::columns::{for_each_column, map_columns};
use crate::linalg::sign::canonicalize_pairs;
use crate::scalar::Real;

/// `a = vectors · diag(values) · vectorsᵀ`, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct EigResult<T: Real = f64> {
    pub vectors: Matrix<T>,
    pub values: Vec<T>,
}

impl<T: Real> EigResult<T> {
    pub fn reconstruct(&self) -> Matrix<T> {
        Matrix::weighted_gram(&self.vectors, &self.values).expect("conformable factors")
    }

    /// Rebuild with each eigenvalue mapped through `f`.
    pub fn apply(&self, f: impl Fn(T) -> T) -> Matrix<T> {
        let mapped: Vec<T> = self.values.iter().map(|&l| f(l)).collect();
        Matrix::weighted_gram(&self.vectors, &mapped).expect("conformable factors")
    }
}

/// Eigendecomposition of a symmetric matrix.
///
/// Fails with [`AlsiError::NotSymmetric`] when `a` deviates from symmetry by
/// more than the scalar tolerance; only the upper triangle is read otherwise.
pub fn sym_eig<T: Real>(a: &Matrix<T>) -> Result<EigResult<T>> {
    a.require_symmetric("input")?;
    let n = a.rows();
    if n == 0 {
        return Ok(EigResult {
            vectors: Matrix::zeros(0, 0),
            values: Vec::new(),
        });
    }
    let (v, d) = eig_low_rank(a, dense_eig).unwrap_or_else(|| dense_eig(a))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap_or(std::cmp::Ordering::Equal));
    let values: Vec<T> = order.iter().map(|&k| d[k]).collect();
    let mut vectors = Matrix::from_fn(n, n, |i, j| v[order[j] * n + i]);
    canonicalize_pairs(&mut vectors, None);
    Ok(EigResult { vectors, values })
}

/// Column-major eigenvectors and unsorted eigenvalues.
fn dense_eig<T: Real>(a: &Matrix<T>) -> Result<(Vec<T>, Vec<T>)> {
    let n = a.rows();
    // column-major; a is symmetric so the row-major buffer is its transpose
    let mut v = a.as_slice().to_vec();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tridiagonalize(&mut v, &mut d, &mut e, n);
    ql_implicit(&mut v, &mut d, &mut e, n)?;
    Ok((v, d))
}

#[inline]
fn at(n: usize, i: usize, j: usize) -> usize {
    j * n + i
}

fn tridiagonalize<T: Real>(v: &mut [T], d: &mut [T], e: &mut [T], n: usize) {
    let zero = T::zero();
    // mirror the lower triangle so every active column holds a full column
    for j in 0..n {
        for k in 0..j {
            v[at(n, k, j)] = v[at(n, j, k)];
        }
    }
    for j in 0..n {
        d[j] = v[at(n, n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for &dk in &d[..i] {
            scale = scale + dk.abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(n, i - 1, j)];
                v[at(n, i, j)] = zero;
                v[at(n, j, i)] = zero;
            }
        } else {
            for dk in &mut d[..i] {
                *dk = *dk / scale;
                h = h + *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h = h - f * g;
            d[i - 1] = f - g;
            {
                // e = A·d over the active block
                let dd = &d[..i];
                let prod = map_columns(v, n, i, |_, col| {
                    let mut acc = zero;
                    for (&x, &dk) in col[..i].iter().zip(dd) {
                        acc = acc + x * dk;
                    }
                    acc
                });
                e[..i].copy_from_slice(&prod);
            }
            for j in 0..i {
                v[at(n, j, i)] = d[j];
            }
            f = zero;
            for j in 0..i {
                e[j] = e[j] / h;
                f = f + e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] = e[j] - hh * d[j];
            }
            {
                let (dd, ee) = (&d[..i], &e[..i]);
                for_each_column(&mut v[..i * n], n, |j, col| {
                    let (fj, gj) = (dd[j], ee[j]);
                    for k in 0..i {
                        col[k] = col[k] - (fj * ee[k] + gj * dd[k]);
                    }
                    col[i] = zero;
                });
            }
            for j in 0..i {
                d[j] = v[at(n, i - 1, j)];
            }
        }
        d[i] = h;
    }

    // accumulate transformations
    let mut w = vec![zero; n];
    for i in 0..n - 1 {
        v[at(n, n - 1, i)] = v[at(n, i, i)];
        v[at(n, i, i)] = T::one();
        let h = d[i + 1];
        if h != zero {
            w[..=i].copy_from_slice(&v[(i + 1) * n..(i + 1) * n + i + 1]);
            for k in 0..=i {
                d[k] = w[k] / h;
            }
            let (ww, dd) = (&w[..=i], &d[..=i]);
            for_each_column(&mut v[..(i + 1) * n], n, |_, col| {
                let mut g = zero;
                for k in 0..=i {
                    g = g + ww[k] * col[k];
                }
                for k in 0..=i {
                    col[k] = col[k] - g * dd[k];
                }
            });
        }
        for k in 0..=i {
            v[at(n, k, i + 1)] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[at(n, n - 1, j)];
        v[at(n, n - 1, j)] = zero;
    }
    v[at(n, n - 1, n - 1)] = T::one();
    e[0] = zero;
}

fn ql_implicit<T: Real>(v: &mut [T], d: &mut [T], e: &mut [T], n: usize) -> Result<()> {
    let zero = T::zero();
    let one = T::one();
    let two = T::lit(2.0);
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;

    let eps = T::epsilon();
    let mut f = zero;
    let mut tst1 = zero;
    let max_iter = 60;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > max_iter {
                    return Err(AlsiError::FactorizationFailure {
                        routine: "sym_eig",
                        matrix: "input".into(),
                        iterations: iter,
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in &mut d[l + 2..n] {
                    *di = *di - h;
                }
                f = f + h;

                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (head, tail) = v.split_at_mut((i + 1) * n);
                    let col_i = &mut head[i * n..i * n + n];
                    let col_next = &mut tail[..n];
                    for (vi, vn) in col_i.iter_mut().zip(col_next.iter_mut()) {
                        let hk = *vn;
                        *vn = s * *vi + c * hk;
                        *vi = c * *vi - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] = d[l] + f;
        e[l] = zero;
    }
    Ok(())
}

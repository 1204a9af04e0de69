//! Latent-class coordinates: classic LSI from the incidence matrix and the
//! kernelized embedding of a fused PSD kernel.
//!
//! For a kernel `K = U Λ Uᵀ` the feature map `Φ = U Λ^{1/2}` reproduces `K` as
//! a Gram matrix, so its rows preserve the kernel-induced distances. Whitening
//! the feature map by `Λ^{-1/2} Uᵀ` leaves the rows of `U`.

use crate::error::{AlsiError, Result};
use crate::ingest::IncidenceMatrix;
use crate::linalg::{svd, sym_eig, Matrix};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct LatentEmbedding<T: Real = f64> {
    pub items: Vec<String>,
    /// One row per item, one column per retained latent dimension.
    pub coords: Matrix<T>,
    /// Retained spectrum, positive and descending.
    pub eigenvalues: Vec<T>,
    pub whitened: bool,
}

impl<T: Real> LatentEmbedding<T> {
    pub fn dims(&self) -> usize {
        self.coords.cols()
    }
}

/// Term and document immersions from `X = U Σ Vᵀ`: term `j` maps to row `j`
/// of `V`, document `i` to row `i` of `U`, both over the leading `m` singular
/// directions (fewer when `X` has lower numerical rank).
pub fn lsi_embed<T: Real>(
    x: &IncidenceMatrix,
    m: usize,
) -> Result<(LatentEmbedding<T>, LatentEmbedding<T>)> {
    let (n, p) = x.x.shape();
    if m == 0 || m > n.min(p) {
        return Err(AlsiError::Contract(format!(
            "latent dimension {m} outside 1..={}",
            n.min(p)
        )));
    }
    let f = svd(&x.x.cast::<T>()).map_err(|e| e.named("X"))?;
    let keep = m.min(f.numerical_rank());
    let idx: Vec<usize> = (0..keep).collect();
    let eigenvalues: Vec<T> = f.sigma[..keep].iter().map(|&s| s * s).collect();
    let terms = LatentEmbedding {
        items: x.genes.clone(),
        coords: f.v.select_columns(&idx),
        eigenvalues: eigenvalues.clone(),
        whitened: true,
    };
    let documents = LatentEmbedding {
        items: x.experiments.clone(),
        coords: f.u.select_columns(&idx),
        eigenvalues,
        whitened: true,
    };
    Ok((terms, documents))
}

/// Smallest prefix of the positive spectrum carrying `energy` of its total.
pub fn retained_dims<T: Real>(values: &[T], energy: T) -> usize {
    let max = values.first().copied().unwrap_or_else(T::zero);
    let cutoff = T::rank_eps() * max;
    let positive: Vec<T> = values.iter().copied().take_while(|&l| l > cutoff).collect();
    let total = positive.iter().copied().fold(T::zero(), |a, b| a + b);
    let target = energy * total;
    let mut acc = T::zero();
    for (m, &l) in positive.iter().enumerate() {
        acc = acc + l;
        if acc >= target {
            return m + 1;
        }
    }
    positive.len()
}

/// Embed the items of a PSD kernel, keeping enough of the spectrum to carry
/// `energy` of its trace. Coordinates are `U Λ^{1/2}`, or `U` when whitened.
pub fn alsi_embed<T: Real>(
    k: &Matrix<T>,
    items: &[String],
    energy: T,
    whitened: bool,
) -> Result<LatentEmbedding<T>> {
    if !(energy > T::zero() && energy <= T::one()) {
        return Err(AlsiError::Contract(format!("energy must lie in (0,1], got {energy}")));
    }
    if items.len() != k.rows() {
        return Err(AlsiError::Dimension(format!(
            "{} item ids for a {}x{} kernel",
            items.len(),
            k.rows(),
            k.cols()
        )));
    }
    let e = sym_eig(k).map_err(|e| e.named("K"))?;
    let max = e.values.first().copied().unwrap_or_else(T::zero);
    let min = e.values.last().copied().unwrap_or_else(T::zero);
    if min < -T::sym_tol() * T::one().max(max) {
        return Err(AlsiError::NotPsd {
            matrix: "K".into(),
            min_eigenvalue: min.as_f64(),
        });
    }
    let m = retained_dims(&e.values, energy);
    let eigenvalues = e.values[..m].to_vec();
    let coords = Matrix::from_fn(k.rows(), m, |i, j| {
        if whitened {
            e.vectors[(i, j)]
        } else {
            e.vectors[(i, j)] * eigenvalues[j].sqrt()
        }
    });
    Ok(LatentEmbedding {
        items: items.to_vec(),
        coords,
        eigenvalues,
        whitened,
    })
}

/// `d_jk = sqrt(K_jj + K_kk − 2 K_jk)`, clamping round-off negatives.
pub fn induced_distance<T: Real>(k: &Matrix<T>) -> Result<Matrix<T>> {
    k.require_symmetric("K")?;
    let p = k.rows();
    let scale = T::one().max(k.diagonal().into_iter().fold(T::zero(), |a, b| a.max(b.abs())));
    let two = T::lit(2.0);
    let mut d = Matrix::zeros(p, p);
    for j in 0..p {
        for l in (j + 1)..p {
            let sq = k[(j, j)] + k[(l, l)] - two * k[(j, l)];
            if sq < -T::sym_tol() * scale {
                return Err(AlsiError::NotPsd {
                    matrix: "K".into(),
                    min_eigenvalue: sq.as_f64(),
                });
            }
            let v = sq.max(T::zero()).sqrt();
            d[(j, l)] = v;
            d[(l, j)] = v;
        }
    }
    Ok(d)
}

/// Euclidean distances between the rows of `coords`.
pub fn row_distances<T: Real>(coords: &Matrix<T>) -> Matrix<T> {
    let n = coords.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = coords
                .row(i)
                .iter()
                .zip(coords.row(j))
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<T>()
                .sqrt();
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("i{i}")).collect()
    }

    fn incidence(x: Matrix<f64>) -> IncidenceMatrix {
        IncidenceMatrix::new(ids(x.rows()), ids(x.cols()), x, None).unwrap()
    }

    #[test]
    fn identity_kernel_distances() {
        let e = alsi_embed(&Matrix::<f64>::identity(3), &ids(3), 1.0, false).unwrap();
        let d = row_distances(&e.coords);
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            assert!((d[(i, j)] - 2f64.sqrt()).abs() < 1e-14);
        }
        let id = induced_distance(&Matrix::<f64>::identity(3)).unwrap();
        assert!((id[(0, 2)] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rank_one_kernel() {
        let v = [1.0, -2.0, 2.0];
        let k = Matrix::<f64>::from_fn(3, 3, |i, j| v[i] * v[j]);
        let e = alsi_embed(&k, &ids(3), 0.95, false).unwrap();
        assert_eq!(e.dims(), 1);
        assert!((e.eigenvalues[0] - 9.0).abs() < 1e-12);
        // sign convention makes the largest-magnitude entry non-negative
        for (i, &vi) in v.iter().enumerate() {
            assert!((e.coords[(i, 0)].abs() - vi.abs()).abs() < 1e-12);
        }
        assert!(e.coords[(1, 0)] * e.coords[(2, 0)] < 0.0);
    }

    #[test]
    fn energy_monotone() {
        let vals = [5.0, 3.0, 1.0, 0.5, 0.0];
        let mut prev = 0;
        for k in 1..=20 {
            let m = retained_dims(&vals, k as f64 / 20.0);
            assert!(m >= prev);
            prev = m;
        }
        assert_eq!(retained_dims(&vals, 1.0), 4);
        assert_eq!(retained_dims(&vals, 0.5), 1);
    }

    #[test]
    fn rejects_non_psd_and_bad_energy() {
        let k = Matrix::<f64>::from_diag(&[1.0, -0.5]);
        assert!(matches!(alsi_embed(&k, &ids(2), 1.0, false), Err(AlsiError::NotPsd { .. })));
        assert!(alsi_embed(&Matrix::<f64>::identity(2), &ids(2), 0.0, false).is_err());
        let bad = Matrix::<f64>::from_rows(&[vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap();
        assert!(induced_distance(&bad).is_err());
    }

    #[test]
    fn lsi_identity_and_rank_one() {
        let (t, d) = lsi_embed::<f64>(&incidence(Matrix::identity(3)), 3).unwrap();
        for e in [&t, &d] {
            assert!(e.coords.sub(&Matrix::identity(3)).unwrap().max_abs() < 1e-15);
            assert!(e.whitened);
        }
        let ones = Matrix::from_fn(3, 4, |_, _| 1.0);
        let (t, _) = lsi_embed::<f64>(&incidence(ones), 2).unwrap();
        assert_eq!(t.dims(), 1);
        assert!(lsi_embed::<f64>(&incidence(Matrix::identity(3)), 4).is_err());
    }

    #[test]
    fn identical_columns_have_zero_distance() {
        let k = Matrix::<f64>::from_rows(&[vec![2.0, 2.0, 1.0], vec![2.0, 2.0, 1.0], vec![1.0, 1.0, 3.0]]).unwrap();
        assert_eq!(induced_distance(&k).unwrap()[(0, 1)], 0.0);
    }
}

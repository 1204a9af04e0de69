//! Symmetry sources of an asymmetric similarity, the label-derived prior
//! kernel, and their regularized fusion.
//!
//! The fused kernel minimizes
//! `G_τ(K) = ‖K − γ F(K₁,K₂)‖²_F + τ ‖K − γ W‖²_F` with `γ = τ + 1`, whose
//! stationary point is `K = F(K₁,K₂) + τ W`; the Hessian is `2(τ+1)·I`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{AlsiError, Result, Warning};
use crate::ingest::{IncidenceMatrix, Membership};
use crate::linalg::{polar_sources, psd_clip, svd, sym_eig, EigResult, Matrix};
use crate::scalar::Real;
use crate::similarity::asymmetric_similarity;

/// How the two symmetry sources are merged before adding the prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", bound = "")]
pub enum Combiner<T: Real = f64> {
    /// `(K₁ + K₂) / 2`
    Arithmetic,
    /// `K₁^{1/2} (K₁^{-1/2} K₂ K₁^{-1/2})^t K₁^{1/2}`
    Geometric { t: T },
    /// `(t K₁⁻¹ + (1 − t) K₂⁻¹)⁻¹`
    Harmonic { t: T },
}

impl<T: Real> fmt::Display for Combiner<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Combiner::Arithmetic => f.write_str("arithmetic"),
            Combiner::Geometric { t } => write!(f, "geometric:{t}"),
            Combiner::Harmonic { t } => write!(f, "harmonic:{t}"),
        }
    }
}

impl<T: Real> FromStr for Combiner<T> {
    type Err = AlsiError;

    /// `arithmetic`, `geometric[:t]` or `harmonic[:t]`; `t` defaults to 0.5.
    fn from_str(s: &str) -> Result<Self> {
        let (name, t) = match s.split_once(':') {
            Some((n, t)) => (
                n,
                t.parse::<f64>()
                    .map_err(|_| AlsiError::Config(format!("bad combiner weight in {s:?}")))?,
            ),
            None => (s, 0.5),
        };
        let t = T::lit(t);
        match name {
            "arithmetic" => Ok(Combiner::Arithmetic),
            "geometric" => Ok(Combiner::Geometric { t }),
            "harmonic" => Ok(Combiner::Harmonic { t }),
            _ => Err(AlsiError::Config(format!("unknown combiner {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FusionConfig<T: Real = f64> {
    pub tau: T,
    pub combiner: Combiner<T>,
    /// Diagonal shift for the inverse-based combiners; `None` picks
    /// `1e-8 · (tr K₁ + tr K₂) / (2p)`.
    pub ridge: Option<T>,
}

impl<T: Real> Default for FusionConfig<T> {
    fn default() -> Self {
        FusionConfig {
            tau: T::lit(0.2),
            combiner: Combiner::Arithmetic,
            ridge: None,
        }
    }
}

impl<T: Real> FusionConfig<T> {
    /// Scale parameter shared by both fidelity terms.
    pub fn gamma(&self) -> T {
        self.tau + T::one()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= T::zero()) {
            return Err(AlsiError::Config(format!("tau must be >= 0, got {}", self.tau)));
        }
        if let Combiner::Geometric { t } | Combiner::Harmonic { t } = self.combiner {
            if !(t >= T::zero() && t <= T::one()) {
                return Err(AlsiError::Config(format!("combiner weight must lie in [0,1], got {t}")));
            }
        }
        if let Some(r) = self.ridge {
            if !(r >= T::zero()) {
                return Err(AlsiError::Config(format!("ridge must be >= 0, got {r}")));
            }
        }
        Ok(())
    }
}

/// `(K₁, K₂) = (U Σ Uᵀ, V Σ Vᵀ)` from the SVD of `s`.
pub fn asymmetry_sources<T: Real>(s: &Matrix<T>) -> Result<(Matrix<T>, Matrix<T>)> {
    polar_sources(s)
}

/// Feature maps `Φ₁ = U Σ^{1/2}` and `Φ₂ = V Σ^{1/2}` with `Φᵢ Φᵢᵀ = Kᵢ`.
pub fn source_feature_maps<T: Real>(s: &Matrix<T>) -> Result<(Matrix<T>, Matrix<T>)> {
    let f = svd(s)?;
    let root: Vec<T> = f.sigma.iter().map(|v| v.sqrt()).collect();
    let scale = |m: &Matrix<T>| Matrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] * root[j]);
    Ok((scale(&f.u), scale(&f.v)))
}

/// Prior kernel built from class co-membership.
#[derive(Debug, Clone)]
pub struct LabelKernel<T: Real = f64> {
    pub classes: Vec<String>,
    pub membership: Membership,
    /// `q_ij = |C_i ∩ C_j| / |C_i|`
    pub q: Matrix<T>,
    /// PSD repair of `(Q₁ + Q₂) / 2`.
    pub w: Matrix<T>,
    pub warnings: Vec<Warning>,
}

/// Build `Q` over `genes` (in that order) and average its two polar sources into `W`.
pub fn label_kernel<T: Real>(membership: &Membership, genes: &[String]) -> Result<LabelKernel<T>> {
    let idx: Vec<usize> = genes
        .iter()
        .map(|g| {
            membership
                .index_of(g)
                .ok_or_else(|| AlsiError::Contract(format!("gene {g:?} has no membership entry")))
        })
        .collect::<Result<_>>()?;
    if let Some(&j) = idx.iter().find(|&&j| membership.sets[j].is_empty()) {
        return Err(AlsiError::Contract(format!(
            "gene {:?} belongs to no class",
            membership.genes[j]
        )));
    }
    // Q is the inclusion similarity of the classes-by-genes indicator
    let indicator = Matrix::from_fn(membership.classes.len(), idx.len(), |k, j| {
        if membership.sets[idx[j]].contains(&k) {
            1.0
        } else {
            0.0
        }
    });
    let classes_by_genes =
        IncidenceMatrix::new(membership.classes.clone(), genes.to_vec(), indicator, None)?;
    let q = asymmetric_similarity::<T>(&classes_by_genes)?.s;
    let (q1, q2) = polar_sources(&q).map_err(|e| e.named("Q"))?;
    let avg = q1.add(&q2)?.scale(T::lit(0.5));
    let clip = psd_clip(&avg, T::sym_tol()).map_err(|e| e.named("W"))?;
    Ok(LabelKernel {
        classes: membership.classes.clone(),
        membership: Membership {
            classes: membership.classes.clone(),
            genes: genes.to_vec(),
            sets: idx.iter().map(|&j| membership.sets[j].clone()).collect(),
        },
        q,
        w: clip.matrix,
        warnings: clip.warning.into_iter().collect(),
    })
}

/// Output of [`fuse`].
#[derive(Debug, Clone)]
pub struct Fused<T: Real = f64> {
    /// `psd_clip(F(K₁,K₂) + τ W)`
    pub k: Matrix<T>,
    /// Combiner output `F(K₁,K₂)`.
    pub combined: Matrix<T>,
    /// Ridge actually applied by an inverse-based combiner.
    pub ridge: Option<T>,
    pub warnings: Vec<Warning>,
}

/// Closed-form minimizer `F(K₁,K₂) + τ W`, passed through the PSD repair.
pub fn fuse<T: Real>(
    k1: &Matrix<T>,
    k2: &Matrix<T>,
    w: &Matrix<T>,
    cfg: &FusionConfig<T>,
) -> Result<Fused<T>> {
    cfg.validate()?;
    let n = k1.rows();
    for (name, m) in [("K1", k1), ("K2", k2), ("W", w)] {
        if m.shape() != (n, n) {
            return Err(AlsiError::Dimension(format!(
                "`{name}` is {}x{}, expected {n}x{n}",
                m.rows(),
                m.cols()
            )));
        }
        m.require_symmetric(name)?;
    }
    let (combined, ridge) = match cfg.combiner {
        Combiner::Arithmetic => (k1.add(k2)?.scale(T::lit(0.5)), None),
        Combiner::Geometric { t } => {
            let r = cfg.ridge.unwrap_or_else(|| default_ridge(k1, k2));
            (combiner_geometric(k1, k2, t, r)?, Some(r))
        }
        Combiner::Harmonic { t } => {
            let r = cfg.ridge.unwrap_or_else(|| default_ridge(k1, k2));
            (combiner_harmonic(k1, k2, t, r)?, Some(r))
        }
    };
    let raw = combined.axpy(cfg.tau, w)?;
    let clip = psd_clip(&raw, T::sym_tol()).map_err(|e| e.named("K"))?;
    Ok(Fused {
        k: clip.matrix,
        combined,
        ridge,
        warnings: clip.warning.into_iter().collect(),
    })
}

/// `1e-8 · (tr K₁ + tr K₂) / (2p)`
pub fn default_ridge<T: Real>(k1: &Matrix<T>, k2: &Matrix<T>) -> T {
    let p = T::from_usize_lossy(k1.rows().max(1));
    T::lit(1e-8) * (k1.trace() + k2.trace()) / (T::lit(2.0) * p)
}

/// `G_τ(K)` with `γ₁ = γ₂ = τ + 1`.
pub fn regularized_objective<T: Real>(
    k: &Matrix<T>,
    combined: &Matrix<T>,
    w: &Matrix<T>,
    tau: T,
) -> Result<T> {
    let gamma = tau + T::one();
    let a = k.axpy(-gamma, combined)?.frobenius_norm();
    let b = k.axpy(-gamma, w)?.frobenius_norm();
    Ok(a * a + tau * b * b)
}

/// Eigendecomposition of `k + ridge·I`, rejecting numerically singular results.
fn shifted_eig<T: Real>(k: &Matrix<T>, ridge: T, name: &str) -> Result<EigResult<T>> {
    let e = sym_eig(&k.add_identity(ridge)).map_err(|e| e.named(name))?;
    let max = e.values.first().copied().unwrap_or_else(T::zero);
    let min = e.values.last().copied().unwrap_or_else(T::zero);
    if !(min > T::rank_eps() * max.abs()) || min <= T::zero() {
        return Err(AlsiError::Singular {
            matrix: name.to_string(),
            min_eigenvalue: min.as_f64(),
        });
    }
    Ok(e)
}

pub fn combiner_geometric<T: Real>(k1: &Matrix<T>, k2: &Matrix<T>, t: T, ridge: T) -> Result<Matrix<T>> {
    let a = shifted_eig(k1, ridge, "K1")?;
    // the second argument must be invertible too for the mean to be symmetric in its roles
    let b = k2.add_identity(ridge);
    shifted_eig(k2, ridge, "K2")?;
    let root = a.apply(|l| l.sqrt());
    let inv_root = a.apply(|l| l.sqrt().recip());
    let inner = inv_root.matmul(&b)?.matmul(&inv_root)?.symmetrize();
    let powered = sym_eig(&inner)?.apply(|l| l.max(T::zero()).powf(t));
    Ok(root.matmul(&powered)?.matmul(&root)?.symmetrize())
}

pub fn combiner_harmonic<T: Real>(k1: &Matrix<T>, k2: &Matrix<T>, t: T, ridge: T) -> Result<Matrix<T>> {
    let a_inv = shifted_eig(k1, ridge, "K1")?.apply(T::recip);
    let b_inv = shifted_eig(k2, ridge, "K2")?.apply(T::recip);
    let mix = a_inv.scale(t).axpy(T::one() - t, &b_inv)?;
    let e = sym_eig(&mix)?;
    if e.values.iter().any(|&l| l <= T::zero()) {
        return Err(AlsiError::Singular {
            matrix: "tK1^-1 + (1-t)K2^-1".into(),
            min_eigenvalue: e.values.last().map_or(0.0, |v| v.as_f64()),
        });
    }
    Ok(e.apply(T::recip))
}

/// `[√λ₁ Φ₁ | √λ₂ Φ₂]`, whose Gram matrix is `λ₁ Φ₁Φ₁ᵀ + λ₂ Φ₂Φ₂ᵀ`.
pub fn kernel_sum_feature_map<T: Real>(
    phi1: &Matrix<T>,
    phi2: &Matrix<T>,
    lambda1: T,
    lambda2: T,
) -> Result<Matrix<T>> {
    if !(lambda1 >= T::zero() && lambda2 >= T::zero()) {
        return Err(AlsiError::Contract(format!(
            "kernel weights must be non-negative, got {lambda1} and {lambda2}"
        )));
    }
    if phi1.rows() != phi2.rows() {
        return Err(AlsiError::Dimension(format!(
            "feature maps cover {} and {} items",
            phi1.rows(),
            phi2.rows()
        )));
    }
    let (c1, c2) = (phi1.cols(), phi2.cols());
    let (r1, r2) = (lambda1.sqrt(), lambda2.sqrt());
    Ok(Matrix::from_fn(phi1.rows(), c1 + c2, |i, j| {
        if j < c1 {
            r1 * phi1[(i, j)]
        } else {
            r2 * phi2[(i, j - c1)]
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn membership(sets: &[&[usize]], classes: usize) -> Membership {
        Membership {
            classes: (0..classes).map(|k| format!("C{k}")).collect(),
            genes: (0..sets.len()).map(|j| format!("g{j}")).collect(),
            sets: sets.iter().map(|s| s.to_vec()).collect(),
        }
    }

    #[test]
    fn q_counts_shared_classes() {
        // classes(0) = {A,B}, classes(1) = {B}, classes(2) = {C}, classes(3) = {A,B}
        let m = membership(&[&[0, 1], &[1], &[2], &[0, 1]], 3);
        let lk = label_kernel::<f64>(&m, &m.genes).unwrap();
        assert_eq!(lk.q[(0, 1)], 0.5);
        assert_eq!(lk.q[(1, 0)], 1.0);
        assert_eq!((lk.q[(0, 2)], lk.q[(2, 0)]), (0.0, 0.0));
        assert_eq!((lk.q[(0, 3)], lk.q[(3, 0)]), (1.0, 1.0));
        assert!(lk.w.is_symmetric(1e-12));
        assert!(sym_eig(&lk.w).unwrap().values.iter().all(|&l| l >= -1e-10));
    }

    #[test]
    fn label_kernel_rejects_classless_genes() {
        let m = membership(&[&[0], &[]], 1);
        assert!(matches!(label_kernel::<f64>(&m, &m.genes), Err(AlsiError::Contract(_))));
    }

    #[test]
    fn identity_triple() {
        let i = Matrix::<f64>::identity(3);
        let f = fuse(&i, &i, &i, &FusionConfig::default()).unwrap();
        assert!(f.k.sub(&i.scale(1.2)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn zero_tau_returns_combiner() {
        let k1 = Matrix::<f64>::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let k2 = Matrix::from_diag(&[1.0, 3.0]);
        let w = Matrix::from_diag(&[5.0, 5.0]);
        let cfg = FusionConfig { tau: 0.0, ..Default::default() };
        let f = fuse(&k1, &k2, &w, &cfg).unwrap();
        assert_eq!(f.k, f.combined);
    }

    #[test]
    fn scalar_means() {
        let g = combiner_geometric(&Matrix::<f64>::from_diag(&[4.0]), &Matrix::from_diag(&[1.0]), 0.5, 0.0).unwrap();
        assert!((g[(0, 0)] - 2.0).abs() < 1e-14);
        let h = combiner_harmonic(&Matrix::<f64>::from_diag(&[1.0]), &Matrix::from_diag(&[1.0 / 3.0]), 0.5, 0.0).unwrap();
        assert!((h[(0, 0)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn means_of_equal_arguments() {
        let a = Matrix::<f64>::from_rows(&[vec![3.0, 1.0, 0.0], vec![1.0, 2.0, 0.5], vec![0.0, 0.5, 1.0]]).unwrap();
        for t in [0.0, 0.3, 1.0] {
            let g = combiner_geometric(&a, &a, t, 1e-9).unwrap();
            let h = combiner_harmonic(&a, &a, t, 1e-9).unwrap();
            assert!(g.rel_diff(&a) < 1e-8);
            assert!(h.rel_diff(&a) < 1e-8);
        }
    }

    #[test]
    fn singular_without_ridge() {
        let s = Matrix::<f64>::from_diag(&[1.0, 0.0]);
        let cfg = FusionConfig {
            tau: 0.2,
            combiner: Combiner::Geometric { t: 0.5 },
            ridge: Some(0.0),
        };
        assert!(matches!(fuse(&s, &s, &s, &cfg), Err(AlsiError::Singular { .. })));
        let cfg = FusionConfig { ridge: None, ..cfg };
        let f = fuse(&s, &s, &s, &cfg).unwrap();
        assert!(f.ridge.unwrap() > 0.0);
    }

    #[test]
    fn feature_map_edge_weights() {
        let phi1 = Matrix::<f64>::from_fn(4, 2, |i, j| (i + 2 * j) as f64 - 1.5);
        let phi2 = Matrix::<f64>::from_fn(4, 3, |i, j| ((i * j) % 3) as f64);
        let only_first = kernel_sum_feature_map(&phi1, &phi2, 1.0, 0.0).unwrap();
        let g = only_first.matmul_t(&only_first).unwrap();
        assert!(g.sub(&phi1.matmul_t(&phi1).unwrap()).unwrap().max_abs() < 1e-14);
        let halves = kernel_sum_feature_map(&phi1, &phi1, 0.5, 0.5).unwrap();
        let g = halves.matmul_t(&halves).unwrap();
        assert!(g.sub(&phi1.matmul_t(&phi1).unwrap()).unwrap().max_abs() < 1e-14);
        assert!(kernel_sum_feature_map(&phi1, &phi2, -1.0, 1.0).is_err());
    }

    #[test]
    fn combiner_parsing() {
        assert_eq!("arithmetic".parse::<Combiner>().unwrap(), Combiner::Arithmetic);
        assert_eq!("harmonic:0.25".parse::<Combiner>().unwrap(), Combiner::Harmonic { t: 0.25 });
        assert_eq!("geometric".parse::<Combiner>().unwrap(), Combiner::Geometric { t: 0.5 });
        assert!("median".parse::<Combiner>().is_err());
        let bad = FusionConfig { combiner: Combiner::Harmonic { t: 1.5 }, ..FusionConfig::<f64>::default() };
        assert!(bad.validate().is_err());
    }
}

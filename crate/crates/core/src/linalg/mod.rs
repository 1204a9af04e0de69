//! Dense matrices and the factorizations the pipeline is built on.

mod eig;
mod columns;
mod lowrank;
mod matrix;
mod sign;
mod svd;

pub mod csv;

pub use eig::{sym_eig, EigResult};
pub use matrix::Matrix;
pub(crate) use matrix::dot;
pub use svd::{svd, SvdResult};

use crate::error::{AlsiError, Result, Warning};
use crate::scalar::Real;

/// `S = K₁·L = L·K₂` with `K₁ = U Σ Uᵀ`, `K₂ = V Σ Vᵀ`, `L = U Vᵀ`.
#[derive(Debug, Clone)]
pub struct PolarParts<T: Real = f64> {
    pub k1: Matrix<T>,
    pub k2: Matrix<T>,
    pub l: Matrix<T>,
}

/// Left and right polar decomposition of a square matrix from one SVD.
pub fn polar_decompose<T: Real>(s: &Matrix<T>) -> Result<PolarParts<T>> {
    if !s.is_square() {
        return Err(AlsiError::Dimension(format!(
            "polar decomposition needs a square matrix, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    let f = svd(s)?;
    Ok(PolarParts {
        k1: Matrix::weighted_gram(&f.u, &f.sigma)?,
        k2: Matrix::weighted_gram(&f.v, &f.sigma)?,
        l: f.u.matmul_t(&f.v)?,
    })
}

/// `(K₁, K₂)` of [`polar_decompose`] without forming `L`.
pub fn polar_sources<T: Real>(s: &Matrix<T>) -> Result<(Matrix<T>, Matrix<T>)> {
    if !s.is_square() {
        return Err(AlsiError::Dimension(format!(
            "polar decomposition needs a square matrix, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    let f = svd(s)?;
    Ok((
        Matrix::weighted_gram(&f.u, &f.sigma)?,
        Matrix::weighted_gram(&f.v, &f.sigma)?,
    ))
}

/// Output of [`psd_clip`].
#[derive(Debug, Clone)]
pub struct PsdClip<T: Real = f64> {
    pub matrix: Matrix<T>,
    /// Eigenvalues below `-tol` that were floored to zero.
    pub clipped: Vec<T>,
    pub warning: Option<Warning>,
}

/// Floor negative eigenvalues of a symmetric matrix at zero.
///
/// Input that is already PSD is returned unchanged. Eigenvalues below `-tol`
/// are reported in a warning; smaller negatives are floored silently.
pub fn psd_clip<T: Real>(a: &Matrix<T>, tol: T) -> Result<PsdClip<T>> {
    let eig = sym_eig(a)?;
    if eig.values.iter().all(|&l| l >= T::zero()) {
        return Ok(PsdClip {
            matrix: a.clone(),
            clipped: Vec::new(),
            warning: None,
        });
    }
    let clipped: Vec<T> = eig.values.iter().copied().filter(|&l| l < -tol).collect();
    let warning = (!clipped.is_empty()).then(|| {
        Warning::new(
            "psd_clip",
            format!(
                "floored {} eigenvalue(s) below -{tol:e}: {:?}",
                clipped.len(),
                clipped.iter().map(|l| l.as_f64()).collect::<Vec<_>>()
            ),
        )
    });
    Ok(PsdClip {
        matrix: eig.apply(|l| l.max(T::zero())),
        clipped,
        warning,
    })
}

/// Symmetric matrix function `U f(Λ) Uᵀ`.
pub fn sym_apply<T: Real>(a: &Matrix<T>, f: impl Fn(T) -> T) -> Result<Matrix<T>> {
    Ok(sym_eig(a)?.apply(f))
}

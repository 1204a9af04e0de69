//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar the factorizations and models are written against.
///
/// Tolerances are precision dependent: the `f64` values are the contract
/// tolerances of the library, the `f32` values are scaled to single precision.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Absolute tolerance for symmetry, orthogonality and PSD checks.
    fn sym_tol() -> Self;

    /// Relative cutoff below which a singular value or eigenvalue counts as zero.
    fn rank_eps() -> Self;

    /// Lossy literal conversion; panics only for values that do not fit `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    #[inline]
    fn sym_tol() -> Self {
        1e-10
    }
    #[inline]
    fn rank_eps() -> Self {
        1e-12
    }
}

impl Real for f32 {
    #[inline]
    fn sym_tol() -> Self {
        1e-4
    }
    #[inline]
    fn rank_eps() -> Self {
        1e-6
    }
}

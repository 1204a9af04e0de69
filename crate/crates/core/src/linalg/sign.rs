use crate::linalg::matrix::Matrix;
use crate::scalar::Real;

/// Flip column pairs so each column of `primary` has a non-negative
/// largest-magnitude entry (lowest row index on ties).
pub(crate) fn canonicalize_pairs<T: Real>(primary: &mut Matrix<T>, mut paired: Option<&mut Matrix<T>>) {
    for j in 0..primary.cols() {
        let mut best = 0;
        let mut best_abs = T::neg_infinity();
        for i in 0..primary.rows() {
            let a = primary[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if primary.rows() > 0 && primary[(best, j)] < T::zero() {
            for i in 0..primary.rows() {
                primary[(i, j)] = -primary[(i, j)];
            }
            if let Some(other) = paired.as_deref_mut() {
                for i in 0..other.rows() {
                    other[(i, j)] = -other[(i, j)];
                }
            }
        }
    }
}

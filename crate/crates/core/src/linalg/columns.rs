//! Column-wise updates for the dense factorizations. Every column sees the
//! same operations in the same order whether or not the work is split across
//! threads, so results do not depend on the thread count.

use rayon::prelude::*;

use crate::scalar::Real;

/// Buffer length below which the serial path is used.
const PAR_MIN_WORK: usize = 1 << 15;

/// Run `f(j, column_j)` over the columns of a column-major buffer.
pub(crate) fn for_each_column<T: Real>(
    buf: &mut [T],
    rows: usize,
    f: impl Fn(usize, &mut [T]) + Sync + Send,
) {
    if rows == 0 {
        return;
    }
    if buf.len() >= PAR_MIN_WORK {
        buf.par_chunks_mut(rows).enumerate().for_each(|(j, c)| f(j, c));
    } else {
        buf.chunks_mut(rows).enumerate().for_each(|(j, c)| f(j, c));
    }
}

/// Evaluate `f(j, column_j)` over the first `cols` columns of a column-major buffer.
pub(crate) fn map_columns<T: Real, R: Send>(
    buf: &[T],
    rows: usize,
    cols: usize,
    f: impl Fn(usize, &[T]) -> R + Sync + Send,
) -> Vec<R> {
    if rows == 0 {
        return (0..cols).map(|j| f(j, &[])).collect();
    }
    let buf = &buf[..rows * cols];
    if buf.len() >= PAR_MIN_WORK {
        buf.par_chunks(rows).enumerate().map(|(j, c)| f(j, c)).collect()
    } else {
        buf.chunks(rows).enumerate().map(|(j, c)| f(j, c)).collect()
    }
}

/// Column-major `rows × cols` to row-major, and back (the same operation).
pub(crate) fn transpose_buf<T: Real>(buf: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); buf.len()];
    for j in 0..cols {
        for i in 0..rows {
            out[i * cols + j] = buf[j * rows + i];
        }
    }
    out
}

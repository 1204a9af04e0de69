//! Inclusion similarity between genes and the baseline dissimilarities.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AlsiError, Result, Warning};
use crate::ingest::IncidenceMatrix;
use crate::linalg::Matrix;
use crate::scalar::Real;
use crate::stats::Histogram;

/// `s_ij = |t_i ∧ t_j| / |t_i|`: the fraction of gene i's experiments in which
/// gene j is also expressed.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymmetricSimilarity<T: Real = f64> {
    pub genes: Vec<String>,
    pub s: Matrix<T>,
}

pub fn asymmetric_similarity<T: Real>(x: &IncidenceMatrix) -> Result<AsymmetricSimilarity<T>> {
    let bits = x.column_bits();
    let norms: Vec<u32> = bits
        .iter()
        .map(|b| b.iter().map(|w| w.count_ones()).sum())
        .collect();
    if let Some(j) = norms.iter().position(|&c| c == 0) {
        return Err(AlsiError::Contract(format!(
            "gene {:?} has zero norm",
            x.genes[j]
        )));
    }
    let p = bits.len();
    let mut data = vec![T::zero(); p * p];
    let fill = |(i, row): (usize, &mut [T])| {
        let denom = T::from_u32(norms[i]).expect("count fits");
        for (j, out) in row.iter_mut().enumerate() {
            let both: u32 = bits[i]
                .iter()
                .zip(&bits[j])
                .map(|(a, b)| (a & b).count_ones())
                .sum();
            *out = T::from_u32(both).expect("count fits") / denom;
        }
    };
    if p > 0 {
        data.par_chunks_mut(p).enumerate().for_each(fill);
    }
    Ok(AsymmetricSimilarity {
        genes: x.genes.clone(),
        s: Matrix::new(p, p, data)?,
    })
}

/// `(S + Sᵀ)/2` and `(S − Sᵀ)/2`.
pub fn skew_split<T: Real>(s: &Matrix<T>) -> Result<(Matrix<T>, Matrix<T>)> {
    if !s.is_square() {
        return Err(AlsiError::Dimension(format!(
            "skew split of a {}x{} matrix",
            s.rows(),
            s.cols()
        )));
    }
    let half = T::lit(0.5);
    let sym = Matrix::from_fn(s.rows(), s.cols(), |i, j| (s[(i, j)] + s[(j, i)]) * half);
    let skew = Matrix::from_fn(s.rows(), s.cols(), |i, j| (s[(i, j)] - s[(j, i)]) * half);
    Ok((sym, skew))
}

/// Gene norm distribution and asymmetry summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormDiagnostics {
    pub norms: Vec<usize>,
    pub histogram: Histogram,
    pub max_skew: f64,
    pub mean_skew: f64,
}

pub fn norm_diagnostics<T: Real>(
    x: &IncidenceMatrix,
    s: &AsymmetricSimilarity<T>,
    bins: usize,
) -> Result<NormDiagnostics> {
    if bins < 1 {
        return Err(AlsiError::Contract("norm histogram needs at least one bin".into()));
    }
    let p = x.n_genes();
    if s.s.shape() != (p, p) {
        return Err(AlsiError::Dimension(format!(
            "{p} genes but a {}x{} similarity",
            s.s.rows(),
            s.s.cols()
        )));
    }
    let norms = x.norms();
    let as_f: Vec<f64> = norms.iter().map(|&c| c as f64).collect();
    let mut max_skew = 0.0f64;
    let mut total = 0.0;
    for i in 0..p {
        for j in 0..p {
            let d = (s.s[(i, j)] - s.s[(j, i)]).abs().as_f64();
            max_skew = max_skew.max(d);
            total += d;
        }
    }
    Ok(NormDiagnostics {
        norms,
        histogram: Histogram::equal_width(&as_f, bins)?,
        max_skew,
        mean_skew: if p > 0 { total / (p * p) as f64 } else { 0.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Euclidean,
    Pearson,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::Euclidean => "euclidean",
            BaselineKind::Pearson => "pearson",
        })
    }
}

impl FromStr for BaselineKind {
    type Err = AlsiError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(BaselineKind::Euclidean),
            "pearson" => Ok(BaselineKind::Pearson),
            other => Err(AlsiError::Config(format!("unknown baseline {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Baseline<T: Real = f64> {
    pub distances: Matrix<T>,
    pub warnings: Vec<Warning>,
}

/// Pairwise dissimilarities between the columns of `m`: Euclidean distance,
/// or `1 − r` for the Pearson correlation `r`.
pub fn baseline_distances<T: Real>(m: &Matrix<T>, kind: BaselineKind) -> Result<Baseline<T>> {
    let (n, p) = m.shape();
    let cols: Vec<Vec<T>> = (0..p).map(|j| m.column(j)).collect();
    let mut warnings = Vec::new();
    let mut d = Matrix::zeros(p, p);
    match kind {
        BaselineKind::Euclidean => {
            for i in 0..p {
                for j in (i + 1)..p {
                    let v = cols[i]
                        .iter()
                        .zip(&cols[j])
                        .map(|(&a, &b)| (a - b) * (a - b))
                        .sum::<T>()
                        .sqrt();
                    d[(i, j)] = v;
                    d[(j, i)] = v;
                }
            }
        }
        BaselineKind::Pearson => {
            if n < 2 {
                return Err(AlsiError::Contract(format!(
                    "Pearson baseline needs at least 2 rows, got {n}"
                )));
            }
            let nt = T::from_usize_lossy(n);
            // centred, unit-norm columns; zero-variance columns stay None
            let unit: Vec<Option<Vec<T>>> = cols
                .iter()
                .map(|c| {
                    let mean = c.iter().copied().sum::<T>() / nt;
                    let centred: Vec<T> = c.iter().map(|&v| v - mean).collect();
                    let norm = centred.iter().map(|&v| v * v).sum::<T>().sqrt();
                    (norm > T::zero()).then(|| centred.into_iter().map(|v| v / norm).collect())
                })
                .collect();
            let flat: Vec<usize> = (0..p).filter(|&j| unit[j].is_none()).collect();
            if !flat.is_empty() {
                warnings.push(Warning::new(
                    "baseline_distances",
                    format!(
                        "{} zero-variance column(s) given correlation 0: {:?}",
                        flat.len(),
                        flat
                    ),
                ));
            }
            for i in 0..p {
                for j in (i + 1)..p {
                    let r = match (&unit[i], &unit[j]) {
                        (Some(a), Some(b)) => crate::linalg::dot(a, b).max(-T::one()).min(T::one()),
                        _ => T::zero(),
                    };
                    let v = T::one() - r;
                    d[(i, j)] = v;
                    d[(j, i)] = v;
                }
            }
        }
    }
    Ok(Baseline {
        distances: d,
        warnings,
    })
}

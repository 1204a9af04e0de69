//! Shared generators and oracles for the integration suites.
#![allow(dead_code)]

use alsi::ingest::IncidenceMatrix;
use alsi::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| rng.gen::<f64>())
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| normal(rng))
}

/// `A·Aᵀ` for a random `n × rank` factor.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> Matrix<f64> {
    let a = gaussian(rng, n, rank);
    naive_mul(&a, &transpose(&a))
}

pub fn transpose(a: &Matrix<f64>) -> Matrix<f64> {
    Matrix::from_fn(a.cols(), a.rows(), |i, j| a[(j, i)])
}

/// Triple-loop product, kept separate from the library kernels.
pub fn naive_mul(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
    assert_eq!(a.cols(), b.rows());
    Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        (0..a.cols()).map(|k| a[(i, k)] * b[(k, j)]).sum()
    })
}

pub fn frob(a: &Matrix<f64>) -> f64 {
    a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Random incidence matrix with every gene expressed at least once.
pub fn random_incidence(rng: &mut ChaCha8Rng, n: usize, p: usize, density: f64) -> IncidenceMatrix {
    let mut x = Matrix::from_fn(n, p, |_, _| if rng.gen::<f64>() < density { 1.0 } else { 0.0 });
    for j in 0..p {
        if (0..n).all(|i| x[(i, j)] == 0.0) {
            let i = rng.gen_range(0..n);
            x[(i, j)] = 1.0;
        }
    }
    let experiments = (0..n).map(|i| format!("e{i}")).collect();
    let genes = (0..p).map(|j| format!("g{j}")).collect();
    IncidenceMatrix::new(experiments, genes, x, None).unwrap()
}

/// Euclidean distances between the rows of `y`.
pub fn row_distances(y: &Matrix<f64>) -> Matrix<f64> {
    Matrix::from_fn(y.rows(), y.rows(), |i, j| {
        (0..y.cols())
            .map(|k| (y[(i, k)] - y[(j, k)]).powi(2))
            .sum::<f64>()
            .sqrt()
    })
}

/// Two isotropic clouds of `per` points each in `dims` dimensions with
/// centres `separation` standard deviations apart. Labels are 0 and 1.
pub fn planted_clouds(
    rng: &mut ChaCha8Rng,
    per: usize,
    dims: usize,
    separation: f64,
) -> (Matrix<f64>, Vec<usize>) {
    let mut data = Matrix::zeros(2 * per, dims);
    let mut labels = Vec::with_capacity(2 * per);
    for i in 0..2 * per {
        let label = i % 2;
        labels.push(label);
        for k in 0..dims {
            let centre = if k == 0 && label == 1 { separation } else { 0.0 };
            data[(i, k)] = centre + normal(rng);
        }
    }
    (data, labels)
}

/// Same partition up to relabelling.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    use std::collections::BTreeMap;
    if a.len() != b.len() {
        return false;
    }
    let mut fwd = BTreeMap::new();
    let mut back = BTreeMap::new();
    a.iter().zip(b).all(|(&x, &y)| {
        *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x
    })
}

/// Minimiser of a quadratic objective over symmetric `n × n` matrices,
/// treating `objective` as a black box. Gradient and Hessian over the
/// upper-triangle coordinates come from unit-step central differences (exact
/// for quadratics up to rounding); the stationarity system is solved by
/// Gaussian elimination.
pub fn quadratic_minimizer(n: usize, objective: impl Fn(&Matrix<f64>) -> f64) -> Matrix<f64> {
    let mut coords = Vec::new();
    for i in 0..n {
        for j in i..n {
            coords.push((i, j));
        }
    }
    let m = coords.len();
    let eval = |steps: &[(usize, f64)]| {
        let mut k = Matrix::zeros(n, n);
        for &(c, h) in steps {
            let (i, j) = coords[c];
            k[(i, j)] += h;
            if i != j {
                k[(j, i)] += h;
            }
        }
        objective(&k)
    };
    let g0 = eval(&[]);
    let mut grad = vec![0.0; m];
    let mut hess = vec![vec![0.0; m]; m];
    for a in 0..m {
        let plus = eval(&[(a, 1.0)]);
        let minus = eval(&[(a, -1.0)]);
        grad[a] = (plus - minus) / 2.0;
        hess[a][a] = plus + minus - 2.0 * g0;
        for b in 0..a {
            let v = (eval(&[(a, 1.0), (b, 1.0)]) - eval(&[(a, 1.0), (b, -1.0)])
                - eval(&[(a, -1.0), (b, 1.0)])
                + eval(&[(a, -1.0), (b, -1.0)]))
                / 4.0;
            hess[a][b] = v;
            hess[b][a] = v;
        }
    }
    let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
    let x = gaussian_elimination(hess, rhs);
    let mut k = Matrix::zeros(n, n);
    for (c, &(i, j)) in coords.iter().enumerate() {
        k[(i, j)] = x[c];
        k[(j, i)] = x[c];
    }
    k
}

pub fn gaussian_elimination(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())
            .unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

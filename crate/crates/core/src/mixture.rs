//! Gaussian mixture clustering of latent coordinates by EM.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AlsiError, Result, Warning};
use crate::ingest::Membership;
use crate::latent::LatentEmbedding;
use crate::linalg::{sym_eig, Matrix};
use crate::scalar::Real;

/// Responsibility mass below which a component counts as empty.
const EMPTY_COMPONENT_MASS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    #[default]
    Diagonal,
    Full,
}

impl fmt::Display for CovarianceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovarianceKind::Diagonal => "diagonal",
            CovarianceKind::Full => "full",
        })
    }
}

impl FromStr for CovarianceKind {
    type Err = AlsiError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diagonal" => Ok(CovarianceKind::Diagonal),
            "full" => Ok(CovarianceKind::Full),
            other => Err(AlsiError::Config(format!("unknown covariance kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    pub restarts: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    /// Variance floor relative to the mean per-dimension data variance.
    pub ridge: f64,
    pub seed: u64,
    pub covariance: CovarianceKind,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            restarts: 10,
            max_iter: 500,
            rel_tol: 1e-8,
            ridge: 1e-6,
            seed: 0,
            covariance: CovarianceKind::Diagonal,
        }
    }
}

/// Fitted mixture `f(t) = Σ_k α_k N(μ_k, Σ_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MixtureModel<T: Real = f64> {
    pub q: usize,
    pub dims: usize,
    pub weights: Vec<T>,
    pub means: Vec<Vec<T>>,
    /// Diagonal entries (`dims` values) or a row-major `dims × dims` matrix.
    pub covariances: Vec<Vec<T>>,
    pub covariance: CovarianceKind,
    pub variance_floor: T,
    pub loglik: T,
    /// Log-likelihood after each E-step of the winning restart.
    pub trace: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    pub restart: usize,
    pub seed: u64,
}

/// Fitted model plus diagnostics from every restart.
#[derive(Debug, Clone)]
pub struct GmmFit<T: Real = f64> {
    pub model: MixtureModel<T>,
    pub restart_logliks: Vec<T>,
    /// Restarts whose EM trace was interrupted by an empty-component reseed.
    pub reseeded_restarts: Vec<usize>,
    pub warnings: Vec<Warning>,
}

/// Per-component quantities for evaluating log-densities.
enum Precision<T: Real> {
    Diagonal { inv_var: Vec<T> },
    Full { basis: Matrix<T>, inv_lambda: Vec<T> },
}

struct Component<T: Real> {
    log_weight: T,
    mean: Vec<T>,
    precision: Precision<T>,
    /// `-½ (d log 2π + log det Σ)`
    log_norm: T,
}

impl<T: Real> Component<T> {
    fn log_density(&self, x: &[T]) -> T {
        let half = T::lit(0.5);
        let maha = match &self.precision {
            Precision::Diagonal { inv_var } => x
                .iter()
                .zip(&self.mean)
                .zip(inv_var)
                .map(|((&xi, &mi), &iv)| (xi - mi) * (xi - mi) * iv)
                .sum::<T>(),
            Precision::Full { basis, inv_lambda } => {
                let centred: Vec<T> = x.iter().zip(&self.mean).map(|(&a, &b)| a - b).collect();
                (0..basis.cols())
                    .map(|k| {
                        let proj = (0..basis.rows())
                            .map(|i| basis[(i, k)] * centred[i])
                            .sum::<T>();
                        proj * proj * inv_lambda[k]
                    })
                    .sum::<T>()
            }
        };
        self.log_weight + self.log_norm - half * maha
    }
}

fn components<T: Real>(model: &MixtureModel<T>) -> Result<Vec<Component<T>>> {
    let d = model.dims;
    let log_2pi = T::lit(std::f64::consts::TAU).ln();
    let half = T::lit(0.5);
    (0..model.q)
        .map(|k| {
            let (precision, log_det) = match model.covariance {
                CovarianceKind::Diagonal => {
                    let var = &model.covariances[k];
                    let log_det = var.iter().map(|v| v.ln()).sum::<T>();
                    (
                        Precision::Diagonal {
                            inv_var: var.iter().map(|v| v.recip()).collect(),
                        },
                        log_det,
                    )
                }
                CovarianceKind::Full => {
                    let cov = Matrix::new(d, d, model.covariances[k].clone())?;
                    let e = sym_eig(&cov).map_err(|e| e.named("component covariance"))?;
                    if e.values.iter().any(|&l| l <= T::zero()) {
                        return Err(AlsiError::Singular {
                            matrix: format!("covariance of component {k}"),
                            min_eigenvalue: e.values.last().map_or(0.0, |v| v.as_f64()),
                        });
                    }
                    let log_det = e.values.iter().map(|v| v.ln()).sum::<T>();
                    (
                        Precision::Full {
                            inv_lambda: e.values.iter().map(|v| v.recip()).collect(),
                            basis: e.vectors,
                        },
                        log_det,
                    )
                }
            };
            Ok(Component {
                log_weight: model.weights[k].ln(),
                mean: model.means[k].clone(),
                precision,
                log_norm: -half * (T::from_usize_lossy(d) * log_2pi + log_det),
            })
        })
        .collect()
}

fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<T>().ln()
}

/// Joint log-densities per item and component, and the per-item mixture log-density.
fn e_step<T: Real>(comps: &[Component<T>], data: &Matrix<T>) -> (Matrix<T>, Vec<T>) {
    let q = comps.len();
    let mut joint = Matrix::zeros(data.rows(), q);
    let mut lse = Vec::with_capacity(data.rows());
    for i in 0..data.rows() {
        let x = data.row(i);
        let row = joint.row_mut(i);
        for (k, c) in comps.iter().enumerate() {
            row[k] = c.log_density(x);
        }
        lse.push(log_sum_exp(row));
    }
    (joint, lse)
}

struct RunOutcome<T: Real> {
    model: MixtureModel<T>,
    reseeded: bool,
    warnings: Vec<Warning>,
}

/// Fit a `q`-component mixture by EM with k-means++ seeding; the restart with
/// the highest final log-likelihood wins (lowest restart index on ties).
pub fn fit_gmm<T: Real>(coords: &LatentEmbedding<T>, q: usize, cfg: &GmmConfig) -> Result<GmmFit<T>> {
    fit_gmm_matrix(&coords.coords, q, cfg)
}

pub fn fit_gmm_matrix<T: Real>(data: &Matrix<T>, q: usize, cfg: &GmmConfig) -> Result<GmmFit<T>> {
    let (n, d) = data.shape();
    if q == 0 || q > n {
        return Err(AlsiError::Contract(format!(
            "component count {q} outside 1..={n}"
        )));
    }
    if d == 0 {
        return Err(AlsiError::Contract("mixture data has no dimensions".into()));
    }
    if cfg.restarts == 0 || !(cfg.ridge > 0.0) {
        return Err(AlsiError::Config(
            "GMM needs at least one restart and a positive ridge".into(),
        ));
    }
    let nt = T::from_usize_lossy(n);
    let mean: Vec<T> = (0..d)
        .map(|j| (0..n).map(|i| data[(i, j)]).sum::<T>() / nt)
        .collect();
    let var: Vec<T> = (0..d)
        .map(|j| {
            (0..n)
                .map(|i| (data[(i, j)] - mean[j]) * (data[(i, j)] - mean[j]))
                .sum::<T>()
                / nt
        })
        .collect();
    let mean_var = var.iter().copied().sum::<T>() / T::from_usize_lossy(d);
    let scale = if mean_var > T::zero() { mean_var } else { T::one() };
    let floor = T::lit(cfg.ridge) * scale;
    let init_var: Vec<T> = var.iter().map(|&v| v.max(floor)).collect();

    let runs: Vec<Result<RunOutcome<T>>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| single_run(data, q, cfg, r, floor, &init_var))
        .collect();
    let runs: Vec<RunOutcome<T>> = runs.into_iter().collect::<Result<_>>()?;

    let restart_logliks: Vec<T> = runs.iter().map(|r| r.model.loglik).collect();
    let mut best = 0;
    for (r, &ll) in restart_logliks.iter().enumerate() {
        if ll > restart_logliks[best] {
            best = r;
        }
    }
    let reseeded_restarts = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.reseeded)
        .map(|(i, _)| i)
        .collect();
    let mut warnings = Vec::new();
    for r in &runs {
        warnings.extend(r.warnings.iter().cloned());
    }
    let model = runs.into_iter().nth(best).expect("at least one restart").model;
    Ok(GmmFit {
        model,
        restart_logliks,
        reseeded_restarts,
        warnings,
    })
}

/// Deterministic per-restart generator derived from the seed.
fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// k-means++ centre selection.
fn kmeans_pp<T: Real>(data: &Matrix<T>, q: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
    let n = data.rows();
    let mut centres = vec![data.row(rng.gen_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), &centres[0]).as_f64()).collect();
    while centres.len() < q {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        let c = data.row(pick).to_vec();
        for (i, slot) in d2.iter_mut().enumerate() {
            *slot = slot.min(sq_dist(data.row(i), &c).as_f64());
        }
        centres.push(c);
    }
    centres
}

fn single_run<T: Real>(
    data: &Matrix<T>,
    q: usize,
    cfg: &GmmConfig,
    restart: usize,
    floor: T,
    init_var: &[T],
) -> Result<RunOutcome<T>> {
    let (n, d) = data.shape();
    let mut rng = restart_rng(cfg.seed, restart);
    let means = kmeans_pp(data, q, &mut rng);
    let init_cov = |var: &[T]| match cfg.covariance {
        CovarianceKind::Diagonal => var.to_vec(),
        CovarianceKind::Full => Matrix::from_diag(var).into_vec(),
    };
    let mut model = MixtureModel {
        q,
        dims: d,
        weights: vec![T::one() / T::from_usize_lossy(q); q],
        means,
        covariances: vec![init_cov(init_var); q],
        covariance: cfg.covariance,
        variance_floor: floor,
        loglik: T::neg_infinity(),
        trace: Vec::new(),
        iterations: 0,
        converged: false,
        restart,
        seed: cfg.seed,
    };
    let mut warnings = Vec::new();
    let mut reseeded = false;
    let rel_tol = T::lit(cfg.rel_tol);
    loop {
        let comps = components(&model)?;
        let (joint, lse) = e_step(&comps, data);
        let ll = lse.iter().copied().sum::<T>();
        if let Some(&prev) = model.trace.last() {
            if ll - prev < rel_tol * prev.abs() {
                model.converged = true;
            }
        }
        model.trace.push(ll);
        model.loglik = ll;
        if model.converged || model.iterations >= cfg.max_iter {
            break;
        }

        // M-step
        let mut mass = vec![T::zero(); q];
        let mut resp = joint;
        for i in 0..n {
            for k in 0..q {
                let r = (resp[(i, k)] - lse[i]).exp();
                resp[(i, k)] = r;
                mass[k] = mass[k] + r;
            }
        }
        let nt = T::from_usize_lossy(n);
        for k in 0..q {
            if mass[k].as_f64() < EMPTY_COMPONENT_MASS {
                let worst = (0..n)
                    .min_by(|&a, &b| lse[a].partial_cmp(&lse[b]).unwrap_or(std::cmp::Ordering::Equal))
                    .expect("non-empty data");
                warnings.push(Warning::new(
                    "fit_gmm",
                    format!(
                        "restart {restart}, iteration {}: component {k} emptied; reseeded at item {worst}",
                        model.iterations
                    ),
                ));
                reseeded = true;
                model.means[k] = data.row(worst).to_vec();
                model.covariances[k] = init_cov(init_var);
                model.weights[k] = T::one() / T::from_usize_lossy(q);
                continue;
            }
            model.weights[k] = mass[k] / nt;
            let mu: Vec<T> = (0..d)
                .map(|j| (0..n).map(|i| resp[(i, k)] * data[(i, j)]).sum::<T>() / mass[k])
                .collect();
            model.covariances[k] = match cfg.covariance {
                CovarianceKind::Diagonal => (0..d)
                    .map(|j| {
                        let v = (0..n)
                            .map(|i| {
                                let c = data[(i, j)] - mu[j];
                                resp[(i, k)] * c * c
                            })
                            .sum::<T>()
                            / mass[k];
                        v.max(floor)
                    })
                    .collect(),
                CovarianceKind::Full => {
                    let mut s = Matrix::zeros(d, d);
                    for a in 0..d {
                        for b in a..d {
                            let v = (0..n)
                                .map(|i| {
                                    resp[(i, k)] * (data[(i, a)] - mu[a]) * (data[(i, b)] - mu[b])
                                })
                                .sum::<T>()
                                / mass[k];
                            s[(a, b)] = v;
                            s[(b, a)] = v;
                        }
                    }
                    // eigenvalue floor: constrained maximum-likelihood covariance
                    sym_eig(&s)?.apply(|l| l.max(floor)).into_vec()
                }
            };
            model.means[k] = mu;
        }
        let wsum = model.weights.iter().copied().sum::<T>();
        for w in &mut model.weights {
            *w = *w / wsum;
        }
        model.iterations += 1;
    }
    Ok(RunOutcome {
        model,
        reseeded,
        warnings,
    })
}

/// Posterior class probabilities `p(c_k | t_j)` and the argmax assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities<T: Real = f64> {
    pub items: Vec<String>,
    pub probs: Matrix<T>,
    /// Lowest component index attaining each row maximum.
    pub hard: Vec<usize>,
}

pub fn responsibilities<T: Real>(
    model: &MixtureModel<T>,
    coords: &LatentEmbedding<T>,
) -> Result<Responsibilities<T>> {
    if coords.coords.cols() != model.dims {
        return Err(AlsiError::Dimension(format!(
            "model has {} dimensions, coordinates have {}",
            model.dims,
            coords.coords.cols()
        )));
    }
    let comps = components(model)?;
    let (mut probs, lse) = e_step(&comps, &coords.coords);
    let mut hard = Vec::with_capacity(probs.rows());
    for (i, &l) in lse.iter().enumerate() {
        let row = probs.row_mut(i);
        for v in row.iter_mut() {
            *v = (*v - l).exp();
        }
        let total = row.iter().copied().sum::<T>();
        let mut best = 0;
        for k in 0..row.len() {
            row[k] = row[k] / total;
            if row[k] > row[best] {
                best = k;
            }
        }
        hard.push(best);
    }
    Ok(Responsibilities {
        items: coords.items.clone(),
        probs,
        hard,
    })
}

/// Counts of items per (external class, cluster); multi-class items count once per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTable {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl CrossTable {
    pub fn row_total(&self, r: usize) -> usize {
        self.counts[r].iter().sum()
    }

    /// Column with the largest count in row `r` (lowest index on ties).
    pub fn modal_cluster(&self, r: usize) -> usize {
        let row = &self.counts[r];
        let mut best = 0;
        for (c, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = c;
            }
        }
        best
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| AlsiError::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut emit = || -> std::io::Result<()> {
            writeln!(w, "class,{}", self.col_labels.join(","))?;
            for (label, row) in self.row_labels.iter().zip(&self.counts) {
                let cells: Vec<String> = row.iter().map(usize::to_string).collect();
                writeln!(w, "{label},{}", cells.join(","))?;
            }
            w.flush()
        };
        emit().map_err(|e| AlsiError::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let lm = crate::linalg::csv::read_matrix(path, true)?;
        let col_labels = lm
            .column_names()
            .ok_or_else(|| AlsiError::Contract(format!("{}: missing header", path.display())))?
            .to_vec();
        let m = lm.matrix;
        let counts = (0..m.rows())
            .map(|i| m.row(i).iter().map(|&v| v as usize).collect())
            .collect();
        Ok(CrossTable {
            row_labels: lm.row_labels.unwrap_or_default(),
            col_labels,
            counts,
        })
    }
}

pub fn cross_table<T: Real>(resp: &Responsibilities<T>, membership: &Membership) -> Result<CrossTable> {
    let q = resp.probs.cols();
    let mut counts = vec![vec![0; q]; membership.classes.len()];
    for (item, &cluster) in resp.items.iter().zip(&resp.hard) {
        let j = membership
            .index_of(item)
            .ok_or_else(|| AlsiError::Contract(format!("unknown item id {item:?}")))?;
        if membership.sets[j].is_empty() {
            return Err(AlsiError::Contract(format!("item {item:?} has no external class")));
        }
        for &class in &membership.sets[j] {
            counts[class][cluster] += 1;
        }
    }
    Ok(CrossTable {
        row_labels: membership.classes.clone(),
        col_labels: (1..=q).map(|c| format!("C{c}")).collect(),
        counts,
    })
}

/// Per cluster, the `k` item indices with the highest responsibility
/// (descending; lower index first on ties).
pub fn top_members<T: Real>(resp: &Responsibilities<T>, k: usize) -> Result<Vec<Vec<usize>>> {
    if k < 1 {
        return Err(AlsiError::Contract("top_members needs k >= 1".into()));
    }
    let n = resp.probs.rows();
    Ok((0..resp.probs.cols())
        .map(|c| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| {
                resp.probs[(b, c)]
                    .partial_cmp(&resp.probs[(a, c)])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            idx.truncate(k);
            idx
        })
        .collect())
}

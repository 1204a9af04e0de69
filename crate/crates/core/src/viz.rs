//! Low-dimensional maps: classical (Torgerson) MDS, Sammon mapping, class
//! profile distances, and SVG/CSV emission.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AlsiError, Result, Warning};
use crate::linalg::csv::format_g17;
use crate::linalg::{sym_eig, Matrix};
use crate::mixture::CrossTable;
use crate::scalar::Real;

/// Palette version 1: ten Tableau colours followed by six darker variants.
/// Keys are sorted and assigned colours in order, wrapping after sixteen.
pub const PALETTE: [&str; 16] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac", "#1f3b5a", "#8c4a0f", "#7a1f20", "#2f5f5b", "#2b5a24", "#6b5a12",
];
pub const PALETTE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Projection<T: Real = f64> {
    pub items: Vec<String>,
    /// One row per item.
    pub coords: Matrix<T>,
    /// Final Sammon stress; `None` for MDS.
    pub stress: Option<T>,
    /// Stress after the initial configuration and each accepted step.
    pub stress_trace: Vec<T>,
    /// MDS: each retained eigenvalue over the sum of positive eigenvalues.
    pub eigen_fractions: Vec<T>,
    pub color_key: Option<Vec<String>>,
    pub warnings: Vec<Warning>,
}

impl<T: Real> Projection<T> {
    fn bare(coords: Matrix<T>) -> Self {
        Projection {
            items: (0..coords.rows()).map(|i| i.to_string()).collect(),
            coords,
            stress: None,
            stress_trace: Vec::new(),
            eigen_fractions: Vec::new(),
            color_key: None,
            warnings: Vec::new(),
        }
    }

    pub fn with_items(mut self, items: Vec<String>) -> Result<Self> {
        if items.len() != self.coords.rows() {
            return Err(AlsiError::Dimension(format!(
                "{} item ids for {} points",
                items.len(),
                self.coords.rows()
            )));
        }
        self.items = items;
        Ok(self)
    }

    pub fn with_color_key(mut self, key: Vec<String>) -> Result<Self> {
        if key.len() != self.coords.rows() {
            return Err(AlsiError::Dimension(format!(
                "{} colour keys for {} points",
                key.len(),
                self.coords.rows()
            )));
        }
        self.color_key = Some(key);
        Ok(self)
    }

    pub fn dims(&self) -> usize {
        self.coords.cols()
    }
}

fn check_distances<T: Real>(d: &Matrix<T>) -> Result<()> {
    if !d.is_square() {
        return Err(AlsiError::Dimension(format!(
            "distance matrix is {}x{}",
            d.rows(),
            d.cols()
        )));
    }
    d.require_symmetric("D")?;
    let tol = T::sym_tol() * T::one().max(d.max_abs());
    for i in 0..d.rows() {
        if d[(i, i)].abs() > tol {
            return Err(AlsiError::Contract(format!("D[{i},{i}] is not zero")));
        }
    }
    if d.as_slice().iter().any(|&v| v < T::zero()) {
        return Err(AlsiError::Contract("distance matrix has negative entries".into()));
    }
    Ok(())
}

/// Torgerson scaling: eigenvectors of `-½ J D∘D J` scaled by `√λ`.
pub fn classical_mds<T: Real>(d: &Matrix<T>, dims: usize) -> Result<Projection<T>> {
    check_distances(d)?;
    if dims == 0 {
        return Err(AlsiError::Contract("MDS needs at least one dimension".into()));
    }
    let n = d.rows();
    if n == 0 {
        return Err(AlsiError::Contract("empty distance matrix".into()));
    }
    let nt = T::from_usize_lossy(n);
    let d2 = d.map(|v| v * v);
    let row_mean: Vec<T> = (0..n).map(|i| d2.row(i).iter().copied().sum::<T>() / nt).collect();
    let grand = row_mean.iter().copied().sum::<T>() / nt;
    let half = T::lit(0.5);
    let b = Matrix::from_fn(n, n, |i, j| -half * (d2[(i, j)] - (row_mean[i] + row_mean[j]) + grand));
    let e = sym_eig(&b).map_err(|e| e.named("double-centred D"))?;

    let mut warnings = Vec::new();
    let lmax = e.values[0].max(T::zero());
    let scale = T::one().max(lmax);
    let positive = e.values.iter().filter(|&&l| l > T::rank_eps() * scale).count();
    let negative = e.values.iter().filter(|&&l| l < -T::sym_tol() * scale).count();
    if negative > 0 {
        warnings.push(Warning::new(
            "classical_mds",
            format!(
                "dropped {negative} negative eigenvalues (most negative {:e}); distances are not Euclidean",
                e.values[n - 1]
            ),
        ));
    }
    let mut kept = dims.min(n);
    if positive < kept {
        warnings.push(Warning::new(
            "classical_mds",
            format!("requested {dims} dimensions, only {positive} positive eigenvalues"),
        ));
        kept = positive.max(1);
    }
    let coords = Matrix::from_fn(n, kept, |i, k| {
        if k < positive {
            e.vectors[(i, k)] * e.values[k].sqrt()
        } else {
            T::zero()
        }
    });
    let total: T = e.values[..positive].iter().copied().sum();
    let eigen_fractions = (0..kept)
        .map(|k| if k < positive { e.values[k] / total } else { T::zero() })
        .collect();
    let mut p = Projection::bare(coords);
    p.eigen_fractions = eigen_fractions;
    p.warnings = warnings;
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SammonConfig {
    pub max_iter: usize,
    /// Initial move as a fraction of the configuration size.
    pub step: f64,
    /// Relative stress improvement below which iteration stops.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SammonConfig {
    fn default() -> Self {
        SammonConfig {
            max_iter: 2000,
            step: 0.1,
            tol: 1e-12,
            seed: 0,
        }
    }
}

/// `(Σ_{i<j} (d_ij − δ_ij)² / d_ij) / Σ_{i<j} d_ij`
pub fn sammon_stress<T: Real>(d: &Matrix<T>, y: &Matrix<T>) -> T {
    let n = d.rows();
    let mut num = T::zero();
    let mut den = T::zero();
    for i in 0..n {
        for j in i + 1..n {
            let delta = euclid(y.row(i), y.row(j));
            let r = d[(i, j)] - delta;
            num = num + r * r / d[(i, j)];
            den = den + d[(i, j)];
        }
    }
    num / den
}

fn euclid<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}

fn sammon_gradient<T: Real>(d: &Matrix<T>, y: &Matrix<T>) -> Matrix<T> {
    let (n, k) = y.shape();
    let mut den = T::zero();
    for i in 0..n {
        for j in i + 1..n {
            den = den + d[(i, j)];
        }
    }
    let c = -T::lit(2.0) / den;
    let mut g = Matrix::zeros(n, k);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let delta = euclid(y.row(i), y.row(j));
            if delta == T::zero() {
                continue;
            }
            let w = c * (d[(i, j)] - delta) / (d[(i, j)] * delta);
            for a in 0..k {
                g[(i, a)] = g[(i, a)] + w * (y[(i, a)] - y[(j, a)]);
            }
        }
    }
    g
}

/// Sammon mapping by gradient descent from the classical MDS configuration.
/// Steps that fail to lower the stress are halved; accepted steps grow by half.
pub fn sammon<T: Real>(d: &Matrix<T>, dims: usize, cfg: &SammonConfig) -> Result<Projection<T>> {
    check_distances(d)?;
    let n = d.rows();
    for i in 0..n {
        for j in i + 1..n {
            if d[(i, j)] <= T::zero() {
                return Err(AlsiError::Contract(format!(
                    "items {i} and {j} are at distance zero; merge duplicates before Sammon mapping"
                )));
            }
        }
    }
    if n < 2 {
        return Err(AlsiError::Contract("Sammon mapping needs at least two items".into()));
    }
    let init = classical_mds(d, dims)?;
    let mut warnings = init.warnings;
    let mut y = Matrix::from_fn(n, dims, |i, k| {
        if k < init.coords.cols() {
            init.coords[(i, k)]
        } else {
            T::zero()
        }
    });
    // Coincident starting points have no gradient direction; separate them.
    let spread = d.max_abs() * T::lit(1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut jittered = false;
    for i in 0..n {
        for j in 0..i {
            if euclid(y.row(i), y.row(j)) == T::zero() {
                for v in y.row_mut(i) {
                    *v = *v + spread * T::lit(rng.gen::<f64>() - 0.5);
                }
                jittered = true;
            }
        }
    }
    if jittered {
        warnings.push(Warning::new("sammon", "jittered coincident starting points"));
    }

    let mut stress = sammon_stress(d, &y);
    let mut trace = vec![stress];
    let tiny = T::lit(1e-30);
    let mut step: Option<T> = None;
    for _ in 0..cfg.max_iter {
        if stress <= tiny {
            break;
        }
        let g = sammon_gradient(d, &y);
        let gnorm = g.frobenius_norm();
        if gnorm == T::zero() {
            break;
        }
        let s = *step.get_or_insert_with(|| {
            T::lit(cfg.step) * y.frobenius_norm().max(d.max_abs()) / gnorm
        });
        let candidate = y.axpy(-s, &g)?;
        let next = sammon_stress(d, &candidate);
        if next < stress {
            let improvement = (stress - next) / stress;
            y = candidate;
            stress = next;
            trace.push(stress);
            step = Some(s * T::lit(1.5));
            if improvement < T::lit(cfg.tol) {
                break;
            }
        } else {
            let halved = s * T::lit(0.5);
            if halved * gnorm <= T::epsilon() * y.frobenius_norm().max(T::min_positive_value()) {
                break;
            }
            step = Some(halved);
        }
    }
    let mut p = Projection::bare(y);
    p.stress = Some(stress);
    p.stress_trace = trace;
    p.warnings = warnings;
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileMetric {
    #[default]
    Euclidean,
    ChiSquare,
}

impl fmt::Display for ProfileMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileMetric::Euclidean => "euclidean",
            ProfileMetric::ChiSquare => "chi-square",
        })
    }
}

impl FromStr for ProfileMetric {
    type Err = AlsiError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(ProfileMetric::Euclidean),
            "chi-square" | "chisquare" => Ok(ProfileMetric::ChiSquare),
            other => Err(AlsiError::Config(format!("unknown profile metric {other:?}"))),
        }
    }
}

/// Distances between row profiles (rows scaled to proportions) of a cross table.
/// Chi-square weights each column by the inverse of its share of the total.
pub fn profile_distances(ct: &CrossTable, metric: ProfileMetric) -> Result<Matrix<f64>> {
    let r = ct.counts.len();
    let c = ct.col_labels.len();
    let mut profiles = Vec::with_capacity(r);
    for (i, row) in ct.counts.iter().enumerate() {
        let total: usize = row.iter().sum();
        if total == 0 {
            return Err(AlsiError::Contract(format!(
                "class {:?} has no items in any cluster",
                ct.row_labels.get(i).map_or("?", String::as_str)
            )));
        }
        profiles.push(row.iter().map(|&v| v as f64 / total as f64).collect::<Vec<f64>>());
    }
    let weights: Vec<f64> = match metric {
        ProfileMetric::Euclidean => vec![1.0; c],
        ProfileMetric::ChiSquare => {
            let grand: usize = ct.counts.iter().flatten().sum();
            (0..c)
                .map(|k| {
                    let col: usize = ct.counts.iter().map(|row| row[k]).sum();
                    if col == 0 {
                        0.0
                    } else {
                        grand as f64 / col as f64
                    }
                })
                .collect()
        }
    };
    let mut d = Matrix::zeros(r, r);
    for i in 0..r {
        for j in i + 1..r {
            let v = (0..c)
                .map(|k| weights[k] * (profiles[i][k] - profiles[j][k]).powi(2))
                .sum::<f64>()
                .sqrt();
            d.row_mut(i)[j] = v;
            d.row_mut(j)[i] = v;
        }
    }
    Ok(d)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Colour assignment: distinct keys sorted, then palette order.
pub fn palette_for(keys: &[String]) -> BTreeMap<String, &'static str> {
    let mut map = BTreeMap::new();
    for k in keys {
        map.entry(k.clone()).or_insert("");
    }
    for (i, v) in map.values_mut().enumerate() {
        *v = PALETTE[i % PALETTE.len()];
    }
    map
}

/// Static SVG 1.1 scatter of the first two coordinates.
pub fn emit_scatter<T: Real>(p: &Projection<T>, path: &Path, title: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| AlsiError::io(path, e))?;
    let mut w = BufWriter::new(file);
    render_scatter(p, &mut w, title)
        .and_then(|()| w.flush().map_err(|e| AlsiError::io(path, e)))
        .map_err(|e| match e {
            AlsiError::Io { source, .. } => AlsiError::io(path, source),
            other => other,
        })
}

pub fn render_scatter<T: Real>(p: &Projection<T>, w: &mut impl Write, title: &str) -> Result<()> {
    let n = p.coords.rows();
    if n == 0 || p.coords.cols() == 0 {
        return Err(AlsiError::Contract("cannot draw an empty projection".into()));
    }
    let x: Vec<f64> = (0..n).map(|i| p.coords[(i, 0)].as_f64()).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| if p.coords.cols() > 1 { p.coords[(i, 1)].as_f64() } else { 0.0 })
        .collect();
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 1.0, hi + 1.0)
        }
    };
    let (x0, x1) = range(&x);
    let (y0, y1) = range(&y);
    let (width, height, margin, legend_w) = (640.0, 480.0, 50.0, 160.0);
    let plot_w = width - 2.0 * margin - legend_w;
    let plot_h = height - 2.0 * margin;
    let sx = |v: f64| margin + (v - x0) / (x1 - x0) * plot_w;
    let sy = |v: f64| height - margin - (v - y0) / (y1 - y0) * plot_h;

    let keys: Vec<String> = p.color_key.clone().unwrap_or_default();
    let palette = palette_for(&keys);
    let io = |e| AlsiError::io(Path::new("<svg>"), e);

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        margin + plot_w / 2.0,
        escape(title)
    ));
    let (ax, ay) = (margin, height - margin);
    out.push_str(&format!(
        "<g class=\"axes\" stroke=\"#333\" stroke-width=\"1\">\n<line x1=\"{ax}\" y1=\"{ay}\" x2=\"{}\" y2=\"{ay}\"/>\n<line x1=\"{ax}\" y1=\"{ay}\" x2=\"{ax}\" y2=\"{margin}\"/>\n</g>\n",
        margin + plot_w
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">dim 1 [{}, {}]</text>\n",
        margin + plot_w / 2.0,
        height - margin + 30.0,
        format_g6(x0),
        format_g6(x1)
    ));
    out.push_str(&format!(
        "<text x=\"14\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">dim 2 [{}, {}]</text>\n",
        margin + plot_h / 2.0,
        margin + plot_h / 2.0,
        format_g6(y0),
        format_g6(y1)
    ));
    out.push_str("<g class=\"points\">\n");
    for i in 0..n {
        let fill = keys.get(i).map_or("#555555", |k| palette[k]);
        out.push_str(&format!(
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"3\" fill=\"{fill}\" fill-opacity=\"0.8\"><title>{}</title></circle>\n",
            sx(x[i]),
            sy(y[i]),
            escape(&p.items[i])
        ));
    }
    out.push_str("</g>\n<g class=\"legend\" font-family=\"sans-serif\" font-size=\"11\">\n");
    let lx = width - legend_w - margin / 2.0 + 20.0;
    for (row, (key, colour)) in palette.iter().enumerate() {
        let ly = margin + 16.0 * row as f64;
        out.push_str(&format!(
            "<g class=\"legend-entry\"><rect x=\"{lx}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{colour}\"/><text x=\"{}\" y=\"{}\">{}</text></g>\n",
            ly - 9.0,
            lx + 14.0,
            ly,
            escape(key)
        ));
    }
    out.push_str("</g>\n</svg>\n");
    w.write_all(out.as_bytes()).map_err(io)
}

fn format_g6(v: f64) -> String {
    let s = format!("{v:.4}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// CSV with columns `id,dim1..dimk` and, when present, `key`.
pub fn emit_csv<T: Real>(p: &Projection<T>, path: &Path) -> Result<()> {
    if p.coords.rows() == 0 {
        return Err(AlsiError::Contract("cannot write an empty projection".into()));
    }
    let file = File::create(path).map_err(|e| AlsiError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        let mut header = vec!["id".to_string()];
        header.extend((1..=p.dims()).map(|k| format!("dim{k}")));
        if p.color_key.is_some() {
            header.push("key".into());
        }
        writeln!(w, "{}", header.join(","))?;
        for i in 0..p.coords.rows() {
            let mut cells = vec![csv_cell(&p.items[i])];
            cells.extend(p.coords.row(i).iter().map(|v| format_g17(v.as_f64())));
            if let Some(keys) = &p.color_key {
                cells.push(csv_cell(&keys[i]));
            }
            writeln!(w, "{}", cells.join(","))?;
        }
        w.flush()
    };
    emit().map_err(|e| AlsiError::io(path, e))
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Reads a file written by [`emit_csv`].
pub fn read_projection_csv(path: &Path) -> Result<Projection<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| parse_err(path, 1, 0, e.to_string()))?;
    let header = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, 0, e.to_string()))?
        .clone();
    let has_key = header.iter().last() == Some("key");
    let dims = header.len() - 1 - usize::from(has_key);
    let mut items = Vec::new();
    let mut keys = Vec::new();
    let mut data = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let line = r + 2;
        let rec = rec.map_err(|e| parse_err(path, line, 0, e.to_string()))?;
        if rec.len() != header.len() {
            return Err(parse_err(path, line, rec.len(), "ragged row".into()));
        }
        items.push(rec[0].to_string());
        for c in 1..=dims {
            let v: f64 = rec[c]
                .trim()
                .parse()
                .map_err(|_| parse_err(path, line, c + 1, format!("not a number: {:?}", &rec[c])))?;
            data.push(v);
        }
        if has_key {
            keys.push(rec[dims + 1].to_string());
        }
    }
    let coords = Matrix::new(items.len(), dims, data)?;
    let mut p = Projection::bare(coords).with_items(items)?;
    if has_key {
        p = p.with_color_key(keys)?;
    }
    Ok(p)
}

fn parse_err(path: &Path, line: usize, column: usize, message: String) -> AlsiError {
    AlsiError::Parse {
        path: path.display().to_string(),
        line,
        column,
        message,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::row_distances;

    fn pairwise(p: &Projection<f64>) -> Matrix<f64> {
        row_distances(&p.coords)
    }

    #[test]
    fn collinear_points_recovered_in_one_dimension() {
        let d = Matrix::from_rows(&[
            vec![0.0, 1.0, 3.0],
            vec![1.0, 0.0, 2.0],
            vec![3.0, 2.0, 0.0],
        ])
        .unwrap();
        let p = classical_mds(&d, 1).unwrap();
        assert_eq!(p.dims(), 1);
        assert!(pairwise(&p).sub(&d).unwrap().max_abs() < 1e-10);
        assert!((p.eigen_fractions[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extra_dimensions_reduced_with_warning() {
        let d = Matrix::<f64>::from_rows(&[vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap();
        let p = classical_mds(&d, 3).unwrap();
        assert_eq!(p.dims(), 1);
        assert!(!p.warnings.is_empty());
        let gap: f64 = (p.coords[(0, 0)] - p.coords[(1, 0)]).abs();
        assert!((gap - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_distances_give_zero_coordinates() {
        let p = classical_mds(&Matrix::<f64>::zeros(4, 4), 2).unwrap();
        assert!(p.coords.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_non_distance_input() {
        let bad_diag = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(classical_mds(&bad_diag, 1).is_err());
        let negative = Matrix::from_rows(&[vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap();
        assert!(classical_mds(&negative, 1).is_err());
    }

    #[test]
    fn sammon_two_points_exact() {
        let d = Matrix::from_rows(&[vec![0.0, 7.5], vec![7.5, 0.0]]).unwrap();
        let p = sammon(&d, 2, &SammonConfig::default()).unwrap();
        assert!(p.stress.unwrap() < 1e-20);
        assert!((pairwise(&p)[(0, 1)] - 7.5).abs() < 1e-10);
    }

    #[test]
    fn sammon_equilateral_triangle() {
        let d = Matrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 });
        let p = sammon(&d, 2, &SammonConfig::default()).unwrap();
        assert!(p.stress.unwrap() < 1e-10);
    }

    #[test]
    fn sammon_improves_a_non_euclidean_start() {
        // four points pairwise equidistant cannot sit in the plane
        let d = Matrix::from_fn(4, 4, |i, j| if i == j { 0.0 } else { 1.0 });
        let p = sammon(&d, 2, &SammonConfig::default()).unwrap();
        assert!(p.stress_trace.len() > 1);
        assert!(p.stress_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(p.stress.unwrap() < p.stress_trace[0]);
    }

    #[test]
    fn sammon_rejects_duplicates() {
        let d = Matrix::from_fn(3, 3, |i, j| if i == j || i + j == 1 { 0.0 } else { 1.0 });
        assert!(matches!(sammon(&d, 2, &SammonConfig::default()), Err(AlsiError::Contract(_))));
    }

    fn table(counts: Vec<Vec<usize>>) -> CrossTable {
        CrossTable {
            row_labels: (0..counts.len()).map(|i| format!("r{i}")).collect(),
            col_labels: (0..counts[0].len()).map(|i| format!("C{}", i + 1)).collect(),
            counts,
        }
    }

    #[test]
    fn profile_distance_cases() {
        let d = profile_distances(&table(vec![vec![3, 0], vec![0, 5], vec![6, 0]]), ProfileMetric::Euclidean)
            .unwrap();
        assert!((d[(0, 1)] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(d[(0, 2)], 0.0);
        assert!(profile_distances(&table(vec![vec![1, 0], vec![0, 0]]), ProfileMetric::Euclidean).is_err());
        let chi = profile_distances(&table(vec![vec![1, 1], vec![2, 0]]), ProfileMetric::ChiSquare).unwrap();
        // column shares 3/4 and 1/4; profiles (1/2,1/2) and (1,0)
        let expect = ((0.25 / 0.75) + (0.25 / 0.25f64)).sqrt();
        assert!((chi[(0, 1)] - expect).abs() < 1e-15);
    }

    #[test]
    fn scatter_has_one_circle_per_item_and_legend_per_key() {
        let p = Projection::bare(Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 0.5]]).unwrap())
            .with_color_key(vec!["b".into(), "a".into(), "b".into()])
            .unwrap();
        let mut buf = Vec::new();
        render_scatter(&p, &mut buf, "t").unwrap();
        let svg = String::from_utf8(buf).unwrap();
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches("class=\"legend-entry\"").count(), 2);
        // sorted keys take palette colours in order
        assert!(svg.contains(&format!("fill=\"{}\"/><text x=\"", PALETTE[0])));
        let empty = Projection::bare(Matrix::<f64>::zeros(0, 2));
        assert!(render_scatter(&empty, &mut Vec::new(), "t").is_err());
    }
}

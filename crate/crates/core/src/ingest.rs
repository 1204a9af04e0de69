//! Expression loading, coefficient-of-variation filtering and binarization
//! into the experiments-by-genes incidence matrix.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{AlsiError, Result, Warning};
use crate::linalg::csv::{format_g17, read_matrix, write_matrix, LabeledMatrix};
use crate::linalg::Matrix;
use crate::stats::{self, Histogram};

/// Real-valued measurements, one row per experiment and one column per gene.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    pub experiments: Vec<String>,
    pub genes: Vec<String>,
    pub values: Matrix<f64>,
}

impl ExpressionMatrix {
    pub fn new(experiments: Vec<String>, genes: Vec<String>, values: Matrix<f64>) -> Result<Self> {
        if values.shape() != (experiments.len(), genes.len()) {
            return Err(AlsiError::Dimension(format!(
                "{} experiment labels and {} gene ids for a {}x{} matrix",
                experiments.len(),
                genes.len(),
                values.rows(),
                values.cols()
            )));
        }
        if let Some(i) = experiments.iter().position(|l| l.is_empty()) {
            return Err(AlsiError::Contract(format!("experiment {i} has an empty label")));
        }
        if let Some(dup) = first_duplicate(&genes) {
            return Err(AlsiError::Contract(format!("duplicate gene id {dup:?}")));
        }
        Ok(ExpressionMatrix {
            experiments,
            genes,
            values,
        })
    }

    pub fn n_experiments(&self) -> usize {
        self.experiments.len()
    }

    pub fn n_genes(&self) -> usize {
        self.genes.len()
    }

    /// Restrict to the named genes, in the given order.
    pub fn select_genes(&self, ids: &[String]) -> Result<ExpressionMatrix> {
        let idx: Vec<usize> = ids
            .iter()
            .map(|id| {
                self.genes
                    .iter()
                    .position(|g| g == id)
                    .ok_or_else(|| AlsiError::Contract(format!("unknown gene id {id:?}")))
            })
            .collect::<Result<_>>()?;
        Ok(ExpressionMatrix {
            experiments: self.experiments.clone(),
            genes: ids.to_vec(),
            values: self.values.select_columns(&idx),
        })
    }
}

fn first_duplicate(ids: &[String]) -> Option<&String> {
    let mut seen = HashSet::new();
    ids.iter().find(|id| !seen.insert(id.as_str()))
}

/// Load `label,<gene ids...>` followed by one row per experiment.
pub fn load_expression(path: &Path) -> Result<ExpressionMatrix> {
    let source = path.display().to_string();
    let file = File::open(path).map_err(|e| AlsiError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let perr = |line: usize, column: usize, message: String| AlsiError::Parse {
        path: source.clone(),
        line,
        column,
        message,
    };
    let mut records = rdr.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| perr(1, 0, e.to_string()))?,
        None => return Err(perr(1, 0, "empty file".into())),
    };
    if header.len() < 2 {
        return Err(perr(1, header.len(), "header needs a label column and at least one gene".into()));
    }
    let genes: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut seen = HashSet::new();
    for (j, g) in genes.iter().enumerate() {
        if g.is_empty() {
            return Err(perr(1, j + 2, "empty gene id".into()));
        }
        if !seen.insert(g.as_str()) {
            return Err(perr(1, j + 2, format!("duplicate gene id {g:?}")));
        }
    }
    let p = genes.len();
    let mut experiments = Vec::new();
    let mut data = Vec::new();
    for (idx, rec) in records.enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| perr(line, 0, e.to_string()))?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != p + 1 {
            return Err(perr(
                line,
                rec.len(),
                format!("ragged row: {} cells, expected {}", rec.len(), p + 1),
            ));
        }
        let label = rec.get(0).unwrap_or_default();
        if label.is_empty() {
            return Err(perr(line, 1, "empty experiment label".into()));
        }
        experiments.push(label.to_string());
        for (j, cell) in rec.iter().enumerate().skip(1) {
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => data.push(v),
                _ => return Err(perr(line, j + 1, format!("non-numeric cell {cell:?}"))),
            }
        }
    }
    let n = experiments.len();
    ExpressionMatrix::new(experiments, genes, Matrix::new(n, p, data)?)
}

pub fn write_expression(path: &Path, y: &ExpressionMatrix) -> Result<()> {
    let mut header = vec!["label".to_string()];
    header.extend(y.genes.iter().cloned());
    write_matrix(
        path,
        &LabeledMatrix {
            header: Some(header),
            row_labels: Some(y.experiments.clone()),
            matrix: y.values.clone(),
        },
    )
}

/// Which ratio of mean and standard deviation is used as the CV statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CvConvention {
    /// `sd / |mean|`
    #[default]
    SdOverMean,
    /// `|mean| / sd`
    MeanOverSd,
}

impl fmt::Display for CvConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CvConvention::SdOverMean => "sd-over-mean",
            CvConvention::MeanOverSd => "mean-over-sd",
        })
    }
}

impl FromStr for CvConvention {
    type Err = AlsiError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sd-over-mean" => Ok(CvConvention::SdOverMean),
            "mean-over-sd" => Ok(CvConvention::MeanOverSd),
            other => Err(AlsiError::Config(format!(
                "unknown CV convention {other:?} (expected sd-over-mean or mean-over-sd)"
            ))),
        }
    }
}

/// Per-gene dispersion statistics and the keep decision.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterReport {
    pub genes: Vec<String>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub cv: Vec<f64>,
    pub kept: Vec<bool>,
    pub threshold_cv: f64,
    pub convention: CvConvention,
}

impl FilterReport {
    pub fn kept_count(&self) -> usize {
        self.kept.iter().filter(|&&k| k).count()
    }

    pub fn cv_histogram(&self, bins: usize) -> Result<Histogram> {
        Histogram::equal_width(&self.cv, bins)
    }

    /// CSV with columns `gene,mean,sd,cv,kept`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| AlsiError::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut emit = || -> std::io::Result<()> {
            writeln!(w, "gene,mean,sd,cv,kept")?;
            for j in 0..self.genes.len() {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    self.genes[j],
                    format_g17(self.mean[j]),
                    format_g17(self.sd[j]),
                    if self.cv[j].is_infinite() { "inf".to_string() } else { format_g17(self.cv[j]) },
                    u8::from(self.kept[j])
                )?;
            }
            w.flush()
        };
        emit().map_err(|e| AlsiError::io(path, e))
    }
}

/// Coefficient of variation per gene (sample sd) and the strict `cv > threshold` decision.
pub fn cv_filter(
    y: &ExpressionMatrix,
    threshold_cv: f64,
    convention: CvConvention,
) -> Result<FilterReport> {
    let n = y.n_experiments();
    if n < 2 {
        return Err(AlsiError::Contract(format!(
            "CV filter needs at least 2 experiments, got {n}"
        )));
    }
    let p = y.n_genes();
    let mut report = FilterReport {
        genes: y.genes.clone(),
        mean: Vec::with_capacity(p),
        sd: Vec::with_capacity(p),
        cv: Vec::with_capacity(p),
        kept: Vec::with_capacity(p),
        threshold_cv,
        convention,
    };
    for j in 0..p {
        let col = y.values.column(j);
        let m = stats::mean(&col);
        let sd = stats::sample_sd(&col);
        let (cv, kept) = match convention {
            CvConvention::SdOverMean if sd == 0.0 => (0.0, false),
            CvConvention::SdOverMean => {
                let cv = sd / m.abs();
                (cv, cv > threshold_cv)
            }
            // sd = 0: +inf sentinel when the mean is nonzero, 0/0 counts as 0
            CvConvention::MeanOverSd if sd == 0.0 => {
                if m.abs() > 0.0 {
                    (f64::INFINITY, true)
                } else {
                    (0.0, false)
                }
            }
            CvConvention::MeanOverSd => {
                let cv = m.abs() / sd;
                (cv, cv > threshold_cv)
            }
        };
        report.mean.push(m);
        report.sd.push(sd);
        report.cv.push(cv);
        report.kept.push(kept);
    }
    Ok(report)
}

/// Binary experiments-by-genes matrix; every column has at least one 1.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    pub experiments: Vec<String>,
    pub genes: Vec<String>,
    pub x: Matrix<f64>,
    /// Expression level above which a kept gene counts as expressed, when known.
    pub expression_threshold: Option<f64>,
}

impl IncidenceMatrix {
    pub fn new(
        experiments: Vec<String>,
        genes: Vec<String>,
        x: Matrix<f64>,
        expression_threshold: Option<f64>,
    ) -> Result<Self> {
        if x.shape() != (experiments.len(), genes.len()) {
            return Err(AlsiError::Dimension(format!(
                "{} experiments and {} genes for a {}x{} incidence matrix",
                experiments.len(),
                genes.len(),
                x.rows(),
                x.cols()
            )));
        }
        if let Some(pos) = x.as_slice().iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(AlsiError::Contract(format!(
                "incidence entry ({}, {}) is {}, expected 0 or 1",
                pos / x.cols(),
                pos % x.cols(),
                x.as_slice()[pos]
            )));
        }
        if let Some(dup) = first_duplicate(&genes) {
            return Err(AlsiError::Contract(format!("duplicate gene id {dup:?}")));
        }
        let m = IncidenceMatrix {
            experiments,
            genes,
            x,
            expression_threshold,
        };
        if let Some(j) = m.norms().iter().position(|&c| c == 0) {
            return Err(AlsiError::Contract(format!(
                "gene {:?} is expressed in no experiment",
                m.genes[j]
            )));
        }
        Ok(m)
    }

    pub fn n_experiments(&self) -> usize {
        self.experiments.len()
    }

    pub fn n_genes(&self) -> usize {
        self.genes.len()
    }

    /// `|t_j|`: number of experiments expressing each gene.
    pub fn norms(&self) -> Vec<usize> {
        let mut norms = vec![0; self.x.cols()];
        for i in 0..self.x.rows() {
            for (c, &v) in norms.iter_mut().zip(self.x.row(i)) {
                *c += usize::from(v == 1.0);
            }
        }
        norms
    }

    /// Column supports packed as 64-bit words over the experiments.
    pub fn column_bits(&self) -> Vec<Vec<u64>> {
        let words = self.x.rows().div_ceil(64);
        let mut bits = vec![vec![0u64; words]; self.x.cols()];
        for i in 0..self.x.rows() {
            for (j, &v) in self.x.row(i).iter().enumerate() {
                if v == 1.0 {
                    bits[j][i / 64] |= 1 << (i % 64);
                }
            }
        }
        bits
    }

    /// Gene i belongs to class k iff it is expressed in an experiment labelled k.
    pub fn membership(&self) -> Membership {
        let classes: Vec<String> = self
            .experiments
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let class_of: Vec<usize> = self
            .experiments
            .iter()
            .map(|e| classes.binary_search(e).expect("label present"))
            .collect();
        let mut sets = vec![BTreeSet::new(); self.n_genes()];
        for (i, &k) in class_of.iter().enumerate() {
            for (j, &v) in self.x.row(i).iter().enumerate() {
                if v == 1.0 {
                    sets[j].insert(k);
                }
            }
        }
        Membership {
            classes,
            genes: self.genes.clone(),
            sets: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut header = vec!["label".to_string()];
        header.extend(self.genes.iter().cloned());
        write_matrix(
            path,
            &LabeledMatrix {
                header: Some(header),
                row_labels: Some(self.experiments.clone()),
                matrix: self.x.clone(),
            },
        )
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let lm = read_matrix(path, true)?;
        let genes = lm
            .column_names()
            .ok_or_else(|| AlsiError::Contract(format!("{}: missing gene header", path.display())))?
            .to_vec();
        IncidenceMatrix::new(lm.row_labels.unwrap_or_default(), genes, lm.matrix, None)
    }
}

/// Gene-to-classes table; class indices refer to `classes` and are ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub classes: Vec<String>,
    pub genes: Vec<String>,
    pub sets: Vec<Vec<usize>>,
}

impl Membership {
    pub fn index_of(&self, gene: &str) -> Option<usize> {
        self.genes.iter().position(|g| g == gene)
    }

    /// Label of the first listed class of gene `j`, if any.
    pub fn first_class(&self, j: usize) -> Option<&str> {
        self.sets[j].first().map(|&k| self.classes[k].as_str())
    }
}

/// Result of [`binarize`].
#[derive(Debug, Clone)]
pub struct Binarized {
    pub incidence: IncidenceMatrix,
    /// Kept genes with no value above the threshold.
    pub dropped: Vec<String>,
    pub warnings: Vec<Warning>,
}

/// Threshold the kept genes at the maximum value seen among non-kept genes
/// (or `threshold_override`), strict `>`, dropping all-zero columns.
pub fn binarize(
    y: &ExpressionMatrix,
    report: &FilterReport,
    threshold_override: Option<f64>,
) -> Result<Binarized> {
    if report.genes != y.genes {
        return Err(AlsiError::Contract(
            "filter report was produced from a different expression matrix".into(),
        ));
    }
    let threshold = match threshold_override {
        Some(t) => t,
        None => {
            let mut max = f64::NEG_INFINITY;
            let mut any = false;
            for (j, &kept) in report.kept.iter().enumerate() {
                if !kept {
                    any = true;
                    for i in 0..y.n_experiments() {
                        max = max.max(y.values[(i, j)]);
                    }
                }
            }
            if !any {
                return Err(AlsiError::ThresholdUndefined);
            }
            max
        }
    };

    let mut genes = Vec::new();
    let mut cols = Vec::new();
    let mut dropped = Vec::new();
    for (j, &kept) in report.kept.iter().enumerate() {
        if !kept {
            continue;
        }
        if (0..y.n_experiments()).any(|i| y.values[(i, j)] > threshold) {
            genes.push(y.genes[j].clone());
            cols.push(j);
        } else {
            dropped.push(y.genes[j].clone());
        }
    }
    let mut warnings = Vec::new();
    if !dropped.is_empty() {
        warnings.push(Warning::new(
            "binarize",
            format!(
                "dropped {} kept gene(s) never above threshold {threshold}: {}{}",
                dropped.len(),
                dropped[..dropped.len().min(10)].join(" "),
                if dropped.len() > 10 {
                    format!(" and {} more", dropped.len() - 10)
                } else {
                    String::new()
                }
            ),
        ));
    }
    let x = Matrix::from_fn(y.n_experiments(), cols.len(), |i, j| {
        if y.values[(i, cols[j])] > threshold {
            1.0
        } else {
            0.0
        }
    });
    Ok(Binarized {
        incidence: IncidenceMatrix::new(y.experiments.clone(), genes, x, Some(threshold))?,
        dropped,
        warnings,
    })
}

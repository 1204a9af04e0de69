//! Plain-file pipeline: each stage reads the previous stage's artifacts from
//! the output directory, writes its own, and updates `manifest.json`.
//!
//! | stage      | reads                               | writes |
//! |------------|-------------------------------------|--------|
//! | filter     | input expression CSV                | `filter_report.csv`, `cv_histogram.csv`, `incidence.csv` |
//! | similarity | `incidence.csv`                     | `similarity.csv`, `norm_histogram.csv` |
//! | fuse       | `incidence.csv`, `similarity.csv`   | `kernel.csv` |
//! | embed      | `kernel.csv`                        | `embedding.csv` |
//! | cluster    | `embedding.csv`, `incidence.csv`    | `model.json`, `responsibilities.csv`, `cross_table.csv`, `top_members.csv` |
//! | map        | `kernel.csv`, `incidence.csv`, `cross_table.csv`, `top_members.csv` | `mds.{csv,svg}`, `sammon.{csv,svg}`, `mds_{euclidean,pearson}.{csv,svg}`, `report.md` |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{AlsiError, Result, Warning};
use crate::fusion::{asymmetry_sources, fuse, label_kernel};
use crate::ingest::{binarize, cv_filter, load_expression, IncidenceMatrix, Membership};
use crate::latent::{alsi_embed, induced_distance, LatentEmbedding};
use crate::linalg::csv::{format_g17, read_matrix, write_matrix, LabeledMatrix};
use crate::linalg::Matrix;
use crate::mixture::{cross_table, fit_gmm, responsibilities, top_members, CrossTable, MixtureModel};
use crate::similarity::{asymmetric_similarity, baseline_distances, norm_diagnostics, BaselineKind};
use crate::stats::median;
use crate::viz::{classical_mds, emit_csv, emit_scatter, profile_distances, sammon, Projection};

pub const MANIFEST: &str = "manifest.json";

pub mod artifacts {
    pub const FILTER_REPORT: &str = "filter_report.csv";
    pub const CV_HISTOGRAM: &str = "cv_histogram.csv";
    pub const INCIDENCE: &str = "incidence.csv";
    pub const SIMILARITY: &str = "similarity.csv";
    pub const NORM_HISTOGRAM: &str = "norm_histogram.csv";
    pub const KERNEL: &str = "kernel.csv";
    pub const EMBEDDING: &str = "embedding.csv";
    pub const MODEL: &str = "model.json";
    pub const RESPONSIBILITIES: &str = "responsibilities.csv";
    pub const CROSS_TABLE: &str = "cross_table.csv";
    pub const TOP_MEMBERS: &str = "top_members.csv";
    pub const MDS_CSV: &str = "mds.csv";
    pub const MDS_SVG: &str = "mds.svg";
    pub const SAMMON_CSV: &str = "sammon.csv";
    pub const SAMMON_SVG: &str = "sammon.svg";
    pub const REPORT: &str = "report.md";
}
use artifacts as A;

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Filter,
    Similarity,
    Fuse,
    Embed,
    Cluster,
    Map,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Filter,
        Stage::Similarity,
        Stage::Fuse,
        Stage::Embed,
        Stage::Cluster,
        Stage::Map,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Filter => "filter",
            Stage::Similarity => "similarity",
            Stage::Fuse => "fuse",
            Stage::Embed => "embed",
            Stage::Cluster => "cluster",
            Stage::Map => "map",
        }
    }
}

/// Seed for the random stream of one stage: the first eight bytes of
/// `sha256(seed_le || stage)`, little-endian.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stage.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| AlsiError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub stage: Stage,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub seconds: f64,
    pub warnings: Vec<Warning>,
    /// Stage-specific scalars (counts, thresholds, diagnostics).
    pub summary: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionRecord {
    pub tau: f64,
    pub combiner: String,
    /// Ridge applied by an inverse-based combiner.
    pub ridge: Option<f64>,
    pub gamma1: f64,
    pub gamma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentRecord {
    pub m: usize,
    pub energy: f64,
    pub whitened: bool,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Config in file syntax, key by key.
    pub config: BTreeMap<String, String>,
    pub input: Option<FileRecord>,
    pub stages: BTreeMap<String, StageRecord>,
    pub files: BTreeMap<String, FileRecord>,
    pub fusion: Option<FusionRecord>,
    pub latent: Option<LatentRecord>,
}

impl RunManifest {
    pub fn new(cfg: &RunConfig) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config_map(cfg),
            input: None,
            stages: BTreeMap::new(),
            files: BTreeMap::new(),
            fusion: None,
            latent: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AlsiError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).map_err(|e| AlsiError::io(path, e))
    }

    /// File name to digest, for comparing runs.
    pub fn digests(&self) -> BTreeMap<String, String> {
        self.files
            .iter()
            .map(|(k, v)| (k.clone(), v.sha256.clone()))
            .collect()
    }

    /// Drop the records of `stage` and everything downstream of it.
    fn invalidate_from(&mut self, stage: Stage) {
        self.files.retain(|_, f| f.stage < stage);
        for s in Stage::ALL.iter().filter(|&&s| s >= stage) {
            self.stages.remove(s.name());
        }
        if stage <= Stage::Fuse {
            self.fusion = None;
        }
        if stage <= Stage::Embed {
            self.latent = None;
        }
    }
}

fn config_map(cfg: &RunConfig) -> BTreeMap<String, String> {
    cfg.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// State carried through one stage.
struct StageRun<'a> {
    dir: &'a Path,
    start: Instant,
    written: Vec<String>,
    warnings: Vec<Warning>,
    summary: BTreeMap<String, serde_json::Value>,
}

impl<'a> StageRun<'a> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.dir.join(name)
    }

    fn note(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.summary.insert(key.to_string(), value.into());
    }
}

pub struct Pipeline {
    pub cfg: RunConfig,
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Pipeline { cfg })
    }

    fn dir(&self) -> &Path {
        &self.cfg.output
    }

    fn require(&self, name: &str, producer: Stage) -> Result<PathBuf> {
        let path = self.dir().join(name);
        if path.is_file() {
            Ok(path)
        } else {
            Err(AlsiError::MissingArtifact {
                path: path,
                command: producer.name(),
            })
        }
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir().join(MANIFEST)
    }

    fn load_manifest(&self) -> RunManifest {
        let fresh = RunManifest::new(&self.cfg);
        match RunManifest::load(&self.manifest_path()) {
            Ok(mut m) if m.tool == fresh.tool => {
                m.version = fresh.version;
                m.config = fresh.config;
                m
            }
            _ => fresh,
        }
    }

    pub fn run(&self, stage: Stage) -> Result<RunManifest> {
        std::fs::create_dir_all(self.dir()).map_err(|e| AlsiError::io(self.dir(), e))?;
        let mut run = StageRun {
            dir: self.dir(),
            start: Instant::now(),
            written: Vec::new(),
            warnings: Vec::new(),
            summary: BTreeMap::new(),
        };
        let mut manifest = self.load_manifest();
        manifest.invalidate_from(stage);
        log::info!("stage {} starting", stage.name());
        match stage {
            Stage::Filter => self.filter(&mut run, &mut manifest)?,
            Stage::Similarity => self.similarity(&mut run)?,
            Stage::Fuse => self.fuse(&mut run, &mut manifest)?,
            Stage::Embed => self.embed(&mut run, &mut manifest)?,
            Stage::Cluster => self.cluster(&mut run)?,
            Stage::Map => self.map(&mut run, &manifest)?,
        }
        for name in &run.written {
            let path = self.dir().join(name);
            let bytes = std::fs::metadata(&path).map_err(|e| AlsiError::io(&path, e))?.len();
            manifest.files.insert(
                name.clone(),
                FileRecord {
                    stage,
                    sha256: sha256_file(&path)?,
                    bytes,
                },
            );
        }
        manifest.stages.insert(
            stage.name().to_string(),
            StageRecord {
                seconds: run.start.elapsed().as_secs_f64(),
                warnings: run.warnings,
                summary: run.summary,
            },
        );
        manifest.save(&self.manifest_path())?;
        Ok(manifest)
    }

    pub fn run_all(&self) -> Result<RunManifest> {
        let mut last = None;
        for stage in Stage::ALL {
            last = Some(self.run(stage)?);
        }
        Ok(last.expect("at least one stage"))
    }

    fn filter(&self, run: &mut StageRun, manifest: &mut RunManifest) -> Result<()> {
        let cfg = &self.cfg;
        let y = load_expression(&cfg.input)?;
        let meta = std::fs::metadata(&cfg.input).map_err(|e| AlsiError::io(&cfg.input, e))?;
        manifest.input = Some(FileRecord {
            stage: Stage::Filter,
            sha256: sha256_file(&cfg.input)?,
            bytes: meta.len(),
        });
        let report = cv_filter(&y, cfg.cv_threshold, cfg.cv_convention)?;
        report.write_csv(&run.path(A::FILTER_REPORT))?;
        report
            .cv_histogram(cfg.histogram_bins)?
            .write_csv(&run.path(A::CV_HISTOGRAM))?;
        let b = binarize(&y, &report, cfg.binarize_threshold)?;
        b.incidence.write_csv(&run.path(A::INCIDENCE))?;
        run.warnings.extend(b.warnings);
        run.note("experiments", y.n_experiments());
        run.note("genes_in", y.n_genes());
        run.note("genes_kept", report.kept_count());
        run.note("genes_dropped_after_binarization", b.dropped.len());
        run.note("genes_out", b.incidence.n_genes());
        run.note("cv_convention", cfg.cv_convention.to_string());
        if let Some(t) = b.incidence.expression_threshold {
            run.note("expression_threshold", t);
        }
        Ok(())
    }

    fn similarity(&self, run: &mut StageRun) -> Result<()> {
        let x = IncidenceMatrix::read_csv(&self.require(A::INCIDENCE, Stage::Filter)?)?;
        let s = asymmetric_similarity::<f64>(&x)?;
        write_gene_matrix(&run.path(A::SIMILARITY), &x.genes, &s.s)?;
        let diag = norm_diagnostics(&x, &s, self.cfg.histogram_bins)?;
        diag.histogram.write_csv(&run.path(A::NORM_HISTOGRAM))?;
        let norms: Vec<f64> = diag.norms.iter().map(|&v| v as f64).collect();
        run.note("genes", x.n_genes());
        run.note("max_norm", diag.norms.iter().copied().max().unwrap_or(0));
        run.note("median_norm", median(&norms));
        run.note("max_skew", diag.max_skew);
        run.note("mean_skew", diag.mean_skew);
        Ok(())
    }

    fn fuse(&self, run: &mut StageRun, manifest: &mut RunManifest) -> Result<()> {
        let x = IncidenceMatrix::read_csv(&self.require(A::INCIDENCE, Stage::Filter)?)?;
        let (genes, s) = read_gene_matrix(&self.require(A::SIMILARITY, Stage::Similarity)?)?;
        if genes != x.genes {
            return Err(AlsiError::Contract(format!(
                "{} and {} list different genes; rerun `alsi similarity`",
                A::SIMILARITY,
                A::INCIDENCE
            )));
        }
        let (k1, k2) = asymmetry_sources(&s)?;
        let lk = label_kernel::<f64>(&x.membership(), &genes)?;
        run.warnings.extend(lk.warnings);
        let fusion = self.cfg.fusion();
        let fused = fuse(&k1, &k2, &lk.w, &fusion)?;
        run.warnings.extend(fused.warnings);
        write_gene_matrix(&run.path(A::KERNEL), &genes, &fused.k)?;
        run.note("frobenius_s", s.frobenius_norm());
        run.note("frobenius_k1", k1.frobenius_norm());
        run.note("frobenius_k2", k2.frobenius_norm());
        run.note("source_disagreement", k1.sub(&k2)?.frobenius_norm());
        manifest.fusion = Some(FusionRecord {
            tau: fusion.tau,
            combiner: fusion.combiner.to_string(),
            ridge: fused.ridge,
            gamma1: fusion.gamma(),
            gamma2: fusion.gamma(),
        });
        Ok(())
    }

    fn embed(&self, run: &mut StageRun, manifest: &mut RunManifest) -> Result<()> {
        let (genes, k) = read_gene_matrix(&self.require(A::KERNEL, Stage::Fuse)?)?;
        let e = alsi_embed(&k, &genes, self.cfg.energy, self.cfg.whitened)?;
        write_embedding(&run.path(A::EMBEDDING), &e)?;
        manifest.latent = Some(LatentRecord {
            m: e.dims(),
            energy: self.cfg.energy,
            whitened: e.whitened,
            eigenvalues: e.eigenvalues.clone(),
        });
        run.note("m", e.dims());
        Ok(())
    }

    fn cluster(&self, run: &mut StageRun) -> Result<()> {
        let e = read_embedding(&self.require(A::EMBEDDING, Stage::Embed)?, self.cfg.whitened)?;
        let x = IncidenceMatrix::read_csv(&self.require(A::INCIDENCE, Stage::Filter)?)?;
        let membership = x.membership();
        let q = self.cfg.q.unwrap_or(membership.classes.len());
        let gmm = self.cfg.gmm(stage_seed(self.cfg.seed, Stage::Cluster.name()));
        let fit = fit_gmm(&e, q, &gmm)?;
        run.warnings.extend(fit.warnings.iter().cloned());
        let model = &fit.model;
        write_json(&run.path(A::MODEL), model)?;
        let resp = responsibilities(model, &e)?;
        let mut header = vec!["id".to_string()];
        header.extend((1..=q).map(|c| format!("C{c}")));
        header.push("cluster".into());
        let table = Matrix::from_fn(resp.probs.rows(), q + 1, |i, c| {
            if c < q {
                resp.probs[(i, c)]
            } else {
                (resp.hard[i] + 1) as f64
            }
        });
        write_matrix(
            &run.path(A::RESPONSIBILITIES),
            &LabeledMatrix {
                header: Some(header),
                row_labels: Some(resp.items.clone()),
                matrix: table,
            },
        )?;
        let ct = cross_table(&resp, &membership)?;
        ct.write_csv(&run.path(A::CROSS_TABLE))?;
        let k = self.cfg.top_k.min(resp.items.len());
        let top = top_members(&resp, k)?;
        write_top_members(&run.path(A::TOP_MEMBERS), &resp.items, &resp.probs, &top)?;
        run.note("q", q);
        run.note("loglik", model.loglik);
        run.note("iterations", model.iterations);
        run.note("converged", model.converged);
        run.note("winning_restart", model.restart);
        run.note("reseeded_restarts", fit.reseeded_restarts.len());
        Ok(())
    }

    fn map(&self, run: &mut StageRun, manifest: &RunManifest) -> Result<()> {
        let cfg = &self.cfg;
        let (genes, k) = read_gene_matrix(&self.require(A::KERNEL, Stage::Fuse)?)?;
        let x = IncidenceMatrix::read_csv(&self.require(A::INCIDENCE, Stage::Filter)?)?;
        let ct = CrossTable::read_csv(&self.require(A::CROSS_TABLE, Stage::Cluster)?)?;
        let top = read_text(&self.require(A::TOP_MEMBERS, Stage::Cluster)?)?;
        if genes != x.genes {
            return Err(AlsiError::Contract(format!(
                "{} and {} list different genes; rerun `alsi fuse`",
                A::KERNEL,
                A::INCIDENCE
            )));
        }
        let membership = x.membership();
        let key = first_classes(&membership);

        let d = induced_distance(&k)?;
        let mds = classical_mds(&d, cfg.mds_dims)?
            .with_items(genes.clone())?
            .with_color_key(key.clone())?;
        emit_csv(&mds, &run.path(A::MDS_CSV))?;
        emit_scatter(&mds, &run.path(A::MDS_SVG), "aLSI kernel distance, classical MDS")?;
        run.warnings.extend(mds.warnings.iter().cloned());
        run.note("mds_eigen_fractions", mds.eigen_fractions.clone());

        let mut baseline_fractions = BTreeMap::new();
        if cfg.baselines {
            let y = load_expression(&cfg.input)?.select_genes(&genes)?;
            for kind in [BaselineKind::Euclidean, BaselineKind::Pearson] {
                let b = baseline_distances(&y.values, kind)?;
                run.warnings.extend(b.warnings);
                let p = classical_mds(&b.distances, cfg.mds_dims)?
                    .with_items(genes.clone())?
                    .with_color_key(key.clone())?;
                run.warnings.extend(p.warnings.iter().cloned());
                emit_csv(&p, &run.path(&format!("mds_{kind}.csv")))?;
                emit_scatter(
                    &p,
                    &run.path(&format!("mds_{kind}.svg")),
                    &format!("{kind} baseline, classical MDS"),
                )?;
                baseline_fractions.insert(kind.to_string(), p.eigen_fractions);
            }
        }

        let (labels, profiles) = distinct_profiles(&ct, &mut run.warnings);
        let map = if labels.len() >= 2 {
            let d = profile_distances(&profiles, cfg.profile_metric)?;
            sammon(&d, 2, &cfg.sammon(stage_seed(cfg.seed, Stage::Map.name())))?
        } else {
            run.warnings.push(Warning::new(
                "map",
                "fewer than two distinct class profiles; Sammon map is a single point",
            ));
            Projection {
                items: Vec::new(),
                coords: Matrix::zeros(labels.len(), 2),
                stress: Some(0.0),
                stress_trace: vec![0.0],
                eigen_fractions: Vec::new(),
                color_key: None,
                warnings: Vec::new(),
            }
        };
        let map = map.with_items(labels.clone())?.with_color_key(labels)?;
        run.warnings.extend(map.warnings.iter().cloned());
        if !map.items.is_empty() {
            emit_csv(&map, &run.path(A::SAMMON_CSV))?;
            emit_scatter(&map, &run.path(A::SAMMON_SVG), "class profiles, Sammon mapping")?;
        }
        let stress = map.stress.unwrap_or(0.0);
        run.note("sammon_stress", stress);

        let report = render_report(
            manifest,
            &ct,
            &top,
            &mds.eigen_fractions,
            &baseline_fractions,
            stress,
        );
        std::fs::write(run.path(A::REPORT), report)
            .map_err(|e| AlsiError::io(&self.dir().join(A::REPORT), e))?;
        Ok(())
    }
}

/// First listed class of each gene, `-` when it has none.
fn first_classes(m: &Membership) -> Vec<String> {
    (0..m.genes.len())
        .map(|j| m.first_class(j).unwrap_or("-").to_string())
        .collect()
}

/// Class rows with at least one item, identical profiles merged under a
/// `+`-joined label.
fn distinct_profiles(ct: &CrossTable, warnings: &mut Vec<Warning>) -> (Vec<String>, CrossTable) {
    let mut labels: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<usize>> = Vec::new();
    let mut shares: Vec<Vec<f64>> = Vec::new();
    for (label, row) in ct.row_labels.iter().zip(&ct.counts) {
        let total: usize = row.iter().sum();
        if total == 0 {
            warnings.push(Warning::new("map", format!("class {label} has no genes; left off the Sammon map")));
            continue;
        }
        let share: Vec<f64> = row.iter().map(|&v| v as f64 / total as f64).collect();
        if let Some(pos) = shares.iter().position(|s| *s == share) {
            labels[pos] = format!("{}+{label}", labels[pos]);
            for (a, b) in rows[pos].iter_mut().zip(row) {
                *a += b;
            }
        } else {
            labels.push(label.clone());
            rows.push(row.clone());
            shares.push(share);
        }
    }
    let merged = CrossTable {
        row_labels: labels.clone(),
        col_labels: ct.col_labels.clone(),
        counts: rows,
    };
    (labels, merged)
}

fn write_gene_matrix(path: &Path, genes: &[String], m: &Matrix<f64>) -> Result<()> {
    let mut header = vec!["gene".to_string()];
    header.extend(genes.iter().cloned());
    write_matrix(
        path,
        &LabeledMatrix {
            header: Some(header),
            row_labels: Some(genes.to_vec()),
            matrix: m.clone(),
        },
    )
}

/// Square gene-by-gene matrix with matching row and column ids.
fn read_gene_matrix(path: &Path) -> Result<(Vec<String>, Matrix<f64>)> {
    let lm = read_matrix(path, true)?;
    let genes = lm
        .column_names()
        .ok_or_else(|| AlsiError::Contract(format!("{}: missing header", path.display())))?
        .to_vec();
    if lm.row_labels.as_deref() != Some(genes.as_slice()) {
        return Err(AlsiError::Contract(format!(
            "{}: row ids differ from column ids",
            path.display()
        )));
    }
    Ok((genes, lm.matrix))
}

pub fn write_embedding(path: &Path, e: &LatentEmbedding<f64>) -> Result<()> {
    let mut header = vec!["id".to_string()];
    header.extend((1..=e.dims()).map(|k| format!("dim{k}")));
    write_matrix(
        path,
        &LabeledMatrix {
            header: Some(header),
            row_labels: Some(e.items.clone()),
            matrix: e.coords.clone(),
        },
    )
}

/// Coordinates only; the spectrum lives in the manifest.
pub fn read_embedding(path: &Path, whitened: bool) -> Result<LatentEmbedding<f64>> {
    let lm = read_matrix(path, true)?;
    Ok(LatentEmbedding {
        items: lm.row_labels.unwrap_or_default(),
        coords: lm.matrix,
        eigenvalues: Vec::new(),
        whitened,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| AlsiError::io(path, e))
}

pub fn read_model(path: &Path) -> Result<MixtureModel<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| AlsiError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| AlsiError::io(path, e))
}

/// One row per cluster: `cluster,rank1,p1,rank2,p2,...`.
fn write_top_members(path: &Path, items: &[String], probs: &Matrix<f64>, top: &[Vec<usize>]) -> Result<()> {
    let file = File::create(path).map_err(|e| AlsiError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let k = top.first().map_or(0, Vec::len);
    let mut emit = || -> std::io::Result<()> {
        let mut header = vec!["cluster".to_string()];
        for r in 1..=k {
            header.push(format!("gene{r}"));
            header.push(format!("p{r}"));
        }
        writeln!(w, "{}", header.join(","))?;
        for (c, members) in top.iter().enumerate() {
            let mut cells = vec![format!("C{}", c + 1)];
            for &i in members {
                cells.push(items[i].clone());
                cells.push(format_g17(probs[(i, c)]));
            }
            writeln!(w, "{}", cells.join(","))?;
        }
        w.flush()
    };
    emit().map_err(|e| AlsiError::io(path, e))
}

fn render_report(
    manifest: &RunManifest,
    ct: &CrossTable,
    top_csv: &str,
    mds_fractions: &[f64],
    baselines: &BTreeMap<String, Vec<f64>>,
    sammon_stress: f64,
) -> String {
    let mut out = String::new();
    let summary = |stage: &str, key: &str| {
        manifest
            .stages
            .get(stage)
            .and_then(|s| s.summary.get(key))
            .map_or_else(
                || "n/a".to_string(),
                |v| v.as_str().map_or_else(|| v.to_string(), str::to_string),
            )
    };
    let _ = writeln!(out, "# aLSI run report\n");
    let _ = writeln!(out, "## Data\n");
    let _ = writeln!(out, "- experiments: {}", summary("filter", "experiments"));
    let _ = writeln!(out, "- genes in input: {}", summary("filter", "genes_in"));
    let _ = writeln!(
        out,
        "- genes kept by the CV filter ({}): {}",
        summary("filter", "cv_convention"),
        summary("filter", "genes_kept")
    );
    let _ = writeln!(out, "- expression threshold: {}", summary("filter", "expression_threshold"));
    let _ = writeln!(out, "- genes after binarization: {}", summary("filter", "genes_out"));
    let _ = writeln!(
        out,
        "- gene norms: max {}, median {}",
        summary("similarity", "max_norm"),
        summary("similarity", "median_norm")
    );
    let _ = writeln!(out, "- max |s_ij - s_ji|: {}\n", summary("similarity", "max_skew"));

    let _ = writeln!(out, "## Kernel and embedding\n");
    if let Some(f) = &manifest.fusion {
        let ridge = f.ridge.map_or_else(|| "none".to_string(), |r| r.to_string());
        let _ = writeln!(
            out,
            "- fusion: tau {}, combiner {}, ridge {ridge}, gamma {}",
            f.tau, f.combiner, f.gamma1
        );
    }
    if let Some(l) = &manifest.latent {
        let _ = writeln!(
            out,
            "- latent dimensions: {} (energy {}, whitened {})",
            l.m, l.energy, l.whitened
        );
    }
    let _ = writeln!(
        out,
        "- mixture: q {}, log-likelihood {}, iterations {}\n",
        summary("cluster", "q"),
        summary("cluster", "loglik"),
        summary("cluster", "iterations")
    );

    let _ = writeln!(out, "## Top genes per latent class\n");
    let mut lines = top_csv.lines();
    if let Some(head) = lines.next() {
        let cols: Vec<&str> = head.split(',').collect();
        let _ = writeln!(out, "| {} |", cols.join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(cols.len()));
        for line in lines {
            let cells: Vec<String> = line
                .split(',')
                .enumerate()
                .map(|(i, c)| {
                    if i > 0 && i % 2 == 0 {
                        c.parse::<f64>().map_or(c.to_string(), |v| format!("{v:.4}"))
                    } else {
                        c.to_string()
                    }
                })
                .collect();
            let _ = writeln!(out, "| {} |", cells.join(" | "));
        }
    }

    let _ = writeln!(out, "\n## External classes by latent class\n");
    let _ = writeln!(out, "| class | {} | total |", ct.col_labels.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(ct.col_labels.len() + 2));
    for (r, label) in ct.row_labels.iter().enumerate() {
        let cells: Vec<String> = ct.counts[r].iter().map(usize::to_string).collect();
        let _ = writeln!(out, "| {label} | {} | {} |", cells.join(" | "), ct.row_total(r));
    }

    let _ = writeln!(out, "\n## Projections\n");
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ");
    let _ = writeln!(out, "- MDS eigenvalue fractions (aLSI): {}", fmt(mds_fractions));
    for (name, fr) in baselines {
        let _ = writeln!(out, "- MDS eigenvalue fractions ({name}): {}", fmt(fr));
    }
    let _ = writeln!(out, "- Sammon stress (class profiles): {sammon_stress:.6e}");
    out
}

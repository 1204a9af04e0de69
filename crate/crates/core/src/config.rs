//! Run configuration and its flat `key = value` file format.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! ignored. Optional values take the literal `auto`. Reals are written with 17
//! significant digits, so a written file reads back to the identical config.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{AlsiError, Result};
use crate::fusion::{Combiner, FusionConfig};
use crate::ingest::CvConvention;
use crate::linalg::csv::format_g17;
use crate::mixture::{CovarianceKind, GmmConfig};
use crate::viz::{ProfileMetric, SammonConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Expression CSV: `label,<gene ids>` header, one experiment per row.
    pub input: PathBuf,
    /// Directory receiving every artifact and the manifest.
    pub output: PathBuf,
    pub seed: u64,
    pub cv_threshold: f64,
    pub cv_convention: CvConvention,
    /// `None` derives the threshold from the non-kept genes.
    pub binarize_threshold: Option<f64>,
    pub tau: f64,
    pub combiner: Combiner<f64>,
    pub ridge: Option<f64>,
    pub energy: f64,
    pub whitened: bool,
    /// `None` uses the number of experiment classes.
    pub q: Option<usize>,
    pub gmm_restarts: usize,
    pub gmm_max_iter: usize,
    pub gmm_rel_tol: f64,
    pub gmm_ridge: f64,
    pub covariance: CovarianceKind,
    pub top_k: usize,
    pub mds_dims: usize,
    pub sammon_max_iter: usize,
    pub profile_metric: ProfileMetric,
    /// Also project the Euclidean and Pearson distances of the kept genes.
    pub baselines: bool,
    pub histogram_bins: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let gmm = GmmConfig::default();
        RunConfig {
            input: PathBuf::from("expression.csv"),
            output: PathBuf::from("out"),
            seed: 0,
            cv_threshold: 0.5,
            cv_convention: CvConvention::SdOverMean,
            binarize_threshold: None,
            tau: 0.2,
            combiner: Combiner::Arithmetic,
            ridge: None,
            energy: 0.95,
            whitened: false,
            q: None,
            gmm_restarts: gmm.restarts,
            gmm_max_iter: gmm.max_iter,
            gmm_rel_tol: gmm.rel_tol,
            gmm_ridge: gmm.ridge,
            covariance: gmm.covariance,
            top_k: 5,
            mds_dims: 3,
            sammon_max_iter: SammonConfig::default().max_iter,
            profile_metric: ProfileMetric::Euclidean,
            baselines: true,
            histogram_bins: 20,
        }
    }
}

pub const KEYS: [&str; 23] = [
    "input",
    "output",
    "seed",
    "cv_threshold",
    "cv_convention",
    "binarize_threshold",
    "tau",
    "combiner",
    "ridge",
    "energy",
    "whitened",
    "q",
    "gmm_restarts",
    "gmm_max_iter",
    "gmm_rel_tol",
    "gmm_ridge",
    "covariance",
    "top_k",
    "mds_dims",
    "sammon_max_iter",
    "profile_metric",
    "baselines",
    "histogram_bins",
];

fn opt<T>(v: &Option<T>, f: impl Fn(&T) -> String) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), f)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| AlsiError::Config(format!("invalid value {value:?} for `{key}`")))
}

fn parse_opt<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "auto" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(AlsiError::Config(format!("invalid boolean {value:?} for `{key}`"))),
    }
}

impl RunConfig {
    /// Every key with its value in file syntax, in [`KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("input", self.input.display().to_string()),
            ("output", self.output.display().to_string()),
            ("seed", self.seed.to_string()),
            ("cv_threshold", format_g17(self.cv_threshold)),
            ("cv_convention", self.cv_convention.to_string()),
            ("binarize_threshold", opt(&self.binarize_threshold, |v| format_g17(*v))),
            ("tau", format_g17(self.tau)),
            ("combiner", self.combiner.to_string()),
            ("ridge", opt(&self.ridge, |v| format_g17(*v))),
            ("energy", format_g17(self.energy)),
            ("whitened", self.whitened.to_string()),
            ("q", opt(&self.q, usize::to_string)),
            ("gmm_restarts", self.gmm_restarts.to_string()),
            ("gmm_max_iter", self.gmm_max_iter.to_string()),
            ("gmm_rel_tol", format_g17(self.gmm_rel_tol)),
            ("gmm_ridge", format_g17(self.gmm_ridge)),
            ("covariance", self.covariance.to_string()),
            ("top_k", self.top_k.to_string()),
            ("mds_dims", self.mds_dims.to_string()),
            ("sammon_max_iter", self.sammon_max_iter.to_string()),
            ("profile_metric", self.profile_metric.to_string()),
            ("baselines", self.baselines.to_string()),
            ("histogram_bins", self.histogram_bins.to_string()),
        ]
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "input" => self.input = PathBuf::from(value),
            "output" => self.output = PathBuf::from(value),
            "seed" => self.seed = parse(key, value)?,
            "cv_threshold" => self.cv_threshold = parse(key, value)?,
            "cv_convention" => self.cv_convention = value.parse()?,
            "binarize_threshold" => self.binarize_threshold = parse_opt(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "combiner" => self.combiner = value.parse()?,
            "ridge" => self.ridge = parse_opt(key, value)?,
            "energy" => self.energy = parse(key, value)?,
            "whitened" => self.whitened = parse_bool(key, value)?,
            "q" => self.q = parse_opt(key, value)?,
            "gmm_restarts" => self.gmm_restarts = parse(key, value)?,
            "gmm_max_iter" => self.gmm_max_iter = parse(key, value)?,
            "gmm_rel_tol" => self.gmm_rel_tol = parse(key, value)?,
            "gmm_ridge" => self.gmm_ridge = parse(key, value)?,
            "covariance" => self.covariance = value.parse()?,
            "top_k" => self.top_k = parse(key, value)?,
            "mds_dims" => self.mds_dims = parse(key, value)?,
            "sammon_max_iter" => self.sammon_max_iter = parse(key, value)?,
            "profile_metric" => self.profile_metric = value.parse()?,
            "baselines" => self.baselines = parse_bool(key, value)?,
            "histogram_bins" => self.histogram_bins = parse(key, value)?,
            other => return Err(AlsiError::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# alsi run configuration\n");
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Apply the settings in `text` on top of `self`.
    pub fn merge_text(&mut self, text: &str, source: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                AlsiError::Config(format!("{source}:{}: expected `key = value`", i + 1))
            })?;
            self.set(k.trim(), v.trim())
                .map_err(|e| AlsiError::Config(format!("{source}:{}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.merge_text(text, "<config>")?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AlsiError::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.merge_text(&text, &path.display().to_string())?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| AlsiError::io(path, e))
    }

    pub fn fusion(&self) -> FusionConfig<f64> {
        FusionConfig {
            tau: self.tau,
            combiner: self.combiner,
            ridge: self.ridge,
        }
    }

    pub fn gmm(&self, seed: u64) -> GmmConfig {
        GmmConfig {
            restarts: self.gmm_restarts,
            max_iter: self.gmm_max_iter,
            rel_tol: self.gmm_rel_tol,
            ridge: self.gmm_ridge,
            seed,
            covariance: self.covariance,
        }
    }

    pub fn sammon(&self, seed: u64) -> SammonConfig {
        SammonConfig {
            max_iter: self.sammon_max_iter,
            seed,
            ..SammonConfig::default()
        }
    }

    /// Range checks owned by the individual modules, run before any work.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(AlsiError::Config(msg));
        if !self.cv_threshold.is_finite() || self.cv_threshold < 0.0 {
            return bad(format!("cv_threshold must be a finite value >= 0, got {}", self.cv_threshold));
        }
        if let Some(t) = self.binarize_threshold {
            if !t.is_finite() {
                return bad("binarize_threshold must be finite".into());
            }
        }
        self.fusion().validate()?;
        if !(self.energy > 0.0 && self.energy <= 1.0) {
            return bad(format!("energy must lie in (0,1], got {}", self.energy));
        }
        if self.q == Some(0) {
            return bad("q must be >= 1".into());
        }
        if self.gmm_restarts == 0 || !(self.gmm_ridge > 0.0) || !(self.gmm_rel_tol >= 0.0) {
            return bad("gmm_restarts >= 1, gmm_ridge > 0 and gmm_rel_tol >= 0 are required".into());
        }
        if self.top_k == 0 || self.mds_dims == 0 || self.histogram_bins == 0 {
            return bad("top_k, mds_dims and histogram_bins must be >= 1".into());
        }
        Ok(())
    }
}

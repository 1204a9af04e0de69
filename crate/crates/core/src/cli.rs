//! Command-line front end: `alsi <command> [--config path] [flags]`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::Result;
use crate::pipeline::{Pipeline, RunManifest, Stage};
use crate::synthetic::{generate_synthetic, write_synthetic, SyntheticSpec};

#[derive(Debug, Parser)]
#[command(name = "alsi", version, about = "Asymmetric latent semantic indexing of gene expression data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// CV filter and binarization
    Filter(RunArgs),
    /// Inclusion similarity and gene norm diagnostics
    Similarity(RunArgs),
    /// Polar sources, label kernel and fused kernel
    Fuse(RunArgs),
    /// Latent coordinates from the fused kernel
    Embed(RunArgs),
    /// Gaussian mixture, cross table and top members
    Cluster(RunArgs),
    /// MDS and Sammon maps plus the report
    Map(RunArgs),
    /// Every stage in order
    RunAll(RunArgs),
    /// Print the effective configuration in file syntax
    Config(RunArgs),
    /// Write a synthetic expression matrix with nested gene supports
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Flat `key = value` configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// One flag per configuration key; values use the config file syntax.
#[derive(Debug, Args, Default)]
pub struct Overrides {
    #[arg(long, allow_negative_numbers = true)]
    pub input: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub output: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub seed: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub cv_threshold: Option<String>,
    /// sd-over-mean or mean-over-sd
    #[arg(long, allow_negative_numbers = true)]
    pub cv_convention: Option<String>,
    /// Number, or `auto` for the maximum over non-kept genes
    #[arg(long, allow_negative_numbers = true)]
    pub binarize_threshold: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<String>,
    /// arithmetic, geometric[:t] or harmonic[:t]
    #[arg(long, allow_negative_numbers = true)]
    pub combiner: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub ridge: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub energy: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub whitened: Option<String>,
    /// Mixture components, or `auto` for the number of classes
    #[arg(long, allow_negative_numbers = true)]
    pub q: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub gmm_restarts: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub gmm_max_iter: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub gmm_rel_tol: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub gmm_ridge: Option<String>,
    /// diagonal or full
    #[arg(long, allow_negative_numbers = true)]
    pub covariance: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub top_k: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub mds_dims: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub sammon_max_iter: Option<String>,
    /// euclidean or chi-square
    #[arg(long, allow_negative_numbers = true)]
    pub profile_metric: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub baselines: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub histogram_bins: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("input", &self.input),
            ("output", &self.output),
            ("seed", &self.seed),
            ("cv_threshold", &self.cv_threshold),
            ("cv_convention", &self.cv_convention),
            ("binarize_threshold", &self.binarize_threshold),
            ("tau", &self.tau),
            ("combiner", &self.combiner),
            ("ridge", &self.ridge),
            ("energy", &self.energy),
            ("whitened", &self.whitened),
            ("q", &self.q),
            ("gmm_restarts", &self.gmm_restarts),
            ("gmm_max_iter", &self.gmm_max_iter),
            ("gmm_rel_tol", &self.gmm_rel_tol),
            ("gmm_ridge", &self.gmm_ridge),
            ("covariance", &self.covariance),
            ("top_k", &self.top_k),
            ("mds_dims", &self.mds_dims),
            ("sammon_max_iter", &self.sammon_max_iter),
            ("profile_metric", &self.profile_metric),
            ("baselines", &self.baselines),
            ("histogram_bins", &self.histogram_bins),
        ]
    }
}

impl RunArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        for (key, value) in self.overrides.pairs() {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Experiments
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    /// Genes
    #[arg(long, default_value_t = 8)]
    pub p: usize,
    /// Nesting levels of gene supports
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for expression.csv and ground_truth.csv
    #[arg(long, default_value = ".")]
    pub output: PathBuf,
}

fn print_stage(manifest: &RunManifest, stage: Stage) {
    for (name, rec) in &manifest.files {
        if rec.stage == stage {
            println!("{:<10} {name}  {}", stage.name(), &rec.sha256[..12]);
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    let stage = |args: RunArgs, stage: Stage| -> Result<()> {
        let pipeline = Pipeline::new(args.resolve()?)?;
        let manifest = pipeline.run(stage)?;
        print_stage(&manifest, stage);
        Ok(())
    };
    match command {
        Command::Filter(a) => stage(a, Stage::Filter),
        Command::Similarity(a) => stage(a, Stage::Similarity),
        Command::Fuse(a) => stage(a, Stage::Fuse),
        Command::Embed(a) => stage(a, Stage::Embed),
        Command::Cluster(a) => stage(a, Stage::Cluster),
        Command::Map(a) => stage(a, Stage::Map),
        Command::RunAll(a) => {
            let pipeline = Pipeline::new(a.resolve()?)?;
            for s in Stage::ALL {
                let manifest = pipeline.run(s)?;
                print_stage(&manifest, s);
            }
            Ok(())
        }
        Command::Config(a) => {
            print!("{}", a.resolve()?.to_text());
            Ok(())
        }
        Command::Generate(g) => {
            let data = generate_synthetic(&SyntheticSpec {
                n: g.n,
                p: g.p,
                depth: g.depth,
                seed: g.seed,
            })?;
            let (expr, truth) = write_synthetic(&g.output, &data)?;
            println!("{}\n{}", expr.display(), truth.display());
            Ok(())
        }
    }
}

/// Parse `args` (program name first), run the command, and return the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .is_test(cfg!(test))
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("alsi: error: {e}");
            e.exit_code()
        }
    }
}

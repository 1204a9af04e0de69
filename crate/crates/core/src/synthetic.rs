//! Synthetic expression data with nested gene supports.
//!
//! Experiments are split into contiguous halves, each half split again, down
//! to `depth` levels; the windows of the deepest level are the experiment
//! classes. A differential gene at level `l` is expressed exactly on one
//! level-`l` window, so supports at deeper levels nest inside shallower ones
//! and the inclusion similarity between them is one-sided. Gene counts double
//! with each level, which gives the right-skewed norm distribution.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AlsiError, Result};
use crate::ingest::{write_expression, ExpressionMatrix};
use crate::linalg::Matrix;
use crate::pipeline::stage_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Experiments.
    pub n: usize,
    /// Genes.
    pub p: usize,
    pub depth: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneTruth {
    pub gene: String,
    /// `None` for noise genes.
    pub level: Option<usize>,
    /// Half-open experiment range `[start, end)` where the gene is expressed.
    pub window: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub expression: ExpressionMatrix,
    pub truth: Vec<GeneTruth>,
}

const NOISE: (f64, f64) = (4.5, 5.5);
const EXPRESSED: (f64, f64) = (9.0, 11.0);
const SILENT: (f64, f64) = (0.5, 1.5);

/// Windows of each level, from the two halves of `[0, n)` downwards.
fn level_windows(n: usize, depth: usize) -> Vec<Vec<(usize, usize)>> {
    let mut levels: Vec<Vec<(usize, usize)>> = Vec::with_capacity(depth);
    let mut current = vec![(0, n)];
    for _ in 0..depth {
        current = current
            .iter()
            .flat_map(|&(a, b)| {
                let mid = a + (b - a) / 2;
                [(a, mid), (mid, b)]
            })
            .collect();
        levels.push(current.clone());
    }
    levels
}

/// Split `total` proportionally to `2^l`, largest remainder first (lower level on ties).
fn allocate(total: usize, depth: usize) -> Vec<usize> {
    let weights: Vec<f64> = (0..depth).map(|l| (1u64 << l) as f64).collect();
    let wsum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / wsum).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..depth).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - counts[a] as f64;
        let rb = exact[b] - counts[b] as f64;
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let missing = total - counts.iter().sum::<usize>();
    for &l in order.iter().take(missing) {
        counts[l] += 1;
    }
    counts
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Synthetic> {
    let SyntheticSpec { n, p, depth, seed } = *spec;
    if n < 2 || p < 2 {
        return Err(AlsiError::Contract(format!("need n, p >= 2, got n={n}, p={p}")));
    }
    if depth < 1 || depth >= usize::BITS as usize || n < (1usize << depth) {
        return Err(AlsiError::Contract(format!(
            "depth {depth} needs 1 <= depth and at least 2^depth experiments, got n={n}"
        )));
    }
    let levels = level_windows(n, depth);
    let classes = &levels[depth - 1];
    let mut experiments = vec![String::new(); n];
    for (c, &(a, b)) in classes.iter().enumerate() {
        for e in &mut experiments[a..b] {
            *e = format!("class{}", c + 1);
        }
    }

    let n_noise = (p / 5).max(1);
    let counts = allocate(p - n_noise, depth);
    let mut plan: Vec<(Option<usize>, Option<(usize, usize)>)> = Vec::with_capacity(p);
    for (l, &count) in counts.iter().enumerate() {
        let windows = &levels[l];
        for t in 0..count {
            plan.push((Some(l), Some(windows[t % windows.len()])));
        }
    }
    plan.extend(std::iter::repeat((None, None)).take(n_noise));

    let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(seed, "generate"));
    plan.shuffle(&mut rng);
    let round4 = |v: f64| (v * 1e4).round() / 1e4;
    let mut draw = |(lo, hi): (f64, f64)| round4(rng.gen_range(lo..hi));
    let mut values = Matrix::zeros(n, p);
    for (j, &(_, window)) in plan.iter().enumerate() {
        for i in 0..n {
            values.row_mut(i)[j] = match window {
                None => draw(NOISE),
                Some((a, b)) if (a..b).contains(&i) => draw(EXPRESSED),
                Some(_) => draw(SILENT),
            };
        }
    }
    let width = p.to_string().len();
    let genes: Vec<String> = (1..=p).map(|j| format!("g{j:0width$}")).collect();
    let truth = plan
        .iter()
        .zip(&genes)
        .map(|(&(level, window), gene)| GeneTruth {
            gene: gene.clone(),
            level,
            window,
        })
        .collect();
    Ok(Synthetic {
        expression: ExpressionMatrix::new(experiments, genes, values)?,
        truth,
    })
}

/// Write `expression.csv` and `ground_truth.csv` into `dir`.
pub fn write_synthetic(dir: &Path, data: &Synthetic) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| AlsiError::io(dir, e))?;
    let expr = dir.join("expression.csv");
    write_expression(&expr, &data.expression)?;
    let truth = dir.join("ground_truth.csv");
    let file = File::create(&truth).map_err(|e| AlsiError::io(&truth, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "gene,role,level,window_start,window_end")?;
        for g in &data.truth {
            match (g.level, g.window) {
                (Some(l), Some((a, b))) => writeln!(w, "{},differential,{l},{a},{b}", g.gene)?,
                _ => writeln!(w, "{},noise,,,", g.gene)?,
            }
        }
        w.flush()
    };
    emit().map_err(|e| AlsiError::io(&truth, e))?;
    Ok((expr, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allocation_doubles_per_level() {
        assert_eq!(allocate(7, 3), vec![1, 2, 4]);
        assert_eq!(allocate(24, 3).iter().sum::<usize>(), 24);
        assert_eq!(allocate(5, 1), vec![5]);
    }

    #[test]
    fn windows_nest() {
        let levels = level_windows(20, 3);
        assert_eq!(levels[0], vec![(0, 10), (10, 20)]);
        for l in 1..3 {
            for &(a, b) in &levels[l] {
                assert!(levels[l - 1].iter().any(|&(c, d)| c <= a && b <= d));
            }
        }
    }

    #[test]
    fn same_seed_same_data() {
        let spec = SyntheticSpec { n: 16, p: 12, depth: 2, seed: 5 };
        assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
        let other = SyntheticSpec { seed: 6, ..spec };
        assert_ne!(generate_synthetic(&spec).unwrap(), generate_synthetic(&other).unwrap());
    }

    #[test]
    fn rejects_too_deep() {
        assert!(generate_synthetic(&SyntheticSpec { n: 4, p: 10, depth: 3, seed: 0 }).is_err());
        assert!(generate_synthetic(&SyntheticSpec { n: 1, p: 10, depth: 1, seed: 0 }).is_err());
    }
}

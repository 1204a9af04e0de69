//! Property suites for the module invariants. Each case draws a seed and
//! sizes from proptest and builds its inputs from a seeded generator.

mod common;

use alsi::config::RunConfig;
use alsi::fusion::{asymmetry_sources, fuse, kernel_sum_feature_map, label_kernel, source_feature_maps, Combiner, FusionConfig};
use alsi::ingest::{binarize, cv_filter, CvConvention, ExpressionMatrix, IncidenceMatrix};
use alsi::latent::{alsi_embed, retained_dims};
use alsi::linalg::csv::{read_matrix_from, write_matrix_to, LabeledMatrix};
use alsi::linalg::{psd_clip, svd, sym_eig};
use alsi::mixture::{fit_gmm_matrix, responsibilities, CovarianceKind, GmmConfig};
use alsi::similarity::{asymmetric_similarity, skew_split};
use alsi::viz::{classical_mds, sammon, ProfileMetric, SammonConfig};
use alsi::latent::LatentEmbedding;
use alsi::Matrix;
use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn rel(a: &Matrix<f64>, b: &Matrix<f64>) -> f64 {
    frob(&a.sub(b).unwrap()) / frob(b).max(f64::MIN_POSITIVE)
}

fn embedding(coords: Matrix<f64>) -> LatentEmbedding<f64> {
    LatentEmbedding {
        items: (0..coords.rows()).map(|i| i.to_string()).collect(),
        eigenvalues: vec![1.0; coords.cols()],
        coords,
        whitened: false,
    }
}

fn expression(rng: &mut rand_chacha::ChaCha8Rng, n: usize, p: usize) -> ExpressionMatrix {
    let values = Matrix::from_fn(n, p, |_, j| {
        let base = 1.0 + (j % 5) as f64;
        base * rng.gen_range(0.2..1.8)
    });
    ExpressionMatrix::new(
        (0..n).map(|i| format!("c{}", i % 3)).collect(),
        (0..p).map(|j| format!("g{j}")).collect(),
        values,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(config(48))]

    // ---- dense factorizations and polar sources

    #[test]
    fn polar_sources_share_the_frobenius_norm(seed in any::<u64>(), n in 2usize..20) {
        let s = uniform(&mut rng(seed), n, n);
        let (k1, k2) = asymmetry_sources(&s).unwrap();
        let fs = frob(&s);
        prop_assert!((frob(&k1) - fs).abs() <= 1e-10 * fs);
        prop_assert!((frob(&k2) - fs).abs() <= 1e-10 * fs);
    }

    #[test]
    fn symmetric_psd_input_has_equal_sources(seed in any::<u64>(), n in 2usize..20, r in 1usize..20) {
        let s = random_psd(&mut rng(seed), n, r.min(n));
        let (k1, k2) = asymmetry_sources(&s).unwrap();
        prop_assert!(frob(&k1.sub(&k2).unwrap()) <= 1e-8 * frob(&s));
    }

    #[test]
    fn right_vectors_map_onto_scaled_left_vectors(seed in any::<u64>(), n in 1usize..24) {
        let s = uniform(&mut rng(seed), n, n);
        let f = svd(&s).unwrap();
        for j in 0..n {
            for i in 0..n {
                let sv: f64 = (0..n).map(|k| s[(i, k)] * f.v[(k, j)]).sum();
                prop_assert!((sv - f.sigma[j] * f.u[(i, j)]).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn svd_round_trip(seed in any::<u64>(), m in 1usize..64, n in 1usize..64) {
        let a = gaussian(&mut rng(seed), m, n);
        let f = svd(&a).unwrap();
        let us = Matrix::from_fn(m, f.sigma.len(), |i, j| f.u[(i, j)] * f.sigma[j]);
        prop_assert!(rel(&naive_mul(&us, &transpose(&f.v)), &a) <= 1e-8);
    }

    #[test]
    fn sym_eig_round_trip(seed in any::<u64>(), n in 1usize..64) {
        let g = gaussian(&mut rng(seed), n, n);
        let a = Matrix::from_fn(n, n, |i, j| g[(i, j)] + g[(j, i)]);
        let e = sym_eig(&a).unwrap();
        let vl = Matrix::from_fn(n, n, |i, j| e.vectors[(i, j)] * e.values[j]);
        prop_assert!(rel(&naive_mul(&vl, &transpose(&e.vectors)), &a) <= 1e-8);
    }

    #[test]
    fn factorizations_are_deterministic(seed in any::<u64>(), n in 1usize..40) {
        let a = gaussian(&mut rng(seed), n, n);
        let (x, y) = (svd(&a).unwrap(), svd(&a).unwrap());
        prop_assert_eq!(x.u.as_slice(), y.u.as_slice());
        prop_assert_eq!(x.v.as_slice(), y.v.as_slice());
        prop_assert_eq!(x.sigma, y.sigma);
    }

    // ---- ingest

    #[test]
    fn kept_set_ignores_experiment_order(seed in any::<u64>(), n in 3usize..12, p in 2usize..15) {
        let mut r = rng(seed);
        let y = expression(&mut r, n, p);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut r);
        let shuffled = ExpressionMatrix::new(
            order.iter().map(|&i| y.experiments[i].clone()).collect(),
            y.genes.clone(),
            Matrix::from_fn(n, p, |i, j| y.values[(order[i], j)]),
        ).unwrap();
        for conv in [CvConvention::SdOverMean, CvConvention::MeanOverSd] {
            let a = cv_filter(&y, 0.3, conv).unwrap();
            let b = cv_filter(&shuffled, 0.3, conv).unwrap();
            prop_assert_eq!(a.kept, b.kept);
        }
    }

    #[test]
    fn kept_set_ignores_positive_scaling(seed in any::<u64>(), c in 0.01f64..100.0) {
        let y = expression(&mut rng(seed), 8, 12);
        let scaled = ExpressionMatrix::new(y.experiments.clone(), y.genes.clone(), y.values.scale(c)).unwrap();
        let a = cv_filter(&y, 0.3, CvConvention::SdOverMean).unwrap();
        let b = cv_filter(&scaled, 0.3, CvConvention::SdOverMean).unwrap();
        prop_assert_eq!(a.kept, b.kept);
    }

    #[test]
    fn binarized_output_is_binary_and_consistent(seed in any::<u64>(), t in 0.5f64..4.0) {
        let y = expression(&mut rng(seed), 9, 14);
        let report = cv_filter(&y, 0.2, CvConvention::SdOverMean).unwrap();
        prop_assume!(report.kept_count() > 0);
        if let Ok(b) = binarize(&y, &report, Some(t)) {
            prop_assert!(b.incidence.x.as_slice().iter().all(|&v| v == 0.0 || v == 1.0));
            for d in &b.dropped {
                prop_assert!(!b.incidence.genes.contains(d));
                prop_assert!(b.warnings.iter().any(|w| w.message.contains(d.as_str())) || b.dropped.len() > 10);
            }
        }
    }

    // ---- similarity

    #[test]
    fn similarity_rows_are_bounded(seed in any::<u64>(), n in 2usize..14, p in 1usize..20) {
        let x = random_incidence(&mut rng(seed), n, p, 0.4);
        let s = asymmetric_similarity::<f64>(&x).unwrap().s;
        for i in 0..p {
            prop_assert_eq!(s[(i, i)], 1.0);
            let row: f64 = (0..p).map(|j| s[(i, j)]).sum();
            prop_assert!(row <= p as f64);
            prop_assert!((0..p).all(|j| (0.0..=1.0).contains(&s[(i, j)])));
        }
    }

    #[test]
    fn nested_supports_have_unit_similarity(seed in any::<u64>(), n in 2usize..20) {
        let mut r = rng(seed);
        // column j+1 adds experiments to column j's support
        let mut x = Matrix::zeros(n, 4);
        let start = r.gen_range(0..n);
        x[(start, 0)] = 1.0;
        for j in 1..4 {
            for i in 0..n {
                x[(i, j)] = if x[(i, j - 1)] == 1.0 || r.gen_bool(0.3) { 1.0 } else { 0.0 };
            }
        }
        let inc = IncidenceMatrix::new(
            (0..n).map(|i| format!("e{i}")).collect(),
            (0..4).map(|j| format!("g{j}")).collect(),
            x,
            None,
        ).unwrap();
        let s = asymmetric_similarity::<f64>(&inc).unwrap().s;
        for i in 0..4 {
            for j in i..4 {
                prop_assert_eq!(s[(i, j)], 1.0);
            }
        }
    }

    #[test]
    fn skew_split_reconstructs(seed in any::<u64>(), n in 1usize..20) {
        let s = uniform(&mut rng(seed), n, n);
        let (sym, skew) = skew_split(&s).unwrap();
        prop_assert!(max_abs_diff(&sym.add(&skew).unwrap(), &s) <= 1e-15);
    }

    #[test]
    fn skew_matches_norm_difference(seed in any::<u64>(), n in 2usize..16, p in 2usize..16) {
        let x = random_incidence(&mut rng(seed), n, p, 0.5);
        let s = asymmetric_similarity::<f64>(&x).unwrap().s;
        let (_, skew) = skew_split(&s).unwrap();
        let norm = |j: usize| (0..n).filter(|&e| x.x[(e, j)] == 1.0).count() as f64;
        for i in 0..p {
            for j in 0..p {
                let both = (0..n).filter(|&e| x.x[(e, i)] == 1.0 && x.x[(e, j)] == 1.0).count() as f64;
                let expected = both * (norm(j) - norm(i)) / (2.0 * norm(i) * norm(j));
                prop_assert!((skew[(i, j)] - expected).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn similarity_ignores_experiment_order(seed in any::<u64>(), n in 2usize..14, p in 1usize..12) {
        let mut r = rng(seed);
        let x = random_incidence(&mut r, n, p, 0.5);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut r);
        let y = IncidenceMatrix::new(
            order.iter().map(|&i| x.experiments[i].clone()).collect(),
            x.genes.clone(),
            Matrix::from_fn(n, p, |i, j| x.x[(order[i], j)]),
            None,
        ).unwrap();
        let a = asymmetric_similarity::<f64>(&x).unwrap().s;
        let b = asymmetric_similarity::<f64>(&y).unwrap().s;
        prop_assert_eq!(a.as_slice(), b.as_slice());
    }

    // ---- fusion

    #[test]
    fn fused_kernel_is_psd(seed in any::<u64>(), n in 2usize..12, tau in 0.0f64..5.0) {
        let mut r = rng(seed);
        let k1 = random_psd(&mut r, n, n);
        let k2 = random_psd(&mut r, n, 1 + n / 2);
        let w = random_psd(&mut r, n, 2.min(n));
        for combiner in [Combiner::Arithmetic, Combiner::Geometric { t: 0.5 }, Combiner::Harmonic { t: 0.5 }] {
            let cfg = FusionConfig { tau, combiner, ridge: Some(1e-6) };
            let k = fuse(&k1, &k2, &w, &cfg).unwrap().k;
            let min = sym_eig(&k).unwrap().values.last().copied().unwrap();
            prop_assert!(min >= -1e-10 * frob(&k).max(1.0));
        }
    }

    #[test]
    fn label_kernel_proportions(seed in any::<u64>(), n in 2usize..10, p in 1usize..15) {
        let x = random_incidence(&mut rng(seed), n, p, 0.4);
        let lk = label_kernel::<f64>(&x.membership(), &x.genes).unwrap();
        for i in 0..p {
            prop_assert_eq!(lk.q[(i, i)], 1.0);
            prop_assert!((0..p).all(|j| (0.0..=1.0).contains(&lk.q[(i, j)])));
        }
    }

    #[test]
    fn concatenated_maps_reproduce_weighted_sum(seed in any::<u64>(), n in 2usize..15, l1 in 0.0f64..3.0, l2 in 0.0f64..3.0) {
        let s = uniform(&mut rng(seed), n, n);
        let (p1, p2) = source_feature_maps(&s).unwrap();
        let (k1, k2) = asymmetry_sources(&s).unwrap();
        let phi = kernel_sum_feature_map(&p1, &p2, l1, l2).unwrap();
        let target = Matrix::from_fn(n, n, |i, j| l1 * k1[(i, j)] + l2 * k2[(i, j)]);
        prop_assert!(max_abs_diff(&naive_mul(&phi, &transpose(&phi)), &target) <= 1e-12);
    }

    // ---- latent

    #[test]
    fn embedding_reproduces_induced_distance(seed in any::<u64>(), n in 2usize..40, r in 1usize..40) {
        let k = random_psd(&mut rng(seed), n, r.min(n));
        let items: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let e = alsi_embed(&k, &items, 1.0, false).unwrap();
        let d = row_distances(&e.coords);
        for i in 0..n {
            for j in 0..n {
                let expected = (k[(i, i)] + k[(j, j)] - 2.0 * k[(i, j)]).max(0.0).sqrt();
                prop_assert!((d[(i, j)] - expected).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn more_energy_never_fewer_dims(seed in any::<u64>(), n in 1usize..30, a in 0.01f64..1.0, b in 0.01f64..1.0) {
        let mut r = rng(seed);
        let mut values: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..10.0)).collect();
        values.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(retained_dims(&values, lo) <= retained_dims(&values, hi));
    }

    #[test]
    fn symmetric_similarity_degenerates_to_its_clip(seed in any::<u64>(), n in 2usize..12, r in 1usize..12) {
        let s = random_psd(&mut rng(seed), n, r.min(n));
        let items: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let (k1, k2) = asymmetry_sources(&s).unwrap();
        let zero = Matrix::zeros(n, n);
        let cfg = FusionConfig { tau: 0.0, combiner: Combiner::Arithmetic, ridge: None };
        let fused = fuse(&k1, &k2, &zero, &cfg).unwrap().k;
        let clipped = psd_clip(&s, 1e-10).unwrap().matrix;
        let a = alsi_embed(&fused, &items, 1.0, false).unwrap();
        let b = alsi_embed(&clipped, &items, 1.0, false).unwrap();
        // compare Gram matrices: immune to sign flips and rotations in degenerate eigenspaces
        let ga = naive_mul(&a.coords, &transpose(&a.coords));
        let gb = naive_mul(&b.coords, &transpose(&b.coords));
        prop_assert!(max_abs_diff(&ga, &gb) <= 1e-8 * frob(&s).max(1.0));
    }

    // ---- mixture

    #[test]
    fn em_is_monotone_and_responsibilities_normalised(seed in any::<u64>(), q in 1usize..4, full in any::<bool>()) {
        let data = gaussian(&mut rng(seed), 40, 2);
        let cfg = GmmConfig {
            restarts: 3,
            seed,
            covariance: if full { CovarianceKind::Full } else { CovarianceKind::Diagonal },
            ..GmmConfig::default()
        };
        let fit = fit_gmm_matrix(&data, q, &cfg).unwrap();
        if !fit.reseeded_restarts.contains(&fit.model.restart) {
            prop_assert!(fit.model.trace.windows(2).all(|w| w[1] - w[0] >= -1e-9));
        }
        let resp = responsibilities(&fit.model, &embedding(data)).unwrap();
        for i in 0..resp.probs.rows() {
            let row = resp.probs.row(i);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn fits_are_deterministic(seed in any::<u64>()) {
        let data = gaussian(&mut rng(seed), 30, 3);
        let cfg = GmmConfig { restarts: 4, seed, ..GmmConfig::default() };
        let a = fit_gmm_matrix(&data, 2, &cfg).unwrap().model;
        let b = fit_gmm_matrix(&data, 2, &cfg).unwrap().model;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn permuting_items_permutes_responsibilities(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (data, _) = planted_clouds(&mut r, 30, 2, 20.0);
        let n = data.rows();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut r);
        let permuted = Matrix::from_fn(n, 2, |i, j| data[(order[i], j)]);
        let cfg = GmmConfig { seed, ..GmmConfig::default() };
        let a = fit_gmm_matrix(&data, 2, &cfg).unwrap().model;
        let b = fit_gmm_matrix(&permuted, 2, &cfg).unwrap().model;
        let ra = responsibilities(&a, &embedding(data)).unwrap().probs;
        let rb = responsibilities(&b, &embedding(permuted)).unwrap().probs;
        // best-matching component relabelling
        let gap = |swap: bool| {
            (0..n).map(|i| {
                (0..2).map(|c| (ra[(order[i], c)] - rb[(i, if swap { 1 - c } else { c })]).abs()).fold(0.0, f64::max)
            }).fold(0.0, f64::max)
        };
        prop_assert!(gap(false).min(gap(true)) <= 1e-6);
    }

    // ---- projections

    #[test]
    fn mds_recovers_low_dimensional_sets(seed in any::<u64>(), n in 2usize..20, q in 1usize..4, extra in 0usize..2) {
        let pts = gaussian(&mut rng(seed), n, q);
        let d = row_distances(&pts);
        let p = classical_mds(&d, q + extra).unwrap();
        prop_assert!(max_abs_diff(&row_distances(&p.coords), &d) <= 1e-8 * frob(&d).max(1.0));
    }

    #[test]
    fn sammon_trace_never_rises_and_is_repeatable(seed in any::<u64>(), n in 3usize..12) {
        let pts = gaussian(&mut rng(seed), n, 4);
        let d = row_distances(&pts);
        let cfg = SammonConfig { max_iter: 200, seed, ..SammonConfig::default() };
        let a = sammon(&d, 2, &cfg).unwrap();
        prop_assert!(a.stress_trace.windows(2).all(|w| w[1] <= w[0]));
        let b = sammon(&d, 2, &cfg).unwrap();
        prop_assert_eq!(a.coords.as_slice(), b.coords.as_slice());
    }

    // ---- configuration and CSV

    #[test]
    fn config_round_trips(
        seed in any::<u64>(),
        tau in 0.0f64..10.0,
        energy in 0.01f64..1.0,
        cv in 0.0f64..3.0,
        q in proptest::option::of(1usize..30),
        bin in proptest::option::of(-5.0f64..5.0),
        t in 0.0f64..1.0,
        which in 0usize..3,
        flags in any::<(bool, bool, bool)>(),
    ) {
        let cfg = RunConfig {
            seed,
            tau,
            energy,
            cv_threshold: cv,
            q,
            binarize_threshold: bin,
            combiner: [Combiner::Arithmetic, Combiner::Geometric { t }, Combiner::Harmonic { t }][which],
            whitened: flags.0,
            baselines: flags.1,
            covariance: if flags.2 { CovarianceKind::Full } else { CovarianceKind::Diagonal },
            cv_convention: if flags.2 { CvConvention::MeanOverSd } else { CvConvention::SdOverMean },
            profile_metric: if flags.0 { ProfileMetric::ChiSquare } else { ProfileMetric::Euclidean },
            ridge: bin.map(f64::abs),
            ..RunConfig::default()
        };
        let back = RunConfig::from_text(&cfg.to_text()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn matrix_csv_round_trips(seed in any::<u64>(), rows in 1usize..8, cols in 1usize..8) {
        let mut r = rng(seed);
        let m = Matrix::from_fn(rows, cols, |_, _| {
            let e: i32 = r.gen_range(-300..300);
            r.gen_range(-1.0..1.0) * 10f64.powi(e)
        });
        let lm = LabeledMatrix {
            header: Some(std::iter::once("id".to_string()).chain((0..cols).map(|j| format!("c{j}"))).collect()),
            row_labels: Some((0..rows).map(|i| format!("r{i}")).collect()),
            matrix: m,
        };
        let mut buf = Vec::new();
        write_matrix_to(&mut buf, &lm).unwrap();
        let back = read_matrix_from(buf.as_slice(), true, "memory").unwrap();
        prop_assert_eq!(back, lm);
    }
}

//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use seislabel::corpus::{Patch, PatchCorpus};
use seislabel::curvelet::{num_orientations, num_scales, CurveletTransform};
use seislabel::eval::{
    clustering_experiment, mean_average_precision, precision_at_m, rand_index, retrieval_accuracy,
    robustness_sweep, roc_auc, SweepPoint,
};
use seislabel::features::{effective_rank, similarity_matrix, Measure, SimilarityMatrix};
use seislabel::labelmap::{
    assemble_data_matrix, factorize, init_features, map_labels, random_coefficients, update_h, update_w,
    NmfConfig,
};
use seislabel::seed::derive_seed;

const DESK_SEED: u64 = 1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn desk_config() -> NmfConfig {
    NmfConfig {
        k: 25,
        ..NmfConfig::default()
    }
}

fn mur_equals_additive() -> Outcome {
    let mut rng = common::rng(101);
    let (l1, l2, g) = (0.1, 0.5, 5.0);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let x = common::random_matrix(&mut rng, 30, 20);
        let w = common::random_matrix(&mut rng, 30, 8);
        let h = common::random_matrix(&mut rng, 8, 20);
        let w1 = update_w(&w, &h, &x, l1, 0.0).unwrap();
        let h1 = update_h(&w1, &h, &x, g, l2, 0.0).unwrap();
        let pairs = [
            (common::additive_w(&w, &h, &x, l1), &w1),
            (common::additive_h(&w1, &h, &x, g, l2), &h1),
        ];
        for (want, got) in pairs {
            for (p, q) in got.iter().zip(want.iter()) {
                worst = worst.max((p - q).abs() / p.abs().max(q.abs()).max(f64::MIN_POSITIVE));
            }
        }
    }
    outcome(worst <= 1e-10, format!("worst relative difference {worst:.2e}"))
}

fn preservation() -> Outcome {
    let (corpus, _) = common::desk_corpus(DESK_SEED);
    let data = assemble_data_matrix(&corpus).unwrap();
    let config = desk_config();
    let n_f = config.k * data.n_classes;
    let (mut w, _, _) = init_features(&data, config.k, config.rho_w, derive_seed(config.seed, 1)).unwrap();
    let mut h = random_coefficients(n_f, data.n_samples(), derive_seed(config.seed, 2));
    let zeros: Vec<bool> = w.iter().map(|&v| v == 0.0).collect();
    let n_zero = zeros.iter().filter(|&&z| z).count();
    for it in 1..=200 {
        w = update_w(&w, &h, &data.x, config.lambda1, config.epsilon).unwrap();
        h = update_h(&w, &h, &data.x, config.gamma, config.lambda2, config.epsilon).unwrap();
        if let Some(v) = w.iter().chain(h.iter()).find(|&&v| !(v >= 0.0)) {
            return outcome(false, format!("negative entry {v} at iteration {it}"));
        }
        if w.iter().zip(&zeros).any(|(&v, &z)| (v == 0.0) != z) {
            return outcome(false, format!("zero pattern of W changed at iteration {it}"));
        }
    }
    outcome(true, format!("200 iterations, {n_zero} zeros of W kept"))
}

fn convergence() -> Outcome {
    let (corpus, _) = common::desk_corpus(DESK_SEED);
    let data = assemble_data_matrix(&corpus).unwrap();
    let f = factorize(&data, &desk_config()).unwrap();
    let e: Vec<f64> = f.trace.entries.iter().map(|o| o.overall).collect();
    let ratio = e[200] / e[0];
    let mean_drop = (e[180] - e[200]) / 20.0;
    outcome(
        ratio < 0.5 && mean_drop >= -1e-6,
        format!("final/initial {ratio:.3e}, mean decrease over last 20 {mean_drop:.3e}"),
    )
}

fn metric_oracles() -> Outcome {
    let mut rng = common::rng(404);
    for case in 0..100 {
        let n = rng.random_range(4..=12);
        let n_classes = rng.random_range(2..=(n / 2).min(4));
        let mut labels: Vec<u16> = (0..n).map(|i| (i % n_classes) as u16 + 1).collect();
        for i in (1..n).rev() {
            labels.swap(i, rng.random_range(0..=i));
        }
        let s = SimilarityMatrix::new(nalgebra::DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0
            } else {
                rng.random_range(0..6) as f64 / 5.0
            }
        }))
        .unwrap();
        for m in 1..n {
            if precision_at_m(&s, &labels, m).unwrap() != common::precision_at_m(&s, &labels, m) {
                return outcome(false, format!("P@{m} differs on instance {case}"));
            }
        }
        if retrieval_accuracy(&s, &labels).unwrap() != common::retrieval_accuracy(&s, &labels) {
            return outcome(false, format!("RA differs on instance {case}"));
        }
        if mean_average_precision(&s, &labels).unwrap() != common::mean_average_precision(&s, &labels) {
            return outcome(false, format!("MAP differs on instance {case}"));
        }
        let clusters: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        if rand_index(&clusters, &labels).unwrap() != common::rand_index(&clusters, &labels) {
            return outcome(false, format!("Rand index differs on instance {case}"));
        }
        let d = (roc_auc(&s, &labels).unwrap().auc - common::auc(&s, &labels)).abs();
        if d > 1e-12 {
            return outcome(false, format!("AUC differs by {d:e} on instance {case}"));
        }
    }
    outcome(true, "100 instances agree".into())
}

struct Scores {
    ra: f64,
    map: f64,
    auc: f64,
}

fn scores(corpus: &PatchCorpus, measure: Measure) -> (SimilarityMatrix, Scores) {
    let labels = corpus.class_labels().unwrap();
    let s = similarity_matrix(corpus, measure).unwrap();
    let sc = Scores {
        ra: retrieval_accuracy(&s, labels).unwrap(),
        map: mean_average_precision(&s, labels).unwrap(),
        auc: roc_auc(&s, labels).unwrap().auc,
    };
    (s, sc)
}

fn measure_ordering() -> Outcome {
    let (corpus, _) = common::desk_corpus(DESK_SEED);
    let (_, c) = scores(&corpus, Measure::CurveletSvd);
    let (_, e) = scores(&corpus, Measure::Euclidean);
    let mut pass = c.ra - e.ra >= 0.15 && c.auc - e.auc >= 0.10;
    let mut detail = format!(
        "RA {:.3} vs {:.3}, AUC {:.3} vs {:.3}",
        c.ra, e.ra, c.auc, e.auc
    );
    match std::env::var_os("SEISLABEL_LANDMASS2") {
        Some(path) => {
            let lm = PatchCorpus::load(std::path::Path::new(&path)).unwrap();
            let labels = lm.class_labels().expect("reference corpus must be labeled").to_vec();
            let (s, r) = scores(&lm, Measure::CurveletSvd);
            let rand = clustering_experiment(&s, &labels, lm.n_classes(), 0).unwrap().rand_index;
            let within = [(r.ra, 0.911), (r.map, 0.954), (r.auc, 0.983), (rand, 0.970)]
                .iter()
                .all(|(got, want)| (got - want).abs() <= 0.03);
            pass &= within;
            detail += &format!(
                "; reference corpus RA {:.3} MAP {:.3} AUC {:.3} Rand {:.3}",
                r.ra, r.map, r.auc, rand
            );
        }
        None => detail += "; optional reference-corpus check skipped (SEISLABEL_LANDMASS2 unset)",
    }
    outcome(pass, detail)
}

fn labeling_quality() -> Outcome {
    let (corpus, masks) = common::desk_corpus(DESK_SEED);
    let data = assemble_data_matrix(&corpus).unwrap();
    let mapping = map_labels(&data, &desk_config()).unwrap();
    let (mut hit, mut total) = (0usize, 0usize);
    for (raw, truth) in mapping.field.labels.iter().zip(&masks.masks) {
        for (&y, &t) in raw.iter().zip(truth) {
            if y != 0 && t != 0 {
                total += 1;
                hit += (y == t) as usize;
            }
        }
    }
    let acc = hit as f64 / total as f64;
    let marked = masks.masks.iter().flatten().filter(|&&t| t != 0).count();
    outcome(
        acc >= 0.85,
        format!(
            "masked accuracy {acc:.3} over {total} confident pixels ({:.1}% of marked)",
            100.0 * total as f64 / marked as f64
        ),
    )
}

fn robustness_ordering() -> Outcome {
    let (corpus, masks) = common::desk_corpus(DESK_SEED);
    let data = assemble_data_matrix(&corpus).unwrap();
    let grid = SweepPoint::k_grid(&NmfConfig::default(), &[10, 40]);
    let curves = robustness_sweep(&data, Some(&masks), &grid, &[0.0, 0.1, 0.2], 3, 7).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for c in &curves {
        let r = &c.relative_performance;
        pass &= r.windows(2).all(|p| p[1] <= p[0] + 0.05);
        detail.push(format!("k={} {:.3?}", c.value, r));
    }
    pass &= curves[1].relative_performance[2] >= curves[0].relative_performance[2] - 0.05;
    outcome(pass, detail.join(", "))
}

fn transform_soundness() -> Outcome {
    let mut rng = common::rng(808);
    let mut worst: f64 = 0.0;
    for side in [64usize, 99] {
        let t = CurveletTransform::new(side, side).unwrap();
        for _ in 0..100 {
            let px: Vec<f32> = (0..side * side).map(|_| rng.random::<f32>()).collect();
            let p = Patch::new(side, side, px).unwrap();
            let energy: f64 = p.to_f64().iter().map(|v| v * v).sum();
            let got = t.forward(&p).unwrap().weighted_energy();
            worst = worst.max((got - energy).abs() / energy);
        }
    }
    for side in [64usize, 99, 128] {
        let j = ((side as f64).log2() - 3.0).ceil() as usize;
        if num_scales(side, side).unwrap() != j {
            return outcome(false, format!("scale count wrong for {side}"));
        }
        let k: Vec<usize> = (0..j)
            .map(|s| if s == 0 { 1 } else { 16 * 2usize.pow(((s as f64 - 1.0) / 2.0).ceil() as u32) })
            .collect();
        let t = CurveletTransform::new(side, side).unwrap();
        let tiling = t.tiling();
        let per_scale: Vec<usize> = (0..j).map(num_orientations).collect();
        let kept = 1 + k[1..].iter().map(|v| v / 2).sum::<usize>();
        if tiling.orientations_per_scale() != k.as_slice()
            || per_scale != k
            || tiling.retained_wedges().count() != kept
        {
            return outcome(false, format!("orientation counts wrong for {side}"));
        }
    }
    outcome(worst <= 1e-6, format!("worst Parseval error {worst:.2e}; counts exact for 64, 99, 128"))
}

fn effective_rank_laws() -> Outcome {
    let mut rng = common::rng(909);
    for case in 0..1000 {
        let len = rng.random_range(1..=40);
        let flat = rng.random_bool(0.1);
        let v = rng.random_range(0.1..10.0);
        let sigma: Vec<f64> = (0..len)
            .map(|_| if flat { v } else { rng.random_range(0.0..10.0) })
            .collect();
        if sigma.iter().sum::<f64>() == 0.0 {
            continue;
        }
        let er = effective_rank(&sigma).unwrap();
        let l = len as f64;
        if !(1.0..=l).contains(&er) {
            return outcome(false, format!("ER {er} outside [1, {l}] on spectrum {case}"));
        }
        let c = rng.random_range(1e-3..1e3);
        let scaled: Vec<f64> = sigma.iter().map(|s| s * c).collect();
        if (effective_rank(&scaled).unwrap() - er).abs() > 1e-12 {
            return outcome(false, format!("ER not scale invariant on spectrum {case}"));
        }
        let all_equal = sigma.iter().all(|&s| s == sigma[0]);
        if ((er - l).abs() <= 1e-9) != all_equal {
            return outcome(false, format!("ER = L iff flat fails on spectrum {case}"));
        }
    }
    outcome(true, "1000 spectra".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Outcome); 9] = [
        ("multiplicative and additive updates agree", Duration::from_secs(5), mur_equals_additive),
        ("non-negativity and W zero pattern preserved", Duration::from_secs(30), preservation),
        ("overall objective converges", Duration::from_secs(120), convergence),
        ("metrics match brute-force oracles", Duration::from_secs(10), metric_oracles),
        ("curvelet-SVD beats Euclidean", Duration::from_secs(300), measure_ordering),
        ("pixel labels match ground truth", Duration::from_secs(180), labeling_quality),
        ("robustness ordering", Duration::from_secs(600), robustness_ordering),
        ("curvelet energy and tiling counts", Duration::from_secs(30), transform_soundness),
        ("effective-rank laws", Duration::from_secs(5), effective_rank_laws),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let pass = o.pass && took <= *limit;
        failed += !pass as usize;
        println!(
            "criterion {}: {} {name}: {} [{:.1}s of {}s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

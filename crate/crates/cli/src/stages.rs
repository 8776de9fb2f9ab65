//! One function per subcommand; each reads and writes its own artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use seislabel::corpus::{MaskSet, Patch, PatchCorpus};
use seislabel::eval::{
    clustering_experiment, mean_average_precision, pixel_accuracy, precision_curves, retrieval_accuracy,
    robustness_sweep, roc_auc, SweepPoint,
};
use seislabel::features::{similarity_matrix, FeatureExtractor, Measure, SimilarityMatrix};
use seislabel::format::{read_floats, write_floats, FEATURE_MAGIC, SIMILARITY_MAGIC};
use seislabel::labelmap::{assemble_data_matrix, map_labels, LabelMapping, NmfConfig};
use seislabel::retrieval::{assign_image_labels, WeakLabeling};
use seislabel::seed::derive_seed;
use seislabel::synth::generate_synthetic_corpus;

use crate::config::PipelineConfig;
use crate::error::{CliError, StageExt};

/// Seed streams derived from the root seed.
pub const EXEMPLAR_STREAM: u64 = 1;
pub const LABELMAP_STREAM: u64 = 2;
pub const ROBUSTNESS_STREAM: u64 = 3;
pub const CLUSTER_STREAM: u64 = 4;

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let wrap = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.write_record(&r).map_err(wrap)?;
    }
    w.flush().map_err(|e| wrap(e.into()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("output: {}: {e}", dir.display())))
}

pub struct SynthArgs {
    pub classes: usize,
    pub per_class: usize,
    pub size: usize,
    pub seed: u64,
    pub exemplars_per_class: usize,
}

/// Writes a synthetic corpus, its masks, a separate exemplar corpus and a
/// ready-to-run pipeline config.
pub fn synth(args: &SynthArgs, out: &Path) -> Result<PathBuf, CliError> {
    create_dir(out)?;
    let s = generate_synthetic_corpus(args.classes, args.per_class, args.size, args.seed).stage("synth")?;
    s.corpus.save(&out.join("corpus.slc")).stage("synth")?;
    s.masks.save(&out.join("masks.slm")).stage("synth")?;
    let ex = generate_synthetic_corpus(
        args.classes,
        args.exemplars_per_class,
        args.size,
        derive_seed(args.seed, EXEMPLAR_STREAM),
    )
    .stage("synth")?;
    ex.corpus.save(&out.join("exemplars").join("exemplars.slc")).stage("synth")?;

    let m = args.per_class;
    let k = 25.min((m / 2).max(1)).min((args.size * args.size - 1) / args.classes);
    let config = PipelineConfig {
        corpus: "corpus.slc".into(),
        masks: Some("masks.slm".into()),
        exemplars: "exemplars".into(),
        output: "run".into(),
        m,
        seed: args.seed,
        max_m: m,
        robustness_k: vec![(k / 2).max(1), k],
        robustness_fractions: vec![0.0, 0.1, 0.2],
        nmf: NmfConfig {
            k,
            ..NmfConfig::default()
        },
        ..PipelineConfig::default()
    };
    let path = out.join("quickstart.cfg");
    fs::write(&path, config.to_string()).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    log::info!("wrote {} patches and {}", s.corpus.len(), path.display());
    Ok(path)
}

/// Exemplar patches grouped by class from a labeled corpus file or a
/// directory of them (read in name order).
pub fn load_exemplars(path: &Path) -> Result<(Vec<Vec<Patch>>, Vec<String>), CliError> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut f: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| CliError::Config(format!("exemplars: {}: {e}", path.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "slc"))
            .collect();
        f.sort();
        f
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(CliError::Config(format!(
            "exemplars: no .slc files in {}",
            path.display()
        )));
    }
    let mut groups: Vec<Vec<Patch>> = Vec::new();
    let mut names = Vec::new();
    for f in &files {
        let c = PatchCorpus::load(f).stage("retrieve")?;
        let labels = c
            .class_labels()
            .ok_or_else(|| CliError::Config(format!("exemplars: {} is unlabeled", f.display())))?;
        if c.n_classes() > groups.len() {
            groups.resize(c.n_classes(), Vec::new());
            names = c.class_names().to_vec();
        }
        for (p, &l) in c.patches().iter().zip(labels) {
            groups[l as usize - 1].push(p.clone());
        }
    }
    Ok((groups, names))
}

pub fn features(corpus_path: &Path, measure: Measure, out: &Path) -> Result<(), CliError> {
    create_dir(out)?;
    let corpus = PatchCorpus::load(corpus_path).stage("features")?;
    let first = corpus
        .patches()
        .first()
        .ok_or_else(|| CliError::Config("corpus: no patches".into()))?;
    let ex = FeatureExtractor::for_patch(first).stage("features")?;
    let fv = ex.extract_all(corpus.patches()).stage("features")?;
    let flat: Vec<f32> = fv.iter().flat_map(|v| v.values().iter().map(|&x| x as f32)).collect();
    write_floats(&out.join("features.slf"), FEATURE_MAGIC, (fv.len(), ex.vector_len(), 1), &flat)
        .stage("features")?;
    let s = similarity_matrix(&corpus, measure).stage("features")?;
    save_similarity(&s, out)?;
    Ok(())
}

fn save_similarity(s: &SimilarityMatrix, out: &Path) -> Result<(), CliError> {
    let n = s.n();
    write_floats(&out.join("similarity.sls"), SIMILARITY_MAGIC, (1, n, n), &s.to_f32_row_major())
        .stage("features")?;
    write_csv(
        &out.join("similarity.csv"),
        &["i", "j", "similarity"],
        (0..n).flat_map(|i| (0..n).map(move |j| vec![i.to_string(), j.to_string(), s.get(i, j).to_string()])),
    )
}

fn load_similarity(path: &Path) -> Result<SimilarityMatrix, CliError> {
    let c = read_floats(path, SIMILARITY_MAGIC).stage("evaluate")?;
    let n = c.header.width as usize;
    if c.header.count != 1 || c.header.height as usize != n {
        return Err(CliError::Config(format!(
            "similarity: {} is not a single square matrix",
            path.display()
        )));
    }
    let m = DMatrix::from_fn(n, n, |i, j| c.payload[i * n + j] as f64);
    SimilarityMatrix::new(m).stage("evaluate")
}

pub struct Retrieved {
    pub weak: WeakLabeling,
    pub corpus: PatchCorpus,
    pub masks: Option<MaskSet>,
}

/// Labels `m` patches per class, writing the weak-label CSV, the labeled
/// sub-corpus and, when masks are given, the matching masks.
pub fn retrieve(
    corpus_path: &Path,
    masks_path: Option<&Path>,
    exemplars: &Path,
    m: usize,
    measure: Measure,
    out: &Path,
) -> Result<Retrieved, CliError> {
    create_dir(out)?;
    let corpus = PatchCorpus::load(corpus_path).stage("retrieve")?;
    let (groups, names) = load_exemplars(exemplars)?;
    let weak = assign_image_labels(&groups, &corpus, m, measure).stage("retrieve")?;
    write_csv(
        &out.join("weak_labels.csv"),
        &["patch_id", "class_id", "exemplar_id", "rank", "score"],
        weak.labeled_indices().into_iter().map(|i| {
            let p = weak.provenance[i].expect("labeled patches carry provenance");
            vec![
                i.to_string(),
                weak.image_labels[i].unwrap().to_string(),
                p.exemplar_id.to_string(),
                p.rank.to_string(),
                p.score.to_string(),
            ]
        }),
    )?;
    let labeled = weak.labeled_corpus(&corpus, names).stage("retrieve")?;
    labeled.save(&out.join("weak_corpus.slc")).stage("retrieve")?;
    let masks = match masks_path {
        Some(p) => {
            let all = MaskSet::load(p).stage("retrieve")?;
            if all.len() != corpus.len() {
                return Err(CliError::Config(format!(
                    "masks: {} masks for {} patches",
                    all.len(),
                    corpus.len()
                )));
            }
            let idx = weak.labeled_indices();
            let sub = MaskSet::new(
                all.width,
                all.height,
                all.n_classes,
                all.image_labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
                idx.iter().map(|&i| all.masks[i].clone()).collect(),
            )
            .stage("retrieve")?;
            sub.save(&out.join("weak_masks.slm")).stage("retrieve")?;
            Some(sub)
        }
        None => None,
    };
    log::info!("labeled {} of {} patches", labeled.len(), corpus.len());
    Ok(Retrieved {
        weak,
        corpus: labeled,
        masks,
    })
}

/// Factorizes a labeled corpus and writes pixel labels and the convergence
/// trace.
pub fn labelmap(corpus: &PatchCorpus, config: &NmfConfig, out: &Path) -> Result<LabelMapping, CliError> {
    create_dir(out)?;
    let data = assemble_data_matrix(corpus).stage("labelmap")?;
    let mapping = map_labels(&data, config).stage("labelmap")?;
    let image_labels = Some(data.column_labels.clone());
    for (name, labels) in [("labels.slm", &mapping.labels), ("raw_labels.slm", &mapping.field.labels)] {
        MaskSet::new(data.width, data.height, data.n_classes, image_labels.clone(), labels.clone())
            .and_then(|m| m.save(&out.join(name)))
            .stage("labelmap")?;
    }
    write_csv(
        &out.join("convergence.csv"),
        &["iteration", "overall", "w_part", "h_part"],
        mapping.factorization.trace.entries.iter().enumerate().map(|(i, o)| {
            vec![i.to_string(), o.overall.to_string(), o.w_part.to_string(), o.h_part.to_string()]
        }),
    )?;
    fs::write(out.join("nmf.cfg"), config.to_string())
        .map_err(|e| CliError::Config(format!("output: {e}")))?;
    Ok(mapping)
}

pub struct EvalArgs<'a> {
    pub corpus: &'a PatchCorpus,
    pub measure: Measure,
    pub similarity: Option<&'a Path>,
    /// Predicted and reference pixel labels for the same images.
    pub pixel_labels: Option<(&'a MaskSet, &'a MaskSet)>,
    pub max_m: usize,
    pub seed: u64,
}

/// Retrieval metrics on a labeled corpus and, when given, masked pixel
/// accuracy.
pub fn evaluate(args: &EvalArgs<'_>, out: &Path) -> Result<(), CliError> {
    create_dir(out)?;
    match args.corpus.class_labels() {
        Some(labels) => {
            let s = match args.similarity {
                Some(p) => load_similarity(p)?,
                None => similarity_matrix(args.corpus, args.measure).stage("evaluate")?,
            };
            if s.n() != labels.len() {
                return Err(CliError::Config(format!(
                    "similarity: {} items for {} patches",
                    s.n(),
                    labels.len()
                )));
            }
            retrieval_reports(&s, labels, args, out)?;
        }
        None => log::warn!("corpus is unlabeled; skipping retrieval metrics"),
    }
    if let Some((pred, truth)) = args.pixel_labels {
        if pred.len() != truth.len() || pred.width * pred.height != truth.width * truth.height {
            return Err(CliError::Config("labels and masks differ in shape".into()));
        }
        let (mut y, mut r) = (Vec::new(), Vec::new());
        for (a, b) in pred.masks.iter().zip(&truth.masks) {
            y.extend_from_slice(a);
            r.extend_from_slice(b);
        }
        let ignore: Vec<bool> = y.iter().zip(&r).map(|(&a, &b)| a == 0 || b == 0).collect();
        let scored = ignore.iter().filter(|&&i| !i).count();
        let acc = pixel_accuracy(&y, &r, &ignore).stage("evaluate")?;
        log::info!("masked pixel accuracy {acc:.4} over {scored} pixels");
        write_csv(
            &out.join("pixel_metrics.csv"),
            &["images", "scored_pixels", "accuracy"],
            [vec![pred.len().to_string(), scored.to_string(), acc.to_string()]],
        )?;
    }
    Ok(())
}

fn retrieval_reports(s: &SimilarityMatrix, labels: &[u16], args: &EvalArgs<'_>, out: &Path) -> Result<(), CliError> {
    let n_classes = {
        let mut c = labels.to_vec();
        c.sort_unstable();
        c.dedup();
        c.len()
    };
    let ra = retrieval_accuracy(s, labels).stage("evaluate")?;
    let map = mean_average_precision(s, labels).stage("evaluate")?;
    let roc = roc_auc(s, labels).stage("evaluate")?;
    let rand = clustering_experiment(s, labels, n_classes.max(2), derive_seed(args.seed, CLUSTER_STREAM))
        .stage("evaluate")?
        .rand_index;
    log::info!("{}: RA {ra:.4} MAP {map:.4} AUC {:.4} Rand {rand:.4}", args.measure, roc.auc);
    write_csv(
        &out.join("metrics.csv"),
        &["measure", "patches", "retrieval_accuracy", "map", "auc", "rand_index"],
        [vec![
            args.measure.to_string(),
            labels.len().to_string(),
            ra.to_string(),
            map.to_string(),
            roc.auc.to_string(),
            rand.to_string(),
        ]],
    )?;
    let max_m = args.max_m.min(labels.len() - 1);
    let curves = precision_curves(s, labels, max_m).stage("evaluate")?;
    let mut rows = Vec::new();
    for (class, curve) in &curves.per_class {
        for (m, p) in curve.iter().enumerate() {
            rows.push(vec![(m + 1).to_string(), class.to_string(), p.to_string()]);
        }
    }
    for (m, p) in curves.combined.iter().enumerate() {
        rows.push(vec![(m + 1).to_string(), "all".into(), p.to_string()]);
    }
    write_csv(&out.join("precision_at_m.csv"), &["m", "class", "precision"], rows)?;
    write_csv(
        &out.join("roc.csv"),
        &["fpr", "tpr"],
        roc.points.iter().map(|(f, t)| vec![f.to_string(), t.to_string()]),
    )
}

pub struct RobustnessArgs<'a> {
    pub base: NmfConfig,
    pub ks: &'a [usize],
    pub fractions: &'a [f64],
    pub trials: usize,
    pub seed: u64,
}

pub fn robustness(
    corpus: &PatchCorpus,
    masks: Option<&MaskSet>,
    args: &RobustnessArgs<'_>,
    out: &Path,
) -> Result<(), CliError> {
    create_dir(out)?;
    let data = assemble_data_matrix(corpus).stage("robustness")?;
    let grid = SweepPoint::k_grid(&args.base, args.ks);
    let curves = robustness_sweep(
        &data,
        masks,
        &grid,
        args.fractions,
        args.trials,
        derive_seed(args.seed, ROBUSTNESS_STREAM),
    )
    .stage("robustness")?;
    let mut rows = Vec::new();
    for c in &curves {
        for (i, f) in c.fractions.iter().enumerate() {
            rows.push(vec![
                c.parameter.clone(),
                c.value.to_string(),
                f.to_string(),
                c.relative_performance[i].to_string(),
                c.accuracy[i].to_string(),
                c.trials.to_string(),
            ]);
        }
    }
    write_csv(
        &out.join("robustness.csv"),
        &["parameter", "value", "fraction", "relative_performance", "accuracy", "trials"],
        rows,
    )
}

/// Retrieve, label, then evaluate, all under `config.output`.
pub fn pipeline(config: &PipelineConfig) -> Result<(), CliError> {
    config.validate()?;
    let out = &config.output;
    create_dir(out)?;
    fs::write(out.join("pipeline.cfg"), config.to_string())
        .map_err(|e| CliError::Config(format!("output: {e}")))?;
    let r = retrieve(
        &config.corpus,
        config.masks.as_deref(),
        &config.exemplars,
        config.m,
        config.measure,
        out,
    )?;
    let nmf = NmfConfig {
        seed: derive_seed(config.seed, LABELMAP_STREAM),
        ..config.nmf
    };
    labelmap(&r.corpus, &nmf, out)?;
    if config.evaluate {
        let full = PatchCorpus::load(&config.corpus).stage("evaluate")?;
        let predicted = MaskSet::load(&out.join("labels.slm")).stage("evaluate")?;
        evaluate(
            &EvalArgs {
                corpus: &full,
                measure: config.measure,
                similarity: None,
                pixel_labels: r.masks.as_ref().map(|m| (&predicted, m)),
                max_m: config.max_m,
                seed: config.seed,
            },
            out,
        )?;
    }
    if config.robustness {
        robustness(
            &r.corpus,
            r.masks.as_ref(),
            &RobustnessArgs {
                base: nmf,
                ks: &config.robustness_k,
                fractions: &config.robustness_fractions,
                trials: config.robustness_trials,
                seed: config.seed,
            },
            out,
        )?;
    }
    log::info!("pipeline finished; {} weak labels", r.weak.labeled_indices().len());
    Ok(())
}

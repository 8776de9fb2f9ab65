//! Effective-rank singular-value features and the similarity measures built
//! on them.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::num_complex::Complex;

use crate::corpus::{Patch, PatchCorpus};
use crate::curvelet::CurveletTransform;
use crate::error::{Error, Result};

/// Singular values of a complex coefficient matrix, non-increasing.
pub fn wedge_singular_values(coeffs: &DMatrix<Complex<f64>>) -> Vec<f64> {
    if coeffs.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = coeffs
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .map(|v| v.max(0.0))
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn check_spectrum(sigma: &[f64]) -> Result<f64> {
    if sigma.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
        return Err(Error::InvalidArgument(
            "singular values must be finite and non-negative".into(),
        ));
    }
    let l1: f64 = sigma.iter().sum();
    if l1 <= 0.0 {
        return Err(Error::Degenerate("all singular values are zero".into()));
    }
    Ok(l1)
}

/// `exp` of the Shannon entropy of the l1-normalized spectrum.
pub fn effective_rank(sigma: &[f64]) -> Result<f64> {
    let l1 = check_spectrum(sigma)?;
    let entropy: f64 = sigma
        .iter()
        .map(|&s| s / l1)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    Ok(entropy.exp().clamp(1.0, sigma.len() as f64))
}

/// Keeps the first `floor(effective_rank)` values and zeroes the rest.
pub fn truncate_by_effective_rank(sigma: &[f64]) -> Result<Vec<f64>> {
    let er = effective_rank(sigma)?;
    // exp(ln n) can land a hair below n
    let keep = ((er + 1e-9).floor() as usize).min(sigma.len());
    Ok(sigma
        .iter()
        .enumerate()
        .map(|(i, &s)| if i < keep { s } else { 0.0 })
        .collect())
}

/// One `(scale, orientation)` block of a feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub scale: usize,
    pub orientation: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    layout: Arc<Vec<Block>>,
}

impl FeatureVector {
    /// Wraps raw values under a layout; fails when the block lengths do not
    /// add up or a value is negative.
    pub fn new(values: Vec<f64>, layout: Arc<Vec<Block>>) -> Result<Self> {
        let total: usize = layout.iter().map(|b| b.len).sum();
        if total != values.len() {
            return Err(Error::Shape(format!(
                "{} values for a layout of length {total}",
                values.len()
            )));
        }
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument(
                "feature values must be non-negative".into(),
            ));
        }
        Ok(FeatureVector { values, layout })
    }

    /// A vector with a single flat block, for tests and external data.
    pub fn flat(values: Vec<f64>) -> Result<Self> {
        let layout = Arc::new(vec![Block {
            scale: 0,
            orientation: 0,
            len: values.len(),
        }]);
        FeatureVector::new(values, layout)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn layout(&self) -> &[Block] {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Computes feature vectors for patches of one geometry.
#[derive(Debug)]
pub struct FeatureExtractor {
    transform: CurveletTransform,
    layout: Arc<Vec<Block>>,
}

impl FeatureExtractor {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        let transform = CurveletTransform::new(rows, cols)?;
        let layout = transform
            .tiling()
            .retained_wedges()
            .map(|w| Block {
                scale: w.scale,
                orientation: w.orientation,
                len: w.rows.min(w.cols),
            })
            .collect();
        Ok(FeatureExtractor {
            transform,
            layout: Arc::new(layout),
        })
    }

    pub fn for_patch(patch: &Patch) -> Result<Self> {
        FeatureExtractor::new(patch.height(), patch.width())
    }

    pub fn layout(&self) -> &[Block] {
        &self.layout
    }

    pub fn vector_len(&self) -> usize {
        self.layout.iter().map(|b| b.len).sum()
    }

    pub fn extract(&self, patch: &Patch) -> Result<FeatureVector> {
        let coeffs = self.transform.forward(patch)?;
        let mut values = Vec::with_capacity(self.vector_len());
        for w in &coeffs.wedges {
            let sigma = wedge_singular_values(&w.coeffs);
            if sigma.iter().all(|&s| s == 0.0) {
                // an empty band carries no effective singular values
                values.extend(sigma);
            } else {
                values.extend(truncate_by_effective_rank(&sigma)?);
            }
        }
        FeatureVector::new(values, self.layout.clone())
    }

    pub fn extract_all(&self, patches: &[Patch]) -> Result<Vec<FeatureVector>> {
        patches.par_iter().map(|p| self.extract(p)).collect()
    }
}

/// Feature vector of a single patch.
pub fn feature_vector(patch: &Patch) -> Result<FeatureVector> {
    FeatureExtractor::for_patch(patch)?.extract(patch)
}

/// `1 - |v1 - v2|_1 / |v1 + v2|_1`.
pub fn similarity(v1: &FeatureVector, v2: &FeatureVector) -> Result<f64> {
    if v1.layout() != v2.layout() {
        return Err(Error::Shape("feature layouts differ".into()));
    }
    raw_similarity(v1.values(), v2.values())
}

fn raw_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        diff += (x - y).abs();
        sum += x + y;
    }
    if sum <= 0.0 {
        return Err(Error::Degenerate(
            "similarity of two zero feature vectors is undefined".into(),
        ));
    }
    Ok((1.0 - diff / sum).clamp(0.0, 1.0))
}

/// Similarity measure used to compare patches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    CurveletSvd,
    Euclidean,
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::CurveletSvd => "curvelet-svd",
            Measure::Euclidean => "euclidean",
        })
    }
}

impl FromStr for Measure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "curvelet-svd" => Ok(Measure::CurveletSvd),
            "euclidean" => Ok(Measure::Euclidean),
            _ => Err(Error::InvalidArgument(format!(
                "unknown measure {s:?} (expected curvelet-svd or euclidean)"
            ))),
        }
    }
}

/// Pairwise similarities of a corpus; `entries[(i, j)]` compares `i` to `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    entries: DMatrix<f64>,
}

impl SimilarityMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::Shape(format!(
                "similarity matrix is {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(SimilarityMatrix { entries })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.entries.row(i).iter().copied().collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n();
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                m = m.max((self.entries[(i, j)] - self.entries[(j, i)]).abs());
            }
        }
        m
    }

    /// `(S + S^T) / 2`.
    pub fn symmetrized(&self) -> SimilarityMatrix {
        SimilarityMatrix {
            entries: (&self.entries + self.entries.transpose()) * 0.5,
        }
    }

    /// Row-major `f32` values for the packed container.
    pub fn to_f32_row_major(&self) -> Vec<f32> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.entries[(i, j)] as f32);
            }
        }
        out
    }
}

/// Curvelet-SVD similarity of every pair of precomputed feature vectors.
pub fn feature_similarity_matrix(features: &[FeatureVector]) -> Result<SimilarityMatrix> {
    let n = features.len();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "need at least 2 patches, got {n}"
        )));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        Ok(1.0)
                    } else if j < i {
                        // filled from the mirror entry below
                        Ok(f64::NAN)
                    } else {
                        similarity(&features[i], &features[j])
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    SimilarityMatrix::new(m)
}

fn euclidean(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Converts distances to similarities by `1 - d / max(d)`; an all-zero row
/// maps to all ones.
pub(crate) fn distances_to_similarities(d: &[f64]) -> Vec<f64> {
    let max = d.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return vec![1.0; d.len()];
    }
    d.iter().map(|&v| 1.0 - v / max).collect()
}

/// Euclidean distance on raw pixels, normalized per row by its largest
/// off-diagonal distance. Rows are not symmetric in general.
pub fn euclidean_similarity_matrix(corpus: &PatchCorpus) -> Result<SimilarityMatrix> {
    let n = corpus.len();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "need at least 2 patches, got {n}"
        )));
    }
    let patches = corpus.patches();
    let dist: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| euclidean(patches[i].pixels(), patches[j].pixels()))
                .collect()
        })
        .collect();
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            return 1.0;
        }
        let max = dist[i]
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i)
            .map(|(_, &d)| d)
            .fold(0.0, f64::max);
        if max <= 0.0 {
            1.0
        } else {
            1.0 - dist[i][j] / max
        }
    });
    SimilarityMatrix::new(m)
}

/// All-pairs similarity of a corpus under the chosen measure.
pub fn similarity_matrix(corpus: &PatchCorpus, measure: Measure) -> Result<SimilarityMatrix> {
    if corpus.len() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least 2 patches, got {}",
            corpus.len()
        )));
    }
    match measure {
        Measure::Euclidean => euclidean_similarity_matrix(corpus),
        Measure::CurveletSvd => {
            let extractor = FeatureExtractor::for_patch(&corpus.patches()[0])?;
            let features = extractor.extract_all(corpus.patches())?;
            feature_similarity_matrix(&features)
        }
    }
}

/// Similarity of one query to every corpus patch.
pub(crate) fn query_similarities(
    query: &Patch,
    corpus: &PatchCorpus,
    measure: Measure,
    extractor: Option<&FeatureExtractor>,
    corpus_features: Option<&[FeatureVector]>,
) -> Result<Vec<f64>> {
    match measure {
        Measure::Euclidean => {
            let d: Vec<f64> = corpus
                .patches()
                .iter()
                .map(|p| euclidean(query.pixels(), p.pixels()))
                .collect();
            Ok(distances_to_similarities(&d))
        }
        Measure::CurveletSvd => {
            let (extractor, features) = match (extractor, corpus_features) {
                (Some(e), Some(f)) => (e, f),
                _ => {
                    return Err(Error::InvalidArgument(
                        "curvelet-svd retrieval needs precomputed features".into(),
                    ))
                }
            };
            let q = extractor.extract(query)?;
            features.iter().map(|f| similarity(&q, f)).collect()
        }
    }
}

//! Similarity retrieval against a corpus and image-level weak labels.

use rayon::prelude::*;

use crate::corpus::{Patch, PatchCorpus};
use crate::error::{Error, Result};
use crate::features::{query_similarities, FeatureExtractor, FeatureVector, Measure};

/// Corpus indices ranked by similarity to one query.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    /// Corpus index of the query when it is itself a corpus member.
    pub query_id: Option<usize>,
    pub ranked_ids: Vec<usize>,
    pub scores: Vec<f64>,
}

/// A corpus prepared for repeated queries under one measure.
pub struct Retriever<'a> {
    corpus: &'a PatchCorpus,
    measure: Measure,
    extractor: Option<FeatureExtractor>,
    features: Option<Vec<FeatureVector>>,
}

impl<'a> Retriever<'a> {
    pub fn new(corpus: &'a PatchCorpus, measure: Measure) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::InvalidArgument("corpus is empty".into()));
        }
        let (extractor, features) = match measure {
            Measure::Euclidean => (None, None),
            Measure::CurveletSvd => {
                let e = FeatureExtractor::for_patch(&corpus.patches()[0])?;
                let f = e.extract_all(corpus.patches())?;
                (Some(e), Some(f))
            }
        };
        Ok(Retriever {
            corpus,
            measure,
            extractor,
            features,
        })
    }

    pub fn corpus(&self) -> &PatchCorpus {
        self.corpus
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    /// Similarity of `query` to every corpus patch, in corpus order.
    pub fn scores(&self, query: &Patch) -> Result<Vec<f64>> {
        let (w, h) = self.corpus.dims().expect("corpus is non-empty");
        if (query.width(), query.height()) != (w, h) {
            return Err(Error::Shape(format!(
                "query is {}x{}, corpus patches are {w}x{h}",
                query.width(),
                query.height()
            )));
        }
        query_similarities(
            query,
            self.corpus,
            self.measure,
            self.extractor.as_ref(),
            self.features.as_deref(),
        )
    }

    /// The `m` most similar corpus patches to an external query.
    pub fn top_m(&self, query: &Patch, m: usize) -> Result<RetrievalResult> {
        check_m(m, self.corpus.len())?;
        let scores = self.scores(query)?;
        Ok(rank(None, &scores, m))
    }

    /// The `m` most similar other corpus patches to corpus patch `index`.
    pub fn top_m_member(&self, index: usize, m: usize) -> Result<RetrievalResult> {
        let n = self.corpus.len();
        if index >= n {
            return Err(Error::OutOfBounds(format!(
                "patch {index} outside a corpus of {n}"
            )));
        }
        check_m(m, n - 1)?;
        let scores = self.scores(&self.corpus.patches()[index])?;
        Ok(rank(Some(index), &scores, m))
    }
}

fn check_m(m: usize, available: usize) -> Result<()> {
    if m == 0 || m > available {
        return Err(Error::OutOfBounds(format!(
            "M = {m} outside 1..={available}"
        )));
    }
    Ok(())
}

/// Indices sorted by score descending, lower index first on ties.
fn order_by_score(scores: &[f64], skip: Option<usize>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&i| Some(i) != skip).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

fn rank(query_id: Option<usize>, scores: &[f64], m: usize) -> RetrievalResult {
    let mut ranked_ids = order_by_score(scores, query_id);
    ranked_ids.truncate(m);
    let scores = ranked_ids.iter().map(|&i| scores[i]).collect();
    RetrievalResult {
        query_id,
        ranked_ids,
        scores,
    }
}

/// Top-`m` retrieval of a single external query.
pub fn retrieve_top_m(query: &Patch, corpus: &PatchCorpus, m: usize, measure: Measure) -> Result<RetrievalResult> {
    check_m(m, corpus.len())?;
    Retriever::new(corpus, measure)?.top_m(query, m)
}

/// Where a weak label came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    /// Exemplar index, counted across classes in order.
    pub exemplar_id: usize,
    /// 1-based position in the class ranking.
    pub rank: usize,
    pub score: f64,
}

/// Image-level labels for the retrieved part of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakLabeling {
    pub n_classes: usize,
    /// Class in `1..=n_classes` per corpus patch, `None` if not retrieved.
    pub image_labels: Vec<Option<u16>>,
    pub provenance: Vec<Option<Provenance>>,
}

impl WeakLabeling {
    /// Labeled corpus indices in ascending order.
    pub fn labeled_indices(&self) -> Vec<usize> {
        (0..self.image_labels.len())
            .filter(|&i| self.image_labels[i].is_some())
            .collect()
    }

    pub fn class_count(&self, class: u16) -> usize {
        self.image_labels.iter().filter(|&&l| l == Some(class)).count()
    }

    /// The labeled patches as a labeled corpus, in corpus order.
    pub fn labeled_corpus(&self, corpus: &PatchCorpus, class_names: Vec<String>) -> Result<PatchCorpus> {
        if corpus.len() != self.image_labels.len() {
            return Err(Error::Shape(format!(
                "labeling covers {} patches, corpus has {}",
                self.image_labels.len(),
                corpus.len()
            )));
        }
        let idx = self.labeled_indices();
        let patches = idx.iter().map(|&i| corpus.patches()[i].clone()).collect();
        let labels = idx.iter().map(|&i| self.image_labels[i].unwrap()).collect();
        PatchCorpus::new(patches, Some(labels), class_names)
    }
}

/// Labels up to `m` corpus patches per class from per-class exemplars.
///
/// A class scores each patch by its best-matching exemplar. Candidate
/// (score, class, patch) triples are taken in order of score descending,
/// then class and patch ascending; a patch joins the first class that
/// reaches it while that class still has fewer than `m` members.
pub fn assign_image_labels(
    exemplars: &[Vec<Patch>],
    corpus: &PatchCorpus,
    m: usize,
    measure: Measure,
) -> Result<WeakLabeling> {
    let retriever = Retriever::new(corpus, measure)?;
    assign_with(&retriever, exemplars, m)
}

/// [`assign_image_labels`] on a prepared retriever.
pub fn assign_with(retriever: &Retriever<'_>, exemplars: &[Vec<Patch>], m: usize) -> Result<WeakLabeling> {
    let n = retriever.corpus().len();
    if exemplars.is_empty() {
        return Err(Error::InvalidArgument("no exemplar classes given".into()));
    }
    if let Some(c) = exemplars.iter().position(|e| e.is_empty()) {
        return Err(Error::InvalidArgument(format!(
            "class {} has no exemplars",
            c + 1
        )));
    }
    if exemplars.len() > u16::MAX as usize {
        return Err(Error::InvalidArgument("too many classes".into()));
    }
    check_m(m, n)?;

    let mut first_id = Vec::with_capacity(exemplars.len());
    let mut next = 0;
    for e in exemplars {
        first_id.push(next);
        next += e.len();
    }
    let flat: Vec<&Patch> = exemplars.iter().flatten().collect();
    let per_exemplar: Vec<Vec<f64>> = flat
        .par_iter()
        .map(|p| retriever.scores(p))
        .collect::<Result<_>>()?;

    // best score and exemplar per (class, patch)
    let mut best: Vec<Vec<(f64, usize)>> = Vec::with_capacity(exemplars.len());
    for (c, e) in exemplars.iter().enumerate() {
        let ids = first_id[c]..first_id[c] + e.len();
        let combined = (0..n)
            .map(|i| {
                let mut top = (f64::NEG_INFINITY, 0);
                for id in ids.clone() {
                    let s = per_exemplar[id][i];
                    if s > top.0 {
                        top = (s, id);
                    }
                }
                top
            })
            .collect();
        best.push(combined);
    }
    let ranks: Vec<Vec<usize>> = best
        .iter()
        .map(|b| {
            let scores: Vec<f64> = b.iter().map(|x| x.0).collect();
            let mut r = vec![0; n];
            for (pos, i) in order_by_score(&scores, None).into_iter().enumerate() {
                r[i] = pos + 1;
            }
            r
        })
        .collect();

    let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(n * exemplars.len());
    for (c, b) in best.iter().enumerate() {
        for (i, &(s, _)) in b.iter().enumerate() {
            candidates.push((s, c, i));
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut image_labels = vec![None; n];
    let mut provenance = vec![None; n];
    let mut counts = vec![0usize; exemplars.len()];
    for (score, c, i) in candidates {
        if image_labels[i].is_some() || counts[c] >= m {
            continue;
        }
        counts[c] += 1;
        image_labels[i] = Some(c as u16 + 1);
        provenance[i] = Some(Provenance {
            exemplar_id: best[c][i].1,
            rank: ranks[c][i],
            score,
        });
    }
    Ok(WeakLabeling {
        n_classes: exemplars.len(),
        image_labels,
        provenance,
    })
}

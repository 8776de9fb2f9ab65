//! Retrieval metrics over a similarity matrix, ROC/AUC and the Rand index.

use std::collections::HashMap;
use std::hash::Hash;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::SimilarityMatrix;

fn check_labels<L>(s: &SimilarityMatrix, labels: &[L]) -> Result<()> {
    if s.n() != labels.len() {
        return Err(Error::Shape(format!(
            "{} labels for a {}x{} similarity matrix",
            labels.len(),
            s.n(),
            s.n()
        )));
    }
    if s.n() < 2 {
        return Err(Error::InvalidArgument("need at least 2 items".into()));
    }
    Ok(())
}

/// Every other item ordered by similarity to `query`, highest first; equal
/// scores keep the lower index first.
pub fn ranked_neighbors(s: &SimilarityMatrix, query: usize) -> Vec<usize> {
    let row = s.entries().row(query);
    let mut idx: Vec<usize> = (0..s.n()).filter(|&j| j != query).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    idx
}

/// Relevance flags of the ranked neighbors of `query`.
fn relevance<L: PartialEq>(s: &SimilarityMatrix, labels: &[L], query: usize) -> Vec<bool> {
    ranked_neighbors(s, query)
        .into_iter()
        .map(|j| labels[j] == labels[query])
        .collect()
}

fn all_relevance<L: PartialEq + Sync>(s: &SimilarityMatrix, labels: &[L]) -> Vec<Vec<bool>> {
    (0..s.n())
        .into_par_iter()
        .map(|i| relevance(s, labels, i))
        .collect()
}

/// Mean over queries of the fraction of relevant items among the first `m`.
pub fn precision_at_m<L: PartialEq + Sync>(s: &SimilarityMatrix, labels: &[L], m: usize) -> Result<f64> {
    check_labels(s, labels)?;
    let n = s.n();
    if m == 0 || m > n - 1 {
        return Err(Error::OutOfBounds(format!("M = {m} outside 1..={}", n - 1)));
    }
    let rel = all_relevance(s, labels);
    let total: f64 = rel
        .iter()
        .map(|r| r[..m].iter().filter(|&&x| x).count() as f64 / m as f64)
        .sum();
    Ok(total / n as f64)
}

/// Precision at every cutoff `1..=max_m`, averaged over the queries of
/// each class and over all queries.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionCurves {
    /// `(class, curve)` in ascending class order.
    pub per_class: Vec<(u16, Vec<f64>)>,
    pub combined: Vec<f64>,
}

pub fn precision_curves(s: &SimilarityMatrix, labels: &[u16], max_m: usize) -> Result<PrecisionCurves> {
    check_labels(s, labels)?;
    let n = s.n();
    if max_m == 0 || max_m > n - 1 {
        return Err(Error::OutOfBounds(format!(
            "M = {max_m} outside 1..={}",
            n - 1
        )));
    }
    let rel = all_relevance(s, labels);
    let curve_of = |r: &[bool]| -> Vec<f64> {
        let mut hits = 0usize;
        (0..max_m)
            .map(|m| {
                if r[m] {
                    hits += 1;
                }
                hits as f64 / (m + 1) as f64
            })
            .collect()
    };
    let curves: Vec<Vec<f64>> = rel.iter().map(|r| curve_of(r)).collect();
    let mean = |members: &[usize]| -> Vec<f64> {
        let mut acc = vec![0.0; max_m];
        for &i in members {
            for (a, v) in acc.iter_mut().zip(&curves[i]) {
                *a += v;
            }
        }
        acc.iter().map(|a| a / members.len() as f64).collect()
    };
    let mut classes: Vec<u16> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let per_class = classes
        .iter()
        .map(|&c| {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            (c, mean(&members))
        })
        .collect();
    let all: Vec<usize> = (0..n).collect();
    Ok(PrecisionCurves {
        per_class,
        combined: mean(&all),
    })
}

/// Precision at the cutoff equal to each query's number of relevant items.
pub fn retrieval_accuracy<L: PartialEq + Sync>(s: &SimilarityMatrix, labels: &[L]) -> Result<f64> {
    check_labels(s, labels)?;
    let n = s.n();
    let rel = all_relevance(s, labels);
    let mut total = 0.0;
    for r in &rel {
        let c = r.iter().filter(|&&x| x).count();
        if c == 0 {
            return Err(Error::InvalidArgument(
                "a class has a single member; retrieval accuracy is undefined".into(),
            ));
        }
        total += r[..c].iter().filter(|&&x| x).count() as f64 / c as f64;
    }
    Ok(total / n as f64)
}

/// Average precision of one ranked relevance list: the mean of the
/// precision values at the ranks of the relevant items.
pub fn average_precision(relevant: &[bool]) -> Option<f64> {
    let total = relevant.iter().filter(|&&x| x).count();
    if total == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &r) in relevant.iter().enumerate() {
        if r {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Some(sum / total as f64)
}

/// Mean average precision over queries. Queries with no other member of
/// their class contribute nothing; if no query has one, the result is 0.
pub fn mean_average_precision<L: PartialEq + Sync>(s: &SimilarityMatrix, labels: &[L]) -> Result<f64> {
    check_labels(s, labels)?;
    let aps: Vec<f64> = all_relevance(s, labels)
        .iter()
        .filter_map(|r| average_precision(r))
        .collect();
    if aps.is_empty() {
        return Ok(0.0);
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)`, from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC over all unordered pairs scored by the symmetrized similarity. A
/// pair at or above the threshold is predicted same-class.
pub fn roc_auc<L: PartialEq>(s: &SimilarityMatrix, labels: &[L]) -> Result<RocCurve> {
    check_labels(s, labels)?;
    let n = s.n();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((0.5 * (s.get(i, j) + s.get(j, i)), labels[i] == labels[j]));
        }
    }
    let n_pos = pairs.iter().filter(|p| p.1).count();
    let n_neg = pairs.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument(
            "ROC needs both same-class and different-class pairs".into(),
        ));
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < pairs.len() {
        let t = pairs[k].0;
        while k < pairs.len() && pairs[k].0 == t {
            if pairs[k].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) * 0.5)
        .sum();
    Ok(RocCurve { points, auc })
}

/// Fraction of item pairs on which two partitions agree (both together or
/// both apart).
pub fn rand_index<A, B>(clustering: &[A], labels: &[B]) -> Result<f64>
where
    A: Eq + Hash + Copy,
    B: Eq + Hash + Copy,
{
    let n = labels.len();
    if clustering.len() != n {
        return Err(Error::Shape(format!(
            "{} cluster assignments for {n} labels",
            clustering.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("need at least 2 items".into()));
    }
    let pairs = |c: u64| c * c.saturating_sub(1) / 2;
    let mut table: HashMap<(A, B), u64> = HashMap::new();
    let mut rows: HashMap<A, u64> = HashMap::new();
    let mut cols: HashMap<B, u64> = HashMap::new();
    for (&a, &b) in clustering.iter().zip(labels) {
        *table.entry((a, b)).or_default() += 1;
        *rows.entry(a).or_default() += 1;
        *cols.entry(b).or_default() += 1;
    }
    let both: u64 = table.values().map(|&c| pairs(c)).sum();
    let same_cluster: u64 = rows.values().map(|&c| pairs(c)).sum();
    let same_class: u64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(n as u64);
    let apart = total + both - same_cluster - same_class;
    Ok((both + apart) as f64 / total as f64)
}

/// Fraction of non-ignored positions where `y` matches `y_ref`.
pub fn pixel_accuracy(y: &[u8], y_ref: &[u8], ignore: &[bool]) -> Result<f64> {
    if y.len() != y_ref.len() || y.len() != ignore.len() {
        return Err(Error::Shape(format!(
            "label lengths {}, {} and mask length {} differ",
            y.len(),
            y_ref.len(),
            ignore.len()
        )));
    }
    let mut hit = 0usize;
    let mut seen = 0usize;
    for ((a, b), &skip) in y.iter().zip(y_ref).zip(ignore) {
        if skip {
            continue;
        }
        seen += 1;
        if a == b {
            hit += 1;
        }
    }
    if seen == 0 {
        return Err(Error::Degenerate("every pixel is ignored".into()));
    }
    Ok(hit as f64 / seen as f64)
}

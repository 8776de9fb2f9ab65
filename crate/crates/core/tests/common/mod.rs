//! Slow, direct reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seislabel::corpus::PatchCorpus;
use seislabel::features::SimilarityMatrix;
use seislabel::synth::generate_synthetic_corpus;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Position (0-based) of `j` in the ranking of query `i`: the number of
/// other items that beat it on score, or tie with a lower index.
pub fn rank_of(s: &SimilarityMatrix, i: usize, j: usize) -> usize {
    (0..s.n())
        .filter(|&k| k != i && k != j)
        .filter(|&k| s.get(i, k) > s.get(i, j) || (s.get(i, k) == s.get(i, j) && k < j))
        .count()
}

fn relevant_within(s: &SimilarityMatrix, labels: &[u16], i: usize, m: usize) -> usize {
    (0..s.n())
        .filter(|&j| j != i && labels[j] == labels[i] && rank_of(s, i, j) < m)
        .count()
}

pub fn precision_at_m(s: &SimilarityMatrix, labels: &[u16], m: usize) -> f64 {
    let n = s.n();
    let mut total = 0.0;
    for i in 0..n {
        total += relevant_within(s, labels, i, m) as f64 / m as f64;
    }
    total / n as f64
}

pub fn retrieval_accuracy(s: &SimilarityMatrix, labels: &[u16]) -> f64 {
    let n = s.n();
    let mut total = 0.0;
    for i in 0..n {
        let c = (0..n).filter(|&j| j != i && labels[j] == labels[i]).count();
        total += relevant_within(s, labels, i, c) as f64 / c as f64;
    }
    total / n as f64
}

/// Average precision straight from its definition: the sum over cutoffs of
/// precision at the cutoff times the relevance of the item at that cutoff.
pub fn mean_average_precision(s: &SimilarityMatrix, labels: &[u16]) -> f64 {
    let n = s.n();
    let mut sum = 0.0;
    let mut queries = 0;
    for i in 0..n {
        let c = (0..n).filter(|&j| j != i && labels[j] == labels[i]).count();
        if c == 0 {
            continue;
        }
        let mut at_rank = vec![0usize; n - 1];
        for j in (0..n).filter(|&j| j != i) {
            at_rank[rank_of(s, i, j)] = j;
        }
        let mut ap = 0.0;
        for (r, &j) in at_rank.iter().enumerate() {
            if labels[j] == labels[i] {
                let hits = at_rank[..=r].iter().filter(|&&k| labels[k] == labels[i]).count();
                ap += hits as f64 / (r + 1) as f64;
            }
        }
        sum += ap / c as f64;
        queries += 1;
    }
    if queries == 0 {
        0.0
    } else {
        sum / queries as f64
    }
}

/// Pair-enumeration AUC: probability that a same-class pair outscores a
/// different-class pair, ties counted half.
pub fn auc(s: &SimilarityMatrix, labels: &[u16]) -> f64 {
    let n = s.n();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (s.get(i, j) + s.get(j, i));
            if labels[i] == labels[j] {
                pos.push(v);
            } else {
                neg.push(v);
            }
        }
    }
    let mut wins = 0.0;
    for &p in &pos {
        for &q in &neg {
            if p > q {
                wins += 1.0;
            } else if p == q {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

pub fn rand_index(a: &[usize], b: &[u16]) -> f64 {
    let n = a.len();
    let mut agree = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            if (a[i] == a[j]) == (b[i] == b[j]) {
                agree += 1;
            }
        }
    }
    2.0 * agree as f64 / (n * (n - 1)) as f64
}

pub fn matmul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut s = 0.0;
            for k in 0..a.ncols() {
                s += a[(i, k)] * b[(k, j)];
            }
            out[(i, j)] = s;
        }
    }
    out
}

/// Additive step `W + eta * (X H^T - W H H^T - lambda1 W)` with step
/// `eta = W / (W H H^T + lambda1 W)`.
pub fn additive_w(w: &DMatrix<f64>, h: &DMatrix<f64>, x: &DMatrix<f64>, lambda1: f64) -> DMatrix<f64> {
    let ht = h.transpose();
    let xht = matmul(x, &ht);
    let whht = matmul(&matmul(w, h), &ht);
    DMatrix::from_fn(w.nrows(), w.ncols(), |i, j| {
        let den = whht[(i, j)] + lambda1 * w[(i, j)];
        let eta = w[(i, j)] / den;
        w[(i, j)] + eta * (xht[(i, j)] - den)
    })
}

/// Additive step `H + eta * (W^T X + gamma H - (W^T W H + lambda2 H + gamma H H^T H))`
/// with `eta = H / (W^T W H + lambda2 H + gamma H H^T H)`.
pub fn additive_h(w: &DMatrix<f64>, h: &DMatrix<f64>, x: &DMatrix<f64>, gamma: f64, lambda2: f64) -> DMatrix<f64> {
    let wt = w.transpose();
    let wtx = matmul(&wt, x);
    let wtwh = matmul(&matmul(&wt, w), h);
    let hhth = matmul(&matmul(h, &h.transpose()), h);
    DMatrix::from_fn(h.nrows(), h.ncols(), |i, j| {
        let den = wtwh[(i, j)] + lambda2 * h[(i, j)] + gamma * hhth[(i, j)];
        let num = wtx[(i, j)] + gamma * h[(i, j)];
        let eta = h[(i, j)] / den;
        h[(i, j)] + eta * (num - den)
    })
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random::<f64>())
}

/// Median of each 3x3 window by sorting, with clamped coordinates.
pub fn median3x3(y: &[u8], width: usize, height: usize) -> Vec<u8> {
    let at = |r: i64, c: i64| {
        let r = r.clamp(0, height as i64 - 1) as usize;
        let c = c.clamp(0, width as i64 - 1) as usize;
        y[r * width + c]
    };
    let mut out = Vec::with_capacity(y.len());
    for r in 0..height as i64 {
        for c in 0..width as i64 {
            let mut w: Vec<u8> = Vec::new();
            for dr in -1..=1 {
                for dc in -1..=1 {
                    w.push(at(r + dr, c + dc));
                }
            }
            w.sort();
            out.push(w[4]);
        }
    }
    out
}

/// The desk-scale synthetic corpus: 4 classes of 50 patches, 64x64.
pub fn desk_corpus(seed: u64) -> (PatchCorpus, seislabel::corpus::MaskSet) {
    let s = generate_synthetic_corpus(4, 50, 64, seed).unwrap();
    (s.corpus, s.masks)
}

//! Pixel labels and confidences from a factorization, and median cleanup.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::labelmap::nmf::{par_mul, MembershipMatrix};

/// Per-image pixel labels (`0` = uncertain) and confidences.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelField {
    /// `labels[n][i]` for image `n`, pixel `i`.
    pub labels: Vec<Vec<u8>>,
    pub confidence: Vec<Vec<f64>>,
    pub n_classes: usize,
}

impl LabelField {
    pub fn n_images(&self) -> usize {
        self.labels.len()
    }

    /// Median-filtered labels of every image reshaped to `width x height`.
    pub fn median_filtered(&self, width: usize, height: usize) -> Result<Vec<Vec<u8>>> {
        self.labels
            .par_iter()
            .map(|y| median_filter_labels(y, width, height))
            .collect()
    }
}

/// Class likelihoods `L_n(i, j) = sum over class-j features f of W(i, f) H(f, n)`;
/// each pixel takes the most likely class (lower class on ties) unless its
/// likelihood is below `tau`.
pub fn extract_labels(w: &DMatrix<f64>, h: &DMatrix<f64>, q: &MembershipMatrix, tau: f64) -> Result<LabelField> {
    if w.ncols() != h.nrows() || q.n_features() != w.ncols() {
        return Err(Error::Shape(format!(
            "W {}x{}, H {}x{} and {} memberships do not conform",
            w.nrows(),
            w.ncols(),
            h.nrows(),
            h.ncols(),
            q.n_features()
        )));
    }
    if q.n_classes() > u8::MAX as usize {
        return Err(Error::InvalidArgument(format!(
            "{} classes do not fit 8-bit labels",
            q.n_classes()
        )));
    }
    let (n_p, n_s) = (w.nrows(), h.ncols());
    let mut best = DMatrix::<f64>::from_element(n_p, n_s, f64::NEG_INFINITY);
    let mut arg = DMatrix::<u8>::zeros(n_p, n_s);
    for class in 1..=q.n_classes() as u16 {
        let feats = q.features_of(class);
        let like = if feats.is_empty() {
            DMatrix::zeros(n_p, n_s)
        } else {
            par_mul(&w.select_columns(&feats), &h.select_rows(&feats))
        };
        for ((b, a), &l) in best.iter_mut().zip(arg.iter_mut()).zip(like.iter()) {
            if l > *b {
                *b = l;
                *a = class as u8;
            }
        }
    }
    let (labels, confidence) = (0..n_s)
        .into_par_iter()
        .map(|n| {
            let c: Vec<f64> = best.column(n).iter().copied().collect();
            let y = arg
                .column(n)
                .iter()
                .zip(&c)
                .map(|(&a, &v)| if v < tau { 0 } else { a })
                .collect();
            (y, c)
        })
        .unzip();
    Ok(LabelField {
        labels,
        confidence,
        n_classes: q.n_classes(),
    })
}

/// 3x3 median of integer labels over a row-major `width x height` image,
/// replicating the border.
pub fn median_filter_labels(labels: &[u8], width: usize, height: usize) -> Result<Vec<u8>> {
    if labels.len() != width * height {
        return Err(Error::Shape(format!(
            "{} labels for a {width}x{height} image",
            labels.len()
        )));
    }
    let mut out = vec![0u8; labels.len()];
    let mut window = [0u8; 9];
    for r in 0..height {
        for c in 0..width {
            let mut k = 0;
            for dr in [-1isize, 0, 1] {
                let rr = (r as isize + dr).clamp(0, height as isize - 1) as usize;
                for dc in [-1isize, 0, 1] {
                    let cc = (c as isize + dc).clamp(0, width as isize - 1) as usize;
                    window[k] = labels[rr * width + cc];
                    k += 1;
                }
            }
            window.sort_unstable();
            out[r * width + c] = window[4];
        }
    }
    Ok(out)
}

//! Sensitivity of the pixel labels to wrongly labeled training images.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::MaskSet;
use crate::error::{Error, Result};
use crate::eval::metrics::pixel_accuracy;
use crate::labelmap::{map_labels, DataMatrix, NmfConfig};
use crate::seed::derive_seed;

/// One configuration of a sweep, named by the parameter that varies.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub parameter: String,
    pub value: f64,
    pub config: NmfConfig,
}

impl SweepPoint {
    /// Copies of `base` with `k` set to each value.
    pub fn k_grid(base: &NmfConfig, ks: &[usize]) -> Vec<SweepPoint> {
        ks.iter()
            .map(|&k| SweepPoint {
                parameter: "k".into(),
                value: k as f64,
                config: NmfConfig { k, ..*base },
            })
            .collect()
    }

    /// Copies of `base` with `rho_w` set to each value.
    pub fn rho_grid(base: &NmfConfig, rhos: &[f64]) -> Vec<SweepPoint> {
        rhos.iter()
            .map(|&rho_w| SweepPoint {
                parameter: "rho_w".into(),
                value: rho_w,
                config: NmfConfig { rho_w, ..*base },
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessCurve {
    pub parameter: String,
    pub value: f64,
    pub fractions: Vec<f64>,
    /// Accuracy at each fraction over accuracy of the clean run on the same
    /// pixels, averaged over trials; exactly 1 at fraction 0.
    pub relative_performance: Vec<f64>,
    /// Mean accuracy against the reference at each fraction.
    pub accuracy: Vec<f64>,
    pub trials: usize,
}

/// Replaces `floor(fraction * N_s)` random columns of `data` with columns
/// of a different true class, keeping the original (now wrong) labels.
/// Returns the modified matrix and the replaced column indices.
pub fn replace_columns(
    data: &DataMatrix,
    true_classes: &[u16],
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(DataMatrix, Vec<usize>)> {
    let n = data.n_samples();
    if true_classes.len() != n {
        return Err(Error::Shape(format!(
            "{} true classes for {n} columns",
            true_classes.len()
        )));
    }
    let count = (fraction * n as f64).floor() as usize;
    let mut replaced = sample(rng, n, count).into_vec();
    replaced.sort_unstable();
    let mut out = data.clone();
    for &col in &replaced {
        let donors: Vec<usize> = (0..n)
            .filter(|&j| true_classes[j] != data.column_labels[col])
            .collect();
        if donors.is_empty() {
            return Err(Error::InvalidArgument(
                "no column of a different class to draw from".into(),
            ));
        }
        let src = donors[rng.random_range(0..donors.len())];
        out.x.set_column(col, &data.x.column(src));
    }
    Ok((out, replaced))
}

/// Runs every grid point on clean data and at each replacement fraction.
///
/// Accuracy is measured on the columns left untouched, over pixels the
/// clean run labeled with confidence. The reference is the ground-truth
/// mask where one is given (unmarked pixels skipped) and the clean run's
/// own labels otherwise.
pub fn robustness_sweep(
    data: &DataMatrix,
    masks: Option<&MaskSet>,
    grid: &[SweepPoint],
    fractions: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<RobustnessCurve>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let n = data.n_samples();
    let min_share = (1..=data.n_classes as u16)
        .map(|c| data.column_labels.iter().filter(|&&l| l == c).count() as f64 / n as f64)
        .fold(f64::INFINITY, f64::min);
    for &f in fractions {
        if !(0.0..=0.25).contains(&f) {
            return Err(Error::InvalidArgument(format!(
                "replacement fraction {f} outside [0, 0.25]"
            )));
        }
        if f > 0.0 && f >= min_share {
            return Err(Error::InvalidArgument(format!(
                "replacement fraction {f} is not below the smallest class share {min_share}"
            )));
        }
    }
    if let Some(m) = masks {
        if m.len() != n || m.width * m.height != data.n_pixels() {
            return Err(Error::Shape(format!(
                "{} masks of {}x{} for {n} columns of {} pixels",
                m.len(),
                m.width,
                m.height,
                data.n_pixels()
            )));
        }
    }
    let true_classes: Vec<u16> = match masks.and_then(|m| m.image_labels.clone()) {
        Some(l) => l,
        None => data.column_labels.clone(),
    };

    grid.par_iter()
        .map(|point| {
            let base = map_labels(data, &point.config)?;
            let reference: Vec<Vec<u8>> = match masks {
                Some(m) => m.masks.clone(),
                None => base.labels.clone(),
            };
            let mut relative = Vec::with_capacity(fractions.len());
            let mut accuracy = Vec::with_capacity(fractions.len());
            for (fi, &f) in fractions.iter().enumerate() {
                if f == 0.0 {
                    let all: Vec<usize> = (0..n).collect();
                    let (a, _) = score(&base.labels, &base.labels, &reference, &base.field.labels, &all)?;
                    relative.push(1.0);
                    accuracy.push(a);
                    continue;
                }
                let mut rel_sum = 0.0;
                let mut acc_sum = 0.0;
                for t in 0..trials {
                    let stream = ((fi as u64) << 32) | t as u64;
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream));
                    let (noisy, replaced) = replace_columns(data, &true_classes, f, &mut rng)?;
                    let run = map_labels(&noisy, &point.config)?;
                    let kept: Vec<usize> = (0..n).filter(|c| replaced.binary_search(c).is_err()).collect();
                    let (a0, af) = score(&base.labels, &run.labels, &reference, &base.field.labels, &kept)?;
                    rel_sum += af / a0;
                    acc_sum += af;
                }
                relative.push(rel_sum / trials as f64);
                accuracy.push(acc_sum / trials as f64);
                log::info!(
                    "{} = {}: fraction {f} relative {:.4}",
                    point.parameter,
                    point.value,
                    relative.last().unwrap()
                );
            }
            Ok(RobustnessCurve {
                parameter: point.parameter.clone(),
                value: point.value,
                fractions: fractions.to_vec(),
                relative_performance: relative,
                accuracy,
                trials,
            })
        })
        .collect()
}

/// Accuracies of the clean and perturbed labels over `columns`, skipping
/// pixels the clean run left uncertain (before filtering) and unmarked
/// reference pixels.
fn score(
    base: &[Vec<u8>],
    run: &[Vec<u8>],
    reference: &[Vec<u8>],
    base_raw: &[Vec<u8>],
    columns: &[usize],
) -> Result<(f64, f64)> {
    let mut y0 = Vec::new();
    let mut yf = Vec::new();
    let mut yr = Vec::new();
    for &c in columns {
        for i in 0..base[c].len() {
            if base_raw[c][i] == 0 || reference[c][i] == 0 {
                continue;
            }
            y0.push(base[c][i]);
            yf.push(run[c][i]);
            yr.push(reference[c][i]);
        }
    }
    let ignore = vec![false; yr.len()];
    Ok((
        pixel_accuracy(&y0, &yr, &ignore)?,
        pixel_accuracy(&yf, &yr, &ignore)?,
    ))
}

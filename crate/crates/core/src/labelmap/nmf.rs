//! Data matrix, feature initialization and the multiplicative updates.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{Patch, PatchCorpus};
use crate::error::{Error, Result};
use crate::kmeans::{kmeans, KMeansConfig};
use crate::labelmap::config::NmfConfig;
use crate::labelmap::sparsity::hoyer_project;
use crate::seed::derive_seed;

/// Vectorized patches as columns, with their class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    pub x: DMatrix<f64>,
    pub column_labels: Vec<u16>,
    pub n_classes: usize,
    pub width: usize,
    pub height: usize,
}

impl DataMatrix {
    /// Rebuilds patch `n` from its column.
    pub fn patch(&self, n: usize) -> Result<Patch> {
        let pixels = self.x.column(n).iter().map(|&v| v as f32).collect();
        Patch::new(self.width, self.height, pixels)
    }

    pub fn n_pixels(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.x.ncols()
    }
}

/// Stacks the row-major pixels of every labeled patch as a column.
pub fn assemble_data_matrix(corpus: &PatchCorpus) -> Result<DataMatrix> {
    let labels = corpus
        .class_labels()
        .ok_or_else(|| Error::InvalidArgument("corpus has no class labels".into()))?;
    let (width, height) = corpus
        .dims()
        .ok_or_else(|| Error::InvalidArgument("corpus is empty".into()))?;
    let patches = corpus.patches();
    let x = DMatrix::from_fn(width * height, patches.len(), |i, n| {
        patches[n].pixels()[i] as f64
    });
    Ok(DataMatrix {
        x,
        column_labels: labels.to_vec(),
        n_classes: corpus.n_classes(),
        width,
        height,
    })
}

/// Feature-to-class membership: row `f` has its single 1 in the column of
/// the class feature `f` was initialized from.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix {
    feature_class: Vec<u16>,
    n_classes: usize,
}

impl MembershipMatrix {
    pub fn new(feature_class: Vec<u16>, n_classes: usize) -> Result<Self> {
        if let Some(&c) = feature_class
            .iter()
            .find(|&&c| c == 0 || c as usize > n_classes)
        {
            return Err(Error::InvalidArgument(format!(
                "feature class {c} outside 1..={n_classes}"
            )));
        }
        Ok(MembershipMatrix {
            feature_class,
            n_classes,
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_class.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn feature_class(&self) -> &[u16] {
        &self.feature_class
    }

    /// Feature indices of class `class` (1-based), ascending.
    pub fn features_of(&self, class: u16) -> Vec<usize> {
        (0..self.feature_class.len())
            .filter(|&f| self.feature_class[f] == class)
            .collect()
    }

    /// Dense `N_f x N_l` 0/1 matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.feature_class.len(), self.n_classes, |f, j| {
            if self.feature_class[f] as usize == j + 1 {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// Features `W` (pixels x features) and coefficients `H` (features x samples).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub w: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub feature_class: Vec<u16>,
}

/// Initial features: per class, k-means centroids of that class's columns,
/// each projected to sparsity `rho_w`. Classes are processed in label order.
pub fn init_features(
    data: &DataMatrix,
    k: usize,
    rho_w: f64,
    seed: u64,
) -> Result<(DMatrix<f64>, Vec<u16>, MembershipMatrix)> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let n_p = data.n_pixels();
    let per_class: Vec<Vec<Vec<f64>>> = (1..=data.n_classes as u16)
        .into_par_iter()
        .map(|class| {
            let cols: Vec<Vec<f64>> = (0..data.n_samples())
                .filter(|&n| data.column_labels[n] == class)
                .map(|n| data.x.column(n).iter().copied().collect())
                .collect();
            if cols.len() < k {
                return Err(Error::InvalidArgument(format!(
                    "class {class} has {} columns, fewer than k = {k}",
                    cols.len()
                )));
            }
            let r = kmeans(&cols, &KMeansConfig::new(k, derive_seed(seed, class as u64)))?;
            r.centroids
                .iter()
                .map(|c| hoyer_project(c, rho_w))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let n_f = k * data.n_classes;
    let mut w = DMatrix::zeros(n_p, n_f);
    let mut feature_class = Vec::with_capacity(n_f);
    for (c, cols) in per_class.iter().enumerate() {
        for (i, col) in cols.iter().enumerate() {
            w.column_mut(c * k + i).copy_from_slice(col);
            feature_class.push(c as u16 + 1);
        }
    }
    let q = MembershipMatrix::new(feature_class.clone(), data.n_classes)?;
    Ok((w, feature_class, q))
}

/// `a * b`, with the output columns computed in parallel.
pub(crate) fn par_mul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = (a.nrows(), b.ncols());
    let threads = rayon::current_num_threads().max(1);
    if n < 2 * threads || m * a.ncols() * n < 1 << 20 {
        return a * b;
    }
    let chunk = n.div_ceil(threads);
    let parts: Vec<DMatrix<f64>> = (0..n)
        .step_by(chunk)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let len = chunk.min(n - start);
            a * b.columns(start, len)
        })
        .collect();
    let mut out = DMatrix::zeros(m, n);
    let mut start = 0;
    for p in parts {
        let len = p.ncols();
        out.columns_mut(start, len).copy_from(&p);
        start += len;
    }
    out
}

fn check_shapes(w: &DMatrix<f64>, h: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<()> {
    if w.nrows() != x.nrows() || h.ncols() != x.ncols() || w.ncols() != h.nrows() {
        return Err(Error::Shape(format!(
            "W {}x{}, H {}x{} and X {}x{} do not conform",
            w.nrows(),
            w.ncols(),
            h.nrows(),
            h.ncols(),
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(())
}

/// `f * num / den` elementwise; exact zeros of `f` stay zero.
fn ratio_step(f: &DMatrix<f64>, num: &DMatrix<f64>, den: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = f.clone();
    out.as_mut_slice()
        .par_iter_mut()
        .zip(num.as_slice().par_iter().zip(den.as_slice()))
        .for_each(|(v, (&a, &b))| {
            if *v != 0.0 {
                *v = *v * a / b;
            }
        });
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("multiplicative update produced a non-finite value".into()));
    }
    Ok(out)
}

/// `W * (X H^T + eps) / (W H H^T + lambda1 W + eps)`.
pub fn update_w(w: &DMatrix<f64>, h: &DMatrix<f64>, x: &DMatrix<f64>, lambda1: f64, eps: f64) -> Result<DMatrix<f64>> {
    check_shapes(w, h, x)?;
    let ht = h.transpose();
    let mut num = par_mul(x, &ht);
    num.add_scalar_mut(eps);
    let hht = h * &ht;
    let mut den = par_mul(w, &hht) + w * lambda1;
    den.add_scalar_mut(eps);
    ratio_step(w, &num, &den)
}

/// `H * (W^T X + gamma H + eps) / (W^T W H + lambda2 H + gamma H H^T H + eps)`.
pub fn update_h(
    w: &DMatrix<f64>,
    h: &DMatrix<f64>,
    x: &DMatrix<f64>,
    gamma: f64,
    lambda2: f64,
    eps: f64,
) -> Result<DMatrix<f64>> {
    check_shapes(w, h, x)?;
    let wt = w.transpose();
    let mut num = par_mul(&wt, x) + h * gamma;
    num.add_scalar_mut(eps);
    let wtw = par_mul(&wt, w);
    let hht = h * h.transpose();
    let mut den = par_mul(&wtw, h) + h * lambda2 + par_mul(&hht, h) * gamma;
    den.add_scalar_mut(eps);
    ratio_step(h, &num, &den)
}

/// Which objective to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectivePart {
    /// Reconstruction error plus all three penalties.
    Overall,
    /// Reconstruction error plus the `W` penalty.
    WPart,
    /// Reconstruction error plus the orthogonality and `H` penalties.
    HPart,
}

/// All three objectives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objectives {
    pub overall: f64,
    pub w_part: f64,
    pub h_part: f64,
}

fn frob2(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

pub fn objectives(
    x: &DMatrix<f64>,
    w: &DMatrix<f64>,
    h: &DMatrix<f64>,
    gamma: f64,
    lambda1: f64,
    lambda2: f64,
) -> Result<Objectives> {
    check_shapes(w, h, x)?;
    let residual = frob2(&(x - par_mul(w, h)));
    let hht = h * h.transpose();
    let ortho = frob2(&(hht - DMatrix::<f64>::identity(h.nrows(), h.nrows())));
    let wn = frob2(w);
    let hn = frob2(h);
    Ok(Objectives {
        overall: residual + gamma * ortho + lambda1 * wn + lambda2 * hn,
        w_part: residual + lambda1 * wn,
        h_part: residual + gamma * ortho + lambda2 * hn,
    })
}

pub fn objective(
    x: &DMatrix<f64>,
    w: &DMatrix<f64>,
    h: &DMatrix<f64>,
    gamma: f64,
    lambda1: f64,
    lambda2: f64,
    which: ObjectivePart,
) -> Result<f64> {
    let o = objectives(x, w, h, gamma, lambda1, lambda2)?;
    Ok(match which {
        ObjectivePart::Overall => o.overall,
        ObjectivePart::WPart => o.w_part,
        ObjectivePart::HPart => o.h_part,
    })
}

/// Objectives at the initial point and after every iteration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTrace {
    pub entries: Vec<Objectives>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    pub factors: FactorPair,
    pub membership: MembershipMatrix,
    pub trace: ConvergenceTrace,
}

/// Uniform `[0, 1)` coefficients.
pub fn random_coefficients(n_features: usize, n_samples: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n_features, n_samples, |_, _| rng.random::<f64>())
}

/// Initializes and runs the alternating updates for `config.iterations`
/// rounds, `W` first.
pub fn factorize(data: &DataMatrix, config: &NmfConfig) -> Result<Factorization> {
    config.validate()?;
    let n_f = config.k * data.n_classes;
    let limit = data.n_pixels().min(data.n_samples());
    if n_f >= limit {
        return Err(Error::InvalidArgument(format!(
            "{n_f} features (k = {} x {} classes) must be fewer than min(pixels, samples) = {limit}",
            config.k, data.n_classes
        )));
    }
    let (w0, feature_class, membership) =
        init_features(data, config.k, config.rho_w, derive_seed(config.seed, 1))?;
    let h0 = random_coefficients(n_f, data.n_samples(), derive_seed(config.seed, 2));
    let factors = FactorPair {
        w: w0,
        h: h0,
        feature_class,
    };
    let (factors, trace) = run_updates(&data.x, factors, config)?;
    Ok(Factorization {
        factors,
        membership,
        trace,
    })
}

/// The update loop from a given starting pair.
pub fn run_updates(x: &DMatrix<f64>, start: FactorPair, config: &NmfConfig) -> Result<(FactorPair, ConvergenceTrace)> {
    config.validate()?;
    let FactorPair {
        mut w,
        mut h,
        feature_class,
    } = start;
    check_shapes(&w, &h, x)?;
    let obj = |w: &DMatrix<f64>, h: &DMatrix<f64>| {
        objectives(x, w, h, config.gamma, config.lambda1, config.lambda2)
    };
    let mut trace = ConvergenceTrace {
        entries: vec![obj(&w, &h)?],
    };
    for it in 0..config.iterations {
        w = update_w(&w, &h, x, config.lambda1, config.epsilon)?;
        h = update_h(&w, &h, x, config.gamma, config.lambda2, config.epsilon)?;
        let o = obj(&w, &h)?;
        log::debug!("iteration {}: objective {:.6e}", it + 1, o.overall);
        trace.entries.push(o);
    }
    Ok((FactorPair { w, h, feature_class }, trace))
}

/// Gradients implied by the multiplicative updates (denominator minus
/// numerator, without the guard).
pub fn update_gradients(
    x: &DMatrix<f64>,
    factors: &FactorPair,
    config: &NmfConfig,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (w, h) = (&factors.w, &factors.h);
    check_shapes(w, h, x)?;
    let ht = h.transpose();
    let wt = w.transpose();
    let hht = h * &ht;
    let gw = par_mul(w, &hht) + w * config.lambda1 - par_mul(x, &ht);
    let gh = par_mul(&par_mul(&wt, w), h) + h * config.lambda2 + par_mul(&hht, h) * config.gamma
        - par_mul(&wt, x)
        - h * config.gamma;
    Ok((gw, gh))
}

fn residual_of(f: &DMatrix<f64>, g: &DMatrix<f64>) -> f64 {
    let mut comp: f64 = 0.0;
    let mut neg: f64 = 0.0;
    for (&v, &d) in f.iter().zip(g.iter()) {
        comp = comp.max((v * d).abs());
        if v == 0.0 {
            neg = neg.max(-d);
        }
    }
    comp + neg
}

/// Stationarity residuals `(W, H)`: the largest `|G * F|` plus the largest
/// descent direction blocked by a zero entry.
pub fn kkt_residual(x: &DMatrix<f64>, factors: &FactorPair, config: &NmfConfig) -> Result<(f64, f64)> {
    let (gw, gh) = update_gradients(x, factors, config)?;
    Ok((residual_of(&factors.w, &gw), residual_of(&factors.h, &gh)))
}

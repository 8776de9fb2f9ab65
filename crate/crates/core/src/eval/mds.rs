//! Classical multidimensional scaling and the MDS + k-means clustering run.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::eval::metrics::rand_index;
use crate::features::SimilarityMatrix;
use crate::kmeans::{kmeans, KMeansConfig};

/// Embeds the items of `s` in the plane from distances `1 - s` of the
/// symmetrized matrix. Each axis is flipped so its first nonzero
/// coordinate is positive.
pub fn classical_mds(s: &SimilarityMatrix) -> Result<Vec<[f64; 2]>> {
    let n = s.n();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "MDS needs at least 3 points, got {n}"
        )));
    }
    let sym = s.symmetrized();
    let d2 = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let d = 1.0 - sym.get(i, j);
            d * d
        }
    });
    let row_mean: Vec<f64> = (0..n).map(|i| d2.row(i).sum() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (d2[(i, j)] - row_mean[i] - row_mean[j] + grand));
    let eig = SymmetricEigen::new(b);
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("MDS eigendecomposition failed".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut axes = [vec![0.0; n], vec![0.0; n]];
    for (axis, &k) in axes.iter_mut().zip(&order[..2]) {
        let scale = eig.eigenvalues[k].max(0.0).sqrt();
        for (i, a) in axis.iter_mut().enumerate() {
            *a = eig.eigenvectors[(i, k)] * scale;
        }
        let tiny = 1e-12 * axis.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if let Some(first) = axis.iter().find(|v| v.abs() > tiny) {
            if *first < 0.0 {
                axis.iter_mut().for_each(|v| *v = -*v);
            }
        }
    }
    Ok((0..n).map(|i| [axes[0][i], axes[1][i]]).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringOutcome {
    pub rand_index: f64,
    pub coordinates: Vec<[f64; 2]>,
    pub assignments: Vec<usize>,
}

/// Projects with classical MDS, clusters the plane with seeded k-means and
/// scores the clustering against `labels`.
pub fn clustering_experiment(
    s: &SimilarityMatrix,
    labels: &[u16],
    n_clusters: usize,
    seed: u64,
) -> Result<ClusteringOutcome> {
    if n_clusters < 2 {
        return Err(Error::InvalidArgument(format!(
            "n_clusters must be at least 2, got {n_clusters}"
        )));
    }
    if labels.len() != s.n() {
        return Err(Error::Shape(format!(
            "{} labels for {} items",
            labels.len(),
            s.n()
        )));
    }
    let coordinates = classical_mds(s)?;
    let r = kmeans(&coordinates, &KMeansConfig::new(n_clusters, seed))?;
    let ri = rand_index(&r.assignments, labels)?;
    Ok(ClusteringOutcome {
        rand_index: ri,
        coordinates,
        assignments: r.assignments,
    })
}

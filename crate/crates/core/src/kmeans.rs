//! Seeded k-means: k-means++ seeding followed by Lloyd iterations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Stop once `|C_new - C_old|_F / |C_old|_F` falls below this.
    pub tol: f64,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig {
            k,
            max_iter: 100,
            tol: 1e-6,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn seed_plus_plus<P: AsRef<[f64]> + Sync>(
    points: &[P],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].as_ref().to_vec()];
    let mut d2: Vec<f64> = points
        .par_iter()
        .map(|p| sq_dist(p.as_ref(), &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].as_ref().to_vec();
        d2.par_iter_mut().zip(points.par_iter()).for_each(|(d, p)| {
            *d = d.min(sq_dist(p.as_ref(), &c));
        });
        centroids.push(c);
    }
    centroids
}

/// Clusters `points` (all of equal dimension) into `config.k` groups.
/// Ties in assignment go to the lower centroid index; an emptied cluster
/// keeps its previous centroid.
pub fn kmeans<P: AsRef<[f64]> + Sync>(points: &[P], config: &KMeansConfig) -> Result<KMeansResult> {
    let n = points.len();
    let k = config.k;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if n < k {
        return Err(Error::InvalidArgument(format!(
            "{n} points cannot form {k} clusters"
        )));
    }
    let dim = points[0].as_ref().len();
    if points.iter().any(|p| p.as_ref().len() != dim) {
        return Err(Error::Shape("points differ in dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centroids = seed_plus_plus(points, k, &mut rng);
    let mut assignments = vec![0usize; n];
    let mut iterations = 0;
    for _ in 0..config.max_iter {
        iterations += 1;
        assignments = points
            .par_iter()
            .map(|p| nearest(p.as_ref(), &centroids).0)
            .collect();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p.as_ref()) {
                *s += v;
            }
        }
        let mut shift = 0.0;
        let mut norm = 0.0;
        for c in 0..k {
            norm += centroids[c].iter().map(|v| v * v).sum::<f64>();
            if counts[c] == 0 {
                continue;
            }
            let inv = 1.0 / counts[c] as f64;
            for (old, s) in centroids[c].iter_mut().zip(&sums[c]) {
                let new = s * inv;
                shift += (new - *old) * (new - *old);
                *old = new;
            }
        }
        let rel = if norm > 0.0 {
            (shift / norm).sqrt()
        } else {
            shift.sqrt()
        };
        if rel < config.tol {
            break;
        }
    }
    // final assignment against the settled centroids
    assignments = points
        .par_iter()
        .map(|p| nearest(p.as_ref(), &centroids).0)
        .collect();
    Ok(KMeansResult {
        centroids,
        assignments,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        let mut pts = Vec::new();
        for c in centers {
            for _ in 0..20 {
                pts.push(vec![
                    c[0] + rng.random_range(-1.0..1.0),
                    c[1] + rng.random_range(-1.0..1.0),
                ]);
            }
        }
        pts
    }

    #[test]
    fn separates_blobs() {
        let pts = blobs();
        let r = kmeans(&pts, &KMeansConfig::new(3, 11)).unwrap();
        for b in 0..3 {
            let a = r.assignments[b * 20];
            assert!(r.assignments[b * 20..(b + 1) * 20].iter().all(|&x| x == a));
        }
        let mut distinct = r.assignments.clone();
        distinct.sort();
        distinct.dedup();
        assert_eq!(distinct.len(), 3);
    }

    #[test]
    fn deterministic_under_seed() {
        let pts = blobs();
        let a = kmeans(&pts, &KMeansConfig::new(4, 5)).unwrap();
        let b = kmeans(&pts, &KMeansConfig::new(4, 5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn k_equal_to_n_reproduces_points() {
        let pts = vec![vec![0.0], vec![1.0], vec![5.0]];
        let r = kmeans(&pts, &KMeansConfig::new(3, 0)).unwrap();
        let mut c: Vec<f64> = r.centroids.iter().map(|c| c[0]).collect();
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![0.0, 1.0, 5.0]);
    }

    #[test]
    fn duplicate_points_are_handled() {
        let pts = vec![vec![1.0, 1.0]; 5];
        let r = kmeans(&pts, &KMeansConfig::new(2, 0)).unwrap();
        assert!(r.centroids.iter().all(|c| c == &vec![1.0, 1.0]));
    }

    #[test]
    fn too_few_points() {
        let pts = vec![vec![0.0]; 2];
        assert!(kmeans(&pts, &KMeansConfig::new(3, 0)).is_err());
    }
}

//! Hoyer sparsity and the projection onto a fixed sparsity level.

use crate::error::{Error, Result};

fn norms(w: &[f64]) -> (f64, f64) {
    let l1 = w.iter().map(|v| v.abs()).sum();
    let l2 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    (l1, l2)
}

/// `(sqrt(n) - |w|_1 / |w|_2) / (sqrt(n) - 1)`: 0 for a flat vector, 1 for
/// a single nonzero entry.
pub fn sparsity(w: &[f64]) -> Result<f64> {
    let n = w.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "sparsity needs at least 2 entries, got {n}"
        )));
    }
    if w.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidArgument(
            "sparsity needs a non-negative vector".into(),
        ));
    }
    let (l1, l2) = norms(w);
    if l2 == 0.0 {
        return Err(Error::Degenerate("sparsity of a zero vector".into()));
    }
    let sn = (n as f64).sqrt();
    Ok(((sn - l1 / l2) / (sn - 1.0)).clamp(0.0, 1.0))
}

/// Closest non-negative vector to `w` with the same Euclidean norm and
/// sparsity `rho`.
pub fn hoyer_project(w: &[f64], rho: f64) -> Result<Vec<f64>> {
    let n = w.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot reach a sparsity target with {n} entries"
        )));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "target sparsity must lie in (0, 1), got {rho}"
        )));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("vector has non-finite entries".into()));
    }
    let l2 = norms(w).1;
    if l2 == 0.0 {
        return Err(Error::Degenerate("cannot project a zero vector".into()));
    }
    let sn = (n as f64).sqrt();
    let k1 = l2 * (sn - rho * (sn - 1.0));
    let k2 = l2 * l2;

    let mut active = vec![true; n];
    let mut n_active = n;
    let shift = (k1 - w.iter().sum::<f64>()) / n as f64;
    let mut v: Vec<f64> = w.iter().map(|x| x + shift).collect();

    for _ in 0..n {
        let m = k1 / n_active as f64;
        let mut d: Vec<f64> = (0..n)
            .map(|i| if active[i] { v[i] - m } else { 0.0 })
            .collect();
        let mut a: f64 = d.iter().map(|x| x * x).sum();
        if a <= f64::EPSILON * k2 {
            // v sits on the midpoint: move along a fixed zero-sum direction
            // inside the active set
            let first = (0..n).find(|&i| active[i]).expect("active set non-empty");
            let rest = -1.0 / (n_active as f64 - 1.0);
            for (i, x) in d.iter_mut().enumerate() {
                *x = if !active[i] {
                    0.0
                } else if i == first {
                    1.0
                } else {
                    rest
                };
            }
            a = d.iter().map(|x| x * x).sum();
        }
        let b = 2.0 * d.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
        let c = v.iter().map(|x| x * x).sum::<f64>() - k2;
        let disc = (b * b - 4.0 * a * c).max(0.0);
        let alpha = (-b + disc.sqrt()) / (2.0 * a);
        for (x, y) in v.iter_mut().zip(&d) {
            *x += alpha * y;
        }
        if v.iter().all(|&x| x >= 0.0) {
            return Ok(v);
        }
        for i in 0..n {
            if v[i] < 0.0 {
                active[i] = false;
                v[i] = 0.0;
            }
        }
        n_active = active.iter().filter(|&&x| x).count();
        if n_active == 0 {
            break;
        }
        let s: f64 = v.iter().sum();
        let adj = (k1 - s) / n_active as f64;
        for i in 0..n {
            if active[i] {
                v[i] += adj;
            }
        }
    }
    Err(Error::Numeric("sparsity projection did not converge".into()))
}

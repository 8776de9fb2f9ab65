//! Forward discrete curvelet transform via frequency wrapping.
//!
//! The 2D spectrum of a patch is split into concentric coronae (scales) and
//! angular wedges (orientations) by smooth Meyer-type windows whose squares
//! sum to one at every frequency bin. Each windowed wedge is periodized onto a
//! rectangle just large enough that its support does not overlap itself, and
//! an inverse FFT of that rectangle yields the wedge's coefficients.
//!
//! Scale 0 is the isotropic low-pass with a single orientation. Scales
//! `1..J` are directional with `K(j)` orientations around the full circle.
//! For real input the spectrum is conjugate symmetric, so only the wedges of
//! two consecutive quadrants (orientations `0..K(j)/2`) are produced.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::corpus::Patch;
use crate::error::{Error, Result};

/// Number of scales for an `rows x cols` image, `ceil(log2(min) - 3)`.
pub fn num_scales(rows: usize, cols: usize) -> Result<usize> {
    let m = rows.min(cols);
    if m < 16 {
        return Err(Error::UnsupportedSize { rows, cols });
    }
    // ceil(log2(m) - 3) == ceil(log2(m)) - 3 for integer offsets
    let ceil_log2 = m.next_power_of_two().trailing_zeros() as usize;
    Ok(ceil_log2 - 3)
}

/// Orientations around the full circle at scale `j`: 1 at the low-pass
/// scale, `16 * 2^ceil((j - 1) / 2)` otherwise.
pub fn num_orientations(j: usize) -> usize {
    if j == 0 {
        1
    } else {
        // ceil((j - 1) / 2) == j / 2 for j >= 1
        16 << (j / 2)
    }
}

/// Meyer auxiliary polynomial: 0 at 0, 1 at 1, `v(x) + v(1-x) = 1`.
fn meyer(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x.powi(4) * (35.0 - 84.0 * x + 70.0 * x * x - 20.0 * x.powi(3))
}

/// Smooth low-pass profile: 1 on `[0, 2/3]`, 0 from `4/3`.
fn lowpass_profile(t: f64) -> f64 {
    if t <= 2.0 / 3.0 {
        1.0
    } else if t >= 4.0 / 3.0 {
        0.0
    } else {
        (FRAC_PI_2 * meyer(1.5 * t - 1.0)).cos()
    }
}

/// Pseudo-polar angle in `[0, 8)` of a frequency direction.
///
/// `[0,2)` is the cone around +horizontal, `[2,4)` around +vertical, then
/// the opposite cones; negating the direction adds 4.
fn pseudo_angle(v: f64, h: f64) -> f64 {
    if h > 0.0 && v.abs() <= h {
        1.0 + v / h
    } else if v > 0.0 && h.abs() <= v {
        3.0 - h / v
    } else if h < 0.0 && v.abs() <= -h {
        5.0 + v / h
    } else {
        // v < 0, |h| <= -v
        let t = 7.0 - h / v;
        if t >= 8.0 {
            t - 8.0
        } else {
            t
        }
    }
}

/// Direction (vertical, horizontal) at a pseudo-polar angle.
fn pseudo_direction(theta: f64) -> (f64, f64) {
    if theta < 2.0 {
        (theta - 1.0, 1.0)
    } else if theta < 4.0 {
        (1.0, 3.0 - theta)
    } else if theta < 6.0 {
        (5.0 - theta, -1.0)
    } else {
        (-1.0, theta - 7.0)
    }
}

/// Angular partition of unity with `count` wedges of equal pseudo-angle.
struct AngularPartition {
    count: usize,
    width: f64,
    half_overlap: f64,
}

impl AngularPartition {
    fn new(count: usize) -> Self {
        let width = 8.0 / count as f64;
        AngularPartition {
            count,
            width,
            half_overlap: width / 3.0,
        }
    }

    /// Calls `f(wedge, value)` for every wedge with a nonzero window at `theta`.
    fn for_each(&self, theta: f64, mut f: impl FnMut(usize, f64)) {
        let u = theta / self.width;
        let l0 = (u.floor() as usize).min(self.count - 1);
        let offset = theta - l0 as f64 * self.width;
        let n = self.count;
        let d = self.half_overlap;
        if offset < d {
            // transition around the lower boundary of wedge l0
            let x = (offset + d) / (2.0 * d);
            let m = FRAC_PI_2 * meyer(x);
            f((l0 + n - 1) % n, m.cos());
            f(l0, m.sin());
        } else if offset > self.width - d {
            let x = (offset - (self.width - d)) / (2.0 * d);
            let m = FRAC_PI_2 * meyer(x);
            f(l0, m.cos());
            f((l0 + 1) % n, m.sin());
        } else {
            f(l0, 1.0);
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Tap {
    bin: u32,
    slot: u32,
    weight: f64,
}

/// The frequency window of one `(scale, orientation)` wedge and the size of
/// the rectangle its support is wrapped onto.
#[derive(Debug, Clone)]
pub struct WedgeWindow {
    pub scale: usize,
    pub orientation: usize,
    /// True for wedges produced by the transform (low-pass and the first
    /// two quadrants); the rest are their conjugate mirrors.
    pub retained: bool,
    pub rows: usize,
    pub cols: usize,
    taps: Vec<Tap>,
}

impl WedgeWindow {
    /// Window value at every bin of the full `rows x cols` spectrum.
    pub fn mask(&self, n_rows: usize, n_cols: usize) -> Vec<f64> {
        let mut m = vec![0.0; n_rows * n_cols];
        for t in &self.taps {
            m[t.bin as usize] = t.weight;
        }
        m
    }

    /// Number of bins in the window's support.
    pub fn support_len(&self) -> usize {
        self.taps.len()
    }
}

/// Scale/orientation tiling of the frequency plane for one patch geometry.
#[derive(Debug, Clone)]
pub struct FrequencyTiling {
    rows: usize,
    cols: usize,
    num_scales: usize,
    orientations: Vec<usize>,
    wedges: Vec<WedgeWindow>,
}

/// Centered integer frequency of DFT index `k` for length `n`; the Nyquist
/// bin of an even length maps to `-n/2`.
fn centered(k: usize, n: usize) -> i64 {
    if k < n.div_ceil(2) {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

impl FrequencyTiling {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        let j_count = num_scales(rows, cols)?;
        let orientations: Vec<usize> = (0..j_count).map(num_orientations).collect();
        let partitions: Vec<Option<AngularPartition>> = orientations
            .iter()
            .enumerate()
            .map(|(j, &k)| (j > 0).then(|| AngularPartition::new(k)))
            .collect();

        // wedge index of (scale, orientation)
        let mut offsets = vec![0usize; j_count];
        let mut total = 0;
        for j in 0..j_count {
            offsets[j] = total;
            total += orientations[j];
        }
        // per wedge: list of (bin, (c_row, c_col), weight)
        let mut raw: Vec<Vec<(u32, (i64, i64), f64)>> = vec![Vec::new(); total];

        // which sign each wedge uses for Nyquist coordinates
        let mut nyquist_sign: Vec<(i64, i64)> = vec![(1, 1); total];
        for j in 1..j_count {
            let k = orientations[j];
            for l in 0..k {
                let (v, h) = pseudo_direction((l as f64 + 0.5) * 8.0 / k as f64);
                nyquist_sign[offsets[j] + l] =
                    (if v >= 0.0 { 1 } else { -1 }, if h >= 0.0 { 1 } else { -1 });
            }
        }

        let nyq_row = rows % 2 == 0;
        let nyq_col = cols % 2 == 0;
        let mut lowpass = vec![0.0; j_count];
        let mut acc: HashMap<usize, f64> = HashMap::new();

        for k1 in 0..rows {
            let c1 = centered(k1, rows);
            let at_nyq_row = nyq_row && k1 == rows / 2;
            let xi1 = c1 as f64 / rows as f64;
            for k2 in 0..cols {
                let c2 = centered(k2, cols);
                let at_nyq_col = nyq_col && k2 == cols / 2;
                let xi2 = c2 as f64 / cols as f64;
                let bin = (k1 * cols + k2) as u32;

                for (j, phi) in lowpass.iter_mut().enumerate() {
                    *phi = if j + 1 == j_count {
                        1.0
                    } else {
                        let b = 0.5f64.powi((j_count - 1 - j) as i32);
                        lowpass_profile(2.0 * xi1.abs() / b) * lowpass_profile(2.0 * xi2.abs() / b)
                    };
                }

                if lowpass[0] > 0.0 {
                    raw[0].push((bin, (c1, c2), lowpass[0]));
                }

                // representatives of this bin's frequency (Nyquist bins alias
                // both signs); the window is the RMS over them
                let mut reps: Vec<(f64, f64)> = vec![(xi1, xi2)];
                if at_nyq_row {
                    reps.push((-xi1, xi2));
                }
                if at_nyq_col {
                    let n = reps.len();
                    for i in 0..n {
                        reps.push((reps[i].0, -xi2));
                    }
                }
                let inv_reps = 1.0 / reps.len() as f64;

                for j in 1..j_count {
                    let band_sq = (lowpass[j] * lowpass[j] - lowpass[j - 1] * lowpass[j - 1]).max(0.0);
                    if band_sq <= 0.0 {
                        continue;
                    }
                    let part = partitions[j].as_ref().expect("directional scale");
                    acc.clear();
                    for &(a, b) in &reps {
                        let theta = pseudo_angle(a, b);
                        part.for_each(theta, |l, v| {
                            *acc.entry(l).or_insert(0.0) += v * v * inv_reps;
                        });
                    }
                    for (&l, &ang_sq) in acc.iter() {
                        let w_sq = band_sq * ang_sq;
                        if w_sq <= 0.0 {
                            continue;
                        }
                        let idx = offsets[j] + l;
                        let (sv, sh) = nyquist_sign[idx];
                        let p1 = if at_nyq_row { sv * (rows as i64 / 2) } else { c1 };
                        let p2 = if at_nyq_col { sh * (cols as i64 / 2) } else { c2 };
                        raw[idx].push((bin, (p1, p2), w_sq.sqrt()));
                    }
                }
            }
        }

        let mut wedges = Vec::with_capacity(total);
        for j in 0..j_count {
            for l in 0..orientations[j] {
                let idx = offsets[j] + l;
                let retained = j == 0 || l < orientations[j] / 2;
                let mut taps = std::mem::take(&mut raw[idx]);
                taps.sort_by_key(|t| t.0);
                wedges.push(wrap_wedge(j, l, retained, &taps, rows, cols));
            }
        }

        Ok(FrequencyTiling {
            rows,
            cols,
            num_scales: j_count,
            orientations,
            wedges,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn num_scales(&self) -> usize {
        self.num_scales
    }

    /// Orientation count `K(j)` around the full circle, per scale.
    pub fn orientations_per_scale(&self) -> &[usize] {
        &self.orientations
    }

    /// All wedges, including the conjugate mirrors that are not computed.
    pub fn wedges(&self) -> &[WedgeWindow] {
        &self.wedges
    }

    pub fn retained_wedges(&self) -> impl Iterator<Item = &WedgeWindow> {
        self.wedges.iter().filter(|w| w.retained)
    }

    /// Pointwise sum of squared windows over all wedges.
    pub fn squared_sum(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.rows * self.cols];
        for w in &self.wedges {
            for t in &w.taps {
                s[t.bin as usize] += t.weight * t.weight;
            }
        }
        s
    }
}

/// Assigns every support bin a slot in the smallest collision-free wrapping
/// rectangle: one axis spans the full support extent, the other the widest
/// extent of any single line along it.
fn wrap_wedge(
    scale: usize,
    orientation: usize,
    retained: bool,
    raw: &[(u32, (i64, i64), f64)],
    _rows: usize,
    _cols: usize,
) -> WedgeWindow {
    if raw.is_empty() {
        return WedgeWindow {
            scale,
            orientation,
            retained,
            rows: 1,
            cols: 1,
            taps: Vec::new(),
        };
    }
    let span = |vals: &mut dyn Iterator<Item = i64>| {
        let (lo, hi) = vals.fold((i64::MAX, i64::MIN), |(lo, hi), v| (lo.min(v), hi.max(v)));
        (hi - lo + 1) as usize
    };
    let line_width = |key: fn(&(i64, i64)) -> i64, val: fn(&(i64, i64)) -> i64| {
        let mut extents: HashMap<i64, (i64, i64)> = HashMap::new();
        for (_, p, _) in raw {
            let e = extents.entry(key(p)).or_insert((i64::MAX, i64::MIN));
            e.0 = e.0.min(val(p));
            e.1 = e.1.max(val(p));
        }
        extents.values().map(|(lo, hi)| (hi - lo + 1) as usize).max().unwrap_or(1)
    };
    let row_span = span(&mut raw.iter().map(|(_, p, _)| p.0));
    let col_span = span(&mut raw.iter().map(|(_, p, _)| p.1));
    let by_rows = (row_span, line_width(|p| p.0, |p| p.1));
    let by_cols = (line_width(|p| p.1, |p| p.0), col_span);
    let (r, c) = if by_cols.0 * by_cols.1 < by_rows.0 * by_rows.1 {
        by_cols
    } else {
        by_rows
    };
    let taps = raw
        .iter()
        .map(|&(bin, (p1, p2), weight)| Tap {
            bin,
            slot: (p1.rem_euclid(r as i64) as usize * c + p2.rem_euclid(c as i64) as usize) as u32,
            weight,
        })
        .collect();
    WedgeWindow {
        scale,
        orientation,
        retained,
        rows: r,
        cols: c,
        taps,
    }
}

/// Coefficients of one wedge.
#[derive(Debug, Clone, PartialEq)]
pub struct WedgeCoeffs {
    pub scale: usize,
    pub orientation: usize,
    pub coeffs: DMatrix<Complex<f64>>,
}

impl WedgeCoeffs {
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Weight of this wedge in the image energy: directional wedges stand
    /// for themselves and their unproduced conjugate mirror.
    pub fn symmetry_weight(&self) -> f64 {
        if self.scale == 0 {
            1.0
        } else {
            2.0
        }
    }
}

/// Curvelet coefficients of one patch, ordered by scale then orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveletCoeffs {
    pub wedges: Vec<WedgeCoeffs>,
}

impl CurveletCoeffs {
    /// Image energy recovered from the coefficients.
    pub fn weighted_energy(&self) -> f64 {
        self.wedges
            .iter()
            .map(|w| w.symmetry_weight() * w.energy())
            .sum()
    }
}

/// A tiling plus the FFT plans needed to transform patches of one geometry.
pub struct CurveletTransform {
    tiling: FrequencyTiling,
    plans: HashMap<usize, (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>,
}

impl std::fmt::Debug for CurveletTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CurveletTransform")
            .field("rows", &self.tiling.rows)
            .field("cols", &self.tiling.cols)
            .finish()
    }
}

impl CurveletTransform {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        let tiling = FrequencyTiling::new(rows, cols)?;
        let mut planner = FftPlanner::new();
        let mut plans = HashMap::new();
        let mut lengths = vec![rows, cols];
        for w in tiling.retained_wedges() {
            lengths.push(w.rows);
            lengths.push(w.cols);
        }
        for n in lengths {
            plans
                .entry(n)
                .or_insert_with(|| (planner.plan_fft_forward(n), planner.plan_fft_inverse(n)));
        }
        Ok(CurveletTransform { tiling, plans })
    }

    pub fn tiling(&self) -> &FrequencyTiling {
        &self.tiling
    }

    /// Transforms a patch given as `rows x cols` row-major values.
    pub fn forward_values(&self, values: &[f64]) -> Result<CurveletCoeffs> {
        let (rows, cols) = (self.tiling.rows, self.tiling.cols);
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} tiling",
                values.len()
            )));
        }
        let mut spectrum: Vec<Complex<f64>> =
            values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fft2(&mut spectrum, rows, cols, false);

        let n = (rows * cols) as f64;
        let wedges = self
            .tiling
            .retained_wedges()
            .map(|w| {
                let mut buf = vec![Complex::new(0.0, 0.0); w.rows * w.cols];
                for t in &w.taps {
                    buf[t.slot as usize] += spectrum[t.bin as usize] * t.weight;
                }
                self.fft2(&mut buf, w.rows, w.cols, true);
                let scale = 1.0 / (n * (w.rows * w.cols) as f64).sqrt();
                for c in buf.iter_mut() {
                    *c *= scale;
                }
                WedgeCoeffs {
                    scale: w.scale,
                    orientation: w.orientation,
                    coeffs: DMatrix::from_row_slice(w.rows, w.cols, &buf),
                }
            })
            .collect();
        Ok(CurveletCoeffs { wedges })
    }

    pub fn forward(&self, patch: &Patch) -> Result<CurveletCoeffs> {
        if patch.height() != self.tiling.rows || patch.width() != self.tiling.cols {
            return Err(Error::Shape(format!(
                "patch is {}x{} (rows x cols), tiling is {}x{}",
                patch.height(),
                patch.width(),
                self.tiling.rows,
                self.tiling.cols
            )));
        }
        self.forward_values(&patch.to_f64())
    }

    /// Unnormalized in-place 2D FFT of a row-major buffer.
    fn fft2(&self, buf: &mut [Complex<f64>], rows: usize, cols: usize, inverse: bool) {
        let pick = |n: usize| {
            let (f, i) = &self.plans[&n];
            if inverse {
                i.clone()
            } else {
                f.clone()
            }
        };
        if cols > 1 {
            pick(cols).process(buf);
        }
        if rows > 1 {
            let mut t = vec![Complex::new(0.0, 0.0); rows * cols];
            for r in 0..rows {
                for c in 0..cols {
                    t[c * rows + r] = buf[r * cols + c];
                }
            }
            pick(rows).process(&mut t);
            for r in 0..rows {
                for c in 0..cols {
                    buf[r * cols + c] = t[c * rows + r];
                }
            }
        }
    }
}

/// One-off transform of a patch; builds a tiling for its geometry.
pub fn forward_transform(patch: &Patch) -> Result<CurveletCoeffs> {
    CurveletTransform::new(patch.height(), patch.width())?.forward(patch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scale_counts() {
        assert_eq!(num_scales(99, 99).unwrap(), 4);
        assert_eq!(num_scales(64, 64).unwrap(), 3);
        assert_eq!(num_scales(128, 64).unwrap(), 3);
        assert_eq!(num_scales(16, 40).unwrap(), 1);
        assert!(matches!(
            num_scales(15, 99),
            Err(Error::UnsupportedSize { rows: 15, cols: 99 })
        ));
    }

    #[test]
    fn orientation_counts() {
        assert_eq!(num_orientations(0), 1);
        assert_eq!(num_orientations(1), 16);
        assert_eq!(num_orientations(2), 32);
        assert_eq!(num_orientations(3), 32);
        assert_eq!(num_orientations(4), 64);
    }

    #[test]
    fn pseudo_angle_is_continuous_and_antipodal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let v: f64 = rng.random_range(-1.0..1.0);
            let h: f64 = rng.random_range(-1.0..1.0);
            let t = pseudo_angle(v, h);
            let s = pseudo_angle(-v, -h);
            assert!((0.0..8.0).contains(&t));
            let d = (s - t).rem_euclid(8.0);
            assert!((d - 4.0).abs() < 1e-12, "{v} {h} {t} {s}");
        }
        let (v, h) = pseudo_direction(2.5);
        assert!((pseudo_angle(v, h) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn angular_partition_of_unity() {
        let p = AngularPartition::new(16);
        for i in 0..8000 {
            let theta = i as f64 * 0.001;
            let mut s = 0.0;
            p.for_each(theta, |_, v| s += v * v);
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tight_frame_at_dc_and_everywhere() {
        for (r, c) in [(64, 64), (99, 99), (32, 48), (17, 16)] {
            let t = FrequencyTiling::new(r, c).unwrap();
            let s = t.squared_sum();
            assert!((s[0] - 1.0).abs() < 1e-12);
            for (i, v) in s.iter().enumerate() {
                assert!((v - 1.0).abs() < 1e-9, "{r}x{c} bin {i}: {v}");
            }
        }
    }

    #[test]
    fn retained_wedge_count_matches_half_orientations() {
        let t = FrequencyTiling::new(99, 99).unwrap();
        let expected: usize = 1 + (1..4).map(|j| num_orientations(j) / 2).sum::<usize>();
        assert_eq!(t.retained_wedges().count(), expected);
        assert_eq!(expected, 41);
        assert_eq!(t.wedges().len(), 1 + 16 + 32 + 32);
    }

    #[test]
    fn wrapping_is_collision_free() {
        for (r, c) in [(64, 64), (99, 99), (128, 64)] {
            let t = FrequencyTiling::new(r, c).unwrap();
            for w in t.wedges() {
                let mut seen = std::collections::HashSet::new();
                for tap in &w.taps {
                    assert!(seen.insert(tap.slot), "collision in wedge {}/{}", w.scale, w.orientation);
                    assert!((tap.slot as usize) < w.rows * w.cols);
                }
                assert!(w.rows <= r && w.cols <= c);
            }
        }
    }

    #[test]
    fn mirror_wedges_are_point_reflections() {
        let (r, c) = (64, 64);
        let t = FrequencyTiling::new(r, c).unwrap();
        for j in 1..t.num_scales() {
            let k = t.orientations_per_scale()[j];
            for l in 0..k / 2 {
                let a = t.wedges().iter().find(|w| w.scale == j && w.orientation == l).unwrap();
                let b = t
                    .wedges()
                    .iter()
                    .find(|w| w.scale == j && w.orientation == l + k / 2)
                    .unwrap();
                let ma = a.mask(r, c);
                let mb = b.mask(r, c);
                for k1 in 0..r {
                    for k2 in 0..c {
                        let refl = ((r - k1) % r) * c + (c - k2) % c;
                        assert!((ma[k1 * c + k2] - mb[refl]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn constant_patch_energy_is_lowpass_only() {
        let p = Patch::new(64, 64, vec![0.7; 64 * 64]).unwrap();
        let coeffs = forward_transform(&p).unwrap();
        let total = coeffs.weighted_energy();
        let fine: f64 = coeffs.wedges[1..].iter().map(|w| w.energy()).sum();
        assert!(fine < 1e-10 * total);
        let expected = 0.7f32 as f64 * 0.7f32 as f64 * 4096.0;
        assert!((total - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn parseval_on_random_patch() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tr = CurveletTransform::new(50, 37).unwrap();
        let x: Vec<f64> = (0..50 * 37).map(|_| rng.random::<f64>()).collect();
        let e: f64 = x.iter().map(|v| v * v).sum();
        let c = tr.forward_values(&x).unwrap();
        assert!((c.weighted_energy() - e).abs() <= 1e-9 * e);
    }

    #[test]
    fn size_mismatch_rejected() {
        let tr = CurveletTransform::new(32, 32).unwrap();
        let p = Patch::new(33, 32, vec![0.0; 33 * 32]).unwrap();
        assert!(matches!(tr.forward(&p), Err(Error::Shape(_))));
    }
}

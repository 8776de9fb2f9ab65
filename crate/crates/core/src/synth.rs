//! Deterministic procedural texture corpus used in place of field data.
//!
//! Every class is a randomized recipe (random phase, wavelength, dip and
//! placement per patch) so that raw-pixel distances carry little class
//! information while the directional texture does. Ground-truth masks mark
//! the region that defines the class: the whole patch for texture classes,
//! a band around the discontinuity for the edge classes. Unmarked pixels
//! hold 0.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corpus::{MaskSet, Patch, PatchCorpus};
use crate::error::{Error, Result};

pub const MAX_CLASSES: usize = 8;

/// Names of the procedural classes in label order (label = index + 1).
pub const CLASS_NAMES: [&str; MAX_CLASSES] = [
    "layered", "chaotic", "fault", "dome_edge", "dipping", "blocky", "thin_beds", "channel",
];

/// Output of [`generate_synthetic_corpus`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub corpus: PatchCorpus,
    pub masks: MaskSet,
}

struct Canvas {
    size: usize,
    values: Vec<f64>,
    mask: Vec<u8>,
}

impl Canvas {
    fn new(size: usize) -> Self {
        Canvas {
            size,
            values: vec![0.0; size * size],
            mask: vec![0; size * size],
        }
    }

    fn fill(&mut self, f: impl Fn(f64, f64) -> f64) {
        let n = self.size;
        for r in 0..n {
            for c in 0..n {
                self.values[r * n + c] = f(r as f64, c as f64);
            }
        }
    }

    fn mark(&mut self, label: u8, inside: impl Fn(f64, f64) -> bool) {
        let n = self.size;
        for r in 0..n {
            for c in 0..n {
                if inside(r as f64, c as f64) {
                    self.mask[r * n + c] = label;
                }
            }
        }
    }
}

/// Layered reflectivity: sinusoidal beds along depth with a slight dip and
/// a slowly varying amplitude.
#[derive(Clone, Copy)]
struct Layers {
    wavelength: f64,
    phase: f64,
    slope: f64,
    amp_phase: f64,
}

impl Layers {
    fn random(rng: &mut ChaCha8Rng, wavelength: (f64, f64), max_slope: f64) -> Self {
        Layers {
            wavelength: rng.random_range(wavelength.0..wavelength.1),
            phase: rng.random_range(0.0..2.0 * PI),
            slope: rng.random_range(-max_slope..max_slope),
            amp_phase: rng.random_range(0.0..2.0 * PI),
        }
    }

    fn eval(&self, r: f64, c: f64, shift: f64, size: f64) -> f64 {
        let depth = r - self.slope * c + shift;
        let amp = 0.35 + 0.08 * (2.0 * PI * c / size + self.amp_phase).sin();
        0.5 + amp * (2.0 * PI * depth / self.wavelength + self.phase).sin()
    }
}

fn band_mark_width(size: usize) -> f64 {
    (size as f64 / 16.0).max(2.0)
}

fn layered(rng: &mut ChaCha8Rng, cv: &mut Canvas, label: u8) {
    let l = Layers::random(rng, (6.0, 9.0), 0.05);
    let s = cv.size as f64;
    cv.fill(|r, c| l.eval(r, c, 0.0, s));
    cv.mark(label, |_, _| true);
}

/// Incoherent, randomly oriented reflections: a few long-wavelength waves
/// in random directions, squashed.
fn chaotic(rng: &mut ChaCha8Rng, cv: &mut Canvas, label: u8) {
    let s = cv.size as f64;
    let waves: Vec<(f64, f64, f64, f64)> = (0..8)
        .map(|_| {
            let angle: f64 = rng.random_range(0.0..PI);
            let k = 2.0 * PI / rng.random_range(0.25 * s..0.625 * s);
            (k * angle.cos(), k * angle.sin(), rng.random_range(0.0..2.0 * PI), rng.random_range(0.5..1.0))
        })
        .collect();
    let norm: f64 = waves.iter().map(|w| w.3 * w.3).sum::<f64>().sqrt();
    cv.fill(|r, c| {
        let v: f64 = waves
            .iter()
            .map(|&(kr, kc, ph, a)| a * (kr * r + kc * c + ph).sin())
            .sum();
        0.5 + 0.5 * (v / norm).tanh()
    });
    cv.mark(label, |_, _| true);
}

/// Tilted thick beds offset across a steep straight fault.
fn fault(rng: &mut ChaCha8Rng, cv: &mut Canvas, label: u8) {
    let s = cv.size as f64;
    let mut l = Layers::random(rng, (9.0, 13.0), 0.01);
    let dip = rng.random_range(8f64.to_radians()..18f64.to_radians());
    l.slope = dip.tan() * if rng.random::<bool>() { 1.0 } else { -1.0 };
    // fault line through (r0, c0) with direction making 10-35 deg with vertical
    let tilt = rng.random_range(10f64.to_radians()..35f64.to_radians())
        * if rng.random::<bool>() { 1.0 } else { -1.0 };
    let (dr, dc) = (tilt.cos(), tilt.sin());
    let c0 = rng.random_range(0.3 * s..0.7 * s);
    let r0 = s / 2.0;
    let throw = l.wavelength * rng.random_range(0.3..0.7);
    let side = move |r: f64, c: f64| (c - c0) * dr - (r - r0) * dc;
    cv.fill(|r, c| {
        let shift = if side(r, c) > 0.0 { throw } else { 0.0 };
        l.eval(r, c, shift, s)
    });
    let w = band_mark_width(cv.size);
    cv.mark(label, |r, c| side(r, c).abs() <= w);
}

/// Beds dragged up against a steep, curved, high-contrast body boundary.
fn dome_edge(rng: &mut ChaCha8Rng, cv: &mut Canvas, label: u8) {
    let s = cv.size as f64;
    let mut l = Layers::random(rng, (6.0, 11.0), 0.01);
    let radius = rng.random_range(1.2 * s..2.5 * s);
    let left = rng.random::<bool>();
    let drag = rng.random_range(0.2..0.45);
    // beds rise toward the body
    l.slope = if left { -drag } else { drag };
    let edge_c = rng.random_range(0.35 * s..0.65 * s);
    let cr = rng.random_range(0.2 * s..0.8 * s);
    let cc = if left { edge_c - radius } else { edge_c + radius };
    let body = rng.random_range(0.05..0.15);
    let body = if rng.random::<bool>() { body } else { 1.0 - body };
    let dist = move |r: f64, c: f64| ((r - cr).powi(2) + (c - cc).powi(2)).sqrt() - radius;
    cv.fill(|r, c| {
        let d = dist(r, c);
        let t = 0.5 * (1.0 + (d / 1.2).tanh());
        // t -> 0 inside the body
        body * (1.0 - t) + l.eval(r, c, 0.0, s) * t
    });
    let w = band_mark_width(cv.size);
    cv.mark(label, |r, c| dist(r, c).abs() <= w);
}

fn dipping(rng: &mut ChaCha8Rng, cv: &mut Canvas, label: u8) {
    let mut l = Layers::random(rng, (6.0, 11.0), 0.01);
    let angle = rng.random_range(25f64.to_radians()..40f64.to_radians());
    l.slope = angle.tan() * if rng.random::<bool>() { 1.0 } else { -1.0 };
    let s = cv.size as f64;
    cv.fill(|r, c| l.eval(r, c, 0.0, s));
    cv.mark(label, |_, _| true);
}

/// Piecewise-constant blobs from thresholded smooth noise.
fn blocky(rng: &mut ChaCha8Rng, cv: &mut Canvas, label: u8) {
    let s = cv.size as f64;
    let waves: Vec<(f64, f64, f64)> = (0..12)
        .map(|_| {
            let angle: f64 = rng.random_range(0.0..PI);
            let k = 2.0 * PI / rng.random_range(0.4 * s..1.2 * s);
            (k * angle.cos(), k * angle.sin(), rng.random_range(0.0..2.0 * PI))
        })
        .collect();
    cv.fill(|r, c| {
        let v: f64 = waves.iter().map(|&(kr, kc, ph)| (kr * r + kc * c + ph).sin()).sum();
        if v > 0.0 {
            0.8
        } else {
            0.2
        }
    });
    cv.mark(label, |_, _| true);
}

fn thin_beds(rng: &mut ChaCha8Rng, cv: &mut Canvas, label: u8) {
    let l = Layers::random(rng, (3.0, 4.5), 0.08);
    let s = cv.size as f64;
    cv.fill(|r, c| l.eval(r, c, 0.0, s));
    cv.mark(label, |_, _| true);
}

/// Layers cut by a U-shaped channel filled with a homogeneous fill.
fn channel(rng: &mut ChaCha8Rng, cv: &mut Canvas, label: u8) {
    let s = cv.size as f64;
    let l = Layers::random(rng, (6.0, 11.0), 0.08);
    let center = rng.random_range(0.3 * s..0.7 * s);
    let half_width = rng.random_range(0.15 * s..0.3 * s);
    let top = rng.random_range(0.1 * s..0.4 * s);
    let depth = rng.random_range(0.2 * s..0.4 * s);
    let fill = rng.random_range(0.3..0.7);
    let inside = move |r: f64, c: f64| {
        let x = (c - center) / half_width;
        x.abs() < 1.0 && r >= top && r <= top + depth * (1.0 - x * x)
    };
    cv.fill(|r, c| if inside(r, c) { fill } else { l.eval(r, c, 0.0, s) });
    cv.mark(label, inside);
}

type Recipe = fn(&mut ChaCha8Rng, &mut Canvas, u8);

const RECIPES: [Recipe; MAX_CLASSES] = [
    layered, chaotic, fault, dome_edge, dipping, blocky, thin_beds, channel,
];

/// Draws `per_class` patches for each of the first `n_classes` recipes,
/// ordered class by class, together with their ground-truth masks.
pub fn generate_synthetic_corpus(
    n_classes: usize,
    per_class: usize,
    size: usize,
    seed: u64,
) -> Result<SyntheticCorpus> {
    if !(2..=MAX_CLASSES).contains(&n_classes) {
        return Err(Error::InvalidArgument(format!(
            "n_classes must be in 2..={MAX_CLASSES}, got {n_classes}"
        )));
    }
    if per_class == 0 {
        return Err(Error::InvalidArgument("per_class must be at least 1".into()));
    }
    if size < 16 {
        return Err(Error::InvalidArgument(format!(
            "patch size must be at least 16, got {size}"
        )));
    }
    let mut patches = Vec::with_capacity(n_classes * per_class);
    let mut labels = Vec::with_capacity(n_classes * per_class);
    let mut masks = Vec::with_capacity(n_classes * per_class);
    for class in 0..n_classes {
        for i in 0..per_class {
            // independent stream per patch keeps each patch a function of
            // (seed, class, index) only
            let stream = ((class as u64) << 32) | i as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            let label = (class + 1) as u8;
            let mut cv = Canvas::new(size);
            RECIPES[class](&mut rng, &mut cv, label);
            for v in cv.values.iter_mut() {
                let n: f64 = rng.sample(StandardNormal);
                *v += 0.03 * n;
            }
            patches.push(Patch::from_f64_clamped(size, size, &cv.values)?);
            labels.push(label as u16);
            masks.push(cv.mask);
        }
    }
    let names = CLASS_NAMES[..n_classes].iter().map(|s| s.to_string()).collect();
    let corpus = PatchCorpus::new(patches, Some(labels.clone()), names)?;
    let masks = MaskSet::new(size, size, n_classes, Some(labels), masks)?;
    Ok(SyntheticCorpus { corpus, masks })
}

//! Patches, corpora, raster volumes and their persisted forms.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::format::{self, Header, CORPUS_MAGIC, MASK_MAGIC, NAMES_MAGIC};

/// A grayscale image with values in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
}

impl Patch {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidPatch("zero-sized patch".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidPatch(format!(
                "{} pixels for a {width}x{height} patch",
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidPatch(format!(
                "pixel {i} has value {} outside [0, 1]",
                pixels[i]
            )));
        }
        Ok(Patch {
            width,
            height,
            pixels,
        })
    }

    /// Builds a patch from `f64` values, clamping each into `[0, 1]`.
    pub fn from_f64_clamped(width: usize, height: usize, values: &[f64]) -> Result<Self> {
        let pixels = values
            .iter()
            .map(|&v| v.clamp(0.0, 1.0) as f32)
            .collect();
        Patch::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64).collect()
    }
}

/// An ordered set of equally sized patches with optional image-level labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchCorpus {
    patches: Vec<Patch>,
    class_labels: Option<Vec<u16>>,
    class_names: Vec<String>,
}

impl PatchCorpus {
    pub fn new(
        patches: Vec<Patch>,
        class_labels: Option<Vec<u16>>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if let Some(first) = patches.first() {
            if let Some(i) = patches
                .iter()
                .position(|p| p.width != first.width || p.height != first.height)
            {
                return Err(Error::Shape(format!(
                    "patch {i} is {}x{}, corpus patches are {}x{}",
                    patches[i].width, patches[i].height, first.width, first.height
                )));
            }
        }
        if let Some(labels) = &class_labels {
            if labels.len() != patches.len() {
                return Err(Error::Shape(format!(
                    "{} class labels for {} patches",
                    labels.len(),
                    patches.len()
                )));
            }
            let n = class_names.len();
            if let Some(i) = labels.iter().position(|&l| l == 0 || l as usize > n) {
                return Err(Error::InvalidArgument(format!(
                    "class label {} of patch {i} outside 1..={n}",
                    labels[i]
                )));
            }
        }
        Ok(PatchCorpus {
            patches,
            class_labels,
            class_names,
        })
    }

    pub fn unlabeled(patches: Vec<Patch>) -> Result<Self> {
        PatchCorpus::new(patches, None, Vec::new())
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn class_labels(&self) -> Option<&[u16]> {
        self.class_labels.as_deref()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// `(width, height)` of the patches, `None` for an empty corpus.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.patches.first().map(|p| (p.width, p.height))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        format::write_file(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&format::read_file(path)?)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (w, h) = self.dims().unwrap_or((0, 0));
        let n_classes = if self.class_labels.is_some() {
            self.class_names.len()
        } else {
            0
        };
        let header = Header {
            magic: CORPUS_MAGIC,
            count: format::to_u32(self.patches.len(), "patch count")?,
            width: format::to_u32(w, "width")?,
            height: format::to_u32(h, "height")?,
            n_classes: format::to_u32(n_classes, "class count")?,
        };
        let payload: Vec<f32> = self
            .patches
            .iter()
            .flat_map(|p| p.pixels.iter().copied())
            .collect();
        let trailer = encode_names(&self.class_names);
        format::encode(&header, self.class_labels.as_deref(), &payload, &trailer)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let c = format::decode::<f32>(bytes, CORPUS_MAGIC)?;
        let (w, h) = (c.header.width as usize, c.header.height as usize);
        let payload_end = bytes.len() - c.trailer.len();
        let class_names = decode_names(&c.trailer, payload_end as u64)?;
        let class_names = match (class_names, c.header.n_classes) {
            (Some(names), n) if n > 0 && names.len() != n as usize => {
                return Err(Error::Format {
                    offset: payload_end as u64,
                    message: format!("{} class names for {n} classes", names.len()),
                })
            }
            (Some(names), _) => names,
            (None, n) => default_class_names(n as usize),
        };
        let record = w * h;
        let mut patches = Vec::with_capacity(c.header.count as usize);
        for (i, chunk) in c.payload.chunks(record.max(1)).enumerate() {
            let patch = Patch::new(w, h, chunk.to_vec()).map_err(|e| Error::Format {
                offset: (payload_end - (c.payload.len() - i * record) * 4) as u64,
                message: format!("patch {i}: {e}"),
            })?;
            patches.push(patch);
        }
        PatchCorpus::new(patches, c.labels, class_names)
    }
}

pub fn default_class_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("class_{i}")).collect()
}

fn encode_names(names: &[String]) -> Vec<u8> {
    if names.is_empty() {
        return Vec::new();
    }
    let joined = names.join("\n");
    let mut out = Vec::with_capacity(8 + joined.len());
    out.extend_from_slice(&NAMES_MAGIC);
    out.extend_from_slice(&(joined.len() as u32).to_le_bytes());
    out.extend_from_slice(joined.as_bytes());
    out
}

fn decode_names(trailer: &[u8], offset: u64) -> Result<Option<Vec<String>>> {
    if trailer.is_empty() {
        return Ok(None);
    }
    let bad = |message: &str| Error::Format {
        offset,
        message: message.to_string(),
    };
    if trailer.len() < 8 || trailer[..4] != NAMES_MAGIC {
        return Err(bad("unexpected bytes after payload"));
    }
    let len = u32::from_le_bytes([trailer[4], trailer[5], trailer[6], trailer[7]]) as usize;
    if trailer.len() != 8 + len {
        return Err(bad("class-name trailer length mismatch"));
    }
    let text = std::str::from_utf8(&trailer[8..]).map_err(|_| bad("class names are not UTF-8"))?;
    Ok(Some(text.split('\n').map(str::to_string).collect()))
}

/// Per-pixel label images (ground truth or predictions), persisted as `SLM1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    pub width: usize,
    pub height: usize,
    pub n_classes: usize,
    /// Image-level class of each mask, present when `n_classes > 0`.
    pub image_labels: Option<Vec<u16>>,
    pub masks: Vec<Vec<u8>>,
}

impl MaskSet {
    pub fn new(
        width: usize,
        height: usize,
        n_classes: usize,
        image_labels: Option<Vec<u16>>,
        masks: Vec<Vec<u8>>,
    ) -> Result<Self> {
        if let Some(i) = masks.iter().position(|m| m.len() != width * height) {
            return Err(Error::Shape(format!(
                "mask {i} has {} pixels, expected {}",
                masks[i].len(),
                width * height
            )));
        }
        if let Some(i) = masks
            .iter()
            .position(|m| m.iter().any(|&v| v as usize > n_classes))
        {
            return Err(Error::InvalidArgument(format!(
                "mask {i} holds a label above {n_classes}"
            )));
        }
        if let Some(l) = &image_labels {
            if l.len() != masks.len() {
                return Err(Error::Shape(format!(
                    "{} image labels for {} masks",
                    l.len(),
                    masks.len()
                )));
            }
        }
        Ok(MaskSet {
            width,
            height,
            n_classes,
            image_labels,
            masks,
        })
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let n_classes = if self.image_labels.is_some() {
            self.n_classes
        } else {
            0
        };
        let header = Header {
            magic: MASK_MAGIC,
            count: format::to_u32(self.masks.len(), "mask count")?,
            width: format::to_u32(self.width, "width")?,
            height: format::to_u32(self.height, "height")?,
            n_classes: format::to_u32(n_classes, "class count")?,
        };
        let payload: Vec<u8> = self.masks.iter().flatten().copied().collect();
        format::encode(&header, self.image_labels.as_deref(), &payload, &[])
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let c = format::decode::<u8>(bytes, MASK_MAGIC)?;
        if !c.trailer.is_empty() {
            return Err(Error::Format {
                offset: (bytes.len() - c.trailer.len()) as u64,
                message: "unexpected bytes after payload".into(),
            });
        }
        let (w, h) = (c.header.width as usize, c.header.height as usize);
        let masks: Vec<Vec<u8>> = if w * h == 0 {
            vec![Vec::new(); c.header.count as usize]
        } else {
            c.payload.chunks(w * h).map(<[u8]>::to_vec).collect()
        };
        let n_classes = match c.header.n_classes {
            0 => masks
                .iter()
                .flat_map(|m| m.iter())
                .copied()
                .max()
                .unwrap_or(0) as usize,
            n => n as usize,
        };
        MaskSet::new(w, h, n_classes, c.labels, masks)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        format::write_file(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&format::read_file(path)?)
    }
}

/// A 3D grid of amplitudes; depth is the fastest-varying axis.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterVolume {
    pub n_inline: usize,
    pub n_crossline: usize,
    pub n_depth: usize,
    samples: Vec<f64>,
}

impl RasterVolume {
    pub fn new(
        n_inline: usize,
        n_crossline: usize,
        n_depth: usize,
        samples: Vec<f64>,
    ) -> Result<Self> {
        if samples.len() != n_inline * n_crossline * n_depth {
            return Err(Error::Shape(format!(
                "{} samples for a {n_inline}x{n_crossline}x{n_depth} volume",
                samples.len()
            )));
        }
        Ok(RasterVolume {
            n_inline,
            n_crossline,
            n_depth,
            samples,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn get(&self, inline: usize, crossline: usize, depth: usize) -> f64 {
        self.samples[(inline * self.n_crossline + crossline) * self.n_depth + depth]
    }
}

/// Affine rescale of a volume onto `[0, 1]`.
pub fn normalize_volume(volume: &RasterVolume) -> Result<RasterVolume> {
    if volume.samples.is_empty() {
        return Err(Error::Degenerate("empty volume".into()));
    }
    let (lo, hi) = volume
        .samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        });
    if !(hi > lo) {
        return Err(Error::Degenerate(format!(
            "volume range is empty (min {lo}, max {hi})"
        )));
    }
    let span = hi - lo;
    let samples = volume
        .samples
        .iter()
        .map(|&s| ((s - lo) / span).clamp(0.0, 1.0))
        .collect();
    RasterVolume::new(volume.n_inline, volume.n_crossline, volume.n_depth, samples)
}

/// Planar section a patch is cut from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    /// Fixed inline: rows run along depth, columns along crossline.
    Inline(usize),
    /// Fixed crossline: rows run along depth, columns along inline.
    Crossline(usize),
    /// Fixed depth: rows run along inline, columns along crossline.
    Depth(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchLocation {
    pub section: Section,
    pub row: usize,
    pub col: usize,
}

/// Draws `count` patch placements of `size x size` pixels.
///
/// Vertical sections (inline and crossline) are used whenever at least one of
/// them can hold the patch; horizontal depth slices are a fallback for
/// volumes too shallow for vertical sections.
pub fn sample_locations(
    dims: (usize, usize, usize),
    count: usize,
    size: usize,
    seed: u64,
) -> Result<Vec<PatchLocation>> {
    let (ni, nx, nd) = dims;
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    if size == 0 {
        return Err(Error::InvalidArgument("size must be at least 1".into()));
    }
    // (kind, n_sections, rows, cols)
    let mut kinds: Vec<(u8, usize, usize, usize)> = Vec::new();
    if size <= nd && size <= nx && ni > 0 {
        kinds.push((0, ni, nd, nx));
    }
    if size <= nd && size <= ni && nx > 0 {
        kinds.push((1, nx, nd, ni));
    }
    if kinds.is_empty() && size <= ni && size <= nx && nd > 0 {
        kinds.push((2, nd, ni, nx));
    }
    if kinds.is_empty() {
        return Err(Error::OutOfBounds(format!(
            "a {size}x{size} patch does not fit any section of a {ni}x{nx}x{nd} volume"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let (kind, n, rows, cols) = kinds[rng.random_range(0..kinds.len())];
            let idx = rng.random_range(0..n);
            let row = rng.random_range(0..=rows - size);
            let col = rng.random_range(0..=cols - size);
            let section = match kind {
                0 => Section::Inline(idx),
                1 => Section::Crossline(idx),
                _ => Section::Depth(idx),
            };
            PatchLocation { section, row, col }
        })
        .collect())
}

/// Cuts `count` random `size x size` patches out of a `[0, 1]`-valued volume.
pub fn sample_patches(
    volume: &RasterVolume,
    count: usize,
    size: usize,
    seed: u64,
) -> Result<PatchCorpus> {
    let dims = (volume.n_inline, volume.n_crossline, volume.n_depth);
    let locations = sample_locations(dims, count, size, seed)?;
    let patches = locations
        .iter()
        .map(|loc| {
            let mut px = Vec::with_capacity(size * size);
            for r in loc.row..loc.row + size {
                for c in loc.col..loc.col + size {
                    let v = match loc.section {
                        Section::Inline(i) => volume.get(i, c, r),
                        Section::Crossline(x) => volume.get(c, x, r),
                        Section::Depth(d) => volume.get(r, c, d),
                    };
                    px.push(v as f32);
                }
            }
            Patch::new(size, size, px)
        })
        .collect::<Result<Vec<_>>>()?;
    PatchCorpus::unlabeled(patches)
}

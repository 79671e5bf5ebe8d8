use serde::{Deserialize, Serialize};

use super::{Dataset, Source};
use crate::error::{Error, Result};
use crate::linalg::{RngStream, Tensor};

const ZETA_STREAM: u64 = 0x7a65_7461;

/// How the class offset ζ_i is laid out over the patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ZetaShape {
    /// One value per pixel: ζ_i is a fixed pattern in `[−0.1, 0.1]^{p²}`.
    #[default]
    PerPixel,
    /// One value per class: the patch is constant within an image.
    Scalar,
}

fn d_side() -> usize {
    16
}
fn d_patch() -> usize {
    7
}
fn d_z_std() -> f64 {
    1.25
}
fn d_scale() -> f64 {
    1.75
}
fn d_fractions() -> [f64; 3] {
    [0.20, 0.16, 0.64]
}

/// Recipe for patch-augmented images. `fractions` are the shares of
/// patch-free, patch-only and mixed images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchSpec {
    #[serde(default = "d_side")]
    pub image_side: usize,
    #[serde(default = "d_patch")]
    pub patch_side: usize,
    #[serde(default = "d_z_std")]
    pub z_std: f64,
    #[serde(default = "d_scale")]
    pub patch_only_scale: f64,
    #[serde(default = "d_fractions")]
    pub fractions: [f64; 3],
    #[serde(default)]
    pub zeta_shape: ZetaShape,
    /// Seed of the class offsets, shared by train and test sets.
    #[serde(default)]
    pub zeta_seed: u64,
}

impl Default for PatchSpec {
    fn default() -> Self {
        Self {
            image_side: d_side(),
            patch_side: d_patch(),
            z_std: d_z_std(),
            patch_only_scale: d_scale(),
            fractions: d_fractions(),
            zeta_shape: ZetaShape::default(),
            zeta_seed: 0,
        }
    }
}

impl PatchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.patch_side == 0 || self.image_side < self.patch_side {
            return Err(Error::Domain(format!(
                "patch of side {} does not fit a {}-pixel image",
                self.patch_side, self.image_side
            )));
        }
        if self.fractions.iter().any(|f| !(0.0..=1.0).contains(f))
            || (self.fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::Domain(format!("fractions {:?} must be in [0, 1] and sum to 1", self.fractions)));
        }
        if !(self.z_std >= 0.0) {
            return Err(Error::Domain(format!("z std must be nonnegative, got {}", self.z_std)));
        }
        Ok(())
    }

    /// Exact image counts `(free, only, mixed)` for `n` images.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        let free = (n as f64 * self.fractions[0]).round() as usize;
        let only = ((n as f64 * self.fractions[1]).round() as usize).min(n - free);
        (free, only, n - free - only)
    }

    /// Class offsets ζ_i, each of length `p²`.
    pub fn zetas(&self, classes: usize) -> Vec<Vec<f64>> {
        let mut rng = RngStream::new(self.zeta_seed, ZETA_STREAM);
        let p2 = self.patch_side * self.patch_side;
        (0..classes)
            .map(|_| match self.zeta_shape {
                ZetaShape::PerPixel => (0..p2).map(|_| rng.uniform_range(-0.1, 0.1)).collect(),
                ZetaShape::Scalar => vec![rng.uniform_range(-0.1, 0.1); p2],
            })
            .collect()
    }

    /// Flat pixel indices of the centered patch, row-major.
    pub fn patch_pixels(&self) -> Vec<usize> {
        let off = (self.image_side - self.patch_side) / 2;
        let mut out = Vec::with_capacity(self.patch_side * self.patch_side);
        for r in 0..self.patch_side {
            for c in 0..self.patch_side {
                out.push((off + r) * self.image_side + off + c);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchKind {
    Free,
    Only,
    Mixed,
}

/// Random draws behind one image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchMeta {
    pub kind: PatchKind,
    pub z: f64,
    pub a: f64,
    /// +1 or −1.
    pub sign: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchDataset {
    pub dataset: Dataset,
    pub meta: Vec<PatchMeta>,
    pub zetas: Vec<Vec<f64>>,
}

impl PatchDataset {
    /// Row indices of one kind.
    pub fn indices(&self, kind: PatchKind) -> Vec<usize> {
        (0..self.meta.len()).filter(|&i| self.meta[i].kind == kind).collect()
    }
}

/// Builds `n` images: the first `round(n·f_free)` are base images unchanged,
/// the next `round(n·f_only)` are blank with `z ± s·a·ζ_i` in the patch
/// (`s` the patch-only scale, label uniform), the rest are base images with
/// `z ± ζ_i` added to the patch. `z`, `a` and the sign are drawn per image.
/// Base images are consumed in order.
pub fn gen_patch_dataset(spec: &PatchSpec, base: Option<&Dataset>, n: usize, rng: &mut RngStream) -> Result<PatchDataset> {
    spec.validate()?;
    let (free, only, mixed) = spec.counts(n);
    let side2 = spec.image_side * spec.image_side;
    let classes = match base {
        Some(b) => {
            if b.dim() != side2 {
                return Err(Error::Shape(format!("base images have {} pixels, expected {side2}", b.dim())));
            }
            if b.len() < free + mixed {
                return Err(Error::Domain(format!("need {} base images, got {}", free + mixed, b.len())));
            }
            b.classes()
        }
        None if free + mixed > 0 => {
            return Err(Error::Domain("patch-free and mixed images need base images".into()));
        }
        None => 10,
    };
    let zetas = spec.zetas(classes);
    let pixels = spec.patch_pixels();
    let mut data = vec![0.0; n * side2];
    let mut labels = Vec::with_capacity(n);
    let mut meta = Vec::with_capacity(n);
    let mut next_base = 0;
    for i in 0..n {
        let kind = if i < free {
            PatchKind::Free
        } else if i < free + only {
            PatchKind::Only
        } else {
            PatchKind::Mixed
        };
        let row = &mut data[i * side2..(i + 1) * side2];
        let (z, a, sign) = (spec.z_std * rng.standard_normal(), rng.uniform(), if rng.bernoulli(0.5) { 1.0 } else { -1.0 });
        let label = match kind {
            PatchKind::Only => {
                let label = rng.below(classes);
                let amp = sign * spec.patch_only_scale * a;
                for (q, &px) in pixels.iter().enumerate() {
                    row[px] = z + amp * zetas[label][q];
                }
                label
            }
            PatchKind::Free | PatchKind::Mixed => {
                let b = base.expect("checked above");
                row.copy_from_slice(b.inputs().row(next_base));
                let label = b.labels()[next_base];
                next_base += 1;
                if kind == PatchKind::Mixed {
                    for (q, &px) in pixels.iter().enumerate() {
                        row[px] += z + sign * zetas[label][q];
                    }
                }
                label
            }
        };
        labels.push(label);
        meta.push(PatchMeta { kind, z, a, sign });
    }
    let dataset = Dataset::new(Tensor::new(vec![n, side2], data)?, labels, classes, Source::Patch)?
        .with_image_shape(1, spec.image_side, spec.image_side)?;
    Ok(PatchDataset { dataset, meta, zetas })
}

/// Two-class single-channel `side × side` images made of a few smooth
/// anisotropic bumps: elongated horizontally for class 0, vertically for
/// class 1, plus i.i.d. pixel noise.
pub fn gen_blob_images(n: usize, side: usize, bumps: usize, noise_std: f64, rng: &mut RngStream) -> Result<Dataset> {
    if n == 0 || side == 0 || bumps == 0 {
        return Err(Error::Domain("need at least one image, pixel and bump".into()));
    }
    if !(noise_std >= 0.0) {
        return Err(Error::Domain(format!("noise std must be nonnegative, got {noise_std}")));
    }
    let s = side as f64;
    let mut data = vec![0.0; n * side * side];
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = rng.below(2);
        let row = &mut data[i * side * side..(i + 1) * side * side];
        for _ in 0..bumps {
            let (cx, cy) = (rng.uniform_range(0.2 * s, 0.8 * s), rng.uniform_range(0.2 * s, 0.8 * s));
            let amp = rng.uniform_range(0.5, 1.0);
            let (long, short) = (rng.uniform_range(0.2, 0.35) * s, rng.uniform_range(0.06, 0.1) * s);
            let (sx, sy) = if label == 0 { (long, short) } else { (short, long) };
            for y in 0..side {
                for x in 0..side {
                    let dx = (x as f64 - cx) / sx;
                    let dy = (y as f64 - cy) / sy;
                    row[y * side + x] += amp * (-0.5 * (dx * dx + dy * dy)).exp();
                }
            }
        }
        if noise_std > 0.0 {
            row.iter_mut().for_each(|v| *v += noise_std * rng.standard_normal());
        }
        labels.push(label);
    }
    Dataset::new(Tensor::new(vec![n, side * side], data)?, labels, 2, Source::Synthetic)?.with_image_shape(1, side, side)
}

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ImageDataset;
use crate::error::Result;
use crate::tensor::Tensor;

/// Knobs of the four-op augmentation family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentPolicy {
    /// Smallest crop area as a fraction of the image, in `(0, 1]`.
    pub min_crop_area: f64,
    pub flip: bool,
    pub noise_sigma: f64,
    /// Per-channel brightness offset drawn from `±jitter`.
    pub jitter: f64,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self {
            min_crop_area: 0.6,
            flip: true,
            noise_sigma: 0.02,
            jitter: 0.2,
        }
    }
}

impl AugmentPolicy {
    /// Every op degenerates to the identity.
    pub fn identity() -> Self {
        Self {
            min_crop_area: 1.0,
            flip: false,
            noise_sigma: 0.0,
            jitter: 0.0,
        }
    }
}

/// Two augmented views of the same source images.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPair {
    pub view_a: Tensor,
    pub view_b: Tensor,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
enum AugOp {
    CropResize,
    Flip,
    Noise,
    Jitter,
}

const OPS: [AugOp; 4] = [AugOp::CropResize, AugOp::Flip, AugOp::Noise, AugOp::Jitter];

/// Augments every image of the dataset twice.
pub fn augment(dataset: &ImageDataset, policy: &AugmentPolicy, seed: u64) -> Result<AugmentedPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices: Vec<usize> = (0..dataset.len()).collect();
    augment_batch(dataset.images(), &indices, policy, &mut rng)
}

/// Builds both views for the images at `indices`. Each view applies two
/// distinct ops drawn at random from crop-and-resize, horizontal flip,
/// additive Gaussian noise and per-channel brightness jitter.
pub fn augment_batch(
    images: &Tensor,
    indices: &[usize],
    policy: &AugmentPolicy,
    rng: &mut impl Rng,
) -> Result<AugmentedPair> {
    let src = images.select_rows(indices)?;
    let shape = src.shape().to_vec();
    let (c, h, w) = (shape[1], shape[2], shape[3]);
    let mut a = Vec::with_capacity(src.len());
    let mut b = Vec::with_capacity(src.len());
    for i in 0..indices.len() {
        let img = src.row(i);
        a.extend(augment_one(img, c, h, w, policy, rng));
        b.extend(augment_one(img, c, h, w, policy, rng));
    }
    Ok(AugmentedPair {
        view_a: Tensor::new(shape.clone(), a)?,
        view_b: Tensor::new(shape, b)?,
        indices: indices.to_vec(),
    })
}

fn augment_one(
    img: &[f64],
    c: usize,
    h: usize,
    w: usize,
    policy: &AugmentPolicy,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let mut out = img.to_vec();
    for k in index::sample(rng, OPS.len(), 2) {
        out = match OPS[k] {
            AugOp::CropResize => crop_resize(&out, c, h, w, policy.min_crop_area, rng),
            AugOp::Flip if policy.flip => flip(&out, c, h, w),
            AugOp::Flip => out,
            AugOp::Noise if policy.noise_sigma > 0.0 => {
                let normal = Normal::new(0.0, policy.noise_sigma).expect("positive sigma");
                out.into_iter().map(|v| v + normal.sample(rng)).collect()
            }
            AugOp::Noise => out,
            AugOp::Jitter if policy.jitter > 0.0 => {
                let plane = h * w;
                let offsets: Vec<f64> = (0..c).map(|_| rng.random_range(-policy.jitter..=policy.jitter)).collect();
                out.iter().enumerate().map(|(i, v)| v + offsets[i / plane]).collect()
            }
            AugOp::Jitter => out,
        };
    }
    out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    out
}

/// Square crop covering a random area fraction, resized back with
/// nearest-neighbor sampling.
fn crop_resize(img: &[f64], c: usize, h: usize, w: usize, min_area: f64, rng: &mut impl Rng) -> Vec<f64> {
    let min_area = min_area.clamp(f64::MIN_POSITIVE, 1.0);
    let area = if min_area < 1.0 {
        rng.random_range(min_area..=1.0)
    } else {
        1.0
    };
    let scale = area.sqrt();
    let ch = ((h as f64 * scale).round() as usize).clamp(1, h);
    let cw = ((w as f64 * scale).round() as usize).clamp(1, w);
    let oy = if ch < h { rng.random_range(0..=h - ch) } else { 0 };
    let ox = if cw < w { rng.random_range(0..=w - cw) } else { 0 };
    let mut out = Vec::with_capacity(img.len());
    for ch_i in 0..c {
        for y in 0..h {
            let sy = oy + y * ch / h;
            for x in 0..w {
                let sx = ox + x * cw / w;
                out.push(img[(ch_i * h + sy) * w + sx]);
            }
        }
    }
    out
}

fn flip(img: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(img.len());
    for row in img.chunks(w).take(c * h) {
        out.extend(row.iter().rev());
    }
    out
}

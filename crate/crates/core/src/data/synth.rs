use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ImageDataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Peak-to-peak amplitude of the per-cluster gradient texture.
pub const TEXTURE_AMPLITUDE: f64 = 0.2;

/// Parameters of a colored-texture blob dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_clusters: usize,
    pub images_per_cluster: usize,
    pub image_size: usize,
    pub color_centers: Vec<[f64; 3]>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Spec with the default well-separated palette.
    pub fn new(num_clusters: usize, images_per_cluster: usize, image_size: usize, noise_sigma: f64, seed: u64) -> Self {
        Self {
            num_clusters,
            images_per_cluster,
            image_size,
            color_centers: default_palette(num_clusters),
            noise_sigma,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_clusters < 2 {
            return Err(Error::Validation(format!(
                "num_clusters must be at least 2, got {}",
                self.num_clusters
            )));
        }
        if self.images_per_cluster == 0 {
            return Err(Error::Validation("images_per_cluster must be positive".into()));
        }
        if self.image_size == 0 {
            return Err(Error::Validation("image_size must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Validation(format!(
                "noise_sigma must be a nonnegative real, got {}",
                self.noise_sigma
            )));
        }
        if self.color_centers.len() != self.num_clusters {
            return Err(Error::Validation(format!(
                "expected {} color centers, got {}",
                self.num_clusters,
                self.color_centers.len()
            )));
        }
        for (i, c) in self.color_centers.iter().enumerate() {
            if c.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Validation(format!("color center {i} outside [0,1]: {c:?}")));
            }
        }
        let min_sep = 4.0 * self.noise_sigma;
        for i in 0..self.num_clusters {
            for j in i + 1..self.num_clusters {
                let d = rgb_distance(&self.color_centers[i], &self.color_centers[j]);
                if d < min_sep || d == 0.0 {
                    return Err(Error::Validation(format!(
                        "color centers {i} and {j} are {d:.4} apart, need at least 4*noise_sigma = {min_sep:.4}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn num_images(&self) -> usize {
        self.num_clusters * self.images_per_cluster
    }
}

fn rgb_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Corners of the `[0.15, 0.85]³` cube for `k ≤ 8`, then a 3-level grid.
pub fn default_palette(k: usize) -> Vec<[f64; 3]> {
    const LO: f64 = 0.15;
    const HI: f64 = 0.85;
    const CORNERS: [[f64; 3]; 8] = [
        [HI, LO, LO],
        [LO, HI, LO],
        [LO, LO, HI],
        [HI, HI, LO],
        [LO, HI, HI],
        [HI, LO, HI],
        [LO, LO, LO],
        [HI, HI, HI],
    ];
    if k <= CORNERS.len() {
        return CORNERS[..k].to_vec();
    }
    let levels = [0.2, 0.5, 0.8];
    let mut out = Vec::with_capacity(k);
    'outer: for r in levels {
        for g in levels {
            for b in levels {
                if out.len() == k {
                    break 'outer;
                }
                out.push([r, g, b]);
            }
        }
    }
    out
}

/// Noise-free image of cluster `k`: color center plus its gradient texture.
pub fn cluster_template(spec: &SyntheticSpec, k: usize) -> Vec<f64> {
    let plane = spec.image_size * spec.image_size;
    (0..3 * plane)
        .map(|i| quantize(base_value(spec, k, i).clamp(0.0, 1.0)))
        .collect()
}

/// Unclamped color + texture value of flat pixel `i` (channel-major).
fn base_value(spec: &SyntheticSpec, k: usize, i: usize) -> f64 {
    let s = spec.image_size;
    let (c, pix) = (i / (s * s), i % (s * s));
    let (y, x) = (pix / s, pix % s);
    let denom = (s.max(2) - 1) as f64;
    let ramp = match k % 3 {
        0 => x as f64 / denom,
        1 => y as f64 / denom,
        _ => (x + y) as f64 / (2.0 * denom),
    };
    spec.color_centers[k][c] + TEXTURE_AMPLITUDE * (ramp - 0.5)
}

/// Rounds to the nearest `f32` so datasets survive the on-disk format.
pub(crate) fn quantize(v: f64) -> f64 {
    v as f32 as f64
}

/// Generates `K × images_per_cluster` images, laid out cluster by cluster.
pub fn generate_dataset(spec: &SyntheticSpec) -> Result<ImageDataset> {
    spec.validate()?;
    let s = spec.image_size;
    let pixels = 3 * s * s;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Validation(e.to_string()))?;
    let mut data = Vec::with_capacity(spec.num_images() * pixels);
    let mut labels = Vec::with_capacity(spec.num_images());
    for k in 0..spec.num_clusters {
        for _ in 0..spec.images_per_cluster {
            for i in 0..pixels {
                let mut v = base_value(spec, k, i);
                if spec.noise_sigma > 0.0 {
                    v += noise.sample(&mut rng);
                }
                data.push(quantize(v.clamp(0.0, 1.0)));
            }
            labels.push(k);
        }
    }
    let images = Tensor::new(vec![spec.num_images(), 3, s, s], data)?;
    ImageDataset::new(images, labels, spec.num_clusters)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_reproduces_templates() {
        let spec = SyntheticSpec::new(2, 3, 8, 0.0, 7);
        let ds = generate_dataset(&spec).unwrap();
        for (i, &label) in ds.labels().iter().enumerate() {
            assert_eq!(ds.images().row(i), cluster_template(&spec, label).as_slice());
        }
    }

    #[test]
    fn same_seed_same_bits() {
        let spec = SyntheticSpec::new(3, 4, 8, 0.05, 42);
        let a = generate_dataset(&spec).unwrap();
        let b = generate_dataset(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(&SyntheticSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn validation_names_the_violation() {
        let err = SyntheticSpec::new(1, 4, 8, 0.05, 0).validate().unwrap_err();
        assert!(err.to_string().contains("num_clusters"));

        let mut spec = SyntheticSpec::new(2, 4, 8, 0.05, 0);
        spec.color_centers = vec![[0.5, 0.5, 0.5], [0.52, 0.5, 0.5]];
        let err = spec.validate().unwrap_err();
        assert!(err.to_string().contains("4*noise_sigma"), "{err}");

        let spec = SyntheticSpec::new(2, 4, 8, -1.0, 0);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn palette_is_separated_for_many_clusters() {
        for k in 2..=27 {
            let p = default_palette(k);
            assert_eq!(p.len(), k);
            for i in 0..k {
                for j in i + 1..k {
                    assert!(rgb_distance(&p[i], &p[j]) >= 0.29);
                }
            }
        }
    }
}

//! Synthetic labeled image datasets, stochastic augmentation views and the
//! `ICG1` binary file format.

mod augment;
mod io;
mod synth;

pub use augment::{augment, augment_batch, AugmentPolicy, AugmentedPair};
pub(crate) use io::Reader;
pub use io::{decode_dataset, encode_dataset, read_dataset, read_dataset_header, write_dataset, DatasetHeader, DATASET_MAGIC};
pub use synth::{cluster_template, default_palette, generate_dataset, SyntheticSpec, TEXTURE_AMPLITUDE};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Labeled `N×C×H×W` images with pixel values in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDataset {
    images: Tensor,
    labels: Vec<usize>,
    num_clusters: usize,
}

impl ImageDataset {
    pub fn new(images: Tensor, labels: Vec<usize>, num_clusters: usize) -> Result<Self> {
        if images.shape().len() != 4 {
            return Err(Error::dim("ImageDataset", images.shape(), &[0, 0, 0, 0]));
        }
        if labels.len() != images.rows() {
            return Err(Error::Validation(format!(
                "{} labels for {} images",
                labels.len(),
                images.rows()
            )));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_clusters) {
            return Err(Error::Validation(format!(
                "label {l} of image {i} out of range for K = {num_clusters}"
            )));
        }
        Ok(Self {
            images,
            labels,
            num_clusters,
        })
    }

    pub fn images(&self) -> &Tensor {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `(C, H, W)`.
    pub fn image_shape(&self) -> (usize, usize, usize) {
        let s = self.images.shape();
        (s[1], s[2], s[3])
    }
}

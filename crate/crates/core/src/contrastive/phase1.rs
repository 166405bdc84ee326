use rand::seq::SliceRandom;
use rand::Rng;

use super::layers::{AutoEncoder, Backbone, IsmHead};
use super::losses::{
    cluster_contrastive_loss, instance_contrastive_loss, instance_reconstruction_loss, l1_total, LossReport,
};
use crate::config::{Config, Phase1Objective};
use crate::data::{augment_batch, ImageDataset};
use crate::error::{Error, Result};
use crate::optim::{check_unique_names, Adam, Parameter};
use crate::tensor::{Tape, Tensor, Var};

/// Backbone, instance head and auto-encoder trained jointly in phase 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase1Model {
    pub backbone: Backbone,
    pub ism: IsmHead,
    pub autoencoder: AutoEncoder,
}

/// Per-batch loss nodes.
pub struct Phase1Losses<'t> {
    pub cis: Var<'t>,
    pub ccs: Var<'t>,
    pub re: Var<'t>,
    pub total: Var<'t>,
}

impl Phase1Model {
    pub fn new(config: &Config, rng: &mut impl Rng) -> Result<Self> {
        let m = &config.model;
        let model = Self {
            backbone: Backbone::new(m.image_size, m.feature_dim, rng)?,
            ism: IsmHead::new(m.feature_dim, m.proj_dim, rng),
            autoencoder: AutoEncoder::new(m.feature_dim, &m.hidden, config.num_clusters, rng),
        };
        check_unique_names(model.params())?;
        Ok(model)
    }

    pub fn params(&self) -> Vec<&Parameter> {
        let mut out = self.backbone.params();
        out.extend(self.ism.params());
        out.extend(self.autoencoder.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = self.backbone.params_mut();
        out.extend(self.ism.params_mut());
        out.extend(self.autoencoder.params_mut());
        out
    }

    /// Forward both views and build every phase-1 loss.
    pub fn losses<'t>(
        &self,
        tape: &'t Tape,
        view_a: Var<'t>,
        view_b: Var<'t>,
        config: &Config,
    ) -> Result<Phase1Losses<'t>> {
        let z_a = self.backbone.forward(tape, view_a)?;
        let z_b = self.backbone.forward(tape, view_b)?;
        let bottleneck_a = *self.autoencoder.encode(tape, z_a)?.last().expect("non-empty encoder");
        let bottleneck_b = *self.autoencoder.encode(tape, z_b)?.last().expect("non-empty encoder");
        let recon_a = self.autoencoder.decode(tape, bottleneck_a)?;
        let recon_b = self.autoencoder.decode(tape, bottleneck_b)?;
        let re = instance_reconstruction_loss(z_a, z_b, recon_a, recon_b)?;
        match config.phase1.objective {
            Phase1Objective::Full => {
                let m_a = self.ism.forward(tape, z_a)?;
                let m_b = self.ism.forward(tape, z_b)?;
                let cis = instance_contrastive_loss(m_a, m_b, config.phase1.tau_i)?;
                let w_a = bottleneck_a.row_softmax()?;
                let w_b = bottleneck_b.row_softmax()?;
                let ccs = cluster_contrastive_loss(w_a, w_b, config.phase1.tau_c)?;
                let total = cis.add(ccs)?.add(re)?;
                Ok(Phase1Losses { cis, ccs, re, total })
            }
            Phase1Objective::ReconstructionOnly => {
                let zero = tape.constant(Tensor::scalar(0.0));
                Ok(Phase1Losses {
                    cis: zero,
                    ccs: zero,
                    re,
                    total: re,
                })
            }
        }
    }

    /// Backbone features of `images` with gradients off, in batches.
    pub fn extract_features(&self, images: &Tensor, batch_size: usize) -> Result<Tensor> {
        extract_features(&self.backbone, images, batch_size)
    }
}

pub fn extract_features(backbone: &Backbone, images: &Tensor, batch_size: usize) -> Result<Tensor> {
    let n = images.rows();
    let mut data = Vec::with_capacity(n * backbone.feature_dim());
    let all: Vec<usize> = (0..n).collect();
    for chunk in all.chunks(batch_size.max(1)) {
        let tape = Tape::inference();
        let x = tape.constant(images.select_rows(chunk)?);
        data.extend_from_slice(backbone.forward(&tape, x)?.value().data());
    }
    Tensor::matrix(n, backbone.feature_dim(), data)
}

fn finite(value: f64, component: &'static str, step: usize) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Divergence { component, step })
    }
}

fn divergence(err: Error, step: usize) -> Error {
    match err {
        Error::NonFinite { op } => Error::Divergence { component: op, step },
        other => other,
    }
}

/// One pass over the dataset in shuffled mini-batches with one Adam step per
/// batch. Returns the batch-mean of each loss.
pub fn train_phase1_epoch(
    model: &mut Phase1Model,
    adam: &mut Adam,
    dataset: &ImageDataset,
    config: &Config,
    epoch: usize,
    rng: &mut impl Rng,
) -> Result<LossReport> {
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(rng);
    let mut sums = [0.0; 3];
    let mut batches = 0usize;
    for batch in order.chunks(config.phase1.batch_size) {
        let step = adam.steps() as usize + 1;
        let pair = augment_batch(dataset.images(), batch, &config.phase1.augment, rng)?;
        let tape = Tape::new();
        let view_a = tape.constant(pair.view_a);
        let view_b = tape.constant(pair.view_b);
        let losses = model
            .losses(&tape, view_a, view_b, config)
            .map_err(|e| divergence(e, step))?;
        sums[0] += finite(losses.cis.value().item(), "cis_loss", step)?;
        sums[1] += finite(losses.ccs.value().item(), "ccs_loss", step)?;
        sums[2] += finite(losses.re.value().item(), "re_loss", step)?;
        let grads = tape.backward(losses.total)?;
        adam.step(model.params_mut(), &grads);
        batches += 1;
    }
    let b = batches.max(1) as f64;
    let (cis, ccs, re) = (sums[0] / b, sums[1] / b, sums[2] / b);
    Ok(LossReport {
        epoch,
        cis_loss: cis,
        ccs_loss: ccs,
        re_loss: re,
        total: l1_total(cis, ccs, re),
    })
}

use rand::Rng;

use crate::error::{Error, Result};
use crate::optim::Parameter;
use crate::tensor::{Tape, Tensor, Var};

/// Fully connected layer `x·W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl Dense {
    pub fn new(name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        Self {
            weight: Parameter::glorot(format!("{name}.w"), fan_in, fan_out, rng),
            bias: Parameter::new(format!("{name}.b"), Tensor::zeros(&[1, fan_out])),
        }
    }

    pub fn forward<'t>(&self, tape: &'t Tape, x: Var<'t>) -> Result<Var<'t>> {
        x.matmul(tape.param(&self.weight))?.add_bias(tape.param(&self.bias))
    }

    pub fn fan_out(&self) -> usize {
        self.weight.value().shape()[1]
    }

    pub fn params(&self) -> Vec<&Parameter> {
        vec![&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.weight, &mut self.bias]
    }
}

fn conv_kernel(name: &str, filters: usize, channels: usize, rng: &mut impl Rng) -> Parameter {
    let fan_in = channels * 9;
    let fan_out = filters * 9;
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..filters * channels * 9)
        .map(|_| rng.random_range(-limit..limit))
        .collect();
    Parameter::new(
        name,
        Tensor::new(vec![filters, channels, 3, 3], data).expect("positive extents"),
    )
}

/// Two conv(3×3)+ReLU+maxpool stages (3→8→16 channels) and a dense layer
/// to the feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Backbone {
    pub conv1: Parameter,
    pub conv2: Parameter,
    pub fc: Dense,
    image_size: usize,
}

impl Backbone {
    pub const CHANNELS: usize = 3;

    pub fn new(image_size: usize, feature_dim: usize, rng: &mut impl Rng) -> Result<Self> {
        let side = Self::final_side(image_size)?;
        Ok(Self {
            conv1: conv_kernel("backbone.conv1", 8, Self::CHANNELS, rng),
            conv2: conv_kernel("backbone.conv2", 16, 8, rng),
            fc: Dense::new("backbone.fc", 16 * side * side, feature_dim, rng),
            image_size,
        })
    }

    /// Spatial side after both stages, or an error when the input is too small.
    fn final_side(image_size: usize) -> Result<usize> {
        let s1 = image_size.checked_sub(2).map(|s| s / 2).unwrap_or(0);
        let s2 = s1.checked_sub(2).map(|s| s / 2).unwrap_or(0);
        if s2 == 0 {
            return Err(Error::dim("backbone", &[image_size, image_size], &[10, 10]));
        }
        Ok(s2)
    }

    pub fn image_size(&self) -> usize {
        self.image_size
    }

    pub fn feature_dim(&self) -> usize {
        self.fc.fan_out()
    }

    /// `N×3×S×S` images to `N×d` features.
    pub fn forward<'t>(&self, tape: &'t Tape, images: Var<'t>) -> Result<Var<'t>> {
        let shape = images.shape();
        let s = self.image_size;
        if shape.len() != 4 || shape[1..] != [Self::CHANNELS, s, s] {
            return Err(Error::dim("backbone", &shape, &[0, Self::CHANNELS, s, s]));
        }
        let x = images
            .conv2d(tape.param(&self.conv1), 1)?
            .relu()?
            .max_pool2()?;
        let x = x.conv2d(tape.param(&self.conv2), 1)?.relu()?.max_pool2()?;
        self.fc.forward(tape, x.flatten()?)
    }

    pub fn params(&self) -> Vec<&Parameter> {
        let mut out = vec![&self.conv1, &self.conv2];
        out.extend(self.fc.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = vec![&mut self.conv1, &mut self.conv2];
        out.extend(self.fc.params_mut());
        out
    }
}

/// Two-layer projection head `d → d → d_proj` with a ReLU between.
#[derive(Debug, Clone, PartialEq)]
pub struct IsmHead {
    pub l1: Dense,
    pub l2: Dense,
}

impl IsmHead {
    pub fn new(feature_dim: usize, proj_dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            l1: Dense::new("ism.l1", feature_dim, feature_dim, rng),
            l2: Dense::new("ism.l2", feature_dim, proj_dim, rng),
        }
    }

    pub fn forward<'t>(&self, tape: &'t Tape, z: Var<'t>) -> Result<Var<'t>> {
        let h = self.l1.forward(tape, z)?.relu()?;
        self.l2.forward(tape, h)
    }

    pub fn params(&self) -> Vec<&Parameter> {
        [self.l1.params(), self.l2.params()].concat()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = self.l1.params_mut();
        out.extend(self.l2.params_mut());
        out
    }
}

/// Mirrored MLP auto-encoder `d → hidden… → K → …hidden → d`.
///
/// Hidden layers use ReLU; the `K`-wide bottleneck and the reconstruction
/// are linear.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoEncoder {
    pub encoder: Vec<Dense>,
    pub decoder: Vec<Dense>,
}

impl AutoEncoder {
    pub fn new(input_dim: usize, hidden: &[usize], num_clusters: usize, rng: &mut impl Rng) -> Self {
        let mut widths = vec![input_dim];
        widths.extend_from_slice(hidden);
        widths.push(num_clusters);
        let encoder = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense::new(&format!("ae.enc{i}"), w[0], w[1], rng))
            .collect();
        let rev: Vec<usize> = widths.iter().rev().copied().collect();
        let decoder = rev
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense::new(&format!("ae.dec{i}"), w[0], w[1], rng))
            .collect();
        Self { encoder, decoder }
    }

    /// Encoder widths `[d, hidden…, K]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut out = vec![self.encoder[0].weight.value().shape()[0]];
        out.extend(self.encoder.iter().map(Dense::fan_out));
        out
    }

    pub fn num_layers(&self) -> usize {
        self.encoder.len()
    }

    /// Every encoder activation `H¹…Hᴸ`; the last one is the pre-softmax
    /// bottleneck.
    pub fn encode<'t>(&self, tape: &'t Tape, x: Var<'t>) -> Result<Vec<Var<'t>>> {
        let width = x.shape().get(1).copied().unwrap_or(0);
        let input = self.widths()[0];
        if x.shape().len() != 2 || width != input {
            return Err(Error::dim("encoder", &x.shape(), &[0, input]));
        }
        let last = self.encoder.len() - 1;
        let mut out = Vec::with_capacity(self.encoder.len());
        let mut h = x;
        for (i, layer) in self.encoder.iter().enumerate() {
            h = layer.forward(tape, h)?;
            if i < last {
                h = h.relu()?;
            }
            out.push(h);
        }
        Ok(out)
    }

    pub fn decode<'t>(&self, tape: &'t Tape, bottleneck: Var<'t>) -> Result<Var<'t>> {
        let last = self.decoder.len() - 1;
        let mut h = bottleneck;
        for (i, layer) in self.decoder.iter().enumerate() {
            h = layer.forward(tape, h)?;
            if i < last {
                h = h.relu()?;
            }
        }
        Ok(h)
    }

    pub fn params(&self) -> Vec<&Parameter> {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .flat_map(Dense::params)
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.encoder
            .iter_mut()
            .chain(self.decoder.iter_mut())
            .flat_map(Dense::params_mut)
            .collect()
    }
}

//! Named parameters and the Adam optimizer.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Gradients, Tensor};

/// A learnable tensor with a unique dotted name such as `mgcn.stream_a.w0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    name: String,
    value: Tensor,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        Self {
            name: name.into(),
            value,
        }
    }

    /// Glorot-uniform `fan_in×fan_out` matrix.
    pub fn glorot(name: impl Into<String>, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Self::new(name, Tensor::matrix(fan_in, fan_out, data).expect("positive extents"))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut Tensor {
        &mut self.value
    }

    pub fn set_value(&mut self, value: Tensor) -> Result<()> {
        if value.shape() != self.value.shape() {
            return Err(Error::dim("Parameter::set_value", self.value.shape(), value.shape()));
        }
        self.value = value;
        Ok(())
    }
}

/// Checks that parameter names are unique.
pub fn check_unique_names<'a>(params: impl IntoIterator<Item = &'a Parameter>) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for p in params {
        if !seen.insert(p.name()) {
            return Err(Error::Contract(format!("duplicate parameter name {}", p.name())));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Adam with bias correction. Moment buffers are keyed by parameter name.
pub struct Adam {
    config: AdamConfig,
    step: u64,
    moments: HashMap<String, Moments>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            moments: HashMap::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update of every parameter that received a gradient.
    pub fn step(&mut self, params: Vec<&mut Parameter>, grads: &Gradients) {
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for p in params {
            let Some(g) = grads.param(p.name()) else { continue };
            let len = g.len();
            let mom = self
                .moments
                .entry(p.name().to_owned())
                .or_insert_with(|| Moments {
                    m: vec![0.0; len],
                    v: vec![0.0; len],
                });
            if lr == 0.0 {
                continue;
            }
            let w = p.value_mut().data_mut();
            for i in 0..len {
                let gi = g.data()[i];
                mom.m[i] = beta1 * mom.m[i] + (1.0 - beta1) * gi;
                mom.v[i] = beta2 * mom.v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = mom.m[i] / bc1;
                let v_hat = mom.v[i] / bc2;
                w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

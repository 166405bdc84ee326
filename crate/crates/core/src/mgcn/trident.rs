use rand::Rng;

use crate::config::check_fusion;
use crate::contrastive::AutoEncoder;
use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::optim::Parameter;
use crate::tensor::{Tape, Tensor, Var};

/// Bias-free GCN weights mirroring the encoder widths.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnStream {
    pub weights: Vec<Parameter>,
}

impl GcnStream {
    /// `prefix.w0 … prefix.w{L-1}` for encoder widths `[d, …, K]`.
    pub fn new(prefix: &str, widths: &[usize], rng: &mut impl Rng) -> Self {
        let weights = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Parameter::glorot(format!("{prefix}.w{i}"), w[0], w[1], rng))
            .collect();
        Self { weights }
    }

    /// Same values under a new name prefix.
    pub fn renamed(&self, prefix: &str) -> Self {
        let weights = self
            .weights
            .iter()
            .enumerate()
            .map(|(i, p)| Parameter::new(format!("{prefix}.w{i}"), p.value().clone()))
            .collect();
        Self { weights }
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }
}

/// `Φ(adj·X·W)`, ReLU when `activate`.
pub fn gcn_layer<'t>(adj: Var<'t>, x: Var<'t>, w: Var<'t>, activate: bool) -> Result<Var<'t>> {
    let (xs, ws) = (x.shape(), w.shape());
    if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] {
        return Err(Error::dim("gcn_layer", &xs, &ws));
    }
    // Multiply through the narrower side first.
    let out = if ws[1] <= ws[0] {
        adj.matmul(x.matmul(w)?)?
    } else {
        adj.matmul(x)?.matmul(w)?
    };
    if activate {
        out.relu()
    } else {
        Ok(out)
    }
}

/// Layer-wise mixing of the two GCN streams with the encoder activation.
pub fn fuse_representations<'t>(
    g_a: Var<'t>,
    g_b: Var<'t>,
    h: Var<'t>,
    sigma: f64,
    gamma: f64,
) -> Result<(Var<'t>, Var<'t>)> {
    check_fusion(sigma, gamma)?;
    let rest = 1.0 - sigma - gamma;
    let h_part = h.scale(rest)?;
    let fused_a = g_a.scale(sigma)?.add(g_b.scale(gamma)?)?.add(h_part)?;
    let fused_b = g_b.scale(sigma)?.add(g_a.scale(gamma)?)?.add(h_part)?;
    Ok((fused_a, fused_b))
}

/// `‖Z − Ẑ‖²_F / N`.
pub fn mgcn_reconstruction_loss<'t>(z: Var<'t>, recon: Var<'t>) -> Result<Var<'t>> {
    if z.shape() != recon.shape() {
        return Err(Error::dim("mgcn_reconstruction_loss", &z.shape(), &recon.shape()));
    }
    let n = z.shape()[0] as f64;
    z.sub(recon)?.square()?.sum()?.scale(1.0 / n)
}

/// Auto-encoder plus the two GCN streams.
#[derive(Debug, Clone, PartialEq)]
pub struct Trident {
    pub autoencoder: AutoEncoder,
    pub stream_a: GcnStream,
    pub stream_b: GcnStream,
}

impl Trident {
    /// Fresh GCN streams on top of a (pre-trained) auto-encoder. With
    /// `shared_init` stream b starts as a copy of stream a.
    pub fn new(autoencoder: AutoEncoder, shared_init: bool, rng: &mut impl Rng) -> Self {
        let widths = autoencoder.widths();
        let stream_a = GcnStream::new("mgcn.stream_a", &widths, rng);
        let stream_b = if shared_init {
            stream_a.renamed("mgcn.stream_b")
        } else {
            GcnStream::new("mgcn.stream_b", &widths, rng)
        };
        Self {
            autoencoder,
            stream_a,
            stream_b,
        }
    }

    pub fn params(&self) -> Vec<&Parameter> {
        let mut out = self.autoencoder.params();
        out.extend(&self.stream_a.weights);
        out.extend(&self.stream_b.weights);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = self.autoencoder.params_mut();
        out.extend(self.stream_a.weights.iter_mut());
        out.extend(self.stream_b.weights.iter_mut());
        out
    }
}

/// Everything [`trident_forward`] produces.
pub struct TridentOutput<'t> {
    /// Encoder activations `H¹…Hᴸ`.
    pub hidden: Vec<Var<'t>>,
    pub recon: Var<'t>,
    pub gs_a: Var<'t>,
    pub gs_b: Var<'t>,
}

impl<'t> TridentOutput<'t> {
    pub fn bottleneck(&self) -> Var<'t> {
        *self.hidden.last().expect("non-empty encoder")
    }
}

/// Forward pass of the trident network on features `z_b`.
pub fn trident_forward<'t>(
    tape: &'t Tape,
    trident: &Trident,
    adj_a: &NormalizedAdjacency,
    adj_b: &NormalizedAdjacency,
    z_b: Var<'t>,
    sigma: f64,
    gamma: f64,
) -> Result<TridentOutput<'t>> {
    check_fusion(sigma, gamma)?;
    let n = z_b.shape()[0];
    for adj in [adj_a, adj_b] {
        if adj.num_nodes() != n {
            return Err(Error::dim("trident_forward", adj.matrix().shape(), &z_b.shape()));
        }
    }
    let layers = trident.stream_a.num_layers();
    if trident.stream_b.num_layers() != layers || trident.autoencoder.num_layers() != layers {
        return Err(Error::Contract("stream and encoder depths differ".into()));
    }
    let hidden = trident.autoencoder.encode(tape, z_b)?;
    let recon = trident.autoencoder.decode(tape, *hidden.last().expect("non-empty encoder"))?;

    let a = tape.constant(adj_a.matrix().clone());
    let b = tape.constant(adj_b.matrix().clone());
    let (wa, wb) = (&trident.stream_a.weights, &trident.stream_b.weights);
    let last = layers - 1;
    let mut g_a = gcn_layer(a, z_b, tape.param(&wa[0]), last > 0)?;
    let mut g_b = gcn_layer(b, z_b, tape.param(&wb[0]), last > 0)?;
    for l in 1..layers {
        let (in_a, in_b) = fuse_representations(g_a, g_b, hidden[l - 1], sigma, gamma)?;
        g_a = gcn_layer(a, in_a, tape.param(&wa[l]), l < last)?;
        g_b = gcn_layer(b, in_b, tape.param(&wb[l]), l < last)?;
    }
    Ok(TridentOutput {
        hidden,
        recon,
        gs_a: g_a.row_softmax()?,
        gs_b: g_b.row_softmax()?,
    })
}

/// Encoder bottleneck of `z_b` without gradients.
pub fn bottleneck_features(autoencoder: &AutoEncoder, z_b: &Tensor) -> Result<Tensor> {
    let tape = Tape::inference();
    let x = tape.constant(z_b.clone());
    let hs = autoencoder.encode(&tape, x)?;
    Ok((*hs.last().expect("non-empty encoder").value()).clone())
}

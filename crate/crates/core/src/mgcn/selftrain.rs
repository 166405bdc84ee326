use crate::config::Phase2Config;
use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::metrics::Partition;
use crate::optim::Adam;
use crate::tensor::{Tape, Tensor, Var};

use super::trident::{mgcn_reconstruction_loss, trident_forward, Trident};

/// `q_ij ∝ (1 + ‖h_i − μ_j‖²/t)^{−(t+1)/2}`, normalized per row.
pub fn student_t_assignment<'t>(h: Var<'t>, centers: Var<'t>, t_dof: f64) -> Result<Var<'t>> {
    if !(t_dof > 0.0) {
        return Err(Error::Config(format!("t_dof must be positive, got {t_dof}")));
    }
    h.pairwise_sq_dist(centers)?
        .scale(1.0 / t_dof)?
        .add_scalar(1.0)?
        .powf(-(t_dof + 1.0) / 2.0)?
        .row_normalize()
}

/// Gradient-free [`student_t_assignment`].
pub fn soft_assignment(h: &Tensor, centers: &Tensor, t_dof: f64) -> Result<Tensor> {
    let tape = Tape::inference();
    let q = student_t_assignment(tape.constant(h.clone()), tape.constant(centers.clone()), t_dof)?;
    Ok((*q.value()).clone())
}

/// Sharpened targets `P` and the soft frequencies `f_j = Σ_i q_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetDistribution {
    pub p: Tensor,
    pub frequencies: Vec<f64>,
}

pub fn target_distribution(q: &Tensor) -> Result<TargetDistribution> {
    let (n, k) = (q.rows(), q.cols());
    let mut f = vec![0.0; k];
    for i in 0..n {
        for (fj, &v) in f.iter_mut().zip(q.row(i)) {
            *fj += v;
        }
    }
    if let Some(cluster) = f.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::DegenerateCluster { cluster });
    }
    let mut p = q.clone();
    for i in 0..n {
        let row = p.row_mut(i);
        for (v, fj) in row.iter_mut().zip(&f) {
            *v = *v * *v / fj;
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    Ok(TargetDistribution { p, frequencies: f })
}

/// `Σ_ij p_ij ln(p_ij / r_ij)` with `0·ln 0 = 0`; `p` is a constant target.
pub fn kl_divergence<'t>(p: &Tensor, r: Var<'t>) -> Result<Var<'t>> {
    let rv = r.value();
    if p.shape() != rv.shape() {
        return Err(Error::dim("kl_divergence", p.shape(), rv.shape()));
    }
    if let Some(idx) = p.data().iter().zip(rv.data()).position(|(&pv, &rv)| pv > 0.0 && !(rv > 0.0)) {
        return Err(Error::Domain(format!(
            "target has mass at entry {idx} where the model assigns none"
        )));
    }
    let entropy_term: f64 = p.data().iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum();
    let pv = r.tape().constant(p.clone());
    // The shift only matters where p is zero, where it keeps ln finite.
    let cross = pv.mul(r.add_scalar(f64::MIN_POSITIVE)?.ln()?)?.sum()?;
    cross.scale(-1.0)?.add_scalar(entropy_term)
}

/// `re + α·cluster + β·kl_a + η·kl_b`.
pub fn l2_total(re: f64, cluster: f64, kl_a: f64, kl_b: f64, alpha: f64, beta: f64, eta: f64) -> f64 {
    re + alpha * cluster + beta * kl_a + eta * kl_b
}

/// Argmax of the averaged stream distributions, ties to the lower index.
pub fn assign_clusters(gs_a: &Tensor, gs_b: &Tensor) -> Result<Partition> {
    if gs_a.shape() != gs_b.shape() {
        return Err(Error::dim("assign_clusters", gs_a.shape(), gs_b.shape()));
    }
    let k = gs_a.cols();
    let labels = (0..gs_a.rows())
        .map(|i| {
            let mut best = (0, f64::NEG_INFINITY);
            for (j, (a, b)) in gs_a.row(i).iter().zip(gs_b.row(i)).enumerate() {
                let v = (a + b) / 2.0;
                if v > best.1 {
                    best = (j, v);
                }
            }
            best.0
        })
        .collect();
    Partition::new(labels, k)
}

/// Largest `|Σ_j x_ij − 1|` over the rows of `x`.
pub fn max_row_deviation(x: &Tensor) -> f64 {
    (0..x.rows())
        .map(|i| (x.row(i).iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Trident network with its graphs, fixed centers and phase-2 settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TridentState {
    pub trident: Trident,
    pub adj_a: NormalizedAdjacency,
    pub adj_b: NormalizedAdjacency,
    pub centers: Tensor,
    pub config: Phase2Config,
}

/// One phase-2 iteration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Phase2Report {
    pub iteration: usize,
    pub re_loss: f64,
    pub cluster_kl: f64,
    pub kl_a: f64,
    pub kl_b: f64,
    pub total: f64,
    /// Largest row-sum error over `Q`, `P` and both stream outputs.
    pub max_row_deviation: f64,
}

/// Tolerance on the row sums of `Q`, `P` and the stream outputs.
pub const ROW_SUM_TOL: f64 = 1e-9;

impl TridentState {
    pub fn new(
        trident: Trident,
        adj_a: NormalizedAdjacency,
        adj_b: NormalizedAdjacency,
        centers: Tensor,
        config: Phase2Config,
    ) -> Result<Self> {
        if adj_a.num_nodes() != adj_b.num_nodes() {
            return Err(Error::dim("TridentState", adj_a.matrix().shape(), adj_b.matrix().shape()));
        }
        let k = *trident.autoencoder.widths().last().expect("non-empty widths");
        if centers.shape() != [k, k] {
            return Err(Error::dim("TridentState centers", centers.shape(), &[k, k]));
        }
        crate::config::check_fusion(config.sigma, config.gamma)?;
        Ok(Self {
            trident,
            adj_a,
            adj_b,
            centers,
            config,
        })
    }

    /// Stream outputs `(G^s_a, G^s_b)` without gradients.
    pub fn predict(&self, z_b: &Tensor) -> Result<(Tensor, Tensor)> {
        let tape = Tape::inference();
        let out = self.forward(&tape, tape.constant(z_b.clone()))?;
        Ok(((*out.gs_a.value()).clone(), (*out.gs_b.value()).clone()))
    }

    pub fn assign(&self, z_b: &Tensor) -> Result<Partition> {
        let (a, b) = self.predict(z_b)?;
        assign_clusters(&a, &b)
    }

    pub fn forward<'t>(&self, tape: &'t Tape, z_b: Var<'t>) -> Result<super::TridentOutput<'t>> {
        trident_forward(
            tape,
            &self.trident,
            &self.adj_a,
            &self.adj_b,
            z_b,
            self.config.sigma,
            self.config.gamma,
        )
    }

    /// The four loss terms on one tape; `P` is rebuilt from the current `Q`
    /// and held constant.
    pub fn losses<'t>(&self, tape: &'t Tape, z_b: Var<'t>) -> Result<Phase2Losses<'t>> {
        self.losses_with(tape, z_b, None)
    }

    /// As [`TridentState::losses`] against a caller-supplied target `P`.
    pub fn losses_against<'t>(&self, tape: &'t Tape, z_b: Var<'t>, target: &Tensor) -> Result<Phase2Losses<'t>> {
        self.losses_with(tape, z_b, Some(target))
    }

    fn losses_with<'t>(&self, tape: &'t Tape, z_b: Var<'t>, target: Option<&Tensor>) -> Result<Phase2Losses<'t>> {
        let out = self.forward(tape, z_b)?;
        let q = student_t_assignment(out.bottleneck(), tape.constant(self.centers.clone()), self.config.t_dof)?;
        let p = match target {
            Some(p) => p.clone(),
            None => target_distribution(&q.value())?.p,
        };
        let re = mgcn_reconstruction_loss(z_b, out.recon)?;
        let cluster = kl_divergence(&p, q)?;
        let kl_a = kl_divergence(&p, out.gs_a)?;
        let kl_b = kl_divergence(&p, out.gs_b)?;
        let c = &self.config;
        let total = re
            .add(cluster.scale(c.alpha)?)?
            .add(kl_a.scale(c.beta)?)?
            .add(kl_b.scale(c.eta)?)?;
        let max_row_deviation = [&*q.value(), &p, &*out.gs_a.value(), &*out.gs_b.value()]
            .into_iter()
            .map(max_row_deviation)
            .fold(0.0, f64::max);
        Ok(Phase2Losses {
            q,
            target: p,
            re,
            cluster,
            kl_a,
            kl_b,
            total,
            max_row_deviation,
        })
    }
}

pub struct Phase2Losses<'t> {
    pub q: Var<'t>,
    pub target: Tensor,
    pub re: Var<'t>,
    pub cluster: Var<'t>,
    pub kl_a: Var<'t>,
    pub kl_b: Var<'t>,
    pub total: Var<'t>,
    pub max_row_deviation: f64,
}

/// Full-batch forward, loss and one Adam step on the auto-encoder and both
/// GCN streams.
pub fn train_phase2_iteration(
    state: &mut TridentState,
    adam: &mut Adam,
    z_b: &Tensor,
    iteration: usize,
) -> Result<Phase2Report> {
    let tape = Tape::new();
    let losses = state
        .losses(&tape, tape.constant(z_b.clone()))
        .map_err(|e| match e {
            Error::NonFinite { op } => Error::Divergence { component: op, step: iteration },
            other => other,
        })?;
    let value = |v: Var<'_>, component: &'static str| {
        let x = v.value().item();
        if x.is_finite() {
            Ok(x)
        } else {
            Err(Error::Divergence { component, step: iteration })
        }
    };
    let report = Phase2Report {
        iteration,
        re_loss: value(losses.re, "mgcn_re_loss")?,
        cluster_kl: value(losses.cluster, "cluster_kl")?,
        kl_a: value(losses.kl_a, "kl_a")?,
        kl_b: value(losses.kl_b, "kl_b")?,
        total: value(losses.total, "l2_total")?,
        max_row_deviation: losses.max_row_deviation,
    };
    let grads = tape.backward(losses.total)?;
    adam.step(state.trident.params_mut(), &grads);
    Ok(report)
}

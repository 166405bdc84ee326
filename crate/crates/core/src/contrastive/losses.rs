//! Instance-level and cluster-level contrastive losses, the cluster entropy
//! regularizer and the two-view reconstruction loss.

use crate::error::{Error, Result};
use crate::tensor::{Var, NORM_EPS};

/// Tolerance on row sums for inputs that must be row-stochastic.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// `u·v / (‖u‖‖v‖)`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::dim("cosine_similarity", &[u.len()], &[v.len()]));
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu < NORM_EPS || nv < NORM_EPS {
        return Err(Error::DegenerateRow {
            op: "cosine_similarity",
            row: usize::from(nu >= NORM_EPS),
            norm: nu.min(nv),
        });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

fn check_temperature(tau: f64, name: &str) -> Result<()> {
    if !(tau > 0.0) {
        return Err(Error::Config(format!("{name} must be positive, got {tau}")));
    }
    Ok(())
}

/// Contrast of row `i` of `a` against row `i` of `b`, averaged over both
/// views. For anchor `a_i` the denominator runs over every `j` with both
/// `exp(s(a_i, a_j)/τ)` and `exp(s(a_i, b_j)/τ)`, the `j = i` same-view term
/// included.
fn paired_contrast<'t>(a: Var<'t>, b: Var<'t>, tau: f64) -> Result<Var<'t>> {
    if a.shape() != b.shape() {
        return Err(Error::dim("paired_contrast", &a.shape(), &b.shape()));
    }
    let rows = a.shape()[0] as f64;
    let an = a.l2_normalize_rows()?;
    let bn = b.l2_normalize_rows()?;
    let s_ab = an.matmul(bn.transpose()?)?.scale(1.0 / tau)?;
    let s_aa = an.matmul(an.transpose()?)?.scale(1.0 / tau)?;
    let s_ba = s_ab.transpose()?;
    let s_bb = bn.matmul(bn.transpose()?)?.scale(1.0 / tau)?;
    let positives = s_ab.diag()?;
    let lse_a = s_aa.concat_cols(s_ab)?.row_logsumexp()?;
    let lse_b = s_bb.concat_cols(s_ba)?.row_logsumexp()?;
    // ℓ^a_i + ℓ^b_i = (lse_a_i − pos_i) + (lse_b_i − pos_i)
    let total = lse_a
        .add(lse_b)?
        .sub(positives.scale(2.0)?)?
        .sum()?;
    total.scale(1.0 / (2.0 * rows))
}

/// Instance contrastive loss over projected views `N×d_proj`.
pub fn instance_contrastive_loss<'t>(m_a: Var<'t>, m_b: Var<'t>, tau_i: f64) -> Result<Var<'t>> {
    check_temperature(tau_i, "tau_i")?;
    paired_contrast(m_a, m_b, tau_i)
}

/// `−Σ_k p_k ln p_k` of the column means of a row-stochastic `N×K` matrix.
pub fn cluster_entropy(w: Var<'_>) -> Result<Var<'_>> {
    let n = w.shape()[0] as f64;
    let p = w.sum_cols()?.scale(1.0 / n)?;
    // The shift is below f64 resolution for any normal p and makes 0·ln 0 = 0.
    p.mul(p.add_scalar(f64::MIN_POSITIVE)?.ln()?)?.sum()?.scale(-1.0)
}

fn check_row_stochastic(w: &Var<'_>, name: &str) -> Result<()> {
    let v = w.value();
    for i in 0..v.rows() {
        let s: f64 = v.row(i).iter().sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL || v.row(i).iter().any(|&x| x < 0.0) {
            return Err(Error::Contract(format!(
                "{name} row {i} is not stochastic (sum {s})"
            )));
        }
    }
    Ok(())
}

/// Cluster contrastive loss: the columns of `W^a`, `W^b` (`N×K`,
/// row-stochastic) are contrasted as cluster representations, then the
/// entropy of each view's cluster-size distribution is subtracted.
pub fn cluster_contrastive_loss<'t>(w_a: Var<'t>, w_b: Var<'t>, tau_c: f64) -> Result<Var<'t>> {
    check_temperature(tau_c, "tau_c")?;
    check_row_stochastic(&w_a, "W_a")?;
    check_row_stochastic(&w_b, "W_b")?;
    let contrast = paired_contrast(w_a.transpose()?, w_b.transpose()?, tau_c)?;
    contrast.sub(cluster_entropy(w_a)?)?.sub(cluster_entropy(w_b)?)
}

/// `(‖Z^a − Ẑ^a‖²_F + ‖Z^b − Ẑ^b‖²_F) / 2N`.
pub fn instance_reconstruction_loss<'t>(
    z_a: Var<'t>,
    z_b: Var<'t>,
    recon_a: Var<'t>,
    recon_b: Var<'t>,
) -> Result<Var<'t>> {
    let shape = z_a.shape();
    for other in [z_b, recon_a, recon_b] {
        if other.shape() != shape {
            return Err(Error::dim("instance_reconstruction_loss", &shape, &other.shape()));
        }
    }
    let n = shape[0] as f64;
    let ra = z_a.sub(recon_a)?.square()?.sum()?;
    let rb = z_b.sub(recon_b)?.square()?.sum()?;
    ra.add(rb)?.scale(1.0 / (2.0 * n))
}

/// Epoch-mean phase-1 losses.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LossReport {
    pub epoch: usize,
    pub cis_loss: f64,
    pub ccs_loss: f64,
    pub re_loss: f64,
    pub total: f64,
}

/// Unweighted sum of the three phase-1 losses.
pub fn l1_total(cis: f64, ccs: f64, re: f64) -> f64 {
    cis + ccs + re
}

//! Measurement suites. Each returns named worst-case errors so that both the
//! focused integration tests and the acceptance gate can apply thresholds.

use rand::Rng;

use icicle::config::{Config, Phase2Config};
use icicle::contrastive::{
    cluster_contrastive_loss, cluster_entropy, cosine_similarity, instance_contrastive_loss,
    instance_reconstruction_loss, l1_total, AutoEncoder, Phase1Model,
};
use icicle::graph::{heat_kernel_similarity, nearest_neighbors, normalize_adjacency, build_knn_graph, KnnGraph};
use icicle::metrics::{ari, clustering_accuracy, nmi, Partition};
use icicle::mgcn::{
    fuse_representations, gcn_layer, kl_divergence, l2_total, mgcn_reconstruction_loss, soft_assignment,
    student_t_assignment, target_distribution, Trident, TridentState,
};
use icicle::optim::Parameter;
use icicle::tensor::{grad_check, Tape, Tensor, Var};

use super::{oracle, random_tensor, rng, rows, stochastic, tensor, to_rows, Rows};

pub const FD_STEP: f64 = 1e-6;

/// `Σ y ⊙ W` for a fixed pseudo-random `W`, so a check covers the whole
/// Jacobian rather than one direction.
fn weigh(y: Var<'_>) -> icicle::Result<Var<'_>> {
    let shape = y.shape();
    let seed = shape.iter().fold(17u64, |acc, &d| acc * 31 + d as u64);
    let w = random_tensor(&mut rng(seed), &shape, -1.0, 1.0);
    y.mul(y.tape().constant(w))?.sum()
}

fn check<F>(out: &mut Vec<(&'static str, f64)>, name: &'static str, x: &Tensor, f: F)
where
    F: for<'t> Fn(Var<'t>) -> icicle::Result<Var<'t>>,
{
    let err = grad_check(f, x, FD_STEP).unwrap_or_else(|e| panic!("{name}: {e}"));
    out.push((name, err));
}

/// Every differentiable tape operation.
pub fn op_gradients() -> Vec<(&'static str, f64)> {
    let mut r = rng(101);
    let mut out = Vec::new();
    let a = random_tensor(&mut r, &[3, 4], -1.0, 1.0);
    let b = random_tensor(&mut r, &[4, 2], -1.0, 1.0);
    let c = random_tensor(&mut r, &[3, 4], -1.0, 1.0);
    let bias = random_tensor(&mut r, &[1, 4], -1.0, 1.0);
    let pos = random_tensor(&mut r, &[3, 4], 0.5, 2.0);
    let sq = random_tensor(&mut r, &[4, 4], -1.0, 1.0);
    let pts = random_tensor(&mut r, &[3, 4], -1.0, 1.0);
    let img = random_tensor(&mut r, &[2, 2, 5, 5], -1.0, 1.0);
    let ker = random_tensor(&mut r, &[3, 2, 3, 3], -1.0, 1.0);
    let pool = random_tensor(&mut r, &[1, 2, 4, 4], -1.0, 1.0);

    check(&mut out, "matmul/lhs", &a, |x| weigh(x.matmul(x.tape().constant(b.clone()))?));
    check(&mut out, "matmul/rhs", &b, |x| weigh(x.tape().constant(a.clone()).matmul(x)?));
    check(&mut out, "add", &a, |x| weigh(x.add(x.tape().constant(c.clone()))?));
    check(&mut out, "sub/lhs", &a, |x| weigh(x.sub(x.tape().constant(c.clone()))?));
    check(&mut out, "sub/rhs", &a, |x| weigh(x.tape().constant(c.clone()).sub(x)?));
    check(&mut out, "mul", &a, |x| weigh(x.mul(x.tape().constant(c.clone()))?));
    check(&mut out, "mul/self", &a, |x| weigh(x.mul(x)?));
    check(&mut out, "scale", &a, |x| weigh(x.scale(-2.5)?));
    check(&mut out, "add_scalar", &a, |x| weigh(x.add_scalar(0.7)?));
    check(&mut out, "square", &a, |x| weigh(x.square()?));
    check(&mut out, "add_bias/x", &a, |x| weigh(x.add_bias(x.tape().constant(bias.clone()))?));
    check(&mut out, "add_bias/bias", &bias, |x| weigh(x.tape().constant(a.clone()).add_bias(x)?));
    check(&mut out, "relu", &a, |x| weigh(x.relu()?));
    check(&mut out, "exp", &a, |x| weigh(x.exp()?));
    check(&mut out, "ln", &pos, |x| weigh(x.ln()?));
    check(&mut out, "powf", &pos, |x| weigh(x.powf(-1.5)?));
    check(&mut out, "sum", &a, |x| x.sum()?.scale(1.3));
    check(&mut out, "mean", &a, |x| x.mean()?.scale(1.3));
    check(&mut out, "sum_rows", &a, |x| weigh(x.sum_rows()?));
    check(&mut out, "sum_cols", &a, |x| weigh(x.sum_cols()?));
    check(&mut out, "row_softmax", &a, |x| weigh(x.row_softmax()?));
    check(&mut out, "log_row_softmax", &a, |x| weigh(x.log_row_softmax()?));
    check(&mut out, "row_logsumexp", &a, |x| weigh(x.row_logsumexp()?));
    check(&mut out, "l2_normalize_rows", &a, |x| weigh(x.l2_normalize_rows()?));
    check(&mut out, "row_normalize", &pos, |x| weigh(x.row_normalize()?));
    check(&mut out, "transpose", &a, |x| weigh(x.transpose()?));
    check(&mut out, "diag", &sq, |x| weigh(x.diag()?));
    check(&mut out, "concat_cols/lhs", &a, |x| weigh(x.concat_cols(x.tape().constant(c.clone()))?));
    check(&mut out, "concat_cols/rhs", &a, |x| weigh(x.tape().constant(c.clone()).concat_cols(x)?));
    check(&mut out, "reshape", &a, |x| weigh(x.reshape(&[2, 6])?));
    check(&mut out, "flatten", &img, |x| weigh(x.flatten()?));
    check(&mut out, "pairwise_sq_dist/lhs", &a, |x| {
        weigh(x.pairwise_sq_dist(x.tape().constant(pts.clone()))?)
    });
    check(&mut out, "pairwise_sq_dist/rhs", &pts, |x| {
        weigh(x.tape().constant(a.clone()).pairwise_sq_dist(x)?)
    });
    check(&mut out, "conv2d/input", &img, |x| weigh(x.conv2d(x.tape().constant(ker.clone()), 1)?));
    check(&mut out, "conv2d/kernel", &ker, |x| weigh(x.tape().constant(img.clone()).conv2d(x, 1)?));
    check(&mut out, "conv2d/stride2", &img, |x| weigh(x.conv2d(x.tape().constant(ker.clone()), 2)?));
    check(&mut out, "max_pool2", &pool, |x| weigh(x.max_pool2()?));
    out
}

/// Composite losses and the phase-2 building blocks.
pub fn loss_gradients() -> Vec<(&'static str, f64)> {
    let mut r = rng(202);
    let mut out = Vec::new();
    let m_a = random_tensor(&mut r, &[5, 3], -1.0, 1.0);
    let m_b = random_tensor(&mut r, &[5, 3], -1.0, 1.0);
    let logits_a = random_tensor(&mut r, &[6, 3], -1.0, 1.0);
    let logits_b = random_tensor(&mut r, &[6, 3], -1.0, 1.0);
    let z = random_tensor(&mut r, &[4, 5], -1.0, 1.0);
    let rec = random_tensor(&mut r, &[4, 5], -1.0, 1.0);
    let h = random_tensor(&mut r, &[6, 3], -1.0, 1.0);
    let mu = random_tensor(&mut r, &[3, 3], -1.0, 1.0);
    let p = tensor(&stochastic(&mut r, 6, 3));
    let adj = normalize_adjacency(&KnnGraph::from_edges(4, 1, &[(0, 1), (1, 2), (2, 3)]).unwrap());
    let w = random_tensor(&mut r, &[5, 2], -1.0, 1.0);

    check(&mut out, "instance_loss/view_a", &m_a, |x| {
        instance_contrastive_loss(x, x.tape().constant(m_b.clone()), 0.5)
    });
    check(&mut out, "instance_loss/view_b", &m_b, |x| {
        instance_contrastive_loss(x.tape().constant(m_a.clone()), x, 0.5)
    });
    check(&mut out, "cluster_loss", &logits_a, |x| {
        let wb = x.tape().constant(logits_b.clone()).row_softmax()?;
        cluster_contrastive_loss(x.row_softmax()?, wb, 1.0)
    });
    check(&mut out, "cluster_entropy", &logits_a, |x| cluster_entropy(x.row_softmax()?));
    check(&mut out, "two_view_reconstruction/recon", &rec, |x| {
        let t = x.tape();
        instance_reconstruction_loss(t.constant(z.clone()), t.constant(z.clone()), x, t.constant(z.clone()))
    });
    check(&mut out, "two_view_reconstruction/input", &z, |x| {
        let t = x.tape();
        instance_reconstruction_loss(x, t.constant(rec.clone()), t.constant(rec.clone()), t.constant(rec.clone()))
    });
    check(&mut out, "mgcn_reconstruction", &rec, |x| {
        mgcn_reconstruction_loss(x.tape().constant(z.clone()), x)
    });
    check(&mut out, "student_t/h", &h, |x| {
        weigh(student_t_assignment(x, x.tape().constant(mu.clone()), 1.0)?)
    });
    check(&mut out, "student_t/centers", &mu, |x| {
        weigh(student_t_assignment(x.tape().constant(h.clone()), x, 1.0)?)
    });
    check(&mut out, "student_t/dof3", &h, |x| {
        weigh(student_t_assignment(x, x.tape().constant(mu.clone()), 3.0)?)
    });
    check(&mut out, "kl_divergence", &logits_a, |x| kl_divergence(&p, x.row_softmax()?));
    check(&mut out, "kl_divergence/student_t", &h, |x| {
        kl_divergence(&p, student_t_assignment(x, x.tape().constant(mu.clone()), 1.0)?)
    });
    check(&mut out, "fusion", &m_a, |x| {
        let t = x.tape();
        let (fa, fb) = fuse_representations(x, t.constant(m_b.clone()), t.constant(m_b.clone()), 0.4, 0.2)?;
        weigh(fa)?.add(weigh(fb)?.scale(0.5)?)
    });
    check(&mut out, "gcn_layer/input", &z, |x| {
        let t = x.tape();
        weigh(gcn_layer(t.constant(adj.matrix().clone()), x, t.constant(w.clone()), true)?)
    });
    check(&mut out, "gcn_layer/weight", &w, |x| {
        let t = x.tape();
        weigh(gcn_layer(t.constant(adj.matrix().clone()), t.constant(z.clone()), x, false)?)
    });
    out
}

/// A scalar loss of a model, evaluated on a given tape.
pub trait ModelLoss<M> {
    fn eval<'t>(&self, model: &M, tape: &'t Tape) -> icicle::Result<Var<'t>>;
}

/// Central differences over every parameter entry of `model`.
pub fn param_gradient_error<M: Clone>(
    model: &M,
    params_mut: fn(&mut M) -> Vec<&mut Parameter>,
    loss: &impl ModelLoss<M>,
) -> f64 {
    let tape = Tape::new();
    let l = loss.eval(model, &tape).unwrap();
    let grads = tape.backward(l).unwrap();
    let value = |m: &M| {
        let tape = Tape::inference();
        loss.eval(m, &tape).unwrap().value().item()
    };
    let mut probe = model.clone();
    let names: Vec<String> = params_mut(&mut probe).iter().map(|p| p.name().to_owned()).collect();
    let mut worst: f64 = 0.0;
    for (pi, name) in names.iter().enumerate() {
        let len = params_mut(&mut probe)[pi].value().len();
        let analytic = grads.param(name).cloned();
        for e in 0..len {
            let mut plus = model.clone();
            params_mut(&mut plus)[pi].value_mut().data_mut()[e] += FD_STEP;
            let mut minus = model.clone();
            params_mut(&mut minus)[pi].value_mut().data_mut()[e] -= FD_STEP;
            let numeric = (value(&plus) - value(&minus)) / (2.0 * FD_STEP);
            let a = analytic.as_ref().map_or(0.0, |g| g.data()[e]);
            worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
        }
    }
    worst
}

/// A shrunken trident: N = 6, K = 3, widths 5 → 8 → 6 → 3.
pub fn small_trident(seed: u64) -> (TridentState, Tensor) {
    let mut r = rng(seed);
    let ae = AutoEncoder::new(5, &[8, 6], 3, &mut r);
    let z = random_tensor(&mut r, &[6, 5], -1.0, 1.0);
    let mu = random_tensor(&mut r, &[3, 3], -1.0, 1.0);
    let adj_a = normalize_adjacency(&KnnGraph::from_edges(6, 1, &[(0, 1), (2, 3), (4, 5)]).unwrap());
    let ring = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)];
    let adj_b = normalize_adjacency(&KnnGraph::from_edges(6, 2, &ring).unwrap());
    let trident = Trident::new(ae, false, &mut r);
    let state = TridentState::new(trident, adj_a, adj_b, mu, Phase2Config::default()).unwrap();
    (state, z)
}

struct Phase2Objective {
    z: Tensor,
    target: Tensor,
}

impl ModelLoss<TridentState> for Phase2Objective {
    fn eval<'t>(&self, s: &TridentState, t: &'t Tape) -> icicle::Result<Var<'t>> {
        Ok(s.losses_against(t, t.constant(self.z.clone()), &self.target)?.total)
    }
}

/// Total phase-2 loss against a target held at its unperturbed value.
pub fn trident_param_gradient() -> f64 {
    let (state, z) = small_trident(303);
    let tape = Tape::inference();
    let target = state.losses(&tape, tape.constant(z.clone())).unwrap().target;
    param_gradient_error(&state, |s| s.trident.params_mut(), &Phase2Objective { z, target })
}

/// Phase-1 configuration shrunk to widths ≤ 8 and 10×10 images.
pub fn small_phase1_config() -> Config {
    let mut c = Config::new(3);
    c.model.feature_dim = 4;
    c.model.proj_dim = 3;
    c.model.hidden = vec![8, 6];
    c.model.image_size = 10;
    c
}

struct Phase1Objective {
    view_a: Tensor,
    view_b: Tensor,
    config: Config,
}

impl ModelLoss<Phase1Model> for Phase1Objective {
    fn eval<'t>(&self, m: &Phase1Model, t: &'t Tape) -> icicle::Result<Var<'t>> {
        let (a, b) = (t.constant(self.view_a.clone()), t.constant(self.view_b.clone()));
        Ok(m.losses(t, a, b, &self.config)?.total)
    }
}

pub fn phase1_param_gradient() -> f64 {
    let config = small_phase1_config();
    let mut r = rng(404);
    let model = Phase1Model::new(&config, &mut r).unwrap();
    let view_a = random_tensor(&mut r, &[4, 3, 10, 10], 0.0, 1.0);
    let view_b = random_tensor(&mut r, &[4, 3, 10, 10], 0.0, 1.0);
    param_gradient_error(&model, |m| m.params_mut(), &Phase1Objective { view_a, view_b, config })
}

fn scalar(v: icicle::Result<Var<'_>>) -> f64 {
    v.unwrap().value().item()
}

fn max_entry_diff(a: &Rows, b: &Rows) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub const ORACLE_INSTANCES: usize = 100;

/// Worst absolute disagreement with the textbook evaluations over
/// [`ORACLE_INSTANCES`] random instances per formula.
pub fn loss_oracles() -> Vec<(&'static str, f64)> {
    let mut r = rng(505);
    let mut worst = vec![0.0f64; 13];
    let mut bump = |i: usize, e: f64| worst[i] = worst[i].max(e);
    for _ in 0..ORACLE_INSTANCES {
        let n = r.random_range(1..=6);
        let d = r.random_range(1..=8);
        let k = r.random_range(2..=3);
        let tau = r.random_range(0.2..2.0);
        let tape = Tape::inference();
        let c = |m: &Rows| tape.constant(tensor(m));

        let u = rows(&mut r, 1, d, -1.0, 1.0).remove(0);
        let v = rows(&mut r, 1, d, -1.0, 1.0).remove(0);
        bump(0, (cosine_similarity(&u, &v).unwrap() - oracle::cosine(&u, &v)).abs());

        let a = rows(&mut r, n, d, -1.0, 1.0);
        let b = rows(&mut r, n, d, -1.0, 1.0);
        let lib_cis = scalar(instance_contrastive_loss(c(&a), c(&b), tau));
        let ora_cis = oracle::instance_loss(&a, &b, tau);
        bump(1, (lib_cis - ora_cis).abs());

        let wa = stochastic(&mut r, n.max(2), k);
        let wb = stochastic(&mut r, n.max(2), k);
        bump(2, (scalar(cluster_entropy(c(&wa))) - oracle::column_entropy(&wa)).abs());
        let lib_ccs = scalar(cluster_contrastive_loss(c(&wa), c(&wb), tau));
        let ora_ccs = oracle::cluster_loss(&wa, &wb, tau);
        bump(3, (lib_ccs - ora_ccs).abs());

        let za = rows(&mut r, n, d, -1.0, 1.0);
        let zb = rows(&mut r, n, d, -1.0, 1.0);
        let ra = rows(&mut r, n, d, -1.0, 1.0);
        let rb = rows(&mut r, n, d, -1.0, 1.0);
        let lib_re = scalar(instance_reconstruction_loss(c(&za), c(&zb), c(&ra), c(&rb)));
        let ora_re = oracle::two_view_reconstruction(&za, &zb, &ra, &rb);
        bump(4, (lib_re - ora_re).abs());
        bump(5, (l1_total(lib_cis, lib_ccs, lib_re) - (ora_cis + ora_ccs + ora_re)).abs());

        let t = r.random_range(0.1..5.0);
        bump(6, (heat_kernel_similarity(&u, &v, t).unwrap() - oracle::heat_kernel(&u, &v, t)).abs());
        bump(7, (scalar(mgcn_reconstruction_loss(c(&za), c(&ra))) - oracle::single_view_reconstruction(&za, &ra)).abs());

        let h = rows(&mut r, n, k, -2.0, 2.0);
        let mu = rows(&mut r, k, k, -2.0, 2.0);
        let dof = r.random_range(0.5..3.0);
        let q = to_rows(&soft_assignment(&tensor(&h), &tensor(&mu), dof).unwrap());
        bump(8, max_entry_diff(&q, &oracle::student_t(&h, &mu, dof)));
        let p = to_rows(&target_distribution(&tensor(&q)).unwrap().p);
        bump(9, max_entry_diff(&p, &oracle::target(&q)));

        let pr = stochastic(&mut r, n, k);
        let rr = stochastic(&mut r, n, k);
        bump(10, (scalar(kl_divergence(&tensor(&pr), c(&rr))) - oracle::kl(&pr, &rr)).abs());

        let w: Vec<f64> = (0..7).map(|_| r.random_range(0.0..1.0)).collect();
        let lib = l2_total(w[0], w[1], w[2], w[3], w[4], w[5], w[6]);
        bump(11, (lib - (w[0] + w[4] * w[1] + w[5] * w[2] + w[6] * w[3])).abs());
    }
    // Assembled phase-2 objective against the oracle formulas applied to
    // the network outputs.
    for seed in 0..ORACLE_INSTANCES as u64 {
        let (state, z) = small_trident(seed);
        let tape = Tape::inference();
        let zv = tape.constant(z.clone());
        let out = state.forward(&tape, zv).unwrap();
        let losses = state.losses(&tape, zv).unwrap();
        let q = oracle::student_t(&to_rows(&out.bottleneck().value()), &to_rows(&state.centers), state.config.t_dof);
        let p = oracle::target(&q);
        let re = oracle::single_view_reconstruction(&to_rows(&z), &to_rows(&out.recon.value()));
        let c = &state.config;
        let want = re
            + c.alpha * oracle::kl(&p, &q)
            + c.beta * oracle::kl(&p, &to_rows(&out.gs_a.value()))
            + c.eta * oracle::kl(&p, &to_rows(&out.gs_b.value()));
        worst[12] = worst[12].max((losses.total.value().item() - want).abs());
    }
    let names = [
        "cosine similarity",
        "instance contrastive loss",
        "cluster entropy",
        "cluster contrastive loss",
        "two-view reconstruction",
        "phase-1 total",
        "heat kernel",
        "phase-2 reconstruction",
        "student-t assignment",
        "target distribution",
        "kl divergence",
        "phase-2 weighted total",
        "phase-2 assembled objective",
    ];
    names.into_iter().zip(worst).collect()
}

/// Pinned reference points as `(name, library value, reference, tolerance)`.
pub fn pinned_values() -> Vec<(&'static str, f64, f64, f64)> {
    let tape = Tape::inference();
    let m = tape.constant(Tensor::from_rows(&[[0.6, 0.8]]).unwrap());
    let ln2 = scalar(instance_contrastive_loss(m, m, 0.5));
    let eye = tape.constant(Tensor::eye(2));
    let ccs = scalar(cluster_contrastive_loss(eye, eye, 1.0));
    let e = std::f64::consts::E;
    let closed_form = (2.0 + 2.0 / e).ln() - 2.0 * 2f64.ln();
    let q = soft_assignment(
        &Tensor::from_rows(&[[0.0, 0.0]]).unwrap(),
        &Tensor::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap(),
        1.0,
    )
    .unwrap();
    let t = Partition::from_labels(vec![0, 0, 1, 1]);
    let p = Partition::from_labels(vec![0, 1, 0, 1]);
    vec![
        ("instance loss, N = 1", ln2, std::f64::consts::LN_2, 1e-9),
        ("cluster loss, identity, closed form", ccs, closed_form, 1e-9),
        // The quoted figure carries five decimals; the exact value is -0.3798855.
        ("cluster loss, identity, quoted -0.37993", ccs, -0.37993, 5e-5),
        ("student-t q_00", q.at(0, 0), 2.0 / 3.0, 1e-9),
        ("student-t q_01", q.at(0, 1), 1.0 / 3.0, 1e-9),
        ("ari of crossed halves", ari(&t, &p).unwrap(), -0.5, 1e-9),
    ]
}

pub struct GraphReport {
    pub normalization_error: f64,
    pub asymmetry: f64,
    pub path_error: f64,
    pub knn_mismatches: usize,
    pub cases: usize,
}

/// Random graphs with N ≤ 20 against the entrywise formula, and random point
/// sets with N ≤ 15 against exhaustive neighbour search.
pub fn graph_checks() -> GraphReport {
    let mut r = rng(606);
    let mut report = GraphReport {
        normalization_error: 0.0,
        asymmetry: 0.0,
        path_error: 0.0,
        knn_mismatches: 0,
        cases: 0,
    };
    for _ in 0..100 {
        let n = r.random_range(1..=20);
        let density = r.random_range(0.0..0.6);
        let mut adj = vec![vec![false; n]; n];
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if r.random_bool(density) {
                    adj[i][j] = true;
                    adj[j][i] = true;
                    edges.push((i, j));
                }
            }
        }
        let lib = normalize_adjacency(&KnnGraph::from_edges(n, 0, &edges).unwrap());
        let m = lib.matrix();
        report.normalization_error = report
            .normalization_error
            .max(max_entry_diff(&to_rows(m), &oracle::normalized_adjacency(&adj)));
        for i in 0..n {
            for j in 0..n {
                report.asymmetry = report.asymmetry.max((m.at(i, j) - m.at(j, i)).abs());
            }
        }
        report.cases += 1;
    }
    let path = normalize_adjacency(&KnnGraph::from_edges(3, 1, &[(0, 1), (1, 2)]).unwrap());
    let s = 1.0 / 6f64.sqrt();
    let want = [[0.5, s, 0.0], [s, 1.0 / 3.0, s], [0.0, s, 0.5]];
    report.path_error = max_entry_diff(&to_rows(path.matrix()), &want.iter().map(|r| r.to_vec()).collect());

    for _ in 0..100 {
        let n = r.random_range(2..=15);
        let d = r.random_range(1..=3);
        // Small integer grid so equal distances (and ties) are common.
        let pts: Rows = (0..n)
            .map(|_| (0..d).map(|_| f64::from(r.random_range(0..4u8))).collect())
            .collect();
        let k = r.random_range(1..n);
        let t_heat = 5.0;
        let want = oracle::knn(&pts, k, t_heat);
        let z = tensor(&pts);
        if nearest_neighbors(&z, k).unwrap() != want {
            report.knn_mismatches += 1;
        }
        let g = build_knn_graph(&z, k, t_heat).unwrap();
        for i in 0..n {
            for j in 0..n {
                let expect = want[i].contains(&j) || want[j].contains(&i);
                if g.has_edge(i, j) != expect {
                    report.knn_mismatches += 1;
                }
            }
            if g.degree(i) < k {
                report.knn_mismatches += 1;
            }
        }
        report.cases += 1;
    }
    report
}

/// Worst disagreements of the metrics with exhaustive evaluations.
pub fn metric_checks() -> Vec<(&'static str, f64)> {
    let mut r = rng(707);
    let (mut acc, mut nmi_err, mut ari_err) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..300 {
        let n = r.random_range(1..=8);
        let kt = r.random_range(1..=5);
        let kp = r.random_range(1..=5);
        let truth: Vec<usize> = (0..n).map(|_| r.random_range(0..kt)).collect();
        let pred: Vec<usize> = (0..n).map(|_| r.random_range(0..kp)).collect();
        let (t, p) = (Partition::from_labels(truth.clone()), Partition::from_labels(pred.clone()));
        acc = acc.max((clustering_accuracy(&t, &p).unwrap() - oracle::accuracy(&truth, &pred)).abs());
        nmi_err = nmi_err.max((nmi(&t, &p).unwrap() - oracle::nmi(&truth, &pred)).abs());
        if n >= 2 {
            ari_err = ari_err.max((ari(&t, &p).unwrap() - oracle::ari(&truth, &pred)).abs());
        }
    }
    // Independence by construction: every (truth, pred) pair occurs equally often.
    let mut independent = 0.0f64;
    for (a, b) in [(2, 2), (2, 3), (3, 4), (5, 2)] {
        let n = a * b * 3;
        let t = Partition::from_labels((0..n).map(|i| i % a).collect());
        let p = Partition::from_labels((0..n).map(|i| (i / a) % b).collect());
        independent = independent.max(nmi(&t, &p).unwrap().abs());
    }
    let mut identical = 0.0f64;
    for _ in 0..50 {
        let n = r.random_range(2..=20);
        let k = r.random_range(2..=5);
        let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
        let relabeled: Vec<usize> = labels.iter().map(|&l| (l + 1) % k).collect();
        let t = Partition::from_labels(labels);
        identical = identical.max((ari(&t, &t).unwrap() - 1.0).abs());
        identical = identical.max((ari(&t, &Partition::from_labels(relabeled)).unwrap() - 1.0).abs());
    }
    vec![
        ("acc vs exhaustive permutations", acc),
        ("nmi vs contingency oracle", nmi_err),
        ("ari vs pair enumeration", ari_err),
        ("nmi of independent partitions", independent),
        ("ari of identical partitions minus 1", identical),
    ]
}

//! Phase 2 on hand-made features: k-means centers, Student-t assignments,
//! the sharpened target, and a few trident updates on two graph scales.

use icicle::config::Config;
use icicle::contrastive::AutoEncoder;
use icicle::graph::{build_knn_graph, normalize_adjacency};
use icicle::metrics::{MetricsReport, Partition};
use icicle::mgcn::{
    bottleneck_features, kmeans_init_centers, mgcn_reconstruction_loss, soft_assignment, target_distribution, train_phase2_iteration, Trident,
    TridentState,
};
use icicle::optim::{Adam, AdamConfig};
use icicle::tensor::{Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LR: f64 = 1e-2;
const ITERATIONS: usize = 40;

fn main() -> icicle::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (k, per, dim) = (3, 12, 10);
    let mut rows = Vec::new();
    for c in 0..k {
        for _ in 0..per {
            rows.push((0..dim).map(|d| if d % k == c { 1.0 } else { 0.0 } + rng.random_range(-0.2..0.2)).collect::<Vec<f64>>());
        }
    }
    let z = Tensor::from_rows(&rows)?;

    let config = Config::new(k);
    let mut ae = AutoEncoder::new(dim, &[16, 8], k, &mut rng);

    // Phase 1 would train the auto-encoder; a short reconstruction warm-up
    // stands in for it here.
    let mut warmup = Adam::new(AdamConfig::with_lr(1e-2));
    for _ in 0..300 {
        let tape = Tape::new();
        let x = tape.constant(z.clone());
        let hidden = ae.encode(&tape, x)?;
        let recon = ae.decode(&tape, *hidden.last().unwrap())?;
        let loss = mgcn_reconstruction_loss(x, recon)?;
        let grads = tape.backward(loss)?;
        warmup.step(ae.params_mut(), &grads);
    }
    let h = bottleneck_features(&ae, &z)?;
    let km = kmeans_init_centers(&h, k, config.seed)?;
    println!("k-means: {} iterations, inertia {:.4}", km.iterations, km.inertia);

    let q = soft_assignment(&h, &km.centers, config.phase2.t_dof)?;
    let target = target_distribution(&q)?;
    println!("first row of Q {:?}", q.row(0));
    println!("first row of P {:?}", target.p.row(0));

    let adj_a = normalize_adjacency(&build_knn_graph(&z, config.graph.k_a, config.graph.t_heat)?);
    let adj_b = normalize_adjacency(&build_knn_graph(&z, 5, config.graph.t_heat)?);
    let trident = Trident::new(ae, false, &mut rng);
    let mut state = TridentState::new(trident, adj_a, adj_b, km.centers, config.phase2.clone())?;
    let mut adam = Adam::new(AdamConfig::with_lr(LR));
    for it in 1..=ITERATIONS {
        let r = train_phase2_iteration(&mut state, &mut adam, &z, it)?;
        if it == 1 || it % 10 == 0 {
            println!(
                "iteration {it:>2}: L2 {:.5} (re {:.5}, KL(P|Q) {:.5}, KL(P|Ga) {:.5}, KL(P|Gb) {:.5})",
                r.total, r.re_loss, r.cluster_kl, r.kl_a, r.kl_b
            );
        }
    }
    let pred = state.assign(&z)?;
    let truth = Partition::new((0..k * per).map(|i| i / per).collect(), k)?;
    println!("labels {:?}", pred.labels());
    print!("{}", MetricsReport::evaluate(&truth, &pred)?.to_csv());
    Ok(())
}

//! Instance and cluster contrast on aligned versus mismatched views.

use icicle::contrastive::{cluster_contrastive_loss, instance_contrastive_loss};
use icicle::tensor::{Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    Tensor::matrix(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn main() -> icicle::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let base = random(&mut rng, 8, 6);
    let noise = random(&mut rng, 8, 6);
    let jitter = Tensor::matrix(8, 6, base.data().iter().zip(noise.data()).map(|(b, n)| b + 0.05 * n).collect())?;
    let other = random(&mut rng, 8, 6);

    let tape = Tape::inference();
    for tau in [0.1, 0.5, 1.0] {
        let aligned = instance_contrastive_loss(tape.leaf(base.clone()), tape.leaf(jitter.clone()), tau)?;
        let unrelated = instance_contrastive_loss(tape.leaf(base.clone()), tape.leaf(other.clone()), tau)?;
        println!(
            "tau {tau}: instance loss aligned {:.4}, unrelated {:.4}",
            aligned.value().item(),
            unrelated.value().item()
        );
    }

    // Confident, balanced assignments versus everything in one cluster.
    let balanced = Tensor::from_rows(&[[0.9, 0.05, 0.05], [0.05, 0.9, 0.05], [0.05, 0.05, 0.9]])?;
    let collapsed = Tensor::from_rows(&[[0.9, 0.05, 0.05], [0.9, 0.05, 0.05], [0.9, 0.05, 0.05]])?;
    for (name, w) in [("balanced", &balanced), ("collapsed", &collapsed)] {
        let loss = cluster_contrastive_loss(tape.leaf(w.clone()), tape.leaf(w.clone()), 1.0)?;
        println!("cluster loss, {name}: {:.4}", loss.value().item());
    }
    Ok(())
}

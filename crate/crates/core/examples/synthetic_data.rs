//! Generates the colour-texture toy set, inspects it, draws two augmented
//! views and round-trips the binary file format.

use icicle::config::Config;
use icicle::data::{augment, decode_dataset, encode_dataset, generate_dataset, SyntheticSpec};

fn main() -> icicle::Result<()> {
    let spec = SyntheticSpec::new(3, 100, 16, 0.05, 42);
    let dataset = generate_dataset(&spec)?;
    let (c, h, w) = dataset.image_shape();
    println!("{} images of {c}x{h}x{w}, {} clusters", dataset.len(), dataset.num_clusters());

    let pixels = c * h * w;
    for k in 0..dataset.num_clusters() {
        let members: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.labels()[i] == k).collect();
        let mut rgb = [0.0; 3];
        for &i in &members {
            let image = &dataset.images().data()[i * pixels..(i + 1) * pixels];
            for (ch, sum) in rgb.iter_mut().enumerate() {
                *sum += image[ch * h * w..(ch + 1) * h * w].iter().sum::<f64>() / (h * w) as f64;
            }
        }
        let n = members.len() as f64;
        println!("cluster {k}: {} images, mean rgb ({:.3}, {:.3}, {:.3})", members.len(), rgb[0] / n, rgb[1] / n, rgb[2] / n);
    }

    let policy = Config::new(3).phase1.augment;
    let pair = augment(&dataset, &policy, 7)?;
    let diff = pair.view_a.max_abs_diff(&pair.view_b);
    println!("two views of shape {:?}, max pixel difference {diff:.3}", pair.view_a.shape());

    let bytes = encode_dataset(&dataset)?;
    let back = decode_dataset(&bytes)?;
    println!("encoded {} bytes, round trip exact: {}", bytes.len(), back == dataset);
    Ok(())
}

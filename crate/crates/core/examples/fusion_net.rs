//! Trains a narrow fusion net on clustered inputs, keeps the best epoch by
//! validation error, round-trips the checkpoint and pulls FC7 features.
//!
//! cargo run --release --example fusion_net

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use faceparts::fusionnet::{extract_fc7, train, FusionNet, NetShape, TrainConfig, NUM_CLASSES};

fn clusters(n_per_class: usize, dim: usize, rng: &mut ChaCha8Rng, centers: &[Vec<f32>]) -> Vec<(Vec<f32>, usize)> {
    let noise = Normal::new(0.0f32, 0.6).unwrap();
    (0..n_per_class * NUM_CLASSES)
        .map(|i| {
            let c = i % NUM_CLASSES;
            let x = (0..dim).map(|d| (centers[c][d] + noise.sample(rng)).max(0.0)).collect();
            (x, c)
        })
        .collect()
}

fn main() -> faceparts::Result<()> {
    let dim = 6 * 6 * 16;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let unit = Normal::new(0.0f32, 1.0).unwrap();
    let centers: Vec<Vec<f32>> = (0..NUM_CLASSES).map(|_| (0..dim).map(|_| unit.sample(&mut rng).abs()).collect()).collect();
    let train_set = clusters(20, dim, &mut rng, &centers);
    let val_set = clusters(5, dim, &mut rng, &centers);

    let shape = NetShape { input: dim, fc6: 64, fc7: 32, classes: NUM_CLASSES };
    let cfg = TrainConfig { epochs: 15, lr_start: 1e-3, lr_end: 1e-4, ..TrainConfig::default() };
    let outcome = train::<f32>(shape, &train_set, &val_set, &cfg)?;
    for e in &outcome.log {
        println!("epoch {:>2}  lr {:.2e}  loss {:.4}  val error {:.3}", e.epoch, e.lr, e.train_loss, e.val_error);
    }
    println!("kept epoch {}", outcome.best_epoch + 1);

    let restored = FusionNet::<f32>::from_tensor_file(&outcome.net.to_tensor_file())?;
    let fc7 = extract_fc7(&restored, &val_set[0].0)?;
    println!("{} parameters, FC7 has {} values, first sample predicted {}", restored.param_count(), fc7.len(), restored.predict(&val_set[0].0)?);
    Ok(())
}

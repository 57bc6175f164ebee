//! PCA down to 99% of the variance, then a one-vs-one polynomial SVM on
//! standardized coordinates.
//!
//! cargo run --release --example pca_svm

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use faceparts::reduce::pca_fit;
use faceparts::svm::{svm_train_multiclass, KernelParams, Standardizer};

fn main() -> faceparts::Result<()> {
    let (classes, dim, latent) = (4, 300, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mixing: Vec<Vec<f64>> = (0..latent).map(|_| (0..dim).map(|_| normal.sample(&mut rng)).collect()).collect();
    let centers: Vec<Vec<f64>> = (0..classes).map(|_| (0..latent).map(|_| 3.0 * normal.sample(&mut rng)).collect()).collect();
    let sample = |rng: &mut ChaCha8Rng| {
        let c = rng.random_range(0..classes);
        let z: Vec<f64> = centers[c].iter().map(|m| m + normal.sample(rng)).collect();
        let x = (0..dim).map(|d| (0..latent).map(|k| z[k] * mixing[k][d]).sum::<f64>() + 0.05 * normal.sample(rng)).collect::<Vec<f64>>();
        (x, c)
    };
    let (train_x, train_y): (Vec<Vec<f64>>, Vec<usize>) = (0..200).map(|_| sample(&mut rng)).unzip();
    let (test_x, test_y): (Vec<Vec<f64>>, Vec<usize>) = (0..100).map(|_| sample(&mut rng)).unzip();

    let pca = pca_fit(&train_x, 0.99)?;
    println!("PCA kept {} of {} dimensions ({:.4} of the variance)", pca.components(), pca.dim(), pca.explained_ratio);
    let reduced: Vec<Vec<f64>> = train_x.iter().map(|x| pca.transform(x)).collect::<faceparts::Result<_>>()?;
    let scaler = Standardizer::fit(&reduced)?;
    let train: Vec<Vec<f64>> = reduced.iter().map(|x| scaler.apply(x)).collect();

    let model = svm_train_multiclass(&train, &train_y, &KernelParams::default())?;
    print!("{}", model.manifest());
    println!("max KKT violation {:.2e}", model.max_kkt_violation());
    let correct = test_x
        .iter()
        .zip(&test_y)
        .map(|(x, &y)| Ok((model.predict(&scaler.apply(&pca.transform(x)?)) == y) as usize))
        .sum::<faceparts::Result<usize>>()?;
    println!("test accuracy {:.1}%", 100.0 * correct as f64 / test_y.len() as f64);
    Ok(())
}

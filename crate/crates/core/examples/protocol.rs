//! The subject-independent protocol on in-memory vectors: repeated tests,
//! each drawing evaluation subjects and splitting them into folds.
//!
//! cargo run --release --example protocol

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use faceparts::harness::{run_protocol, EvalSample, PcaSvmClassifier, ProtocolConfig};
use faceparts::synth::subject_id;
use faceparts::Expression;

fn main() -> faceparts::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let class_means: Vec<Vec<f64>> = (0..6).map(|_| (0..40).map(|_| normal.sample(&mut rng)).collect()).collect();
    let subjects: Vec<String> = (0..20).map(subject_id).collect();
    let mut samples = Vec::new();
    for subject in &subjects {
        let offset: Vec<f64> = (0..40).map(|_| 0.8 * normal.sample(&mut rng)).collect();
        for (label, mean) in class_means.iter().enumerate() {
            for intensity in [3u8, 4] {
                let features = mean.iter().zip(&offset).map(|(m, o)| m + o + 0.5 * normal.sample(&mut rng)).collect();
                let expression = Expression::from_class(label).expect("six classes");
                samples.push(EvalSample {
                    sample_id: format!("{subject}_{expression}_{intensity}"),
                    subject: subject.clone(),
                    label,
                    intensity,
                    features,
                });
            }
        }
    }

    let cfg = ProtocolConfig { n_tests: 20, ..ProtocolConfig::default() };
    let report = run_protocol(&samples, &subjects, &cfg, &PcaSvmClassifier::default())?;
    print!("{}", report.to_text());
    println!("test 0, fold 0 holds out {:?}", report.fold_subjects[0][0]);
    Ok(())
}

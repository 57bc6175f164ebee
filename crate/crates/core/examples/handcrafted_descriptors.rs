//! HOG and uniform-LBP descriptors of the four parts, then the whole
//! hand-crafted pipeline (no fusion net) on a small synthetic dataset.
//!
//! cargo run --release --example handcrafted_descriptors -- [n_subjects]

use faceparts::config::{FaceRegion, FeatureSource, PipelineConfig};
use faceparts::descriptors::{early_fuse, hog, ulbp};
use faceparts::landmarks::{align_face, DEFAULT_REF_DISTANCE};
use faceparts::parts::{extract_parts, DEFAULT_PAD};
use faceparts::pipeline;
use faceparts::synth::{generate, write_dataset, SynthParams};

fn main() -> faceparts::Result<()> {
    let n: usize = std::env::args().nth(1).map(|s| s.parse().expect("subject count")).unwrap_or(10);

    let face = generate(1, 0, &SynthParams::default())?.swap_remove(0).face;
    let aligned = align_face(&face.texture, &face.depth, &face.landmarks, DEFAULT_REF_DISTANCE)?;
    let (parts, _) = extract_parts(&aligned.texture, &aligned.depth, &aligned.landmarks, DEFAULT_PAD)?;
    let hogs = parts.iter().map(|p| hog(&p.image)).collect::<faceparts::Result<Vec<_>>>()?;
    let lbps: Vec<_> = parts.iter().map(|p| ulbp(&p.image)).collect();
    println!("per part: HOG {} values, ULBP {} values", hogs[0].len(), lbps[0].len());
    println!("fused: HOG {} values, ULBP {} values", early_fuse(&hogs)?.len(), early_fuse(&lbps)?.len());

    let work = std::env::temp_dir().join("faceparts_handcrafted");
    let manifest = write_dataset(&work.join("data"), n, 0, &SynthParams::default())?;
    for source in [FeatureSource::Hog, FeatureSource::Ulbp] {
        for region in [FaceRegion::Parts, FaceRegion::WholeFace] {
            let mut cfg = PipelineConfig::default();
            cfg.features.source = source;
            cfg.features.region = region;
            cfg.protocol.n_tests = 10;
            cfg.protocol.n_folds = 6;
            let report = pipeline::run_all(&manifest, &work.join(format!("{source:?}_{region:?}")), &cfg)?;
            println!("{source:?} {region:?}: {:.2}% (std {:.2})", 100.0 * report.mean_accuracy, 100.0 * report.std_accuracy);
        }
    }
    Ok(())
}

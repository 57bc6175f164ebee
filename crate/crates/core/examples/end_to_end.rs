//! Synthetic dataset through every stage, once with part crops and once with
//! the whole face.
//!
//! cargo run --release --example end_to_end -- [n_subjects] [work_dir]

use std::path::PathBuf;
use std::time::Instant;

use faceparts::config::{FaceRegion, PipelineConfig};
use faceparts::pipeline::{self, dirs};
use faceparts::synth::{write_dataset, SynthParams};

fn main() -> faceparts::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let n_subjects: usize = args.next().map(|s| s.parse().expect("subject count")).unwrap_or(10);
    let work = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("faceparts_e2e"));
    let cfg = PipelineConfig::from_toml(include_str!("../configs/desk_scale.toml"))?;
    let start = Instant::now();

    let manifest = write_dataset(&work.join("data"), n_subjects, cfg.seed, &SynthParams::default())?;
    pipeline::align_stage(&manifest, &work.join(dirs::ALIGNED), &cfg)?.into_result()?;
    pipeline::parts_stage(&manifest, &work.join(dirs::ALIGNED), &work.join(dirs::PARTS), &cfg)?.into_result()?;
    pipeline::features_stage(&manifest, &work.join(dirs::PARTS), &work.join(dirs::FEATURES), &cfg)?.into_result()?;
    println!("prepared {} samples in {:.1?}", manifest.records.len(), start.elapsed());

    for region in [FaceRegion::Parts, FaceRegion::WholeFace] {
        let mut cfg = cfg.clone();
        cfg.features.region = region;
        let out = work.join(format!("{region:?}").to_lowercase());
        let t = Instant::now();
        pipeline::train_fusion_stage(&manifest, &work.join(dirs::FEATURES), &out.join(dirs::MODELS), &cfg)?;
        pipeline::extract_stage(&manifest, &work.join(dirs::FEATURES), &out.join(dirs::MODELS), &out.join(dirs::FC7), &cfg)?.into_result()?;
        let report = pipeline::evaluate_stage(&manifest, &out.join(dirs::FC7), &out.join(dirs::REPORT), &cfg)?;
        println!("{region:?} ({:.1?}):\n{}", t.elapsed(), report.to_text());
    }
    println!("total {:.1?}", start.elapsed());
    Ok(())
}

//! Writes a synthetic texture/depth dataset with its manifest and the
//! ground-truth perturbation of every sample.
//!
//! cargo run --release --example synth_dataset -- [out_dir] [n_subjects] [seed]

use std::path::PathBuf;

use faceparts::synth::{write_dataset, SynthParams};

fn main() -> faceparts::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("faceparts_synth"));
    let n: usize = args.next().map(|s| s.parse().expect("subject count")).unwrap_or(4);
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(0);

    let manifest = write_dataset(&out, n, seed, &SynthParams::default())?;
    println!("{} subjects, {} samples", manifest.subjects().len(), manifest.records.len());
    for r in manifest.records.iter().take(4) {
        println!("  {} -> {}", r.sample_id(), r.texture_path.display());
    }
    println!("manifest: {}", out.join("manifest.csv").display());
    println!("perturbations: {}", out.join("perturbations.csv").display());
    Ok(())
}

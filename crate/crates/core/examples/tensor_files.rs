//! Feeding externally computed conv maps through the `tensor_files` source.
//! Each manifest row names one FPT1 file per modality and part in
//! `feat_tex_<part>` / `feat_depth_<part>` columns; here the maps are random.
//!
//! cargo run --release --example tensor_files

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use faceparts::config::FeatureSource;
use faceparts::fusionnet::CONV_DIMS;
use faceparts::pipeline::{self, feature_column, FACE, MODALITIES};
use faceparts::synth::{write_dataset, SynthParams};
use faceparts::{FeatureTensor, PipelineConfig, TensorFile};

fn main() -> faceparts::Result<()> {
    let work = std::env::temp_dir().join("faceparts_tensor_files");
    let data = work.join("data");
    let mut manifest = write_dataset(&data, 4, 0, &SynthParams::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n: usize = CONV_DIMS.iter().product();
    for r in &mut manifest.records {
        for modality in MODALITIES {
            for region in pipeline::regions().into_iter().filter(|r| *r != FACE) {
                let mut f = TensorFile::new();
                let values = (0..n).map(|_| rng.random_range(0.0f32..1.0)).collect();
                f.insert("features", FeatureTensor::new(CONV_DIMS.to_vec(), values)?);
                let path = data.join("conv").join(format!("{}_{modality}_{region}.fpt", r.sample_id()));
                f.write(&path)?;
                r.features.insert(feature_column(modality, region), path);
            }
        }
    }
    manifest.write(&data.join("manifest_features.csv"))?;
    let manifest = faceparts::Manifest::read(&data.join("manifest_features.csv"))?;

    let mut cfg = PipelineConfig::from_toml(include_str!("../configs/desk_scale.toml"))?;
    cfg.features.source = FeatureSource::TensorFiles;
    cfg.train.epochs = 3;
    cfg.protocol.n_tests = 5;
    cfg.protocol.n_folds = 2;
    let report = pipeline::run_all(&manifest, &work.join("run"), &cfg)?;
    println!("features stage read {} samples", manifest.records.len());
    println!("{}", report.to_text());
    println!("(random maps carry no expression signal; accuracy should sit near chance)");
    Ok(())
}

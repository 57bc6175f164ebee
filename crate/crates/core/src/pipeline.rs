//! Stage functions behind the command-line tool. Each stage reads the
//! previous stage's directory and writes its own. Per-sample failures are
//! collected in a [`StageReport`] and do not stop the other samples.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{FaceRegion, FeatureSource, PipelineConfig};
use crate::descriptors::{early_fuse, hog_with, ulbp_with, FeatureVector};
use crate::error::{Error, Result};
use crate::fusionnet::{concat_parts, extract_fc7_with, fuse_modalities, train, FusionNet, MeanImage, StubEncoder, CONV_DIMS};
use crate::harness::{derive_seed, run_protocol, split_subjects, EvalReport, EvalSample, Manifest, PcaSvmClassifier, SampleRecord};
use crate::imgcore::{hflip, read_pnm, write_pnm, Image};
use crate::io_util::{read_to_string, write_atomic};
use crate::landmarks::{align_face, interocular_distance, LandmarkSet};
use crate::parts::{extract_parts, face_bbox, normalized_crop, PartKind, PART_SIZE};
use crate::reduce::{pca_fit, PcaModel};
use crate::svm::{svm_train_multiclass, Standardizer};
use crate::tensor::{FeatureTensor, TensorFile};

pub const MODALITIES: [&str; 2] = ["texture", "depth"];
/// Region name of the whole-face crop, next to the four part names.
pub const FACE: &str = "face";
/// Entry-name prefix of features computed from mirrored crops.
pub const FLIP_PREFIX: &str = "flip/";
pub const SPLIT_FILE: &str = "split.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";

/// Default stage directory names used by [`run_all`].
pub mod dirs {
    pub const ALIGNED: &str = "aligned";
    pub const PARTS: &str = "parts";
    pub const FEATURES: &str = "features";
    pub const MODELS: &str = "models";
    pub const FC7: &str = "fc7";
    pub const REPORT: &str = "report";
}

pub fn aligned_texture(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}_texture.ppm"))
}

pub fn aligned_depth(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}_depth.pgm"))
}

pub fn aligned_landmarks(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}_landmarks.txt"))
}

/// `<id>_<modality>_<region>.ppm` for texture, `.pgm` for depth.
pub fn part_image(dir: &Path, id: &str, modality: &str, region: &str) -> PathBuf {
    let ext = if modality == "depth" { "pgm" } else { "ppm" };
    dir.join(format!("{id}_{modality}_{region}.{ext}"))
}

pub fn bbox_sidecar(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}_bbox.txt"))
}

pub fn conv_features(dir: &Path, id: &str, modality: &str) -> PathBuf {
    dir.join(format!("{id}_{modality}.fpt"))
}

pub fn mean_images(dir: &Path, modality: &str) -> PathBuf {
    dir.join(format!("mean_{modality}.fpt"))
}

/// Per-sample vector file with `texture`, `depth` and `fused` entries.
pub fn vectors(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.fpt"))
}

pub fn checkpoint(dir: &Path, modality: &str) -> PathBuf {
    dir.join(format!("{modality}.fpt"))
}

pub fn epoch_log(dir: &Path, modality: &str) -> PathBuf {
    dir.join(format!("{modality}_log.csv"))
}

/// Part names followed by [`FACE`].
pub fn regions() -> [&'static str; 5] {
    [PartKind::Eyebrows.name(), PartKind::Eyes.name(), PartKind::Nose.name(), PartKind::Mouth.name(), FACE]
}

fn require(path: PathBuf) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingStageOutput(path))
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Debug, Default)]
pub struct StageReport {
    pub stage: &'static str,
    pub processed: usize,
    /// One [`Error::Sample`] per failed sample, in manifest order.
    pub failures: Vec<Error>,
}

impl StageReport {
    pub fn is_success(&self) -> bool {
        self.failures.is_empty()
    }

    /// The report itself, or the first failure.
    pub fn into_result(mut self) -> Result<Self> {
        if self.failures.is_empty() {
            Ok(self)
        } else {
            Err(self.failures.swap_remove(0))
        }
    }
}

fn for_each_sample(stage: &'static str, records: &[SampleRecord], f: impl Fn(&SampleRecord) -> Result<()> + Sync) -> StageReport {
    let results: Vec<Result<()>> = records.par_iter().map(|r| f(r).map_err(|e| e.in_sample(r.sample_id()))).collect();
    let mut report = StageReport {
        stage,
        ..Default::default()
    };
    for r in results {
        match r {
            Ok(()) => report.processed += 1,
            Err(e) => {
                log::error!("{stage}: {e}");
                report.failures.push(e);
            }
        }
    }
    report
}

/// Aligns every sample: `<id>_texture.ppm`, `<id>_depth.pgm` and
/// `<id>_landmarks.txt` in `out_dir`.
pub fn align_stage(manifest: &Manifest, out_dir: &Path, cfg: &PipelineConfig) -> Result<StageReport> {
    create_dir(out_dir)?;
    Ok(for_each_sample("align", &manifest.records, |r| {
        let texture = read_pnm(&r.texture_path)?.to_rgb();
        let depth = read_pnm(&r.depth_path)?.to_gray();
        let lms = LandmarkSet::read(&r.landmarks_path)?;
        let aligned = align_face(&texture, &depth, &lms, cfg.align.ref_interocular_distance)?;
        let id = r.sample_id();
        write_pnm(&aligned_texture(out_dir, &id), &aligned.texture)?;
        write_pnm(&aligned_depth(out_dir, &id), &aligned.depth)?;
        aligned.landmarks.write(&aligned_landmarks(out_dir, &id))
    }))
}

/// Crops the four parts and the whole face from aligned samples.
pub fn parts_stage(manifest: &Manifest, in_dir: &Path, out_dir: &Path, cfg: &PipelineConfig) -> Result<StageReport> {
    require(in_dir.to_path_buf())?;
    create_dir(out_dir)?;
    Ok(for_each_sample("parts", &manifest.records, |r| {
        let id = r.sample_id();
        let texture = read_pnm(&require(aligned_texture(in_dir, &id))?)?;
        let depth = read_pnm(&require(aligned_depth(in_dir, &id))?)?;
        let lms = LandmarkSet::read(&require(aligned_landmarks(in_dir, &id))?)?;
        let (tex_parts, depth_parts) = extract_parts(&texture, &depth, &lms, cfg.parts.pad)?;
        let mut sidecar = String::new();
        for (tex, dep) in tex_parts.iter().zip(depth_parts.iter()) {
            let name = tex.kind.name();
            write_pnm(&part_image(out_dir, &id, "texture", name), &tex.image)?;
            write_pnm(&part_image(out_dir, &id, "depth", name), &dep.image)?;
            let b = tex.source_bbox;
            sidecar.push_str(&format!("{name} {} {} {} {}\n", b.x_min, b.y_min, b.x_max, b.y_max));
        }
        let b = face_bbox(&lms);
        write_pnm(&part_image(out_dir, &id, "texture", FACE), &normalized_crop(&texture, b)?)?;
        write_pnm(&part_image(out_dir, &id, "depth", FACE), &normalized_crop(&depth, b)?)?;
        sidecar.push_str(&format!("{FACE} {} {} {} {}\n", b.x_min, b.y_min, b.x_max, b.y_max));
        write_atomic(&bbox_sidecar(out_dir, &id), sidecar.as_bytes())
    }))
}

/// `[modality][region]` crops of one sample.
fn load_crops(dir: &Path, id: &str) -> Result<Vec<Vec<Image>>> {
    MODALITIES
        .iter()
        .map(|m| regions().iter().map(|r| read_pnm(&require(part_image(dir, id, m, r))?)).collect())
        .collect()
}

/// Computes per-sample feature files from part crops. Deep sources write
/// `<id>_<modality>.fpt` conv maps; hand-crafted sources write final
/// `<id>.fpt` vectors and the subject split, so the fusion stages are skipped.
pub fn features_stage(manifest: &Manifest, in_dir: &Path, out_dir: &Path, cfg: &PipelineConfig) -> Result<StageReport> {
    require(in_dir.to_path_buf())?;
    create_dir(out_dir)?;
    match cfg.features.source {
        FeatureSource::StubEncoder => stub_features(manifest, in_dir, out_dir, cfg),
        FeatureSource::TensorFiles => Ok(tensor_file_features(manifest, out_dir)),
        FeatureSource::Hog | FeatureSource::Ulbp => {
            write_split(out_dir, &subject_split(manifest, cfg)?)?;
            Ok(handcrafted_features(manifest, in_dir, out_dir, cfg))
        }
    }
}

/// Per-pixel means of every (modality, region) crop over all readable
/// samples, accumulated in manifest order. Empty when nothing is readable.
fn mean_images_of(manifest: &Manifest, in_dir: &Path) -> Result<Vec<Vec<MeanImage>>> {
    const CHUNK: usize = 64;
    let plane = PART_SIZE * PART_SIZE * 3;
    let mut sums = vec![vec![vec![0.0; plane]; regions().len()]; MODALITIES.len()];
    let mut count = 0usize;
    for chunk in manifest.records.chunks(CHUNK) {
        let loaded: Vec<Result<Vec<Vec<Image>>>> = chunk.par_iter().map(|r| load_crops(in_dir, &r.sample_id())).collect();
        // unreadable samples are reported by the encoding pass
        for crops in loaded.into_iter().flatten() {
            for (sm, cm) in sums.iter_mut().zip(&crops) {
                for (s, img) in sm.iter_mut().zip(cm) {
                    for (a, v) in s.iter_mut().zip(img.to_rgb().data()) {
                        *a += v;
                    }
                }
            }
            count += 1;
        }
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    sums.into_iter()
        .map(|sm| {
            sm.into_iter()
                .map(|s| {
                    let avg: Vec<f64> = s.iter().map(|v| v / count as f64).collect();
                    MeanImage::from_tensor(&FeatureTensor::from_f64(vec![PART_SIZE, PART_SIZE, 3], &avg)?)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

fn stub_features(manifest: &Manifest, in_dir: &Path, out_dir: &Path, cfg: &PipelineConfig) -> Result<StageReport> {
    let means = mean_images_of(manifest, in_dir)?;
    if !means.is_empty() {
        for (m, modality) in MODALITIES.iter().enumerate() {
            let mut f = TensorFile::new();
            for (mean, region) in means[m].iter().zip(regions()) {
                f.insert(region, mean.to_tensor());
            }
            f.write(&mean_images(out_dir, modality))?;
        }
    }
    let flipped: Vec<Vec<MeanImage>> = means.iter().map(|ms| ms.iter().map(MeanImage::flipped).collect()).collect();
    let encoder = StubEncoder::new(cfg.features.encoder_seed);
    Ok(for_each_sample("features", &manifest.records, |r| {
        let id = r.sample_id();
        let crops = load_crops(in_dir, &id)?;
        if means.is_empty() {
            return Err(Error::EmptySet("mean image"));
        }
        for (m, modality) in MODALITIES.iter().enumerate() {
            let mut f = TensorFile::new();
            for (k, region) in regions().iter().enumerate() {
                f.insert(*region, encoder.encode(&crops[m][k], &means[m][k])?);
                if cfg.features.flip_augment {
                    f.insert(format!("{FLIP_PREFIX}{region}"), encoder.encode(&hflip(&crops[m][k]), &flipped[m][k])?);
                }
            }
            f.write(&conv_features(out_dir, &id, modality))?;
        }
        Ok(())
    }))
}

/// Manifest column holding precomputed conv features, e.g. `feat_tex_mouth`.
pub fn feature_column(modality: &str, region: &str) -> String {
    let short = if modality == "texture" { "tex" } else { modality };
    format!("feat_{short}_{region}")
}

fn read_conv_map(path: &Path) -> Result<FeatureTensor> {
    let f = TensorFile::read(path)?;
    let t = match f.entries() {
        [(_, only)] => only,
        _ => f.require("features")?,
    };
    t.expect_dims(&CONV_DIMS)?;
    Ok(t.clone())
}

fn tensor_file_features(manifest: &Manifest, out_dir: &Path) -> StageReport {
    for_each_sample("features", &manifest.records, |r| {
        let id = r.sample_id();
        for modality in MODALITIES {
            let mut f = TensorFile::new();
            for region in regions() {
                let col = feature_column(modality, region);
                match r.features.get(&col) {
                    Some(path) => f.insert(region, read_conv_map(path)?),
                    None if region == FACE => {}
                    None => return Err(Error::Config(format!("manifest has no {col} entry"))),
                }
            }
            f.write(&conv_features(out_dir, &id, modality))?;
        }
        Ok(())
    })
}

fn describe(img: &Image, cfg: &PipelineConfig) -> Result<FeatureVector> {
    match cfg.features.source {
        FeatureSource::Hog => hog_with(img, &cfg.hog),
        _ => Ok(ulbp_with(img, &cfg.lbp)),
    }
}

fn handcrafted_features(manifest: &Manifest, in_dir: &Path, out_dir: &Path, cfg: &PipelineConfig) -> StageReport {
    for_each_sample("features", &manifest.records, |r| {
        let id = r.sample_id();
        let crops = load_crops(in_dir, &id)?;
        let mut per_modality = Vec::new();
        for modality in &crops {
            let v = match cfg.features.region {
                FaceRegion::Parts => early_fuse(&modality[..4].iter().map(|c| describe(c, cfg)).collect::<Result<Vec<_>>>()?)?,
                FaceRegion::WholeFace => describe(&modality[4], cfg)?,
            };
            per_modality.push(v.values);
        }
        write_vectors(out_dir, &id, &per_modality[0], &per_modality[1])
    })
}

fn write_vectors(dir: &Path, id: &str, texture: &[f64], depth: &[f64]) -> Result<()> {
    let mut f = TensorFile::new();
    f.insert("texture", FeatureTensor::from_f64(vec![texture.len()], texture)?);
    f.insert("depth", FeatureTensor::from_f64(vec![depth.len()], depth)?);
    let fused = fuse_modalities(texture, depth)?;
    f.insert("fused", FeatureTensor::from_f64(vec![fused.len()], &fused)?);
    f.write(&vectors(dir, id))
}

/// Evaluation and fine-tuning subjects, and the fine-tuning train/validation
/// split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectSplit {
    pub eval: Vec<String>,
    pub finetune: Vec<String>,
    pub finetune_train: Vec<String>,
    pub finetune_val: Vec<String>,
}

pub fn subject_split(manifest: &Manifest, cfg: &PipelineConfig) -> Result<SubjectSplit> {
    let subjects = manifest.subjects();
    let n_eval = cfg.protocol.eval_count(subjects.len());
    let (eval, finetune) = split_subjects(&subjects, n_eval, cfg.protocol.seed)?;
    let (mut finetune_train, mut finetune_val) = (Vec::new(), Vec::new());
    if finetune.len() >= 2 {
        let n_val = ((finetune.len() as f64 * cfg.net.val_fraction).round() as usize).clamp(1, finetune.len() - 1);
        let mut order = finetune.clone();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.protocol.seed, u64::MAX)));
        finetune_train = order.split_off(n_val);
        finetune_val = order;
        finetune_train.sort();
        finetune_val.sort();
    }
    Ok(SubjectSplit {
        eval,
        finetune,
        finetune_train,
        finetune_val,
    })
}

fn write_split(dir: &Path, split: &SubjectSplit) -> Result<()> {
    let json = serde_json::to_string_pretty(split).expect("split serializes");
    write_atomic(&dir.join(SPLIT_FILE), json.as_bytes())
}

pub fn read_split(dir: &Path) -> Result<SubjectSplit> {
    let path = require(dir.join(SPLIT_FILE))?;
    serde_json::from_str(&read_to_string(&path)?).map_err(|e| Error::Parse {
        what: "subject split",
        location: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Flattened fusion-net input for one sample: the four part maps
/// concatenated along channels, or the face map alone.
pub fn net_input(file: &TensorFile, region: FaceRegion, flipped: bool) -> Result<Vec<f32>> {
    let prefix = if flipped { FLIP_PREFIX } else { "" };
    match region {
        FaceRegion::Parts => {
            let maps = PartKind::ALL
                .iter()
                .map(|k| file.require(&format!("{prefix}{}", k.name())).cloned())
                .collect::<Result<Vec<_>>>()?;
            Ok(concat_parts(&maps)?.into_data())
        }
        FaceRegion::WholeFace => {
            let t = file.require(&format!("{prefix}{FACE}"))?;
            t.expect_dims(&CONV_DIMS)?;
            Ok(t.data().to_vec())
        }
    }
}

fn labelled_inputs(
    manifest: &Manifest,
    dir: &Path,
    modality: &str,
    subjects: &[String],
    cfg: &PipelineConfig,
    with_flips: bool,
) -> Result<Vec<(Vec<f32>, usize)>> {
    let keep: BTreeSet<&String> = subjects.iter().collect();
    let records: Vec<&SampleRecord> = manifest.records.iter().filter(|r| r.label().is_some() && keep.contains(&r.subject_id)).collect();
    let per_sample: Vec<Vec<(Vec<f32>, usize)>> = records
        .par_iter()
        .map(|r| {
            let id = r.sample_id();
            let label = r.label().expect("filtered to labelled records");
            let f = TensorFile::read(&conv_features(dir, &id, modality)).map_err(|e| e.in_sample(&id))?;
            let mut out = vec![(net_input(&f, cfg.features.region, false).map_err(|e| e.in_sample(&id))?, label)];
            let flip_name = format!("{FLIP_PREFIX}{}", PartKind::Eyebrows.name());
            if with_flips && f.get(&flip_name).is_some() {
                out.push((net_input(&f, cfg.features.region, true).map_err(|e| e.in_sample(&id))?, label));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_sample.into_iter().flatten().collect())
}

/// Trains one fusion net per modality on the fine-tuning subjects and
/// writes checkpoints, per-epoch logs and the subject split.
pub fn train_fusion_stage(manifest: &Manifest, in_dir: &Path, out_dir: &Path, cfg: &PipelineConfig) -> Result<StageReport> {
    require(in_dir.to_path_buf())?;
    if !cfg.features.source.is_deep() {
        return Err(Error::Config(format!("fusion training needs conv features, source is {:?}", cfg.features.source)));
    }
    create_dir(out_dir)?;
    let split = subject_split(manifest, cfg)?;
    if split.finetune_val.is_empty() {
        return Err(Error::TooFewSubjects {
            needed: 2,
            found: split.finetune.len(),
        });
    }
    let shape = cfg.net_shape();
    for (m, modality) in MODALITIES.iter().enumerate() {
        let train_set = labelled_inputs(manifest, in_dir, modality, &split.finetune_train, cfg, cfg.features.flip_augment)?;
        let val_set = labelled_inputs(manifest, in_dir, modality, &split.finetune_val, cfg, false)?;
        let mut tc = cfg.train;
        tc.seed = derive_seed(cfg.train.seed, m as u64);
        log::info!("training {modality} net {shape:?} on {} samples, validating on {}", train_set.len(), val_set.len());
        let outcome = train::<f32>(shape, &train_set, &val_set, &tc)?;
        log::info!("{modality}: kept epoch {}", outcome.best_epoch + 1);
        outcome.net.to_tensor_file().write(&checkpoint(out_dir, modality))?;
        write_atomic(&epoch_log(out_dir, modality), crate::fusionnet::epoch_log_csv(&outcome.log).as_bytes())?;
    }
    write_split(out_dir, &split)?;
    Ok(StageReport {
        stage: "train-fusion",
        processed: MODALITIES.len(),
        failures: Vec::new(),
    })
}

/// Writes FC7 features of both modalities and their concatenation for every
/// sample.
pub fn extract_stage(manifest: &Manifest, features_dir: &Path, models_dir: &Path, out_dir: &Path, cfg: &PipelineConfig) -> Result<StageReport> {
    require(features_dir.to_path_buf())?;
    create_dir(out_dir)?;
    let nets = MODALITIES
        .iter()
        .map(|m| {
            let net = FusionNet::<f32>::from_tensor_file(&TensorFile::read(&checkpoint(models_dir, m))?)?;
            if net.shape() != cfg.net_shape() {
                return Err(Error::ShapeMismatch(format!("{m} checkpoint is {:?}, configuration expects {:?}", net.shape(), cfg.net_shape())));
            }
            Ok(net)
        })
        .collect::<Result<Vec<_>>>()?;
    write_split(out_dir, &read_split(models_dir)?)?;
    Ok(for_each_sample("extract", &manifest.records, |r| {
        let id = r.sample_id();
        let mut fc7 = Vec::new();
        for (net, modality) in nets.iter().zip(MODALITIES) {
            let f = TensorFile::read(&conv_features(features_dir, &id, modality))?;
            let x = net_input(&f, cfg.features.region, false)?;
            let v = extract_fc7_with(net, &x, cfg.net.fc7_relu)?;
            fc7.push(v.iter().map(|&a| a as f64).collect::<Vec<f64>>());
        }
        write_vectors(out_dir, &id, &fc7[0], &fc7[1])
    }))
}

/// Labelled samples of `pool` at the protocol intensities, reading entry
/// `entry` of each sample's vector file in `dir`.
pub fn eval_samples(manifest: &Manifest, dir: &Path, entry: &str, pool: &[String], cfg: &PipelineConfig) -> Result<Vec<EvalSample>> {
    let keep: BTreeSet<&String> = pool.iter().collect();
    manifest
        .records
        .iter()
        .filter(|r| r.label().is_some() && keep.contains(&r.subject_id) && cfg.protocol.intensities.contains(&r.intensity))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|r| {
            let id = r.sample_id();
            let f = TensorFile::read(&vectors(dir, &id)).map_err(|e| e.in_sample(&id))?;
            Ok(EvalSample {
                features: f.require(entry).map_err(|e| e.in_sample(&id))?.to_f64(),
                sample_id: id,
                subject: r.subject_id.clone(),
                label: r.label().expect("filtered to labelled records"),
                intensity: r.intensity,
            })
        })
        .collect()
}

/// Fits PCA on all evaluation-subject vectors and writes the model plus the
/// reduced vectors (`reduced` entry). A standalone inspection stage; the
/// protocol refits per fold.
pub fn pca_stage(manifest: &Manifest, in_dir: &Path, out_dir: &Path, cfg: &PipelineConfig) -> Result<StageReport> {
    require(in_dir.to_path_buf())?;
    create_dir(out_dir)?;
    let split = read_split(in_dir)?;
    let samples = eval_samples(manifest, in_dir, cfg.evaluate.modality.name(), &split.eval, cfg)?;
    let xs: Vec<Vec<f64>> = samples.iter().map(|s| s.features.clone()).collect();
    let model = pca_fit(&xs, cfg.evaluate.target_variance)?;
    model.to_tensor_file()?.write(&out_dir.join("pca.fpt"))?;
    let summary = format!(
        "dimension {}\ncomponents {}\nexplained_ratio {}\nsamples {}\n",
        model.dim(),
        model.components(),
        model.explained_ratio,
        samples.len()
    );
    write_atomic(&out_dir.join("pca.txt"), summary.as_bytes())?;
    write_split(out_dir, &split)?;
    let mut report = StageReport {
        stage: "pca",
        ..Default::default()
    };
    for s in &samples {
        let z = model.transform(&s.features)?;
        let mut f = TensorFile::new();
        f.insert("reduced", FeatureTensor::from_f64(vec![z.len()], &z)?);
        f.write(&vectors(out_dir, &s.sample_id))?;
        report.processed += 1;
    }
    Ok(report)
}

/// Trains a standardized multi-class SVM on the reduced vectors of the
/// evaluation subjects and writes the model with its training accuracy.
pub fn svm_stage(manifest: &Manifest, in_dir: &Path, out_dir: &Path, cfg: &PipelineConfig) -> Result<StageReport> {
    require(in_dir.to_path_buf())?;
    create_dir(out_dir)?;
    let split = read_split(in_dir)?;
    PcaModel::from_tensor_file(&TensorFile::read(&in_dir.join("pca.fpt"))?)?;
    let samples = eval_samples(manifest, in_dir, "reduced", &split.eval, cfg)?;
    let xs: Vec<Vec<f64>> = samples.iter().map(|s| s.features.clone()).collect();
    let ys: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let scaler = Standardizer::fit(&xs)?;
    let train: Vec<Vec<f64>> = xs.iter().map(|x| scaler.apply(x)).collect();
    let model = svm_train_multiclass(&train, &ys, &cfg.svm)?;
    let correct = train.iter().zip(&ys).filter(|(x, &y)| model.predict(x) == y).count();
    let mut f = model.to_tensor_file()?;
    f.insert("standardizer.mean", FeatureTensor::from_f64(vec![scaler.mean.len()], &scaler.mean)?);
    f.insert("standardizer.scale", FeatureTensor::from_f64(vec![scaler.scale.len()], &scaler.scale)?);
    f.write(&out_dir.join("svm.fpt"))?;
    let text = format!("{}training_accuracy {}\n", model.manifest(), correct as f64 / ys.len() as f64);
    write_atomic(&out_dir.join("svm.txt"), text.as_bytes())?;
    Ok(StageReport {
        stage: "svm",
        processed: samples.len(),
        failures: Vec::new(),
    })
}

/// Runs the cross-validation protocol on the vectors in `in_dir` and writes
/// `report.json` and `report.txt`.
pub fn evaluate_stage(manifest: &Manifest, in_dir: &Path, out_dir: &Path, cfg: &PipelineConfig) -> Result<EvalReport> {
    require(in_dir.to_path_buf())?;
    create_dir(out_dir)?;
    let split = read_split(in_dir)?;
    let samples = eval_samples(manifest, in_dir, cfg.evaluate.modality.name(), &split.eval, cfg)?;
    let classifier = PcaSvmClassifier {
        target_variance: cfg.evaluate.target_variance,
        kernel: cfg.svm,
    };
    let report = run_protocol(&samples, &split.eval, &cfg.protocol, &classifier)?;
    write_atomic(&out_dir.join(REPORT_JSON), report.to_json().as_bytes())?;
    write_atomic(&out_dir.join(REPORT_TEXT), report.to_text().as_bytes())?;
    Ok(report)
}

/// Runs every stage under `work_dir` (see [`dirs`]) and returns the report.
/// Fails on the first stage with a failed sample.
pub fn run_all(manifest: &Manifest, work_dir: &Path, cfg: &PipelineConfig) -> Result<EvalReport> {
    let d = |name: &str| work_dir.join(name);
    align_stage(manifest, &d(dirs::ALIGNED), cfg)?.into_result()?;
    parts_stage(manifest, &d(dirs::ALIGNED), &d(dirs::PARTS), cfg)?.into_result()?;
    features_stage(manifest, &d(dirs::PARTS), &d(dirs::FEATURES), cfg)?.into_result()?;
    let vectors_dir = if cfg.features.source.is_deep() {
        train_fusion_stage(manifest, &d(dirs::FEATURES), &d(dirs::MODELS), cfg)?;
        extract_stage(manifest, &d(dirs::FEATURES), &d(dirs::MODELS), &d(dirs::FC7), cfg)?.into_result()?;
        d(dirs::FC7)
    } else {
        d(dirs::FEATURES)
    };
    evaluate_stage(manifest, &vectors_dir, &d(dirs::REPORT), cfg)
}

/// Mean inner-eye distance over a seeded random batch of `batch` samples
/// (all samples when `None`), from the manifest's landmark files.
pub fn reference_distance(manifest: &Manifest, batch: Option<usize>, seed: u64) -> Result<f64> {
    let mut records: Vec<&SampleRecord> = manifest.records.iter().collect();
    if records.is_empty() {
        return Err(Error::EmptySet("manifest"));
    }
    records.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    records.truncate(batch.unwrap_or(usize::MAX).max(1));
    let distances = records
        .par_iter()
        .map(|r| Ok(interocular_distance(&LandmarkSet::read(&r.landmarks_path).map_err(|e| e.in_sample(r.sample_id()))?)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(distances.iter().sum::<f64>() / distances.len() as f64)
}

/// Runs `f` on a pool of `jobs` threads (`0` keeps rayon's default).
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(f))
}

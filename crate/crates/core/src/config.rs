//! Pipeline configuration loaded from a sectioned TOML file. Unknown keys are
//! rejected everywhere.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::descriptors::{HogParams, LbpParams};
use crate::error::{Error, Result};
use crate::fusionnet::{NetShape, TrainConfig, CONV_DIMS};
use crate::harness::{derive_seed, ProtocolConfig};
use crate::landmarks::DEFAULT_REF_DISTANCE;
use crate::parts::{DEFAULT_PAD, MAX_PAD};
use crate::reduce::DEFAULT_TARGET_VARIANCE;
use crate::svm::KernelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    StubEncoder,
    TensorFiles,
    Hog,
    Ulbp,
}

impl FeatureSource {
    /// Whether the source yields conv maps for the fusion net.
    pub fn is_deep(self) -> bool {
        matches!(self, FeatureSource::StubEncoder | FeatureSource::TensorFiles)
    }
}

impl std::str::FromStr for FeatureSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "stub_encoder" => Ok(FeatureSource::StubEncoder),
            "tensor_files" => Ok(FeatureSource::TensorFiles),
            "hog" => Ok(FeatureSource::Hog),
            "ulbp" => Ok(FeatureSource::Ulbp),
            _ => Err(Error::Config(format!("unknown feature source {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceRegion {
    /// Four part crops.
    Parts,
    /// One crop of the whole face.
    WholeFace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Texture,
    Depth,
    Fused,
}

impl Modality {
    pub fn name(self) -> &'static str {
        match self {
            Modality::Texture => "texture",
            Modality::Depth => "depth",
            Modality::Fused => "fused",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlignSection {
    pub ref_interocular_distance: f64,
}

impl Default for AlignSection {
    fn default() -> Self {
        AlignSection {
            ref_interocular_distance: DEFAULT_REF_DISTANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartsSection {
    pub pad: f64,
}

impl Default for PartsSection {
    fn default() -> Self {
        PartsSection { pad: DEFAULT_PAD }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturesSection {
    pub source: FeatureSource,
    pub region: FaceRegion,
    pub encoder_seed: u64,
    /// Also encode horizontally flipped crops for training augmentation.
    pub flip_augment: bool,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        FeaturesSection {
            source: FeatureSource::StubEncoder,
            region: FaceRegion::Parts,
            encoder_seed: 0,
            flip_augment: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetSection {
    pub fc6: usize,
    pub fc7: usize,
    pub fc7_relu: bool,
    /// Fraction of fine-tuning subjects held out for epoch selection.
    pub val_fraction: f64,
}

impl Default for NetSection {
    fn default() -> Self {
        NetSection {
            fc6: 4096,
            fc7: 2048,
            fc7_relu: false,
            val_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateSection {
    pub target_variance: f64,
    pub modality: Modality,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection {
            target_variance: DEFAULT_TARGET_VARIANCE,
            modality: Modality::Fused,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub align: AlignSection,
    pub parts: PartsSection,
    pub hog: HogParams,
    pub lbp: LbpParams,
    pub features: FeaturesSection,
    pub net: NetSection,
    pub train: TrainConfig,
    pub svm: KernelParams,
    pub evaluate: EvaluateSection,
    pub protocol: ProtocolConfig,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&crate::io_util::read_to_string(path)?).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Replaces the master seed and every seed derived from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.features.encoder_seed = derive_seed(seed, 1);
        self.train.seed = derive_seed(seed, 2);
        self.protocol.seed = derive_seed(seed, 3);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let r = self.align.ref_interocular_distance;
        if !(r.is_finite() && r > 0.0) {
            return bad(format!("align.ref_interocular_distance must be positive, got {r}"));
        }
        if !(0.0..=MAX_PAD).contains(&self.parts.pad) {
            return bad(format!("parts.pad must lie in [0, {MAX_PAD}], got {}", self.parts.pad));
        }
        self.hog.validate()?;
        self.lbp.validate()?;
        if self.net.fc6 == 0 || self.net.fc7 == 0 {
            return bad("net widths must be positive".into());
        }
        if !(self.net.val_fraction > 0.0 && self.net.val_fraction < 1.0) {
            return bad(format!("net.val_fraction must lie in (0, 1), got {}", self.net.val_fraction));
        }
        self.train.validate()?;
        self.svm.validate()?;
        let t = self.evaluate.target_variance;
        if !(t > 0.0 && t <= 1.0) {
            return bad(format!("evaluate.target_variance must lie in (0, 1], got {t}"));
        }
        self.protocol.validate()
    }

    /// Network shape for the configured region.
    pub fn net_shape(&self) -> NetShape {
        let base = match self.features.region {
            FaceRegion::Parts => NetShape::PARTS,
            FaceRegion::WholeFace => NetShape::SINGLE_BRANCH,
        };
        debug_assert_eq!(NetShape::SINGLE_BRANCH.input, CONV_DIMS.iter().product::<usize>());
        base.with_widths(self.net.fc6, self.net.fc7)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(PipelineConfig::from_toml("").unwrap(), cfg);
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = PipelineConfig::from_toml(
            "seed = 4\n[parts]\npad = 5.0\n[features]\nsource = \"hog\"\nregion = \"whole_face\"\n[protocol]\nn_folds = 6\n",
        )
        .unwrap();
        assert_eq!(cfg.parts.pad, 5.0);
        assert_eq!(cfg.features.source, FeatureSource::Hog);
        assert_eq!(cfg.features.region, FaceRegion::WholeFace);
        assert_eq!(cfg.protocol.n_folds, 6);
        assert_eq!(cfg.protocol.n_tests, 100);
        assert_eq!(cfg.net_shape().input, 18432);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(PipelineConfig::from_toml("[parts]\npadd = 5.0\n").is_err());
        assert!(PipelineConfig::from_toml("[bogus]\n").is_err());
        assert!(PipelineConfig::from_toml("[parts]\npad = 40.0\n").is_err());
        assert!(PipelineConfig::from_toml("[train]\nlr_start = 1e-5\nlr_end = 1e-4\n").is_err());
        assert!(PipelineConfig::from_toml("[features]\nsource = \"sift\"\n").is_err());
    }

    #[test]
    fn seed_derivation_is_stable() {
        let a = PipelineConfig::default().with_seed(7);
        let b = PipelineConfig::default().with_seed(7);
        assert_eq!(a, b);
        assert_ne!(a.train.seed, PipelineConfig::default().with_seed(8).train.seed);
    }
}

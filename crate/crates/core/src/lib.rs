//! Facial expression recognition from facial parts.
//!
//! Faces are aligned from 49 landmarks, split into eyebrow, eye, nose and
//! mouth crops, encoded either with hand-crafted descriptors (HOG, uniform
//! LBP) or with conv feature maps fused by a small fully connected network,
//! reduced with PCA and classified with a polynomial-kernel SVM under
//! subject-independent cross-validation.
//!
//! Each processing stage is a library function; [`pipeline`] chains them
//! through stage directories and the `faceparts` binary exposes them as
//! subcommands.

pub mod config;
pub mod descriptors;
pub mod error;
pub mod fusionnet;
pub mod harness;
pub mod imgcore;
pub mod io_util;
pub mod landmarks;
pub mod parts;
pub mod pipeline;
pub mod reduce;
pub mod svm;
pub mod synth;
pub mod tensor;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use harness::{Expression, Manifest, SampleRecord};
pub use imgcore::{Image, Point};
pub use landmarks::LandmarkSet;
pub use parts::PartKind;
pub use tensor::{FeatureTensor, TensorFile};

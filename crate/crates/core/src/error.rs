use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scale factor {0} outside the allowed range (0.1, 10)")]
    NonPositiveFactor(f64),
    #[error("crop region is empty after clamping to the image")]
    EmptyRegion,
    #[error("degenerate landmarks: {0}")]
    DegenerateLandmarks(&'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("required alignment scale {0} outside (0.1, 10)")]
    ExtremeScale(f64),
    #[error("bad dimensions: {0}")]
    BadDimensions(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty {0} set")]
    EmptySet(&'static str),
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    DivergedLoss { epoch: usize, loss: f64 },
    #[error("total variance of the data is zero")]
    DegenerateData,
    #[error("only one class present in the training labels")]
    SingleClass,
    #[error("need at least {needed} subjects, found {found}")]
    TooFewSubjects { needed: usize, found: usize },
    #[error("cannot split {subjects} subjects into {folds} folds")]
    BadFoldCount { folds: usize, subjects: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("subject {0} appears in both training and test folds")]
    SubjectLeak(String),
    #[error("malformed {what} at {location}: {message}")]
    Parse {
        what: &'static str,
        location: String,
        message: String,
    },
    #[error("tensor file truncated at byte {offset}: {message}")]
    Truncated { offset: usize, message: String },
    #[error("missing stage output: expected {}", .0.display())]
    MissingStageOutput(PathBuf),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("sample {sample}: {source}")]
    Sample {
        sample: String,
        #[source]
        source: Box<Error>,
    },
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_sample(self, sample: impl Into<String>) -> Self {
        Error::Sample {
            sample: sample.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

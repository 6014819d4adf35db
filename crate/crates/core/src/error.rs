use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("invalid shape {0:?}: every dimension must be positive")]
    InvalidShape(Vec<usize>),
    #[error("shape {shape:?} needs {} elements, got {len}", shape.iter().product::<usize>())]
    LengthMismatch { shape: Vec<usize>, len: usize },
    #[error("{op}: expected shape {expected:?}, got {got:?}")]
    ShapeMismatch { op: &'static str, expected: Vec<usize>, got: Vec<usize> },
    #[error("non-finite value produced by {0}")]
    NonFinite(String),
    #[error("{0}")]
    InvalidArgument(String),
}

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid architecture: {0}")]
    InvalidConfig(String),
    #[error("layer {layer}: {source}")]
    Layer {
        layer: String,
        #[source]
        source: TensorError,
    },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("gradient tape does not belong to this graph: {0}")]
    TapeMismatch(String),
    #[error("unknown parameter tensor {0}")]
    UnknownParameter(String),
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing split directory {0}")]
    MissingSplit(PathBuf),
    #[error("no classes found under {0}")]
    NoClasses(PathBuf),
    #[error("class directory {0} contains no images")]
    EmptyClass(PathBuf),
    #[error("class mismatch across splits: train {train:?}, test {test:?}")]
    ClassMismatch { train: Vec<String>, test: Vec<String> },
    #[error("cannot decode image {path}: {reason}")]
    Decode { path: PathBuf, reason: String },
    #[error("image {0} has a zero dimension")]
    ZeroDimension(PathBuf),
    #[error("split {0} is empty")]
    EmptySplit(String),
    #[error("invalid augmentation config: {0}")]
    InvalidAugment(String),
    #[error("unknown normalization mode {0:?} (expected scale01 or imagenet)")]
    UnknownNormalization(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("not a weight archive (bad magic bytes)")]
    BadMagic,
    #[error("unsupported archive version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("checksum mismatch in tensor {0}")]
    Checksum(String),
    #[error("shape mismatch for tensor {name}: archive {archive:?}, graph {graph:?}")]
    ShapeMismatch { name: String, archive: Vec<usize>, graph: Vec<usize> },
    #[error("archive is missing required tensor {0}")]
    MissingTensor(String),
    #[error("archive metadata does not describe a valid graph: {0}")]
    Graph(#[from] NetError),
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperParams(String),
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },
    #[error("gradient for {0} does not match a trainable parameter")]
    GradientMismatch(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("checkpoint write failed: {0}")]
    Checkpoint(#[from] WeightsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no samples to evaluate")]
    Empty,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("length mismatch: {0} labels vs {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("confusion matrix has no counts")]
    AllZero,
    #[error("class {0} has no positive or no negative samples; ROC undefined")]
    DegenerateClass(usize),
    #[error("score row {row} has {got} entries, expected {expected}")]
    ScoreWidth { row: usize, got: usize, expected: usize },
    #[error("unknown report format {0:?}")]
    UnknownFormat(String),
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

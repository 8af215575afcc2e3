use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Pipeline stage, used to tag errors raised inside [`crate::assemble::super_resolve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Encode,
    TrainSpatial,
    InferSpatial,
    TrainTemporal,
    PredictTimestamps,
    Assemble,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Encode => "encode",
            Stage::TrainSpatial => "train_spatial",
            Stage::InferSpatial => "infer_spatial",
            Stage::TrainTemporal => "train_temporal",
            Stage::PredictTimestamps => "predict_timestamps",
            Stage::Assemble => "assemble",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("event ({x}, {y}) lies outside the {width}x{height} sensor")]
    OutOfBounds { x: u32, y: u32, width: u32, height: u32 },
    #[error("polarity {0} is not -1 or +1")]
    BadPolarity(i8),
    #[error("time extent {hint} us is smaller than the last timestamp {max} us")]
    TimeExtentTooSmall { hint: u64, max: u64 },
    #[error("sensor geometry {width}x{height} is degenerate")]
    BadGeometry { width: u32, height: u32 },
    #[error("non-empty stream has zero time extent")]
    ZeroExtent,
    #[error("scale factor {0} must be at least 1")]
    BadFactor(usize),
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: alloc::vec::Vec<usize>, got: alloc::vec::Vec<usize> },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("mask selects no elements")]
    EmptyMask,
    #[error("no forward trace recorded")]
    NoTrace,
    #[error("voxel grid {height}x{width} is smaller than 8x8 after downsampling by {factor}")]
    GridTooSmall { height: usize, width: usize, factor: usize },
    #[error("cannot train on an empty stream")]
    EmptyStream,
    #[error("training loss became non-finite at step {step} (last finite loss {last_finite})")]
    NonFiniteLoss { step: usize, last_finite: f64 },
    #[error("model was trained for scale {trained}, asked for scale {requested}")]
    ScaleMismatch { trained: usize, requested: usize },
    #[error("normalized position ({0}, {1}) lies outside the unit square")]
    BadPosition(f64, f64),
    #[error("voxel grid and event stream do not come from the same source: {0}")]
    SourceMismatch(String),
    #[error("timestamp field does not cover the voxel grid: {0}")]
    FieldMismatch(String),
    #[error("streams have different geometries")]
    GeometryMismatch,
    #[error("bin count must be at least 1")]
    BadBinCount,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{stage}: {source}")]
    Stage { stage: Stage, source: Box<Error> },
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }
}

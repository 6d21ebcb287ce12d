use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point {index} has a non-finite coordinate")]
    NonFinitePoint { index: usize },

    #[error("intensity channel has {values} values for {points} points")]
    IntensityLength { points: usize, values: usize },

    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),

    #[error("invalid mask set: {0}")]
    InvalidMaskSet(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("cannot build a neighbor graph over an empty point set")]
    EmptyPointSet,

    #[error("in-view point {point} rounds to pixel ({u}, {v}) outside the {width}x{height} image")]
    PixelOutOfBounds {
        point: usize,
        u: i64,
        v: i64,
        width: u32,
        height: u32,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("row {row} has zero total weight")]
    ZeroRow { row: usize },

    #[error("label length mismatch: prediction has {pred} points, truth has {truth}")]
    LengthMismatch { pred: usize, truth: usize },

    #[error("instance {instance} carries more than one class id ({first} and {second})")]
    InconsistentInstanceClass {
        instance: u32,
        first: u32,
        second: u32,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: length {len} bytes is not a multiple of 16 (truncated record at byte {offset})")]
    Truncated {
        path: PathBuf,
        len: usize,
        offset: usize,
    },

    #[error("{path}: record {record} (byte {offset}) has a non-finite value")]
    NonFiniteRecord {
        path: PathBuf,
        record: usize,
        offset: usize,
    },

    #[error("{path}:{line}: {message}")]
    Syntax {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: missing required key `{key}`")]
    MissingKey { path: PathBuf, key: String },

    #[error("{path}:{line}: key `{key}` expects {expected} values, found {found}")]
    ValueCount {
        path: PathBuf,
        line: usize,
        key: String,
        expected: usize,
        found: usize,
    },

    #[error("{path}: instance {instance} run lengths sum to {found}, expected {expected}")]
    RleSum {
        path: PathBuf,
        instance: u32,
        expected: u64,
        found: u64,
    },

    #[error("{path}: expected {expected} points, found {found}")]
    PointCount {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{path}: instance {instance} header lists {header} points but the body has {body}")]
    HeaderCount {
        path: PathBuf,
        instance: u32,
        header: usize,
        body: usize,
    },
}

use std::path::PathBuf;

use crate::volume::VoxelId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {err}", path.display())]
    Io { path: PathBuf, err: std::io::Error },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("payload size {actual} does not match the header ({expected})")]
    DimsMismatch { expected: usize, actual: usize },
    #[error("unsupported data type `{0}`")]
    UnsupportedDtype(String),
    #[error("invalid volume: {0}")]
    InvalidVolume(String),
    #[error("voxel {0} is not foreground")]
    NotForeground(VoxelId),
    #[error("voxel {0} lies outside the volume")]
    OutOfBounds(VoxelId),
    #[error("voxel {0} is unreachable from the source")]
    Unreachable(VoxelId),
    #[error("soma mask is empty")]
    EmptySoma,
    #[error("foreground is empty")]
    EmptyForeground,
    #[error("skeleton structure: {0}")]
    Structure(String),
    #[error("segment {segment} is disconnected from its parent")]
    Disconnected { segment: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("vesselness response has no positive value")]
    NoPositiveResponse,
    #[error("spacing mismatch: {0:?} vs {1:?}")]
    SpacingMismatch([f64; 3], [f64; 3]),
    #[error("frame {index}: {err}")]
    Frame { index: usize, err: Box<Error> },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            err: source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geographic point ({lat}, {lon})")]
    InvalidGeoPoint { lat: f64, lon: f64 },

    #[error("local frame degenerate at latitude {0} (|lat| must be <= 89)")]
    DegenerateFrame(f64),

    #[error("point ({lat}, {lon}) is outside the validity range of the local frame")]
    OutOfFrame { lat: f64, lon: f64 },

    #[error("footprint {id}: {reason}")]
    InvalidFootprint { id: String, reason: String },

    #[error("{}: {field}: {reason}", path.display())]
    Schema {
        path: PathBuf,
        field: String,
        reason: String,
    },

    #[error("label map for image {image_id} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch {
        image_id: String,
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },

    #[error("detection references unknown image {0}")]
    UnknownImage(String),

    #[error("no label map for image {0}")]
    MissingLabelMap(String),

    #[error("{}: malformed PGM: {reason}", path.display())]
    Pgm { path: PathBuf, reason: String },

    #[error("unknown category pixel id {0}")]
    UnknownPixelId(u8),

    #[error("unknown category name {0:?}")]
    UnknownCategory(String),

    #[error("heading vector has zero length")]
    ZeroHeading,

    #[error("tree too deep for heap numbering")]
    TreeTooDeep,

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(
        path: impl Into<PathBuf>,
        field: impl Into<String>,
        reason: impl Into<String>,
    ) -> Self {
        Error::Schema {
            path: path.into(),
            field: field.into(),
            reason: reason.into(),
        }
    }
}

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::de::DeserializeOwned;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("face {face} references vertex {index} but only {vertex_count} vertices exist")]
    IndexOutOfRange {
        face: usize,
        index: i64,
        vertex_count: usize,
    },
    #[error("mesh bounding box has zero extent")]
    ZeroExtent,
    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: String, message: String },
    #[error("sparse grid band is incomplete: {} sign-change edges have missing neighbor cells (first: {:?})", .cells.len(), .cells.first())]
    BandIncomplete { cells: Vec<[i32; 3]> },
    #[error("mesh is not manifold: {0}")]
    NonManifold(String),
    #[error("mesh is not watertight: {0}")]
    NotWatertight(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("adjudicator returned candidate index {index} but pool has {len} candidates")]
    AdjudicatorIndex { index: usize, len: usize },
    #[error("adjudicator protocol violation: {0}")]
    AdjudicatorProtocol(String),
    #[error("kinematic graph has a cycle through parts {0:?}")]
    Cycle(Vec<usize>),
    #[error("kinematic graph is invalid: {0}")]
    InvalidGraph(String),
    #[error("missing asset `{0}`")]
    MissingAsset(String),
    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error("{0}")]
    Other(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn param(name: &str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            message: message.into(),
        }
    }

    pub fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut s = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => {
                let _ = write!(s, "/{index}");
            }
            Segment::Map { key } => {
                let _ = write!(s, "/{}", key.replace('~', "~0").replace('/', "~1"));
            }
            Segment::Enum { variant } => {
                let _ = write!(s, "/{variant}");
            }
            Segment::Unknown => s.push_str("/?"),
        }
    }
    s
}

/// Deserializes JSON, reporting failures as [`Error::Schema`] with a JSON
/// pointer to the offending value.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        pointer: json_pointer(e.path()),
        message: e.inner().to_string(),
    })
}

use thiserror::Error;

use crate::hypertree::{BagId, RelId, Version, Violation};
use crate::relation::AttrId;
use crate::semiring::SemiringError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Semiring(#[from] SemiringError),
    #[error("attribute {0} is not in the schema")]
    MissingAttribute(AttrId),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("junction hypertree violates {n} propert{s}: {v:?}", n = .0.len(), s = if .0.len() == 1 { "y" } else { "ies" }, v = .0)]
    InvalidJt(Vec<Violation>),
    #[error("relation hypergraph is cyclic; supply a junction hypertree explicitly")]
    Cyclic,
    #[error("unknown bag {0}")]
    UnknownBag(BagId),
    #[error("unknown relation {0}")]
    UnknownRelation(RelId),
    #[error("relation {rel} has no version {version}")]
    UnknownVersion { rel: RelId, version: Version },
    #[error("bags {0} and {1} are not adjacent")]
    NotAnEdge(BagId, BagId),
    #[error("message {0} -> {1} is missing or invalid")]
    MissingMessage(BagId, BagId),
    #[error("junction hypertree is not calibrated")]
    NotCalibrated,
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("{0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

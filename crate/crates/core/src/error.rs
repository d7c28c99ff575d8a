use std::path::PathBuf;

use thiserror::Error;

use crate::lake_model::{ColumnRef, TupleRef};

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: row {row} has {found} cells, header has {expected}")]
    RaggedRow {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}: duplicate column header {header:?} after normalization")]
    DuplicateHeader { path: PathBuf, header: String },

    #[error("query table {table} rejected: {rows} rows (minimum 3)")]
    QueryTooSmall { table: String, rows: usize },

    #[error("cannot-link constraint makes {requested} clusters unreachable (minimum reachable {reachable})")]
    ConstraintInfeasible { requested: usize, reachable: usize },

    #[error("silhouette is undefined for {0} cluster(s)")]
    SilhouetteUndefined(usize),

    #[error("no feasible cluster count in the search range")]
    NoFeasibleClusterCount,

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("zero vector has no cosine direction")]
    ZeroVector,

    #[error("non-finite value in embedding for {0}")]
    NonFinite(String),

    #[error("embedding provider failed on {id}: {reason}")]
    Provider { id: TupleRef, reason: String },

    #[error("no embedding for tuple {0}")]
    MissingTupleEmbedding(TupleRef),

    #[error("no embedding for column {0}")]
    MissingColumnEmbedding(ColumnRef),

    #[error("duplicate id {0} in embedding matrix")]
    DuplicateId(TupleRef),

    #[error("need at least {needed} tuples, have {available}")]
    NotEnoughTuples { needed: usize, available: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("enumeration of {0} subsets exceeds the brute-force guard")]
    GuardExceeded(u128),

    #[error("unknown column {0}")]
    UnknownColumn(String),

    #[error("missing score for method {method} on query {query}")]
    MissingScore { query: String, method: String },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = AbxError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AbxError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid embedding matrix: {0}")]
    InvalidMatrix(String),

    #[error("bad embedding file {path}: {reason}")]
    BadFile { path: PathBuf, reason: String },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("manifest entry for {cell} does not match file header: {reason}")]
    HeaderMismatch { cell: String, reason: String },

    #[error("no matrix for checkpoint {checkpoint}, layer {layer}, language {language}")]
    MissingMatrix {
        checkpoint: u64,
        layer: u32,
        language: String,
    },

    #[error("matrix ({checkpoint}, {layer}, {language}) failed to load: {reason}")]
    Unavailable {
        checkpoint: u64,
        layer: u32,
        language: String,
        reason: String,
    },

    #[error("meaning id {meaning_id} not present in matrix ({checkpoint}, {layer}, {language})")]
    UnknownMeaning {
        checkpoint: u64,
        layer: u32,
        language: String,
        meaning_id: u64,
    },

    #[error("corpus line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("duplicate record for meaning {meaning_id} in language {language} (line {line})")]
    DuplicateRecord {
        meaning_id: u64,
        language: String,
        line: usize,
    },

    #[error("unknown language {0:?}")]
    UnknownLanguage(String),

    #[error("pair {lang1}-{lang2} skipped: {shared} shared meanings, {required} required")]
    PairSkipped {
        lang1: String,
        lang2: String,
        shared: usize,
        required: usize,
    },

    #[error("invalid triplet request: {0}")]
    InvalidRequest(String),

    #[error("triplet pool of {pool} exceeds enumeration cap {cap}")]
    PoolTooLarge { pool: u128, cap: u128 },

    #[error("zero-norm vector")]
    ZeroNorm,

    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),

    #[error("missing layer {0} for layer average")]
    MissingLayer(u32),

    #[error("incomplete pair coverage, missing: {0:?}")]
    IncompletePairs(Vec<(String, String)>),

    #[error("statistics: {0}")]
    Stats(String),

    #[error("selection: {0}")]
    Selection(String),

    #[error("table error: {0}")]
    Table(String),

    #[error("config error: {0}")]
    Config(String),
}

impl AbxError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AbxError::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used in run error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            AbxError::Io { .. } => "io",
            AbxError::InvalidMatrix(_) => "invalid_matrix",
            AbxError::BadFile { .. } => "bad_file",
            AbxError::UnsupportedVersion(_) => "unsupported_version",
            AbxError::Manifest(_) => "manifest",
            AbxError::HeaderMismatch { .. } => "header_mismatch",
            AbxError::MissingMatrix { .. } => "missing_matrix",
            AbxError::Unavailable { .. } => "unavailable_matrix",
            AbxError::UnknownMeaning { .. } => "unknown_meaning",
            AbxError::MalformedLine { .. } => "malformed_line",
            AbxError::DuplicateRecord { .. } => "duplicate_record",
            AbxError::UnknownLanguage(_) => "unknown_language",
            AbxError::PairSkipped { .. } => "pair_skipped",
            AbxError::InvalidRequest(_) => "invalid_request",
            AbxError::PoolTooLarge { .. } => "pool_too_large",
            AbxError::ZeroNorm => "zero_norm",
            AbxError::DimMismatch(..) => "dim_mismatch",
            AbxError::MissingLayer(_) => "missing_layer",
            AbxError::IncompletePairs(_) => "incomplete_pairs",
            AbxError::Stats(_) => "stats",
            AbxError::Selection(_) => "selection",
            AbxError::Table(_) => "table",
            AbxError::Config(_) => "config",
        }
    }
}

impl From<csv::Error> for AbxError {
    fn from(e: csv::Error) -> Self {
        AbxError::Table(e.to_string())
    }
}

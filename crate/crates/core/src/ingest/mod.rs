//! Getting records in: the line-delimited trace format, file-backed chain
//! connectors, relayer log adaptors and bridge configuration.

mod config;
mod connector;
mod wire;

use thiserror::Error;

pub use config::{load_config, BridgeConfig, MatchingMode, CONFIG_ENV};
pub use connector::{adaptor_pull, ChainConnector, ConnectorBatch, FileAdaptor, FileConnector, RelayerAdaptor};
pub use wire::{
    decode_line, encode_line, read_trace_file, read_trace_str, write_records, write_trace_file,
    ReadOutcome, Strictness, TraceReader, Warning, HEADER,
};

use crate::builder::{Payload, RawRecord};
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    RecordParse { line: usize, msg: String },
    #[error("config: {0}")]
    ConfigParse(String),
    #[error("config field {field}: {msg}")]
    ConfigInvalid { field: String, msg: String },
}

impl IngestError {
    /// Prefixes a parse error with the file it came from.
    pub fn in_file(self, path: &std::path::Path) -> IngestError {
        match self {
            IngestError::RecordParse { line, msg } => IngestError::RecordParse {
                line,
                msg: format!("{}: {msg}", path.display()),
            },
            other => other,
        }
    }
}

/// Drops records touching a filtered address. Returns the kept records
/// and how many were dropped.
pub fn apply_filters(records: Vec<RawRecord>, cfg: &BridgeConfig) -> (Vec<RawRecord>, usize) {
    if !cfg.has_filters() {
        return (records, 0);
    }
    let before = records.len();
    let kept: Vec<RawRecord> = records
        .into_iter()
        .filter(|r| !r.participants().into_iter().any(|a| cfg.is_filtered(a)))
        .collect();
    let dropped = before - kept.len();
    (kept, dropped)
}

/// Checks that native assets carry the symbol configured for their chain.
pub fn check_native_symbols(rec: &RawRecord, cfg: &BridgeConfig) -> Result<(), ModelError> {
    for asset in rec.assets() {
        asset.check_native_symbol(cfg.native_symbol(asset.chain()))?;
    }
    Ok(())
}

/// Whether a record is an off-chain relayer action.
pub fn is_action(rec: &RawRecord) -> bool {
    matches!(rec.payload, Payload::LockAction(_) | Payload::UnlockAction(_))
}

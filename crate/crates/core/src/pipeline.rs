//! File-to-violations plumbing shared by the CLI and the C interface.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::builder::{BuildError, Dataset, RawRecord, SequenceBuilder};
use crate::checker::{check_all, CheckOptions, Violation};
use crate::facts::FactError;
use crate::ingest::{
    adaptor_pull, apply_filters, check_native_symbols, encode_line, read_trace_file, BridgeConfig,
    IngestError, Strictness, Warning,
};
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{path}: {source}")]
    Build {
        path: String,
        #[source]
        source: BuildError,
    },
    #[error("{path}: {source}")]
    Model {
        path: String,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Fact(#[from] FactError),
}

#[derive(Debug, Clone, Default)]
pub struct Input {
    pub trace_files: Vec<PathBuf>,
    pub action_logs: Vec<PathBuf>,
    pub strictness: Strictness,
}

#[derive(Debug)]
pub struct Analysis {
    pub dataset: Dataset,
    pub violations: Vec<Violation>,
    /// Records removed by address filters.
    pub dropped: usize,
    pub warnings: Vec<(PathBuf, Warning)>,
    pub input_digest: String,
}

/// SHA-256 over the sorted hashes of every record's canonical line, so the
/// digest ignores record and file order.
pub fn input_digest<'a>(records: impl IntoIterator<Item = &'a RawRecord>) -> String {
    let mut hashes: Vec<[u8; 32]> = records
        .into_iter()
        .map(|r| Sha256::digest(encode_line(r).as_bytes()).into())
        .collect();
    hashes.sort_unstable();
    let mut h = Sha256::new();
    for x in &hashes {
        h.update(x);
    }
    hex::encode(h.finalize())
}

struct Loaded {
    path: PathBuf,
    records: Vec<RawRecord>,
}

fn load(input: &Input) -> Result<(Vec<Loaded>, Vec<(PathBuf, Warning)>), IngestError> {
    let mut loaded = Vec::new();
    let mut warnings = Vec::new();
    for p in &input.trace_files {
        let out = read_trace_file(p, input.strictness)?;
        warnings.extend(out.warnings.into_iter().map(|w| (p.clone(), w)));
        loaded.push(Loaded {
            path: p.clone(),
            records: out.records,
        });
    }
    for p in &input.action_logs {
        loaded.push(Loaded {
            path: p.clone(),
            records: adaptor_pull(p)?,
        });
    }
    Ok((loaded, warnings))
}

/// Builds a dataset from already-decoded record streams, one per source.
/// Ordinals are made global by offsetting each stream past the previous.
pub fn build_dataset<'a>(
    streams: impl IntoIterator<Item = (&'a Path, Vec<RawRecord>)>,
    cfg: &BridgeConfig,
) -> Result<(Dataset, usize), AnalyzeError> {
    let mut builder = SequenceBuilder::new();
    let mut dropped = 0;
    let mut offset = 0u64;
    for (path, records) in streams {
        let n = records.len() as u64;
        let (kept, d) = apply_filters(records, cfg);
        dropped += d;
        for mut r in kept {
            check_native_symbols(&r, cfg).map_err(|source| AnalyzeError::Model {
                path: path.display().to_string(),
                source,
            })?;
            r.ordinal += offset;
            builder.push(r).map_err(|source| AnalyzeError::Build {
                path: path.display().to_string(),
                source,
            })?;
        }
        offset += n;
    }
    Ok((builder.finish(), dropped))
}

/// Reads, filters, builds, correlates and checks.
pub fn analyze(input: &Input, cfg: &BridgeConfig, opts: CheckOptions) -> Result<Analysis, AnalyzeError> {
    let (loaded, warnings) = load(input)?;
    let input_digest = input_digest(loaded.iter().flat_map(|l| l.records.iter()));
    let (dataset, dropped) = build_dataset(loaded.iter().map(|l| (l.path.as_path(), l.records.clone())), cfg)?;
    let violations = check_all(&dataset, cfg, opts)?;
    Ok(Analysis {
        dataset,
        violations,
        dropped,
        warnings,
        input_digest,
    })
}

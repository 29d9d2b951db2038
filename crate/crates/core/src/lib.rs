//! Detection of cross-chain bridge attacks.
//!
//! A transfer is modeled as an execution sequence: a lock event and a
//! deposit event on the source chain, a lock action and an unlock action in
//! the off-chain relayer, and an unlock event on the destination chain.
//! [`facts`] decides validity and consistency of those states, [`checker`]
//! applies the three security patterns over a population of sequences, and
//! [`monitor`] screens a single pending unlock before it is submitted.
//!
//! ```no_run
//! use bridgewatch::{checker::CheckOptions, ingest, pipeline};
//! use std::path::PathBuf;
//!
//! let cfg = ingest::load_config("bridge.json".as_ref())?;
//! let input = pipeline::Input {
//!     trace_files: vec![PathBuf::from("eth.trace.jsonl")],
//!     action_logs: vec![PathBuf::from("relayer.jsonl")],
//!     strictness: ingest::Strictness::Strict,
//! };
//! let analysis = pipeline::analyze(&input, &cfg, CheckOptions::from_config(&cfg))?;
//! println!("{} violations", analysis.violations.len());
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod builder;
pub mod checker;
pub mod facts;
pub mod ingest;
pub mod matching;
pub mod model;
pub mod monitor;
pub mod pipeline;
pub mod report;
pub mod sim;

use std::io::Write;
use std::path::Path;

pub const TOOL_VERSION: &str = concat!("bridgewatch ", env!("CARGO_PKG_VERSION"));

/// Writes `bytes` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

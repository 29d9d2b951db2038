#![allow(dead_code)]

pub mod oracle;
pub mod world;

use std::path::{Path, PathBuf};

use bridgewatch::checker::{CheckOptions, Violation};
use bridgewatch::ingest::{BridgeConfig, Strictness};
use bridgewatch::pipeline::{self, Analysis, Input};
use bridgewatch::sim::{gen_dataset, LabeledDataset, ScenarioSpec};

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// A dataset written to a fresh temporary directory.
pub struct OnDisk {
    pub dir: tempfile::TempDir,
    pub ds: LabeledDataset,
    pub traces: Vec<PathBuf>,
    pub actions: PathBuf,
    pub config: PathBuf,
}

pub fn on_disk(spec: &ScenarioSpec) -> OnDisk {
    let dir = tempfile::tempdir().unwrap();
    let ds = gen_dataset(spec).unwrap();
    let paths = ds.write(dir.path()).unwrap();
    OnDisk {
        traces: paths[..2].to_vec(),
        actions: paths[2].clone(),
        config: paths[4].clone(),
        dir,
        ds,
    }
}

/// Trace files (`*.trace.jsonl`) and relayer log of a dataset directory.
pub fn inputs_in(dir: &Path) -> Input {
    let mut traces: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(".trace.jsonl"))
        .collect();
    traces.sort();
    let relayer = dir.join("relayer.jsonl");
    Input {
        trace_files: traces,
        action_logs: if relayer.exists() { vec![relayer] } else { Vec::new() },
        strictness: Strictness::Strict,
    }
}

pub fn analyze_dir(dir: &Path) -> (BridgeConfig, Analysis) {
    let cfg = bridgewatch::ingest::load_config(&dir.join("config.json")).unwrap();
    let analysis = pipeline::analyze(&inputs_in(dir), &cfg, CheckOptions::from_config(&cfg)).unwrap();
    (cfg, analysis)
}

pub fn analyze_disk(d: &OnDisk) -> Vec<Violation> {
    let input = Input {
        trace_files: d.traces.clone(),
        action_logs: vec![d.actions.clone()],
        strictness: Strictness::Strict,
    };
    pipeline::analyze(&input, &d.ds.config, CheckOptions::from_config(&d.ds.config))
        .unwrap()
        .violations
}

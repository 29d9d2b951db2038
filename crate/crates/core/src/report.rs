//! Analysis reports: filtering, sorting, block-range clusters, and the
//! JSONL and table renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::{json, Value};
use thiserror::Error;

use crate::checker::{BugClass, Violation};
use crate::model::{Address, ChainId, TxHash};

pub const DEFAULT_CLUSTER_GAP: u64 = 500;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("bad flag {flag}: {msg}")]
    BadFlag { flag: &'static str, msg: String },
}

/// A maximal run of violations on one chain whose consecutive blocks are
/// at most `gap` apart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub chain: ChainId,
    pub from_block: u64,
    pub to_block: u64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub violations: Vec<Violation>,
    pub summary: BTreeMap<BugClass, usize>,
    pub clusters: Vec<Cluster>,
    pub gap: u64,
    pub input_digest: String,
    pub tool_version: String,
    /// Records removed by address filters before analysis.
    pub dropped: usize,
}

impl Report {
    pub fn new(violations: Vec<Violation>, input_digest: String, gap: u64, dropped: usize) -> Self {
        let summary = summarize(&violations);
        let clusters = cluster(&violations, gap);
        Self {
            violations,
            summary,
            clusters,
            gap,
            input_digest,
            tool_version: crate::TOOL_VERSION.to_owned(),
            dropped,
        }
    }

    /// A new report restricted and ordered per `view`.
    pub fn view(&self, view: &View) -> Report {
        let mut vs: Vec<Violation> = self.violations.iter().filter(|v| view.matches(v)).cloned().collect();
        view.sort.apply(&mut vs);
        Report {
            tool_version: self.tool_version.clone(),
            ..Report::new(vs, self.input_digest.clone(), self.gap, self.dropped)
        }
    }
}

pub fn summarize(violations: &[Violation]) -> BTreeMap<BugClass, usize> {
    let mut m: BTreeMap<BugClass, usize> = BugClass::ALL.into_iter().map(|b| (b, 0)).collect();
    for v in violations {
        *m.entry(v.bug).or_default() += 1;
    }
    m
}

/// Single-linkage grouping of violation blocks per chain.
pub fn cluster(violations: &[Violation], gap: u64) -> Vec<Cluster> {
    let mut by_chain: BTreeMap<&ChainId, Vec<u64>> = BTreeMap::new();
    for v in violations {
        by_chain.entry(&v.first_seen.chain).or_default().push(v.first_seen.block);
    }
    let mut out = Vec::new();
    for (chain, mut blocks) in by_chain {
        blocks.sort_unstable();
        let mut cur = Cluster {
            chain: chain.clone(),
            from_block: blocks[0],
            to_block: blocks[0],
            count: 0,
        };
        for b in blocks {
            if b - cur.to_block > gap {
                let next = Cluster {
                    chain: chain.clone(),
                    from_block: b,
                    to_block: b,
                    count: 0,
                };
                out.push(std::mem::replace(&mut cur, next));
            }
            cur.to_block = b;
            cur.count += 1;
        }
        out.push(cur);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SortKey {
    /// First sighting, then sequence.
    #[default]
    Block,
    /// Sequence hash, lexicographic.
    Tx,
    /// Bug class, then first sighting.
    Bug,
}

impl SortKey {
    fn apply(self, vs: &mut [Violation]) {
        crate::checker::sort_violations(vs);
        match self {
            SortKey::Block => {}
            SortKey::Tx => vs.sort_by_key(|v| v.sequence.hash().to_string()),
            SortKey::Bug => vs.sort_by_key(|v| v.bug),
        }
    }
}

impl std::str::FromStr for SortKey {
    type Err = ReportError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "block" => Ok(SortKey::Block),
            "tx" => Ok(SortKey::Tx),
            "bug" => Ok(SortKey::Bug),
            _ => Err(ReportError::BadFlag {
                flag: "--sort",
                msg: format!("{s:?} is not one of block, tx, bug"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Jsonl,
    Table,
}

impl std::str::FromStr for Format {
    type Err = ReportError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "table" => Ok(Format::Table),
            _ => Err(ReportError::BadFlag {
                flag: "--format",
                msg: format!("{s:?} is not one of table, jsonl"),
            }),
        }
    }
}

/// Address filter: bare hex matches on any chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddressQuery {
    chain: Option<ChainId>,
    bytes: [u8; 20],
}

impl AddressQuery {
    pub fn parse(s: &str) -> Result<Self, ReportError> {
        let bad = || ReportError::BadFlag {
            flag: "--address",
            msg: format!("{s:?} is not 0x<40 hex> or <chain>:0x<40 hex>"),
        };
        let (chain, hex) = match s.split_once(':') {
            Some((c, h)) => (Some(ChainId::new(c).map_err(|_| bad())?), h),
            None => (None, s),
        };
        let any = ChainId::new("any").expect("valid id");
        let addr = crate::model::normalize_address(hex, &any).map_err(|_| bad())?;
        Ok(Self {
            chain,
            bytes: *addr.bytes(),
        })
    }

    fn matches(&self, a: &Address) -> bool {
        a.bytes() == &self.bytes && self.chain.as_ref().is_none_or(|c| c == a.chain())
    }
}

/// Conjunctive filters plus ordering.
#[derive(Debug, Clone, Default)]
pub struct View {
    pub bug: Option<BugClass>,
    pub from_block: Option<u64>,
    pub to_block: Option<u64>,
    pub address: Option<AddressQuery>,
    pub tx: Option<TxHash>,
    pub sort: SortKey,
}

impl View {
    pub fn validate(&self) -> Result<(), ReportError> {
        if let (Some(a), Some(b)) = (self.from_block, self.to_block) {
            if a > b {
                return Err(ReportError::BadFlag {
                    flag: "--from-block",
                    msg: format!("{a} is after --to-block {b}"),
                });
            }
        }
        Ok(())
    }

    pub fn parse_tx(s: &str) -> Result<TxHash, ReportError> {
        s.parse().map_err(|_| ReportError::BadFlag {
            flag: "--tx",
            msg: format!("{s:?} is not 0x<64 hex>"),
        })
    }

    pub fn matches(&self, v: &Violation) -> bool {
        let block = v.first_seen.block;
        self.bug.is_none_or(|b| v.bug == b)
            && self.from_block.is_none_or(|f| block >= f)
            && self.to_block.is_none_or(|t| block <= t)
            && self.address.as_ref().is_none_or(|q| v.addresses.iter().any(|a| q.matches(a)))
            && self
                .tx
                .is_none_or(|h| v.sequence.hash() == h || v.txs.iter().any(|k| k.hash == h))
    }
}

pub fn violation_json(v: &Violation) -> Value {
    json!({
        "record": "violation",
        "property": v.property.as_str(),
        "bug": v.bug.as_str(),
        "sequence": v.sequence.to_string(),
        "fact": v.verdict.fact.as_str(),
        "failed_conjunct": v.verdict.failed_conjunct.map(|c| c.as_str()),
        "subject": v.verdict.subject.as_ref().map(ToString::to_string),
        "witnesses": v.verdict.witnesses.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "severity": v.severity.as_str(),
        "first_seen_block": v.first_seen.block,
        "first_seen_chain": v.first_seen.chain.as_str(),
        "txs": v.txs.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "addresses": v.addresses.iter().map(ToString::to_string).collect::<Vec<_>>(),
    })
}

fn cluster_json(c: &Cluster) -> Value {
    json!({
        "record": "cluster",
        "chain": c.chain.as_str(),
        "from_block": c.from_block,
        "to_block": c.to_block,
        "count": c.count,
    })
}

fn summary_json(r: &Report) -> Value {
    let counts: serde_json::Map<String, Value> =
        r.summary.iter().map(|(b, n)| (b.as_str().to_owned(), json!(n))).collect();
    json!({
        "record": "summary",
        "counts": counts,
        "total": r.violations.len(),
        "clusters": r.clusters.len(),
        "cluster_gap": r.gap,
        "dropped_records": r.dropped,
        "input_digest": r.input_digest,
        "tool_version": r.tool_version,
    })
}

/// One line per violation, then per cluster, then the summary.
pub fn render_jsonl(r: &Report) -> String {
    let mut out = String::new();
    let lines = r
        .violations
        .iter()
        .map(violation_json)
        .chain(r.clusters.iter().map(cluster_json))
        .chain(std::iter::once(summary_json(r)));
    for line in lines {
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

pub fn render_table(r: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:<8} {:<4} {:<3} {:<10} {:<18} SEQUENCE",
        "BLOCK", "CHAIN", "BUG", "P", "SEVERITY", "CONJUNCT"
    );
    for v in &r.violations {
        let _ = writeln!(
            out,
            "{:<10} {:<8} {:<4} {:<3} {:<10} {:<18} {}",
            v.first_seen.block,
            v.first_seen.chain.as_str(),
            v.bug.as_str(),
            v.property.as_str(),
            v.severity.as_str(),
            v.verdict.failed_conjunct.map_or("-", |c| c.as_str()),
            v.sequence
        );
    }
    let _ = writeln!(out);
    for c in &r.clusters {
        let _ = writeln!(
            out,
            "cluster {} blocks {}..={} ({} violations)",
            c.chain, c.from_block, c.to_block, c.count
        );
    }
    let counts: Vec<String> = r.summary.iter().map(|(b, n)| format!("{b}={n}")).collect();
    let _ = writeln!(out, "total {} ({})", r.violations.len(), counts.join(" "));
    let _ = writeln!(out, "input {}", r.input_digest);
    out
}

pub fn render(r: &Report, format: Format) -> String {
    match format {
        Format::Jsonl => render_jsonl(r),
        Format::Table => render_table(r),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::Severity;
    use crate::facts::{Fact, FactVerdict};
    use crate::model::{BlockRef, SequenceKey, TxKey};
    use proptest::prelude::*;

    fn violation(bug: BugClass, block: u64, chain: &str, hash: u8) -> Violation {
        let chain = ChainId::new(chain).unwrap();
        let key = TxKey::new(chain.clone(), TxHash::new([hash; 32]));
        Violation {
            property: bug.property(),
            bug,
            sequence: SequenceKey::Source(key.clone()),
            verdict: FactVerdict {
                fact: Fact::VSourceTx,
                holds: false,
                failed_conjunct: None,
                subject: None,
                witnesses: Vec::new(),
            },
            severity: Severity::Suspicious,
            first_seen: BlockRef { block, chain },
            txs: vec![key],
            addresses: vec![Address::new(ChainId::new("dst").unwrap(), [hash; 20])],
        }
    }

    fn mixed() -> Report {
        Report::new(
            vec![
                violation(BugClass::Ude, 10, "src", 3),
                violation(BugClass::Iep, 20, "src", 1),
                violation(BugClass::Uu, 30, "dst", 2),
            ],
            "d".into(),
            DEFAULT_CLUSTER_GAP,
            0,
        )
    }

    #[test]
    fn bug_filter_keeps_only_that_class() {
        let r = mixed().view(&View {
            bug: Some(BugClass::Ude),
            ..Default::default()
        });
        assert!(r.violations.iter().all(|v| v.bug == BugClass::Ude));
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.summary[&BugClass::Ude], 1);
        assert_eq!(r.summary[&BugClass::Iep], 0);
    }

    #[test]
    fn single_block_window() {
        let r = mixed().view(&View {
            from_block: Some(20),
            to_block: Some(20),
            ..Default::default()
        });
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].first_seen.block, 20);
    }

    #[test]
    fn sort_by_tx_is_lexicographic() {
        let r = mixed().view(&View {
            sort: SortKey::Tx,
            ..Default::default()
        });
        let hashes: Vec<u8> = r.violations.iter().map(|v| v.sequence.hash().bytes()[0]).collect();
        assert_eq!(hashes, vec![1, 2, 3]);
    }

    #[test]
    fn address_and_tx_filters() {
        let q = AddressQuery::parse(&format!("0x{}", "02".repeat(20))).unwrap();
        let r = mixed().view(&View {
            address: Some(q),
            ..Default::default()
        });
        assert_eq!(r.violations.len(), 1);
        let h = View::parse_tx(&format!("0x{}", "01".repeat(32))).unwrap();
        let r = mixed().view(&View {
            tx: Some(h),
            ..Default::default()
        });
        assert_eq!(r.violations[0].bug, BugClass::Iep);
    }

    #[test]
    fn bad_flags_are_reported() {
        assert!("size".parse::<SortKey>().is_err());
        assert!("xml".parse::<Format>().is_err());
        assert!(AddressQuery::parse("0x12").is_err());
        assert!(View::parse_tx("nope").is_err());
        let v = View {
            from_block: Some(5),
            to_block: Some(4),
            ..Default::default()
        };
        assert!(v.validate().is_err());
    }

    #[test]
    fn jsonl_ends_with_summary() {
        let text = render_jsonl(&mixed());
        let last: Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
        assert_eq!(last["record"], "summary");
        assert_eq!(last["total"], 3);
        assert_eq!(text.lines().filter(|l| l.contains("\"violation\"")).count(), 3);
        assert!(render_table(&mixed()).contains("total 3"));
    }

    /// Connected components of the "same chain and within gap" graph.
    fn oracle_clusters(points: &[(u8, u64)], gap: u64) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..points.len()).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        for i in 0..points.len() {
            for j in 0..points.len() {
                if points[i].0 == points[j].0 && points[i].1.abs_diff(points[j].1) <= gap {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..points.len() {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }
        groups.into_values().collect()
    }

    proptest! {
        #[test]
        fn clusters_match_connected_components(
            points in proptest::collection::vec((0u8..2, 0u64..3_000), 1..25),
            gap in 0u64..800,
        ) {
            let chains = ["src", "dst"];
            let vs: Vec<Violation> = points
                .iter()
                .enumerate()
                .map(|(i, (c, b))| violation(BugClass::Ude, *b, chains[*c as usize], i as u8))
                .collect();
            let got = cluster(&vs, gap);
            prop_assert_eq!(got.iter().map(|c| c.count).sum::<usize>(), vs.len());
            let expected = oracle_clusters(&points, gap);
            prop_assert_eq!(got.len(), expected.len());
            for group in expected {
                let chain = chains[points[group[0]].0 as usize];
                let lo = group.iter().map(|&i| points[i].1).min().unwrap();
                let hi = group.iter().map(|&i| points[i].1).max().unwrap();
                let found = got.iter().find(|c| c.chain.as_str() == chain && c.from_block == lo);
                prop_assert!(found.is_some());
                let found = found.unwrap();
                prop_assert_eq!(found.to_block, hi);
                prop_assert_eq!(found.count, group.len());
            }
        }
    }
}

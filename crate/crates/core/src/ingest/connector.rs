//! Uniform sources for chain events and relayer actions.
//!
//! A live RPC connector would implement [`ChainConnector`]; the shipped one
//! replays a trace file in fixed-size block windows.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use super::wire::{read_trace_file, Strictness};
use super::IngestError;
use crate::builder::RawRecord;
use crate::model::ChainId;

/// Records from one chain whose blocks fall in `from_block..=to_block`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectorBatch {
    pub chain: ChainId,
    pub from_block: u64,
    pub to_block: u64,
    pub records: Vec<RawRecord>,
}

pub trait ChainConnector {
    fn chain(&self) -> &ChainId;

    /// The next batch, or `None` once the source is exhausted. Batches are
    /// contiguous: each starts one block after the previous one ended.
    fn next_batch(&mut self) -> Result<Option<ConnectorBatch>, IngestError>;
}

pub trait RelayerAdaptor {
    /// Every action the relayer has logged so far, in log order.
    fn pull(&mut self) -> Result<Vec<RawRecord>, IngestError>;
}

/// Replays the events of one chain from a trace file.
#[derive(Debug)]
pub struct FileConnector {
    chain: ChainId,
    pending: VecDeque<RawRecord>,
    next_from: u64,
    window: u64,
}

impl FileConnector {
    /// Loads `path`, which must hold event records of `chain` only.
    pub fn open(path: &Path, chain: ChainId, window: u64) -> Result<Self, IngestError> {
        let records = read_trace_file(path, Strictness::Strict)?.records;
        Self::from_records(chain, records, window).map_err(|e| e.in_file(path))
    }

    pub fn from_records(chain: ChainId, mut records: Vec<RawRecord>, window: u64) -> Result<Self, IngestError> {
        for r in &records {
            let on = r.tx_key().chain;
            if r.kind().is_action() || r.block.is_none() || on != chain {
                return Err(IngestError::RecordParse {
                    line: r.ordinal as usize + 2,
                    msg: format!("{} record on {on} does not belong to connector for {chain}", r.kind()),
                });
            }
        }
        records.sort_by_key(|r| (r.block, r.ordinal));
        let next_from = records.first().and_then(|r| r.block).unwrap_or(0);
        Ok(Self {
            chain,
            pending: records.into(),
            next_from,
            window: window.max(1),
        })
    }
}

impl ChainConnector for FileConnector {
    fn chain(&self) -> &ChainId {
        &self.chain
    }

    fn next_batch(&mut self) -> Result<Option<ConnectorBatch>, IngestError> {
        if self.pending.is_empty() {
            return Ok(None);
        }
        let from_block = self.next_from;
        let to_block = from_block.saturating_add(self.window - 1);
        let mut records = Vec::new();
        while self.pending.front().is_some_and(|r| r.block.is_some_and(|b| b <= to_block)) {
            records.extend(self.pending.pop_front());
        }
        self.next_from = to_block.saturating_add(1);
        Ok(Some(ConnectorBatch {
            chain: self.chain.clone(),
            from_block,
            to_block,
            records,
        }))
    }
}

/// Reads a relayer action log in the trace format.
#[derive(Debug, Clone)]
pub struct FileAdaptor {
    path: PathBuf,
}

impl FileAdaptor {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }
}

impl RelayerAdaptor for FileAdaptor {
    fn pull(&mut self) -> Result<Vec<RawRecord>, IngestError> {
        adaptor_pull(&self.path)
    }
}

/// Reads an action log; any event record in it is an error.
pub fn adaptor_pull(path: &Path) -> Result<Vec<RawRecord>, IngestError> {
    let records = read_trace_file(path, Strictness::Strict)?.records;
    if let Some(r) = records.iter().find(|r| !r.kind().is_action()) {
        return Err(IngestError::RecordParse {
            // header is line 1 and ordinals count from 0
            line: r.ordinal as usize + 2,
            msg: format!("{}: {} record in an action log", path.display(), r.kind()),
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::Payload;
    use crate::model::{Address, Amount, AssetId, Contract, LockEvent, TxHash, TxKey};

    fn lock(n: u8, block: u64) -> RawRecord {
        let chain = ChainId::new("src").unwrap();
        let tok = Address::new(chain.clone(), [0xaa; 20]);
        let e = LockEvent::new(
            TxKey::new(chain.clone(), TxHash::new([n; 32])).at(0),
            Contract::Token(tok.clone()),
            AssetId::token(tok, None),
            Amount::from_u128(1),
            Address::new(chain, [0x11; 20]),
        )
        .unwrap();
        RawRecord::new(u64::from(n), Some(block), Payload::LockEvent(e))
    }

    #[test]
    fn batches_are_contiguous_and_cover_all_records() {
        let chain = ChainId::new("src").unwrap();
        let recs = vec![lock(0, 105), lock(1, 100), lock(2, 131), lock(3, 160)];
        let mut c = FileConnector::from_records(chain, recs, 10).unwrap();
        let mut batches = Vec::new();
        while let Some(b) = c.next_batch().unwrap() {
            batches.push(b);
        }
        for w in batches.windows(2) {
            assert_eq!(w[1].from_block, w[0].to_block + 1);
        }
        let mut seen = 0;
        for b in &batches {
            for r in &b.records {
                let blk = r.block.unwrap();
                assert!(b.from_block <= blk && blk <= b.to_block);
                seen += 1;
            }
        }
        assert_eq!(seen, 4);
        assert_eq!(batches[0].from_block, 100);
    }

    #[test]
    fn foreign_chain_is_rejected() {
        let other = ChainId::new("dst").unwrap();
        assert!(FileConnector::from_records(other, vec![lock(0, 1)], 10).is_err());
    }
}

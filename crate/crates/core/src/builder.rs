//! Turns raw record streams into traces and execution sequences.
//!
//! Native coin transfers carry no token-contract event, so each one is
//! synthesized into a lock event whose emitter and asset are both
//! [`Contract::Native`]. Transfers that do not pay a router simply fail
//! the router conjunct later on.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::model::{
    Address, Amount, AssetId, BlockRef, ChainEvent, Contract, DepositEvent, ExecutionSequence,
    LockAction, LockEvent, ModelError, SequenceKey, Trace, TxKey, TxRef, UnlockAction,
    UnlockEvent,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("duplicate event at {0}")]
    DuplicateEvent(TxRef),
    #[error("transaction {tx} seen in blocks {first} and {second}")]
    BlockMismatch { tx: TxKey, first: u64, second: u64 },
    #[error("event {0} has no block number")]
    MissingBlock(TxRef),
    #[error("{0} records are not accepted here")]
    Unexpected(RecordKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RecordKind {
    LockEvent,
    DepositEvent,
    UnlockEvent,
    NativeTransfer,
    LockAction,
    UnlockAction,
    PredictedUnlock,
}

impl RecordKind {
    pub const ALL: [RecordKind; 7] = [
        RecordKind::LockEvent,
        RecordKind::DepositEvent,
        RecordKind::UnlockEvent,
        RecordKind::NativeTransfer,
        RecordKind::LockAction,
        RecordKind::UnlockAction,
        RecordKind::PredictedUnlock,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::LockEvent => "lock_event",
            RecordKind::DepositEvent => "deposit_event",
            RecordKind::UnlockEvent => "unlock_event",
            RecordKind::NativeTransfer => "native_transfer",
            RecordKind::LockAction => "lock_action",
            RecordKind::UnlockAction => "unlock_action",
            RecordKind::PredictedUnlock => "predicted_unlock",
        }
    }

    pub fn parse(s: &str) -> Option<RecordKind> {
        RecordKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn is_action(self) -> bool {
        matches!(self, RecordKind::LockAction | RecordKind::UnlockAction)
    }
}

impl std::fmt::Display for RecordKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A plain native-coin value transfer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NativeTransfer {
    tx: TxRef,
    asset: AssetId,
    amount: Amount,
    to: Address,
}

impl NativeTransfer {
    pub fn new(tx: TxRef, symbol: Option<String>, amount: Amount, to: Address) -> Result<Self, ModelError> {
        let asset = AssetId::native(tx.chain.clone(), symbol);
        // validates the recipient's chain
        LockEvent::new(tx.clone(), Contract::Native, asset.clone(), amount, to.clone())?;
        Ok(Self {
            tx,
            asset,
            amount,
            to,
        })
    }

    pub fn tx(&self) -> &TxRef {
        &self.tx
    }
    pub fn asset(&self) -> &AssetId {
        &self.asset
    }
    pub fn amount(&self) -> Amount {
        self.amount
    }
    pub fn to(&self) -> &Address {
        &self.to
    }

    /// The lock event this transfer stands for.
    pub fn to_lock_event(&self) -> LockEvent {
        LockEvent::new(
            self.tx.clone(),
            Contract::Native,
            self.asset.clone(),
            self.amount,
            self.to.clone(),
        )
        .expect("validated at construction")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    LockEvent(LockEvent),
    DepositEvent(DepositEvent),
    UnlockEvent(UnlockEvent),
    NativeTransfer(NativeTransfer),
    LockAction(LockAction),
    UnlockAction(UnlockAction),
    /// Unlock event obtained by pre-executing a pending unlock.
    PredictedUnlock(UnlockEvent),
}

/// One ingested record plus its position in the input stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub ordinal: u64,
    pub block: Option<u64>,
    pub payload: Payload,
}

impl RawRecord {
    pub fn new(ordinal: u64, block: Option<u64>, payload: Payload) -> Self {
        Self {
            ordinal,
            block,
            payload,
        }
    }

    pub fn kind(&self) -> RecordKind {
        match &self.payload {
            Payload::LockEvent(_) => RecordKind::LockEvent,
            Payload::DepositEvent(_) => RecordKind::DepositEvent,
            Payload::UnlockEvent(_) => RecordKind::UnlockEvent,
            Payload::NativeTransfer(_) => RecordKind::NativeTransfer,
            Payload::LockAction(_) => RecordKind::LockAction,
            Payload::UnlockAction(_) => RecordKind::UnlockAction,
            Payload::PredictedUnlock(_) => RecordKind::PredictedUnlock,
        }
    }

    /// The transaction the record belongs to (the source transaction for actions).
    pub fn tx_key(&self) -> TxKey {
        match &self.payload {
            Payload::LockEvent(e) => e.tx().key(),
            Payload::DepositEvent(e) => e.tx().key(),
            Payload::UnlockEvent(e) | Payload::PredictedUnlock(e) => e.tx().key(),
            Payload::NativeTransfer(e) => e.tx().key(),
            Payload::LockAction(a) => a.tx().clone(),
            Payload::UnlockAction(a) => a.src_tx().clone(),
        }
    }

    /// Addresses taking part in the record: emitters and recipients.
    pub fn participants(&self) -> Vec<&Address> {
        match &self.payload {
            Payload::LockEvent(e) => [e.sc().address(), Some(e.to())].into_iter().flatten().collect(),
            Payload::UnlockEvent(e) | Payload::PredictedUnlock(e) => {
                [e.sc().address(), Some(e.to())].into_iter().flatten().collect()
            }
            Payload::DepositEvent(e) => vec![e.sc(), e.to_dst()],
            Payload::NativeTransfer(e) => vec![e.to()],
            Payload::LockAction(a) => vec![a.to_dst()],
            Payload::UnlockAction(a) => vec![a.to_dst()],
        }
    }

    pub fn assets(&self) -> Vec<&AssetId> {
        match &self.payload {
            Payload::LockEvent(e) => vec![e.asset()],
            Payload::UnlockEvent(e) | Payload::PredictedUnlock(e) => vec![e.asset()],
            Payload::DepositEvent(e) => vec![e.asset_src(), e.asset_dst()],
            Payload::NativeTransfer(e) => vec![e.asset()],
            Payload::LockAction(a) => vec![a.asset_src(), a.asset_dst()],
            Payload::UnlockAction(a) => vec![a.asset_dst()],
        }
    }
}

/// An item tagged with the ordinal of the record it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ordered<T> {
    pub ordinal: u64,
    pub block: Option<u64>,
    pub item: T,
}

/// Traces and actions ready for correlation and checking.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub traces: Vec<Trace>,
    pub lock_actions: Vec<Ordered<LockAction>>,
    pub unlock_actions: Vec<Ordered<UnlockAction>>,
}

impl Dataset {
    /// Unlock events from every trace, with their block, in trace order.
    pub fn unlock_events(&self) -> Vec<(u64, &UnlockEvent)> {
        self.traces
            .iter()
            .flat_map(|t| t.unlock_events().map(move |e| (t.block(), e)))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty() && self.lock_actions.is_empty() && self.unlock_actions.is_empty()
    }
}

#[derive(Debug, Default)]
struct TraceAcc {
    block: u64,
    events: BTreeMap<u32, ChainEvent>,
}

/// Streaming accumulator: push records one by one, then [`finish`].
///
/// [`finish`]: SequenceBuilder::finish
#[derive(Debug, Default)]
pub struct SequenceBuilder {
    traces: BTreeMap<TxKey, TraceAcc>,
    lock_actions: Vec<Ordered<LockAction>>,
    unlock_actions: Vec<Ordered<UnlockAction>>,
}

impl SequenceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one record. A rejected record leaves the builder unchanged.
    pub fn push(&mut self, rec: RawRecord) -> Result<(), BuildError> {
        let event = match rec.payload {
            Payload::LockEvent(e) => ChainEvent::Lock(e),
            Payload::DepositEvent(e) => ChainEvent::Deposit(e),
            Payload::UnlockEvent(e) => ChainEvent::Unlock(e),
            Payload::NativeTransfer(t) => ChainEvent::Lock(t.to_lock_event()),
            Payload::LockAction(a) => {
                self.lock_actions.push(Ordered {
                    ordinal: rec.ordinal,
                    block: rec.block,
                    item: a,
                });
                return Ok(());
            }
            Payload::UnlockAction(a) => {
                self.unlock_actions.push(Ordered {
                    ordinal: rec.ordinal,
                    block: rec.block,
                    item: a,
                });
                return Ok(());
            }
            Payload::PredictedUnlock(_) => {
                return Err(BuildError::Unexpected(RecordKind::PredictedUnlock))
            }
        };
        let at = event.tx().clone();
        let block = rec.block.ok_or_else(|| BuildError::MissingBlock(at.clone()))?;
        let key = at.key();
        match self.traces.get_mut(&key) {
            Some(acc) => {
                if acc.block != block {
                    return Err(BuildError::BlockMismatch {
                        tx: key,
                        first: acc.block,
                        second: block,
                    });
                }
                if acc.events.contains_key(&at.index) {
                    return Err(BuildError::DuplicateEvent(at));
                }
                acc.events.insert(at.index, event);
            }
            None => {
                let mut acc = TraceAcc {
                    block,
                    events: BTreeMap::new(),
                };
                acc.events.insert(at.index, event);
                self.traces.insert(key, acc);
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Dataset {
        let traces = self
            .traces
            .into_iter()
            .map(|(key, acc)| {
                Trace::new(key, acc.block, acc.events.into_values().collect())
                    .expect("events grouped by transaction and ordered by index")
            })
            .collect();
        self.lock_actions.sort_by_key(|a| a.ordinal);
        self.unlock_actions.sort_by_key(|a| a.ordinal);
        Dataset {
            traces,
            lock_actions: self.lock_actions,
            unlock_actions: self.unlock_actions,
        }
    }
}

/// Groups event records into traces by `(chain, tx hash)`.
pub fn build_traces(records: impl IntoIterator<Item = RawRecord>) -> Result<Vec<Trace>, BuildError> {
    let mut b = SequenceBuilder::new();
    for rec in records {
        if rec.kind().is_action() {
            return Err(BuildError::Unexpected(rec.kind()));
        }
        b.push(rec)?;
    }
    Ok(b.finish().traces)
}

#[derive(Debug, Default)]
struct Draft {
    key: Option<SequenceKey>,
    trace: Option<Trace>,
    lock_action: Option<Ordered<LockAction>>,
    unlock_action: Option<Ordered<UnlockAction>>,
    unlock_event: Option<(u64, UnlockEvent)>,
}

/// Joins traces, actions and unlock events into execution sequences.
///
/// Lock actions join their source trace; unlock actions join by source
/// transaction; each unlock event consumes the lowest-ordinal unconsumed
/// unlock action with the same destination asset, recipient and amount.
/// Anything left unmatched becomes a partial sequence.
pub fn correlate(dataset: &Dataset) -> Vec<ExecutionSequence> {
    let mut drafts: Vec<Draft> = Vec::new();
    let mut by_source: HashMap<TxKey, Vec<usize>> = HashMap::new();

    for t in dataset.traces.iter().filter(|t| t.is_source_side()) {
        by_source.entry(t.tx().clone()).or_default().push(drafts.len());
        drafts.push(Draft {
            key: Some(SequenceKey::Source(t.tx().clone())),
            trace: Some(t.clone()),
            ..Default::default()
        });
    }

    for a in &dataset.lock_actions {
        let tx = a.item.tx().clone();
        let slot = by_source
            .get(&tx)
            .and_then(|ds| ds.iter().copied().find(|&d| drafts[d].lock_action.is_none()));
        let d = slot.unwrap_or_else(|| {
            by_source.entry(tx.clone()).or_default().push(drafts.len());
            drafts.push(Draft {
                key: Some(SequenceKey::Source(tx)),
                ..Default::default()
            });
            drafts.len() - 1
        });
        drafts[d].lock_action = Some(a.clone());
    }

    type UnlockKey = (AssetId, Address, Amount);
    let mut open: HashMap<UnlockKey, BTreeSet<(u64, usize)>> = HashMap::new();
    for a in &dataset.unlock_actions {
        let tx = a.item.src_tx().clone();
        let slot = by_source
            .get(&tx)
            .and_then(|ds| ds.iter().copied().find(|&d| drafts[d].unlock_action.is_none()));
        let d = slot.unwrap_or_else(|| {
            by_source.entry(tx.clone()).or_default().push(drafts.len());
            drafts.push(Draft {
                key: Some(SequenceKey::Source(tx)),
                ..Default::default()
            });
            drafts.len() - 1
        });
        let key = (
            a.item.asset_dst().clone(),
            a.item.to_dst().clone(),
            a.item.amount_dst(),
        );
        open.entry(key).or_default().insert((a.ordinal, d));
        drafts[d].unlock_action = Some(a.clone());
    }

    let mut events: Vec<(u64, &UnlockEvent)> = dataset.unlock_events();
    events.sort_by(|a, b| a.1.tx().cmp(b.1.tx()));
    for (block, e) in events {
        let key = (e.asset().clone(), e.to().clone(), e.amount());
        let taken = open.get_mut(&key).and_then(|s| s.pop_first());
        match taken {
            Some((_, d)) => drafts[d].unlock_event = Some((block, e.clone())),
            None => drafts.push(Draft {
                key: Some(SequenceKey::Unlock(e.tx().clone())),
                unlock_event: Some((block, e.clone())),
                ..Default::default()
            }),
        }
    }

    let mut out: Vec<ExecutionSequence> = drafts.into_iter().map(assemble).collect();
    out.sort_by(|a, b| a.key().cmp(b.key()));
    out
}

fn assemble(d: Draft) -> ExecutionSequence {
    let key = d.key.expect("every draft is keyed");
    let action_block = d
        .lock_action
        .as_ref()
        .and_then(|a| a.block)
        .or_else(|| d.unlock_action.as_ref().and_then(|a| a.block));
    let anchor = if let Some(t) = &d.trace {
        BlockRef {
            block: t.block(),
            chain: t.tx().chain.clone(),
        }
    } else if let Some(block) = action_block {
        BlockRef {
            block,
            chain: key.chain().clone(),
        }
    } else if let Some((block, e)) = &d.unlock_event {
        BlockRef {
            block: *block,
            chain: e.tx().chain.clone(),
        }
    } else {
        BlockRef {
            block: 0,
            chain: key.chain().clone(),
        }
    };
    ExecutionSequence::new(
        key,
        anchor,
        d.trace,
        d.lock_action.map(|a| a.item),
        d.unlock_action.map(|a| a.item),
        d.unlock_event.map(|(_, e)| e),
    )
    .expect("drafts are joined by source transaction")
}

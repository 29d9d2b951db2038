//! Bridge state types: identifiers, assets, amounts, on-chain events,
//! off-chain relayer actions and the execution sequences that tie them
//! together.
//!
//! Every constructor validates the chain-consistency invariants of its
//! type, so a value that exists is well formed.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use primitive_types::{U256, U512};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("malformed chain id {0:?}")]
    MalformedChainId(String),
    #[error("malformed address {0:?}")]
    MalformedAddress(String),
    #[error("malformed transaction hash {0:?}")]
    MalformedHash(String),
    #[error("malformed amount {0:?}")]
    MalformedAmount(String),
    #[error("amount overflow")]
    Overflow,
    #[error("chain mismatch in {what}: expected {expected}, found {found}")]
    ChainMismatch {
        what: &'static str,
        expected: ChainId,
        found: ChainId,
    },
    #[error("event {found} does not belong to trace {expected}")]
    ForeignEvent { expected: TxKey, found: TxRef },
    #[error("event indices in trace {0} are not strictly increasing")]
    UnorderedTrace(TxKey),
    #[error("native asset on {chain} has symbol {found:?}, configured {expected:?}")]
    NativeSymbol {
        chain: ChainId,
        expected: String,
        found: String,
    },
}

/// Short ASCII chain identifier such as `eth` or `bsc`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChainId(String);

impl ChainId {
    pub fn new(raw: &str) -> Result<Self, ModelError> {
        let ok = !raw.is_empty()
            && raw.len() <= 32
            && raw
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_' || b == b'.');
        if ok {
            Ok(Self(raw.to_owned()))
        } else {
            Err(ModelError::MalformedChainId(raw.to_owned()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ChainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ChainId {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

fn decode_hex<const N: usize>(raw: &str) -> Option<[u8; N]> {
    let digits = raw.strip_prefix("0x").or_else(|| raw.strip_prefix("0X"))?;
    if digits.len() != N * 2 {
        return None;
    }
    let mut out = [0u8; N];
    hex::decode_to_slice(digits, &mut out).ok()?;
    Some(out)
}

/// A 20-byte account or contract address scoped to one chain.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address {
    chain: ChainId,
    bytes: [u8; 20],
}

impl Address {
    pub fn new(chain: ChainId, bytes: [u8; 20]) -> Self {
        Self { chain, bytes }
    }

    pub fn zero(chain: ChainId) -> Self {
        Self::new(chain, [0; 20])
    }

    pub fn chain(&self) -> &ChainId {
        &self.chain
    }

    pub fn bytes(&self) -> &[u8; 20] {
        &self.bytes
    }

    /// `0x`-prefixed lowercase hex, without the chain.
    pub fn hex(&self) -> String {
        format!("0x{}", hex::encode(self.bytes))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:0x{}", self.chain, hex::encode(self.bytes))
    }
}

/// Parses a `0x`-prefixed 40-digit hex address (any case) on `chain`.
pub fn normalize_address(raw: &str, chain: &ChainId) -> Result<Address, ModelError> {
    decode_hex::<20>(raw)
        .map(|bytes| Address::new(chain.clone(), bytes))
        .ok_or_else(|| ModelError::MalformedAddress(raw.to_owned()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TxHash([u8; 32]);

impl TxHash {
    pub fn new(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Display for TxHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl FromStr for TxHash {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        decode_hex::<32>(s)
            .map(TxHash)
            .ok_or_else(|| ModelError::MalformedHash(s.to_owned()))
    }
}

/// Identifies a transaction: `(chain, hash)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TxKey {
    pub chain: ChainId,
    pub hash: TxHash,
}

impl TxKey {
    pub fn new(chain: ChainId, hash: TxHash) -> Self {
        Self { chain, hash }
    }

    pub fn at(&self, index: u32) -> TxRef {
        TxRef {
            chain: self.chain.clone(),
            hash: self.hash,
            index,
        }
    }
}

impl fmt::Display for TxKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.chain, self.hash)
    }
}

/// Position of one event: its transaction plus the log index inside it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TxRef {
    pub chain: ChainId,
    pub hash: TxHash,
    pub index: u32,
}

impl TxRef {
    pub fn key(&self) -> TxKey {
        TxKey::new(self.chain.clone(), self.hash)
    }
}

impl fmt::Display for TxRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}#{}", self.chain, self.hash, self.index)
    }
}

/// A token contract, or the chain's native coin which has none.
///
/// Also used for the emitter of lock and unlock events: native value
/// transfers are attributed to `Native` so that "emitter equals asset
/// contract" holds for them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Contract {
    Native,
    Token(Address),
}

impl Contract {
    fn chain_ok(&self, chain: &ChainId) -> bool {
        match self {
            Contract::Native => true,
            Contract::Token(a) => a.chain() == chain,
        }
    }

    pub fn address(&self) -> Option<&Address> {
        match self {
            Contract::Native => None,
            Contract::Token(a) => Some(a),
        }
    }
}

impl fmt::Display for Contract {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Contract::Native => f.write_str("NATIVE"),
            Contract::Token(a) => f.write_str(&a.hex()),
        }
    }
}

/// Asset identity. Equality, ordering and hashing use `(chain, contract)`
/// only; the symbol is display metadata.
#[derive(Debug, Clone)]
pub struct AssetId {
    chain: ChainId,
    contract: Contract,
    symbol: Option<String>,
}

impl AssetId {
    pub fn token(address: Address, symbol: Option<String>) -> Self {
        Self {
            chain: address.chain().clone(),
            contract: Contract::Token(address),
            symbol,
        }
    }

    pub fn native(chain: ChainId, symbol: Option<String>) -> Self {
        Self {
            chain,
            contract: Contract::Native,
            symbol,
        }
    }

    pub fn chain(&self) -> &ChainId {
        &self.chain
    }

    pub fn contract(&self) -> &Contract {
        &self.contract
    }

    pub fn symbol(&self) -> Option<&str> {
        self.symbol.as_deref()
    }

    pub fn is_native(&self) -> bool {
        self.contract == Contract::Native
    }

    /// Checks a native asset's symbol against the configured one for its chain.
    pub fn check_native_symbol(&self, configured: Option<&str>) -> Result<(), ModelError> {
        match (&self.contract, self.symbol(), configured) {
            (Contract::Native, Some(found), Some(expected)) if found != expected => {
                Err(ModelError::NativeSymbol {
                    chain: self.chain.clone(),
                    expected: expected.to_owned(),
                    found: found.to_owned(),
                })
            }
            _ => Ok(()),
        }
    }
}

impl PartialEq for AssetId {
    fn eq(&self, other: &Self) -> bool {
        self.chain == other.chain && self.contract == other.contract
    }
}

impl Eq for AssetId {}

impl Hash for AssetId {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.chain.hash(state);
        self.contract.hash(state);
    }
}

impl PartialOrd for AssetId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for AssetId {
    fn cmp(&self, other: &Self) -> Ordering {
        (&self.chain, &self.contract).cmp(&(&other.chain, &other.contract))
    }
}

impl fmt::Display for AssetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.chain, self.contract)?;
        if let Some(s) = &self.symbol {
            write!(f, "({s})")?;
        }
        Ok(())
    }
}

/// Same asset iff same chain and same contract. Symbols never count.
pub fn assets_equal(a: &AssetId, b: &AssetId) -> bool {
    a == b
}

/// Unsigned 256-bit quantity in the asset's smallest unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Amount(U256);

impl Amount {
    pub const ZERO: Amount = Amount(U256::zero());

    pub fn from_u128(v: u128) -> Self {
        Self(U256::from(v))
    }

    pub fn checked_add(self, rhs: Amount) -> Result<Amount, ModelError> {
        self.0.checked_add(rhs.0).map(Amount).ok_or(ModelError::Overflow)
    }

    pub fn checked_mul(self, rhs: Amount) -> Result<Amount, ModelError> {
        self.0.checked_mul(rhs.0).map(Amount).ok_or(ModelError::Overflow)
    }

    /// `self * (10_000 - bps) / 10_000`, rounded down. Never overflows.
    pub fn less_bps(self, bps: u32) -> Amount {
        let keep = 10_000u64.saturating_sub(u64::from(bps));
        let scaled: U512 = self.0.full_mul(U256::from(keep)) / U512::from(10_000u64);
        // scaled <= self, so it fits back into 256 bits
        Amount(U256::try_from(scaled).unwrap_or(U256::MAX))
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Amount {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(ModelError::MalformedAmount(s.to_owned()));
        }
        U256::from_dec_str(s)
            .map(Amount)
            .map_err(|_| ModelError::MalformedAmount(s.to_owned()))
    }
}

fn same_chain(what: &'static str, expected: &ChainId, found: &ChainId) -> Result<(), ModelError> {
    if expected == found {
        Ok(())
    } else {
        Err(ModelError::ChainMismatch {
            what,
            expected: expected.clone(),
            found: found.clone(),
        })
    }
}

fn contract_on(what: &'static str, c: &Contract, chain: &ChainId) -> Result<(), ModelError> {
    match c {
        Contract::Token(a) if !c.chain_ok(chain) => same_chain(what, chain, a.chain()),
        _ => Ok(()),
    }
}

/// Token transfer into the router on the source chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LockEvent {
    tx: TxRef,
    sc: Contract,
    asset: AssetId,
    amount: Amount,
    to: Address,
}

impl LockEvent {
    pub fn new(
        tx: TxRef,
        sc: Contract,
        asset: AssetId,
        amount: Amount,
        to: Address,
    ) -> Result<Self, ModelError> {
        contract_on("lock sc", &sc, &tx.chain)?;
        same_chain("lock asset", &tx.chain, asset.chain())?;
        same_chain("lock to", &tx.chain, to.chain())?;
        Ok(Self {
            tx,
            sc,
            asset,
            amount,
            to,
        })
    }

    pub fn tx(&self) -> &TxRef {
        &self.tx
    }
    pub fn sc(&self) -> &Contract {
        &self.sc
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
}

/// Router-emitted proof of a lock, naming what to release on the destination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepositEvent {
    tx: TxRef,
    sc: Address,
    asset_src: AssetId,
    amount_src: Amount,
    dest_chain: ChainId,
    asset_dst: AssetId,
    to_dst: Address,
}

impl DepositEvent {
    pub fn new(
        tx: TxRef,
        sc: Address,
        asset_src: AssetId,
        amount_src: Amount,
        asset_dst: AssetId,
        to_dst: Address,
    ) -> Result<Self, ModelError> {
        same_chain("deposit sc", &tx.chain, sc.chain())?;
        same_chain("deposit source asset", &tx.chain, asset_src.chain())?;
        let dest_chain = asset_dst.chain().clone();
        same_chain("deposit recipient", &dest_chain, to_dst.chain())?;
        Ok(Self {
            tx,
            sc,
            asset_src,
            amount_src,
            dest_chain,
            asset_dst,
            to_dst,
        })
    }

    pub fn tx(&self) -> &TxRef {
        &self.tx
    }
    pub fn sc(&self) -> &Address {
        &self.sc
    }
    pub fn asset_src(&self) -> &AssetId {
        &self.asset_src
    }
    pub fn amount_src(&self) -> Amount {
        self.amount_src
    }
    pub fn dest_chain(&self) -> &ChainId {
        &self.dest_chain
    }
    pub fn asset_dst(&self) -> &AssetId {
        &self.asset_dst
    }
    pub fn to_dst(&self) -> &Address {
        &self.to_dst
    }
}

/// Asset release on the destination chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnlockEvent {
    tx: TxRef,
    sc: Contract,
    asset: AssetId,
    amount: Amount,
    to: Address,
}

impl UnlockEvent {
    pub fn new(
        tx: TxRef,
        sc: Contract,
        asset: AssetId,
        amount: Amount,
        to: Address,
    ) -> Result<Self, ModelError> {
        contract_on("unlock sc", &sc, &tx.chain)?;
        same_chain("unlock asset", &tx.chain, asset.chain())?;
        same_chain("unlock to", &tx.chain, to.chain())?;
        Ok(Self {
            tx,
            sc,
            asset,
            amount,
            to,
        })
    }

    pub fn tx(&self) -> &TxRef {
        &self.tx
    }
    pub fn sc(&self) -> &Contract {
        &self.sc
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
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainEvent {
    Lock(LockEvent),
    Deposit(DepositEvent),
    Unlock(UnlockEvent),
}

impl ChainEvent {
    pub fn tx(&self) -> &TxRef {
        match self {
            ChainEvent::Lock(e) => e.tx(),
            ChainEvent::Deposit(e) => e.tx(),
            ChainEvent::Unlock(e) => e.tx(),
        }
    }
}

/// All events emitted by one transaction, ordered by log index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    tx: TxKey,
    block: u64,
    events: Vec<ChainEvent>,
}

impl Trace {
    pub fn new(tx: TxKey, block: u64, events: Vec<ChainEvent>) -> Result<Self, ModelError> {
        for e in &events {
            let r = e.tx();
            if r.chain != tx.chain || r.hash != tx.hash {
                return Err(ModelError::ForeignEvent {
                    expected: tx,
                    found: r.clone(),
                });
            }
        }
        if events.windows(2).any(|w| w[0].tx().index >= w[1].tx().index) {
            return Err(ModelError::UnorderedTrace(tx));
        }
        Ok(Self { tx, block, events })
    }

    /// Trace of a transaction for which no events were observed.
    pub fn empty(tx: TxKey) -> Self {
        Self {
            tx,
            block: 0,
            events: Vec::new(),
        }
    }

    pub fn tx(&self) -> &TxKey {
        &self.tx
    }

    pub fn block(&self) -> u64 {
        self.block
    }

    pub fn events(&self) -> &[ChainEvent] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn lock_events(&self) -> impl Iterator<Item = &LockEvent> {
        self.events.iter().filter_map(|e| match e {
            ChainEvent::Lock(l) => Some(l),
            _ => None,
        })
    }

    pub fn deposit_events(&self) -> impl Iterator<Item = &DepositEvent> {
        self.events.iter().filter_map(|e| match e {
            ChainEvent::Deposit(d) => Some(d),
            _ => None,
        })
    }

    pub fn unlock_events(&self) -> impl Iterator<Item = &UnlockEvent> {
        self.events.iter().filter_map(|e| match e {
            ChainEvent::Unlock(u) => Some(u),
            _ => None,
        })
    }

    /// Whether the trace carries any source-side (lock or deposit) event.
    pub fn is_source_side(&self) -> bool {
        self.events
            .iter()
            .any(|e| matches!(e, ChainEvent::Lock(_) | ChainEvent::Deposit(_)))
    }
}

/// The relayer's parse of a deposit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LockAction {
    tx: TxKey,
    src_chain: ChainId,
    dest_chain: ChainId,
    asset_src: AssetId,
    amount_src: Amount,
    asset_dst: AssetId,
    to_dst: Address,
}

impl LockAction {
    pub fn new(
        tx: TxKey,
        asset_src: AssetId,
        amount_src: Amount,
        asset_dst: AssetId,
        to_dst: Address,
    ) -> Result<Self, ModelError> {
        let src_chain = tx.chain.clone();
        same_chain("lock action source asset", &src_chain, asset_src.chain())?;
        let dest_chain = asset_dst.chain().clone();
        same_chain("lock action recipient", &dest_chain, to_dst.chain())?;
        Ok(Self {
            tx,
            src_chain,
            dest_chain,
            asset_src,
            amount_src,
            asset_dst,
            to_dst,
        })
    }

    pub fn tx(&self) -> &TxKey {
        &self.tx
    }
    pub fn src_chain(&self) -> &ChainId {
        &self.src_chain
    }
    pub fn dest_chain(&self) -> &ChainId {
        &self.dest_chain
    }
    pub fn asset_src(&self) -> &AssetId {
        &self.asset_src
    }
    pub fn amount_src(&self) -> Amount {
        self.amount_src
    }
    pub fn asset_dst(&self) -> &AssetId {
        &self.asset_dst
    }
    pub fn to_dst(&self) -> &Address {
        &self.to_dst
    }
}

/// An unlock the relayer has produced for the destination chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnlockAction {
    src_tx: TxKey,
    dest_chain: ChainId,
    asset_dst: AssetId,
    amount_dst: Amount,
    to_dst: Address,
    authorized: bool,
}

impl UnlockAction {
    pub fn new(
        src_tx: TxKey,
        asset_dst: AssetId,
        amount_dst: Amount,
        to_dst: Address,
        authorized: bool,
    ) -> Result<Self, ModelError> {
        let dest_chain = asset_dst.chain().clone();
        same_chain("unlock action recipient", &dest_chain, to_dst.chain())?;
        Ok(Self {
            src_tx,
            dest_chain,
            asset_dst,
            amount_dst,
            to_dst,
            authorized,
        })
    }

    pub fn src_tx(&self) -> &TxKey {
        &self.src_tx
    }
    pub fn dest_chain(&self) -> &ChainId {
        &self.dest_chain
    }
    pub fn asset_dst(&self) -> &AssetId {
        &self.asset_dst
    }
    pub fn amount_dst(&self) -> Amount {
        self.amount_dst
    }
    pub fn to_dst(&self) -> &Address {
        &self.to_dst
    }
    pub fn authorized(&self) -> bool {
        self.authorized
    }
}

/// Identity of an execution sequence: the source transaction when one is
/// known, otherwise the orphan unlock event itself.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SequenceKey {
    Source(TxKey),
    Unlock(TxRef),
}

impl SequenceKey {
    pub fn chain(&self) -> &ChainId {
        match self {
            SequenceKey::Source(k) => &k.chain,
            SequenceKey::Unlock(r) => &r.chain,
        }
    }

    pub fn hash(&self) -> TxHash {
        match self {
            SequenceKey::Source(k) => k.hash,
            SequenceKey::Unlock(r) => r.hash,
        }
    }
}

impl fmt::Display for SequenceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceKey::Source(k) => k.fmt(f),
            SequenceKey::Unlock(r) => r.fmt(f),
        }
    }
}

impl FromStr for SequenceKey {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::MalformedHash(s.to_owned());
        let (chain, rest) = s.split_once(':').ok_or_else(bad)?;
        let chain = ChainId::new(chain)?;
        match rest.split_once('#') {
            Some((hash, index)) => Ok(SequenceKey::Unlock(TxRef {
                chain,
                hash: hash.parse()?,
                index: index.parse().map_err(|_| bad())?,
            })),
            None => Ok(SequenceKey::Source(TxKey::new(chain, rest.parse()?))),
        }
    }
}

/// A block on a specific chain.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockRef {
    pub block: u64,
    pub chain: ChainId,
}

/// One candidate cross-chain transfer. Any subset of stages may be present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionSequence {
    key: SequenceKey,
    anchor: BlockRef,
    source_trace: Option<Trace>,
    lock_action: Option<LockAction>,
    unlock_action: Option<UnlockAction>,
    unlock_event: Option<UnlockEvent>,
}

/// Stages missing from a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Gaps {
    pub source_trace: bool,
    pub lock_action: bool,
    pub unlock_action: bool,
    pub unlock_event: bool,
}

impl Gaps {
    pub fn any(&self) -> bool {
        self.source_trace || self.lock_action || self.unlock_action || self.unlock_event
    }
}

impl ExecutionSequence {
    /// Assembles a sequence, checking that every stage carrying a source
    /// transaction agrees with the key.
    pub fn new(
        key: SequenceKey,
        anchor: BlockRef,
        source_trace: Option<Trace>,
        lock_action: Option<LockAction>,
        unlock_action: Option<UnlockAction>,
        unlock_event: Option<UnlockEvent>,
    ) -> Result<Self, ModelError> {
        let source = match &key {
            SequenceKey::Source(k) => Some(k),
            SequenceKey::Unlock(_) => None,
        };
        let stage_txs = source_trace
            .iter()
            .map(Trace::tx)
            .chain(lock_action.iter().map(LockAction::tx))
            .chain(unlock_action.iter().map(UnlockAction::src_tx));
        for tx in stage_txs {
            match source {
                Some(k) if k == tx => {}
                Some(k) => {
                    return Err(ModelError::ForeignEvent {
                        expected: k.clone(),
                        found: tx.at(0),
                    })
                }
                None => {
                    return Err(ModelError::ForeignEvent {
                        expected: tx.clone(),
                        found: tx.at(0),
                    })
                }
            }
        }
        Ok(Self {
            key,
            anchor,
            source_trace,
            lock_action,
            unlock_action,
            unlock_event,
        })
    }

    pub fn key(&self) -> &SequenceKey {
        &self.key
    }
    pub fn anchor(&self) -> &BlockRef {
        &self.anchor
    }
    pub fn source_trace(&self) -> Option<&Trace> {
        self.source_trace.as_ref()
    }
    pub fn lock_events(&self) -> Vec<&LockEvent> {
        self.source_trace
            .iter()
            .flat_map(|t| t.lock_events())
            .collect()
    }
    pub fn deposit_event(&self) -> Option<&DepositEvent> {
        self.source_trace.as_ref()?.deposit_events().next()
    }
    pub fn lock_action(&self) -> Option<&LockAction> {
        self.lock_action.as_ref()
    }
    pub fn unlock_action(&self) -> Option<&UnlockAction> {
        self.unlock_action.as_ref()
    }
    pub fn unlock_event(&self) -> Option<&UnlockEvent> {
        self.unlock_event.as_ref()
    }

    pub fn gaps(&self) -> Gaps {
        Gaps {
            source_trace: self.source_trace.is_none(),
            lock_action: self.lock_action.is_none(),
            unlock_action: self.unlock_action.is_none(),
            unlock_event: self.unlock_event.is_none(),
        }
    }

    /// Every transaction the sequence touches, source first.
    pub fn transactions(&self) -> Vec<TxKey> {
        let mut out = Vec::new();
        if let SequenceKey::Source(k) = &self.key {
            out.push(k.clone());
        }
        if let Some(e) = &self.unlock_event {
            out.push(e.tx().key());
        }
        out
    }

    /// Every address that appears in any stage.
    pub fn participants(&self) -> Vec<Address> {
        let mut out = Vec::new();
        let push_contract = |c: &Contract, out: &mut Vec<Address>| {
            if let Some(a) = c.address() {
                out.push(a.clone());
            }
        };
        if let Some(t) = &self.source_trace {
            for e in t.events() {
                match e {
                    ChainEvent::Lock(l) => {
                        push_contract(l.sc(), &mut out);
                        push_contract(l.asset().contract(), &mut out);
                        out.push(l.to().clone());
                    }
                    ChainEvent::Deposit(d) => {
                        out.push(d.sc().clone());
                        push_contract(d.asset_src().contract(), &mut out);
                        push_contract(d.asset_dst().contract(), &mut out);
                        out.push(d.to_dst().clone());
                    }
                    ChainEvent::Unlock(u) => {
                        push_contract(u.sc(), &mut out);
                        out.push(u.to().clone());
                    }
                }
            }
        }
        if let Some(a) = &self.lock_action {
            out.push(a.to_dst().clone());
        }
        if let Some(a) = &self.unlock_action {
            out.push(a.to_dst().clone());
        }
        if let Some(e) = &self.unlock_event {
            push_contract(e.sc(), &mut out);
            out.push(e.to().clone());
        }
        out.sort();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(s: &str) -> ChainId {
        ChainId::new(s).unwrap()
    }

    #[test]
    fn address_case_is_normalized() {
        let a = normalize_address("0xAbCdEf0123456789aBcDeF0123456789ABCDEF01", &chain("src")).unwrap();
        assert_eq!(a.hex(), "0xabcdef0123456789abcdef0123456789abcdef01");
        let b = normalize_address("0xabcdef0123456789abcdef0123456789abcdef01", &chain("src")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_address_is_valid() {
        let a = normalize_address(&format!("0x{}", "0".repeat(40)), &chain("src")).unwrap();
        assert_eq!(a, Address::zero(chain("src")));
    }

    #[test]
    fn short_or_non_hex_address_is_rejected() {
        for raw in ["0x123", "abc", &format!("0x{}", "g".repeat(40)), &"0".repeat(42)] {
            assert!(matches!(
                normalize_address(raw, &chain("src")),
                Err(ModelError::MalformedAddress(_))
            ));
        }
    }

    #[test]
    fn address_equality_needs_same_chain() {
        let bytes = [7u8; 20];
        assert_ne!(Address::new(chain("src"), bytes), Address::new(chain("dst"), bytes));
    }

    #[test]
    fn asset_equality_ignores_symbol() {
        let src = chain("src");
        let eth = AssetId::native(src.clone(), Some("ETH".into()));
        assert!(assets_equal(&eth, &AssetId::native(src.clone(), Some("ETH".into()))));
        assert!(assets_equal(&eth, &AssetId::native(src.clone(), None)));

        let fake = AssetId::token(Address::new(src.clone(), [0xfa; 20]), Some("ETH".into()));
        assert!(!assets_equal(&fake, &eth));

        let on_src = AssetId::token(Address::new(src, [0xaa; 20]), None);
        let on_dst = AssetId::token(Address::new(chain("dst"), [0xaa; 20]), None);
        assert!(!assets_equal(&on_src, &on_dst));
    }

    #[test]
    fn native_symbol_must_match_config() {
        let eth = AssetId::native(chain("src"), Some("ETH".into()));
        assert!(eth.check_native_symbol(Some("ETH")).is_ok());
        assert!(eth.check_native_symbol(None).is_ok());
        assert!(eth.check_native_symbol(Some("BNB")).is_err());
        let tok = AssetId::token(Address::zero(chain("src")), Some("BNB".into()));
        assert!(tok.check_native_symbol(Some("ETH")).is_ok());
    }

    #[test]
    fn amount_parsing_and_overflow() {
        let max = "115792089237316195423570985008687907853269984665640564039457584007913129639935";
        let a: Amount = max.parse().unwrap();
        assert_eq!(a.to_string(), max);
        assert!("115792089237316195423570985008687907853269984665640564039457584007913129639936"
            .parse::<Amount>()
            .is_err());
        assert_eq!(a.checked_add(Amount::from_u128(1)), Err(ModelError::Overflow));
        assert!("-1".parse::<Amount>().is_err());
        assert!("1.5".parse::<Amount>().is_err());
        assert!("".parse::<Amount>().is_err());
        assert_eq!(a.less_bps(0), a);
        assert_eq!(Amount::from_u128(10_000).less_bps(30), Amount::from_u128(9_970));
    }

    #[test]
    fn lock_event_rejects_cross_chain_fields() {
        let src = chain("src");
        let dst = chain("dst");
        let tx = TxKey::new(src.clone(), TxHash::new([1; 32])).at(0);
        let tok = Address::new(src.clone(), [2; 20]);
        let ok = LockEvent::new(
            tx.clone(),
            Contract::Token(tok.clone()),
            AssetId::token(tok.clone(), None),
            Amount::from_u128(5),
            Address::new(src.clone(), [3; 20]),
        );
        assert!(ok.is_ok());
        let bad = LockEvent::new(
            tx,
            Contract::Token(tok.clone()),
            AssetId::token(tok, None),
            Amount::from_u128(5),
            Address::new(dst, [3; 20]),
        );
        assert!(matches!(bad, Err(ModelError::ChainMismatch { .. })));
    }

    #[test]
    fn trace_rejects_foreign_and_unordered_events() {
        let src = chain("src");
        let key = TxKey::new(src.clone(), TxHash::new([1; 32]));
        let other = TxKey::new(src.clone(), TxHash::new([2; 32]));
        let tok = Address::new(src.clone(), [2; 20]);
        let ev = |tx: TxRef| {
            ChainEvent::Lock(
                LockEvent::new(
                    tx,
                    Contract::Token(tok.clone()),
                    AssetId::token(tok.clone(), None),
                    Amount::from_u128(1),
                    tok.clone(),
                )
                .unwrap(),
            )
        };
        assert!(Trace::new(key.clone(), 1, vec![ev(key.at(0)), ev(key.at(2))]).is_ok());
        assert!(matches!(
            Trace::new(key.clone(), 1, vec![ev(key.at(2)), ev(key.at(2))]),
            Err(ModelError::UnorderedTrace(_))
        ));
        assert!(matches!(
            Trace::new(key, 1, vec![ev(other.at(0))]),
            Err(ModelError::ForeignEvent { .. })
        ));
    }

    #[test]
    fn sequence_key_round_trips_through_display() {
        let k = SequenceKey::Source(TxKey::new(chain("src"), TxHash::new([9; 32])));
        assert_eq!(k.to_string().parse::<SequenceKey>().unwrap(), k);
        let u = SequenceKey::Unlock(TxKey::new(chain("dst"), TxHash::new([8; 32])).at(3));
        assert_eq!(u.to_string().parse::<SequenceKey>().unwrap(), u);
    }
}

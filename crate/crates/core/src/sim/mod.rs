//! Seeded generator of labeled bridge traffic.
//!
//! A benign transfer walks all five stages consistently. Each attack
//! variant perturbs exactly the observable states its bug class is about;
//! the relayer, being the victim, then processes the bad input faithfully,
//! so later stages stay consistent with what it was fed. Attack recipients
//! are fresh addresses that never receive benign transfers.

pub mod fixtures;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::builder::{NativeTransfer, Payload, RawRecord};
use crate::checker::BugClass;
use crate::ingest::{encode_line, write_records, BridgeConfig, IngestError, HEADER};
use crate::model::{
    normalize_address, Address, Amount, AssetId, ChainId, Contract, DepositEvent, LockAction,
    LockEvent, SequenceKey, TxHash, TxKey, UnlockAction, UnlockEvent,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario: {0}")]
    SpecParse(String),
    #[error("scenario: {0}")]
    InvalidSpec(String),
    #[error("unknown {class} variant {variant:?}")]
    UnknownVariant { class: BugClass, variant: String },
    #[error(transparent)]
    Io(#[from] IngestError),
}

/// An asset as written in a scenario: a token address or `NATIVE`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetSpec {
    pub contract: String,
    #[serde(default)]
    pub symbol: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetPair {
    pub src: AssetSpec,
    pub dst: AssetSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Injection {
    pub class: BugClassName,
    /// A documented variant name, or `cycle` to rotate through all of them.
    pub variant: String,
    pub count: usize,
    /// Index into the scenario's asset pairs; random when absent.
    #[serde(default)]
    pub asset: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BugClassName {
    #[serde(rename = "UDE")]
    Ude,
    #[serde(rename = "IEP")]
    Iep,
    #[serde(rename = "UU")]
    Uu,
}

impl From<BugClassName> for BugClass {
    fn from(c: BugClassName) -> BugClass {
        match c {
            BugClassName::Ude => BugClass::Ude,
            BugClassName::Iep => BugClass::Iep,
            BugClassName::Uu => BugClass::Uu,
        }
    }
}

impl From<BugClass> for BugClassName {
    fn from(c: BugClass) -> BugClassName {
        match c {
            BugClass::Ude => BugClassName::Ude,
            BugClass::Iep => BugClassName::Iep,
            BugClass::Uu => BugClassName::Uu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub benign_count: usize,
    #[serde(default)]
    pub injections: Vec<Injection>,
    /// Source and destination chain.
    pub chains: [String; 2],
    pub assets: Vec<AssetPair>,
    pub user_count: usize,
    /// Adds unrelated token transfers to some benign source transactions.
    #[serde(default)]
    pub noise: bool,
}

impl ScenarioSpec {
    /// Two chains `src` and `dst`, a token pair and a native-to-wrapped pair.
    pub fn standard(seed: u64, benign_count: usize) -> Self {
        Self {
            seed,
            benign_count,
            injections: Vec::new(),
            chains: ["src".into(), "dst".into()],
            assets: vec![
                AssetPair {
                    src: AssetSpec {
                        contract: format!("0x{}", "a0".repeat(20)),
                        symbol: Some("USDC".into()),
                    },
                    dst: AssetSpec {
                        contract: format!("0x{}", "b0".repeat(20)),
                        symbol: Some("USDC".into()),
                    },
                },
                AssetPair {
                    src: AssetSpec {
                        contract: "NATIVE".into(),
                        symbol: Some("ETH".into()),
                    },
                    dst: AssetSpec {
                        contract: format!("0x{}", "b1".repeat(20)),
                        symbol: Some("WETH".into()),
                    },
                },
            ],
            user_count: 64,
            noise: false,
        }
    }

    pub fn with_injection(mut self, class: BugClass, variant: &str, count: usize) -> Self {
        self.injections.push(Injection {
            class: class.into(),
            variant: variant.into(),
            count,
            asset: None,
        });
        self
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::SpecParse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// A deposit with no lock at all.
    NoLock,
    /// The lock moves less than the deposit claims.
    WrongAmount,
    /// The lock pays someone other than the router.
    UnsafeTransfer,
    /// The deposit is emitted by a contract that is not the router.
    MaliciousEmitter,
    /// A token whose symbol equals the native coin's is parsed as native.
    FakeSymbol,
    /// The relayer misreads the deposit amount.
    WrongAmountParse,
    /// An unlock no action asked for.
    NoAction,
    /// An unlock backed only by an action the relayer did not authorize.
    UnauthorizedAction,
    /// The authorized unlock pays someone other than the lock's recipient.
    Redirected,
}

impl Variant {
    pub const ALL: [Variant; 9] = [
        Variant::NoLock,
        Variant::WrongAmount,
        Variant::UnsafeTransfer,
        Variant::MaliciousEmitter,
        Variant::FakeSymbol,
        Variant::WrongAmountParse,
        Variant::NoAction,
        Variant::UnauthorizedAction,
        Variant::Redirected,
    ];

    pub fn class(self) -> BugClass {
        match self {
            Variant::NoLock | Variant::WrongAmount | Variant::UnsafeTransfer => BugClass::Ude,
            Variant::MaliciousEmitter | Variant::FakeSymbol | Variant::WrongAmountParse => BugClass::Iep,
            Variant::NoAction | Variant::UnauthorizedAction | Variant::Redirected => BugClass::Uu,
        }
    }

    pub fn of_class(class: BugClass) -> [Variant; 3] {
        match class {
            BugClass::Ude => [Variant::NoLock, Variant::WrongAmount, Variant::UnsafeTransfer],
            BugClass::Iep => [Variant::MaliciousEmitter, Variant::FakeSymbol, Variant::WrongAmountParse],
            BugClass::Uu => [Variant::NoAction, Variant::UnauthorizedAction, Variant::Redirected],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::NoLock => "no-lock",
            Variant::WrongAmount => "wrong-amount",
            Variant::UnsafeTransfer => "unsafe-transfer",
            Variant::MaliciousEmitter => "malicious-emitter",
            Variant::FakeSymbol => "fake-symbol",
            Variant::WrongAmountParse => "wrong-amount-parse",
            Variant::NoAction => "no-action",
            Variant::UnauthorizedAction => "unauthorized-action",
            Variant::Redirected => "redirected",
        }
    }

    pub fn parse(class: BugClass, s: &str) -> Result<Variant, SimError> {
        Variant::of_class(class)
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| SimError::UnknownVariant {
                class,
                variant: s.to_owned(),
            })
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ground truth for one generated sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Label {
    pub key: SequenceKey,
    /// `None` for benign traffic.
    pub variant: Option<Variant>,
}

impl Label {
    pub fn class(&self) -> Option<BugClass> {
        self.variant.map(Variant::class)
    }

    pub fn to_line(&self) -> String {
        let (class, variant) = match self.variant {
            Some(v) => (v.class().as_str(), v.as_str()),
            None => ("benign", ""),
        };
        serde_json::json!({ "class": class, "key": self.key.to_string(), "variant": variant }).to_string()
    }
}

#[derive(Debug, Clone)]
pub struct LabeledDataset {
    /// Every generated record, ordinals in generation order.
    pub records: Vec<RawRecord>,
    pub labels: Vec<Label>,
    pub config: BridgeConfig,
    pub chains: [ChainId; 2],
}

impl LabeledDataset {
    pub fn benign_keys(&self) -> impl Iterator<Item = &SequenceKey> {
        self.labels.iter().filter(|l| l.variant.is_none()).map(|l| &l.key)
    }

    pub fn label(&self, key: &SequenceKey) -> Option<&Label> {
        self.labels.iter().find(|l| &l.key == key)
    }

    /// Event records of one chain, in generation order.
    pub fn chain_records(&self, chain: &ChainId) -> Vec<RawRecord> {
        let mut out: Vec<RawRecord> = self
            .records
            .iter()
            .filter(|r| !r.kind().is_action() && &r.tx_key().chain == chain)
            .cloned()
            .collect();
        renumber(&mut out);
        out
    }

    pub fn action_records(&self) -> Vec<RawRecord> {
        let mut out: Vec<RawRecord> = self.records.iter().filter(|r| r.kind().is_action()).cloned().collect();
        renumber(&mut out);
        out
    }

    /// Writes `<chain>.trace.jsonl` per chain, `relayer.jsonl`,
    /// `labels.jsonl` and `config.json` into `dir`. Returns the paths in
    /// that order.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, SimError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| SimError::Io(IngestError::Io { path, source })
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let mut written = Vec::new();
        for chain in &self.chains {
            let path = dir.join(format!("{chain}.trace.jsonl"));
            crate::ingest::write_trace_file(&path, &self.chain_records(chain))?;
            written.push(path);
        }
        let path = dir.join("relayer.jsonl");
        crate::ingest::write_trace_file(&path, &self.action_records())?;
        written.push(path);

        let path = dir.join("labels.jsonl");
        let mut labels = String::new();
        for l in &self.labels {
            labels.push_str(&l.to_line());
            labels.push('\n');
        }
        crate::atomic_write(&path, labels.as_bytes()).map_err(io(&path))?;
        written.push(path);

        let path = dir.join("config.json");
        crate::atomic_write(&path, self.config.to_json().as_bytes()).map_err(io(&path))?;
        written.push(path);
        Ok(written)
    }

    /// The whole dataset as one trace file body: events then actions.
    pub fn to_trace_text(&self) -> String {
        let mut buf = Vec::new();
        let mut all = self.chains.iter().flat_map(|c| self.chain_records(c)).collect::<Vec<_>>();
        all.extend(self.action_records());
        renumber(&mut all);
        write_records(&mut buf, &all).expect("writing to memory");
        String::from_utf8(buf).expect("records are utf-8")
    }

    pub fn summary(&self) -> BTreeMap<&'static str, usize> {
        let mut m = BTreeMap::new();
        for l in &self.labels {
            *m.entry(l.class().map_or("benign", BugClass::as_str)).or_insert(0) += 1;
        }
        m
    }
}

fn renumber(records: &mut [RawRecord]) {
    for (i, r) in records.iter_mut().enumerate() {
        r.ordinal = i as u64;
    }
}

/// Parses a scenario's labels back from `labels.jsonl`.
pub fn parse_labels(text: &str) -> Result<Vec<Label>, SimError> {
    #[derive(Deserialize)]
    struct Line {
        class: String,
        key: String,
        variant: String,
    }
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let line: Line = serde_json::from_str(l).map_err(|e| SimError::SpecParse(e.to_string()))?;
            let key: SequenceKey = line.key.parse().map_err(|e| SimError::SpecParse(format!("{e}")))?;
            let variant = if line.class == "benign" {
                None
            } else {
                let class: BugClass = line.class.parse().map_err(SimError::SpecParse)?;
                Some(Variant::parse(class, &line.variant)?)
            };
            Ok(Label { key, variant })
        })
        .collect()
}

/// One generated sequence.
#[derive(Debug, Clone)]
pub struct Generated {
    pub key: SequenceKey,
    pub records: Vec<RawRecord>,
}

#[derive(Debug, Clone)]
struct Pair {
    src: AssetId,
    dst: AssetId,
}

struct Stages {
    lock: Option<RawRecord>,
    deposit: DepositEvent,
    lock_action: Option<LockAction>,
    unlock_action: Option<UnlockAction>,
    unlock_event: Option<UnlockEvent>,
}

/// Stateful generator: blocks advance monotonically per chain and every
/// transaction hash, amount and attacker address is unique.
pub struct Generator {
    rng: ChaCha8Rng,
    src: ChainId,
    dst: ChainId,
    router_src: Address,
    router_dst: Address,
    pairs: Vec<Pair>,
    users: Vec<Address>,
    noise: bool,
    counter: u64,
    block_src: u64,
    block_dst: u64,
}

const ROUTER_SRC: [u8; 20] = [0x11; 20];
const ROUTER_DST: [u8; 20] = [0x22; 20];

fn asset_of(spec: &AssetSpec, chain: &ChainId) -> Result<AssetId, SimError> {
    if spec.contract == "NATIVE" {
        return Ok(AssetId::native(chain.clone(), spec.symbol.clone()));
    }
    let a = normalize_address(&spec.contract, chain).map_err(|e| SimError::InvalidSpec(e.to_string()))?;
    Ok(AssetId::token(a, spec.symbol.clone()))
}

impl Generator {
    pub fn new(spec: &ScenarioSpec) -> Result<Self, SimError> {
        let chain = |s: &str| ChainId::new(s).map_err(|e| SimError::InvalidSpec(e.to_string()));
        let src = chain(&spec.chains[0])?;
        let dst = chain(&spec.chains[1])?;
        if src == dst {
            return Err(SimError::InvalidSpec("source and destination chain must differ".into()));
        }
        if spec.assets.is_empty() {
            return Err(SimError::InvalidSpec("at least one asset pair is required".into()));
        }
        if spec.user_count == 0 {
            return Err(SimError::InvalidSpec("user_count must be positive".into()));
        }
        let pairs = spec
            .assets
            .iter()
            .map(|p| {
                Ok(Pair {
                    src: asset_of(&p.src, &src)?,
                    dst: asset_of(&p.dst, &dst)?,
                })
            })
            .collect::<Result<Vec<_>, SimError>>()?;
        let users = (0..spec.user_count as u64)
            .map(|i| {
                let mut b = [0x55u8; 20];
                b[12..].copy_from_slice(&i.to_be_bytes());
                Address::new(dst.clone(), b)
            })
            .collect();
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            router_src: Address::new(src.clone(), ROUTER_SRC),
            router_dst: Address::new(dst.clone(), ROUTER_DST),
            src,
            dst,
            pairs,
            users,
            noise: spec.noise,
            counter: 0,
            block_src: 1_000,
            block_dst: 5_000,
        })
    }

    /// Config matching the generated traffic.
    pub fn config(&self) -> BridgeConfig {
        let mut cfg = BridgeConfig::new()
            .with_router(self.router_src.clone())
            .with_router(self.router_dst.clone());
        for p in &self.pairs {
            for a in [&p.src, &p.dst] {
                if let (true, Some(sym)) = (a.is_native(), a.symbol()) {
                    cfg = cfg.with_native_symbol(a.chain().clone(), sym);
                }
            }
        }
        cfg
    }

    fn next_id(&mut self) -> u64 {
        self.counter += 1;
        self.counter
    }

    fn hash(&mut self, id: u64, tag: u8) -> TxHash {
        let mut b = [0u8; 32];
        self.rng.fill_bytes(&mut b);
        b[0] = tag;
        b[1..9].copy_from_slice(&id.to_be_bytes());
        TxHash::new(b)
    }

    fn fresh(&mut self, chain: &ChainId, tag: u8) -> Address {
        let id = self.next_id();
        let mut b = [0u8; 20];
        self.rng.fill_bytes(&mut b);
        b[0] = tag;
        b[1..9].copy_from_slice(&id.to_be_bytes());
        Address::new(chain.clone(), b)
    }

    /// An amount no other generated transfer uses.
    fn amount(&mut self, id: u64) -> Amount {
        let base: u128 = self.rng.gen_range(1..1_000_000);
        Amount::from_u128(base * 10_000_000 + u128::from(id % 10_000_000))
    }

    fn advance(&mut self) -> (u64, u64) {
        self.block_src += self.rng.gen_range(1..=3);
        self.block_dst += self.rng.gen_range(1..=3);
        (self.block_src, self.block_dst)
    }

    fn pick_pair(&mut self, asset: Option<usize>) -> Pair {
        let i = asset.unwrap_or_else(|| self.rng.gen_range(0..self.pairs.len()));
        self.pairs[i].clone()
    }

    fn lock_record(&self, tx: &TxKey, pair: &Pair, amount: Amount, to: Address, block: u64) -> RawRecord {
        let payload = match pair.src.contract() {
            Contract::Native => Payload::NativeTransfer(
                NativeTransfer::new(tx.at(0), pair.src.symbol().map(str::to_owned), amount, to)
                    .expect("generated on the source chain"),
            ),
            sc => Payload::LockEvent(
                LockEvent::new(tx.at(0), sc.clone(), pair.src.clone(), amount, to).expect("generated on the source chain"),
            ),
        };
        RawRecord::new(0, Some(block), payload)
    }

    /// The consistent five-stage sequence for one transfer.
    fn honest(&mut self, pair: &Pair, to_dst: Address, amount: Amount) -> (TxKey, Stages) {
        let id = self.next_id();
        let tx = TxKey::new(self.src.clone(), self.hash(id, 0x5a));
        let dtx = TxKey::new(self.dst.clone(), self.hash(id, 0xda));
        let (bs, _) = (self.block_src, self.block_dst);
        let lock = self.lock_record(&tx, pair, amount, self.router_src.clone(), bs);
        let deposit = DepositEvent::new(
            tx.at(1),
            self.router_src.clone(),
            pair.src.clone(),
            amount,
            pair.dst.clone(),
            to_dst.clone(),
        )
        .expect("generated on the source chain");
        let lock_action = LockAction::new(tx.clone(), pair.src.clone(), amount, pair.dst.clone(), to_dst.clone())
            .expect("chains line up");
        let unlock_action =
            UnlockAction::new(tx.clone(), pair.dst.clone(), amount, to_dst.clone(), true).expect("chains line up");
        let unlock_event = UnlockEvent::new(dtx.at(0), pair.dst.contract().clone(), pair.dst.clone(), amount, to_dst)
            .expect("generated on the destination chain");
        (
            tx,
            Stages {
                lock: Some(lock),
                deposit,
                lock_action: Some(lock_action),
                unlock_action: Some(unlock_action),
                unlock_event: Some(unlock_event),
            },
        )
    }

    fn emit(&mut self, s: Stages, extra_src: Vec<RawRecord>) -> Vec<RawRecord> {
        let (bs, bd) = (self.block_src, self.block_dst);
        let mut out = Vec::new();
        out.extend(s.lock);
        out.push(RawRecord::new(0, Some(bs), Payload::DepositEvent(s.deposit)));
        out.extend(extra_src);
        out.extend(s.lock_action.map(|a| RawRecord::new(0, None, Payload::LockAction(a))));
        out.extend(s.unlock_action.map(|a| RawRecord::new(0, None, Payload::UnlockAction(a))));
        out.extend(s.unlock_event.map(|e| RawRecord::new(0, Some(bd), Payload::UnlockEvent(e))));
        out
    }

    pub fn gen_benign(&mut self) -> Generated {
        self.advance();
        let pair = self.pick_pair(None);
        let user = self.users[self.rng.gen_range(0..self.users.len())].clone();
        let id = self.counter + 1;
        let amount = self.amount(id);
        let (tx, stages) = self.honest(&pair, user, amount);
        let mut extra = Vec::new();
        if self.noise && self.rng.gen_bool(0.25) {
            // an unrelated token transfer in the same transaction
            let token = self.fresh(&self.src.clone(), 0x70);
            let payee = self.fresh(&self.src.clone(), 0x71);
            let e = LockEvent::new(tx.at(2), Contract::Token(token.clone()), AssetId::token(token, None), amount, payee)
                .expect("generated on the source chain");
            extra.push(RawRecord::new(0, Some(self.block_src), Payload::LockEvent(e)));
        }
        Generated {
            key: SequenceKey::Source(tx),
            records: self.emit(stages, extra),
        }
    }

    pub fn inject(&mut self, variant: Variant, asset: Option<usize>) -> Generated {
        self.advance();
        let pair = self.pick_pair(asset);
        let attacker = self.fresh(&self.dst.clone(), 0xee);
        let id = self.counter + 1;
        let amount = self.amount(id);
        let (tx, mut s) = self.honest(&pair, attacker.clone(), amount);
        let bs = self.block_src;
        let key = SequenceKey::Source(tx.clone());
        match variant {
            Variant::NoLock => s.lock = None,
            Variant::WrongAmount => {
                s.lock = Some(self.lock_record(&tx, &pair, Amount::from_u128(1), self.router_src.clone(), bs));
            }
            Variant::UnsafeTransfer => {
                let payee = self.fresh(&self.src.clone(), 0xef);
                s.lock = Some(self.lock_record(&tx, &pair, amount, payee, bs));
            }
            Variant::MaliciousEmitter => {
                let emitter = self.fresh(&self.src.clone(), 0xec);
                s.lock = None;
                s.deposit = DepositEvent::new(tx.at(1), emitter, pair.src.clone(), amount, pair.dst.clone(), attacker)
                    .expect("generated on the source chain");
            }
            Variant::FakeSymbol => {
                let native = self.pairs.iter().find(|p| p.src.is_native()).cloned();
                let symbol = native
                    .as_ref()
                    .and_then(|p| p.src.symbol().map(str::to_owned))
                    .unwrap_or_else(|| "ETH".to_owned());
                let dst_asset = native.map_or_else(|| pair.dst.clone(), |p| p.dst);
                let fake_addr = self.fresh(&self.src.clone(), 0xfa);
                let fake = AssetId::token(fake_addr.clone(), Some(symbol.clone()));
                let fake_pair = Pair {
                    src: fake.clone(),
                    dst: dst_asset.clone(),
                };
                s.lock = Some(self.lock_record(&tx, &fake_pair, amount, self.router_src.clone(), bs));
                s.deposit = DepositEvent::new(tx.at(1), self.router_src.clone(), fake, amount, dst_asset.clone(), attacker.clone())
                    .expect("generated on the source chain");
                let upgraded = AssetId::native(self.src.clone(), Some(symbol));
                s.lock_action = Some(
                    LockAction::new(tx.clone(), upgraded, amount, dst_asset.clone(), attacker.clone()).expect("chains line up"),
                );
                s.unlock_action =
                    Some(UnlockAction::new(tx.clone(), dst_asset.clone(), amount, attacker.clone(), true).expect("chains line up"));
                let dtx = s.unlock_event.as_ref().expect("honest has one").tx().clone();
                s.unlock_event = Some(
                    UnlockEvent::new(dtx, dst_asset.contract().clone(), dst_asset, amount, attacker)
                        .expect("generated on the destination chain"),
                );
            }
            Variant::WrongAmountParse => {
                let inflated = amount.checked_mul(Amount::from_u128(100)).expect("small amounts");
                s.lock_action = Some(
                    LockAction::new(tx.clone(), pair.src.clone(), inflated, pair.dst.clone(), attacker.clone())
                        .expect("chains line up"),
                );
                s.unlock_action = Some(
                    UnlockAction::new(tx.clone(), pair.dst.clone(), inflated, attacker.clone(), true).expect("chains line up"),
                );
                let dtx = s.unlock_event.as_ref().expect("honest has one").tx().clone();
                s.unlock_event = Some(
                    UnlockEvent::new(dtx, pair.dst.contract().clone(), pair.dst.clone(), inflated, attacker)
                        .expect("generated on the destination chain"),
                );
            }
            Variant::NoAction => {
                let e = s.unlock_event.take().expect("honest has one");
                return Generated {
                    key: SequenceKey::Unlock(e.tx().clone()),
                    records: vec![RawRecord::new(0, Some(self.block_dst), Payload::UnlockEvent(e))],
                };
            }
            Variant::UnauthorizedAction => {
                // the source transaction is made up: nothing was ever deposited
                let a = s.unlock_action.take().expect("honest has one");
                let fake = UnlockAction::new(tx.clone(), a.asset_dst().clone(), a.amount_dst(), attacker, false)
                    .expect("chains line up");
                let e = s.unlock_event.take().expect("honest has one");
                return Generated {
                    key,
                    records: vec![
                        RawRecord::new(0, None, Payload::UnlockAction(fake)),
                        RawRecord::new(0, Some(self.block_dst), Payload::UnlockEvent(e)),
                    ],
                };
            }
            Variant::Redirected => {
                let user = self.users[self.rng.gen_range(0..self.users.len())].clone();
                let honest_action = LockAction::new(tx.clone(), pair.src.clone(), amount, pair.dst.clone(), user.clone())
                    .expect("chains line up");
                s.deposit = DepositEvent::new(tx.at(1), self.router_src.clone(), pair.src.clone(), amount, pair.dst.clone(), user)
                    .expect("generated on the source chain");
                s.lock_action = Some(honest_action);
            }
        }
        Generated {
            key,
            records: self.emit(s, Vec::new()),
        }
    }

    /// Routers used for generated traffic.
    pub fn routers(&self) -> [&Address; 2] {
        [&self.router_src, &self.router_dst]
    }
}

/// Expands the scenario into a shuffled plan and runs it.
pub fn gen_dataset(spec: &ScenarioSpec) -> Result<LabeledDataset, SimError> {
    let mut generator = Generator::new(spec)?;
    let mut plan: Vec<Option<(Variant, Option<usize>)>> = vec![None; spec.benign_count];
    for inj in &spec.injections {
        let class = BugClass::from(inj.class);
        if let Some(i) = inj.asset {
            if i >= spec.assets.len() {
                return Err(SimError::InvalidSpec(format!("asset index {i} out of range")));
            }
        }
        let variants: Vec<Variant> = if inj.variant == "cycle" {
            Variant::of_class(class).to_vec()
        } else {
            vec![Variant::parse(class, &inj.variant)?]
        };
        for k in 0..inj.count {
            plan.push(Some((variants[k % variants.len()], inj.asset)));
        }
    }
    plan.shuffle(&mut generator.rng);

    let mut records = Vec::new();
    let mut labels = Vec::new();
    for item in plan {
        let (g, variant) = match item {
            None => (generator.gen_benign(), None),
            Some((v, asset)) => (generator.inject(v, asset), Some(v)),
        };
        records.extend(g.records);
        labels.push(Label { key: g.key, variant });
    }
    renumber(&mut records);
    Ok(LabeledDataset {
        records,
        labels,
        config: generator.config(),
        chains: [generator.src.clone(), generator.dst.clone()],
    })
}

/// Canonical text of every file [`LabeledDataset::write`] produces, keyed
/// by file name. Used to compare datasets without touching disk.
pub fn render_files(ds: &LabeledDataset) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    let body = |recs: &[RawRecord]| {
        let mut s = format!("{HEADER}\n");
        for r in recs {
            s.push_str(&encode_line(r));
            s.push('\n');
        }
        s
    };
    for chain in &ds.chains {
        files.insert(format!("{chain}.trace.jsonl"), body(&ds.chain_records(chain)));
    }
    files.insert("relayer.jsonl".into(), body(&ds.action_records()));
    files.insert(
        "labels.jsonl".into(),
        ds.labels.iter().map(|l| l.to_line() + "\n").collect(),
    );
    files.insert("config.json".into(), ds.config.to_json());
    files
}

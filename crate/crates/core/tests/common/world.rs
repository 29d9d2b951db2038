//! Small random state sets over a deliberately tiny value domain, so that
//! consistent and inconsistent pairs both occur often.

use bridgewatch::builder::{Payload, RawRecord};
use bridgewatch::facts::StatePool;
use bridgewatch::ingest::{BridgeConfig, MatchingMode};
use bridgewatch::model::{
    Address, Amount, AssetId, ChainEvent, ChainId, Contract, DepositEvent, LockAction, LockEvent, Trace, TxHash,
    TxKey, UnlockAction, UnlockEvent,
};
use rand::seq::SliceRandom;
use rand::Rng;

pub const MAX_EVENTS: usize = 6;
pub const MAX_ACTIONS: usize = 4;

#[derive(Debug, Clone)]
pub struct World {
    pub cfg: BridgeConfig,
    pub traces: Vec<Trace>,
    pub unlock_events: Vec<UnlockEvent>,
    pub lock_actions: Vec<LockAction>,
    pub unlock_actions: Vec<UnlockAction>,
}

impl World {
    pub fn pool(&self) -> StatePool {
        StatePool::from_parts(
            self.traces.iter().cloned(),
            self.lock_actions.iter().cloned(),
            self.unlock_actions.iter().cloned(),
        )
    }

    pub fn trace_of(&self, tx: &TxKey) -> Trace {
        self.traces
            .iter()
            .find(|t| t.tx() == tx)
            .cloned()
            .unwrap_or_else(|| Trace::empty(tx.clone()))
    }

    pub fn lock_events(&self) -> Vec<&LockEvent> {
        self.traces.iter().flat_map(|t| t.lock_events()).collect()
    }

    pub fn deposit_events(&self) -> Vec<&DepositEvent> {
        self.traces.iter().flat_map(|t| t.deposit_events()).collect()
    }

    /// Every state as a record: events first, then actions.
    pub fn records(&self) -> Vec<RawRecord> {
        let mut out = Vec::new();
        for t in &self.traces {
            for e in t.events() {
                let payload = match e {
                    ChainEvent::Lock(l) => Payload::LockEvent(l.clone()),
                    ChainEvent::Deposit(d) => Payload::DepositEvent(d.clone()),
                    ChainEvent::Unlock(u) => Payload::UnlockEvent(u.clone()),
                };
                out.push(RawRecord::new(0, Some(t.block()), payload));
            }
        }
        for (i, e) in self.unlock_events.iter().enumerate() {
            out.push(RawRecord::new(0, Some(500 + i as u64), Payload::UnlockEvent(e.clone())));
        }
        for a in &self.lock_actions {
            out.push(RawRecord::new(0, None, Payload::LockAction(a.clone())));
        }
        for a in &self.unlock_actions {
            out.push(RawRecord::new(0, None, Payload::UnlockAction(a.clone())));
        }
        for (i, r) in out.iter_mut().enumerate() {
            r.ordinal = i as u64;
        }
        out
    }
}

pub fn src() -> ChainId {
    ChainId::new("src").unwrap()
}

pub fn dst() -> ChainId {
    ChainId::new("dst").unwrap()
}

pub fn addr(chain: &ChainId, b: u8) -> Address {
    Address::new(chain.clone(), [b; 20])
}

pub fn router_src() -> Address {
    addr(&src(), 0x11)
}

pub fn router_dst() -> Address {
    addr(&dst(), 0x22)
}

/// Canonical value with probability 3/4, otherwise any value of the pool.
fn pick<T: Clone>(rng: &mut impl Rng, pool: &[T]) -> T {
    if rng.gen_bool(0.75) {
        pool[0].clone()
    } else {
        pool.choose(rng).unwrap().clone()
    }
}

struct Domain {
    src_assets: Vec<AssetId>,
    dst_assets: Vec<AssetId>,
    src_emitters: Vec<Address>,
    lock_tos: Vec<Address>,
    dst_users: Vec<Address>,
    amounts: Vec<Amount>,
    src_txs: Vec<TxKey>,
}

impl Domain {
    fn new() -> Self {
        let (s, d) = (src(), dst());
        Self {
            src_assets: vec![
                AssetId::token(addr(&s, 0xa0), Some("USDC".into())),
                AssetId::token(addr(&s, 0xa1), Some("ETH".into())),
                AssetId::native(s.clone(), Some("ETH".into())),
            ],
            dst_assets: vec![
                AssetId::token(addr(&d, 0xb0), Some("USDC".into())),
                AssetId::token(addr(&d, 0xb1), None),
                AssetId::native(d.clone(), None),
            ],
            src_emitters: vec![router_src(), addr(&s, 0x12), addr(&s, 0x33)],
            lock_tos: vec![router_src(), addr(&s, 0x33)],
            dst_users: vec![addr(&d, 0x50), addr(&d, 0x51)],
            amounts: (1..=3).map(Amount::from_u128).collect(),
            src_txs: (1..=3u8).map(|n| TxKey::new(s.clone(), TxHash::new([n; 32]))).collect(),
        }
    }
}

/// Emitter for an asset: its own contract mostly, sometimes another one.
fn emitter(rng: &mut impl Rng, asset: &AssetId, others: &[AssetId]) -> Contract {
    if rng.gen_bool(0.8) {
        asset.contract().clone()
    } else {
        others.choose(rng).unwrap().contract().clone()
    }
}

pub fn gen_world(rng: &mut impl Rng) -> World {
    let d = Domain::new();
    let mut cfg = BridgeConfig::new().with_router(router_src()).with_router(router_dst());
    cfg.fee_tolerance_bps = *[None, None, Some(0), Some(5_000)].choose(rng).unwrap();
    cfg.matching_mode = if rng.gen_bool(0.5) {
        MatchingMode::Injective
    } else {
        MatchingMode::Shared
    };

    let n_events = rng.gen_range(0..=MAX_EVENTS);
    let n_actions = rng.gen_range(0..=MAX_ACTIONS);
    // the last source tx never has events: actions may point at it
    let mut per_tx: Vec<Vec<ChainEvent>> = vec![Vec::new(); 2];
    let mut unlock_events = Vec::new();
    for _ in 0..n_events {
        let roll = rng.gen_range(0..10);
        if roll < 7 {
            let t = rng.gen_range(0..2);
            let tx = d.src_txs[t].at(per_tx[t].len() as u32);
            let asset = pick(rng, &d.src_assets);
            let amount = pick(rng, &d.amounts);
            let ev = if roll < 3 {
                let sc = emitter(rng, &asset, &d.src_assets);
                ChainEvent::Lock(LockEvent::new(tx, sc, asset, amount, pick(rng, &d.lock_tos)).unwrap())
            } else {
                let dep = DepositEvent::new(
                    tx,
                    pick(rng, &d.src_emitters),
                    asset,
                    amount,
                    pick(rng, &d.dst_assets),
                    pick(rng, &d.dst_users),
                )
                .unwrap();
                ChainEvent::Deposit(dep)
            };
            per_tx[t].push(ev);
        } else {
            let n = unlock_events.len() as u8;
            let tx = TxKey::new(dst(), TxHash::new([0xd0 + n; 32])).at(0);
            let asset = pick(rng, &d.dst_assets);
            let sc = emitter(rng, &asset, &d.dst_assets);
            let e = UnlockEvent::new(tx, sc, asset, pick(rng, &d.amounts), pick(rng, &d.dst_users)).unwrap();
            unlock_events.push(e);
        }
    }
    let traces = per_tx
        .into_iter()
        .enumerate()
        .filter(|(_, evs)| !evs.is_empty())
        .map(|(t, evs)| Trace::new(d.src_txs[t].clone(), 100 + t as u64, evs).unwrap())
        .collect();

    let mut lock_actions = Vec::new();
    let mut unlock_actions = Vec::new();
    for _ in 0..n_actions {
        let tx = pick(rng, &d.src_txs);
        if rng.gen_bool(0.5) {
            let a = LockAction::new(
                tx,
                pick(rng, &d.src_assets),
                pick(rng, &d.amounts),
                pick(rng, &d.dst_assets),
                pick(rng, &d.dst_users),
            )
            .unwrap();
            lock_actions.push(a);
        } else {
            let a = UnlockAction::new(
                tx,
                pick(rng, &d.dst_assets),
                pick(rng, &d.amounts),
                pick(rng, &d.dst_users),
                rng.gen_bool(0.85),
            )
            .unwrap();
            unlock_actions.push(a);
        }
    }
    World {
        cfg,
        traces,
        unlock_events,
        lock_actions,
        unlock_actions,
    }
}

//! Direct nested-loop evaluation of the validity and consistency rules,
//! written without the engine's indexes, diagnostics or matching code.

use bridgewatch::facts::{self, Conjunct};
use bridgewatch::ingest::{BridgeConfig, MatchingMode};
use bridgewatch::model::{
    Address, AssetId, Contract, DepositEvent, LockAction, LockEvent, Trace, UnlockAction, UnlockEvent,
};

use super::world::World;

fn same_asset(a: &AssetId, b: &AssetId) -> bool {
    a.chain() == b.chain() && a.contract() == b.contract()
}

fn is_router(cfg: &BridgeConfig, a: &Address) -> bool {
    cfg.routers(a.chain()).map(|s| s.iter().any(|r| r == a)).unwrap_or(false)
}

fn first_false(conjuncts: &[(Conjunct, bool)]) -> Option<Conjunct> {
    conjuncts.iter().find(|(_, ok)| !ok).map(|(c, _)| *c)
}

pub fn v_lock_event(cfg: &BridgeConfig, e: &LockEvent) -> Option<Conjunct> {
    first_false(&[
        (Conjunct::ScNotAsset, e.sc() == e.asset().contract()),
        (Conjunct::ToNotRouter, is_router(cfg, e.to())),
    ])
}

pub fn v_deposit_event(cfg: &BridgeConfig, e: &DepositEvent) -> bool {
    is_router(cfg, e.sc())
}

pub fn c_lock_deposit(lk: &LockEvent, dep: &DepositEvent) -> Option<Conjunct> {
    let same_tx = lk.tx().chain == dep.tx().chain && lk.tx().hash == dep.tx().hash;
    first_false(&[
        (Conjunct::Tx, same_tx),
        (Conjunct::Asset, same_asset(lk.asset(), dep.asset_src())),
        (Conjunct::Amount, lk.amount() == dep.amount_src()),
    ])
}

fn backs(cfg: &BridgeConfig, lk: &LockEvent, dep: &DepositEvent) -> bool {
    v_lock_event(cfg, lk).is_none() && c_lock_deposit(lk, dep).is_none()
}

/// Tries every assignment of distinct locks to deposits.
fn assign(cfg: &BridgeConfig, deps: &[&DepositEvent], locks: &[&LockEvent], used: &mut Vec<bool>) -> bool {
    let Some((dep, rest)) = deps.split_first() else {
        return true;
    };
    for (j, lk) in locks.iter().enumerate() {
        if !used[j] && backs(cfg, lk, dep) {
            used[j] = true;
            let ok = assign(cfg, rest, locks, used);
            used[j] = false;
            if ok {
                return true;
            }
        }
    }
    false
}

pub fn v_source_tx(cfg: &BridgeConfig, t: &Trace, mode: MatchingMode) -> bool {
    let locks: Vec<&LockEvent> = t.lock_events().collect();
    let deps: Vec<&DepositEvent> = t.deposit_events().filter(|d| v_deposit_event(cfg, d)).collect();
    match mode {
        MatchingMode::Shared => deps.iter().all(|d| locks.iter().any(|l| backs(cfg, l, d))),
        MatchingMode::Injective => assign(cfg, &deps, &locks, &mut vec![false; locks.len()]),
    }
}

pub fn c_action_deposit(a: &LockAction, dep: &DepositEvent) -> Option<Conjunct> {
    first_false(&[
        (Conjunct::AssetSrc, same_asset(a.asset_src(), dep.asset_src())),
        (Conjunct::AmountSrc, a.amount_src() == dep.amount_src()),
        (Conjunct::AssetDst, same_asset(a.asset_dst(), dep.asset_dst())),
        (Conjunct::ToDst, a.to_dst() == dep.to_dst()),
    ])
}

pub fn v_lock_action(cfg: &BridgeConfig, a: &LockAction, t: &Trace, mode: MatchingMode) -> bool {
    v_source_tx(cfg, t, mode)
        && t
            .deposit_events()
            .any(|d| v_deposit_event(cfg, d) && c_action_deposit(a, d).is_none())
}

fn amount_within_fee(cfg: &BridgeConfig, alk: &LockAction, aun: &UnlockAction) -> bool {
    let Some(bps) = cfg.fee_tolerance_bps else {
        return true;
    };
    let src: u128 = alk.amount_src().to_string().parse().unwrap();
    let dst: u128 = aun.amount_dst().to_string().parse().unwrap();
    dst <= src && dst * 10_000 >= src * u128::from(10_000 - bps)
}

pub fn c_lock_unlock_actions(cfg: &BridgeConfig, alk: &LockAction, aun: &UnlockAction, t: &Trace, mode: MatchingMode) -> bool {
    v_lock_action(cfg, alk, t, mode)
        && aun.dest_chain() == alk.dest_chain()
        && same_asset(aun.asset_dst(), alk.asset_dst())
        && aun.to_dst() == alk.to_dst()
        && amount_within_fee(cfg, alk, aun)
}

pub fn c_unlock_action_event(aun: &UnlockAction, e: &UnlockEvent) -> Option<Conjunct> {
    let emitted_by_asset = match (aun.asset_dst().contract(), e.sc()) {
        (Contract::Native, Contract::Native) => true,
        (Contract::Token(a), Contract::Token(b)) => a == b,
        _ => false,
    };
    first_false(&[
        (Conjunct::Asset, same_asset(aun.asset_dst(), e.asset())),
        (Conjunct::AssetIsSc, emitted_by_asset),
        (Conjunct::Amount, aun.amount_dst() == e.amount()),
        (Conjunct::To, aun.to_dst() == e.to()),
    ])
}

pub fn v_unlock_event(w: &World, e: &UnlockEvent, mode: MatchingMode) -> bool {
    w.unlock_actions.iter().any(|aun| {
        aun.authorized()
            && c_unlock_action_event(aun, e).is_none()
            && w
                .lock_actions
                .iter()
                .any(|alk| c_lock_unlock_actions(&w.cfg, alk, aun, &w.trace_of(alk.tx()), mode))
    })
}

/// Number of rule instances compared, and a description of each
/// disagreement between the engine and the oracle.
#[derive(Debug, Default)]
pub struct Agreement {
    pub checked: usize,
    pub per_formula: [usize; 9],
    /// Instances the oracle found to hold, per formula.
    pub held: [usize; 9],
    pub disagreements: Vec<String>,
}

pub trait Outcome: PartialEq + std::fmt::Debug {
    fn holds(&self) -> bool;
}

impl Outcome for bool {
    fn holds(&self) -> bool {
        *self
    }
}

impl Outcome for Option<Conjunct> {
    fn holds(&self) -> bool {
        self.is_none()
    }
}

impl Agreement {
    fn check<T: Outcome>(&mut self, formula: usize, what: &str, engine: T, oracle: T) {
        self.checked += 1;
        self.per_formula[formula] += 1;
        if oracle.holds() {
            self.held[formula] += 1;
        }
        if engine != oracle {
            self.disagreements
                .push(format!("{what}: engine {engine:?}, oracle {oracle:?}"));
        }
    }
}

/// Compares every rule instance the world admits, under both matching modes.
pub fn compare(w: &World, out: &mut Agreement) {
    let cfg = &w.cfg;
    let pool = w.pool();
    for lk in w.lock_events() {
        let v = facts::v_lock_event(lk, cfg).unwrap();
        out.check(0, "V(E_lk)", v.failed_conjunct, v_lock_event(cfg, lk));
        for dep in w.deposit_events() {
            let c = facts::c_lock_deposit(lk, dep);
            out.check(2, "C(E_lk,E_dep)", c.failed_conjunct, c_lock_deposit(lk, dep));
        }
    }
    for dep in w.deposit_events() {
        out.check(1, "V(E_dep)", facts::v_deposit_event(dep, cfg).unwrap().holds, v_deposit_event(cfg, dep));
    }
    for mode in [MatchingMode::Shared, MatchingMode::Injective] {
        for t in &w.traces {
            let v = facts::v_source_tx(t, cfg, mode).unwrap();
            out.check(3, "V(tx^s)", v.holds, v_source_tx(cfg, t, mode));
        }
        for a in &w.lock_actions {
            let t = pool.trace(a.tx());
            let v = facts::v_lock_action(a, &t, cfg, mode).unwrap();
            out.check(5, "V(A_lk)", v.holds, v_lock_action(cfg, a, &t, mode));
            for aun in &w.unlock_actions {
                let c = facts::c_lock_unlock_actions(a, aun, &t, cfg, mode).unwrap();
                out.check(6, "C(A_lk,A_unlk)", c.holds, c_lock_unlock_actions(cfg, a, aun, &t, mode));
            }
        }
        for e in &w.unlock_events {
            let v = facts::v_unlock_event(e, &pool, cfg, mode).unwrap();
            out.check(8, "V(E_unlk)", v.holds, v_unlock_event(w, e, mode));
        }
    }
    for a in &w.lock_actions {
        for dep in w.deposit_events() {
            let c = facts::c_action_deposit(a, dep);
            out.check(4, "C(A_lk,E_dep)", c.failed_conjunct, c_action_deposit(a, dep));
        }
    }
    for aun in &w.unlock_actions {
        for e in &w.unlock_events {
            let c = facts::c_unlock_action_event(aun, e);
            out.check(7, "C(A_unlk,E_unlk)", c.failed_conjunct, c_unlock_action_event(aun, e));
        }
    }
}

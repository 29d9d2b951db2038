//! Validity and consistency facts over bridge states.
//!
//! Each fact is a pure function returning a [`FactVerdict`]. When a fact
//! fails, the verdict names the first conjunct that did not hold; for
//! quantified facts it names the conjunct that stopped the most promising
//! candidate. Quantifiers range over finite sets and are evaluated by
//! enumeration, pruned through the indices kept in [`StatePool`].

use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::ingest::{BridgeConfig, MatchingMode};
use crate::matching::max_matching;
use crate::model::{
    Address, Amount, AssetId, DepositEvent, LockAction, LockEvent, Trace, TxKey, TxRef,
    UnlockAction, UnlockEvent,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FactError {
    #[error("no router configured for chain {0}")]
    MissingRouterConfig(crate::model::ChainId),
    #[error("trace {found} given for action on {expected}")]
    TraceMismatch { expected: TxKey, found: TxKey },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Fact {
    VLockEvent,
    VDepositEvent,
    CLockDeposit,
    VSourceTx,
    CActionDeposit,
    VLockAction,
    CLockUnlockActions,
    CUnlockActionEvent,
    VUnlockEvent,
}

impl Fact {
    pub const ALL: [Fact; 9] = [
        Fact::VLockEvent,
        Fact::VDepositEvent,
        Fact::CLockDeposit,
        Fact::VSourceTx,
        Fact::CActionDeposit,
        Fact::VLockAction,
        Fact::CLockUnlockActions,
        Fact::CUnlockActionEvent,
        Fact::VUnlockEvent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Fact::VLockEvent => "V(E_lk)",
            Fact::VDepositEvent => "V(E_dep)",
            Fact::CLockDeposit => "C(E_lk,E_dep)",
            Fact::VSourceTx => "V(tx^s)",
            Fact::CActionDeposit => "C(A_lk,E_dep)",
            Fact::VLockAction => "V(A_lk)",
            Fact::CLockUnlockActions => "C(A_lk,A_unlk)",
            Fact::CUnlockActionEvent => "C(A_unlk,E_unlk)",
            Fact::VUnlockEvent => "V(E_unlk)",
        }
    }

    pub fn parse(s: &str) -> Option<Fact> {
        Fact::ALL.into_iter().find(|f| f.as_str() == s)
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Names of the individual conditions a fact can fail on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Conjunct {
    /// Lock event not emitted by the asset contract.
    ScNotAsset,
    /// Lock recipient is not a router.
    ToNotRouter,
    /// Deposit not emitted by a router.
    ScNotRouter,
    Tx,
    Asset,
    Amount,
    /// A valid deposit with no lock events at all in its transaction.
    NoLock,
    /// Enough consistent locks exist, but not one per deposit.
    LockReused,
    AssetSrc,
    AmountSrc,
    AssetDst,
    ToDst,
    /// The source transaction itself is invalid.
    SourceTx,
    NoValidDeposit,
    /// The lock action the unlock relies on is invalid.
    LockActionInvalid,
    DestChain,
    AmountDst,
    /// Unlock event not emitted by the unlocked asset's contract.
    AssetIsSc,
    To,
    /// No unlock action targets this unlock event's asset and recipient.
    NoAction,
    Unauthorized,
    /// The unlock action has no lock action to stand on.
    NoLockAction,
}

impl Conjunct {
    pub const ALL: [Conjunct; 22] = [
        Conjunct::ScNotAsset,
        Conjunct::ToNotRouter,
        Conjunct::ScNotRouter,
        Conjunct::Tx,
        Conjunct::Asset,
        Conjunct::Amount,
        Conjunct::NoLock,
        Conjunct::LockReused,
        Conjunct::AssetSrc,
        Conjunct::AmountSrc,
        Conjunct::AssetDst,
        Conjunct::ToDst,
        Conjunct::SourceTx,
        Conjunct::NoValidDeposit,
        Conjunct::LockActionInvalid,
        Conjunct::DestChain,
        Conjunct::AmountDst,
        Conjunct::AssetIsSc,
        Conjunct::To,
        Conjunct::NoAction,
        Conjunct::Unauthorized,
        Conjunct::NoLockAction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Conjunct::ScNotAsset => "sc≠asset",
            Conjunct::ToNotRouter => "to≠router",
            Conjunct::ScNotRouter => "sc≠router",
            Conjunct::Tx => "tx",
            Conjunct::Asset => "asset",
            Conjunct::Amount => "amount",
            Conjunct::NoLock => "no-lock",
            Conjunct::LockReused => "lock-reused",
            Conjunct::AssetSrc => "asset^s",
            Conjunct::AmountSrc => "amount^s",
            Conjunct::AssetDst => "asset^d",
            Conjunct::ToDst => "to^d",
            Conjunct::SourceTx => "V(tx^s)",
            Conjunct::NoValidDeposit => "no-valid-deposit",
            Conjunct::LockActionInvalid => "V(A_lk)",
            Conjunct::DestChain => "ID^d",
            Conjunct::AmountDst => "amount^d",
            Conjunct::AssetIsSc => "asset=sc",
            Conjunct::To => "to",
            Conjunct::NoAction => "no-action",
            Conjunct::Unauthorized => "unauthorized",
            Conjunct::NoLockAction => "no-lock-action",
        }
    }

    pub fn parse(s: &str) -> Option<Conjunct> {
        Conjunct::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for Conjunct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Reference to a state, used for witnesses and failing subjects.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateRef {
    Event(TxRef),
    LockAction(TxKey),
    UnlockAction {
        src_tx: TxKey,
        to: Address,
        amount: Amount,
    },
}

impl StateRef {
    pub fn lock_action(a: &LockAction) -> Self {
        StateRef::LockAction(a.tx().clone())
    }

    pub fn unlock_action(a: &UnlockAction) -> Self {
        StateRef::UnlockAction {
            src_tx: a.src_tx().clone(),
            to: a.to_dst().clone(),
            amount: a.amount_dst(),
        }
    }
}

impl fmt::Display for StateRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateRef::Event(r) => write!(f, "event:{r}"),
            StateRef::LockAction(k) => write!(f, "lock_action:{k}"),
            StateRef::UnlockAction { src_tx, to, amount } => {
                write!(f, "unlock_action:{src_tx}->{to}:{amount}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactVerdict {
    pub fact: Fact,
    pub holds: bool,
    pub failed_conjunct: Option<Conjunct>,
    /// The state a universal fact failed on, when there is one.
    pub subject: Option<StateRef>,
    pub witnesses: Vec<StateRef>,
}

impl FactVerdict {
    fn pass(fact: Fact, witnesses: Vec<StateRef>) -> Self {
        Self {
            fact,
            holds: true,
            failed_conjunct: None,
            subject: None,
            witnesses,
        }
    }

    fn fail(fact: Fact, conjunct: Conjunct) -> Self {
        Self {
            fact,
            holds: false,
            failed_conjunct: Some(conjunct),
            subject: None,
            witnesses: Vec::new(),
        }
    }

    fn about(mut self, subject: StateRef) -> Self {
        self.subject = Some(subject);
        self
    }

    /// Evaluates conjuncts in order and fails on the first false one.
    fn conjunction(fact: Fact, conjuncts: &[(Conjunct, bool)]) -> Self {
        match conjuncts.iter().find(|(_, ok)| !ok) {
            Some((c, _)) => Self::fail(fact, *c),
            None => Self::pass(fact, Vec::new()),
        }
    }
}

/// Position of a conjunct in an evaluation order; later means the
/// candidate got further before failing.
fn progress(order: &[Conjunct], c: Conjunct) -> usize {
    order.iter().position(|x| *x == c).unwrap_or(0)
}

const LOCK_DEPOSIT_ORDER: [Conjunct; 5] = [
    Conjunct::ScNotAsset,
    Conjunct::ToNotRouter,
    Conjunct::Tx,
    Conjunct::Asset,
    Conjunct::Amount,
];

const ACTION_DEPOSIT_ORDER: [Conjunct; 4] = [
    Conjunct::AssetSrc,
    Conjunct::AmountSrc,
    Conjunct::AssetDst,
    Conjunct::ToDst,
];

const UNLOCK_PAIR_ORDER: [Conjunct; 4] = [
    Conjunct::Asset,
    Conjunct::AssetIsSc,
    Conjunct::Amount,
    Conjunct::To,
];

const ACTION_PAIR_ORDER: [Conjunct; 5] = [
    Conjunct::LockActionInvalid,
    Conjunct::DestChain,
    Conjunct::AssetDst,
    Conjunct::ToDst,
    Conjunct::AmountDst,
];

/// V(E_lk): emitted by the asset's own contract and paid to the router.
pub fn v_lock_event(e: &LockEvent, cfg: &BridgeConfig) -> Result<FactVerdict, FactError> {
    let routers = cfg.routers(&e.tx().chain)?;
    Ok(FactVerdict::conjunction(
        Fact::VLockEvent,
        &[
            (Conjunct::ScNotAsset, e.sc() == e.asset().contract()),
            (Conjunct::ToNotRouter, routers.contains(e.to())),
        ],
    ))
}

/// V(E_dep): emitted by a configured router of its chain.
pub fn v_deposit_event(e: &DepositEvent, cfg: &BridgeConfig) -> Result<FactVerdict, FactError> {
    let routers = cfg.routers(&e.tx().chain)?;
    Ok(FactVerdict::conjunction(
        Fact::VDepositEvent,
        &[(Conjunct::ScNotRouter, routers.contains(e.sc()))],
    ))
}

/// C(E_lk, E_dep): same transaction, same asset, same amount.
pub fn c_lock_deposit(lk: &LockEvent, dep: &DepositEvent) -> FactVerdict {
    FactVerdict::conjunction(
        Fact::CLockDeposit,
        &[
            (Conjunct::Tx, lk.tx().key() == dep.tx().key()),
            (Conjunct::Asset, lk.asset() == dep.asset_src()),
            (Conjunct::Amount, lk.amount() == dep.amount_src()),
        ],
    )
}

/// The conjunct that stops a lock from backing a deposit, or `None` when
/// it is valid and consistent.
fn lock_blocker(
    lk: &LockEvent,
    dep: &DepositEvent,
    cfg: &BridgeConfig,
) -> Result<Option<Conjunct>, FactError> {
    let v = v_lock_event(lk, cfg)?;
    if !v.holds {
        return Ok(v.failed_conjunct);
    }
    Ok(c_lock_deposit(lk, dep).failed_conjunct)
}

/// V(tx^s): every valid deposit in the trace is backed by a valid,
/// consistent lock in the same trace. Injective mode additionally
/// requires distinct locks per deposit.
pub fn v_source_tx(
    trace: &Trace,
    cfg: &BridgeConfig,
    matching: MatchingMode,
) -> Result<FactVerdict, FactError> {
    let locks: Vec<&LockEvent> = trace.lock_events().collect();
    let mut deposits = Vec::new();
    for dep in trace.deposit_events() {
        if v_deposit_event(dep, cfg)?.holds {
            deposits.push(dep);
        }
    }

    let mut adj: Vec<Vec<usize>> = Vec::with_capacity(deposits.len());
    for dep in &deposits {
        let mut row = Vec::new();
        let mut best: Option<Conjunct> = None;
        for (j, lk) in locks.iter().enumerate() {
            match lock_blocker(lk, dep, cfg)? {
                None => row.push(j),
                Some(c) => {
                    let better = best.is_none_or(|b| {
                        progress(&LOCK_DEPOSIT_ORDER, c) > progress(&LOCK_DEPOSIT_ORDER, b)
                    });
                    if better {
                        best = Some(c);
                    }
                }
            }
        }
        if row.is_empty() {
            let why = best.unwrap_or(Conjunct::NoLock);
            return Ok(FactVerdict::fail(Fact::VSourceTx, why)
                .about(StateRef::Event(dep.tx().clone())));
        }
        adj.push(row);
    }

    let chosen: Vec<usize> = match matching {
        MatchingMode::Shared => adj.iter().map(|row| row[0]).collect(),
        MatchingMode::Injective => {
            let m = max_matching(&adj, locks.len());
            if let Some(i) = m.iter().position(Option::is_none) {
                return Ok(FactVerdict::fail(Fact::VSourceTx, Conjunct::LockReused)
                    .about(StateRef::Event(deposits[i].tx().clone())));
            }
            m.into_iter().flatten().collect()
        }
    };
    let mut witnesses: Vec<StateRef> = Vec::new();
    for j in chosen {
        let r = StateRef::Event(locks[j].tx().clone());
        if !witnesses.contains(&r) {
            witnesses.push(r);
        }
    }
    Ok(FactVerdict::pass(Fact::VSourceTx, witnesses))
}

/// C(A_lk, E_dep): the action carries the deposit's source asset and
/// amount, destination asset and recipient.
pub fn c_action_deposit(a: &LockAction, dep: &DepositEvent) -> FactVerdict {
    FactVerdict::conjunction(
        Fact::CActionDeposit,
        &[
            (Conjunct::AssetSrc, a.asset_src() == dep.asset_src()),
            (Conjunct::AmountSrc, a.amount_src() == dep.amount_src()),
            (Conjunct::AssetDst, a.asset_dst() == dep.asset_dst()),
            (Conjunct::ToDst, a.to_dst() == dep.to_dst()),
        ],
    )
}

/// Outcome of the existential half of V(A_lk): a consistent valid deposit,
/// or the reason the best candidate failed.
fn consistent_deposit<'t>(
    a: &LockAction,
    trace: &'t Trace,
    cfg: &BridgeConfig,
) -> Result<Result<&'t DepositEvent, Conjunct>, FactError> {
    let mut best: Option<Conjunct> = None;
    for dep in trace.deposit_events() {
        if !v_deposit_event(dep, cfg)?.holds {
            continue;
        }
        match c_action_deposit(a, dep).failed_conjunct {
            None => return Ok(Ok(dep)),
            Some(c) => {
                let better = best.is_none_or(|b| {
                    progress(&ACTION_DEPOSIT_ORDER, c) > progress(&ACTION_DEPOSIT_ORDER, b)
                });
                if better {
                    best = Some(c);
                }
            }
        }
    }
    Ok(Err(best.unwrap_or(Conjunct::NoValidDeposit)))
}

/// V(A_lk): the action's source transaction is valid and some valid
/// deposit in it is consistent with the action.
pub fn v_lock_action(
    a: &LockAction,
    trace: &Trace,
    cfg: &BridgeConfig,
    matching: MatchingMode,
) -> Result<FactVerdict, FactError> {
    if trace.tx() != a.tx() {
        return Err(FactError::TraceMismatch {
            expected: a.tx().clone(),
            found: trace.tx().clone(),
        });
    }
    let source = v_source_tx(trace, cfg, matching)?;
    if !source.holds {
        let mut v = FactVerdict::fail(Fact::VLockAction, Conjunct::SourceTx);
        v.subject = source.subject;
        return Ok(v);
    }
    Ok(match consistent_deposit(a, trace, cfg)? {
        Ok(dep) => FactVerdict::pass(Fact::VLockAction, vec![StateRef::Event(dep.tx().clone())]),
        Err(c) => FactVerdict::fail(Fact::VLockAction, c),
    })
}

/// Whether a failing V(A_lk) is explained by its source transaction alone:
/// the trace fails V(tx^s), yet the action faithfully parses a
/// router-emitted deposit.
pub fn lock_action_fails_only_on_source(
    a: &LockAction,
    trace: &Trace,
    cfg: &BridgeConfig,
    matching: MatchingMode,
) -> Result<bool, FactError> {
    if v_source_tx(trace, cfg, matching)?.holds {
        return Ok(false);
    }
    Ok(consistent_deposit(a, trace, cfg)?.is_ok())
}

/// The non-recursive conjuncts of C(A_lk, A_unlk), first failure first.
fn action_pair_structure(alk: &LockAction, aun: &UnlockAction, cfg: &BridgeConfig) -> Option<Conjunct> {
    let amount_ok = match cfg.fee_tolerance_bps {
        None => true,
        Some(bps) => {
            let src = alk.amount_src();
            aun.amount_dst() <= src && aun.amount_dst() >= src.less_bps(bps)
        }
    };
    [
        (Conjunct::DestChain, aun.dest_chain() == alk.dest_chain()),
        (Conjunct::AssetDst, aun.asset_dst() == alk.asset_dst()),
        (Conjunct::ToDst, aun.to_dst() == alk.to_dst()),
        (Conjunct::AmountDst, amount_ok),
    ]
    .into_iter()
    .find(|(_, ok)| !ok)
    .map(|(c, _)| c)
}

/// C(A_lk, A_unlk): the lock action is valid and the unlock targets the
/// same destination chain, asset and recipient. Amounts are compared only
/// when a fee tolerance is configured.
pub fn c_lock_unlock_actions(
    alk: &LockAction,
    aun: &UnlockAction,
    trace: &Trace,
    cfg: &BridgeConfig,
    matching: MatchingMode,
) -> Result<FactVerdict, FactError> {
    let v = v_lock_action(alk, trace, cfg, matching)?;
    if !v.holds {
        return Ok(FactVerdict::fail(Fact::CLockUnlockActions, Conjunct::LockActionInvalid));
    }
    Ok(match action_pair_structure(alk, aun, cfg) {
        Some(c) => FactVerdict::fail(Fact::CLockUnlockActions, c),
        None => FactVerdict::pass(Fact::CLockUnlockActions, v.witnesses),
    })
}

/// C(A_unlk, E_unlk): right asset, emitted by that asset's contract, right
/// amount, right recipient.
pub fn c_unlock_action_event(aun: &UnlockAction, e: &UnlockEvent) -> FactVerdict {
    FactVerdict::conjunction(
        Fact::CUnlockActionEvent,
        &[
            (Conjunct::Asset, aun.asset_dst() == e.asset()),
            (Conjunct::AssetIsSc, aun.asset_dst().contract() == e.sc()),
            (Conjunct::Amount, aun.amount_dst() == e.amount()),
            (Conjunct::To, aun.to_dst() == e.to()),
        ],
    )
}

type DestKey = (AssetId, Address);

/// Known actions and traces, indexed for the existential searches of
/// V(E_unlk). Reads are shared; inserts happen between analysis batches.
#[derive(Debug, Clone, Default)]
pub struct StatePool {
    lock_actions: Vec<LockAction>,
    unlock_actions: Vec<UnlockAction>,
    traces: HashMap<TxKey, Trace>,
    unlock_by_dest: HashMap<DestKey, Vec<usize>>,
    lock_by_dest: HashMap<DestKey, Vec<usize>>,
    lock_by_tx: HashMap<TxKey, Vec<usize>>,
}

impl StatePool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(
        traces: impl IntoIterator<Item = Trace>,
        lock_actions: impl IntoIterator<Item = LockAction>,
        unlock_actions: impl IntoIterator<Item = UnlockAction>,
    ) -> Self {
        let mut pool = Self::new();
        for t in traces {
            pool.insert_trace(t);
        }
        for a in lock_actions {
            pool.insert_lock_action(a);
        }
        for a in unlock_actions {
            pool.insert_unlock_action(a);
        }
        pool
    }

    /// Adds a trace; an existing trace for the same transaction is kept.
    pub fn insert_trace(&mut self, t: Trace) {
        self.traces.entry(t.tx().clone()).or_insert(t);
    }

    pub fn insert_lock_action(&mut self, a: LockAction) {
        let i = self.lock_actions.len();
        self.lock_by_dest
            .entry((a.asset_dst().clone(), a.to_dst().clone()))
            .or_default()
            .push(i);
        self.lock_by_tx.entry(a.tx().clone()).or_default().push(i);
        self.lock_actions.push(a);
    }

    pub fn insert_unlock_action(&mut self, a: UnlockAction) {
        let i = self.unlock_actions.len();
        self.unlock_by_dest
            .entry((a.asset_dst().clone(), a.to_dst().clone()))
            .or_default()
            .push(i);
        self.unlock_actions.push(a);
    }

    pub fn lock_actions(&self) -> &[LockAction] {
        &self.lock_actions
    }

    pub fn unlock_actions(&self) -> &[UnlockAction] {
        &self.unlock_actions
    }

    /// T(tx), empty when the transaction was never observed.
    pub fn trace(&self, tx: &TxKey) -> Cow<'_, Trace> {
        match self.traces.get(tx) {
            Some(t) => Cow::Borrowed(t),
            None => Cow::Owned(Trace::empty(tx.clone())),
        }
    }

    fn unlock_candidates(&self, e: &UnlockEvent) -> &[usize] {
        self.unlock_by_dest
            .get(&(e.asset().clone(), e.to().clone()))
            .map_or(&[], Vec::as_slice)
    }

    /// Lock actions that could pair with `aun`: those sharing its
    /// destination, then those sharing its source transaction.
    fn lock_candidates(&self, aun: &UnlockAction) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .lock_by_dest
            .get(&(aun.asset_dst().clone(), aun.to_dst().clone()))
            .cloned()
            .unwrap_or_default();
        if let Some(by_tx) = self.lock_by_tx.get(aun.src_tx()) {
            for &i in by_tx {
                if !out.contains(&i) {
                    out.push(i);
                }
            }
        }
        out
    }
}

/// V(E_unlk): some authorized unlock action is consistent with the event
/// and with a valid lock action.
pub fn v_unlock_event(
    e: &UnlockEvent,
    pool: &StatePool,
    cfg: &BridgeConfig,
    matching: MatchingMode,
) -> Result<FactVerdict, FactError> {
    // score orders diagnoses: higher means the candidate got further
    let mut best: Option<(usize, Conjunct)> = None;
    let mut note = |score: usize, c: Conjunct| {
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, c));
        }
    };
    for &u in pool.unlock_candidates(e) {
        let aun = &pool.unlock_actions[u];
        if !aun.authorized() {
            note(0, Conjunct::Unauthorized);
            continue;
        }
        if let Some(c) = c_unlock_action_event(aun, e).failed_conjunct {
            note(1 + progress(&UNLOCK_PAIR_ORDER, c), c);
            continue;
        }
        let candidates = pool.lock_candidates(aun);
        if candidates.is_empty() {
            note(5, Conjunct::NoLockAction);
        }
        for l in candidates {
            let alk = &pool.lock_actions[l];
            let trace = pool.trace(alk.tx());
            let v = c_lock_unlock_actions(alk, aun, &trace, cfg, matching)?;
            match v.failed_conjunct {
                None => {
                    return Ok(FactVerdict::pass(
                        Fact::VUnlockEvent,
                        vec![StateRef::unlock_action(aun), StateRef::lock_action(alk)],
                    ))
                }
                Some(c) => note(6 + progress(&ACTION_PAIR_ORDER, c), c),
            }
        }
    }
    let why = best.map_or(Conjunct::NoAction, |(_, c)| c);
    Ok(FactVerdict::fail(Fact::VUnlockEvent, why).about(StateRef::Event(e.tx().clone())))
}

/// Whether a failing V(E_unlk) is explained upstream: an authorized unlock
/// action matches the event and lines up with some lock action on
/// destination, asset and recipient, and only that lock action's own
/// validity is missing.
pub fn unlock_fails_only_on_lock_action(
    e: &UnlockEvent,
    pool: &StatePool,
    cfg: &BridgeConfig,
    matching: MatchingMode,
) -> Result<bool, FactError> {
    for &u in pool.unlock_candidates(e) {
        let aun = &pool.unlock_actions[u];
        if !aun.authorized() || !c_unlock_action_event(aun, e).holds {
            continue;
        }
        for l in pool.lock_candidates(aun) {
            let alk = &pool.lock_actions[l];
            if action_pair_structure(alk, aun, cfg).is_some() {
                continue;
            }
            let trace = pool.trace(alk.tx());
            if !v_lock_action(alk, &trace, cfg, matching)?.holds {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

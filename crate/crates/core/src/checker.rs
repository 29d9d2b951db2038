//! The three security patterns and the violations they raise.
//!
//! | property | pattern            | bug |
//! |----------|--------------------|-----|
//! | RD       | every `V(tx^s)`    | UDE |
//! | CP       | every `V(A_lk)`    | IEP |
//! | AU       | every `V(E_unlk)`  | UU  |
//!
//! A bad deposit makes every later stage of its sequence invalid too. With
//! [`Attribution::RootCause`] (the default) a CP or AU failure is reported
//! only when it is not fully explained by an upstream failure that is
//! itself reported; [`Attribution::Exhaustive`] reports every failure.

use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;

use crate::builder::{correlate, Dataset};
use crate::facts::{
    lock_action_fails_only_on_source, unlock_fails_only_on_lock_action, v_lock_action,
    v_source_tx, v_unlock_event, FactError, FactVerdict, StatePool,
};
use crate::ingest::{BridgeConfig, MatchingMode};
use crate::model::{
    Address, BlockRef, ExecutionSequence, LockAction, SequenceKey, Trace, TxKey, UnlockEvent,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Property {
    Rd,
    Cp,
    Au,
}

impl Property {
    pub const ALL: [Property; 3] = [Property::Rd, Property::Cp, Property::Au];

    pub fn bug(self) -> BugClass {
        match self {
            Property::Rd => BugClass::Ude,
            Property::Cp => BugClass::Iep,
            Property::Au => BugClass::Uu,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Property::Rd => "RD",
            Property::Cp => "CP",
            Property::Au => "AU",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BugClass {
    Ude,
    Iep,
    Uu,
}

impl BugClass {
    pub const ALL: [BugClass; 3] = [BugClass::Ude, BugClass::Iep, BugClass::Uu];

    pub fn property(self) -> Property {
        match self {
            BugClass::Ude => Property::Rd,
            BugClass::Iep => Property::Cp,
            BugClass::Uu => Property::Au,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BugClass::Ude => "UDE",
            BugClass::Iep => "IEP",
            BugClass::Uu => "UU",
        }
    }
}

impl fmt::Display for BugClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BugClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BugClass::ALL
            .into_iter()
            .find(|b| b.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown bug class {s:?}; expected UDE, IEP or UU"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Severity {
    /// A blacklisted address takes part.
    Confirmed,
    Suspicious,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Confirmed => "confirmed",
            Severity::Suspicious => "suspicious",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Attribution {
    #[default]
    RootCause,
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CheckOptions {
    pub matching: MatchingMode,
    pub attribution: Attribution,
}

impl CheckOptions {
    pub fn from_config(cfg: &BridgeConfig) -> Self {
        Self {
            matching: cfg.matching_mode,
            attribution: Attribution::RootCause,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub property: Property,
    pub bug: BugClass,
    pub sequence: SequenceKey,
    /// The failing fact.
    pub verdict: FactVerdict,
    pub severity: Severity,
    pub first_seen: BlockRef,
    pub txs: Vec<TxKey>,
    pub addresses: Vec<Address>,
}

struct Context {
    key: SequenceKey,
    anchor: BlockRef,
    txs: Vec<TxKey>,
    addresses: Vec<Address>,
}

impl Context {
    fn of(seq: &ExecutionSequence) -> Self {
        Self {
            key: seq.key().clone(),
            anchor: seq.anchor().clone(),
            txs: seq.transactions(),
            addresses: seq.participants(),
        }
    }

    fn raise(&self, property: Property, verdict: FactVerdict, cfg: &BridgeConfig) -> Violation {
        debug_assert!(!verdict.holds);
        let severity = if self.addresses.iter().any(|a| cfg.is_blacklisted(a)) {
            Severity::Confirmed
        } else {
            Severity::Suspicious
        };
        Violation {
            property,
            bug: property.bug(),
            sequence: self.key.clone(),
            verdict,
            severity,
            first_seen: self.anchor.clone(),
            txs: self.txs.clone(),
            addresses: self.addresses.clone(),
        }
    }
}

fn trace_context(trace: &Trace) -> Context {
    let seq = ExecutionSequence::new(
        SequenceKey::Source(trace.tx().clone()),
        BlockRef {
            block: trace.block(),
            chain: trace.tx().chain.clone(),
        },
        Some(trace.clone()),
        None,
        None,
        None,
    )
    .expect("trace matches its own key");
    Context::of(&seq)
}

/// RD over one source transaction.
pub fn check_rd(trace: &Trace, cfg: &BridgeConfig, matching: MatchingMode) -> Result<Option<Violation>, FactError> {
    let v = v_source_tx(trace, cfg, matching)?;
    Ok((!v.holds).then(|| trace_context(trace).raise(Property::Rd, v, cfg)))
}

/// CP over one lock action; `trace` must be the trace of its transaction.
pub fn check_cp(
    a: &LockAction,
    trace: &Trace,
    cfg: &BridgeConfig,
    matching: MatchingMode,
) -> Result<Option<Violation>, FactError> {
    let v = v_lock_action(a, trace, cfg, matching)?;
    if v.holds {
        return Ok(None);
    }
    let seq = ExecutionSequence::new(
        SequenceKey::Source(a.tx().clone()),
        BlockRef {
            block: trace.block(),
            chain: a.tx().chain.clone(),
        },
        (!trace.is_empty()).then(|| trace.clone()),
        Some(a.clone()),
        None,
        None,
    )
    .expect("action matches its own key");
    Ok(Some(Context::of(&seq).raise(Property::Cp, v, cfg)))
}

/// AU over one unlock event observed in `block`.
pub fn check_au(
    e: &UnlockEvent,
    block: u64,
    pool: &StatePool,
    cfg: &BridgeConfig,
    matching: MatchingMode,
) -> Result<Option<Violation>, FactError> {
    let v = v_unlock_event(e, pool, cfg, matching)?;
    if v.holds {
        return Ok(None);
    }
    let seq = ExecutionSequence::new(
        SequenceKey::Unlock(e.tx().clone()),
        BlockRef {
            block,
            chain: e.tx().chain.clone(),
        },
        None,
        None,
        None,
        Some(e.clone()),
    )
    .expect("unlock-keyed sequence has no source stages");
    Ok(Some(Context::of(&seq).raise(Property::Au, v, cfg)))
}

/// All violations of one sequence, in property order.
pub fn check_sequence(
    seq: &ExecutionSequence,
    pool: &StatePool,
    cfg: &BridgeConfig,
    opts: CheckOptions,
) -> Result<Vec<Violation>, FactError> {
    let ctx = Context::of(seq);
    let root_cause = opts.attribution == Attribution::RootCause;
    let mut out = Vec::new();
    if let Some(t) = seq.source_trace() {
        let v = v_source_tx(t, cfg, opts.matching)?;
        if !v.holds {
            out.push(ctx.raise(Property::Rd, v, cfg));
        }
    }
    if let Some(a) = seq.lock_action() {
        let trace = match seq.source_trace() {
            Some(t) => std::borrow::Cow::Borrowed(t),
            None => pool.trace(a.tx()),
        };
        let v = v_lock_action(a, &trace, cfg, opts.matching)?;
        if !v.holds && !(root_cause && lock_action_fails_only_on_source(a, &trace, cfg, opts.matching)?) {
            out.push(ctx.raise(Property::Cp, v, cfg));
        }
    }
    if let Some(e) = seq.unlock_event() {
        let v = v_unlock_event(e, pool, cfg, opts.matching)?;
        if !v.holds && !(root_cause && unlock_fails_only_on_lock_action(e, pool, cfg, opts.matching)?) {
            out.push(ctx.raise(Property::Au, v, cfg));
        }
    }
    Ok(out)
}

/// Pool holding every trace and action of a dataset.
pub fn pool_of(dataset: &Dataset) -> StatePool {
    StatePool::from_parts(
        dataset.traces.iter().cloned(),
        dataset.lock_actions.iter().map(|a| a.item.clone()),
        dataset.unlock_actions.iter().map(|a| a.item.clone()),
    )
}

/// Orders violations by first sighting, then sequence, then property.
pub fn sort_violations(vs: &mut [Violation]) {
    vs.sort_by(|a, b| {
        (&a.first_seen, &a.sequence, a.property).cmp(&(&b.first_seen, &b.sequence, b.property))
    });
}

/// Correlates a dataset and checks every sequence. At most one violation
/// is kept per property and sequence key.
pub fn check_all(dataset: &Dataset, cfg: &BridgeConfig, opts: CheckOptions) -> Result<Vec<Violation>, FactError> {
    let sequences = correlate(dataset);
    let pool = pool_of(dataset);
    let per_seq: Vec<Vec<Violation>> = sequences
        .par_iter()
        .map(|s| check_sequence(s, &pool, cfg, opts))
        .collect::<Result<_, _>>()?;
    let mut seen = HashSet::new();
    let mut out: Vec<Violation> = per_seq
        .into_iter()
        .flatten()
        .filter(|v| seen.insert((v.property, v.sequence.clone())))
        .collect();
    sort_violations(&mut out);
    Ok(out)
}

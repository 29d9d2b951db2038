//! Runtime screening of pending unlocks.
//!
//! The relayer pre-executes an outgoing unlock and hands over the whole
//! sequence: source trace, lock action, the unlock action and the unlock
//! events the transaction would emit. The monitor answers allow or abort.
//! Anything that goes wrong while screening, including a malformed
//! request, is an abort.
//!
//! Requests and responses are single JSON lines:
//!
//! ```text
//! {"id":"r1","records":[{...trace record...}, ...]}
//! {"error":null,"id":"r1","latency_us":41,"verdict":"allow","violations":[]}
//! ```

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use thiserror::Error;

use crate::builder::{build_traces, Payload, RawRecord};
use crate::checker::{check_sequence, CheckOptions, Property, Violation};
use crate::facts::{FactError, StatePool};
use crate::ingest::{decode_line, encode_line, BridgeConfig};
use crate::model::{
    Amount, AssetId, Address, BlockRef, ChainEvent, ChainId, ExecutionSequence, LockAction, SequenceKey, Trace,
    TxKey, UnlockAction, UnlockEvent,
};
use crate::report::violation_json;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonitorError {
    #[error("incomplete sequence: missing {0}")]
    IncompleteSequence(&'static str),
    #[error("malformed request: {0}")]
    Malformed(String),
    #[error("replay of an unlock that was already allowed")]
    Replay,
    #[error(transparent)]
    Fact(#[from] FactError),
    #[error("internal error: {0}")]
    Internal(String),
}

/// A complete sequence awaiting its final unlock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingUnlock {
    action: UnlockAction,
    predicted: Vec<UnlockEvent>,
    source_trace: Trace,
    lock_action: LockAction,
}

impl PendingUnlock {
    pub fn new(
        action: UnlockAction,
        predicted: Vec<UnlockEvent>,
        source_trace: Trace,
        lock_action: LockAction,
    ) -> Result<Self, MonitorError> {
        if predicted.is_empty() {
            return Err(MonitorError::IncompleteSequence("predicted unlock events"));
        }
        if source_trace.is_empty() {
            return Err(MonitorError::IncompleteSequence("source trace"));
        }
        if let Some(e) = predicted.iter().find(|e| &e.tx().chain != action.dest_chain()) {
            return Err(MonitorError::Malformed(format!(
                "predicted event {} is not on destination chain {}",
                e.tx(),
                action.dest_chain()
            )));
        }
        let src = action.src_tx();
        if lock_action.tx() != src || source_trace.tx() != src {
            return Err(MonitorError::Malformed(format!(
                "lock action and source trace must both belong to {src}"
            )));
        }
        Ok(Self {
            action,
            predicted,
            source_trace,
            lock_action,
        })
    }

    /// Assembles a request from its records: source events, one lock
    /// action, one unlock action and at least one predicted unlock.
    pub fn from_records(records: Vec<RawRecord>) -> Result<Self, MonitorError> {
        let mut events = Vec::new();
        let mut lock_action = None;
        let mut action = None;
        let mut predicted = Vec::new();
        for r in records {
            match r.payload {
                Payload::LockAction(a) => {
                    if lock_action.replace(a).is_some() {
                        return Err(MonitorError::Malformed("more than one lock action".into()));
                    }
                }
                Payload::UnlockAction(a) => {
                    if action.replace(a).is_some() {
                        return Err(MonitorError::Malformed("more than one unlock action".into()));
                    }
                }
                Payload::PredictedUnlock(e) => predicted.push(e),
                Payload::UnlockEvent(_) => {
                    return Err(MonitorError::Malformed(
                        "observed unlock events do not belong in a request; send predicted_unlock".into(),
                    ))
                }
                _ => events.push(r),
            }
        }
        let action = action.ok_or(MonitorError::IncompleteSequence("unlock action"))?;
        let lock_action = lock_action.ok_or(MonitorError::IncompleteSequence("lock action"))?;
        let mut traces = build_traces(events).map_err(|e| MonitorError::Malformed(e.to_string()))?;
        if traces.len() > 1 {
            return Err(MonitorError::Malformed("source events span several transactions".into()));
        }
        let trace = traces.pop().ok_or(MonitorError::IncompleteSequence("source trace"))?;
        Self::new(action, predicted, trace, lock_action)
    }

    pub fn to_records(&self) -> Vec<RawRecord> {
        let block = Some(self.source_trace.block());
        let mut out: Vec<RawRecord> = self
            .source_trace
            .events()
            .iter()
            .map(|e| {
                let payload = match e {
                    ChainEvent::Lock(l) => Payload::LockEvent(l.clone()),
                    ChainEvent::Deposit(d) => Payload::DepositEvent(d.clone()),
                    ChainEvent::Unlock(u) => Payload::UnlockEvent(u.clone()),
                };
                RawRecord::new(0, block, payload)
            })
            .collect();
        out.push(RawRecord::new(0, None, Payload::LockAction(self.lock_action.clone())));
        out.push(RawRecord::new(0, None, Payload::UnlockAction(self.action.clone())));
        for e in &self.predicted {
            out.push(RawRecord::new(0, None, Payload::PredictedUnlock(e.clone())));
        }
        for (i, r) in out.iter_mut().enumerate() {
            r.ordinal = i as u64;
        }
        out
    }

    pub fn action(&self) -> &UnlockAction {
        &self.action
    }

    pub fn replay_key(&self) -> ReplayKey {
        (
            self.action.src_tx().clone(),
            self.action.dest_chain().clone(),
            self.action.asset_dst().clone(),
            self.action.to_dst().clone(),
            self.action.amount_dst(),
        )
    }

    fn sequence(&self) -> ExecutionSequence {
        ExecutionSequence::new(
            SequenceKey::Source(self.action.src_tx().clone()),
            BlockRef {
                block: self.source_trace.block(),
                chain: self.source_trace.tx().chain.clone(),
            },
            Some(self.source_trace.clone()),
            Some(self.lock_action.clone()),
            Some(self.action.clone()),
            Some(self.predicted[0].clone()),
        )
        .expect("stages checked at construction")
    }
}

/// `(srcTx, destChain, assetDst, toDst, amountDst)` of an unlock action.
pub type ReplayKey = (TxKey, ChainId, AssetId, Address, Amount);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Allow,
    Abort,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Allow => "allow",
            Verdict::Abort => "abort",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonitorDecision {
    pub verdict: Verdict,
    pub violations: Vec<Violation>,
    /// Set when screening could not complete; the verdict is then Abort.
    pub error: Option<String>,
    pub latency: Duration,
}

impl MonitorDecision {
    fn decide(result: Result<Vec<Violation>, MonitorError>, started: Instant) -> Self {
        let (violations, error) = match result {
            Ok(v) => (v, None),
            Err(e) => (Vec::new(), Some(e.to_string())),
        };
        let verdict = if violations.is_empty() && error.is_none() {
            Verdict::Allow
        } else {
            Verdict::Abort
        };
        Self {
            verdict,
            violations,
            error,
            latency: started.elapsed(),
        }
    }

    /// The decision as logged: everything but latency.
    pub fn to_json(&self, id: &str) -> Value {
        json!({
            "id": id,
            "verdict": self.verdict.as_str(),
            "violations": self.violations.iter().map(violation_json).collect::<Vec<_>>(),
            "error": self.error,
        })
    }

    /// The response line sent back to the caller.
    pub fn to_response(&self, id: &str) -> String {
        let mut v = self.to_json(id);
        v["latency_us"] = json!(u64::try_from(self.latency.as_micros()).unwrap_or(u64::MAX));
        v.to_string()
    }
}

fn evaluate(p: &PendingUnlock, prior: &StatePool, cfg: &BridgeConfig, opts: CheckOptions) -> Result<Vec<Violation>, MonitorError> {
    let mut pool = prior.clone();
    pool.insert_trace(p.source_trace.clone());
    pool.insert_lock_action(p.lock_action.clone());
    pool.insert_unlock_action(p.action.clone());
    let seq = p.sequence();
    let mut out = check_sequence(&seq, &pool, cfg, opts)?;
    for e in &p.predicted[1..] {
        if out.iter().any(|v| v.property == Property::Au) {
            break;
        }
        let extra = ExecutionSequence::new(seq.key().clone(), seq.anchor().clone(), None, None, None, Some(e.clone()))
            .expect("no source stages");
        // reuse the full sequence's stages for attribution
        let au = check_sequence(&extra, &pool, cfg, opts)?;
        out.extend(au.into_iter().map(|mut v| {
            v.txs = seq.transactions();
            v.addresses = seq.participants();
            v
        }));
    }
    Ok(out)
}

fn guarded<T>(f: impl FnOnce() -> Result<T, MonitorError>) -> Result<T, MonitorError> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            Err(MonitorError::Internal(msg))
        }
    }
}

/// Screens one pending unlock against a pool holding only its own states.
pub fn screen(p: &PendingUnlock, cfg: &BridgeConfig, opts: CheckOptions) -> MonitorDecision {
    let started = Instant::now();
    MonitorDecision::decide(guarded(|| evaluate(p, &StatePool::new(), cfg, opts)), started)
}

/// Whether `p` may still be submitted: no allowed decision in `history`
/// already consumed an identical unlock action.
pub fn replay_guard(history: &HashSet<ReplayKey>, p: &PendingUnlock) -> bool {
    !history.contains(&p.replay_key())
}

#[derive(Default)]
struct ChainState {
    pool: StatePool,
    consumed: HashSet<ReplayKey>,
}

/// Stateful monitor. Decisions for one destination chain are serialized;
/// different chains proceed independently. Allowed requests join the pool
/// that later requests on the same chain are screened against.
pub struct Monitor {
    cfg: BridgeConfig,
    opts: CheckOptions,
    chains: Mutex<HashMap<ChainId, Arc<Mutex<ChainState>>>>,
    log: Option<Mutex<Box<dyn Write + Send>>>,
}

impl Monitor {
    pub fn new(cfg: BridgeConfig, opts: CheckOptions) -> Self {
        Self {
            cfg,
            opts,
            chains: Mutex::new(HashMap::new()),
            log: None,
        }
    }

    /// Appends every decision, with its request, to `log`.
    pub fn with_log(mut self, log: Box<dyn Write + Send>) -> Self {
        self.log = Some(Mutex::new(log));
        self
    }

    fn chain(&self, chain: &ChainId) -> Arc<Mutex<ChainState>> {
        let mut chains = self.chains.lock().unwrap_or_else(|e| e.into_inner());
        chains.entry(chain.clone()).or_default().clone()
    }

    /// Screens `p`, applying the replay guard and recording allowed states.
    pub fn screen(&self, p: &PendingUnlock) -> MonitorDecision {
        let started = Instant::now();
        let state = self.chain(p.action().dest_chain());
        let mut state = state.lock().unwrap_or_else(|e| e.into_inner());
        let result = guarded(|| {
            if !replay_guard(&state.consumed, p) {
                return Err(MonitorError::Replay);
            }
            evaluate(p, &state.pool, &self.cfg, self.opts)
        });
        let decision = MonitorDecision::decide(result, started);
        if decision.verdict == Verdict::Allow {
            state.consumed.insert(p.replay_key());
            state.pool.insert_trace(p.source_trace.clone());
            state.pool.insert_lock_action(p.lock_action.clone());
            state.pool.insert_unlock_action(p.action.clone());
        }
        decision
    }

    /// Handles one request line and returns the response line.
    pub fn handle_line(&self, line: &str) -> String {
        let started = Instant::now();
        let (id, decision) = match parse_request(line) {
            Ok((id, p)) => {
                let d = self.screen(&p);
                (id, d)
            }
            Err((id, e)) => (id, MonitorDecision::decide(Err(e), started)),
        };
        if let Some(log) = &self.log {
            let entry = json!({ "request": line, "decision": decision.to_json(&id) });
            let mut log = log.lock().unwrap_or_else(|e| e.into_inner());
            // a decision that cannot be logged is still returned; the
            // caller sees the failure on the log's next flush
            let _ = writeln!(log, "{entry}").and_then(|_| log.flush());
        }
        decision.to_response(&id)
    }

    /// Serves requests line by line until `input` ends, flushing each
    /// response.
    pub fn serve(&self, input: impl BufRead, mut output: impl Write) -> std::io::Result<usize> {
        let mut n = 0;
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            writeln!(output, "{}", self.handle_line(&line))?;
            output.flush()?;
            n += 1;
        }
        Ok(n)
    }
}

/// Parses `{"id": ..., "records": [...]}`. On failure the id is still
/// returned when it could be read.
pub fn parse_request(line: &str) -> Result<(String, PendingUnlock), (String, MonitorError)> {
    let v: Value = serde_json::from_str(line).map_err(|e| (String::new(), MonitorError::Malformed(e.to_string())))?;
    let id = v.get("id").and_then(Value::as_str).unwrap_or_default().to_owned();
    let fail = |e: MonitorError| (id.clone(), e);
    let records = v
        .get("records")
        .and_then(Value::as_array)
        .ok_or_else(|| fail(MonitorError::Malformed("records must be an array".into())))?;
    let mut decoded = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let rec = decode_line(&r.to_string(), i + 1, i as u64)
            .map_err(|e| fail(MonitorError::Malformed(format!("record {}: {e}", i + 1))))?;
        decoded.push(rec);
    }
    let p = PendingUnlock::from_records(decoded).map_err(fail)?;
    Ok((id, p))
}

/// Builds the request line for a pending unlock.
pub fn request_line(id: &str, records: &[RawRecord]) -> String {
    let recs: Vec<Value> = records
        .iter()
        .map(|r| serde_json::from_str(&encode_line(r)).expect("encoded records are JSON"))
        .collect();
    json!({ "id": id, "records": recs }).to_string()
}

/// The request a relayer would send for `seq`: its stages with the
/// unlock event as the predicted effect. Missing stages are simply absent.
pub fn request_for_sequence(seq: &ExecutionSequence) -> String {
    let mut records = Vec::new();
    if let Some(t) = seq.source_trace() {
        for e in t.events() {
            let payload = match e {
                ChainEvent::Lock(l) => Payload::LockEvent(l.clone()),
                ChainEvent::Deposit(d) => Payload::DepositEvent(d.clone()),
                ChainEvent::Unlock(u) => Payload::UnlockEvent(u.clone()),
            };
            records.push(RawRecord::new(0, Some(t.block()), payload));
        }
    }
    if let Some(a) = seq.lock_action() {
        records.push(RawRecord::new(0, None, Payload::LockAction(a.clone())));
    }
    if let Some(a) = seq.unlock_action() {
        records.push(RawRecord::new(0, None, Payload::UnlockAction(a.clone())));
    }
    if let Some(e) = seq.unlock_event() {
        records.push(RawRecord::new(0, None, Payload::PredictedUnlock(e.clone())));
    }
    request_line(&seq.key().to_string(), &records)
}

/// Outcome of re-running a decision log.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReplayOutcome {
    pub entries: usize,
    /// 1-based log lines whose decision was not reproduced.
    pub mismatches: Vec<usize>,
}

/// Feeds every logged request, in order, to a fresh monitor and compares
/// each decision with the logged one.
pub fn replay_log(log: impl BufRead, cfg: &BridgeConfig, opts: CheckOptions) -> Result<ReplayOutcome, MonitorError> {
    let monitor = Monitor::new(cfg.clone(), opts);
    let mut out = ReplayOutcome::default();
    for (i, line) in log.lines().enumerate() {
        let line = line.map_err(|e| MonitorError::Malformed(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: Value = serde_json::from_str(&line)
            .map_err(|e| MonitorError::Malformed(format!("log line {}: {e}", i + 1)))?;
        let request = entry
            .get("request")
            .and_then(Value::as_str)
            .ok_or_else(|| MonitorError::Malformed(format!("log line {}: no request", i + 1)))?;
        let response: Value = serde_json::from_str(&monitor.handle_line(request)).expect("responses are JSON");
        let mut replayed = response;
        if let Some(m) = replayed.as_object_mut() {
            m.remove("latency_us");
        }
        out.entries += 1;
        if Some(&replayed) != entry.get("decision") {
            out.mismatches.push(i + 1);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::correlate;
    use crate::checker::BugClass;
    use crate::model::TxHash;
    use crate::sim::{gen_dataset, ScenarioSpec};

    fn requests(spec: &ScenarioSpec) -> (BridgeConfig, Vec<String>) {
        let ds = gen_dataset(spec).unwrap();
        let mut b = crate::builder::SequenceBuilder::new();
        for r in &ds.records {
            b.push(r.clone()).unwrap();
        }
        let lines = correlate(&b.finish()).iter().map(request_for_sequence).collect();
        (ds.config, lines)
    }

    fn verdict(resp: &str) -> String {
        let v: Value = serde_json::from_str(resp).unwrap();
        v["verdict"].as_str().unwrap().to_owned()
    }

    #[test]
    fn benign_request_is_allowed() {
        let (cfg, lines) = requests(&ScenarioSpec::standard(1, 1));
        let m = Monitor::new(cfg, CheckOptions::default());
        assert_eq!(verdict(&m.handle_line(&lines[0])), "allow");
    }

    #[test]
    fn deposit_without_lock_is_aborted_with_rd() {
        let (cfg, lines) = requests(&ScenarioSpec::standard(1, 0).with_injection(BugClass::Ude, "no-lock", 1));
        let resp: Value = serde_json::from_str(&Monitor::new(cfg, CheckOptions::default()).handle_line(&lines[0])).unwrap();
        assert_eq!(resp["verdict"], "abort");
        assert_eq!(resp["violations"][0]["property"], "RD");
    }

    #[test]
    fn inflated_predicted_unlock_is_aborted_with_au() {
        let (cfg, lines) = requests(&ScenarioSpec::standard(1, 1));
        let (id, p) = parse_request(&lines[0]).unwrap();
        let e = &p.predicted[0];
        let tenfold = e.amount().checked_mul(Amount::from_u128(10)).unwrap();
        let bad = UnlockEvent::new(e.tx().clone(), e.sc().clone(), e.asset().clone(), tenfold, e.to().clone()).unwrap();
        let p = PendingUnlock::new(p.action.clone(), vec![bad], p.source_trace.clone(), p.lock_action.clone()).unwrap();
        let d = screen(&p, &cfg, CheckOptions::default());
        assert_eq!(d.verdict, Verdict::Abort, "{id}");
        assert_eq!(d.violations.len(), 1);
        assert_eq!(d.violations[0].property, Property::Au);
    }

    #[test]
    fn garbage_is_aborted_with_error() {
        let m = Monitor::new(BridgeConfig::new(), CheckOptions::default());
        let resp: Value = serde_json::from_str(&m.handle_line("not json")).unwrap();
        assert_eq!(resp["verdict"], "abort");
        assert!(resp["error"].as_str().is_some());
    }

    #[test]
    fn missing_stage_is_incomplete() {
        let (_, lines) = requests(&ScenarioSpec::standard(1, 0).with_injection(BugClass::Uu, "no-action", 1));
        let err = parse_request(&lines[0]).unwrap_err().1;
        assert!(matches!(err, MonitorError::IncompleteSequence(_)));
    }

    #[test]
    fn replay_guard_is_keyed_on_the_action() {
        let (cfg, lines) = requests(&ScenarioSpec::standard(4, 1));
        let (_, p) = parse_request(&lines[0]).unwrap();
        let m = Monitor::new(cfg, CheckOptions::default());
        assert_eq!(m.screen(&p).verdict, Verdict::Allow);
        let again = m.screen(&p);
        assert_eq!(again.verdict, Verdict::Abort);
        assert_eq!(again.error.as_deref(), Some(MonitorError::Replay.to_string().as_str()));

        let mut history = HashSet::new();
        assert!(replay_guard(&history, &p));
        history.insert(p.replay_key());
        assert!(!replay_guard(&history, &p));
        let a = p.action();
        let other_amount =
            UnlockAction::new(a.src_tx().clone(), a.asset_dst().clone(), Amount::from_u128(1), a.to_dst().clone(), true).unwrap();
        let q = PendingUnlock::new(other_amount, p.predicted.clone(), p.source_trace.clone(), p.lock_action.clone()).unwrap();
        assert!(replay_guard(&history, &q));
    }

    #[test]
    fn predictions_must_be_on_the_destination_chain() {
        let (_, lines) = requests(&ScenarioSpec::standard(4, 1));
        let (_, p) = parse_request(&lines[0]).unwrap();
        let e = &p.predicted[0];
        let wrong = TxKey::new(p.source_trace.tx().chain.clone(), TxHash::new([7; 32])).at(0);
        let bad = UnlockEvent::new(
            wrong,
            crate::model::Contract::Native,
            AssetId::native(p.source_trace.tx().chain.clone(), None),
            e.amount(),
            Address::zero(p.source_trace.tx().chain.clone()),
        )
        .unwrap();
        assert!(PendingUnlock::new(p.action.clone(), vec![bad], p.source_trace.clone(), p.lock_action.clone()).is_err());
    }

    #[test]
    fn log_replays_bit_exactly() {
        let spec = ScenarioSpec::standard(6, 20)
            .with_injection(BugClass::Ude, "cycle", 3)
            .with_injection(BugClass::Uu, "cycle", 3);
        let (cfg, mut lines) = requests(&spec);
        lines.push(lines[0].clone());
        lines.push("garbage".into());
        let buf = Arc::new(Mutex::new(Vec::new()));
        struct Shared(Arc<Mutex<Vec<u8>>>);
        impl Write for Shared {
            fn write(&mut self, b: &[u8]) -> std::io::Result<usize> {
                self.0.lock().unwrap().write(b)
            }
            fn flush(&mut self) -> std::io::Result<()> {
                Ok(())
            }
        }
        let m = Monitor::new(cfg.clone(), CheckOptions::default()).with_log(Box::new(Shared(buf.clone())));
        for l in &lines {
            m.handle_line(l);
        }
        let log = buf.lock().unwrap().clone();
        let out = replay_log(log.as_slice(), &cfg, CheckOptions::default()).unwrap();
        assert_eq!(out.entries, lines.len());
        assert!(out.mismatches.is_empty(), "{:?}", out.mismatches);
    }
}

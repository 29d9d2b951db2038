mod common;

use std::collections::BTreeMap;

use bridgewatch::builder::{correlate, SequenceBuilder};
use bridgewatch::checker::check_all;
use bridgewatch::checker::CheckOptions;
use bridgewatch::facts::{self, StatePool};
use bridgewatch::ingest::{decode_line, encode_line, read_trace_str, write_records, MatchingMode, Strictness};
use bridgewatch::model::{ChainEvent, LockEvent, Trace};
use bridgewatch::pipeline::input_digest;
use bridgewatch::sim::{gen_dataset, ScenarioSpec};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::oracle::{self, Agreement};
use common::world::{gen_world, World};

fn world(seed: u64) -> World {
    gen_world(&mut ChaCha8Rng::seed_from_u64(seed))
}

const MODES: [MatchingMode; 2] = [MatchingMode::Shared, MatchingMode::Injective];

/// `trace` with one more copy of `lk` appended at a fresh log index.
fn with_extra_lock(trace: &Trace, lk: &LockEvent) -> Trace {
    let next = trace.events().last().map_or(0, |e| e.tx().index + 1);
    let copy = LockEvent::new(trace.tx().at(next), lk.sc().clone(), lk.asset().clone(), lk.amount(), lk.to().clone())
        .unwrap();
    let mut events = trace.events().to_vec();
    events.push(ChainEvent::Lock(copy));
    Trace::new(trace.tx().clone(), trace.block(), events).unwrap()
}

/// `trace` without its `k`-th event.
fn without_event(trace: &Trace, k: usize) -> Trace {
    let mut events = trace.events().to_vec();
    events.remove(k);
    Trace::new(trace.tx().clone(), trace.block(), events).unwrap()
}

fn sequences_of(records: &[bridgewatch::builder::RawRecord]) -> Vec<String> {
    let mut b = SequenceBuilder::new();
    for r in records {
        b.push(r.clone()).unwrap();
    }
    correlate(&b.finish()).iter().map(|s| format!("{s:?}")).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn facts_agree_with_nested_loop_oracle(seed in any::<u64>()) {
        let mut agreement = Agreement::default();
        oracle::compare(&world(seed), &mut agreement);
        prop_assert!(agreement.disagreements.is_empty(), "{:?}", agreement.disagreements);
    }

    #[test]
    fn injective_acceptance_implies_shared(seed in any::<u64>()) {
        let w = world(seed);
        for t in &w.traces {
            let inj = facts::v_source_tx(t, &w.cfg, MatchingMode::Injective).unwrap().holds;
            let shared = facts::v_source_tx(t, &w.cfg, MatchingMode::Shared).unwrap().holds;
            prop_assert!(!inj || shared);
        }
    }

    #[test]
    fn removing_deposits_or_adding_locks_keeps_source_valid(seed in any::<u64>()) {
        let w = world(seed);
        for mode in MODES {
            for t in &w.traces {
                if !facts::v_source_tx(t, &w.cfg, mode).unwrap().holds {
                    continue;
                }
                for (k, e) in t.events().iter().enumerate() {
                    if matches!(e, ChainEvent::Deposit(_)) {
                        prop_assert!(facts::v_source_tx(&without_event(t, k), &w.cfg, mode).unwrap().holds);
                    }
                }
                for lk in t.lock_events() {
                    let grown = with_extra_lock(t, lk);
                    prop_assert!(facts::v_source_tx(&grown, &w.cfg, mode).unwrap().holds);
                    for a in w.lock_actions.iter().filter(|a| a.tx() == t.tx()) {
                        let before = facts::v_lock_action(a, t, &w.cfg, mode).unwrap().holds;
                        let after = facts::v_lock_action(a, &grown, &w.cfg, mode).unwrap().holds;
                        prop_assert!(!before || after);
                    }
                }
            }
        }
    }

    #[test]
    fn unlock_validity_is_monotone_in_the_pool(seed in any::<u64>(), keep in any::<u8>()) {
        let w = world(seed);
        let full = w.pool();
        let bit = |i: usize| keep & (1 << (i % 8)) != 0;
        let partial = StatePool::from_parts(
            w.traces.iter().cloned(),
            w.lock_actions.iter().enumerate().filter(|(i, _)| bit(*i)).map(|(_, a)| a.clone()),
            w.unlock_actions.iter().enumerate().filter(|(i, _)| bit(i + 4)).map(|(_, a)| a.clone()),
        );
        for mode in MODES {
            for e in &w.unlock_events {
                let small = facts::v_unlock_event(e, &partial, &w.cfg, mode).unwrap().holds;
                let big = facts::v_unlock_event(e, &full, &w.cfg, mode).unwrap().holds;
                prop_assert!(!small || big);
            }
        }
    }

    #[test]
    fn correlation_conserves_every_state(seed in any::<u64>()) {
        let w = world(seed);
        let mut b = SequenceBuilder::new();
        for r in w.records() {
            b.push(r).unwrap();
        }
        let ds = b.finish();
        let seqs = correlate(&ds);
        let events: usize = seqs.iter().map(|s| s.source_trace().map_or(0, |t| t.events().len())).sum();
        let source_events: usize = w.traces.iter().map(|t| t.events().len()).sum();
        prop_assert_eq!(events, source_events);
        prop_assert_eq!(seqs.iter().filter(|s| s.lock_action().is_some()).count(), w.lock_actions.len());
        prop_assert_eq!(seqs.iter().filter(|s| s.unlock_action().is_some()).count(), w.unlock_actions.len());
        prop_assert_eq!(seqs.iter().filter(|s| s.unlock_event().is_some()).count(), w.unlock_events.len());
        for s in &seqs {
            if let (Some(a), Some(e)) = (s.unlock_action(), s.unlock_event()) {
                prop_assert!(a.asset_dst() == e.asset() && a.to_dst() == e.to() && a.amount_dst() == e.amount());
            }
        }
    }

    #[test]
    fn push_order_does_not_change_sequences(seed in any::<u64>()) {
        let records = world(seed).records();
        let mut shuffled = records.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
        prop_assert_eq!(sequences_of(&records), sequences_of(&shuffled));
    }

    #[test]
    fn records_survive_the_wire(seed in any::<u64>()) {
        for (i, r) in world(seed).records().iter().enumerate() {
            let line = encode_line(r);
            let back = decode_line(&line, i + 1, r.ordinal).unwrap();
            prop_assert_eq!(&back, r);
            prop_assert_eq!(encode_line(&back), line);
        }
    }

    #[test]
    fn written_files_read_back_byte_identical(seed in any::<u64>()) {
        let records = world(seed).records();
        let mut first = Vec::new();
        write_records(&mut first, &records).unwrap();
        let text = String::from_utf8(first).unwrap();
        let read = read_trace_str(&text, Strictness::Strict).unwrap();
        prop_assert!(read.warnings.is_empty());
        prop_assert_eq!(&read.records, &records);
        let mut second = Vec::new();
        write_records(&mut second, &read.records).unwrap();
        prop_assert_eq!(text.into_bytes(), second);
    }

    #[test]
    fn digest_ignores_record_order(seed in any::<u64>()) {
        let records = world(seed).records();
        let mut shuffled = records.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(!seed));
        prop_assert_eq!(input_digest(&records), input_digest(&shuffled));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_labels_match_checker(seed in any::<u64>(), benign in 0usize..30, per_class in 0usize..6) {
        let spec = ScenarioSpec::standard(seed, benign)
            .with_injection(bridgewatch::checker::BugClass::Ude, "cycle", per_class)
            .with_injection(bridgewatch::checker::BugClass::Iep, "cycle", per_class)
            .with_injection(bridgewatch::checker::BugClass::Uu, "cycle", per_class);
        let ds = gen_dataset(&spec).unwrap();
        let mut b = SequenceBuilder::new();
        for r in &ds.records {
            b.push(r.clone()).unwrap();
        }
        let violations = check_all(&b.finish(), &ds.config, CheckOptions::from_config(&ds.config)).unwrap();
        let found: BTreeMap<_, _> = violations.iter().map(|v| (v.sequence.clone(), v.bug)).collect();
        prop_assert_eq!(found.len(), violations.len());
        let expected: BTreeMap<_, _> = ds
            .labels
            .iter()
            .filter_map(|l| l.class().map(|c| (l.key.clone(), c)))
            .collect();
        prop_assert_eq!(found, expected);
    }
}

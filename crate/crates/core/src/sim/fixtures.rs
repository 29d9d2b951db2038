//! Committed fixture datasets, shaped after publicly reported exploits.
//!
//! * `qubit`: sixteen deposits of a zero-address token with nothing locked,
//!   plus four crafted deposits whose lock is too small or misdirected.
//! * `thorchain`: six deposits of a fake token named like the native coin
//!   that the relayer reads as native, plus three deposits emitted by a
//!   contract that is not the router.
//! * `mode_split`: one lock backing two equal deposits, accepted only when
//!   locks may be shared between deposits.

use std::collections::BTreeMap;
use std::path::Path;

use super::{gen_dataset, render_files, AssetPair, AssetSpec, BugClassName, Injection, ScenarioSpec, SimError};
use crate::builder::{Payload, RawRecord};
use crate::ingest::{encode_line, BridgeConfig, IngestError, MatchingMode, HEADER};
use crate::model::{Address, Amount, AssetId, ChainId, Contract, DepositEvent, LockEvent, TxHash, TxKey};

fn injection(class: BugClassName, variant: &str, count: usize, asset: Option<usize>) -> Injection {
    Injection {
        class,
        variant: variant.into(),
        count,
        asset,
    }
}

pub fn qubit_spec() -> ScenarioSpec {
    let mut spec = ScenarioSpec::standard(0x0b17, 40);
    spec.assets.push(AssetPair {
        src: AssetSpec {
            contract: format!("0x{}", "00".repeat(20)),
            symbol: None,
        },
        dst: AssetSpec {
            contract: format!("0x{}", "b1".repeat(20)),
            symbol: Some("WETH".into()),
        },
    });
    spec.injections = vec![
        injection(BugClassName::Ude, "no-lock", 16, Some(2)),
        injection(BugClassName::Ude, "wrong-amount", 2, None),
        injection(BugClassName::Ude, "unsafe-transfer", 2, None),
    ];
    spec
}

pub fn thorchain_spec() -> ScenarioSpec {
    let mut spec = ScenarioSpec::standard(0x7c1, 40);
    spec.injections = vec![
        injection(BugClassName::Iep, "fake-symbol", 6, None),
        injection(BugClassName::Iep, "malicious-emitter", 3, None),
    ];
    spec
}

/// Two source transactions: an honest one, and one whose single lock is
/// claimed by two deposits of the same amount.
pub fn mode_split() -> (Vec<RawRecord>, BridgeConfig) {
    let src = ChainId::new("src").expect("valid id");
    let dst = ChainId::new("dst").expect("valid id");
    let router = Address::new(src.clone(), [0x11; 20]);
    let token = Address::new(src.clone(), [0xa0; 20]);
    let asset = AssetId::token(token.clone(), Some("USDC".into()));
    let asset_dst = AssetId::token(Address::new(dst.clone(), [0xb0; 20]), Some("USDC".into()));
    let amount = Amount::from_u128(1_000_000);
    let mut records = Vec::new();
    for (n, deposits) in [(1u8, 1u32), (2, 2)] {
        let block = 100 + u64::from(n);
        let tx = TxKey::new(src.clone(), TxHash::new([n; 32]));
        let lock = LockEvent::new(tx.at(0), Contract::Token(token.clone()), asset.clone(), amount, router.clone())
            .expect("source chain");
        records.push(RawRecord::new(0, Some(block), Payload::LockEvent(lock)));
        for d in 0..deposits {
            let to = Address::new(dst.clone(), [0x50 + n + d as u8; 20]);
            let dep = DepositEvent::new(tx.at(1 + d), router.clone(), asset.clone(), amount, asset_dst.clone(), to)
                .expect("source chain");
            records.push(RawRecord::new(0, Some(block), Payload::DepositEvent(dep)));
        }
    }
    for (i, r) in records.iter_mut().enumerate() {
        r.ordinal = i as u64;
    }
    let cfg = BridgeConfig::new()
        .with_router(router)
        .with_router(Address::new(dst, [0x22; 20]))
        .with_matching(MatchingMode::Injective);
    (records, cfg)
}

fn render_mode_split() -> BTreeMap<String, String> {
    let (records, cfg) = mode_split();
    let mut body = format!("{HEADER}\n");
    for r in &records {
        body.push_str(&encode_line(r));
        body.push('\n');
    }
    BTreeMap::from([("src.trace.jsonl".to_owned(), body), ("config.json".to_owned(), cfg.to_json())])
}

/// Every fixture directory and its files, as text.
pub fn all_fixtures() -> Result<BTreeMap<&'static str, BTreeMap<String, String>>, SimError> {
    Ok(BTreeMap::from([
        ("qubit", render_files(&gen_dataset(&qubit_spec())?)),
        ("thorchain", render_files(&gen_dataset(&thorchain_spec())?)),
        ("mode_split", render_mode_split()),
    ]))
}

/// Writes every fixture under `root/<name>/`.
pub fn write_fixtures(root: &Path) -> Result<(), SimError> {
    for (dir, files) in all_fixtures()? {
        let dir = root.join(dir);
        let io = |source| {
            SimError::Io(IngestError::Io {
                path: dir.display().to_string(),
                source,
            })
        };
        std::fs::create_dir_all(&dir).map_err(io)?;
        for (name, text) in files {
            crate::atomic_write(&dir.join(name), text.as_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

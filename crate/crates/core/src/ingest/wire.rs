//! The v1 trace format: a header line, then one JSON object per line.
//!
//! Every record carries the same fourteen string fields in sorted key
//! order; fields a kind does not use are empty strings. A record that sets
//! a field its kind does not use is rejected, so decoding then encoding a
//! canonical line reproduces it byte for byte.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::builder::{NativeTransfer, Payload, RawRecord, RecordKind};
use crate::model::{
    normalize_address, Address, Amount, AssetId, ChainId, Contract, DepositEvent, LockAction,
    LockEvent, ModelError, TxHash, TxKey, TxRef, UnlockAction, UnlockEvent,
};

pub const HEADER: &str = "#xscope-trace v1";

const NATIVE: &str = "NATIVE";

/// Field order here is the serialized key order, which must stay sorted.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    #[serde(default)]
    amount: String,
    #[serde(default)]
    asset_contract: String,
    #[serde(default)]
    authorized: String,
    #[serde(default)]
    block: String,
    #[serde(default)]
    chain: String,
    #[serde(default)]
    dest_asset: String,
    #[serde(default)]
    dest_chain: String,
    #[serde(default)]
    dest_to: String,
    #[serde(default)]
    index: String,
    #[serde(default)]
    kind: String,
    #[serde(default)]
    sc: String,
    #[serde(default)]
    symbol: String,
    #[serde(default)]
    to: String,
    #[serde(default)]
    tx: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// The first malformed line aborts the read.
    #[default]
    Strict,
    /// Malformed lines are skipped and reported as warnings.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub line: usize,
    pub msg: String,
}

#[derive(Debug, Default)]
pub struct ReadOutcome {
    pub records: Vec<RawRecord>,
    pub warnings: Vec<Warning>,
}

fn sym(s: &str) -> Option<String> {
    (!s.is_empty()).then(|| s.to_owned())
}

fn opt(s: Option<&str>) -> String {
    s.unwrap_or_default().to_owned()
}

fn contract_str(c: &Contract) -> String {
    c.to_string()
}

fn block_str(b: Option<u64>) -> String {
    b.map(|b| b.to_string()).unwrap_or_default()
}

/// Serializes one record, without the trailing newline.
pub fn encode_line(rec: &RawRecord) -> String {
    let mut l = Line {
        kind: rec.kind().as_str().to_owned(),
        block: block_str(rec.block),
        ..Default::default()
    };
    let put_ref = |l: &mut Line, r: &TxRef| {
        l.chain = r.chain.to_string();
        l.tx = r.hash.to_string();
        l.index = r.index.to_string();
    };
    let put_key = |l: &mut Line, k: &TxKey| {
        l.chain = k.chain.to_string();
        l.tx = k.hash.to_string();
    };
    match &rec.payload {
        Payload::LockEvent(e) => {
            put_ref(&mut l, e.tx());
            l.sc = contract_str(e.sc());
            l.asset_contract = contract_str(e.asset().contract());
            l.symbol = opt(e.asset().symbol());
            l.amount = e.amount().to_string();
            l.to = e.to().hex();
        }
        Payload::UnlockEvent(e) | Payload::PredictedUnlock(e) => {
            put_ref(&mut l, e.tx());
            l.sc = contract_str(e.sc());
            l.asset_contract = contract_str(e.asset().contract());
            l.symbol = opt(e.asset().symbol());
            l.amount = e.amount().to_string();
            l.to = e.to().hex();
        }
        Payload::DepositEvent(e) => {
            put_ref(&mut l, e.tx());
            l.sc = e.sc().hex();
            l.asset_contract = contract_str(e.asset_src().contract());
            l.symbol = opt(e.asset_src().symbol());
            l.amount = e.amount_src().to_string();
            l.dest_chain = e.dest_chain().to_string();
            l.dest_asset = contract_str(e.asset_dst().contract());
            l.dest_to = e.to_dst().hex();
        }
        Payload::NativeTransfer(t) => {
            put_ref(&mut l, t.tx());
            l.asset_contract = NATIVE.to_owned();
            l.symbol = opt(t.asset().symbol());
            l.amount = t.amount().to_string();
            l.to = t.to().hex();
        }
        Payload::LockAction(a) => {
            put_key(&mut l, a.tx());
            l.asset_contract = contract_str(a.asset_src().contract());
            l.symbol = opt(a.asset_src().symbol());
            l.amount = a.amount_src().to_string();
            l.dest_chain = a.dest_chain().to_string();
            l.dest_asset = contract_str(a.asset_dst().contract());
            l.dest_to = a.to_dst().hex();
        }
        Payload::UnlockAction(a) => {
            put_key(&mut l, a.src_tx());
            l.dest_chain = a.dest_chain().to_string();
            l.dest_asset = contract_str(a.asset_dst().contract());
            l.symbol = opt(a.asset_dst().symbol());
            l.amount = a.amount_dst().to_string();
            l.dest_to = a.to_dst().hex();
            l.authorized = a.authorized().to_string();
        }
    }
    serde_json::to_string(&l).expect("plain string fields always serialize")
}

/// Fields each kind uses, by key name.
fn used_fields(kind: RecordKind) -> &'static [&'static str] {
    match kind {
        RecordKind::LockEvent | RecordKind::UnlockEvent | RecordKind::PredictedUnlock => &[
            "amount", "asset_contract", "block", "chain", "index", "kind", "sc", "symbol", "to", "tx",
        ],
        RecordKind::DepositEvent => &[
            "amount", "asset_contract", "block", "chain", "dest_asset", "dest_chain", "dest_to",
            "index", "kind", "sc", "symbol", "tx",
        ],
        RecordKind::NativeTransfer => &[
            "amount", "asset_contract", "block", "chain", "index", "kind", "symbol", "to", "tx",
        ],
        RecordKind::LockAction => &[
            "amount", "asset_contract", "block", "chain", "dest_asset", "dest_chain", "dest_to",
            "kind", "symbol", "tx",
        ],
        RecordKind::UnlockAction => &[
            "amount", "authorized", "block", "chain", "dest_asset", "dest_chain", "dest_to", "kind",
            "symbol", "tx",
        ],
    }
}

fn fields(l: &Line) -> [(&'static str, &str); 14] {
    [
        ("amount", &l.amount),
        ("asset_contract", &l.asset_contract),
        ("authorized", &l.authorized),
        ("block", &l.block),
        ("chain", &l.chain),
        ("dest_asset", &l.dest_asset),
        ("dest_chain", &l.dest_chain),
        ("dest_to", &l.dest_to),
        ("index", &l.index),
        ("kind", &l.kind),
        ("sc", &l.sc),
        ("symbol", &l.symbol),
        ("to", &l.to),
        ("tx", &l.tx),
    ]
}

struct Fields<'a>(&'a Line);

impl Fields<'_> {
    fn chain(&self) -> Result<ChainId, String> {
        Ok(ChainId::new(&self.0.chain)?)
    }
    fn dest_chain(&self) -> Result<ChainId, String> {
        Ok(ChainId::new(&self.0.dest_chain)?)
    }
    fn hash(&self) -> Result<TxHash, String> {
        Ok(self.0.tx.parse::<TxHash>()?)
    }
    fn index(&self) -> Result<u32, String> {
        self.0
            .index
            .parse()
            .map_err(|_| format!("malformed index {:?}", self.0.index))
    }
    fn tx_ref(&self) -> Result<TxRef, String> {
        Ok(TxKey::new(self.chain()?, self.hash()?).at(self.index()?))
    }
    fn tx_key(&self) -> Result<TxKey, String> {
        Ok(TxKey::new(self.chain()?, self.hash()?))
    }
    fn amount(&self) -> Result<Amount, String> {
        Ok(self.0.amount.parse::<Amount>()?)
    }
    fn addr(&self, raw: &str, chain: &ChainId) -> Result<Address, String> {
        Ok(normalize_address(raw, chain)?)
    }
    fn contract(&self, raw: &str, chain: &ChainId) -> Result<Contract, String> {
        if raw == NATIVE {
            Ok(Contract::Native)
        } else {
            Ok(Contract::Token(self.addr(raw, chain)?))
        }
    }
    fn asset(&self, raw: &str, chain: &ChainId, symbol: Option<String>) -> Result<AssetId, String> {
        Ok(match self.contract(raw, chain)? {
            Contract::Native => AssetId::native(chain.clone(), symbol),
            Contract::Token(a) => AssetId::token(a, symbol),
        })
    }
    fn block(&self) -> Result<Option<u64>, String> {
        if self.0.block.is_empty() {
            return Ok(None);
        }
        self.0
            .block
            .parse()
            .map(Some)
            .map_err(|_| format!("malformed block {:?}", self.0.block))
    }
    fn authorized(&self) -> Result<bool, String> {
        match self.0.authorized.as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(format!("authorized must be \"true\" or \"false\", got {other:?}")),
        }
    }
}

impl From<ModelError> for String {
    fn from(e: ModelError) -> String {
        e.to_string()
    }
}

fn decode(l: &Line) -> Result<(Option<u64>, Payload), String> {
    let kind = RecordKind::parse(&l.kind).ok_or_else(|| format!("unknown kind {:?}", l.kind))?;
    let used = used_fields(kind);
    for (name, value) in fields(l) {
        if !value.is_empty() && !used.contains(&name) {
            return Err(format!("field {name} is not used by {kind}"));
        }
    }
    let f = Fields(l);
    let block = f.block()?;
    let needs_block = !kind.is_action() && kind != RecordKind::PredictedUnlock;
    if needs_block && block.is_none() {
        return Err(format!("{kind} requires a block number"));
    }
    let payload = match kind {
        RecordKind::LockEvent | RecordKind::UnlockEvent | RecordKind::PredictedUnlock => {
            let tx = f.tx_ref()?;
            let chain = tx.chain.clone();
            let sc = f.contract(&l.sc, &chain)?;
            let asset = f.asset(&l.asset_contract, &chain, sym(&l.symbol))?;
            let to = f.addr(&l.to, &chain)?;
            let amount = f.amount()?;
            match kind {
                RecordKind::LockEvent => Payload::LockEvent(LockEvent::new(tx, sc, asset, amount, to)?),
                RecordKind::UnlockEvent => Payload::UnlockEvent(UnlockEvent::new(tx, sc, asset, amount, to)?),
                _ => Payload::PredictedUnlock(UnlockEvent::new(tx, sc, asset, amount, to)?),
            }
        }
        RecordKind::DepositEvent => {
            let tx = f.tx_ref()?;
            let chain = tx.chain.clone();
            let dest = f.dest_chain()?;
            let sc = f.addr(&l.sc, &chain)?;
            let asset_src = f.asset(&l.asset_contract, &chain, sym(&l.symbol))?;
            let asset_dst = f.asset(&l.dest_asset, &dest, None)?;
            let to_dst = f.addr(&l.dest_to, &dest)?;
            Payload::DepositEvent(DepositEvent::new(tx, sc, asset_src, f.amount()?, asset_dst, to_dst)?)
        }
        RecordKind::NativeTransfer => {
            if l.asset_contract != NATIVE {
                return Err(format!("native_transfer asset_contract must be {NATIVE}"));
            }
            let tx = f.tx_ref()?;
            let to = f.addr(&l.to, &tx.chain)?;
            Payload::NativeTransfer(NativeTransfer::new(tx, sym(&l.symbol), f.amount()?, to)?)
        }
        RecordKind::LockAction => {
            let tx = f.tx_key()?;
            let dest = f.dest_chain()?;
            let asset_src = f.asset(&l.asset_contract, &tx.chain, sym(&l.symbol))?;
            let asset_dst = f.asset(&l.dest_asset, &dest, None)?;
            let to_dst = f.addr(&l.dest_to, &dest)?;
            Payload::LockAction(LockAction::new(tx, asset_src, f.amount()?, asset_dst, to_dst)?)
        }
        RecordKind::UnlockAction => {
            let tx = f.tx_key()?;
            let dest = f.dest_chain()?;
            let asset_dst = f.asset(&l.dest_asset, &dest, sym(&l.symbol))?;
            let to_dst = f.addr(&l.dest_to, &dest)?;
            Payload::UnlockAction(UnlockAction::new(tx, asset_dst, f.amount()?, to_dst, f.authorized()?)?)
        }
    };
    Ok((block, payload))
}

/// Parses one record line. `line` is the 1-based line number for errors.
pub fn decode_line(text: &str, line: usize, ordinal: u64) -> Result<RawRecord, IngestError> {
    let err = |msg: String| IngestError::RecordParse { line, msg };
    let l: Line = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
    let (block, payload) = decode(&l).map_err(err)?;
    Ok(RawRecord::new(ordinal, block, payload))
}

/// Streaming reader over any buffered source. Ordinals count accepted
/// records only, starting at zero.
pub struct TraceReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    next_ordinal: u64,
    strictness: Strictness,
    warnings: Vec<Warning>,
    path: String,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(reader: R, strictness: Strictness) -> Self {
        Self {
            lines: reader.lines(),
            line_no: 0,
            next_ordinal: 0,
            strictness,
            warnings: Vec::new(),
            path: String::from("<input>"),
        }
    }

    pub fn with_path(mut self, path: &Path) -> Self {
        self.path = path.display().to_string();
        self
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    pub fn into_warnings(self) -> Vec<Warning> {
        self.warnings
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<RawRecord, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let text = match self.lines.next()? {
                Ok(t) => t,
                Err(source) => {
                    return Some(Err(IngestError::Io {
                        path: self.path.clone(),
                        source,
                    }))
                }
            };
            self.line_no += 1;
            if self.line_no == 1 {
                if text != HEADER {
                    let e = IngestError::RecordParse {
                        line: 1,
                        msg: format!("expected header {HEADER:?}"),
                    };
                    // a missing header means the whole file is suspect
                    return Some(Err(e));
                }
                continue;
            }
            if text.trim().is_empty() {
                continue;
            }
            match decode_line(&text, self.line_no, self.next_ordinal) {
                Ok(rec) => {
                    self.next_ordinal += 1;
                    return Some(Ok(rec));
                }
                Err(IngestError::RecordParse { line, msg }) if self.strictness == Strictness::Lenient => {
                    self.warnings.push(Warning { line, msg });
                }
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

/// Reads a whole trace from a string.
pub fn read_trace_str(text: &str, strictness: Strictness) -> Result<ReadOutcome, IngestError> {
    let mut reader = TraceReader::new(text.as_bytes(), strictness);
    let records = reader.by_ref().collect::<Result<Vec<_>, _>>()?;
    Ok(ReadOutcome {
        records,
        warnings: reader.into_warnings(),
    })
}

/// Reads a whole trace file.
pub fn read_trace_file(path: &Path, strictness: Strictness) -> Result<ReadOutcome, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = TraceReader::new(BufReader::new(file), strictness).with_path(path);
    let records = reader
        .by_ref()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.in_file(path))?;
    Ok(ReadOutcome {
        records,
        warnings: reader.into_warnings(),
    })
}

/// Writes the header and one line per record.
pub fn write_records<'a, W: Write>(
    mut out: W,
    records: impl IntoIterator<Item = &'a RawRecord>,
) -> std::io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for r in records {
        writeln!(out, "{}", encode_line(r))?;
    }
    out.flush()
}

/// Writes a trace file atomically: to a sibling temp file, then renamed.
pub fn write_trace_file<'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a RawRecord>,
) -> Result<(), IngestError> {
    let io = |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut buf = Vec::new();
    write_records(&mut buf, records).map_err(io)?;
    crate::atomic_write(path, &buf).map_err(io)
}

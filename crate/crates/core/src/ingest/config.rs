//! Bridge configuration: router contracts, native symbols, blacklist and
//! address filters.
//!
//! On disk this is a JSON object:
//!
//! ```json
//! {
//!   "routers": { "src": ["0x…"], "dst": ["0x…"] },
//!   "native_symbols": { "src": "ETH", "dst": "BNB" },
//!   "blacklist": ["src:0x…"],
//!   "address_filters": ["dst:0x…"],
//!   "matching_mode": "injective",
//!   "fee_tolerance_bps": null
//! }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::facts::FactError;
use crate::model::{normalize_address, Address, ChainId};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "BRIDGEWATCH_CONFIG";

/// How lock events are matched against deposit events in one transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchingMode {
    /// Every valid deposit needs some valid, consistent lock. Locks may be shared.
    Shared,
    /// Valid deposits need pairwise distinct locks.
    #[default]
    Injective,
}

impl std::str::FromStr for MatchingMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shared" => Ok(Self::Shared),
            "injective" => Ok(Self::Injective),
            other => Err(format!("unknown matching mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BridgeConfig {
    routers: BTreeMap<ChainId, BTreeSet<Address>>,
    native_symbols: BTreeMap<ChainId, String>,
    blacklist: BTreeSet<Address>,
    address_filters: BTreeSet<Address>,
    pub matching_mode: MatchingMode,
    pub fee_tolerance_bps: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    routers: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    native_symbols: BTreeMap<String, String>,
    #[serde(default)]
    blacklist: Vec<String>,
    #[serde(default)]
    address_filters: Vec<String>,
    #[serde(default)]
    matching_mode: MatchingMode,
    #[serde(default)]
    fee_tolerance_bps: Option<u32>,
}

fn invalid(field: String, msg: impl Into<String>) -> IngestError {
    IngestError::ConfigInvalid {
        field,
        msg: msg.into(),
    }
}

/// Parses `chain:0xhex`.
fn scoped_address(raw: &str, field: String) -> Result<Address, IngestError> {
    let (chain, hex) = raw
        .split_once(':')
        .ok_or_else(|| invalid(field.clone(), "expected chain:0xaddress"))?;
    let chain = ChainId::new(chain).map_err(|e| invalid(field.clone(), e.to_string()))?;
    normalize_address(hex, &chain).map_err(|e| invalid(field, e.to_string()))
}

impl BridgeConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_router(mut self, router: Address) -> Self {
        self.routers
            .entry(router.chain().clone())
            .or_default()
            .insert(router);
        self
    }

    pub fn with_native_symbol(mut self, chain: ChainId, symbol: &str) -> Self {
        self.native_symbols.insert(chain, symbol.to_owned());
        self
    }

    pub fn with_blacklisted(mut self, addr: Address) -> Self {
        self.blacklist.insert(addr);
        self
    }

    pub fn with_filtered(mut self, addr: Address) -> Self {
        self.address_filters.insert(addr);
        self
    }

    pub fn with_matching(mut self, mode: MatchingMode) -> Self {
        self.matching_mode = mode;
        self
    }

    pub fn with_fee_tolerance_bps(mut self, bps: Option<u32>) -> Self {
        self.fee_tolerance_bps = bps;
        self
    }

    /// Router set for `chain`; analysis of a chain without one is an error.
    pub fn routers(&self, chain: &ChainId) -> Result<&BTreeSet<Address>, FactError> {
        self.routers
            .get(chain)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| FactError::MissingRouterConfig(chain.clone()))
    }

    pub fn is_router(&self, addr: &Address) -> Result<bool, FactError> {
        Ok(self.routers(addr.chain())?.contains(addr))
    }

    pub fn chains(&self) -> impl Iterator<Item = &ChainId> {
        self.routers.keys()
    }

    pub fn native_symbol(&self, chain: &ChainId) -> Option<&str> {
        self.native_symbols.get(chain).map(String::as_str)
    }

    pub fn is_blacklisted(&self, addr: &Address) -> bool {
        self.blacklist.contains(addr)
    }

    pub fn is_filtered(&self, addr: &Address) -> bool {
        self.address_filters.contains(addr)
    }

    pub fn has_filters(&self) -> bool {
        !self.address_filters.is_empty()
    }

    /// Checks the invariants that can be checked without data.
    pub fn validate(&self) -> Result<(), IngestError> {
        if let Some(a) = self.blacklist.intersection(&self.address_filters).next() {
            return Err(invalid(
                "blacklist".into(),
                format!("{a} is also in address_filters"),
            ));
        }
        if let Some(bps) = self.fee_tolerance_bps {
            if bps > 10_000 {
                return Err(invalid(
                    "fee_tolerance_bps".into(),
                    format!("{bps} exceeds 10000"),
                ));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        let file: ConfigFile =
            serde_json::from_str(text).map_err(|e| IngestError::ConfigParse(e.to_string()))?;
        let mut cfg = BridgeConfig {
            matching_mode: file.matching_mode,
            fee_tolerance_bps: file.fee_tolerance_bps,
            ..Default::default()
        };
        for (chain, addrs) in file.routers {
            let field = format!("routers.{chain}");
            let id = ChainId::new(&chain).map_err(|e| invalid(field.clone(), e.to_string()))?;
            let set = cfg.routers.entry(id.clone()).or_default();
            for (i, raw) in addrs.iter().enumerate() {
                let a = normalize_address(raw, &id)
                    .map_err(|e| invalid(format!("{field}[{i}]"), e.to_string()))?;
                set.insert(a);
            }
        }
        for (chain, sym) in file.native_symbols {
            let field = format!("native_symbols.{chain}");
            let id = ChainId::new(&chain).map_err(|e| invalid(field.clone(), e.to_string()))?;
            if sym.is_empty() {
                return Err(invalid(field, "empty symbol"));
            }
            cfg.native_symbols.insert(id, sym);
        }
        for (i, raw) in file.blacklist.iter().enumerate() {
            cfg.blacklist
                .insert(scoped_address(raw, format!("blacklist[{i}]"))?);
        }
        for (i, raw) in file.address_filters.iter().enumerate() {
            cfg.address_filters
                .insert(scoped_address(raw, format!("address_filters[{i}]"))?);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical pretty-printed JSON, suitable for [`BridgeConfig::from_json`].
    pub fn to_json(&self) -> String {
        let file = ConfigFile {
            routers: self
                .routers
                .iter()
                .map(|(c, s)| (c.to_string(), s.iter().map(Address::hex).collect()))
                .collect(),
            native_symbols: self
                .native_symbols
                .iter()
                .map(|(c, s)| (c.to_string(), s.clone()))
                .collect(),
            blacklist: self.blacklist.iter().map(Address::to_string).collect(),
            address_filters: self.address_filters.iter().map(Address::to_string).collect(),
            matching_mode: self.matching_mode,
            fee_tolerance_bps: self.fee_tolerance_bps,
        };
        let mut s = serde_json::to_string_pretty(&file).expect("config serializes");
        s.push('\n');
        s
    }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<BridgeConfig, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    BridgeConfig::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROUTER_SRC: &str = "0x1111111111111111111111111111111111111111";
    const ROUTER_DST: &str = "0x2222222222222222222222222222222222222222";

    fn minimal() -> String {
        format!(r#"{{"routers": {{"src": ["{ROUTER_SRC}"], "dst": ["{ROUTER_DST}"]}}}}"#)
    }

    #[test]
    fn minimal_config_loads() {
        let cfg = BridgeConfig::from_json(&minimal()).unwrap();
        let src = ChainId::new("src").unwrap();
        assert_eq!(cfg.routers(&src).unwrap().len(), 1);
        assert_eq!(cfg.matching_mode, MatchingMode::Injective);
        assert_eq!(cfg.fee_tolerance_bps, None);
    }

    #[test]
    fn missing_router_is_deferred_to_analysis() {
        let cfg = BridgeConfig::from_json(&minimal()).unwrap();
        let other = ChainId::new("bsc").unwrap();
        assert!(matches!(
            cfg.routers(&other),
            Err(FactError::MissingRouterConfig(c)) if c == other
        ));
    }

    #[test]
    fn overlapping_blacklist_and_filter_is_invalid() {
        let text = format!(
            r#"{{"routers": {{"src": ["{ROUTER_SRC}"]}},
                "blacklist": ["src:0x00000000000000000000000000000000000000aa"],
                "address_filters": ["src:0x00000000000000000000000000000000000000AA"]}}"#
        );
        let err = BridgeConfig::from_json(&text).unwrap_err();
        assert!(matches!(err, IngestError::ConfigInvalid { ref field, .. } if field == "blacklist"));
    }

    #[test]
    fn bad_router_reports_field_path() {
        let text = r#"{"routers": {"src": ["0x11", "0x12"]}}"#;
        match BridgeConfig::from_json(text).unwrap_err() {
            IngestError::ConfigInvalid { field, .. } => assert_eq!(field, "routers.src[0]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unparsable_config_is_parse_error() {
        assert!(matches!(
            BridgeConfig::from_json("{routers"),
            Err(IngestError::ConfigParse(_))
        ));
        assert!(matches!(
            BridgeConfig::from_json(r#"{"routers": {}, "surprise": 1}"#),
            Err(IngestError::ConfigParse(_))
        ));
    }

    #[test]
    fn fee_tolerance_is_bounded() {
        let text = format!(r#"{{"routers": {{"src": ["{ROUTER_SRC}"]}}, "fee_tolerance_bps": 10001}}"#);
        assert!(matches!(
            BridgeConfig::from_json(&text),
            Err(IngestError::ConfigInvalid { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let text = format!(
            r#"{{"routers": {{"src": ["{ROUTER_SRC}"], "dst": ["{ROUTER_DST}"]}},
                "native_symbols": {{"src": "ETH"}},
                "blacklist": ["dst:0x00000000000000000000000000000000000000bb"],
                "matching_mode": "shared",
                "fee_tolerance_bps": 25}}"#
        );
        let cfg = BridgeConfig::from_json(&text).unwrap();
        let again = BridgeConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(again.to_json(), cfg.to_json());
    }
}

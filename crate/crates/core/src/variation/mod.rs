//! Per-(pattern, protocol) settings: the mechanism that retargets a pattern
//! to a different carrier protocol without touching codec code.
//!
//! A settings entry is a bundle of typed keys (`Offset`, `Len`,
//! `ValuesAllowed`, ...). Each pattern declares a closed required/optional
//! key set; entries are validated against both that set and the target
//! schema. The codecs read all carrier-specific knowledge from here.
//!
//! Key reuse across patterns follows each key's documented meaning:
//! `ValuesAllowed` carries the two gap symbols for the inter-arrival-time
//! pattern and the two window rates for the rate pattern, `Granularity`
//! doubles as the timing guard for gap symbols, and `Token` selects the
//! corruption submode (`corrupt`/`drop`) and the case-pattern target token.

mod file;

pub use file::{parse_settings, render_settings};

use crate::catalog::PatternId;
use crate::codecs;
use crate::error::{Error, Result};
use crate::protocol::{make_carrier, FieldKindTag, IatModel, ProtocolSchema, SchemaRegistry};
use std::collections::BTreeMap;
use std::path::Path;

/// Typed settings entries. Every key is optional; the per-pattern key sets
/// decide which must be present.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SettingsEntries {
    /// Bits between the first header bit and the first bit of the
    /// utilized area.
    pub offset: Option<u32>,
    /// Size of the utilized area in bits.
    pub len: Option<u32>,
    /// Restrict embedding to the first PDU of the stream.
    pub only_first_pkt: Option<bool>,
    pub min_size: Option<u64>,
    pub max_size: Option<u64>,
    pub min_elements: Option<u32>,
    pub max_elements: Option<u32>,
    /// Inclusive bound on values the codec may write.
    pub value_range: Option<(u64, u64)>,
    /// Discrete values the codec may place (or gap/rate symbols for the
    /// timing patterns).
    pub values_allowed: Option<Vec<u64>>,
    pub min_ipg: Option<u64>,
    pub max_ipg: Option<u64>,
    /// Empirical gap sample the timing codec draws guard jitter from.
    pub distribution_ipg: Option<Vec<u64>>,
    pub min_rate: Option<u32>,
    pub max_rate: Option<u32>,
    pub element_id: Option<u16>,
    pub token: Option<String>,
    /// Two-level bases `[base0, base1]` with an optional third entry giving
    /// the randomization radius (default 25).
    pub bases: Option<Vec<u64>>,
    /// Size step (size pattern) or timing guard in us (gap pattern).
    pub granularity: Option<u64>,
    /// Window in PDUs (order pattern) or us (rate pattern).
    pub window: Option<u64>,
    pub duplicate_gap: Option<u64>,
    pub whiten_seed: Option<u64>,
}

pub const KEY_NAMES: &[&str] = &[
    "Offset",
    "Len",
    "OnlyFirstPkt",
    "MinSize",
    "MaxSize",
    "MinElements",
    "MaxElements",
    "ValueRange",
    "ValuesAllowed",
    "MinIPG",
    "MaxIPG",
    "DistributionIPG",
    "MinRate",
    "MaxRate",
    "ElementId",
    "Token",
    "Bases",
    "Granularity",
    "Window",
    "DuplicateGap",
    "WhitenSeed",
];

impl SettingsEntries {
    fn present_keys(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        if self.offset.is_some() {
            keys.push("Offset");
        }
        if self.len.is_some() {
            keys.push("Len");
        }
        if self.only_first_pkt.is_some() {
            keys.push("OnlyFirstPkt");
        }
        if self.min_size.is_some() {
            keys.push("MinSize");
        }
        if self.max_size.is_some() {
            keys.push("MaxSize");
        }
        if self.min_elements.is_some() {
            keys.push("MinElements");
        }
        if self.max_elements.is_some() {
            keys.push("MaxElements");
        }
        if self.value_range.is_some() {
            keys.push("ValueRange");
        }
        if self.values_allowed.is_some() {
            keys.push("ValuesAllowed");
        }
        if self.min_ipg.is_some() {
            keys.push("MinIPG");
        }
        if self.max_ipg.is_some() {
            keys.push("MaxIPG");
        }
        if self.distribution_ipg.is_some() {
            keys.push("DistributionIPG");
        }
        if self.min_rate.is_some() {
            keys.push("MinRate");
        }
        if self.max_rate.is_some() {
            keys.push("MaxRate");
        }
        if self.element_id.is_some() {
            keys.push("ElementId");
        }
        if self.token.is_some() {
            keys.push("Token");
        }
        if self.bases.is_some() {
            keys.push("Bases");
        }
        if self.granularity.is_some() {
            keys.push("Granularity");
        }
        if self.window.is_some() {
            keys.push("Window");
        }
        if self.duplicate_gap.is_some() {
            keys.push("DuplicateGap");
        }
        if self.whiten_seed.is_some() {
            keys.push("WhitenSeed");
        }
        keys
    }
}

/// Settings for one (pattern, protocol) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationSettings {
    pub pattern: PatternId,
    /// Full schema name, e.g. `ipv4_like`.
    pub protocol: String,
    pub entries: SettingsEntries,
}

/// Required and optional key names for a pattern's settings.
pub fn key_sets(pattern: PatternId) -> (&'static [&'static str], &'static [&'static str]) {
    use PatternId::*;
    match pattern {
        P1Size => (&["MinSize", "MaxSize", "Granularity"], &[]),
        P2Sequence => (&["MinElements", "MaxElements"], &[]),
        P2aPosition => (&["MinElements", "MaxElements", "ElementId"], &[]),
        P2bNumElements => (&["MinElements", "MaxElements"], &[]),
        P3AddRedundancy => (&["ElementId", "Len"], &[]),
        P4CorruptionLoss => (&["Token"], &[]),
        P5RandomValue => (&["Offset", "Len"], &["OnlyFirstPkt", "WhitenSeed"]),
        P6ValueModulation => (&["Offset", "Len", "ValuesAllowed"], &["ValueRange"]),
        P6aCase => (&["Token"], &[]),
        P6bLsb => (&["Offset", "Len"], &["Bases", "WhitenSeed"]),
        P7ReservedUnused => (&["Offset", "Len"], &[]),
        P8InterArrivalTime => (
            &["ValuesAllowed", "MinIPG", "MaxIPG"],
            &["Granularity", "DistributionIPG", "WhitenSeed"],
        ),
        P9Rate => (&["Window", "ValuesAllowed", "MinRate", "MaxRate"], &[]),
        P10PduOrder => (&["Window"], &[]),
        P11Retransmission => (&["DuplicateGap"], &[]),
    }
}

fn require<T: Copy>(v: Option<T>, key: &str, pattern: PatternId) -> Result<T> {
    v.ok_or_else(|| Error::config(format!("{pattern}: missing required key {key}")))
}

impl VariationSettings {
    pub fn offset(&self) -> Result<u32> {
        require(self.entries.offset, "Offset", self.pattern)
    }
    pub fn len_bits(&self) -> Result<u32> {
        require(self.entries.len, "Len", self.pattern)
    }
    pub fn only_first_pkt(&self) -> bool {
        self.entries.only_first_pkt.unwrap_or(false)
    }
    pub fn values_allowed(&self) -> Result<&[u64]> {
        self.entries
            .values_allowed
            .as_deref()
            .ok_or_else(|| Error::config(format!("{}: missing ValuesAllowed", self.pattern)))
    }
    pub fn token(&self) -> Result<&str> {
        self.entries
            .token
            .as_deref()
            .ok_or_else(|| Error::config(format!("{}: missing Token", self.pattern)))
    }
    /// Two-level bases and radius, when configured.
    pub fn two_level(&self) -> Option<(u64, u64, u64)> {
        self.entries.bases.as_ref().map(|b| {
            let radius = b.get(2).copied().unwrap_or(25);
            (b[0], b[1], radius)
        })
    }

    /// Checks the closed key set and every cross-field constraint against
    /// the target schema.
    pub fn validate(&self, schema: &ProtocolSchema) -> Result<()> {
        let (required, optional) = key_sets(self.pattern);
        let present = self.entries.present_keys();
        for key in required {
            if !present.contains(key) {
                return Err(Error::config(format!(
                    "({}, {}): missing required key {key}",
                    self.pattern, self.protocol
                )));
            }
        }
        for key in &present {
            if !required.contains(key) && !optional.contains(key) {
                return Err(Error::config(format!(
                    "({}, {}): key {key} does not apply to this pattern",
                    self.pattern, self.protocol
                )));
            }
        }
        if let (Some(lo), Some(hi)) = (self.entries.min_size, self.entries.max_size) {
            if lo > hi {
                return Err(Error::config(format!(
                    "({}, {}): MinSize exceeds MaxSize",
                    self.pattern, self.protocol
                )));
            }
        }
        if let (Some(lo), Some(hi)) = (self.entries.min_elements, self.entries.max_elements) {
            if lo > hi {
                return Err(Error::config(format!(
                    "({}, {}): MinElements exceeds MaxElements",
                    self.pattern, self.protocol
                )));
            }
        }
        if let (Some(lo), Some(hi)) = (self.entries.min_ipg, self.entries.max_ipg) {
            if lo > hi {
                return Err(Error::config(format!(
                    "({}, {}): MinIPG exceeds MaxIPG",
                    self.pattern, self.protocol
                )));
            }
        }
        if let (Some(lo), Some(hi)) = (self.entries.min_rate, self.entries.max_rate) {
            if lo > hi {
                return Err(Error::config(format!(
                    "({}, {}): MinRate exceeds MaxRate",
                    self.pattern, self.protocol
                )));
            }
        }
        self.validate_for_schema(schema)
    }

    fn field_target(&self, schema: &ProtocolSchema) -> Result<()> {
        let offset = self.offset()?;
        let len = self.len_bits()?;
        if len == 0 {
            return Err(Error::config(format!(
                "({}, {}): zero-length target",
                self.pattern, self.protocol
            )));
        }
        if schema.is_textual() {
            return Err(Error::config(format!(
                "({}, {}): bit offsets do not apply to a textual schema",
                self.pattern, self.protocol
            )));
        }
        if offset + len > schema.header_bits {
            return Err(Error::config(format!(
                "({}, {}): Offset {offset} + Len {len} exceeds {} header bits",
                self.pattern, self.protocol, schema.header_bits
            )));
        }
        // Derived fields are recomputed after every write, so bits placed
        // there would be destroyed.
        for f in schema.fields_covering(offset, len) {
            if matches!(f.kind.tag(), FieldKindTag::Checksum | FieldKindTag::Length) {
                return Err(Error::config(format!(
                    "({}, {}): target overlaps derived field {}",
                    self.pattern, self.protocol, f.name
                )));
            }
        }
        Ok(())
    }

    /// The single field exactly matching the Offset/Len target.
    fn exact_field<'s>(&self, schema: &'s ProtocolSchema) -> Result<&'s crate::protocol::Field> {
        let offset = self.offset()?;
        let len = self.len_bits()?;
        schema
            .fields
            .iter()
            .find(|f| f.offset == offset && f.len == len)
            .ok_or_else(|| {
                Error::config(format!(
                    "({}, {}): no field spans exactly bits {offset}..{}",
                    self.pattern,
                    self.protocol,
                    offset + len
                ))
            })
    }

    fn validate_for_schema(&self, schema: &ProtocolSchema) -> Result<()> {
        use PatternId::*;
        let p = self.pattern;
        let proto = &self.protocol;
        let need_options = matches!(
            p,
            P2Sequence | P2aPosition | P2bNumElements | P3AddRedundancy
        );
        if need_options && schema.options.is_none() {
            return Err(Error::config(format!(
                "({p}, {proto}): schema has no element list"
            )));
        }
        match p {
            P1Size => {
                let g = require(self.entries.granularity, "Granularity", p)?;
                if g == 0 {
                    return Err(Error::config(format!(
                        "({p}, {proto}): Granularity must be >= 1"
                    )));
                }
            }
            P2Sequence | P2aPosition => {
                let lo = require(self.entries.min_elements, "MinElements", p)?;
                let hi = require(self.entries.max_elements, "MaxElements", p)?;
                if lo != hi {
                    return Err(Error::config(format!(
                        "({p}, {proto}): element permutation needs MinElements == MaxElements"
                    )));
                }
                let n = lo;
                if !(2..=12).contains(&n) {
                    return Err(Error::config(format!(
                        "({p}, {proto}): element count {n} outside 2..=12"
                    )));
                }
                if p == P2aPosition && !n.is_power_of_two() {
                    return Err(Error::config(format!(
                        "({p}, {proto}): position coding needs a power-of-two element count, got {n}"
                    )));
                }
                if p == P2aPosition {
                    let id = require(self.entries.element_id, "ElementId", p)?;
                    let desc = schema.options.as_ref().unwrap();
                    if id < desc.id_min || id > desc.id_max {
                        return Err(Error::config(format!(
                            "({p}, {proto}): marker id {id} outside element id space"
                        )));
                    }
                }
            }
            P2bNumElements => {
                let hi = require(self.entries.max_elements, "MaxElements", p)?;
                let desc = schema.options.as_ref().unwrap();
                if hi as usize > desc.max_count as usize {
                    return Err(Error::config(format!(
                        "({p}, {proto}): MaxElements {hi} exceeds descriptor limit {}",
                        desc.max_count
                    )));
                }
            }
            P3AddRedundancy => {
                let len = self.len_bits()?;
                if len == 0 || len % 8 != 0 {
                    return Err(Error::config(format!(
                        "({p}, {proto}): Len must be a positive multiple of 8 bits"
                    )));
                }
                let desc = schema.options.as_ref().unwrap();
                if (len / 8) as usize > desc.max_payload as usize {
                    return Err(Error::config(format!(
                        "({p}, {proto}): element payload {} exceeds descriptor limit {}",
                        len / 8,
                        desc.max_payload
                    )));
                }
                let id = require(self.entries.element_id, "ElementId", p)?;
                if id < desc.id_min || id > desc.id_max {
                    return Err(Error::config(format!(
                        "({p}, {proto}): element id {id} outside id space"
                    )));
                }
                if schema.is_textual() {
                    let t = schema.textual.as_ref().unwrap();
                    if (id as usize) < t.default_count {
                        return Err(Error::config(format!(
                            "({p}, {proto}): token {id} is emitted by default carriers; pick an extension token"
                        )));
                    }
                } else if desc.defaults.iter().any(|(d, _)| *d == id) {
                    return Err(Error::config(format!(
                        "({p}, {proto}): element id {id} collides with a default element"
                    )));
                }
            }
            P4CorruptionLoss => {
                let mode = self.token()?;
                match mode {
                    "corrupt" => {
                        let has = schema
                            .fields
                            .iter()
                            .any(|f| f.kind.tag() == FieldKindTag::Checksum);
                        if !has {
                            return Err(Error::config(format!(
                                "({p}, {proto}): corrupt submode needs a checksum field"
                            )));
                        }
                    }
                    "drop" => {}
                    other => {
                        return Err(Error::config(format!(
                            "({p}, {proto}): Token must be corrupt or drop, got {other:?}"
                        )))
                    }
                }
            }
            P5RandomValue => {
                self.field_target(schema)?;
                for f in schema.fields_covering(self.offset()?, self.len_bits()?) {
                    if f.kind.tag() != FieldKindTag::Random {
                        return Err(Error::config(format!(
                            "({p}, {proto}): target covers non-random field {}",
                            f.name
                        )));
                    }
                }
            }
            P7ReservedUnused => {
                self.field_target(schema)?;
                for f in schema.fields_covering(self.offset()?, self.len_bits()?) {
                    if f.kind.tag() != FieldKindTag::Reserved {
                        return Err(Error::config(format!(
                            "({p}, {proto}): target covers non-reserved field {}",
                            f.name
                        )));
                    }
                }
            }
            P6ValueModulation => {
                let f = self.exact_field(schema)?;
                let values = self.values_allowed()?;
                if values.len() < 2 {
                    return Err(Error::config(format!(
                        "({p}, {proto}): ValuesAllowed needs at least two values"
                    )));
                }
                let max = field_max(f.len);
                for v in values {
                    if *v > max {
                        return Err(Error::config(format!(
                            "({p}, {proto}): value {v} wider than field {}",
                            f.name
                        )));
                    }
                    if let crate::protocol::FieldKind::Enumerated { allowed } = &f.kind {
                        if !allowed.contains(v) {
                            return Err(Error::config(format!(
                                "({p}, {proto}): value {v} not legal for enumerated field {}",
                                f.name
                            )));
                        }
                    }
                    if let Some((lo, hi)) = self.entries.value_range {
                        if *v < lo || *v > hi {
                            return Err(Error::config(format!(
                                "({p}, {proto}): value {v} outside ValueRange {lo}..{hi}"
                            )));
                        }
                    }
                }
                self.field_target(schema)?;
            }
            P6aCase => {
                if !schema.is_textual() {
                    return Err(Error::config(format!(
                        "({p}, {proto}): case coding needs a textual schema"
                    )));
                }
                let token = self.token()?;
                if schema.token_id(token).is_none() {
                    return Err(Error::config(format!(
                        "({p}, {proto}): token {token:?} not in vocabulary"
                    )));
                }
            }
            P6bLsb => {
                self.field_target(schema)?;
                if let Some((b0, b1, radius)) = self.two_level() {
                    let f = self.exact_field(schema)?;
                    let mut max = field_max(f.len);
                    if let crate::protocol::FieldKind::Decrementing { max: m, .. } = f.kind {
                        max = max.min(m);
                    }
                    if b0 + radius > max || b1 + radius > max {
                        return Err(Error::config(format!(
                            "({p}, {proto}): base plus radius exceeds field range of {}",
                            f.name
                        )));
                    }
                    if b0 != b1 && b0.max(b1) <= b0.min(b1) + radius {
                        return Err(Error::config(format!(
                            "({p}, {proto}): bases {b0}/{b1} overlap within radius {radius}"
                        )));
                    }
                }
            }
            P8InterArrivalTime => {
                let v = self.values_allowed()?;
                if v.len() != 2 || v[0] >= v[1] {
                    return Err(Error::config(format!(
                        "({p}, {proto}): ValuesAllowed must be two gap symbols d0 < d1"
                    )));
                }
                let (d0, d1) = (v[0], v[1]);
                let guard = self.entries.granularity.unwrap_or(0);
                if d1 - d0 <= 2 * guard {
                    return Err(Error::config(format!(
                        "({p}, {proto}): symbol spacing {} must exceed twice the guard {guard}",
                        d1 - d0
                    )));
                }
                let lo = require(self.entries.min_ipg, "MinIPG", p)?;
                let hi = require(self.entries.max_ipg, "MaxIPG", p)?;
                if d0 < lo + guard || d1 + guard > hi {
                    return Err(Error::config(format!(
                        "({p}, {proto}): symbols with guard fall outside MinIPG/MaxIPG"
                    )));
                }
            }
            P9Rate => {
                let v = self.values_allowed()?;
                if v.len() != 2 || v[0] >= v[1] || v[0] == 0 {
                    return Err(Error::config(format!(
                        "({p}, {proto}): ValuesAllowed must be two rates 1 <= r0 < r1"
                    )));
                }
                let lo = require(self.entries.min_rate, "MinRate", p)? as u64;
                let hi = require(self.entries.max_rate, "MaxRate", p)? as u64;
                if v[0] < lo || v[1] > hi {
                    return Err(Error::config(format!(
                        "({p}, {proto}): rates outside MinRate/MaxRate"
                    )));
                }
                let w = require(self.entries.window, "Window", p)?;
                if w == 0 {
                    return Err(Error::config(format!(
                        "({p}, {proto}): Window must be positive"
                    )));
                }
            }
            P10PduOrder => {
                let w = require(self.entries.window, "Window", p)?;
                if !(2..=20).contains(&w) {
                    return Err(Error::config(format!(
                        "({p}, {proto}): Window {w} outside 2..=20"
                    )));
                }
            }
            P11Retransmission => {
                let gap = require(self.entries.duplicate_gap, "DuplicateGap", p)?;
                if gap == 0 {
                    return Err(Error::config(format!(
                        "({p}, {proto}): DuplicateGap must be positive"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn field_max(len: u32) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

/// All known settings entries, keyed by (pattern, protocol).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SettingsCatalog {
    pub entries: BTreeMap<(PatternId, String), VariationSettings>,
}

impl SettingsCatalog {
    pub fn get(&self, pattern: PatternId, protocol: &str) -> Option<&VariationSettings> {
        self.entries.get(&(pattern, protocol.to_string()))
    }

    pub fn insert(&mut self, settings: VariationSettings) {
        self.entries
            .insert((settings.pattern, settings.protocol.clone()), settings);
    }

    /// Entries for one pattern, ordered by protocol name.
    pub fn for_pattern(&self, pattern: PatternId) -> Vec<&VariationSettings> {
        self.entries
            .iter()
            .filter(|((p, _), _)| *p == pattern)
            .map(|(_, v)| v)
            .collect()
    }

    /// Resolves protocol names against the registry and validates every
    /// entry against its schema.
    pub fn validate(&mut self, registry: &SchemaRegistry) -> Result<()> {
        let mut rekeyed = BTreeMap::new();
        for ((pattern, proto), mut entry) in std::mem::take(&mut self.entries) {
            let schema = registry.get(&proto)?;
            entry.protocol = schema.name.clone();
            entry.validate(&schema)?;
            rekeyed.insert((pattern, schema.name.clone()), entry);
        }
        self.entries = rekeyed;
        Ok(())
    }
}

/// Parses and validates a settings file.
pub fn load_settings(path: &Path, registry: &SchemaRegistry) -> Result<SettingsCatalog> {
    let text = std::fs::read_to_string(path)?;
    let mut catalog = parse_settings(&text)?;
    catalog.validate(registry)?;
    Ok(catalog)
}

pub fn save_settings(catalog: &SettingsCatalog, path: &Path) -> Result<()> {
    std::fs::write(path, render_settings(catalog))?;
    Ok(())
}

/// The settings matrix shipped with the toolkit: one entry per feasible
/// (pattern, built-in schema) pair.
pub fn default_settings() -> SettingsCatalog {
    let mut catalog = parse_settings(include_str!("../../data/default.settings"))
        .expect("shipped settings parse");
    catalog
        .validate(&SchemaRegistry::new())
        .expect("shipped settings validate");
    catalog
}

/// Retargets a pattern to another protocol purely by settings lookup. The
/// returned entry has passed a self-test round trip on a fresh carrier of
/// the target protocol, so the caller can hand it to the codec unchanged.
/// Variation swaps settings, never code.
pub fn vary(
    pattern: PatternId,
    from_protocol: &str,
    to_protocol: &str,
    catalog: &SettingsCatalog,
    registry: &SchemaRegistry,
) -> Result<VariationSettings> {
    let _ = registry.get(from_protocol)?; // source context must at least exist
    let to_schema = registry.get(to_protocol)?;
    let entry = catalog
        .get(pattern, &to_schema.name)
        .ok_or_else(|| Error::MissingEntry {
            pattern: pattern.code().to_string(),
            protocol: to_schema.name.clone(),
            required: key_sets(pattern).0.to_vec(),
        })?;
    entry.validate(&to_schema)?;

    // Self-test: embed and extract a probe message on a fresh carrier.
    let carrier = make_carrier(&to_schema, 16, &IatModel::Constant(2000), 0xc0ffee)?;
    let cap = codecs::capacity(pattern, entry, &carrier)?;
    let probe_len = cap.min(32);
    if probe_len > 0 {
        let message = codecs::CovertMessage::random(probe_len, 0x5eed);
        let embedded = codecs::embed(pattern, entry, &message, &carrier)?;
        let extracted = codecs::extract(pattern, entry, &embedded.stream)?;
        let (errors, compared) = extracted
            .bits
            .hamming_prefix(&message.bits.prefix(embedded.bits_embedded));
        if errors != 0 || compared < embedded.bits_embedded {
            return Err(Error::config(format!(
                "({pattern}, {to_protocol}): settings failed the variation self-test"
            )));
        }
    }
    Ok(entry.clone())
}

/// Situational requirement for settings selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Requirement {
    MaxThroughput,
    MaxCovertness,
}

/// Picks the (protocol, settings) candidate best matching a requirement.
/// Throughput maximizes codec capacity for a carrier of the same length as
/// the given one; covertness minimizes modified bits per PDU, measured by
/// embedding a probe message. Ties break on protocol name.
pub fn select_settings(
    requirement: Requirement,
    pattern: PatternId,
    catalog: &SettingsCatalog,
    carrier: &PduStreamLike,
    registry: &SchemaRegistry,
) -> Result<(String, VariationSettings)> {
    let candidates = catalog.for_pattern(pattern);
    if candidates.is_empty() {
        return Err(Error::MissingEntry {
            pattern: pattern.code().to_string(),
            protocol: "*".to_string(),
            required: key_sets(pattern).0.to_vec(),
        });
    }
    let n = carrier.pdu_count.max(1);
    let mut best: Option<(String, VariationSettings, f64)> = None;
    for entry in candidates {
        let schema = registry.get(&entry.protocol)?;
        let probe = make_carrier(&schema, n, &IatModel::Constant(2000), 0xbeef)?;
        let score = match requirement {
            Requirement::MaxThroughput => codecs::capacity(pattern, entry, &probe)? as f64,
            Requirement::MaxCovertness => -(modified_bits_per_pdu(pattern, entry, &probe)?),
        };
        let better = match &best {
            None => true,
            Some((proto, _, s)) => score > *s || (score == *s && entry.protocol < *proto),
        };
        if better {
            best = Some((entry.protocol.clone(), entry.clone(), score));
        }
    }
    let (proto, entry, _) = best.unwrap();
    Ok((proto, entry))
}

/// Carrier shape abstraction so selection does not need a live stream of
/// any particular protocol.
pub struct PduStreamLike {
    pub pdu_count: usize,
}

impl From<&crate::protocol::PduStream> for PduStreamLike {
    fn from(s: &crate::protocol::PduStream) -> Self {
        PduStreamLike { pdu_count: s.len() }
    }
}

/// Covertness proxy: average header/payload/structure bits changed per PDU
/// when embedding a full-capacity probe.
fn modified_bits_per_pdu(
    pattern: PatternId,
    entry: &VariationSettings,
    probe: &crate::protocol::PduStream,
) -> Result<f64> {
    let cap = codecs::capacity(pattern, entry, probe)?;
    if cap == 0 {
        return Ok(0.0);
    }
    let message = codecs::CovertMessage::random(cap.min(4096), 0x7ab1e);
    let out = codecs::embed(pattern, entry, &message, probe)?;
    let mut changed = 0usize;
    for (a, b) in probe.pdus.iter().zip(out.stream.pdus.iter()) {
        let (d, _) = a.header.hamming_prefix(&b.header);
        changed += d;
        if a.options != b.options {
            changed += 8 * a
                .options
                .iter()
                .chain(b.options.iter())
                .map(|e| e.payload.len())
                .sum::<usize>()
                .max(1);
        }
        if a.payload != b.payload {
            changed += 8 * a.payload.len().abs_diff(b.payload.len()).max(1);
        }
    }
    Ok(changed as f64 / probe.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_closure_rejects_stray_keys() {
        let entry = VariationSettings {
            pattern: PatternId::P7ReservedUnused,
            protocol: "ipv4_like".into(),
            entries: SettingsEntries {
                offset: Some(48),
                len: Some(1),
                min_size: Some(4),
                ..Default::default()
            },
        };
        let schema = crate::protocol::builtin_schema("ipv4_like").unwrap();
        let err = entry.validate(&schema).unwrap_err();
        assert!(err.to_string().contains("MinSize"), "{err}");
    }

    #[test]
    fn len_overflow_is_validation_error() {
        let entry = VariationSettings {
            pattern: PatternId::P5RandomValue,
            protocol: "ipv4_like".into(),
            entries: SettingsEntries {
                offset: Some(32),
                len: Some(999),
                ..Default::default()
            },
        };
        let schema = crate::protocol::builtin_schema("ipv4_like").unwrap();
        assert!(entry.validate(&schema).is_err());
    }

    #[test]
    fn p5_requires_random_kind_target() {
        let entry = VariationSettings {
            pattern: PatternId::P5RandomValue,
            protocol: "ipv4_like".into(),
            entries: SettingsEntries {
                offset: Some(64), // ttl: decrementing, not random
                len: Some(8),
                ..Default::default()
            },
        };
        let schema = crate::protocol::builtin_schema("ipv4_like").unwrap();
        assert!(entry.validate(&schema).is_err());
    }

    #[test]
    fn default_settings_cover_every_pattern() {
        let catalog = default_settings();
        for p in crate::catalog::ALL_PATTERNS {
            assert!(
                !catalog.for_pattern(p).is_empty(),
                "no shipped entry for {p}"
            );
        }
    }
}

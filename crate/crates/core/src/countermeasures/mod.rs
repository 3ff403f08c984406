//! Pattern-targeted wardens: a stateless/stateful traffic normalizer with
//! kind-targeted rules, a countermeasure applicability table, and the
//! statistical timing detectors.
//!
//! Rules target fields by name or by kind, so one rule set covers every
//! protocol that declares the kind: clearing reserved bits or pinning
//! hop-count fields works unchanged on any schema.

pub mod detectors;
mod rules_file;

pub use rules_file::{parse_warden_config, render_warden_config};

use crate::catalog::PatternId;
use crate::error::{Error, Result};
use crate::protocol::{validate_pdu, FieldKindTag, Pdu, PduStream};

/// Field/element selector for normalizer rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Field(String),
    Kind(FieldKindTag),
}

impl Target {
    fn matches(&self, field: &crate::protocol::Field) -> bool {
        match self {
            Target::Field(name) => field.name == *name,
            Target::Kind(tag) => field.kind.tag() == *tag,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Target::Field(name) => format!("field:{name}"),
            Target::Kind(tag) => format!("kind:{}", tag.name()),
        }
    }

    pub fn parse(s: &str) -> Option<Target> {
        if let Some(name) = s.strip_prefix("field:") {
            return Some(Target::Field(name.to_string()));
        }
        if let Some(kind) = s.strip_prefix("kind:") {
            return Some(Target::Kind(FieldKindTag::parse(kind)?));
        }
        None
    }
}

/// One normalization step. Field rules write raw; a trailing
/// `RecomputeDerived` restores checksum/length consistency for the whole
/// set, mirroring how scrubbing pipelines separate rewriting from repair.
#[derive(Debug, Clone, PartialEq)]
pub enum NormalizerRule {
    /// Zero the targeted fields.
    ClearField(Target),
    /// Pin the targeted fields to a value, clamped to the field's legal
    /// range.
    FixField(Target, u64),
    /// Recompute length and checksum fields.
    RecomputeDerived,
    /// Drop PDUs that fail validation.
    DropInvalid,
    /// Sort the element list by ascending id.
    CanonicalizeElementOrder,
    /// Remove elements whose id is not in the allow list.
    StripUnknownElements(Vec<u16>),
    /// Lowercase textual token names.
    LowercaseTokens,
    /// Grow payloads to a fixed byte size (never truncates).
    PadToFixedSize(u64),
    /// Stateful: emit PDUs in seq order within the buffer budget.
    ReorderBySeq,
    /// Stateful: rewrite all inter-arrival gaps to the target.
    SmoothIat(u64),
    /// Stateful: delay PDUs so no window holds more than `max_per_window`.
    CapRate { max_per_window: u32, window_us: u64 },
}

impl NormalizerRule {
    pub fn needs_state(&self) -> bool {
        matches!(
            self,
            NormalizerRule::ReorderBySeq
                | NormalizerRule::SmoothIat(_)
                | NormalizerRule::CapRate { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WardenMode {
    Stateless,
    Stateful,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WardenConfig {
    pub rules: Vec<NormalizerRule>,
    pub mode: WardenMode,
    /// PDUs the stateful warden may hold back at once.
    pub buffer_limit: usize,
}

impl WardenConfig {
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            WardenMode::Stateless => {
                if let Some(r) = self.rules.iter().find(|r| r.needs_state()) {
                    return Err(Error::config(format!("rule {r:?} needs a stateful warden")));
                }
            }
            WardenMode::Stateful => {
                if self.buffer_limit == 0 {
                    return Err(Error::config("stateful warden needs buffer_limit >= 1"));
                }
            }
        }
        Ok(())
    }

    /// The shipped storage-normalization set: drop invalid PDUs, clear
    /// random and reserved fields, pin hop counts, canonicalize and strip
    /// the element list, lowercase token names, then repair derived fields.
    pub fn default_stateless(schema: &crate::protocol::ProtocolSchema) -> WardenConfig {
        let keep: Vec<u16> = if schema.is_textual() {
            (0..schema
                .textual
                .as_ref()
                .map(|t| t.default_count)
                .unwrap_or(0) as u16)
                .collect()
        } else {
            Vec::new()
        };
        WardenConfig {
            rules: vec![
                NormalizerRule::DropInvalid,
                NormalizerRule::ClearField(Target::Kind(FieldKindTag::Random)),
                NormalizerRule::ClearField(Target::Kind(FieldKindTag::Reserved)),
                NormalizerRule::FixField(Target::Kind(FieldKindTag::Decrementing), 64),
                NormalizerRule::CanonicalizeElementOrder,
                NormalizerRule::StripUnknownElements(keep),
                NormalizerRule::LowercaseTokens,
                NormalizerRule::RecomputeDerived,
            ],
            mode: WardenMode::Stateless,
            buffer_limit: 0,
        }
    }

    /// The shipped timing-limitation set standing in for pump-style rate
    /// control: re-sort by seq, equalize gaps, cap the per-window rate.
    pub fn default_stateful(buffer_limit: usize) -> WardenConfig {
        WardenConfig {
            rules: vec![
                NormalizerRule::ReorderBySeq,
                NormalizerRule::SmoothIat(4000),
                NormalizerRule::CapRate {
                    max_per_window: 3,
                    window_us: 10_000,
                },
            ],
            mode: WardenMode::Stateful,
            buffer_limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionLog {
    pub entries: Vec<String>,
}

fn clamp_to_field(field: &crate::protocol::Field, value: u64) -> u64 {
    let width_max = if field.len >= 64 {
        u64::MAX
    } else {
        (1u64 << field.len) - 1
    };
    let mut v = value.min(width_max);
    if let crate::protocol::FieldKind::Decrementing { min, max, .. } = field.kind {
        v = v.clamp(min, max);
    }
    v
}

fn apply_field_rules(pdu: &mut Pdu, rules: &[NormalizerRule], log: &mut Vec<String>) {
    let schema = pdu.schema.clone();
    for rule in rules {
        match rule {
            NormalizerRule::ClearField(target) => {
                for f in schema.fields.iter().filter(|f| target.matches(f)) {
                    let cur = pdu
                        .header
                        .read_uint(f.offset as usize, f.len.min(64) as usize);
                    if cur != 0 || f.len > 64 {
                        let zero = crate::bits::Bits::zeroed(f.len as usize);
                        pdu.header.write_range(f.offset as usize, &zero);
                        log.push(format!("seq {}: cleared {}", pdu.seq, f.name));
                    }
                }
            }
            NormalizerRule::FixField(target, value) => {
                for f in schema.fields.iter().filter(|f| target.matches(f)) {
                    let v = clamp_to_field(f, *value);
                    // The value occupies the low-order end of a wide field.
                    let word = f.len.min(64) as usize;
                    let low = (f.offset + f.len) as usize - word;
                    let cur = pdu.header.read_uint(low, word);
                    let high_clear = f.len <= 64
                        || pdu
                            .header
                            .read_range(f.offset as usize, (f.len as usize) - word)
                            == crate::bits::Bits::zeroed((f.len as usize) - word);
                    if cur != v || !high_clear {
                        let zero = crate::bits::Bits::zeroed(f.len as usize);
                        pdu.header.write_range(f.offset as usize, &zero);
                        pdu.header.write_uint(low, word, v);
                        log.push(format!("seq {}: pinned {} to {v}", pdu.seq, f.name));
                    }
                }
            }
            NormalizerRule::CanonicalizeElementOrder => {
                let mut sorted = pdu.options.clone();
                sorted.sort_by_key(|e| e.id);
                if sorted != pdu.options {
                    pdu.options = sorted;
                    log.push(format!("seq {}: canonicalized element order", pdu.seq));
                }
            }
            NormalizerRule::StripUnknownElements(keep) => {
                let before = pdu.options.len();
                pdu.options.retain(|e| keep.contains(&e.id));
                if pdu.options.len() != before {
                    log.push(format!(
                        "seq {}: stripped {} elements",
                        pdu.seq,
                        before - pdu.options.len()
                    ));
                }
            }
            NormalizerRule::LowercaseTokens => {
                if schema.is_textual() {
                    let mut changed = false;
                    for e in &mut pdu.options {
                        let colon = e
                            .payload
                            .iter()
                            .position(|&b| b == b':')
                            .unwrap_or(e.payload.len());
                        for b in &mut e.payload[..colon] {
                            if b.is_ascii_uppercase() {
                                *b = b.to_ascii_lowercase();
                                changed = true;
                            }
                        }
                    }
                    if changed {
                        log.push(format!("seq {}: lowercased token names", pdu.seq));
                    }
                }
            }
            NormalizerRule::PadToFixedSize(size) => {
                let want = *size as usize;
                if pdu.payload.len() < want {
                    pdu.payload.resize(want, 0);
                    log.push(format!("seq {}: padded payload to {want}", pdu.seq));
                }
            }
            NormalizerRule::RecomputeDerived => {
                let before = pdu.header.clone();
                pdu.recompute_derived();
                if before != pdu.header {
                    log.push(format!("seq {}: recomputed derived fields", pdu.seq));
                }
            }
            // Stream-level and drop rules handled by the caller.
            _ => {}
        }
    }
}

/// Applies the rule set in declared order. Returns the normalized stream
/// and the action log. Stateful overflow flushes the oldest PDU
/// un-reordered and logs it.
pub fn normalize(config: &WardenConfig, stream: &PduStream) -> Result<(PduStream, ActionLog)> {
    config.validate()?;
    for rule in &config.rules {
        if let NormalizerRule::ClearField(Target::Field(name))
        | NormalizerRule::FixField(Target::Field(name), _) = rule
        {
            stream.schema.field(name).map_err(|_| {
                Error::config(format!(
                    "rule targets field {name:?} absent from schema {}",
                    stream.schema.name
                ))
            })?;
        }
    }
    let mut log = Vec::new();

    // Per-PDU pass, rule order preserved; DropInvalid filters inline.
    let mut pdus: Vec<Pdu> = Vec::with_capacity(stream.len());
    for pdu in &stream.pdus {
        let mut p = pdu.clone();
        let mut dropped = false;
        for (i, rule) in config.rules.iter().enumerate() {
            match rule {
                NormalizerRule::DropInvalid => {
                    if !validate_pdu(&p).is_empty() {
                        log.push(format!("seq {}: dropped invalid PDU", p.seq));
                        dropped = true;
                        break;
                    }
                }
                _ => apply_field_rules(&mut p, &config.rules[i..i + 1], &mut log),
            }
        }
        if !dropped {
            pdus.push(p);
        }
    }

    // Stream-level pass for stateful rules, in declared order.
    for rule in &config.rules {
        match rule {
            NormalizerRule::ReorderBySeq => {
                let mut buffer: Vec<Pdu> = Vec::new();
                let mut out: Vec<Pdu> = Vec::with_capacity(pdus.len());
                let mut last_emitted: Option<u64> = None;
                let mut violations = 0usize;
                let mut emit = |p: Pdu, out: &mut Vec<Pdu>| {
                    if last_emitted.is_some_and(|last| p.seq < last) {
                        violations += 1;
                    }
                    last_emitted = Some(p.seq);
                    out.push(p);
                };
                for p in pdus.drain(..) {
                    buffer.push(p);
                    buffer.sort_by_key(|x| x.seq);
                    if buffer.len() > config.buffer_limit {
                        let next = buffer.remove(0);
                        emit(next, &mut out);
                    }
                }
                for p in buffer.drain(..) {
                    emit(p, &mut out);
                }
                if violations > 0 {
                    log.push(format!(
                        "reorder buffer overflow: {violations} PDUs flushed out of order at limit {}",
                        config.buffer_limit
                    ));
                }
                // Arrival timestamps stay with the slots, not the PDUs.
                let mut slots: Vec<u64> = out.iter().map(|p| p.timestamp_us).collect();
                slots.sort_unstable();
                for (p, t) in out.iter_mut().zip(slots) {
                    p.timestamp_us = t;
                }
                pdus = out;
            }
            NormalizerRule::SmoothIat(target) => {
                if let Some(first) = pdus.first().map(|p| p.timestamp_us) {
                    let mut t = first;
                    for (i, p) in pdus.iter_mut().enumerate() {
                        if i > 0 {
                            t += target;
                        }
                        p.timestamp_us = t;
                    }
                    log.push(format!("smoothed gaps to {target}"));
                }
            }
            NormalizerRule::CapRate {
                max_per_window,
                window_us,
            } => {
                let mut window_start = 0u64;
                let mut in_window = 0u32;
                let mut delayed = 0usize;
                for p in pdus.iter_mut() {
                    if p.timestamp_us < window_start {
                        p.timestamp_us = window_start;
                    }
                    if p.timestamp_us >= window_start + window_us {
                        window_start = (p.timestamp_us / window_us) * window_us;
                        in_window = 0;
                    }
                    if in_window >= *max_per_window {
                        window_start += window_us;
                        p.timestamp_us = window_start;
                        in_window = 0;
                        delayed += 1;
                    }
                    in_window += 1;
                }
                if delayed > 0 {
                    log.push(format!("rate cap delayed {delayed} PDUs"));
                }
            }
            _ => {}
        }
    }

    Ok((
        PduStream {
            schema: stream.schema.clone(),
            pdus,
        },
        ActionLog { entries: log },
    ))
}

/// Countermeasure classes from the applicability table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Countermeasure {
    /// Traffic normalization.
    Tn,
    /// Traffic normalization with limited effect.
    TnLimited,
    /// Network pump and related rate-control concepts.
    Nprc,
    /// Statistical analysis.
    Sa,
    /// Machine learning.
    Ml,
}

impl Countermeasure {
    pub fn name(self) -> &'static str {
        match self {
            Countermeasure::Tn => "TN",
            Countermeasure::TnLimited => "TN (limited)",
            Countermeasure::Nprc => "NPRC",
            Countermeasure::Sa => "SA",
            Countermeasure::Ml => "ML",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Applicability {
    pub elimination: Vec<Countermeasure>,
    pub limitation: Vec<Countermeasure>,
    pub detection: Vec<Countermeasure>,
}

/// Which countermeasure classes eliminate, limit, or detect a pattern.
pub fn applicability(pattern: PatternId) -> Applicability {
    use Countermeasure::*;
    use PatternId::*;
    let detection = vec![Sa, Ml];
    match pattern {
        P1Size | P11Retransmission => Applicability {
            elimination: vec![],
            limitation: vec![],
            detection,
        },
        P2Sequence | P2aPosition | P2bNumElements | P3AddRedundancy | P4CorruptionLoss
        | P5RandomValue | P6aCase | P6bLsb | P7ReservedUnused => Applicability {
            elimination: vec![Tn],
            limitation: vec![],
            detection,
        },
        P6ValueModulation | P8InterArrivalTime | P9Rate => Applicability {
            elimination: vec![],
            limitation: vec![TnLimited, Nprc],
            detection,
        },
        P10PduOrder => Applicability {
            elimination: vec![],
            limitation: vec![TnLimited, Nprc],
            detection,
        },
    }
}

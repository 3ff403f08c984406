//! Embed/extract codecs for all fifteen hiding patterns.
//!
//! Storage patterns and the gap/duplicate timing patterns share a per-slot
//! engine: slot `t` is PDU `t`, a pattern consumes its per-slot bit budget
//! from the message cursor, and timing effects (gap symbols, duplicate
//! insertions) are applied in a reconstruction pass. The window patterns
//! (rate, order) and the corruption/loss pattern keep dedicated full-stream
//! paths. The same slot functions back plain embedding, parallel and
//! sequential combination, and pattern hopping, so retargeting a pattern or
//! re-orchestrating it never changes codec code.
//!
//! Extraction never relies on the received PDU being intact: every pattern
//! derives its per-slot symbol width from the settings alone and decodes
//! mangled slots to a folded/clamped symbol, so a normalized or noisy
//! stream still yields a comparable bit sequence.

mod corruption;
mod field_value;
mod order;
pub mod perm;
mod rate;
mod redundancy;
mod sequence;
mod size;
mod value_mod;

use crate::bits::{BitCursor, Bits};
use crate::catalog::PatternId;
use crate::error::{Error, Result};
use crate::protocol::{Pdu, PduStream};
use crate::variation::VariationSettings;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The hidden message: a plain bit vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CovertMessage {
    pub bits: Bits,
}

impl CovertMessage {
    pub fn new(bits: Bits) -> Self {
        CovertMessage { bits }
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        Bits::from_hex(s).map(|bits| CovertMessage { bits })
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        CovertMessage {
            bits: Bits::from_bytes(bytes, bytes.len() * 8),
        }
    }

    pub fn random(len: usize, seed: u64) -> Self {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bits = Bits::zeroed(len);
        for i in 0..len {
            bits.set(i, rng.gen::<bool>());
        }
        CovertMessage { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Where one run of message bits landed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapEntry {
    pub pdu_seq: u64,
    /// Message bit range start.
    pub start_bit: usize,
    pub bit_count: usize,
    pub site: String,
}

#[derive(Debug, Clone)]
pub struct EmbedResult {
    pub stream: PduStream,
    pub bits_embedded: usize,
    pub map: Vec<MapEntry>,
}

/// Per-slot symbol width a pattern consumes, derived from settings only.
/// For the window patterns this is the per-window width.
pub fn bits_per_slot(pattern: PatternId, settings: &VariationSettings) -> Result<usize> {
    use PatternId::*;
    Ok(match pattern {
        P1Size => {
            let lo = settings.entries.min_size.unwrap_or(0);
            let hi = settings.entries.max_size.unwrap_or(0);
            let g = settings.entries.granularity.unwrap_or(1).max(1);
            let span = (hi.saturating_sub(lo)) / g + 1;
            perm::floor_log2(span.max(1))
        }
        P2Sequence => perm::order_bits(settings.entries.min_elements.unwrap_or(2) as usize),
        P2aPosition => {
            let n = settings.entries.min_elements.unwrap_or(2) as u64;
            perm::floor_log2(n.max(1))
        }
        P2bNumElements => {
            let lo = settings.entries.min_elements.unwrap_or(0) as u64;
            let hi = settings.entries.max_elements.unwrap_or(0) as u64;
            perm::floor_log2((hi.saturating_sub(lo) + 1).max(1))
        }
        P3AddRedundancy | P5RandomValue | P7ReservedUnused => settings.len_bits()? as usize,
        P4CorruptionLoss | P8InterArrivalTime | P9Rate | P11Retransmission => 1,
        P6ValueModulation => perm::floor_log2(settings.values_allowed()?.len() as u64),
        P6aCase => settings
            .token()?
            .chars()
            .filter(|c| c.is_ascii_alphabetic())
            .count(),
        P6bLsb => {
            if settings.two_level().is_some() {
                1
            } else {
                settings.len_bits()? as usize
            }
        }
        P10PduOrder => perm::order_bits(settings.entries.window.unwrap_or(2) as usize),
    })
}

fn check_pair(settings: &VariationSettings, carrier: &PduStream) -> Result<()> {
    if settings.protocol != carrier.schema.name {
        return Err(Error::config(format!(
            "settings target {} but the carrier schema is {}",
            settings.protocol, carrier.schema.name
        )));
    }
    settings.validate(&carrier.schema)
}

/// Exact number of bits `embed` will place on this carrier. Deterministic
/// and message-independent.
pub fn capacity(
    pattern: PatternId,
    settings: &VariationSettings,
    carrier: &PduStream,
) -> Result<usize> {
    use PatternId::*;
    check_pair(settings, carrier)?;
    let n = carrier.len();
    Ok(match pattern {
        P9Rate => {
            let rates = settings.values_allowed()?;
            n / rates[1] as usize
        }
        P10PduOrder => {
            let w = settings.entries.window.unwrap_or(2) as usize;
            (n / w) * bits_per_slot(pattern, settings)?
        }
        P4CorruptionLoss => {
            if settings.token()? == "drop" {
                n.saturating_sub(1)
            } else {
                n
            }
        }
        P8InterArrivalTime => n.saturating_sub(1),
        P11Retransmission => n,
        _ => {
            let k = bits_per_slot(pattern, settings)?;
            let eligible = if settings.only_first_pkt() {
                n.min(1)
            } else {
                n
            };
            k * eligible
        }
    })
}

// ---------------------------------------------------------------------------
// Slot engine
// ---------------------------------------------------------------------------

/// One (pattern, settings) unit schedulable on slots.
#[derive(Clone)]
pub struct SlotSpec<'a> {
    pub pattern: PatternId,
    pub settings: &'a VariationSettings,
}

/// Lazily extended whitening keystream addressed by message bit index.
pub(crate) struct Keystream {
    rng: ChaCha8Rng,
    bytes: Vec<u8>,
}

impl Keystream {
    fn new(seed: u64) -> Self {
        Keystream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            bytes: Vec::new(),
        }
    }

    pub(crate) fn bit(&mut self, index: usize) -> bool {
        use rand::Rng;
        while self.bytes.len() <= index / 8 {
            self.bytes.push(self.rng.gen());
        }
        self.bytes[index / 8] & (0x80 >> (index % 8)) != 0
    }
}

/// Mutable per-spec state: whitening stream and the seeded draws used by
/// the two-level and guard-jitter submodes.
pub(crate) struct SpecState {
    pub(crate) keystream: Keystream,
    pub(crate) rng: ChaCha8Rng,
}

impl SpecState {
    fn new(settings: &VariationSettings) -> Self {
        let seed = settings.entries.whiten_seed.unwrap_or(0);
        SpecState {
            keystream: Keystream::new(seed),
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15),
        }
    }
}

/// Timing side effect of one slot embed.
pub(crate) enum TimingAction {
    None,
    /// Set the gap following this slot's PDU to the given duration.
    Gap(u64),
    /// Insert a duplicate of this slot's PDU into the following gap.
    Dup(u64),
    /// Invalidate the slot PDU's checksum once every other spec has
    /// written; keeps the corruption from being repaired by a later
    /// spec's dependent-field recomputation.
    DeferCorrupt,
}

pub(crate) struct SlotEffect {
    pub(crate) bits: usize,
    pub(crate) action: TimingAction,
    pub(crate) site: String,
}

fn embed_slot(
    spec: &SlotSpec,
    state: &mut SpecState,
    slot: usize,
    has_next: bool,
    pdu: &mut Pdu,
    cursor: &mut BitCursor,
) -> Result<SlotEffect> {
    use PatternId::*;
    match spec.pattern {
        P1Size => size::embed_slot(spec.settings, pdu, cursor),
        P2Sequence => sequence::embed_full(spec.settings, slot, pdu, cursor),
        P2aPosition => sequence::embed_position(spec.settings, slot, pdu, cursor),
        P2bNumElements => sequence::embed_count(spec.settings, pdu, cursor),
        P3AddRedundancy => redundancy::embed_slot(spec.settings, slot, pdu, cursor),
        P4CorruptionLoss => corruption::embed_slot(spec.settings, pdu, cursor),
        P5RandomValue => field_value::embed_slot(spec.settings, true, state, slot, pdu, cursor),
        P6ValueModulation => value_mod::embed_values(spec.settings, pdu, cursor),
        P6aCase => value_mod::embed_case(spec.settings, slot, pdu, cursor),
        P6bLsb => value_mod::embed_lsb(spec.settings, state, pdu, cursor),
        P7ReservedUnused => field_value::embed_slot(spec.settings, false, state, slot, pdu, cursor),
        P8InterArrivalTime => {
            if !has_next {
                // The final PDU has no trailing gap to modulate.
                return Ok(SlotEffect {
                    bits: 0,
                    action: TimingAction::None,
                    site: String::new(),
                });
            }
            let v = spec.settings.values_allowed()?;
            let Some((bit, _)) = cursor.take(1) else {
                return Ok(SlotEffect {
                    bits: 0,
                    action: TimingAction::None,
                    site: String::new(),
                });
            };
            let base = v[bit as usize];
            let guard = spec.settings.entries.granularity.unwrap_or(0);
            let gap = if guard > 0 {
                if let Some(dist) = &spec.settings.entries.distribution_ipg {
                    use rand::Rng;
                    let sample = dist[state.rng.gen_range(0..dist.len())];
                    let offset = (sample % (2 * guard + 1)) as i64 - guard as i64;
                    (base as i64 + offset).max(1) as u64
                } else {
                    base
                }
            } else {
                base
            };
            Ok(SlotEffect {
                bits: 1,
                action: TimingAction::Gap(gap),
                site: "gap".into(),
            })
        }
        P11Retransmission => {
            let Some((bit, _)) = cursor.take(1) else {
                return Ok(SlotEffect {
                    bits: 0,
                    action: TimingAction::None,
                    site: String::new(),
                });
            };
            let gap = spec.settings.entries.duplicate_gap.unwrap_or(1);
            Ok(SlotEffect {
                bits: 1,
                action: if bit == 1 {
                    TimingAction::Dup(gap)
                } else {
                    TimingAction::None
                },
                site: "retransmission".into(),
            })
        }
        P9Rate | P10PduOrder => Err(Error::config(format!(
            "{} is a window pattern and cannot run per slot",
            spec.pattern
        ))),
    }
}

fn extract_slot(
    spec: &SlotSpec,
    state: &mut SpecState,
    slot: usize,
    pdu: &Pdu,
    gap_to_next: Option<u64>,
    dup_count: usize,
    out: &mut Bits,
) -> Result<()> {
    use PatternId::*;
    match spec.pattern {
        P1Size => size::extract_slot(spec.settings, pdu, out),
        P2Sequence => sequence::extract_full(spec.settings, pdu, out),
        P2aPosition => sequence::extract_position(spec.settings, pdu, out),
        P2bNumElements => sequence::extract_count(spec.settings, pdu, out),
        P3AddRedundancy => redundancy::extract_slot(spec.settings, pdu, out),
        P4CorruptionLoss => corruption::extract_slot(pdu, out),
        P5RandomValue => field_value::extract_slot(spec.settings, true, state, slot, pdu, out),
        P6ValueModulation => value_mod::extract_values(spec.settings, pdu, out),
        P6aCase => value_mod::extract_case(spec.settings, pdu, out),
        P6bLsb => value_mod::extract_lsb(spec.settings, pdu, out),
        P7ReservedUnused => field_value::extract_slot(spec.settings, false, state, slot, pdu, out),
        P8InterArrivalTime => {
            if let Some(gap) = gap_to_next {
                let v = spec.settings.values_allowed()?;
                let mid = (v[0] + v[1]) / 2;
                out.push(gap > mid);
            }
            Ok(())
        }
        P11Retransmission => {
            out.push(dup_count > 0);
            Ok(())
        }
        P9Rate | P10PduOrder => Err(Error::config(format!(
            "{} is a window pattern and cannot run per slot",
            spec.pattern
        ))),
    }
}

pub(crate) struct EngineOutput {
    pub stream: PduStream,
    pub bits_embedded: usize,
    pub map: Vec<MapEntry>,
}

/// Runs the slot engine: `select(t)` names the spec indices applied to slot
/// `t`, in order. Walks slots until the message is exhausted, then carries
/// the remaining carrier through untouched.
pub(crate) fn engine_embed(
    specs: &[SlotSpec],
    select: &dyn Fn(usize) -> Vec<usize>,
    message: &CovertMessage,
    carrier: &PduStream,
) -> Result<EngineOutput> {
    for s in specs {
        check_pair(s.settings, carrier)?;
    }
    let mut states: Vec<SpecState> = specs.iter().map(|s| SpecState::new(s.settings)).collect();
    let mut cursor = BitCursor::new(&message.bits);
    let n = carrier.len();
    let orig_gaps: Vec<u64> = carrier.iats();

    let mut pdus: Vec<Pdu> = Vec::with_capacity(n);
    let mut gap_symbol: Vec<Option<u64>> = vec![None; n];
    let mut dup_after: Vec<Option<u64>> = vec![None; n];
    let mut map: Vec<MapEntry> = Vec::new();

    for (t, pdu) in carrier.pdus.iter().enumerate() {
        let mut work = pdu.clone();
        let mut corrupt_at_end = false;
        if !cursor.is_done() {
            for idx in select(t) {
                if cursor.is_done() {
                    break;
                }
                let spec = &specs[idx];
                let start = cursor.position();
                let effect =
                    embed_slot(spec, &mut states[idx], t, t + 1 < n, &mut work, &mut cursor)
                        .map_err(|e| match e {
                            Error::Capacity(m) => Error::Capacity(format!("slot {t}: {m}")),
                            other => other,
                        })?;
                match effect.action {
                    TimingAction::None => {}
                    TimingAction::Gap(g) => {
                        if gap_symbol[t].is_some() {
                            return Err(Error::Conflict(format!(
                                "slot {t}: two specs re-time the same gap"
                            )));
                        }
                        gap_symbol[t] = Some(g);
                    }
                    TimingAction::Dup(g) => {
                        dup_after[t] = Some(g);
                    }
                    TimingAction::DeferCorrupt => corrupt_at_end = true,
                }
                if effect.bits > 0 {
                    map.push(MapEntry {
                        pdu_seq: pdu.seq,
                        start_bit: start,
                        bit_count: effect.bits,
                        site: effect.site,
                    });
                }
            }
        }
        if corrupt_at_end {
            corruption::invalidate_checksum(&mut work)?;
        }
        pdus.push(work);
    }

    // Reconstruction pass: timestamps first, duplicates second.
    let mut rebuilt: Vec<Pdu> = Vec::with_capacity(pdus.len());
    let mut ts = carrier.pdus.first().map(|p| p.timestamp_us).unwrap_or(0);
    for (t, mut p) in pdus.into_iter().enumerate() {
        if t > 0 {
            ts += gap_symbol[t - 1].unwrap_or_else(|| orig_gaps[t - 1]);
        }
        p.timestamp_us = ts;
        rebuilt.push(p);
    }
    let mut with_dups: Vec<Pdu> = Vec::with_capacity(rebuilt.len());
    for t in 0..rebuilt.len() {
        let next_ts = rebuilt.get(t + 1).map(|p| p.timestamp_us);
        let p = rebuilt[t].clone();
        let base_ts = p.timestamp_us;
        with_dups.push(p);
        if let Some(gap) = dup_after[t] {
            let mut dup = with_dups.last().unwrap().clone();
            dup.timestamp_us = match next_ts {
                Some(nt) => (base_ts + gap).min(nt),
                None => base_ts + gap,
            };
            with_dups.push(dup);
        }
    }

    Ok(EngineOutput {
        stream: PduStream {
            schema: carrier.schema.clone(),
            pdus: with_dups,
        },
        bits_embedded: cursor.position(),
        map,
    })
}

/// Extraction mirror of [`engine_embed`]. Returns everything decodable;
/// callers compare against the embedded prefix.
pub(crate) fn engine_extract(
    specs: &[SlotSpec],
    select: &dyn Fn(usize) -> Vec<usize>,
    stream: &PduStream,
) -> Result<CovertMessage> {
    for s in specs {
        check_pair(s.settings, stream)?;
    }
    let mut states: Vec<SpecState> = specs.iter().map(|s| SpecState::new(s.settings)).collect();

    // Slot PDUs: first occurrence per seq when duplicates are in play, so
    // retransmissions do not shift the slot counter.
    let dedupe = specs
        .iter()
        .any(|s| s.pattern == PatternId::P11Retransmission);
    let mut slot_pdus: Vec<(usize, usize)> = Vec::new(); // (pdu index, dup count)
    if dedupe {
        let mut seen: std::collections::BTreeMap<u64, usize> = std::collections::BTreeMap::new();
        for (i, p) in stream.pdus.iter().enumerate() {
            match seen.get(&p.seq) {
                Some(&slot_idx) => slot_pdus[slot_idx].1 += 1,
                None => {
                    seen.insert(p.seq, slot_pdus.len());
                    slot_pdus.push((i, 0));
                }
            }
        }
    } else {
        slot_pdus = (0..stream.pdus.len()).map(|i| (i, 0)).collect();
    }

    let mut out = Bits::zeroed(0);
    for (t, &(pdu_idx, dups)) in slot_pdus.iter().enumerate() {
        let pdu = &stream.pdus[pdu_idx];
        let gap_to_next = slot_pdus
            .get(t + 1)
            .map(|&(j, _)| stream.pdus[j].timestamp_us.saturating_sub(pdu.timestamp_us));
        for idx in select(t) {
            extract_slot(
                &specs[idx],
                &mut states[idx],
                t,
                pdu,
                gap_to_next,
                dups,
                &mut out,
            )?;
        }
    }
    Ok(CovertMessage::new(out))
}

// ---------------------------------------------------------------------------
// Public single-pattern API
// ---------------------------------------------------------------------------

/// Embeds a message with one pattern. `extract(embed(m).stream)` returns a
/// message whose first `bits_embedded` bits equal `m` over a noiseless
/// channel.
pub fn embed(
    pattern: PatternId,
    settings: &VariationSettings,
    message: &CovertMessage,
    carrier: &PduStream,
) -> Result<EmbedResult> {
    let cap = capacity(pattern, settings, carrier)?;
    if cap == 0 && !message.is_empty() {
        return Err(Error::capacity(format!(
            "carrier cannot hold any bits for {pattern} under these settings"
        )));
    }
    use PatternId::*;
    match pattern {
        P9Rate => rate::embed(settings, message, carrier),
        P10PduOrder => order::embed(settings, message, carrier),
        P4CorruptionLoss => corruption::embed(settings, message, carrier),
        _ => {
            let specs = [SlotSpec { pattern, settings }];
            let out = engine_embed(&specs, &|_| vec![0], message, carrier)?;
            Ok(EmbedResult {
                stream: out.stream,
                bits_embedded: out.bits_embedded,
                map: out.map,
            })
        }
    }
}

/// Decodes everything the stream carries for this pattern.
pub fn extract(
    pattern: PatternId,
    settings: &VariationSettings,
    stream: &PduStream,
) -> Result<CovertMessage> {
    use PatternId::*;
    match pattern {
        P9Rate => rate::extract(settings, stream),
        P10PduOrder => order::extract(settings, stream),
        P4CorruptionLoss => corruption::extract(settings, stream),
        _ => {
            let specs = [SlotSpec { pattern, settings }];
            engine_extract(&specs, &|_| vec![0], stream)
        }
    }
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;
    use crate::protocol::{builtin_schema, make_carrier, IatModel};

    pub fn carrier(schema: &str, n: usize) -> PduStream {
        let s = builtin_schema(schema).unwrap();
        make_carrier(&s, n, &IatModel::Constant(2000), 7).unwrap()
    }

    pub fn settings_for(pattern: PatternId, protocol: &str) -> VariationSettings {
        crate::variation::default_settings()
            .get(pattern, &format!("{protocol}_like"))
            .unwrap_or_else(|| panic!("no default settings for ({pattern}, {protocol})"))
            .clone()
    }

    /// Asserts extract(embed(m)) is prefix-equal and returns the result.
    pub fn round_trip(
        pattern: PatternId,
        settings: &VariationSettings,
        message: &CovertMessage,
        carrier: &PduStream,
    ) -> EmbedResult {
        let out = embed(pattern, settings, message, carrier).unwrap();
        let back = extract(pattern, settings, &out.stream).unwrap();
        let want = message.bits.prefix(out.bits_embedded);
        let got = back.bits.prefix(out.bits_embedded);
        assert_eq!(
            got, want,
            "{pattern} round trip (embedded {} bits)",
            out.bits_embedded
        );
        let mapped: usize = out.map.iter().map(|m| m.bit_count).sum();
        assert_eq!(mapped, out.bits_embedded, "{pattern} map coverage");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;

    #[test]
    fn all_pattern_defaults_round_trip() {
        let catalog = crate::variation::default_settings();
        for ((pattern, protocol), settings) in &catalog.entries {
            let short = protocol.trim_end_matches("_like");
            let c = carrier(short, 24);
            let cap = capacity(*pattern, settings, &c).unwrap();
            assert!(cap > 0, "({pattern}, {protocol}) capacity 0");
            let msg = CovertMessage::random(cap.min(48), 0xfeed ^ cap as u64);
            round_trip(*pattern, settings, &msg, &c);
        }
    }

    #[test]
    fn empty_message_leaves_stream_unchanged() {
        let catalog = crate::variation::default_settings();
        let empty = CovertMessage::new(Bits::zeroed(0));
        for ((pattern, protocol), settings) in &catalog.entries {
            let short = protocol.trim_end_matches("_like");
            let c = carrier(short, 6);
            let out = embed(*pattern, settings, &empty, &c).unwrap();
            assert_eq!(out.bits_embedded, 0);
            assert_eq!(
                out.stream, c,
                "({pattern}, {protocol}) mutated an empty embed"
            );
        }
    }

    #[test]
    fn embed_never_mutates_its_input() {
        let c = carrier("ipv4", 12);
        let snapshot = c.clone();
        let settings = settings_for(PatternId::P7ReservedUnused, "ipv4");
        let msg = CovertMessage::random(12, 3);
        let _ = embed(PatternId::P7ReservedUnused, &settings, &msg, &c).unwrap();
        assert_eq!(c, snapshot);
    }

    #[test]
    fn capacity_shortfall_is_an_error() {
        // Degenerate size range: zero symbols wide.
        let mut settings = settings_for(PatternId::P1Size, "ipv4");
        settings.entries.min_size = Some(60);
        settings.entries.max_size = Some(60);
        let c = carrier("ipv4", 4);
        assert_eq!(capacity(PatternId::P1Size, &settings, &c).unwrap(), 0);
        let msg = CovertMessage::random(4, 1);
        match embed(PatternId::P1Size, &settings, &msg, &c) {
            Err(Error::Capacity(_)) => {}
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn settings_schema_mismatch_rejected() {
        let settings = settings_for(PatternId::P7ReservedUnused, "ipv4");
        let c = carrier("ipv6", 4);
        assert!(capacity(PatternId::P7ReservedUnused, &settings, &c).is_err());
    }

    #[test]
    fn p7_capacity_one_bit_per_pdu() {
        let settings = settings_for(PatternId::P7ReservedUnused, "ipv4");
        let c = carrier("ipv4", 10);
        assert_eq!(
            capacity(PatternId::P7ReservedUnused, &settings, &c).unwrap(),
            10
        );
    }

    #[test]
    fn p10_capacity_four_bits_per_window() {
        let settings = settings_for(PatternId::P10PduOrder, "ipv4");
        let c = carrier("ipv4", 8);
        assert_eq!(capacity(PatternId::P10PduOrder, &settings, &c).unwrap(), 8);
    }

    #[test]
    fn p6b_plain_capacity_len_per_pdu() {
        let settings = settings_for(PatternId::P6bLsb, "dhcp");
        let c = carrier("dhcp", 8);
        assert_eq!(capacity(PatternId::P6bLsb, &settings, &c).unwrap(), 16);
    }
}

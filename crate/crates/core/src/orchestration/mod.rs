//! Pattern combination and keyed pattern hopping.
//!
//! Combination applies several patterns to the same carrier: in parallel
//! every PDU carries bits from every spec, sequentially PDU `t` uses spec
//! `t mod k` (the easily-detected linear baseline hopping improves on).
//! Hopping selects the per-slot pattern with a keyed PRF shared out of
//! band, so only a receiver holding the key can replay the schedule.
//!
//! Slot `t` is PDU `t`. Timing patterns in a hopping or combination set
//! act on the gap following PDU `t` (or the duplicate inserted into it)
//! and carry exactly one bit per slot; the window patterns and the drop
//! submode do not fit per-PDU slots and are rejected at validation.

mod config_file;
mod prf;

pub use config_file::{parse_hopping_config, render_hopping_config};
pub use prf::{hmac_sha256, prf_u64, PrfKind};

use crate::catalog::PatternId;
use crate::codecs::{self, CovertMessage, EmbedResult, SlotSpec};
use crate::error::{Error, Result};
use crate::protocol::PduStream;
use crate::variation::VariationSettings;

/// Keyed hopping schedule shared by sender and receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct HoppingConfig {
    /// Ordered pattern list; the PRF selects indices into it.
    pub patterns: Vec<(PatternId, VariationSettings)>,
    /// 256-bit secret agreed out of band.
    pub key: [u8; 32],
    /// Selection modulus, >= |patterns|. Values of the PRF residue at or
    /// beyond |patterns| leave the slot unused.
    pub modulus: u32,
    pub prf: PrfKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopOutcome {
    Chosen(usize),
    Skip,
}

/// Per-slot schedule record. `symbol_bits` is the configured width of the
/// chosen pattern at that slot, so equal configs produce identical
/// transcripts on both ends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopSlot {
    pub t: u64,
    pub outcome: HopOutcome,
    pub symbol_bits: u32,
}

pub type HopTranscript = Vec<HopSlot>;

fn hoppable(pattern: PatternId, settings: &VariationSettings) -> Result<()> {
    if matches!(pattern, PatternId::P9Rate | PatternId::P10PduOrder) {
        return Err(Error::config(format!(
            "{pattern} works on PDU windows and cannot be scheduled per slot"
        )));
    }
    if pattern == PatternId::P4CorruptionLoss && settings.token()? == "drop" {
        return Err(Error::config(
            "drop submode removes slots and would desynchronize the schedule",
        ));
    }
    if settings.only_first_pkt() {
        return Err(Error::config(
            "OnlyFirstPkt settings cannot be scheduled across slots",
        ));
    }
    Ok(())
}

impl HoppingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patterns.is_empty() {
            return Err(Error::config("hopping needs at least one pattern"));
        }
        if (self.modulus as usize) < self.patterns.len() {
            return Err(Error::config(format!(
                "modulus {} smaller than the pattern list ({})",
                self.modulus,
                self.patterns.len()
            )));
        }
        for (p, s) in &self.patterns {
            if *p != s.pattern {
                return Err(Error::config(format!(
                    "settings entry is for {}, listed under {p}",
                    s.pattern
                )));
            }
            hoppable(*p, s)?;
        }
        Ok(())
    }
}

/// Deterministic per-slot selection: residue of PRF(V, t) modulo the
/// configured modulus; residues beyond the pattern list mean Skip.
pub fn hop_select(config: &HoppingConfig, t: u64) -> HopOutcome {
    let r = prf_u64(config.prf, &config.key, t);
    let i = (r % config.modulus as u64) as usize;
    if i < config.patterns.len() {
        HopOutcome::Chosen(i)
    } else {
        HopOutcome::Skip
    }
}

fn transcript_for(config: &HoppingConfig, slots: usize) -> Result<HopTranscript> {
    let mut out = Vec::with_capacity(slots);
    for t in 0..slots {
        let outcome = hop_select(config, t as u64);
        let symbol_bits = match outcome {
            HopOutcome::Skip => 0,
            HopOutcome::Chosen(i) => {
                let (p, s) = &config.patterns[i];
                let gapless = *p == PatternId::P8InterArrivalTime && t + 1 == slots;
                if gapless {
                    0
                } else {
                    codecs::bits_per_slot(*p, s)? as u32
                }
            }
        };
        out.push(HopSlot {
            t: t as u64,
            outcome,
            symbol_bits,
        });
    }
    Ok(out)
}

/// Embeds under a hopping schedule. Returns the covert stream and the
/// sender-side transcript.
pub fn hop_embed(
    config: &HoppingConfig,
    message: &CovertMessage,
    carrier: &PduStream,
) -> Result<(EmbedResult, HopTranscript)> {
    config.validate()?;
    let specs: Vec<SlotSpec> = config
        .patterns
        .iter()
        .map(|(p, s)| SlotSpec {
            pattern: *p,
            settings: s,
        })
        .collect();
    let select = |t: usize| match hop_select(config, t as u64) {
        HopOutcome::Chosen(i) => vec![i],
        HopOutcome::Skip => vec![],
    };
    let out = codecs::engine_embed(&specs, &select, message, carrier)?;
    let transcript = transcript_for(config, carrier.len())?;
    Ok((
        EmbedResult {
            stream: out.stream,
            bits_embedded: out.bits_embedded,
            map: out.map,
        },
        transcript,
    ))
}

/// Receiver side: replays the schedule from the shared config and decodes
/// every slot. Returns everything decodable plus the receiver transcript.
pub fn hop_extract(
    config: &HoppingConfig,
    stream: &PduStream,
) -> Result<(CovertMessage, HopTranscript)> {
    config.validate()?;
    let specs: Vec<SlotSpec> = config
        .patterns
        .iter()
        .map(|(p, s)| SlotSpec {
            pattern: *p,
            settings: s,
        })
        .collect();
    let select = |t: usize| match hop_select(config, t as u64) {
        HopOutcome::Chosen(i) => vec![i],
        HopOutcome::Skip => vec![],
    };
    let msg = codecs::engine_extract(&specs, &select, stream)?;
    let slots = slot_count(config, stream);
    let transcript = transcript_for(config, slots)?;
    Ok((msg, transcript))
}

fn slot_count(config: &HoppingConfig, stream: &PduStream) -> usize {
    let dedupe = config
        .patterns
        .iter()
        .any(|(p, _)| *p == PatternId::P11Retransmission);
    if dedupe {
        let mut seqs: Vec<u64> = stream.pdus.iter().map(|p| p.seq).collect();
        seqs.sort_unstable();
        seqs.dedup();
        seqs.len()
    } else {
        stream.len()
    }
}

// ---------------------------------------------------------------------------
// Combination
// ---------------------------------------------------------------------------

/// Write footprint used by the parallel compatibility predicate.
#[derive(Debug, Clone, PartialEq)]
enum Footprint {
    HeaderBits(u32, u32),
    ElementList,
    PayloadSize,
    Gap,
    Membership,
    TokenCase,
}

fn footprint(pattern: PatternId, settings: &VariationSettings) -> Result<Footprint> {
    use PatternId::*;
    Ok(match pattern {
        P1Size => Footprint::PayloadSize,
        P2Sequence | P2aPosition | P2bNumElements | P3AddRedundancy => Footprint::ElementList,
        P4CorruptionLoss => Footprint::HeaderBits(0, 0), // resolved against the checksum field below
        P5RandomValue | P6ValueModulation | P6bLsb | P7ReservedUnused => {
            Footprint::HeaderBits(settings.offset()?, settings.len_bits()?)
        }
        P6aCase => Footprint::TokenCase,
        P8InterArrivalTime => Footprint::Gap,
        P9Rate | P10PduOrder => {
            return Err(Error::Conflict(format!(
                "{pattern} re-times whole windows and cannot be combined"
            )))
        }
        P11Retransmission => Footprint::Membership,
    })
}

fn checksum_range(
    settings: &VariationSettings,
    schema: &crate::protocol::ProtocolSchema,
) -> (u32, u32) {
    let _ = settings;
    schema
        .fields
        .iter()
        .find(|f| f.kind.tag() == crate::protocol::FieldKindTag::Checksum)
        .map(|f| (f.offset, f.len))
        .unwrap_or((0, 0))
}

/// Two specs conflict iff their written bit ranges intersect, they mutate
/// the same element list, or they re-time the same gaps.
fn check_compatible(
    specs: &[(PatternId, VariationSettings)],
    schema: &crate::protocol::ProtocolSchema,
) -> Result<()> {
    let mut prints: Vec<(PatternId, Footprint)> = Vec::new();
    for (p, s) in specs {
        if *p == PatternId::P4CorruptionLoss && s.token()? == "drop" {
            return Err(Error::Conflict(
                "drop submode removes PDUs other specs rely on".into(),
            ));
        }
        let mut fp = footprint(*p, s)?;
        if *p == PatternId::P4CorruptionLoss {
            let (o, l) = checksum_range(s, schema);
            fp = Footprint::HeaderBits(o, l);
        }
        prints.push((*p, fp));
    }
    for i in 0..prints.len() {
        for j in i + 1..prints.len() {
            let (pa, fa) = &prints[i];
            let (pb, fb) = &prints[j];
            let clash = match (fa, fb) {
                (Footprint::HeaderBits(o1, l1), Footprint::HeaderBits(o2, l2)) => {
                    o1 < &(o2 + l2) && o2 < &(o1 + l1)
                }
                (a, b) => a == b,
            };
            if clash {
                return Err(Error::Conflict(format!(
                    "{pa} and {pb} write to the same place"
                )));
            }
        }
    }
    Ok(())
}

/// Applies every spec to every PDU; per-PDU capacity is the sum of the
/// per-spec capacities. Bits interleave per PDU in declared spec order on
/// both ends.
pub fn combine_parallel(
    specs: &[(PatternId, VariationSettings)],
    message: &CovertMessage,
    carrier: &PduStream,
) -> Result<EmbedResult> {
    match specs {
        [] => Err(Error::config("empty combination")),
        [(p, s)] => codecs::embed(*p, s, message, carrier),
        _ => {
            check_compatible(specs, &carrier.schema)?;
            for (p, s) in specs {
                hoppable(*p, s)?;
            }
            let slot_specs: Vec<SlotSpec> = specs
                .iter()
                .map(|(p, s)| SlotSpec {
                    pattern: *p,
                    settings: s,
                })
                .collect();
            let all: Vec<usize> = (0..specs.len()).collect();
            let out = codecs::engine_embed(&slot_specs, &|_| all.clone(), message, carrier)?;
            Ok(EmbedResult {
                stream: out.stream,
                bits_embedded: out.bits_embedded,
                map: out.map,
            })
        }
    }
}

pub fn extract_parallel(
    specs: &[(PatternId, VariationSettings)],
    stream: &PduStream,
) -> Result<CovertMessage> {
    match specs {
        [] => Err(Error::config("empty combination")),
        [(p, s)] => codecs::extract(*p, s, stream),
        _ => {
            check_compatible(specs, &stream.schema)?;
            let slot_specs: Vec<SlotSpec> = specs
                .iter()
                .map(|(p, s)| SlotSpec {
                    pattern: *p,
                    settings: s,
                })
                .collect();
            let all: Vec<usize> = (0..specs.len()).collect();
            codecs::engine_extract(&slot_specs, &|_| all.clone(), stream)
        }
    }
}

/// Exact parallel capacity: the sum of the member capacities.
pub fn parallel_capacity(
    specs: &[(PatternId, VariationSettings)],
    carrier: &PduStream,
) -> Result<usize> {
    specs
        .iter()
        .map(|(p, s)| codecs::capacity(*p, s, carrier))
        .sum()
}

/// PDU `t` uses spec `t mod k`: the linear rotation baseline.
pub fn combine_sequential(
    specs: &[(PatternId, VariationSettings)],
    message: &CovertMessage,
    carrier: &PduStream,
) -> Result<EmbedResult> {
    match specs {
        [] => Err(Error::config("empty combination")),
        [(p, s)] => codecs::embed(*p, s, message, carrier),
        _ => {
            for (p, s) in specs {
                hoppable(*p, s)?;
            }
            let slot_specs: Vec<SlotSpec> = specs
                .iter()
                .map(|(p, s)| SlotSpec {
                    pattern: *p,
                    settings: s,
                })
                .collect();
            let k = specs.len();
            let out = codecs::engine_embed(&slot_specs, &|t| vec![t % k], message, carrier)?;
            Ok(EmbedResult {
                stream: out.stream,
                bits_embedded: out.bits_embedded,
                map: out.map,
            })
        }
    }
}

pub fn extract_sequential(
    specs: &[(PatternId, VariationSettings)],
    stream: &PduStream,
) -> Result<CovertMessage> {
    match specs {
        [] => Err(Error::config("empty combination")),
        [(p, s)] => codecs::extract(*p, s, stream),
        _ => {
            let slot_specs: Vec<SlotSpec> = specs
                .iter()
                .map(|(p, s)| SlotSpec {
                    pattern: *p,
                    settings: s,
                })
                .collect();
            let k = specs.len();
            codecs::engine_extract(&slot_specs, &|t| vec![t % k], stream)
        }
    }
}

// ---------------------------------------------------------------------------
// Unified embedding front end
// ---------------------------------------------------------------------------

/// One embedding strategy, as named by experiment specs.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum EmbeddingSpec {
    Single(PatternId, VariationSettings),
    Parallel(Vec<(PatternId, VariationSettings)>),
    Sequential(Vec<(PatternId, VariationSettings)>),
    Hopping(HoppingConfig),
}

impl EmbeddingSpec {
    pub fn embed(&self, message: &CovertMessage, carrier: &PduStream) -> Result<EmbedResult> {
        match self {
            EmbeddingSpec::Single(p, s) => codecs::embed(*p, s, message, carrier),
            EmbeddingSpec::Parallel(specs) => combine_parallel(specs, message, carrier),
            EmbeddingSpec::Sequential(specs) => combine_sequential(specs, message, carrier),
            EmbeddingSpec::Hopping(config) => Ok(hop_embed(config, message, carrier)?.0),
        }
    }

    pub fn extract(&self, stream: &PduStream) -> Result<CovertMessage> {
        match self {
            EmbeddingSpec::Single(p, s) => codecs::extract(*p, s, stream),
            EmbeddingSpec::Parallel(specs) => extract_parallel(specs, stream),
            EmbeddingSpec::Sequential(specs) => extract_sequential(specs, stream),
            EmbeddingSpec::Hopping(config) => Ok(hop_extract(config, stream)?.0),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            EmbeddingSpec::Single(p, _) => format!("single {p}"),
            EmbeddingSpec::Parallel(specs) => format!(
                "parallel {}",
                specs
                    .iter()
                    .map(|(p, _)| p.code())
                    .collect::<Vec<_>>()
                    .join("+")
            ),
            EmbeddingSpec::Sequential(specs) => format!(
                "sequential {}",
                specs
                    .iter()
                    .map(|(p, _)| p.code())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            EmbeddingSpec::Hopping(c) => format!(
                "hopping {} mod {}",
                c.patterns
                    .iter()
                    .map(|(p, _)| p.code())
                    .collect::<Vec<_>>()
                    .join(","),
                c.modulus
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codecs::test_util::{carrier, settings_for};
    use crate::codecs::{capacity, embed, CovertMessage};

    fn key(fill: u8) -> [u8; 32] {
        [fill; 32]
    }

    fn two_pattern_config(modulus: u32) -> HoppingConfig {
        HoppingConfig {
            patterns: vec![
                (
                    PatternId::P7ReservedUnused,
                    settings_for(PatternId::P7ReservedUnused, "ipv4"),
                ),
                (PatternId::P6bLsb, settings_for(PatternId::P6bLsb, "ipv4")),
            ],
            key: key(0x42),
            modulus,
            prf: PrfKind::HmacSha256,
        }
    }

    #[test]
    fn single_pattern_modulus_forces_index_zero() {
        let c = HoppingConfig {
            patterns: vec![(
                PatternId::P7ReservedUnused,
                settings_for(PatternId::P7ReservedUnused, "ipv4"),
            )],
            key: key(9),
            modulus: 1,
            prf: PrfKind::HmacSha256,
        };
        for t in 0..64 {
            assert_eq!(hop_select(&c, t), HopOutcome::Chosen(0));
        }
    }

    #[test]
    fn selection_matches_independent_prf_route() {
        let c = two_pattern_config(2);
        for t in 0..1000u64 {
            let r = prf_u64(PrfKind::HmacSha256, &c.key, t);
            let want = (r % 2) as usize;
            assert_eq!(hop_select(&c, t), HopOutcome::Chosen(want));
        }
    }

    #[test]
    fn degenerate_single_pattern_hop_equals_plain_embed() {
        let settings = settings_for(PatternId::P7ReservedUnused, "ipv4");
        let config = HoppingConfig {
            patterns: vec![(PatternId::P7ReservedUnused, settings.clone())],
            key: key(1),
            modulus: 1,
            prf: PrfKind::HmacSha256,
        };
        let c = carrier("ipv4", 16);
        let msg = CovertMessage::random(16, 5);
        let (hop, _) = hop_embed(&config, &msg, &c).unwrap();
        let plain = embed(PatternId::P7ReservedUnused, &settings, &msg, &c).unwrap();
        assert_eq!(hop.stream, plain.stream);
        assert_eq!(hop.bits_embedded, plain.bits_embedded);
    }

    #[test]
    fn two_pattern_hopping_round_trips() {
        let config = two_pattern_config(2);
        let c = carrier("ipv4", 64);
        let msg = CovertMessage::random(64, 11);
        let (out, sent) = hop_embed(&config, &msg, &c).unwrap();
        let (back, received) = hop_extract(&config, &out.stream).unwrap();
        assert_eq!(sent, received);
        assert_eq!(
            back.bits.prefix(out.bits_embedded),
            msg.bits.prefix(out.bits_embedded)
        );
    }

    #[test]
    fn skip_slots_carry_nothing() {
        let config = two_pattern_config(4); // half the slots skip
        let c = carrier("ipv4", 400);
        let msg = CovertMessage::random(64, 3);
        let (out, transcript) = hop_embed(&config, &msg, &c).unwrap();
        let skips = transcript
            .iter()
            .filter(|s| s.outcome == HopOutcome::Skip)
            .count();
        assert!(skips > 0);
        let (back, _) = hop_extract(&config, &out.stream).unwrap();
        assert_eq!(
            back.bits.prefix(out.bits_embedded),
            msg.bits.prefix(out.bits_embedded)
        );
    }

    #[test]
    fn window_patterns_rejected_in_hopping() {
        let config = HoppingConfig {
            patterns: vec![(
                PatternId::P10PduOrder,
                settings_for(PatternId::P10PduOrder, "ipv4"),
            )],
            key: key(2),
            modulus: 1,
            prf: PrfKind::HmacSha256,
        };
        assert!(config.validate().is_err());
    }

    #[test]
    fn parallel_identifier_plus_option_capacities_add() {
        // Random-value field and added element on one PDU.
        let specs = vec![
            (
                PatternId::P5RandomValue,
                settings_for(PatternId::P5RandomValue, "ipv4"),
            ),
            (
                PatternId::P3AddRedundancy,
                settings_for(PatternId::P3AddRedundancy, "ipv4"),
            ),
        ];
        let c = carrier("ipv4", 8);
        let total = parallel_capacity(&specs, &c).unwrap();
        assert_eq!(total, 8 * (16 + 16));
        let msg = CovertMessage::random(total, 23);
        let out = combine_parallel(&specs, &msg, &c).unwrap();
        assert_eq!(out.bits_embedded, total);
        let back = extract_parallel(&specs, &out.stream).unwrap();
        assert_eq!(back.bits, msg.bits);
    }

    #[test]
    fn overlapping_bit_ranges_conflict() {
        let specs = vec![
            (
                PatternId::P7ReservedUnused,
                settings_for(PatternId::P7ReservedUnused, "ipv4"),
            ),
            (
                PatternId::P7ReservedUnused,
                settings_for(PatternId::P7ReservedUnused, "ipv4"),
            ),
        ];
        let c = carrier("ipv4", 4);
        let msg = CovertMessage::random(4, 1);
        match combine_parallel(&specs, &msg, &c) {
            Err(Error::Conflict(m)) => assert!(m.contains("P7"), "{m}"),
            other => panic!("expected conflict, got {other:?}"),
        }
    }

    #[test]
    fn sequential_rotation_alternates_specs() {
        let specs = vec![
            (
                PatternId::P7ReservedUnused,
                settings_for(PatternId::P7ReservedUnused, "ipv4"),
            ),
            (PatternId::P6bLsb, settings_for(PatternId::P6bLsb, "ipv4")),
        ];
        let c = carrier("ipv4", 4);
        let msg = CovertMessage::new(crate::bits::Bits::from_uint(0b1111, 4));
        let out = combine_sequential(&specs, &msg, &c).unwrap();
        // PDUs 0 and 2 use the reserved flag, 1 and 3 the two-level field.
        assert_eq!(
            out.stream.pdus[0].read_field_uint("flag_reserved").unwrap(),
            1
        );
        assert_eq!(
            out.stream.pdus[2].read_field_uint("flag_reserved").unwrap(),
            1
        );
        assert!(out.stream.pdus[1].read_field_uint("ttl").unwrap() >= 150);
        assert!(out.stream.pdus[3].read_field_uint("ttl").unwrap() >= 150);
        let back = extract_sequential(&specs, &out.stream).unwrap();
        assert_eq!(back.bits.prefix(4), msg.bits);
    }

    #[test]
    fn sequential_round_trips_thirty_two_bits() {
        let specs = vec![
            (
                PatternId::P7ReservedUnused,
                settings_for(PatternId::P7ReservedUnused, "ipv4"),
            ),
            (PatternId::P6bLsb, settings_for(PatternId::P6bLsb, "ipv4")),
        ];
        let c = carrier("ipv4", 32);
        let msg = CovertMessage::random(32, 29);
        let out = combine_sequential(&specs, &msg, &c).unwrap();
        let back = extract_sequential(&specs, &out.stream).unwrap();
        assert_eq!(
            back.bits.prefix(out.bits_embedded),
            msg.bits.prefix(out.bits_embedded)
        );
    }

    #[test]
    fn singleton_combination_equals_plain_embed() {
        let settings = settings_for(PatternId::P10PduOrder, "ipv4");
        let specs = vec![(PatternId::P10PduOrder, settings.clone())];
        let c = carrier("ipv4", 8);
        let msg = CovertMessage::random(8, 7);
        let par = combine_parallel(&specs, &msg, &c).unwrap();
        let plain = embed(PatternId::P10PduOrder, &settings, &msg, &c).unwrap();
        assert_eq!(par.stream, plain.stream);
        let _ = capacity(PatternId::P10PduOrder, &settings, &c).unwrap();
    }

    #[test]
    fn parallel_with_gap_and_dup_specs_round_trips() {
        let specs = vec![
            (
                PatternId::P7ReservedUnused,
                settings_for(PatternId::P7ReservedUnused, "ipv4"),
            ),
            (
                PatternId::P8InterArrivalTime,
                settings_for(PatternId::P8InterArrivalTime, "ipv4"),
            ),
            (
                PatternId::P11Retransmission,
                settings_for(PatternId::P11Retransmission, "ipv4"),
            ),
        ];
        let c = carrier("ipv4", 24);
        let msg = CovertMessage::random(60, 31);
        let out = combine_parallel(&specs, &msg, &c).unwrap();
        let back = extract_parallel(&specs, &out.stream).unwrap();
        assert_eq!(
            back.bits.prefix(out.bits_embedded),
            msg.bits.prefix(out.bits_embedded)
        );
    }
}

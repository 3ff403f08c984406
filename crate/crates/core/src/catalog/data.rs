//! Built-in catalog records.

use super::{Noise, PatternDescriptor, PatternId, Semantic, Syntax};

const STORAGE: &str = "Network Covert Storage Channels";
const TIMING: &str = "Network Covert Timing Channels";
const NON_PAYLOAD: &str = "Modification of Non-Payload";
const STRUCT_MOD: &str = "Structure Modifying";
const STRUCT_PRES: &str = "Structure Preserving";
const ATTR_MOD: &str = "Modification of an Attribute";

// Qualifying notes for the categorization table. Stored once, attached to
// the descriptors they annotate.
const NOTE_A: &str =
    "a: Semantics survive only when element position or ordering carries no protocol meaning.";
const NOTE_B: &str =
    "b: On-path fragmentation can resize PDUs and so add noise to size-modulated channels.";
const NOTE_C: &str = "c: Writing a currently unused element may or may not change how the PDU is interpreted, so the semantic effect is conditional.";
const NOTE_D: &str = "d: A carrier that re-sorts at the receiver keeps the transfer semantics under reordering; otherwise they may change.";
const NOTE_E: &str = "e: Deliberately corrupted PDUs are discarded rather than interpreted and so neither preserve nor modify semantics.";
const NOTE_F: &str = "f: Modulating a value the network itself rewrites (a hop count) is noisy; modulating a stable value (an address) is noiseless.";

struct Row {
    id: PatternId,
    name: &'static str,
    alias: Option<&'static str>,
    context: &'static [&'static str],
    semantic: Semantic,
    syntax: Syntax,
    noise: Noise,
    evidence_count: u32,
    footnotes: &'static [&'static str],
}

const ROWS: &[Row] = &[
    Row {
        id: PatternId::P1Size,
        name: "Size Modulation",
        alias: None,
        context: &[STORAGE, NON_PAYLOAD, STRUCT_MOD],
        semantic: Semantic::Preserving,
        syntax: Syntax::Modifying,
        noise: Noise::Noiseless,
        evidence_count: 6,
        footnotes: &[NOTE_B],
    },
    Row {
        id: PatternId::P2Sequence,
        name: "Sequence",
        alias: None,
        context: &[STORAGE, NON_PAYLOAD, STRUCT_MOD],
        semantic: Semantic::Preserving,
        syntax: Syntax::Modifying,
        noise: Noise::Noiseless,
        evidence_count: 3,
        footnotes: &[NOTE_A],
    },
    Row {
        id: PatternId::P2aPosition,
        name: "Position",
        alias: None,
        context: &[STORAGE, NON_PAYLOAD, STRUCT_MOD, "Sequence"],
        semantic: Semantic::Preserving,
        syntax: Syntax::Modifying,
        noise: Noise::Noiseless,
        evidence_count: 1,
        footnotes: &[NOTE_A],
    },
    Row {
        id: PatternId::P2bNumElements,
        name: "Number of Elements",
        alias: None,
        context: &[STORAGE, NON_PAYLOAD, STRUCT_MOD, "Sequence"],
        semantic: Semantic::Preserving,
        syntax: Syntax::Modifying,
        noise: Noise::Noiseless,
        evidence_count: 2,
        footnotes: &[],
    },
    Row {
        id: PatternId::P3AddRedundancy,
        name: "Add Redundancy",
        alias: None,
        context: &[STORAGE, NON_PAYLOAD, STRUCT_MOD],
        semantic: Semantic::Preserving,
        syntax: Syntax::Modifying,
        noise: Noise::Noiseless,
        evidence_count: 21,
        footnotes: &[],
    },
    Row {
        id: PatternId::P4CorruptionLoss,
        name: "PDU Corruption/Loss",
        alias: None,
        context: &[STORAGE, NON_PAYLOAD, STRUCT_MOD],
        semantic: Semantic::Conditional,
        syntax: Syntax::Modifying,
        noise: Noise::Noisy,
        evidence_count: 3,
        footnotes: &[NOTE_E],
    },
    Row {
        id: PatternId::P5RandomValue,
        name: "Random Value",
        alias: None,
        context: &[STORAGE, NON_PAYLOAD, STRUCT_PRES, ATTR_MOD],
        semantic: Semantic::Preserving,
        syntax: Syntax::Preserving,
        noise: Noise::Noiseless,
        evidence_count: 10,
        footnotes: &[],
    },
    Row {
        id: PatternId::P6ValueModulation,
        name: "Value Modulation",
        alias: None,
        context: &[STORAGE, NON_PAYLOAD, STRUCT_PRES, ATTR_MOD],
        semantic: Semantic::Modifying,
        syntax: Syntax::Preserving,
        noise: Noise::Conditional,
        evidence_count: 13,
        footnotes: &[NOTE_F],
    },
    Row {
        id: PatternId::P6aCase,
        name: "Case",
        alias: None,
        context: &[
            STORAGE,
            NON_PAYLOAD,
            STRUCT_PRES,
            ATTR_MOD,
            "Value Modulation",
        ],
        semantic: Semantic::Preserving,
        syntax: Syntax::Preserving,
        noise: Noise::Noiseless,
        evidence_count: 2,
        footnotes: &[],
    },
    Row {
        id: PatternId::P6bLsb,
        name: "Least Significant Bit",
        alias: Some("LSB"),
        context: &[
            STORAGE,
            NON_PAYLOAD,
            STRUCT_PRES,
            ATTR_MOD,
            "Value Modulation",
        ],
        semantic: Semantic::Modifying,
        syntax: Syntax::Preserving,
        noise: Noise::Noisy,
        evidence_count: 6,
        footnotes: &[],
    },
    Row {
        id: PatternId::P7ReservedUnused,
        name: "Reserved/Unused",
        alias: None,
        context: &[STORAGE, NON_PAYLOAD, STRUCT_PRES, ATTR_MOD],
        semantic: Semantic::Conditional,
        syntax: Syntax::Preserving,
        noise: Noise::Noiseless,
        evidence_count: 24,
        footnotes: &[NOTE_C],
    },
    Row {
        id: PatternId::P8InterArrivalTime,
        name: "Inter-arrival Time",
        alias: None,
        context: &[TIMING],
        semantic: Semantic::Preserving,
        syntax: Syntax::NotApplicable,
        noise: Noise::Noisy,
        evidence_count: 8,
        footnotes: &[],
    },
    Row {
        id: PatternId::P9Rate,
        name: "Rate",
        alias: Some("Throughput"),
        context: &[TIMING],
        semantic: Semantic::Preserving,
        syntax: Syntax::NotApplicable,
        noise: Noise::Noisy,
        evidence_count: 2,
        footnotes: &[],
    },
    Row {
        id: PatternId::P10PduOrder,
        name: "PDU Order",
        alias: None,
        context: &[TIMING],
        semantic: Semantic::Conditional,
        syntax: Syntax::NotApplicable,
        noise: Noise::Noisy,
        evidence_count: 6,
        footnotes: &[NOTE_D],
    },
    Row {
        id: PatternId::P11Retransmission,
        name: "Re-Transmission",
        alias: None,
        context: &[TIMING],
        semantic: Semantic::Preserving,
        syntax: Syntax::NotApplicable,
        noise: Noise::Noisy,
        evidence_count: 2,
        footnotes: &[],
    },
];

pub fn descriptors() -> Vec<PatternDescriptor> {
    ROWS.iter()
        .map(|r| PatternDescriptor {
            id: r.id,
            name: r.name.to_string(),
            alias: r.alias.map(str::to_string),
            context_path: r.context.iter().map(|s| s.to_string()).collect(),
            semantic: r.semantic,
            syntax: r.syntax,
            noise: r.noise,
            evidence_count: r.evidence_count,
            footnotes: r.footnotes.iter().map(|s| s.to_string()).collect(),
        })
        .collect()
}

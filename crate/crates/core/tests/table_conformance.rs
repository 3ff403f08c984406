//! Conformance of the codecs to the catalog's categorization table, plus
//! worked single-value examples for the timing patterns.

use cct_core::bits::Bits;
use cct_core::catalog::{descriptor, PatternId, Semantic, Syntax};
use cct_core::codecs::{self, CovertMessage};
use cct_core::protocol::{builtin_schema, make_carrier, IatModel, PduStream};
use cct_core::variation::{default_settings, SettingsEntries, VariationSettings};

fn carrier(proto: &str, n: usize) -> PduStream {
    let schema = builtin_schema(proto).unwrap();
    make_carrier(&schema, n, &IatModel::Constant(2500), 7).unwrap()
}

#[test]
fn syntax_preserving_patterns_leave_structure_alone() {
    let catalog = default_settings();
    for ((pattern, protocol), settings) in &catalog.entries {
        if pattern.is_timing() {
            continue;
        }
        let d = descriptor(*pattern);
        let c = carrier(protocol.trim_end_matches("_like"), 12);
        let cap = codecs::capacity(*pattern, settings, &c).unwrap();
        let message = CovertMessage::random(cap.min(48), 0x7ab);
        let out = codecs::embed(*pattern, settings, &message, &c).unwrap();
        if d.syntax == Syntax::Preserving {
            assert_eq!(out.stream.len(), c.len(), "({pattern}, {protocol})");
            for (a, b) in c.pdus.iter().zip(out.stream.pdus.iter()) {
                assert_eq!(
                    a.options.len(),
                    b.options.len(),
                    "({pattern}, {protocol}): option count changed"
                );
                assert_eq!(
                    a.payload.len(),
                    b.payload.len(),
                    "({pattern}, {protocol}): payload size changed"
                );
            }
        }
    }
}

#[test]
fn semantic_preserving_storage_patterns_stay_valid() {
    // Deliberate corruption is exempt: those PDUs are meant to fail.
    let catalog = default_settings();
    for ((pattern, protocol), settings) in &catalog.entries {
        if pattern.is_timing() || *pattern == PatternId::P4CorruptionLoss {
            continue;
        }
        let d = descriptor(*pattern);
        if d.semantic != Semantic::Preserving {
            continue;
        }
        let c = carrier(protocol.trim_end_matches("_like"), 12);
        let cap = codecs::capacity(*pattern, settings, &c).unwrap();
        let message = CovertMessage::random(cap.min(48), 0x5e3);
        let out = codecs::embed(*pattern, settings, &message, &c).unwrap();
        assert!(
            out.stream.validate().is_empty(),
            "({pattern}, {protocol}): {:?}",
            out.stream.validate()
        );
    }
}

#[test]
fn gap_symbols_produce_exact_timestamps() {
    // d0=1000, d1=3000, message 01: gaps 1000 then 3000 from t=0.
    let settings = VariationSettings {
        pattern: PatternId::P8InterArrivalTime,
        protocol: "ipv4_like".into(),
        entries: SettingsEntries {
            values_allowed: Some(vec![1000, 3000]),
            min_ipg: Some(100),
            max_ipg: Some(10_000),
            ..Default::default()
        },
    };
    let c = carrier("ipv4", 3);
    let message = CovertMessage::new(Bits::from_uint(0b01, 2));
    let out = codecs::embed(PatternId::P8InterArrivalTime, &settings, &message, &c).unwrap();
    let ts: Vec<u64> = out.stream.pdus.iter().map(|p| p.timestamp_us).collect();
    assert_eq!(ts, vec![0, 1000, 4000]);

    // Threshold decode at (d0+d1)/2 = 2000: a 1400 us gap reads as zero.
    let mut shifted = out.stream.clone();
    shifted.pdus[1].timestamp_us = 0;
    shifted.pdus[2].timestamp_us = 1400;
    let back = codecs::extract(PatternId::P8InterArrivalTime, &settings, &shifted).unwrap();
    assert!(!back.bits.get(1));

    // Empty message leaves timestamps untouched.
    let empty = CovertMessage::new(Bits::zeroed(0));
    let out = codecs::embed(PatternId::P8InterArrivalTime, &settings, &empty, &c).unwrap();
    assert_eq!(out.stream, c);
}

#[test]
fn retransmission_examples() {
    let catalog = default_settings();
    let settings = catalog
        .get(PatternId::P11Retransmission, "ipv4_like")
        .unwrap()
        .clone();

    // One set bit on a one-PDU carrier duplicates it.
    let c = carrier("ipv4", 1);
    let one = CovertMessage::new(Bits::from_uint(1, 1));
    let out = codecs::embed(PatternId::P11Retransmission, &settings, &one, &c).unwrap();
    assert_eq!(out.stream.len(), 2);
    assert_eq!(out.stream.pdus[0].header, out.stream.pdus[1].header);
    assert_eq!(out.stream.pdus[0].seq, out.stream.pdus[1].seq);

    // All-zero message is the identity.
    let c = carrier("ipv4", 4);
    let zeros = CovertMessage::new(Bits::zeroed(4));
    let out = codecs::embed(PatternId::P11Retransmission, &settings, &zeros, &c).unwrap();
    assert_eq!(out.stream, c);

    // Stream length is the carrier plus the popcount of the message.
    let c = carrier("ipv4", 64);
    let message = CovertMessage::random(64, 0xd0b);
    let out = codecs::embed(PatternId::P11Retransmission, &settings, &message, &c).unwrap();
    assert_eq!(out.stream.len(), 64 + message.bits.count_ones());
    let back = codecs::extract(PatternId::P11Retransmission, &settings, &out.stream).unwrap();
    assert_eq!(back.bits.prefix(64), message.bits);
}

#[test]
fn detector_scores_rise_as_the_timing_guard_shrinks() {
    // Fixed seeds, three guard levels: less guard jitter means fewer
    // distinct gap values, so regularity scores must not decrease.
    use cct_core::countermeasures::detectors::{detect_compressibility, detect_epsilon_similarity};
    let mut last_comp = f64::NEG_INFINITY;
    let mut last_eps = f64::NEG_INFINITY;
    for guard in [400u64, 200, 0] {
        let settings = VariationSettings {
            pattern: PatternId::P8InterArrivalTime,
            protocol: "ipv4_like".into(),
            entries: SettingsEntries {
                values_allowed: Some(vec![2000, 6000]),
                min_ipg: Some(500),
                max_ipg: Some(20_000),
                granularity: Some(guard),
                distribution_ipg: Some(vec![180, 420, 760, 1030, 1440, 2100, 2870, 3900]),
                whiten_seed: Some(17),
                ..Default::default()
            },
        };
        let c = carrier("ipv4", 1001);
        let message = CovertMessage::random(1000, 0x9a9);
        let out = codecs::embed(PatternId::P8InterArrivalTime, &settings, &message, &c).unwrap();
        let iats = out.stream.iats();
        let comp = detect_compressibility(&iats, 100).unwrap();
        let eps = detect_epsilon_similarity(&iats, 0.02).unwrap();
        assert!(
            comp >= last_comp,
            "compressibility fell to {comp} at guard {guard}"
        );
        assert!(
            eps >= last_eps,
            "epsilon-similarity fell to {eps} at guard {guard}"
        );
        last_comp = comp;
        last_eps = eps;
    }
}

#[test]
fn whitened_field_passes_monobit_test_at_scale() {
    // >= 10^4 embedded bits: |ones - zeros| within 4 sqrt(bits).
    let catalog = default_settings();
    let settings = catalog
        .get(PatternId::P5RandomValue, "ipv6_like")
        .unwrap()
        .clone();
    assert!(settings.entries.whiten_seed.is_some());
    let c = carrier("ipv6", 512); // 512 x 20 bits = 10240
    let n = 10_240usize;
    let message = CovertMessage::new(Bits::zeroed(n));
    let out = codecs::embed(PatternId::P5RandomValue, &settings, &message, &c).unwrap();
    assert_eq!(out.bits_embedded, n);
    let ones: usize = out
        .stream
        .pdus
        .iter()
        .map(|p| p.read_field("flow_label").unwrap().count_ones())
        .sum();
    let zeros = n - ones;
    let bound = 4.0 * (n as f64).sqrt();
    assert!(
        (ones as f64 - zeros as f64).abs() <= bound,
        "monobit imbalance {ones}/{zeros} beyond {bound}"
    );
}

//! Element sequence coding: full permutation of the element list, marker
//! position within it, or the number of elements transferred.
//!
//! The canonical order is ascending element id; a PDU's elements are
//! re-sorted to it before a permutation is applied, so the arrangement on
//! the wire is the whole symbol.

use super::{perm, SlotEffect, TimingAction};
use crate::bits::{BitCursor, Bits};
use crate::error::{Error, Result};
use crate::protocol::{Pdu, PduElement};
use crate::variation::VariationSettings;

fn canonical_elements(pdu: &Pdu, n: usize, slot: usize) -> Result<Vec<PduElement>> {
    let mut elems = pdu.options.clone();
    elems.sort_by_key(|e| e.id);
    let distinct = elems.windows(2).all(|w| w[0].id != w[1].id);
    if elems.len() != n || !distinct {
        return Err(Error::capacity(format!(
            "element permutation needs exactly {n} distinct elements, found {}",
            pdu.options.len()
        )));
    }
    let _ = slot;
    Ok(elems)
}

pub(super) fn embed_full(
    settings: &VariationSettings,
    slot: usize,
    pdu: &mut Pdu,
    cursor: &mut BitCursor,
) -> Result<SlotEffect> {
    let n = settings.entries.min_elements.unwrap_or(2) as usize;
    let k = perm::order_bits(n);
    let canonical = canonical_elements(pdu, n, slot)?;
    let Some((value, real)) = cursor.take(k.min(64)) else {
        return Ok(SlotEffect {
            bits: 0,
            action: TimingAction::None,
            site: String::new(),
        });
    };
    let arrangement = perm::decode(value, n);
    let reordered: Vec<PduElement> = arrangement.iter().map(|&i| canonical[i].clone()).collect();
    *pdu = pdu.with_options(reordered);
    Ok(SlotEffect {
        bits: real,
        action: TimingAction::None,
        site: "element-order".into(),
    })
}

pub(super) fn extract_full(settings: &VariationSettings, pdu: &Pdu, out: &mut Bits) -> Result<()> {
    let n = settings.entries.min_elements.unwrap_or(2) as usize;
    let k = perm::order_bits(n);
    let mut sorted: Vec<u16> = pdu.options.iter().map(|e| e.id).collect();
    sorted.sort_unstable();
    let distinct = sorted.windows(2).all(|w| w[0] != w[1]);
    if pdu.options.len() != n || !distinct {
        out.push_uint(0, k);
        return Ok(());
    }
    let arrangement: Vec<usize> = pdu
        .options
        .iter()
        .map(|e| sorted.binary_search(&e.id).unwrap())
        .collect();
    let rank = perm::encode(&arrangement);
    out.push_uint(perm::fold_to_width(rank, k), k);
    Ok(())
}

pub(super) fn embed_position(
    settings: &VariationSettings,
    slot: usize,
    pdu: &mut Pdu,
    cursor: &mut BitCursor,
) -> Result<SlotEffect> {
    let n = settings.entries.min_elements.unwrap_or(2) as usize;
    let marker = settings.entries.element_id.unwrap_or(0);
    let k = perm::floor_log2(n as u64);
    let canonical = canonical_elements(pdu, n, slot)?;
    let Some(marker_idx) = canonical.iter().position(|e| e.id == marker) else {
        return Err(Error::capacity(format!(
            "marker element {marker} absent from the element list"
        )));
    };
    let Some((value, real)) = cursor.take(k.min(64)) else {
        return Ok(SlotEffect {
            bits: 0,
            action: TimingAction::None,
            site: String::new(),
        });
    };
    let mut rest: Vec<PduElement> = canonical
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != marker_idx)
        .map(|(_, e)| e.clone())
        .collect();
    rest.insert(value as usize, canonical[marker_idx].clone());
    *pdu = pdu.with_options(rest);
    Ok(SlotEffect {
        bits: real,
        action: TimingAction::None,
        site: "element-position".into(),
    })
}

pub(super) fn extract_position(
    settings: &VariationSettings,
    pdu: &Pdu,
    out: &mut Bits,
) -> Result<()> {
    let n = settings.entries.min_elements.unwrap_or(2) as usize;
    let marker = settings.entries.element_id.unwrap_or(0);
    let k = perm::floor_log2(n as u64);
    let pos = pdu.options.iter().position(|e| e.id == marker).unwrap_or(0);
    out.push_uint((pos as u64).min((1u64 << k) - 1), k);
    Ok(())
}

/// Vocabulary the count submode emits from: schema defaults when they are
/// plentiful enough, synthetic empty elements otherwise, rendered tokens
/// for textual schemas.
fn count_vocabulary(pdu: &Pdu, max: usize) -> Vec<PduElement> {
    let schema = &pdu.schema;
    if let Some(t) = &schema.textual {
        return (0..max.min(t.tokens.len()))
            .map(|i| PduElement::render_token(schema, i as u16, &t.tokens[i].default_value))
            .collect();
    }
    let desc = schema.options.as_ref().expect("validated");
    if desc.defaults.len() >= max {
        desc.defaults[..max]
            .iter()
            .map(|(id, payload)| PduElement::new(*id, payload.clone()))
            .collect()
    } else {
        (0..max)
            .map(|j| PduElement::new(desc.id_min + j as u16, Vec::new()))
            .collect()
    }
}

pub(super) fn embed_count(
    settings: &VariationSettings,
    pdu: &mut Pdu,
    cursor: &mut BitCursor,
) -> Result<SlotEffect> {
    let lo = settings.entries.min_elements.unwrap_or(0) as u64;
    let hi = settings.entries.max_elements.unwrap_or(0) as u64;
    let k = perm::floor_log2(hi - lo + 1);
    let Some((value, real)) = cursor.take(k.min(64)) else {
        return Ok(SlotEffect {
            bits: 0,
            action: TimingAction::None,
            site: String::new(),
        });
    };
    let count = (lo + value) as usize;
    let vocab = count_vocabulary(pdu, hi as usize);
    *pdu = pdu.with_options(vocab[..count].to_vec());
    Ok(SlotEffect {
        bits: real,
        action: TimingAction::None,
        site: "element-count".into(),
    })
}

pub(super) fn extract_count(settings: &VariationSettings, pdu: &Pdu, out: &mut Bits) -> Result<()> {
    let lo = settings.entries.min_elements.unwrap_or(0) as u64;
    let hi = settings.entries.max_elements.unwrap_or(0) as u64;
    let k = perm::floor_log2(hi - lo + 1);
    let count = pdu.options.len() as u64;
    let value = count.saturating_sub(lo).min((1u64 << k) - 1);
    out.push_uint(value, k);
    Ok(())
}

#[cfg(test)]
mod tests {
    use crate::catalog::PatternId;
    use crate::codecs::test_util::*;
    use crate::codecs::{capacity, embed, extract, CovertMessage};
    use crate::variation::SettingsEntries;

    #[test]
    fn full_mode_round_trips_on_dhcp_options() {
        let s = settings_for(PatternId::P2Sequence, "dhcp");
        let c = carrier("dhcp", 10);
        // 4 elements -> floor(log2 24) = 4 bits per PDU.
        assert_eq!(capacity(PatternId::P2Sequence, &s, &c).unwrap(), 40);
        let msg = CovertMessage::random(40, 77);
        round_trip(PatternId::P2Sequence, &s, &msg, &c);
    }

    #[test]
    fn full_mode_round_trips_on_http_tokens() {
        let s = settings_for(PatternId::P2Sequence, "http");
        let c = carrier("http", 6);
        // 6 tokens -> floor(log2 720) = 9 bits per PDU.
        assert_eq!(capacity(PatternId::P2Sequence, &s, &c).unwrap(), 54);
        let msg = CovertMessage::random(54, 78);
        round_trip(PatternId::P2Sequence, &s, &msg, &c);
    }

    #[test]
    fn zero_message_keeps_canonical_order() {
        let s = settings_for(PatternId::P2Sequence, "dhcp");
        let c = carrier("dhcp", 2);
        let msg = CovertMessage::new(crate::bits::Bits::zeroed(8));
        let out = embed(PatternId::P2Sequence, &s, &msg, &c).unwrap();
        let ids: Vec<u16> = out.stream.pdus[0].options.iter().map(|e| e.id).collect();
        assert_eq!(ids, vec![1, 3, 6, 51]); // rank 0 = ascending ids
    }

    #[test]
    fn position_mode_places_marker() {
        let s = settings_for(PatternId::P2aPosition, "dhcp");
        let c = carrier("dhcp", 8);
        // 4 elements -> 2 bits per PDU.
        assert_eq!(capacity(PatternId::P2aPosition, &s, &c).unwrap(), 16);
        let msg = CovertMessage::from_hex("b4e2").unwrap();
        let out = round_trip(PatternId::P2aPosition, &s, &msg, &c);
        // First symbol 10b = 2: marker id 51 sits at index 2.
        let ids: Vec<u16> = out.stream.pdus[0].options.iter().map(|e| e.id).collect();
        assert_eq!(ids.iter().position(|&i| i == 51), Some(2));
    }

    #[test]
    fn count_mode_two_bits() {
        // Min=1, Max=4 -> 2 bits per PDU; symbol 11b emits 4 elements.
        let s = settings_for(PatternId::P2bNumElements, "dhcp");
        let c = carrier("dhcp", 4);
        let msg = CovertMessage::from_hex("f").unwrap(); // 1111
        let out = round_trip(PatternId::P2bNumElements, &s, &msg, &c);
        assert_eq!(out.stream.pdus[0].options.len(), 4);
        assert_eq!(out.stream.pdus[1].options.len(), 4);
    }

    #[test]
    fn count_mode_synthesizes_elements_when_no_defaults() {
        let s = settings_for(PatternId::P2bNumElements, "ipv4");
        let c = carrier("ipv4", 6);
        let msg = CovertMessage::random(12, 5);
        let out = round_trip(PatternId::P2bNumElements, &s, &msg, &c);
        assert!(out.stream.validate().is_empty());
    }

    #[test]
    fn too_few_elements_is_a_capacity_error() {
        let mut s = settings_for(PatternId::P2Sequence, "dhcp");
        s.entries.min_elements = Some(6);
        s.entries.max_elements = Some(6);
        let c = carrier("dhcp", 2); // carriers ship 4 options
        let msg = CovertMessage::random(4, 2);
        match embed(PatternId::P2Sequence, &s, &msg, &c) {
            Err(crate::error::Error::Capacity(m)) => assert!(m.contains("slot 0"), "{m}"),
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn mangled_streams_decode_to_folded_symbols() {
        let s = settings_for(PatternId::P2Sequence, "dhcp");
        let c = carrier("dhcp", 3);
        let stripped = crate::protocol::PduStream {
            schema: c.schema.clone(),
            pdus: c.pdus.iter().map(|p| p.with_options(vec![])).collect(),
        };
        let got = extract(PatternId::P2Sequence, &s, &stripped).unwrap();
        assert_eq!(got.bits.len(), 12);
        assert_eq!(got.bits.count_ones(), 0);
    }

    #[test]
    fn non_power_of_two_position_count_rejected() {
        let mut s = settings_for(PatternId::P2aPosition, "dhcp");
        s.entries.min_elements = Some(3);
        s.entries.max_elements = Some(3);
        let schema = crate::protocol::builtin_schema("dhcp_like").unwrap();
        assert!(s.validate(&schema).is_err());
        let _ = SettingsEntries::default();
    }
}

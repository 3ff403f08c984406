//! PDU corruption/loss: a set bit either invalidates the slot PDU's
//! checksum (corrupt submode) or removes the PDU outright (drop submode).
//!
//! Extraction is sequence-number aligned: slot `s` is the PDU generated
//! with seq `s`, so receivers decode the same positions the sender used
//! even after wardens discard corrupted PDUs. In drop submode the final
//! carrier PDU is never dropped; it delimits the stream.

use super::{CovertMessage, EmbedResult, MapEntry, SlotEffect, TimingAction};
use crate::bits::{BitCursor, Bits};
use crate::error::Result;
use crate::protocol::{validate_pdu, FieldKindTag, Pdu, PduStream, Violation};
use crate::variation::VariationSettings;

pub(super) fn invalidate_checksum(pdu: &mut Pdu) -> Result<()> {
    let field = pdu
        .schema
        .fields
        .iter()
        .find(|f| f.kind.tag() == FieldKindTag::Checksum)
        .expect("validated: corrupt submode needs a checksum field")
        .clone();
    let current = pdu
        .header
        .read_uint(field.offset as usize, field.len as usize);
    let flipped = Bits::from_uint(current ^ 0xffff, field.len as usize);
    *pdu = pdu.write_field_raw(&field.name, &flipped)?;
    Ok(())
}

fn checksum_ok(pdu: &Pdu) -> bool {
    !validate_pdu(pdu)
        .iter()
        .any(|v| matches!(v, Violation::ChecksumMismatch { .. }))
}

/// Corrupt-submode slot function for combination/hopping engines.
pub(super) fn embed_slot(
    settings: &VariationSettings,
    pdu: &mut Pdu,
    cursor: &mut BitCursor,
) -> Result<SlotEffect> {
    debug_assert_eq!(settings.token()?, "corrupt");
    let _ = pdu;
    let Some((bit, _)) = cursor.take(1) else {
        return Ok(SlotEffect {
            bits: 0,
            action: TimingAction::None,
            site: String::new(),
        });
    };
    Ok(SlotEffect {
        bits: 1,
        action: if bit == 1 {
            TimingAction::DeferCorrupt
        } else {
            TimingAction::None
        },
        site: "checksum".into(),
    })
}

pub(super) fn extract_slot(pdu: &Pdu, out: &mut Bits) -> Result<()> {
    out.push(!checksum_ok(pdu));
    Ok(())
}

pub(super) fn embed(
    settings: &VariationSettings,
    message: &CovertMessage,
    carrier: &PduStream,
) -> Result<EmbedResult> {
    let drop_mode = settings.token()? == "drop";
    let mut cursor = BitCursor::new(&message.bits);
    let mut pdus = Vec::with_capacity(carrier.len());
    let mut map = Vec::new();
    let last_slot = carrier.len().saturating_sub(1);
    for (t, pdu) in carrier.pdus.iter().enumerate() {
        let eligible = !(drop_mode && t == last_slot);
        let taken = if eligible { cursor.take(1) } else { None };
        match taken {
            Some((bit, _)) => {
                map.push(MapEntry {
                    pdu_seq: pdu.seq,
                    start_bit: cursor.position() - 1,
                    bit_count: 1,
                    site: if drop_mode {
                        "dropped-slot"
                    } else {
                        "checksum"
                    }
                    .into(),
                });
                if bit == 1 {
                    if drop_mode {
                        continue; // remove this PDU
                    }
                    let mut p = pdu.clone();
                    invalidate_checksum(&mut p)?;
                    pdus.push(p);
                } else {
                    pdus.push(pdu.clone());
                }
            }
            None => pdus.push(pdu.clone()),
        }
    }
    Ok(EmbedResult {
        stream: PduStream {
            schema: carrier.schema.clone(),
            pdus,
        },
        bits_embedded: cursor.position(),
        map,
    })
}

pub(super) fn extract(settings: &VariationSettings, stream: &PduStream) -> Result<CovertMessage> {
    let drop_mode = settings.token()? == "drop";
    let mut out = Bits::zeroed(0);
    let Some(max_seq) = stream.pdus.iter().map(|p| p.seq).max() else {
        return Ok(CovertMessage::new(out));
    };
    let slots = if drop_mode { max_seq } else { max_seq + 1 };
    for s in 0..slots {
        let present = stream.pdus.iter().find(|p| p.seq == s);
        match (drop_mode, present) {
            (true, Some(_)) => out.push(false),
            (true, None) => out.push(true),
            (false, Some(p)) => out.push(!checksum_ok(p)),
            (false, None) => out.push(false), // lost in transit: neutral zero
        }
    }
    Ok(CovertMessage::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::PatternId;
    use crate::codecs::test_util::*;
    use crate::codecs::{capacity, embed as embed_any, CovertMessage};

    #[test]
    fn corrupt_marks_exactly_the_one_bits() {
        let s = settings_for(PatternId::P4CorruptionLoss, "ipv4");
        let c = carrier("ipv4", 2);
        let msg = CovertMessage::from_hex("8").unwrap().bits.prefix(2); // 10
        let msg = CovertMessage::new(msg);
        let out = embed_any(PatternId::P4CorruptionLoss, &s, &msg, &c).unwrap();
        assert!(!validate_pdu(&out.stream.pdus[0]).is_empty());
        assert!(validate_pdu(&out.stream.pdus[1]).is_empty());
        round_trip(PatternId::P4CorruptionLoss, &s, &msg, &c);
    }

    #[test]
    fn drop_removes_pdus_and_leaves_seq_gaps() {
        let s = settings_for(PatternId::P4CorruptionLoss, "ipv6");
        let c = carrier("ipv6", 4);
        assert_eq!(capacity(PatternId::P4CorruptionLoss, &s, &c).unwrap(), 3);
        let msg = CovertMessage::new(crate::bits::Bits::from_uint(0b1, 1));
        let out = embed_any(PatternId::P4CorruptionLoss, &s, &msg, &c).unwrap();
        assert_eq!(out.stream.len(), 3);
        assert_eq!(out.stream.pdus[0].seq, 1);
        round_trip(PatternId::P4CorruptionLoss, &s, &msg, &c);
    }

    #[test]
    fn all_zero_message_is_identity() {
        for proto in ["ipv4", "ipv6"] {
            let s = settings_for(PatternId::P4CorruptionLoss, proto);
            let c = carrier(proto, 4);
            let msg = CovertMessage::new(crate::bits::Bits::zeroed(3));
            let out = embed_any(PatternId::P4CorruptionLoss, &s, &msg, &c).unwrap();
            assert_eq!(out.stream, c);
        }
    }

    #[test]
    fn random_messages_round_trip_both_submodes() {
        for proto in ["ipv4", "ipv6", "tcp"] {
            let s = settings_for(PatternId::P4CorruptionLoss, proto);
            let c = carrier(proto, 40);
            let cap = capacity(PatternId::P4CorruptionLoss, &s, &c).unwrap();
            let msg = CovertMessage::random(cap, 17);
            round_trip(PatternId::P4CorruptionLoss, &s, &msg, &c);
        }
    }
}

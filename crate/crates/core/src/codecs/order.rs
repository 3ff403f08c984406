//! PDU order: each window of `Window` consecutive PDUs is transmitted in a
//! permutation whose Lehmer rank is the message symbol.
//!
//! Timestamps are reassigned to the window's sorted originals so only the
//! order changes, and seq fields keep their values: the receiver recovers
//! the intended order from seq and ranks the observed arrangement.

use super::{perm, CovertMessage, EmbedResult, MapEntry};
use crate::bits::{BitCursor, Bits};
use crate::error::Result;
use crate::protocol::{Pdu, PduStream};
use crate::variation::VariationSettings;

pub(super) fn embed(
    settings: &VariationSettings,
    message: &CovertMessage,
    carrier: &PduStream,
) -> Result<EmbedResult> {
    let w = settings.entries.window.unwrap_or(2) as usize;
    let k = perm::order_bits(w);
    let mut cursor = BitCursor::new(&message.bits);
    let mut pdus: Vec<Pdu> = Vec::with_capacity(carrier.len());
    let mut map = Vec::new();
    let mut iter = carrier.pdus.chunks_exact(w);
    for (window_index, chunk) in iter.by_ref().enumerate() {
        match cursor.take(k.min(64)) {
            Some((value, real)) => {
                let arrangement = perm::decode(value, w);
                let mut slot_ts: Vec<u64> = chunk.iter().map(|p| p.timestamp_us).collect();
                slot_ts.sort_unstable();
                for (j, &src) in arrangement.iter().enumerate() {
                    let mut p = chunk[src].clone();
                    p.timestamp_us = slot_ts[j];
                    pdus.push(p);
                }
                map.push(MapEntry {
                    pdu_seq: chunk[0].seq,
                    start_bit: cursor.position() - real,
                    bit_count: real,
                    site: format!("order window {window_index}"),
                });
            }
            None => pdus.extend(chunk.iter().cloned()),
        }
    }
    pdus.extend(iter.remainder().iter().cloned());
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
    let w = settings.entries.window.unwrap_or(2) as usize;
    let k = perm::order_bits(w);
    let mut out = Bits::zeroed(0);
    for chunk in stream.pdus.chunks_exact(w) {
        let mut seqs: Vec<u64> = chunk.iter().map(|p| p.seq).collect();
        seqs.sort_unstable();
        let distinct = seqs.windows(2).all(|x| x[0] != x[1]);
        if !distinct {
            out.push_uint(0, k);
            continue;
        }
        let arrangement: Vec<usize> = chunk
            .iter()
            .map(|p| seqs.binary_search(&p.seq).unwrap())
            .collect();
        let rank = perm::encode(&arrangement);
        out.push_uint(perm::fold_to_width(rank, k), k);
    }
    Ok(CovertMessage::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::PatternId;
    use crate::codecs::test_util::*;
    use crate::codecs::{embed as embed_any, extract as extract_any, CovertMessage};
    use crate::variation::{SettingsEntries, VariationSettings};

    fn window_settings(proto: &str, w: u64) -> VariationSettings {
        VariationSettings {
            pattern: PatternId::P10PduOrder,
            protocol: format!("{proto}_like"),
            entries: SettingsEntries {
                window: Some(w),
                ..Default::default()
            },
        }
    }

    #[test]
    fn pair_swap_for_a_single_set_bit() {
        let s = window_settings("ipv4", 2);
        let c = carrier("ipv4", 2);
        let msg = CovertMessage::new(Bits::from_uint(1, 1));
        let out = embed_any(PatternId::P10PduOrder, &s, &msg, &c).unwrap();
        let seqs: Vec<u64> = out.stream.pdus.iter().map(|p| p.seq).collect();
        assert_eq!(seqs, vec![1, 0]);
        // Timestamps stay in their slots.
        assert!(out.stream.pdus[0].timestamp_us <= out.stream.pdus[1].timestamp_us);
        round_trip(PatternId::P10PduOrder, &s, &msg, &c);
    }

    #[test]
    fn zero_message_preserves_order() {
        let s = settings_for(PatternId::P10PduOrder, "ipv4");
        let c = carrier("ipv4", 8);
        let msg = CovertMessage::new(Bits::zeroed(8));
        let out = embed_any(PatternId::P10PduOrder, &s, &msg, &c).unwrap();
        assert_eq!(out.stream, c);
    }

    #[test]
    fn random_windows_round_trip() {
        let s = settings_for(PatternId::P10PduOrder, "tcp");
        let c = carrier("tcp", 40);
        let msg = CovertMessage::random(40, 19);
        round_trip(PatternId::P10PduOrder, &s, &msg, &c);
    }

    #[test]
    fn partial_final_window_is_left_alone() {
        let s = settings_for(PatternId::P10PduOrder, "ipv4");
        let c = carrier("ipv4", 10); // window 4: two windows + 2 spare
        let msg = CovertMessage::random(8, 2);
        let out = embed_any(PatternId::P10PduOrder, &s, &msg, &c).unwrap();
        assert_eq!(out.stream.pdus[8].seq, 8);
        assert_eq!(out.stream.pdus[9].seq, 9);
    }

    #[test]
    fn adversarial_arrangement_folds_into_width() {
        // Reverse a window by hand: rank 23 folds to 1011b in four bits.
        let s = settings_for(PatternId::P10PduOrder, "ipv4");
        let c = carrier("ipv4", 4);
        let mut reversed = c.clone();
        reversed.pdus.reverse();
        let ts: Vec<u64> = c.pdus.iter().map(|p| p.timestamp_us).collect();
        for (p, t) in reversed.pdus.iter_mut().zip(ts) {
            p.timestamp_us = t;
        }
        let got = extract_any(PatternId::P10PduOrder, &s, &reversed).unwrap();
        assert_eq!(got.bits.read_uint(0, 4), 0b1011);
    }
}

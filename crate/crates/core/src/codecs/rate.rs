//! Rate modulation: each fixed-length time window holds r0 or r1 PDUs.
//!
//! The embedder re-times carrier PDUs into consecutive windows, consuming
//! r0 or r1 of them per message bit; surplus carrier PDUs beyond the
//! message are thinned. Capacity is floor(n / r1) windows so even an
//! all-ones message never runs out of PDUs, and the codec never has to
//! replicate. Decoding counts PDUs per window and picks the nearer rate.

use super::{CovertMessage, EmbedResult, MapEntry};
use crate::bits::{BitCursor, Bits};
use crate::error::Result;
use crate::protocol::{Pdu, PduStream};
use crate::variation::VariationSettings;

pub(super) fn embed(
    settings: &VariationSettings,
    message: &CovertMessage,
    carrier: &PduStream,
) -> Result<EmbedResult> {
    let rates = settings.values_allowed()?;
    let (r0, r1) = (rates[0] as usize, rates[1] as usize);
    let window_us = settings.entries.window.unwrap_or(1);
    let capacity = carrier.len() / r1;

    let mut cursor = BitCursor::new(&message.bits);
    let mut source = carrier.pdus.iter();
    let mut pdus: Vec<Pdu> = Vec::new();
    let mut map = Vec::new();
    if message.is_empty() {
        return Ok(EmbedResult {
            stream: carrier.clone(),
            bits_embedded: 0,
            map,
        });
    }
    for w in 0..capacity {
        let Some((bit, _)) = cursor.take(1) else {
            break;
        };
        let rate = if bit == 1 { r1 } else { r0 };
        let base = w as u64 * window_us;
        let first_seq = source.clone().next().map(|p| p.seq).unwrap_or(0);
        for j in 0..rate {
            let mut p = source
                .next()
                .expect("capacity bound keeps PDUs available")
                .clone();
            p.timestamp_us = base + (j as u64 * window_us) / rate as u64;
            pdus.push(p);
        }
        map.push(MapEntry {
            pdu_seq: first_seq,
            start_bit: cursor.position() - 1,
            bit_count: 1,
            site: format!("window {w}"),
        });
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
    let rates = settings.values_allowed()?;
    let (r0, r1) = (rates[0], rates[1]);
    let window_us = settings.entries.window.unwrap_or(1).max(1);
    let mut out = Bits::zeroed(0);
    let Some(last_ts) = stream.pdus.iter().map(|p| p.timestamp_us).max() else {
        return Ok(CovertMessage::new(out));
    };
    let windows = last_ts / window_us + 1;
    for w in 0..windows {
        let lo = w * window_us;
        let hi = lo + window_us;
        let count = stream
            .pdus
            .iter()
            .filter(|p| p.timestamp_us >= lo && p.timestamp_us < hi)
            .count() as u64;
        if count == 0 {
            break;
        }
        out.push(count.abs_diff(r1) < count.abs_diff(r0));
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
    fn one_bit_fills_a_window_at_the_high_rate() {
        let s = settings_for(PatternId::P9Rate, "ipv4");
        let c = carrier("ipv4", 10);
        let msg = CovertMessage::new(Bits::from_uint(1, 1));
        let out = embed_any(PatternId::P9Rate, &s, &msg, &c).unwrap();
        assert_eq!(out.stream.len(), 5);
        assert!(out.stream.pdus.iter().all(|p| p.timestamp_us < 10000));
    }

    #[test]
    fn zero_bits_produce_low_rate_windows() {
        let s = settings_for(PatternId::P9Rate, "ipv4");
        let c = carrier("ipv4", 10);
        let msg = CovertMessage::new(Bits::zeroed(2));
        let out = embed_any(PatternId::P9Rate, &s, &msg, &c).unwrap();
        assert_eq!(out.stream.len(), 4); // two windows of two PDUs
        let w0 = out
            .stream
            .pdus
            .iter()
            .filter(|p| p.timestamp_us < 10000)
            .count();
        let w1 = out
            .stream
            .pdus
            .iter()
            .filter(|p| (10000..20000).contains(&p.timestamp_us))
            .count();
        assert_eq!((w0, w1), (2, 2));
    }

    #[test]
    fn thirty_two_random_bits_round_trip() {
        let s = settings_for(PatternId::P9Rate, "ipv4");
        let c = carrier("ipv4", 32 * 5);
        assert_eq!(capacity(PatternId::P9Rate, &s, &c).unwrap(), 32);
        let msg = CovertMessage::random(32, 14);
        round_trip(PatternId::P9Rate, &s, &msg, &c);
    }
}

//! Value modulation: pick one of n legal values, case-modulate a textual
//! token name, or drive the low-order bits of a field (directly or through
//! the two-level base scheme).

use super::{perm, SlotEffect, SpecState, TimingAction};
use crate::bits::{BitCursor, Bits};
use crate::error::Result;
use crate::protocol::Pdu;
use crate::variation::VariationSettings;
use rand::Rng;

fn none() -> SlotEffect {
    SlotEffect {
        bits: 0,
        action: TimingAction::None,
        site: String::new(),
    }
}

// --- values submode -------------------------------------------------------

pub(super) fn embed_values(
    settings: &VariationSettings,
    pdu: &mut Pdu,
    cursor: &mut BitCursor,
) -> Result<SlotEffect> {
    let values = settings.values_allowed()?.to_vec();
    let k = perm::floor_log2(values.len() as u64);
    let offset = settings.offset()? as usize;
    let len = settings.len_bits()? as usize;
    let Some((index, real)) = cursor.take(k.min(64)) else {
        return Ok(none());
    };
    let mut header = pdu.header.clone();
    header.write_uint(offset, len, values[index as usize]);
    pdu.header = header;
    pdu.recompute_derived();
    Ok(SlotEffect {
        bits: real,
        action: TimingAction::None,
        site: "value-select".into(),
    })
}

pub(super) fn extract_values(
    settings: &VariationSettings,
    pdu: &Pdu,
    out: &mut Bits,
) -> Result<()> {
    let values = settings.values_allowed()?;
    let k = perm::floor_log2(values.len() as u64);
    let offset = settings.offset()? as usize;
    let len = settings.len_bits()? as usize;
    let got = pdu.header.read_uint(offset, len);
    // Nearest legal value, so limited wardens degrade rather than wedge.
    let index = values
        .iter()
        .enumerate()
        .min_by_key(|(_, v)| v.abs_diff(got))
        .map(|(i, _)| i as u64)
        .unwrap_or(0);
    out.push_uint(index.min((1u64 << k) - 1), k);
    Ok(())
}

// --- case submode ---------------------------------------------------------

fn find_token(pdu: &Pdu, token: &str) -> Option<usize> {
    pdu.options.iter().position(|e| {
        e.token_parts()
            .and_then(|(name, _)| std::str::from_utf8(name).ok())
            .is_some_and(|n| n.eq_ignore_ascii_case(token))
    })
}

pub(super) fn embed_case(
    settings: &VariationSettings,
    slot: usize,
    pdu: &mut Pdu,
    cursor: &mut BitCursor,
) -> Result<SlotEffect> {
    let _ = slot;
    let token = settings.token()?;
    let Some(idx) = find_token(pdu, token) else {
        return Err(crate::error::Error::capacity(format!(
            "token {token:?} absent from the PDU"
        )));
    };
    let mut real = 0;
    let mut options = pdu.options.clone();
    let colon = options[idx]
        .payload
        .iter()
        .position(|&b| b == b':')
        .unwrap_or(options[idx].payload.len());
    for b in options[idx].payload[..colon].iter_mut() {
        if b.is_ascii_alphabetic() {
            match cursor.take(1) {
                Some((bit, _)) => {
                    *b = if bit == 1 {
                        b.to_ascii_uppercase()
                    } else {
                        b.to_ascii_lowercase()
                    };
                    real += 1;
                }
                None => break,
            }
        }
    }
    if real == 0 {
        return Ok(none());
    }
    *pdu = pdu.with_options(options);
    Ok(SlotEffect {
        bits: real,
        action: TimingAction::None,
        site: "token-case".into(),
    })
}

pub(super) fn extract_case(settings: &VariationSettings, pdu: &Pdu, out: &mut Bits) -> Result<()> {
    let token = settings.token()?;
    let k = token.chars().filter(|c| c.is_ascii_alphabetic()).count();
    match find_token(pdu, token) {
        Some(idx) => {
            let payload = &pdu.options[idx].payload;
            let colon = payload
                .iter()
                .position(|&b| b == b':')
                .unwrap_or(payload.len());
            let mut emitted = 0;
            for b in &payload[..colon] {
                if b.is_ascii_alphabetic() && emitted < k {
                    out.push(b.is_ascii_uppercase());
                    emitted += 1;
                }
            }
            for _ in emitted..k {
                out.push(false);
            }
        }
        None => out.push_uint(0, k),
    }
    Ok(())
}

// --- lsb submode ----------------------------------------------------------

pub(super) fn embed_lsb(
    settings: &VariationSettings,
    state: &mut SpecState,
    pdu: &mut Pdu,
    cursor: &mut BitCursor,
) -> Result<SlotEffect> {
    match settings.two_level() {
        Some((b0, b1, radius)) => {
            let offset = settings.offset()? as usize;
            let len = settings.len_bits()? as usize;
            let Some((bit, _)) = cursor.take(1) else {
                return Ok(none());
            };
            let base = if bit == 1 { b1 } else { b0 };
            let value = base + state.rng.gen_range(0..=radius);
            let mut header = pdu.header.clone();
            header.write_uint(offset, len, value);
            pdu.header = header;
            pdu.recompute_derived();
            Ok(SlotEffect {
                bits: 1,
                action: TimingAction::None,
                site: "two-level".into(),
            })
        }
        None => {
            // Plain low-order-bit overwrite: the target range is the low
            // bits themselves.
            let offset = settings.offset()? as usize;
            let len = settings.len_bits()? as usize;
            let Some(chunk) = cursor.take_bits(len) else {
                return Ok(none());
            };
            let real = chunk.len();
            let mut header = pdu.header.clone();
            header.write_range(offset, &chunk);
            pdu.header = header;
            pdu.recompute_derived();
            Ok(SlotEffect {
                bits: real,
                action: TimingAction::None,
                site: "low-bits".into(),
            })
        }
    }
}

pub(super) fn extract_lsb(settings: &VariationSettings, pdu: &Pdu, out: &mut Bits) -> Result<()> {
    match settings.two_level() {
        Some((b0, b1, _)) => {
            let offset = settings.offset()? as usize;
            let len = settings.len_bits()? as usize;
            let got = pdu.header.read_uint(offset, len);
            out.push(got.abs_diff(b1) < got.abs_diff(b0));
            Ok(())
        }
        None => {
            let offset = settings.offset()? as usize;
            let len = settings.len_bits()? as usize;
            out.extend(&pdu.header.read_range(offset, len));
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::catalog::PatternId;
    use crate::codecs::test_util::*;
    use crate::codecs::{capacity, embed, CovertMessage};

    #[test]
    fn values_mode_selects_by_index() {
        // ValuesAllowed {32,64,128,255}: message 10b selects index 2 = 128.
        let s = settings_for(PatternId::P6ValueModulation, "ipv4");
        let c = carrier("ipv4", 1);
        let msg = CovertMessage::new(crate::bits::Bits::from_uint(0b10, 2));
        let out = embed(PatternId::P6ValueModulation, &s, &msg, &c).unwrap();
        assert_eq!(out.stream.pdus[0].read_field_uint("ttl").unwrap(), 128);
        round_trip(PatternId::P6ValueModulation, &s, &msg, &c);
    }

    #[test]
    fn values_mode_round_trips_all_shipped_protocols() {
        for proto in ["ipv4", "tcp", "ipv6", "dhcp"] {
            let s = settings_for(PatternId::P6ValueModulation, proto);
            let c = carrier(proto, 16);
            let cap = capacity(PatternId::P6ValueModulation, &s, &c).unwrap();
            let msg = CovertMessage::random(cap, 13);
            round_trip(PatternId::P6ValueModulation, &s, &msg, &c);
        }
    }

    #[test]
    fn case_mode_renders_mixed_case() {
        let s = settings_for(PatternId::P6aCase, "http");
        let c = carrier("http", 1);
        let msg = CovertMessage::new(crate::bits::Bits::from_uint(0b1010, 4));
        let out = embed(PatternId::P6aCase, &s, &msg, &c).unwrap();
        let host = &out.stream.pdus[0].options[0];
        assert!(
            host.payload.starts_with(b"HoSt:"),
            "{:?}",
            String::from_utf8_lossy(&host.payload)
        );
        // Case-insensitive token identity still validates.
        assert!(out.stream.validate().is_empty());
        round_trip(PatternId::P6aCase, &s, &msg, &c);
    }

    #[test]
    fn two_level_writes_near_bases() {
        let s = settings_for(PatternId::P6bLsb, "ipv4");
        let c = carrier("ipv4", 32);
        let msg = CovertMessage::random(32, 6);
        let out = round_trip(PatternId::P6bLsb, &s, &msg, &c);
        for (i, p) in out.stream.pdus.iter().enumerate() {
            let ttl = p.read_field_uint("ttl").unwrap();
            let bit = msg.bits.get(i);
            if bit {
                assert!((150..=175).contains(&ttl), "pdu {i}: ttl {ttl}");
            } else {
                assert!((100..=125).contains(&ttl), "pdu {i}: ttl {ttl}");
            }
        }
    }

    #[test]
    fn hop_limit_variant_uses_identical_codec_path() {
        // Same bases on a different protocol: settings swap, code does not.
        let v4 = settings_for(PatternId::P6bLsb, "ipv4");
        let v6 = settings_for(PatternId::P6bLsb, "ipv6");
        assert_eq!(v4.entries.bases, v6.entries.bases);
        let c = carrier("ipv6", 16);
        let msg = CovertMessage::random(16, 8);
        round_trip(PatternId::P6bLsb, &v6, &msg, &c);
    }

    #[test]
    fn plain_lsb_drives_low_bits() {
        let s = settings_for(PatternId::P6bLsb, "dhcp");
        let c = carrier("dhcp", 8);
        let msg = CovertMessage::random(16, 3);
        round_trip(PatternId::P6bLsb, &s, &msg, &c);
    }
}

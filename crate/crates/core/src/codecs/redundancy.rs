//! Add redundancy: appends a new element whose payload is message bits.
//!
//! Binary schemas carry the raw bytes in the element payload; textual
//! schemas render an extension token whose value is the lowercase-hex text
//! of those bytes.

use super::{SlotEffect, TimingAction};
use crate::bits::{BitCursor, Bits};
use crate::error::Result;
use crate::protocol::{Pdu, PduElement};
use crate::variation::VariationSettings;

fn to_bytes(bits: &Bits, byte_len: usize) -> Vec<u8> {
    let mut padded = bits.clone();
    while padded.len() < byte_len * 8 {
        padded.push(false);
    }
    padded.as_bytes()[..byte_len].to_vec()
}

pub(super) fn embed_slot(
    settings: &VariationSettings,
    _slot: usize,
    pdu: &mut Pdu,
    cursor: &mut BitCursor,
) -> Result<SlotEffect> {
    let len_bits = settings.len_bits()? as usize;
    let byte_len = len_bits / 8;
    let id = settings.entries.element_id.unwrap_or(0);
    let Some(chunk) = cursor.take_bits(len_bits) else {
        return Ok(SlotEffect {
            bits: 0,
            action: TimingAction::None,
            site: String::new(),
        });
    };
    let real = chunk.len();
    let bytes = to_bytes(&chunk, byte_len);
    let element = if pdu.schema.is_textual() {
        let hex: String = bytes.iter().map(|b| format!("{b:02x}")).collect();
        PduElement::render_token(&pdu.schema, id, &hex)
    } else {
        PduElement::new(id, bytes)
    };
    let mut options = pdu.options.clone();
    options.push(element);
    *pdu = pdu.with_options(options);
    Ok(SlotEffect {
        bits: real,
        action: TimingAction::None,
        site: "added-element".into(),
    })
}

pub(super) fn extract_slot(settings: &VariationSettings, pdu: &Pdu, out: &mut Bits) -> Result<()> {
    let len_bits = settings.len_bits()? as usize;
    let byte_len = len_bits / 8;
    let id = settings.entries.element_id.unwrap_or(0);
    let mut bytes = vec![0u8; byte_len];
    if let Some(e) = pdu.options.iter().rev().find(|e| e.id == id) {
        if pdu.schema.is_textual() {
            if let Some((_, value)) = e.token_parts() {
                let text = std::str::from_utf8(value).unwrap_or("").trim();
                for (i, pair) in text.as_bytes().chunks(2).take(byte_len).enumerate() {
                    if let Ok(s) = std::str::from_utf8(pair) {
                        if let Ok(b) = u8::from_str_radix(s, 16) {
                            bytes[i] = b;
                        }
                    }
                }
            }
        } else {
            let n = e.payload.len().min(byte_len);
            bytes[..n].copy_from_slice(&e.payload[..n]);
        }
    }
    out.extend(&Bits::from_bytes(&bytes, len_bits));
    Ok(())
}

//! Direct field writes: random-value fields (with optional whitening) and
//! reserved/unused bits.
//!
//! Whitening XORs the message with a keystream keyed by `WhitenSeed` and
//! indexed by absolute message bit position, so the field stays
//! uniform-looking while both ends remain aligned.

use super::{SlotEffect, SpecState, TimingAction};
use crate::bits::{BitCursor, Bits};
use crate::error::Result;
use crate::protocol::Pdu;
use crate::variation::VariationSettings;

pub(super) fn embed_slot(
    settings: &VariationSettings,
    whiten: bool,
    state: &mut SpecState,
    slot: usize,
    pdu: &mut Pdu,
    cursor: &mut BitCursor,
) -> Result<SlotEffect> {
    if settings.only_first_pkt() && slot > 0 {
        return Ok(SlotEffect {
            bits: 0,
            action: TimingAction::None,
            site: String::new(),
        });
    }
    let offset = settings.offset()? as usize;
    let len = settings.len_bits()? as usize;
    let base = cursor.position();
    let Some(mut chunk) = cursor.take_bits(len) else {
        return Ok(SlotEffect {
            bits: 0,
            action: TimingAction::None,
            site: String::new(),
        });
    };
    let real = chunk.len();
    if whiten && settings.entries.whiten_seed.is_some() {
        for i in 0..real {
            let k = state.keystream.bit(base + i);
            chunk.set(i, chunk.get(i) ^ k);
        }
    }
    let mut header = pdu.header.clone();
    header.write_range(offset, &chunk);
    pdu.header = header;
    pdu.recompute_derived();
    Ok(SlotEffect {
        bits: real,
        action: TimingAction::None,
        site: format!("bits {offset}+{len}"),
    })
}

pub(super) fn extract_slot(
    settings: &VariationSettings,
    whiten: bool,
    state: &mut SpecState,
    slot: usize,
    pdu: &Pdu,
    out: &mut Bits,
) -> Result<()> {
    if settings.only_first_pkt() && slot > 0 {
        return Ok(());
    }
    let offset = settings.offset()? as usize;
    let len = settings.len_bits()? as usize;
    let mut chunk = pdu.header.read_range(offset, len);
    if whiten && settings.entries.whiten_seed.is_some() {
        let base = out.len();
        for i in 0..len {
            let k = state.keystream.bit(base + i);
            chunk.set(i, chunk.get(i) ^ k);
        }
    }
    out.extend(&chunk);
    Ok(())
}

//! Size modulation: the payload length carries the symbol.
//!
//! Sizes step from `MinSize` in `Granularity`-byte increments; each PDU
//! carries floor(log2(span)) bits selecting the step. Length-kind header
//! fields follow automatically through dependent-field recomputation.

use super::{perm, SlotEffect, TimingAction};
use crate::bits::{BitCursor, Bits};
use crate::error::Result;
use crate::protocol::Pdu;
use crate::variation::VariationSettings;

fn params(settings: &VariationSettings) -> (u64, u64, u64, usize) {
    let lo = settings.entries.min_size.unwrap_or(0);
    let hi = settings.entries.max_size.unwrap_or(0);
    let g = settings.entries.granularity.unwrap_or(1).max(1);
    let span = hi.saturating_sub(lo) / g + 1;
    (lo, hi, g, perm::floor_log2(span.max(1)))
}

pub(super) fn embed_slot(
    settings: &VariationSettings,
    pdu: &mut Pdu,
    cursor: &mut BitCursor,
) -> Result<SlotEffect> {
    let (lo, _, g, k) = params(settings);
    let Some((value, real)) = cursor.take(k.min(64)) else {
        return Ok(SlotEffect {
            bits: 0,
            action: TimingAction::None,
            site: String::new(),
        });
    };
    let size = (lo + value * g) as usize;
    let mut payload = pdu.payload.clone();
    payload.resize(size, 0);
    *pdu = pdu.with_payload(payload);
    Ok(SlotEffect {
        bits: real,
        action: TimingAction::None,
        site: "payload-size".into(),
    })
}

pub(super) fn extract_slot(settings: &VariationSettings, pdu: &Pdu, out: &mut Bits) -> Result<()> {
    let (lo, _, g, k) = params(settings);
    let len = pdu.payload.len() as u64;
    let value = len.saturating_sub(lo) / g;
    let clamped = value.min((1u64 << k.min(63)) - 1);
    out.push_uint(clamped, k);
    Ok(())
}

//! Overt carrier synthesis.

use super::{FieldKind, Pdu, PduElement, PduStream, ProtocolSchema};
use crate::bits::Bits;
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Inter-arrival time model for generated carriers.
#[derive(Debug, Clone, PartialEq)]
pub enum IatModel {
    /// Fixed gap in microseconds.
    Constant(u64),
    /// Exponential gaps with the given mean, floored at 1 us.
    Exponential { mean_us: u64 },
    /// Gaps sampled uniformly from a recorded list.
    Empirical(Vec<u64>),
}

impl IatModel {
    /// Parses `constant:<us>`, `exponential:<mean_us>` or
    /// `empirical:<us>,<us>,...`.
    pub fn parse(s: &str) -> Result<IatModel> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::config(format!("bad iat model {s:?}, expected kind:args")))?;
        match kind {
            "constant" => {
                Ok(IatModel::Constant(arg.trim().parse().map_err(|_| {
                    Error::config(format!("bad constant gap {arg:?}"))
                })?))
            }
            "exponential" => Ok(IatModel::Exponential {
                mean_us: arg
                    .trim()
                    .parse()
                    .map_err(|_| Error::config(format!("bad exponential mean {arg:?}")))?,
            }),
            "empirical" => {
                let vals: Result<Vec<u64>> = arg
                    .split(',')
                    .map(|v| {
                        v.trim()
                            .parse()
                            .map_err(|_| Error::config(format!("bad empirical gap {v:?}")))
                    })
                    .collect();
                let vals = vals?;
                if vals.is_empty() {
                    return Err(Error::config("empirical iat model needs at least one gap"));
                }
                Ok(IatModel::Empirical(vals))
            }
            _ => Err(Error::config(format!("unknown iat model {kind:?}"))),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> u64 {
        match self {
            IatModel::Constant(d) => *d,
            IatModel::Exponential { mean_us } => {
                let u: f64 = rng.gen();
                let g = -(*mean_us as f64) * (1.0 - u).ln();
                (g.round() as u64).max(1)
            }
            IatModel::Empirical(vals) => vals[rng.gen_range(0..vals.len())],
        }
    }
}

/// Writes a NUL-terminated default string into a text field, zero padding
/// the remainder.
fn text_field_bits(text: &str, len_bits: u32) -> Bits {
    let mut bytes = vec![0u8; (len_bits as usize).div_ceil(8)];
    let n = text.len().min(bytes.len().saturating_sub(1));
    bytes[..n].copy_from_slice(&text.as_bytes()[..n]);
    Bits::from_bytes(&bytes, len_bits as usize)
}

/// Synthesizes `n` schema-conformant PDUs. Random fields are drawn from the
/// seeded generator, addresses are drawn once per stream, checksums and
/// length fields come out valid, and timestamps accumulate gaps from the
/// model starting at zero.
pub fn make_carrier(
    schema: &Arc<ProtocolSchema>,
    n: usize,
    iat_model: &IatModel,
    rng_seed: u64,
) -> Result<PduStream> {
    if n == 0 {
        return Err(Error::config("carrier needs at least one PDU"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    // Per-stream constants for address-kind fields.
    let addr_values: Vec<(String, u64)> = schema
        .fields
        .iter()
        .filter(|f| matches!(f.kind, FieldKind::Address))
        .map(|f| {
            let width = f.len.min(64);
            (f.name.clone(), rng.gen::<u64>() & mask_bits(width))
        })
        .collect();

    let mut pdus = Vec::with_capacity(n);
    let mut ts = 0u64;
    for seq in 0..n as u64 {
        if seq > 0 {
            ts += iat_model.draw(&mut rng);
        }
        let mut header = Bits::zeroed(schema.header_bits as usize);
        for f in &schema.fields {
            let off = f.offset as usize;
            let len = f.len as usize;
            match &f.kind {
                FieldKind::Random => {
                    // Wide fields are filled 64 bits at a time.
                    let mut pos = 0;
                    while pos < len {
                        let take = (len - pos).min(64);
                        header.write_uint(
                            off + pos,
                            take,
                            rng.gen::<u64>() & mask_bits(take as u32),
                        );
                        pos += take;
                    }
                }
                FieldKind::Sequential => {
                    header.write_uint(off, len.min(64), seq & mask_bits(len.min(64) as u32));
                }
                FieldKind::Decrementing { initial, .. } => {
                    header.write_uint(off, len.min(64), *initial);
                }
                FieldKind::Address => {
                    let v = addr_values
                        .iter()
                        .find(|(name, _)| name == &f.name)
                        .map(|(_, v)| *v)
                        .unwrap_or(0);
                    // Low 64 bits carry the value; any wider prefix stays zero.
                    let w = len.min(64);
                    header.write_uint(off + len - w, w, v);
                }
                FieldKind::Enumerated { allowed } => {
                    let v = allowed[rng.gen_range(0..allowed.len())];
                    header.write_uint(off, len.min(64), v);
                }
                FieldKind::TextToken { default_text } => {
                    header.write_range(off, &text_field_bits(default_text, f.len));
                }
                // Reserved, Padding default to zero; Length and Checksum are
                // recomputed below.
                _ => {}
            }
        }

        let options: Vec<PduElement> = if let Some(t) = &schema.textual {
            (0..t.default_count)
                .map(|i| PduElement::render_token(schema, i as u16, &t.tokens[i].default_value))
                .collect()
        } else {
            schema
                .options
                .as_ref()
                .map(|d| {
                    d.defaults
                        .iter()
                        .map(|(id, payload)| PduElement::new(*id, payload.clone()))
                        .collect()
                })
                .unwrap_or_default()
        };

        let mut pdu = Pdu {
            schema: schema.clone(),
            header,
            options,
            payload: Vec::new(),
            timestamp_us: ts,
            seq,
            corrupted: false,
        };
        pdu.recompute_derived();
        pdus.push(pdu);
    }

    Ok(PduStream {
        schema: schema.clone(),
        pdus,
    })
}

fn mask_bits(len: u32) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

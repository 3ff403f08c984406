//! Simulated network between covert sender and receiver: loss, timestamp
//! jitter, adjacent reordering and header bit corruption, all seeded.
//!
//! Warden effects are deliberately not part of the channel model; wardens
//! act through their own configuration at the insertion point between
//! transmit and extract.

use crate::error::{Error, Result};
use crate::protocol::PduStream;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub loss_prob: f64,
    /// Probability a PDU is swapped with its successor.
    pub reorder_prob: f64,
    /// Maximum absolute timestamp perturbation in us.
    pub jitter_us: u64,
    /// Independent flip probability per header bit. Checksums are not
    /// recomputed; corruption is corruption.
    pub bit_flip_prob: f64,
    pub rng_seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            loss_prob: 0.0,
            reorder_prob: 0.0,
            jitter_us: 0,
            bit_flip_prob: 0.0,
            rng_seed: 0,
        }
    }
}

impl ChannelConfig {
    pub fn noiseless(seed: u64) -> Self {
        ChannelConfig {
            rng_seed: seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("loss_prob", self.loss_prob),
            ("reorder_prob", self.reorder_prob),
            ("bit_flip_prob", self.bit_flip_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Passes a stream through the channel. Deterministic per seed, stateless
/// across calls.
pub fn transmit(config: &ChannelConfig, stream: &PduStream) -> Result<PduStream> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut pdus = Vec::with_capacity(stream.len());
    for pdu in &stream.pdus {
        if config.loss_prob > 0.0 && rng.gen::<f64>() < config.loss_prob {
            continue;
        }
        let mut p = pdu.clone();
        if config.jitter_us > 0 {
            let j = rng.gen_range(-(config.jitter_us as i64)..=config.jitter_us as i64);
            p.timestamp_us = (p.timestamp_us as i64 + j).max(0) as u64;
        }
        if config.bit_flip_prob > 0.0 {
            let mut flipped = false;
            for i in 0..p.header.len() {
                if rng.gen::<f64>() < config.bit_flip_prob {
                    p.header.set(i, !p.header.get(i));
                    flipped = true;
                }
            }
            p.corrupted |= flipped;
        }
        pdus.push(p);
    }
    if config.reorder_prob > 0.0 && pdus.len() > 1 {
        for i in 0..pdus.len() - 1 {
            if rng.gen::<f64>() < config.reorder_prob {
                pdus.swap(i, i + 1);
            }
        }
    }
    Ok(PduStream {
        schema: stream.schema.clone(),
        pdus,
    })
}

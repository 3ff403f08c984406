//! Keyed pseudorandom function for slot-synchronized pattern selection.
//!
//! Both ends derive the slot value as a keyed hash of the 8-byte
//! big-endian slot counter; the construction is named in the config so
//! sender and receiver agree on it.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrfKind {
    HmacSha256,
}

impl PrfKind {
    pub fn name(self) -> &'static str {
        match self {
            PrfKind::HmacSha256 => "hmac-sha256",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hmac-sha256" => Some(PrfKind::HmacSha256),
            _ => None,
        }
    }
}

/// HMAC with SHA-256 over a 64-byte block.
pub fn hmac_sha256(key: &[u8], message: &[u8]) -> [u8; 32] {
    use sha2::{Digest, Sha256};
    const BLOCK: usize = 64;
    let mut k = [0u8; BLOCK];
    if key.len() > BLOCK {
        k[..32].copy_from_slice(&Sha256::digest(key));
    } else {
        k[..key.len()].copy_from_slice(key);
    }
    let mut ipad = [0x36u8; BLOCK];
    let mut opad = [0x5cu8; BLOCK];
    for i in 0..BLOCK {
        ipad[i] ^= k[i];
        opad[i] ^= k[i];
    }
    let mut inner = Sha256::new();
    inner.update(ipad);
    inner.update(message);
    let inner = inner.finalize();
    let mut outer = Sha256::new();
    outer.update(opad);
    outer.update(inner);
    outer.finalize().into()
}

/// First eight output bytes of the keyed hash of slot `t`, big-endian.
pub fn prf_u64(kind: PrfKind, key: &[u8; 32], t: u64) -> u64 {
    match kind {
        PrfKind::HmacSha256 => {
            let mac = hmac_sha256(key, &t.to_be_bytes());
            u64::from_be_bytes(mac[..8].try_into().unwrap())
        }
    }
}

//! Hopping config file:
//!
//! ```text
//! prf hmac-sha256
//! key 000102...1f            # 64 hex chars
//! modulus 4
//! pattern P5 ipv4
//! pattern P6.b ipv4
//! ```
//!
//! Pattern settings are resolved from a settings catalog at parse time.

use super::{HoppingConfig, PrfKind};
use crate::catalog::PatternId;
use crate::error::{Error, Result};
use crate::protocol::SchemaRegistry;
use crate::variation::SettingsCatalog;

pub fn parse_hopping_config(
    text: &str,
    settings: &SettingsCatalog,
    registry: &SchemaRegistry,
) -> Result<HoppingConfig> {
    let mut key: Option<[u8; 32]> = None;
    let mut modulus: Option<u32> = None;
    let mut prf = PrfKind::HmacSha256;
    let mut patterns = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = (i + 1) as u64;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let mut toks = l.split_whitespace();
        match toks.next().unwrap() {
            "prf" => {
                let name = toks
                    .next()
                    .ok_or_else(|| Error::parse("missing prf name", line))?;
                prf = PrfKind::parse(name)
                    .ok_or_else(|| Error::parse(format!("unknown prf {name:?}"), line))?;
            }
            "key" => {
                let hexstr = toks
                    .next()
                    .ok_or_else(|| Error::parse("missing key", line))?;
                if hexstr.len() != 64 {
                    return Err(Error::parse("key must be 64 hex characters", line));
                }
                let mut k = [0u8; 32];
                for (j, b) in k.iter_mut().enumerate() {
                    *b = u8::from_str_radix(&hexstr[2 * j..2 * j + 2], 16)
                        .map_err(|_| Error::parse("bad hex in key", line))?;
                }
                key = Some(k);
            }
            "modulus" => {
                modulus = Some(
                    toks.next()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| Error::parse("bad modulus", line))?,
                );
            }
            "pattern" => {
                let id = toks
                    .next()
                    .ok_or_else(|| Error::parse("missing pattern id", line))?;
                let pattern = PatternId::parse(id)
                    .ok_or_else(|| Error::parse(format!("unknown pattern {id:?}"), line))?;
                let proto = toks
                    .next()
                    .ok_or_else(|| Error::parse("missing protocol name", line))?;
                let schema = registry
                    .get(proto)
                    .map_err(|e| Error::parse(e.to_string(), line))?;
                let entry = settings.get(pattern, &schema.name).ok_or_else(|| {
                    Error::parse(
                        format!("no settings entry for ({id}, {})", schema.name),
                        line,
                    )
                })?;
                patterns.push((pattern, entry.clone()));
            }
            other => return Err(Error::parse(format!("unknown directive {other:?}"), line)),
        }
    }
    let key = key.ok_or_else(|| Error::parse("missing key line", 0))?;
    let patterns_len = patterns.len() as u32;
    let config = HoppingConfig {
        patterns,
        key,
        modulus: modulus.unwrap_or(patterns_len),
        prf,
    };
    config.validate()?;
    Ok(config)
}

pub fn render_hopping_config(config: &HoppingConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!("prf {}\n", config.prf.name()));
    let hex: String = config.key.iter().map(|b| format!("{b:02x}")).collect();
    out.push_str(&format!("key {hex}\n"));
    out.push_str(&format!("modulus {}\n", config.modulus));
    for (p, s) in &config.patterns {
        out.push_str(&format!("pattern {} {}\n", p.code(), s.protocol));
    }
    out
}

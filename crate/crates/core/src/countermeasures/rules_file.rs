//! Warden rule file: one rule per line, kind plus target.
//!
//! ```text
//! mode stateful
//! buffer 64
//! drop-invalid
//! clear kind:reserved
//! fix kind:decrementing 64
//! canonicalize-elements
//! strip-elements 1,3,6,51
//! lowercase-tokens
//! pad-size 64
//! reorder-by-seq
//! smooth-iat 2000
//! cap-rate 3 10000
//! recompute-derived
//! ```

use super::{NormalizerRule, Target, WardenConfig, WardenMode};
use crate::error::{Error, Result};

pub fn parse_warden_config(text: &str) -> Result<WardenConfig> {
    let mut rules = Vec::new();
    let mut mode = WardenMode::Stateless;
    let mut buffer_limit = 0usize;
    for (i, raw) in text.lines().enumerate() {
        let line = (i + 1) as u64;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let mut toks = l.split_whitespace();
        let head = toks.next().unwrap();
        let target = |toks: &mut dyn Iterator<Item = &str>| -> Result<Target> {
            let t = toks
                .next()
                .ok_or_else(|| Error::parse("missing target", line))?;
            Target::parse(t).ok_or_else(|| {
                Error::parse(
                    format!("bad target {t:?}, expected field:<name> or kind:<kind>"),
                    line,
                )
            })
        };
        match head {
            "mode" => {
                mode = match toks.next() {
                    Some("stateless") => WardenMode::Stateless,
                    Some("stateful") => WardenMode::Stateful,
                    other => return Err(Error::parse(format!("bad mode {other:?}"), line)),
                };
            }
            "buffer" => {
                buffer_limit = toks
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::parse("bad buffer size", line))?;
            }
            "clear" => rules.push(NormalizerRule::ClearField(target(&mut toks)?)),
            "fix" => {
                let t = target(&mut toks)?;
                let v = toks
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::parse("missing fix value", line))?;
                rules.push(NormalizerRule::FixField(t, v));
            }
            "recompute-derived" => rules.push(NormalizerRule::RecomputeDerived),
            "drop-invalid" => rules.push(NormalizerRule::DropInvalid),
            "canonicalize-elements" => rules.push(NormalizerRule::CanonicalizeElementOrder),
            "strip-elements" => {
                let keep = match toks.next() {
                    Some(list) => list
                        .split(',')
                        .map(|v| {
                            v.parse()
                                .map_err(|_| Error::parse(format!("bad element id {v:?}"), line))
                        })
                        .collect::<Result<Vec<u16>>>()?,
                    None => Vec::new(),
                };
                rules.push(NormalizerRule::StripUnknownElements(keep));
            }
            "lowercase-tokens" => rules.push(NormalizerRule::LowercaseTokens),
            "pad-size" => {
                let v = toks
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::parse("missing pad size", line))?;
                rules.push(NormalizerRule::PadToFixedSize(v));
            }
            "reorder-by-seq" => rules.push(NormalizerRule::ReorderBySeq),
            "smooth-iat" => {
                let v = toks
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::parse("missing smoothing target", line))?;
                rules.push(NormalizerRule::SmoothIat(v));
            }
            "cap-rate" => {
                let max = toks
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::parse("missing max rate", line))?;
                let window = toks
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::parse("missing window", line))?;
                rules.push(NormalizerRule::CapRate {
                    max_per_window: max,
                    window_us: window,
                });
            }
            other => return Err(Error::parse(format!("unknown rule {other:?}"), line)),
        }
    }
    let config = WardenConfig {
        rules,
        mode,
        buffer_limit,
    };
    config.validate()?;
    Ok(config)
}

pub fn render_warden_config(config: &WardenConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "mode {}\n",
        match config.mode {
            WardenMode::Stateless => "stateless",
            WardenMode::Stateful => "stateful",
        }
    ));
    if config.mode == WardenMode::Stateful {
        out.push_str(&format!("buffer {}\n", config.buffer_limit));
    }
    for rule in &config.rules {
        match rule {
            NormalizerRule::ClearField(t) => out.push_str(&format!("clear {}\n", t.render())),
            NormalizerRule::FixField(t, v) => out.push_str(&format!("fix {} {v}\n", t.render())),
            NormalizerRule::RecomputeDerived => out.push_str("recompute-derived\n"),
            NormalizerRule::DropInvalid => out.push_str("drop-invalid\n"),
            NormalizerRule::CanonicalizeElementOrder => out.push_str("canonicalize-elements\n"),
            NormalizerRule::StripUnknownElements(keep) => {
                if keep.is_empty() {
                    out.push_str("strip-elements\n");
                } else {
                    let list: Vec<String> = keep.iter().map(u16::to_string).collect();
                    out.push_str(&format!("strip-elements {}\n", list.join(",")));
                }
            }
            NormalizerRule::LowercaseTokens => out.push_str("lowercase-tokens\n"),
            NormalizerRule::PadToFixedSize(v) => out.push_str(&format!("pad-size {v}\n")),
            NormalizerRule::ReorderBySeq => out.push_str("reorder-by-seq\n"),
            NormalizerRule::SmoothIat(v) => out.push_str(&format!("smooth-iat {v}\n")),
            NormalizerRule::CapRate {
                max_per_window,
                window_us,
            } => out.push_str(&format!("cap-rate {max_per_window} {window_us}\n")),
        }
    }
    out
}

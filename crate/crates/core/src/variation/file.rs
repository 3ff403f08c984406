//! Settings file syntax:
//!
//! ```text
//! [pattern P5]
//! settings.ipv4.Offset=32
//! settings.ipv4.Len=16
//! settings.tcp.Offset=32
//! settings.tcp.Len=32
//! settings.tcp.OnlyFirstPkt=true
//! ```
//!
//! Lists are comma-separated, ranges written `lo..hi`, booleans
//! `true`/`false`. Unknown keys are rejected with their line number.

use super::{SettingsCatalog, SettingsEntries, VariationSettings};
use crate::catalog::PatternId;
use crate::error::{Error, Result};

fn parse_u64(v: &str, line: u64) -> Result<u64> {
    v.trim()
        .parse()
        .map_err(|_| Error::parse(format!("bad integer {v:?}"), line))
}

fn parse_list(v: &str, line: u64) -> Result<Vec<u64>> {
    v.split(',').map(|x| parse_u64(x, line)).collect()
}

pub fn parse_settings(text: &str) -> Result<SettingsCatalog> {
    let mut catalog = SettingsCatalog::default();
    let mut current: Option<PatternId> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = (i + 1) as u64;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        if let Some(rest) = l.strip_prefix('[') {
            let inner = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::parse("unterminated section header", line))?;
            let id = inner
                .strip_prefix("pattern")
                .map(str::trim)
                .ok_or_else(|| Error::parse(format!("expected [pattern <id>], got {l:?}"), line))?;
            current = Some(
                PatternId::parse(id)
                    .ok_or_else(|| Error::parse(format!("unknown pattern id {id:?}"), line))?,
            );
            continue;
        }
        let pattern = current
            .ok_or_else(|| Error::parse("settings line before any [pattern ...] section", line))?;
        let body = l.strip_prefix("settings.").ok_or_else(|| {
            Error::parse(
                format!("expected settings.<protocol>.<Key>=<value>, got {l:?}"),
                line,
            )
        })?;
        let (addr, value) = body
            .split_once('=')
            .ok_or_else(|| Error::parse("missing = in settings line", line))?;
        let (protocol, key) = addr
            .rsplit_once('.')
            .ok_or_else(|| Error::parse("expected <protocol>.<Key>", line))?;
        let value = value.trim().trim_end_matches(';');
        let key_entry = catalog
            .entries
            .entry((pattern, protocol.to_string()))
            .or_insert_with(|| VariationSettings {
                pattern,
                protocol: protocol.to_string(),
                entries: SettingsEntries::default(),
            });
        let e = &mut key_entry.entries;
        match key {
            "Offset" => e.offset = Some(parse_u64(value, line)? as u32),
            "Len" => e.len = Some(parse_u64(value, line)? as u32),
            "OnlyFirstPkt" => {
                e.only_first_pkt = Some(match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(Error::parse(format!("bad boolean {value:?}"), line)),
                })
            }
            "MinSize" => e.min_size = Some(parse_u64(value, line)?),
            "MaxSize" => e.max_size = Some(parse_u64(value, line)?),
            "MinElements" => e.min_elements = Some(parse_u64(value, line)? as u32),
            "MaxElements" => e.max_elements = Some(parse_u64(value, line)? as u32),
            "ValueRange" => {
                let (lo, hi) = value
                    .split_once("..")
                    .ok_or_else(|| Error::parse(format!("expected lo..hi, got {value:?}"), line))?;
                e.value_range = Some((parse_u64(lo, line)?, parse_u64(hi, line)?));
            }
            "ValuesAllowed" => e.values_allowed = Some(parse_list(value, line)?),
            "MinIPG" => e.min_ipg = Some(parse_u64(value, line)?),
            "MaxIPG" => e.max_ipg = Some(parse_u64(value, line)?),
            "DistributionIPG" => e.distribution_ipg = Some(parse_list(value, line)?),
            "MinRate" => e.min_rate = Some(parse_u64(value, line)? as u32),
            "MaxRate" => e.max_rate = Some(parse_u64(value, line)? as u32),
            "ElementId" => e.element_id = Some(parse_u64(value, line)? as u16),
            "Token" => e.token = Some(value.to_string()),
            "Bases" => e.bases = Some(parse_list(value, line)?),
            "Granularity" => e.granularity = Some(parse_u64(value, line)?),
            "Window" => e.window = Some(parse_u64(value, line)?),
            "DuplicateGap" => e.duplicate_gap = Some(parse_u64(value, line)?),
            "WhitenSeed" => e.whiten_seed = Some(parse_u64(value, line)?),
            other => {
                return Err(Error::parse(
                    format!(
                        "unknown settings key {other:?}, expected one of {}",
                        super::KEY_NAMES.join("/")
                    ),
                    line,
                ));
            }
        }
    }
    Ok(catalog)
}

pub fn render_settings(catalog: &SettingsCatalog) -> String {
    let mut out = String::new();
    let mut last_pattern: Option<PatternId> = None;
    for ((pattern, protocol), entry) in &catalog.entries {
        if last_pattern != Some(*pattern) {
            if last_pattern.is_some() {
                out.push('\n');
            }
            out.push_str(&format!("[pattern {}]\n", pattern.code()));
            last_pattern = Some(*pattern);
        }
        let mut kv = |key: &str, v: String| {
            out.push_str(&format!("settings.{protocol}.{key}={v}\n"));
        };
        let e = &entry.entries;
        if let Some(v) = e.offset {
            kv("Offset", v.to_string());
        }
        if let Some(v) = e.len {
            kv("Len", v.to_string());
        }
        if let Some(v) = e.only_first_pkt {
            kv("OnlyFirstPkt", v.to_string());
        }
        if let Some(v) = e.min_size {
            kv("MinSize", v.to_string());
        }
        if let Some(v) = e.max_size {
            kv("MaxSize", v.to_string());
        }
        if let Some(v) = e.min_elements {
            kv("MinElements", v.to_string());
        }
        if let Some(v) = e.max_elements {
            kv("MaxElements", v.to_string());
        }
        if let Some((lo, hi)) = e.value_range {
            kv("ValueRange", format!("{lo}..{hi}"));
        }
        if let Some(v) = &e.values_allowed {
            kv("ValuesAllowed", join(v));
        }
        if let Some(v) = e.min_ipg {
            kv("MinIPG", v.to_string());
        }
        if let Some(v) = e.max_ipg {
            kv("MaxIPG", v.to_string());
        }
        if let Some(v) = &e.distribution_ipg {
            kv("DistributionIPG", join(v));
        }
        if let Some(v) = e.min_rate {
            kv("MinRate", v.to_string());
        }
        if let Some(v) = e.max_rate {
            kv("MaxRate", v.to_string());
        }
        if let Some(v) = e.element_id {
            kv("ElementId", v.to_string());
        }
        if let Some(v) = &e.token {
            kv("Token", v.clone());
        }
        if let Some(v) = &e.bases {
            kv("Bases", join(v));
        }
        if let Some(v) = e.granularity {
            kv("Granularity", v.to_string());
        }
        if let Some(v) = e.window {
            kv("Window", v.to_string());
        }
        if let Some(v) = e.duplicate_gap {
            kv("DuplicateGap", v.to_string());
        }
        if let Some(v) = e.whiten_seed {
            kv("WhitenSeed", v.to_string());
        }
    }
    out
}

fn join(v: &[u64]) -> String {
    v.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::SchemaRegistry;

    const FIG4_STYLE: &str = "\
[pattern P5]
settings.ipv4.Offset=32;
settings.ipv4.Len=16;
settings.tcp.Offset=32
settings.tcp.Len=32
settings.tcp.OnlyFirstPkt=true
";

    #[test]
    fn parses_key_value_blocks() {
        let mut cat = parse_settings(FIG4_STYLE).unwrap();
        cat.validate(&SchemaRegistry::new()).unwrap();
        let v4 = cat.get(PatternId::P5RandomValue, "ipv4_like").unwrap();
        assert_eq!((v4.entries.offset, v4.entries.len), (Some(32), Some(16)));
        let tcp = cat.get(PatternId::P5RandomValue, "tcp_like").unwrap();
        assert_eq!((tcp.entries.offset, tcp.entries.len), (Some(32), Some(32)));
        assert_eq!(tcp.entries.only_first_pkt, Some(true));
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let text = "[pattern P5]\nsettings.ipv4.Offst=32\n";
        match parse_settings(text) {
            Err(Error::Parse { at, what }) => {
                assert_eq!(at, 2);
                assert!(what.contains("Offst"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn oversized_len_rejected_on_validate() {
        let text = "[pattern P5]\nsettings.ipv4.Offset=32\nsettings.ipv4.Len=999\n";
        let mut cat = parse_settings(text).unwrap();
        assert!(cat.validate(&SchemaRegistry::new()).is_err());
    }

    #[test]
    fn empty_file_is_empty_catalog() {
        let cat = parse_settings("").unwrap();
        assert!(cat.entries.is_empty());
    }

    #[test]
    fn render_parse_round_trip() {
        let mut cat = crate::variation::default_settings();
        let text = render_settings(&cat);
        let mut back = parse_settings(&text).unwrap();
        back.validate(&SchemaRegistry::new()).unwrap();
        cat.validate(&SchemaRegistry::new()).unwrap();
        assert_eq!(back, cat);
    }
}

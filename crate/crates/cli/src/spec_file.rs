//! Experiment spec file: INI-style sections describing carrier, embedding,
//! message, channel, optional warden and output paths.
//!
//! ```text
//! [carrier]
//! schema = ipv4
//! count = 1000
//! iat = exponential:5000
//! seed = 7
//!
//! [embedding]
//! kind = single
//! pattern = P7
//! settings = default
//!
//! [message]
//! kind = random
//! bits = 1000
//! seed = 99
//!
//! [channel]
//! loss = 0.0
//! jitter = 0
//! seed = 3
//!
//! [warden]
//! rules = default-stateless
//!
//! [output]
//! report = report.txt
//! ```

use cct_core::catalog::PatternId;
use cct_core::channel::ChannelConfig;
use cct_core::codecs::CovertMessage;
use cct_core::countermeasures::{parse_warden_config, WardenConfig};
use cct_core::error::{Error, Result};
use cct_core::experiment::Experiment;
use cct_core::orchestration::{parse_hopping_config, EmbeddingSpec};
use cct_core::protocol::{make_carrier, IatModel, SchemaRegistry};
use cct_core::variation::{default_settings, parse_settings, SettingsCatalog, VariationSettings};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub struct OutputPaths {
    pub report: Option<PathBuf>,
    pub covert_trace: Option<PathBuf>,
    pub received_trace: Option<PathBuf>,
    pub carrier_trace: Option<PathBuf>,
}

pub struct ResolvedSpec {
    pub experiment: Experiment,
    pub outputs: OutputPaths,
}

type Sections = BTreeMap<String, BTreeMap<String, String>>;

fn parse_sections(text: &str) -> Result<Sections> {
    let mut out: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = (i + 1) as u64;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        if let Some(rest) = l.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::parse("unterminated section header", line))?;
            current = Some(name.to_string());
            out.entry(name.to_string()).or_default();
            continue;
        }
        let section = current
            .clone()
            .ok_or_else(|| Error::parse("key before any [section]", line))?;
        let (k, v) = l
            .split_once('=')
            .ok_or_else(|| Error::parse(format!("expected key = value, got {l:?}"), line))?;
        out.get_mut(&section)
            .unwrap()
            .insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn require<'a>(sections: &'a Sections, section: &str, key: &str) -> Result<&'a str> {
    sections
        .get(section)
        .and_then(|s| s.get(key))
        .map(String::as_str)
        .ok_or_else(|| Error::config(format!("spec missing [{section}] {key}")))
}

fn optional<'a>(sections: &'a Sections, section: &str, key: &str) -> Option<&'a str> {
    sections
        .get(section)
        .and_then(|s| s.get(key))
        .map(String::as_str)
}

fn parse_num<T: std::str::FromStr>(v: &str, what: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(format!("bad {what}: {v:?}")))
}

fn load_settings_source(
    source: &str,
    base: &Path,
    registry: &SchemaRegistry,
) -> Result<SettingsCatalog> {
    if source == "default" {
        Ok(default_settings())
    } else {
        let text = std::fs::read_to_string(base.join(source))?;
        let mut catalog = parse_settings(&text)?;
        catalog.validate(registry)?;
        Ok(catalog)
    }
}

fn entry_for(
    catalog: &SettingsCatalog,
    pattern: PatternId,
    protocol: &str,
    registry: &SchemaRegistry,
) -> Result<VariationSettings> {
    let schema = registry.get(protocol)?;
    catalog.get(pattern, &schema.name).cloned().ok_or_else(|| {
        Error::config(format!(
            "no settings entry for ({pattern}, {})",
            schema.name
        ))
    })
}

fn parse_pattern_list(
    spec: &str,
    catalog: &SettingsCatalog,
    registry: &SchemaRegistry,
) -> Result<Vec<(PatternId, VariationSettings)>> {
    let mut out = Vec::new();
    for item in spec.split(',') {
        let mut toks = item.split_whitespace();
        let id = toks
            .next()
            .ok_or_else(|| Error::config("empty pattern list item"))?;
        let pattern =
            PatternId::parse(id).ok_or_else(|| Error::config(format!("unknown pattern {id:?}")))?;
        let proto = toks
            .next()
            .ok_or_else(|| Error::config(format!("pattern {id} needs a protocol name")))?;
        out.push((pattern, entry_for(catalog, pattern, proto, registry)?));
    }
    Ok(out)
}

/// Parses and fully resolves an experiment spec. `base` anchors relative
/// paths referenced by the spec.
pub fn resolve_spec(text: &str, base: &Path) -> Result<ResolvedSpec> {
    let sections = parse_sections(text)?;

    let mut registry = SchemaRegistry::new();
    if let Some(path) = optional(&sections, "carrier", "schema-file") {
        let schema_text = std::fs::read_to_string(base.join(path))?;
        registry.load_schema_file(&schema_text)?;
    }

    let schema = registry.get(require(&sections, "carrier", "schema")?)?;
    let count: usize = parse_num(require(&sections, "carrier", "count")?, "carrier count")?;
    let iat = IatModel::parse(require(&sections, "carrier", "iat")?)?;
    let carrier_seed: u64 = parse_num(require(&sections, "carrier", "seed")?, "carrier seed")?;
    let carrier = make_carrier(&schema, count, &iat, carrier_seed)?;

    let settings_source = optional(&sections, "embedding", "settings").unwrap_or("default");
    let catalog = load_settings_source(settings_source, base, &registry)?;
    let embedding = match require(&sections, "embedding", "kind")? {
        "single" => {
            let id = require(&sections, "embedding", "pattern")?;
            let pattern = PatternId::parse(id)
                .ok_or_else(|| Error::config(format!("unknown pattern {id:?}")))?;
            EmbeddingSpec::Single(
                pattern,
                entry_for(&catalog, pattern, &schema.name, &registry)?,
            )
        }
        "parallel" => EmbeddingSpec::Parallel(parse_pattern_list(
            require(&sections, "embedding", "patterns")?,
            &catalog,
            &registry,
        )?),
        "sequential" => EmbeddingSpec::Sequential(parse_pattern_list(
            require(&sections, "embedding", "patterns")?,
            &catalog,
            &registry,
        )?),
        "hopping" => {
            let path = require(&sections, "embedding", "hopping-config")?;
            let text = std::fs::read_to_string(base.join(path))?;
            EmbeddingSpec::Hopping(parse_hopping_config(&text, &catalog, &registry)?)
        }
        other => return Err(Error::config(format!("unknown embedding kind {other:?}"))),
    };

    // An explicitly configured receiver, e.g. a hopping config holding a
    // different key, decodes the observed stream instead of the sender spec.
    let receiver = match optional(&sections, "embedding", "receiver-hopping-config") {
        Some(path) => {
            let text = std::fs::read_to_string(base.join(path))?;
            Some(EmbeddingSpec::Hopping(parse_hopping_config(
                &text, &catalog, &registry,
            )?))
        }
        None => None,
    };

    let message = match require(&sections, "message", "kind")? {
        "random" => {
            let bits: usize = parse_num(require(&sections, "message", "bits")?, "message bits")?;
            let seed: u64 = parse_num(require(&sections, "message", "seed")?, "message seed")?;
            CovertMessage::random(bits, seed)
        }
        "hex" => {
            let hex = require(&sections, "message", "hex")?;
            CovertMessage::from_hex(hex)
                .ok_or_else(|| Error::config(format!("bad hex message {hex:?}")))?
        }
        "file" => {
            let path = require(&sections, "message", "path")?;
            let bytes = std::fs::read(base.join(path))?;
            CovertMessage::from_bytes(&bytes)
        }
        other => return Err(Error::config(format!("unknown message kind {other:?}"))),
    };

    let channel = ChannelConfig {
        loss_prob: optional(&sections, "channel", "loss")
            .map(|v| parse_num(v, "loss"))
            .transpose()?
            .unwrap_or(0.0),
        reorder_prob: optional(&sections, "channel", "reorder")
            .map(|v| parse_num(v, "reorder"))
            .transpose()?
            .unwrap_or(0.0),
        jitter_us: optional(&sections, "channel", "jitter")
            .map(|v| parse_num(v, "jitter"))
            .transpose()?
            .unwrap_or(0),
        bit_flip_prob: optional(&sections, "channel", "bitflip")
            .map(|v| parse_num(v, "bitflip"))
            .transpose()?
            .unwrap_or(0.0),
        rng_seed: optional(&sections, "channel", "seed")
            .map(|v| parse_num(v, "channel seed"))
            .transpose()?
            .unwrap_or(0),
    };

    let warden: Option<WardenConfig> = match optional(&sections, "warden", "rules") {
        None => None,
        Some("default-stateless") => Some(WardenConfig::default_stateless(&schema)),
        Some("default-stateful") => {
            let buffer: usize = optional(&sections, "warden", "buffer")
                .map(|v| parse_num(v, "warden buffer"))
                .transpose()?
                .unwrap_or(64);
            Some(WardenConfig::default_stateful(buffer))
        }
        Some(path) => {
            let text = std::fs::read_to_string(base.join(path))?;
            Some(parse_warden_config(&text)?)
        }
    };

    let outputs = OutputPaths {
        report: optional(&sections, "output", "report").map(|p| base.join(p)),
        covert_trace: optional(&sections, "output", "trace").map(|p| base.join(p)),
        received_trace: optional(&sections, "output", "received").map(|p| base.join(p)),
        carrier_trace: optional(&sections, "output", "carrier").map(|p| base.join(p)),
    };

    Ok(ResolvedSpec {
        experiment: Experiment {
            embedding,
            receiver,
            message,
            carrier,
            channel,
            warden,
        },
        outputs,
    })
}

//! Declarative text format for loading custom schemas.
//!
//! Binary layout:
//! ```text
//! schema custom64
//! bits 64
//! field ident offset 0 len 16 kind random
//! field csum offset 16 len 16 kind checksum cover 0 64
//! field ttl offset 32 len 8 kind decrementing min 0 max 255 init 64
//! field proto offset 40 len 8 kind enumerated values 1,6,17
//! field pad offset 48 len 16 kind padding
//! options ids 1..16 count 0..4 payload 8
//! ```
//!
//! Textual layout:
//! ```text
//! schema headerish
//! textual
//! token Host example.com
//! token X-Extra 0
//! emit 1
//! count 0..8 payload 64
//! ```

use super::{FieldKind, LengthMeasure, OptionDescriptor, ProtocolSchema, TextualSpec, TokenSpec};
use crate::error::{Error, Result};
use crate::protocol::Field;
use std::sync::Arc;

fn num<T: std::str::FromStr>(tok: &str, line: u64) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(format!("bad number {tok:?}"), line))
}

fn range_pair(tok: &str, line: u64) -> Result<(u64, u64)> {
    let (a, b) = tok
        .split_once("..")
        .ok_or_else(|| Error::parse(format!("expected lo..hi, got {tok:?}"), line))?;
    Ok((num(a, line)?, num(b, line)?))
}

/// Pulls `key value` pairs off a token list in order.
struct KeyArgs<'a> {
    toks: Vec<&'a str>,
    pos: usize,
    line: u64,
}

impl<'a> KeyArgs<'a> {
    fn expect(&mut self, key: &str) -> Result<&'a str> {
        if self.pos >= self.toks.len() {
            return Err(Error::parse(format!("missing {key}"), self.line));
        }
        if self.toks.get(self.pos) != Some(&key) {
            return Err(Error::parse(
                format!("expected {key}, got {:?}", self.toks.get(self.pos)),
                self.line,
            ));
        }
        let v = self
            .toks
            .get(self.pos + 1)
            .ok_or_else(|| Error::parse(format!("missing value for {key}"), self.line))?;
        self.pos += 2;
        Ok(v)
    }

    fn done(&self) -> Result<()> {
        if self.pos != self.toks.len() {
            return Err(Error::parse(
                format!("unexpected trailing tokens {:?}", &self.toks[self.pos..]),
                self.line,
            ));
        }
        Ok(())
    }
}

pub fn parse_schema_text(text: &str) -> Result<Arc<ProtocolSchema>> {
    let mut name: Option<String> = None;
    let mut header_bits = 0u32;
    let mut fields: Vec<Field> = Vec::new();
    let mut options: Option<OptionDescriptor> = None;
    let mut textual = false;
    let mut tokens: Vec<TokenSpec> = Vec::new();
    let mut emit_count: Option<usize> = None;

    for (i, raw) in text.lines().enumerate() {
        let line = (i + 1) as u64;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks[0] {
            "schema" => {
                name = Some(
                    toks.get(1)
                        .ok_or_else(|| Error::parse("missing schema name", line))?
                        .to_string(),
                );
            }
            "bits" => {
                header_bits = num(
                    toks.get(1)
                        .ok_or_else(|| Error::parse("missing bit count", line))?,
                    line,
                )?;
            }
            "textual" => textual = true,
            "field" => {
                let fname = toks
                    .get(1)
                    .ok_or_else(|| Error::parse("missing field name", line))?
                    .to_string();
                let mut args = KeyArgs {
                    toks: toks[2..].to_vec(),
                    pos: 0,
                    line,
                };
                let offset: u32 = num(args.expect("offset")?, line)?;
                let len: u32 = num(args.expect("len")?, line)?;
                let kind_name = args.expect("kind")?;
                let kind = match kind_name {
                    "reserved" => FieldKind::Reserved,
                    "random" => FieldKind::Random,
                    "sequential" => FieldKind::Sequential,
                    "address" => FieldKind::Address,
                    "padding" => FieldKind::Padding,
                    "decrementing" => {
                        let min = num(args.expect("min")?, line)?;
                        let max = num(args.expect("max")?, line)?;
                        let initial = num(args.expect("init")?, line)?;
                        FieldKind::Decrementing { min, max, initial }
                    }
                    "checksum" => {
                        let cover = args.expect("cover")?;
                        let off2: u32 = num(cover, line)?;
                        let len2: u32 = num(
                            args.expect("to").map_err(|_| {
                                Error::parse("checksum needs `cover <off> to <len>`", line)
                            })?,
                            line,
                        )?;
                        FieldKind::Checksum {
                            cover_offset: off2,
                            cover_len: len2,
                        }
                    }
                    "enumerated" => {
                        let vals = args.expect("values")?;
                        let allowed: Result<Vec<u64>> =
                            vals.split(',').map(|v| num(v, line)).collect();
                        FieldKind::Enumerated { allowed: allowed? }
                    }
                    "length" => {
                        let m = args.expect("measure")?;
                        let measure = match m {
                            "total" => LengthMeasure::TotalBytes,
                            "words" => LengthMeasure::HeaderWords,
                            "after" => LengthMeasure::AfterHeaderBytes,
                            _ => {
                                return Err(Error::parse(
                                    format!("unknown length measure {m:?}"),
                                    line,
                                ))
                            }
                        };
                        FieldKind::Length { measure }
                    }
                    "texttoken" => {
                        let t = args.expect("default")?;
                        FieldKind::TextToken {
                            default_text: t.to_string(),
                        }
                    }
                    _ => {
                        return Err(Error::parse(
                            format!("unknown field kind {kind_name:?}"),
                            line,
                        ))
                    }
                };
                args.done()?;
                fields.push(Field {
                    name: fname,
                    offset,
                    len,
                    kind,
                });
            }
            "options" => {
                let mut args = KeyArgs {
                    toks: toks[1..].to_vec(),
                    pos: 0,
                    line,
                };
                let (id_min, id_max) = range_pair(args.expect("ids")?, line)?;
                let (min_count, max_count) = range_pair(args.expect("count")?, line)?;
                let max_payload: u16 = num(args.expect("payload")?, line)?;
                args.done()?;
                options = Some(OptionDescriptor {
                    id_min: id_min as u16,
                    id_max: id_max as u16,
                    min_count: min_count as u16,
                    max_count: max_count as u16,
                    max_payload,
                    defaults: vec![],
                });
            }
            "token" => {
                let tname = toks
                    .get(1)
                    .ok_or_else(|| Error::parse("missing token name", line))?;
                let value = toks.get(2..).map(|v| v.join(" ")).unwrap_or_default();
                tokens.push(TokenSpec {
                    name: tname.to_string(),
                    default_value: value,
                });
            }
            "emit" => {
                emit_count = Some(num(
                    toks.get(1)
                        .ok_or_else(|| Error::parse("missing emit count", line))?,
                    line,
                )?);
            }
            "count" => {
                // Shorthand for a textual element descriptor.
                let (min_count, max_count) = range_pair(
                    toks.get(1)
                        .ok_or_else(|| Error::parse("missing count range", line))?,
                    line,
                )?;
                let max_payload: u16 = if toks.get(2) == Some(&"payload") {
                    num(
                        toks.get(3)
                            .ok_or_else(|| Error::parse("missing payload limit", line))?,
                        line,
                    )?
                } else {
                    64
                };
                options = Some(OptionDescriptor {
                    id_min: 0,
                    id_max: 0, // fixed up below once the vocabulary is known
                    min_count: min_count as u16,
                    max_count: max_count as u16,
                    max_payload,
                    defaults: vec![],
                });
            }
            other => {
                return Err(Error::parse(format!("unknown directive {other:?}"), line));
            }
        }
    }

    let name = name.ok_or_else(|| Error::parse("missing `schema <name>` line", 0))?;
    let textual_spec = if textual {
        if let Some(o) = options.as_mut() {
            o.id_max = tokens.len().saturating_sub(1) as u16;
        }
        Some(TextualSpec {
            default_count: emit_count.unwrap_or(tokens.len()),
            tokens,
        })
    } else {
        None
    };
    ProtocolSchema {
        name,
        header_bits: if textual { 0 } else { header_bits },
        fields,
        options,
        textual: textual_spec,
    }
    .into_shared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{make_carrier, IatModel};

    const SAMPLE: &str = "\
schema custom64
bits 64
field ident offset 0 len 16 kind random
field csum offset 16 len 16 kind checksum cover 0 to 64
field ttl offset 32 len 8 kind decrementing min 0 max 255 init 64
field proto offset 40 len 8 kind enumerated values 1,6,17
field pad offset 48 len 16 kind padding
options ids 1..16 count 0..4 payload 8
";

    #[test]
    fn parses_and_generates() {
        let schema = parse_schema_text(SAMPLE).unwrap();
        assert_eq!(schema.name, "custom64");
        assert_eq!(schema.header_bits, 64);
        let s = make_carrier(&schema, 4, &IatModel::Constant(10), 1).unwrap();
        assert!(s.validate().is_empty());
    }

    #[test]
    fn textual_schema_parses() {
        let text = "\
schema headerish
textual
token Host example.com
token X-Extra 0
emit 1
count 0..8 payload 64
";
        let schema = parse_schema_text(text).unwrap();
        assert!(schema.is_textual());
        assert_eq!(schema.textual.as_ref().unwrap().default_count, 1);
        let s = make_carrier(&schema, 2, &IatModel::Constant(10), 1).unwrap();
        assert!(s.validate().is_empty());
        assert_eq!(s.pdus[0].options.len(), 1);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "schema x\nbits 32\nfield a offset 0 len 8 kind bogus\n";
        match parse_schema_text(bad) {
            Err(Error::Parse { at, .. }) => assert_eq!(at, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn overlapping_fields_rejected() {
        let bad = "\
schema x
bits 32
field a offset 0 len 16 kind random
field b offset 8 len 16 kind random
";
        assert!(parse_schema_text(bad).is_err());
    }
}

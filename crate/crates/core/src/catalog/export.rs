//! Catalog serialization: a structured-markup record per pattern using the
//! standard pattern-language attribute names (pattern id, name, alias,
//! context, evidence), plus a tabular TSV form.

use super::{Noise, PatternDescriptor, PatternId, Semantic, Syntax};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    /// XML-style markup, one `<pattern>` record per catalog entry.
    StructuredMarkup,
    /// Tab-separated table with a header row.
    Tabular,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn unescape(s: &str) -> String {
    s.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&amp;", "&")
}

pub fn export_catalog(descriptors: &[PatternDescriptor], format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::StructuredMarkup => {
            let mut out = String::from("<catalog>\n");
            for d in descriptors {
                out.push_str(&format!("  <pattern id=\"{}\">\n", d.id.code()));
                out.push_str(&format!("    <name>{}</name>\n", escape(&d.name)));
                if let Some(a) = &d.alias {
                    out.push_str(&format!("    <alias>{}</alias>\n", escape(a)));
                }
                out.push_str(&format!(
                    "    <context>{}</context>\n",
                    escape(&d.context_path.join(" > "))
                ));
                out.push_str(&format!("    <semantic>{}</semantic>\n", d.semantic.name()));
                out.push_str(&format!("    <syntax>{}</syntax>\n", d.syntax.name()));
                out.push_str(&format!("    <noise>{}</noise>\n", d.noise.name()));
                out.push_str(&format!("    <evidence count=\"{}\"/>\n", d.evidence_count));
                for note in &d.footnotes {
                    out.push_str(&format!("    <footnote>{}</footnote>\n", escape(note)));
                }
                out.push_str("  </pattern>\n");
            }
            out.push_str("</catalog>\n");
            out.into_bytes()
        }
        ExportFormat::Tabular => {
            let mut out = String::from(
                "id\tname\talias\tcontext\tsemantic\tsyntax\tnoise\tevidence\tfootnotes\n",
            );
            for d in descriptors {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                    d.id.code(),
                    d.name,
                    d.alias.as_deref().unwrap_or(""),
                    d.context_path.join(" > "),
                    d.semantic.name(),
                    d.syntax.name(),
                    d.noise.name(),
                    d.evidence_count,
                    d.footnotes.join("|"),
                ));
            }
            out.into_bytes()
        }
    }
}

/// Pulls `<tag>value</tag>` out of a record body.
fn tag_value<'a>(body: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = body.find(&open)? + open.len();
    let end = body[start..].find(&close)? + start;
    Some(&body[start..end])
}

fn tag_values<'a>(body: &'a str, tag: &str) -> Vec<&'a str> {
    let mut out = Vec::new();
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let mut rest = body;
    while let Some(i) = rest.find(&open) {
        let start = i + open.len();
        let Some(j) = rest[start..].find(&close) else {
            break;
        };
        out.push(&rest[start..start + j]);
        rest = &rest[start + j + close.len()..];
    }
    out
}

fn parse_markup(text: &str) -> Result<Vec<PatternDescriptor>> {
    let mut out = Vec::new();
    let mut rest = text;
    let mut record = 0usize;
    while let Some(i) = rest.find("<pattern id=\"") {
        record += 1;
        let start = i + "<pattern id=\"".len();
        let Some(q) = rest[start..].find('"') else {
            return Err(Error::parse(format!("record {record}: unterminated id"), 0));
        };
        let code = &rest[start..start + q];
        let id = PatternId::parse(code).ok_or_else(|| {
            Error::parse(format!("record {record}: unknown pattern id {code:?}"), 0)
        })?;
        let Some(end) = rest[start..].find("</pattern>") else {
            return Err(Error::parse(
                format!("record {record} ({code}): missing </pattern>"),
                0,
            ));
        };
        let body = &rest[start..start + end];
        let req = |tag: &str| {
            tag_value(body, tag).ok_or_else(|| {
                Error::parse(format!("record {record} ({code}): missing <{tag}>"), 0)
            })
        };
        let name = unescape(req("name")?);
        let context = unescape(req("context")?);
        let semantic = Semantic::parse(req("semantic")?)
            .ok_or_else(|| Error::parse(format!("record {record} ({code}): bad semantic"), 0))?;
        let syntax = Syntax::parse(req("syntax")?)
            .ok_or_else(|| Error::parse(format!("record {record} ({code}): bad syntax"), 0))?;
        let noise = Noise::parse(req("noise")?)
            .ok_or_else(|| Error::parse(format!("record {record} ({code}): bad noise"), 0))?;
        let ev_marker = "<evidence count=\"";
        let evidence_count = body
            .find(ev_marker)
            .and_then(|p| {
                let s = &body[p + ev_marker.len()..];
                let q = s.find('"')?;
                s[..q].parse::<u32>().ok()
            })
            .ok_or_else(|| {
                Error::parse(format!("record {record} ({code}): missing <evidence>"), 0)
            })?;
        out.push(PatternDescriptor {
            id,
            name,
            alias: tag_value(body, "alias").map(unescape),
            context_path: context.split(" > ").map(str::to_string).collect(),
            semantic,
            syntax,
            noise,
            evidence_count,
            footnotes: tag_values(body, "footnote")
                .into_iter()
                .map(unescape)
                .collect(),
        });
        rest = &rest[start + end..];
    }
    if out.is_empty() {
        return Err(Error::parse("no pattern records found", 0));
    }
    Ok(out)
}

fn parse_tabular(text: &str) -> Result<Vec<PatternDescriptor>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if !header.starts_with("id\t") {
        return Err(Error::parse("missing tabular header", 1));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = (i + 2) as u64;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 9 {
            return Err(Error::parse(
                format!(
                    "record {:?}: expected 9 columns, got {}",
                    cols.first(),
                    cols.len()
                ),
                at,
            ));
        }
        let id = PatternId::parse(cols[0])
            .ok_or_else(|| Error::parse(format!("unknown pattern id {:?}", cols[0]), at))?;
        if cols[1].is_empty() {
            return Err(Error::parse(
                format!("record {}: missing name", cols[0]),
                at,
            ));
        }
        out.push(PatternDescriptor {
            id,
            name: cols[1].to_string(),
            alias: if cols[2].is_empty() {
                None
            } else {
                Some(cols[2].to_string())
            },
            context_path: cols[3].split(" > ").map(str::to_string).collect(),
            semantic: Semantic::parse(cols[4])
                .ok_or_else(|| Error::parse(format!("record {}: bad semantic", cols[0]), at))?,
            syntax: Syntax::parse(cols[5])
                .ok_or_else(|| Error::parse(format!("record {}: bad syntax", cols[0]), at))?,
            noise: Noise::parse(cols[6])
                .ok_or_else(|| Error::parse(format!("record {}: bad noise", cols[0]), at))?,
            evidence_count: cols[7]
                .parse()
                .map_err(|_| Error::parse(format!("record {}: bad evidence count", cols[0]), at))?,
            footnotes: if cols[8].is_empty() {
                vec![]
            } else {
                cols[8].split('|').map(str::to_string).collect()
            },
        });
    }
    if out.is_empty() {
        return Err(Error::parse("no pattern records found", 0));
    }
    Ok(out)
}

/// Parses either export format, auto-detected.
pub fn import_catalog(bytes: &[u8]) -> Result<Vec<PatternDescriptor>> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::parse("not utf-8", 0))?;
    if text.trim_start().starts_with("<catalog>") {
        parse_markup(text)
    } else {
        parse_tabular(text)
    }
}

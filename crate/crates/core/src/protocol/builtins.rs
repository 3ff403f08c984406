//! Shipped protocol schemas.
//!
//! Five carriers modeled on the protocols most often named by surveyed
//! hiding techniques: IPv4-, IPv6-, TCP- and DHCP-style binary headers plus
//! an HTTP-style textual token header. These are plausible lookalikes, not
//! RFC-conformant stacks.

use super::{
    Field, FieldKind, LengthMeasure, OptionDescriptor, ProtocolSchema, TextualSpec, TokenSpec,
};
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::sync::Arc;

fn field(name: &str, offset: u32, len: u32, kind: FieldKind) -> Field {
    Field {
        name: name.into(),
        offset,
        len,
        kind,
    }
}

fn ipv4_like() -> ProtocolSchema {
    ProtocolSchema {
        name: "ipv4_like".into(),
        header_bits: 160,
        fields: vec![
            field("version", 0, 4, FieldKind::Enumerated { allowed: vec![4] }),
            field(
                "ihl",
                4,
                4,
                FieldKind::Length {
                    measure: LengthMeasure::HeaderWords,
                },
            ),
            field("dscp_ecn", 8, 8, FieldKind::Reserved),
            field(
                "total_length",
                16,
                16,
                FieldKind::Length {
                    measure: LengthMeasure::TotalBytes,
                },
            ),
            field("identification", 32, 16, FieldKind::Random),
            field("flag_reserved", 48, 1, FieldKind::Reserved),
            field(
                "flag_df",
                49,
                1,
                FieldKind::Enumerated {
                    allowed: vec![0, 1],
                },
            ),
            field(
                "flag_mf",
                50,
                1,
                FieldKind::Enumerated {
                    allowed: vec![0, 1],
                },
            ),
            field("fragment_offset", 51, 13, FieldKind::Padding),
            field(
                "ttl",
                64,
                8,
                FieldKind::Decrementing {
                    min: 1,
                    max: 255,
                    initial: 64,
                },
            ),
            field(
                "protocol",
                72,
                8,
                FieldKind::Enumerated {
                    allowed: vec![1, 6, 17],
                },
            ),
            field(
                "header_checksum",
                80,
                16,
                FieldKind::Checksum {
                    cover_offset: 0,
                    cover_len: 160,
                },
            ),
            field("src_addr", 96, 32, FieldKind::Address),
            field("dst_addr", 128, 32, FieldKind::Address),
        ],
        options: Some(OptionDescriptor {
            id_min: 1,
            id_max: 254,
            min_count: 0,
            max_count: 8,
            max_payload: 16,
            defaults: vec![],
        }),
        textual: None,
    }
}

fn ipv6_like() -> ProtocolSchema {
    ProtocolSchema {
        name: "ipv6_like".into(),
        header_bits: 320,
        fields: vec![
            field("version", 0, 4, FieldKind::Enumerated { allowed: vec![6] }),
            field("traffic_class", 4, 8, FieldKind::Reserved),
            field("flow_label", 12, 20, FieldKind::Random),
            field(
                "payload_length",
                32,
                16,
                FieldKind::Length {
                    measure: LengthMeasure::AfterHeaderBytes,
                },
            ),
            field(
                "next_header",
                48,
                8,
                FieldKind::Enumerated {
                    allowed: vec![6, 17, 58],
                },
            ),
            field(
                "hop_limit",
                56,
                8,
                FieldKind::Decrementing {
                    min: 1,
                    max: 255,
                    initial: 64,
                },
            ),
            field("src_addr", 64, 128, FieldKind::Address),
            field("dst_addr", 192, 128, FieldKind::Address),
        ],
        // Extension header list.
        options: Some(OptionDescriptor {
            id_min: 1,
            id_max: 254,
            min_count: 0,
            max_count: 4,
            max_payload: 16,
            defaults: vec![],
        }),
        textual: None,
    }
}

fn tcp_like() -> ProtocolSchema {
    ProtocolSchema {
        name: "tcp_like".into(),
        header_bits: 160,
        fields: vec![
            field("src_port", 0, 16, FieldKind::Address),
            field("dst_port", 16, 16, FieldKind::Address),
            field("isn", 32, 32, FieldKind::Random),
            field("ack_number", 64, 32, FieldKind::Sequential),
            field(
                "data_offset",
                96,
                4,
                FieldKind::Length {
                    measure: LengthMeasure::HeaderWords,
                },
            ),
            field("reserved", 100, 4, FieldKind::Reserved),
            field(
                "flags",
                104,
                8,
                FieldKind::Enumerated {
                    allowed: vec![0x02, 0x10, 0x11, 0x18, 0x04],
                },
            ),
            field("window", 112, 16, FieldKind::Random),
            field(
                "checksum",
                128,
                16,
                FieldKind::Checksum {
                    cover_offset: 0,
                    cover_len: 160,
                },
            ),
            field("urgent_ptr", 144, 16, FieldKind::Padding),
        ],
        options: Some(OptionDescriptor {
            id_min: 1,
            id_max: 254,
            min_count: 0,
            max_count: 8,
            max_payload: 16,
            defaults: vec![(2, vec![0x05, 0xb4]), (4, vec![])],
        }),
        textual: None,
    }
}

fn dhcp_like() -> ProtocolSchema {
    ProtocolSchema {
        name: "dhcp_like".into(),
        header_bits: 480,
        fields: vec![
            field(
                "op",
                0,
                8,
                FieldKind::Enumerated {
                    allowed: vec![1, 2],
                },
            ),
            field("htype", 8, 8, FieldKind::Enumerated { allowed: vec![1] }),
            field("hlen", 16, 8, FieldKind::Enumerated { allowed: vec![6] }),
            field(
                "hops",
                24,
                8,
                FieldKind::Decrementing {
                    min: 0,
                    max: 16,
                    initial: 0,
                },
            ),
            field("xid", 32, 32, FieldKind::Random),
            field("secs", 64, 16, FieldKind::Sequential),
            field(
                "flag_broadcast",
                80,
                1,
                FieldKind::Enumerated {
                    allowed: vec![0, 1],
                },
            ),
            field("flags_mbz", 81, 15, FieldKind::Reserved),
            field("ciaddr", 96, 32, FieldKind::Address),
            field("yiaddr", 128, 32, FieldKind::Address),
            field("chaddr", 160, 64, FieldKind::Address),
            field(
                "sname",
                224,
                128,
                FieldKind::TextToken {
                    default_text: "srv01".into(),
                },
            ),
            field(
                "file",
                352,
                128,
                FieldKind::TextToken {
                    default_text: "boot.img".into(),
                },
            ),
        ],
        options: Some(OptionDescriptor {
            id_min: 1,
            id_max: 254,
            min_count: 0,
            max_count: 16,
            max_payload: 16,
            defaults: vec![
                (1, vec![255, 255, 255, 0]),
                (3, vec![10, 0, 0, 1]),
                (6, vec![10, 0, 0, 53]),
                (51, vec![0, 1, 81, 128]),
            ],
        }),
        textual: None,
    }
}

fn http_like() -> ProtocolSchema {
    let tokens = [
        ("Host", "example.com"),
        ("User-Agent", "generic/1.0"),
        ("Accept", "*/*"),
        ("Accept-Language", "en"),
        ("Connection", "keep-alive"),
        ("Cache-Control", "no-cache"),
        // Extension tokens; not emitted by fresh carriers.
        ("X-Request-Id", "0"),
        ("X-Trace", "0"),
    ];
    let spec = TextualSpec {
        tokens: tokens
            .iter()
            .map(|(n, v)| TokenSpec {
                name: (*n).into(),
                default_value: (*v).into(),
            })
            .collect(),
        default_count: 6,
    };
    ProtocolSchema {
        name: "http_like".into(),
        header_bits: 0,
        fields: vec![],
        options: Some(OptionDescriptor {
            id_min: 0,
            id_max: 7,
            min_count: 0,
            max_count: 12,
            max_payload: 64,
            defaults: vec![],
        }),
        textual: Some(spec),
    }
}

/// Returns a shipped schema by name. Accepts the short protocol name used
/// in settings files (`ipv4`) as well as the full schema name (`ipv4_like`).
pub fn builtin_schema(name: &str) -> Result<Arc<ProtocolSchema>> {
    let full = if name.ends_with("_like") {
        name.to_string()
    } else {
        format!("{name}_like")
    };
    let schema = match full.as_str() {
        "ipv4_like" => ipv4_like(),
        "ipv6_like" => ipv6_like(),
        "tcp_like" => tcp_like(),
        "dhcp_like" => dhcp_like(),
        "http_like" => http_like(),
        _ => return Err(Error::config(format!("unknown schema {name}"))),
    };
    schema.into_shared()
}

pub fn builtin_schemas() -> Vec<Arc<ProtocolSchema>> {
    [
        "ipv4_like",
        "ipv6_like",
        "tcp_like",
        "dhcp_like",
        "http_like",
    ]
    .iter()
    .map(|n| builtin_schema(n).expect("builtin schemas are valid"))
    .collect()
}

/// Name-indexed schema set: the built-ins plus any schemas loaded from
/// declarative schema files.
#[derive(Clone)]
pub struct SchemaRegistry {
    map: BTreeMap<String, Arc<ProtocolSchema>>,
}

impl Default for SchemaRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl SchemaRegistry {
    pub fn new() -> Self {
        let mut map = BTreeMap::new();
        for s in builtin_schemas() {
            map.insert(s.name.clone(), s);
        }
        SchemaRegistry { map }
    }

    pub fn insert(&mut self, schema: Arc<ProtocolSchema>) {
        self.map.insert(schema.name.clone(), schema);
    }

    /// Resolves a schema by exact name, falling back to `<name>_like`.
    pub fn get(&self, name: &str) -> Result<Arc<ProtocolSchema>> {
        if let Some(s) = self.map.get(name) {
            return Ok(s.clone());
        }
        let full = format!("{name}_like");
        self.map
            .get(&full)
            .cloned()
            .ok_or_else(|| Error::config(format!("unknown schema {name}")))
    }

    pub fn load_schema_file(&mut self, text: &str) -> Result<Arc<ProtocolSchema>> {
        let schema = super::parse_schema_text(text)?;
        self.insert(schema.clone());
        Ok(schema)
    }

    pub fn names(&self) -> Vec<&str> {
        self.map.keys().map(String::as_str).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_pass_their_own_invariants() {
        assert_eq!(builtin_schemas().len(), 5);
    }

    #[test]
    fn short_names_resolve() {
        assert_eq!(builtin_schema("ipv4").unwrap().name, "ipv4_like");
        assert_eq!(builtin_schema("http").unwrap().name, "http_like");
        assert!(builtin_schema("sctp").is_err());
    }

    #[test]
    fn fig_style_field_placement() {
        // The identifier-style random field sits at offset 32, 16 bits; the
        // initial-sequence-number-style field at offset 32, 32 bits.
        let v4 = builtin_schema("ipv4_like").unwrap();
        let f = v4.field("identification").unwrap();
        assert_eq!((f.offset, f.len), (32, 16));
        assert_eq!(f.kind.tag().name(), "random");
        let tcp = builtin_schema("tcp_like").unwrap();
        let f = tcp.field("isn").unwrap();
        assert_eq!((f.offset, f.len), (32, 32));
    }
}

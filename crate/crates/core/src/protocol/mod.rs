//! Protocol schemas and the PDU/stream representation.
//!
//! A [`ProtocolSchema`] declares either a bit-level header layout (fields
//! with offsets, lengths and kinds) or a textual token header, plus an
//! optional variable element list. A [`Pdu`] is one unit of the overt
//! carrier; a [`PduStream`] is the ordered sequence the codecs operate on.
//! Everything is an immutable value: field writes return a new PDU.

mod builtins;
mod carrier;
mod schema_text;
mod trace;

pub use builtins::{builtin_schema, builtin_schemas, SchemaRegistry};
pub use carrier::{make_carrier, IatModel};
pub use schema_text::parse_schema_text;
pub use trace::{load_trace, read_trace, save_trace, write_trace};

use crate::bits::Bits;
use crate::error::{Error, Result};
use std::sync::Arc;

/// What a Length-kind field measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthMeasure {
    /// Header bytes + element bytes + payload bytes.
    TotalBytes,
    /// ceil((header bytes + element bytes) / 4), an IHL-style word count.
    HeaderWords,
    /// Element bytes + payload bytes (everything after the fixed header).
    AfterHeaderBytes,
}

/// Role of a header field. Kinds drive default value synthesis, validation,
/// dependent-field recomputation and warden rule targeting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldKind {
    /// Reserved or currently unused bits; default zero.
    Reserved,
    /// Nominally random value (identifiers, initial sequence numbers).
    Random,
    /// Monotone per-stream counter.
    Sequential,
    /// Hop-count style field with a legal range and a start value.
    Decrementing { min: u64, max: u64, initial: u64 },
    /// Ones'-complement checksum over the declared bit range of the fixed
    /// header. The range length must be a multiple of 16.
    Checksum { cover_offset: u32, cover_len: u32 },
    /// Endpoint identifier; constant per stream.
    Address,
    /// Derived length field.
    Length { measure: LengthMeasure },
    /// Field restricted to an explicit set of legal values.
    Enumerated { allowed: Vec<u64> },
    /// Filler bits; default zero, content ignored by validation.
    Padding,
    /// NUL-terminated text embedded in a binary header.
    TextToken { default_text: String },
}

/// Discriminant used by selectors (warden rules, settings checks).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKindTag {
    Reserved,
    Random,
    Sequential,
    Decrementing,
    Checksum,
    Address,
    Length,
    Enumerated,
    Padding,
    TextToken,
}

impl FieldKind {
    pub fn tag(&self) -> FieldKindTag {
        match self {
            FieldKind::Reserved => FieldKindTag::Reserved,
            FieldKind::Random => FieldKindTag::Random,
            FieldKind::Sequential => FieldKindTag::Sequential,
            FieldKind::Decrementing { .. } => FieldKindTag::Decrementing,
            FieldKind::Checksum { .. } => FieldKindTag::Checksum,
            FieldKind::Address => FieldKindTag::Address,
            FieldKind::Length { .. } => FieldKindTag::Length,
            FieldKind::Enumerated { .. } => FieldKindTag::Enumerated,
            FieldKind::Padding => FieldKindTag::Padding,
            FieldKind::TextToken { .. } => FieldKindTag::TextToken,
        }
    }
}

impl FieldKindTag {
    pub fn name(self) -> &'static str {
        match self {
            FieldKindTag::Reserved => "reserved",
            FieldKindTag::Random => "random",
            FieldKindTag::Sequential => "sequential",
            FieldKindTag::Decrementing => "decrementing",
            FieldKindTag::Checksum => "checksum",
            FieldKindTag::Address => "address",
            FieldKindTag::Length => "length",
            FieldKindTag::Enumerated => "enumerated",
            FieldKindTag::Padding => "padding",
            FieldKindTag::TextToken => "texttoken",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "reserved" => FieldKindTag::Reserved,
            "random" => FieldKindTag::Random,
            "sequential" => FieldKindTag::Sequential,
            "decrementing" => FieldKindTag::Decrementing,
            "checksum" => FieldKindTag::Checksum,
            "address" => FieldKindTag::Address,
            "length" => FieldKindTag::Length,
            "enumerated" => FieldKindTag::Enumerated,
            "padding" => FieldKindTag::Padding,
            "texttoken" => FieldKindTag::TextToken,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    pub name: String,
    pub offset: u32,
    pub len: u32,
    pub kind: FieldKind,
}

/// Bounds and vocabulary of a schema's variable element list (options,
/// extension headers, header tokens).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptionDescriptor {
    pub id_min: u16,
    pub id_max: u16,
    pub min_count: u16,
    pub max_count: u16,
    pub max_payload: u16,
    /// Canonical default elements emitted by the carrier generator. Element
    /// count codecs also use these as their vocabulary.
    pub defaults: Vec<(u16, Vec<u8>)>,
}

/// Token vocabulary of a textual schema. Element ids index into `tokens`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSpec {
    pub name: String,
    pub default_value: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextualSpec {
    pub tokens: Vec<TokenSpec>,
    /// How many leading vocabulary tokens a fresh carrier emits; the rest
    /// are extension tokens available to structure-adding codecs.
    pub default_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolSchema {
    pub name: String,
    pub header_bits: u32,
    pub fields: Vec<Field>,
    pub options: Option<OptionDescriptor>,
    pub textual: Option<TextualSpec>,
}

impl ProtocolSchema {
    /// Checks the structural invariants and wraps the schema for sharing.
    pub fn into_shared(self) -> Result<Arc<ProtocolSchema>> {
        self.check()?;
        Ok(Arc::new(self))
    }

    pub fn check(&self) -> Result<()> {
        if let Some(t) = &self.textual {
            if self.header_bits != 0 || !self.fields.is_empty() {
                return Err(Error::config(format!(
                    "schema {}: textual schemas must not declare a bit layout",
                    self.name
                )));
            }
            if t.tokens.is_empty() {
                return Err(Error::config(format!(
                    "schema {}: textual schema needs at least one token",
                    self.name
                )));
            }
            if t.default_count > t.tokens.len() {
                return Err(Error::config(format!(
                    "schema {}: default token count exceeds vocabulary",
                    self.name
                )));
            }
            if self.options.is_none() {
                return Err(Error::config(format!(
                    "schema {}: textual schema needs an element descriptor",
                    self.name
                )));
            }
        } else {
            if self.header_bits == 0 || self.fields.is_empty() {
                return Err(Error::config(format!(
                    "schema {}: binary schemas need a non-empty bit layout",
                    self.name
                )));
            }
            // Field ranges must be disjoint and inside the header.
            let mut ranges: Vec<(u32, u32, &str)> = self
                .fields
                .iter()
                .map(|f| (f.offset, f.offset + f.len, f.name.as_str()))
                .collect();
            ranges.sort();
            for w in ranges.windows(2) {
                if w[0].1 > w[1].0 {
                    return Err(Error::config(format!(
                        "schema {}: fields {} and {} overlap",
                        self.name, w[0].2, w[1].2
                    )));
                }
            }
            if let Some((_, end, name)) = ranges.last() {
                if *end > self.header_bits {
                    return Err(Error::config(format!(
                        "schema {}: field {} exceeds header_bits",
                        self.name, name
                    )));
                }
            }
            for f in &self.fields {
                match &f.kind {
                    FieldKind::Checksum {
                        cover_offset,
                        cover_len,
                    } => {
                        if cover_len % 16 != 0 || cover_offset + cover_len > self.header_bits {
                            return Err(Error::config(format!(
                                "schema {}: checksum coverage of {} must be a 16-bit multiple inside the header",
                                self.name, f.name
                            )));
                        }
                        if f.len != 16 {
                            return Err(Error::config(format!(
                                "schema {}: checksum field {} must be 16 bits",
                                self.name, f.name
                            )));
                        }
                    }
                    FieldKind::Enumerated { allowed } => {
                        if allowed.is_empty() {
                            return Err(Error::config(format!(
                                "schema {}: enumerated field {} needs legal values",
                                self.name, f.name
                            )));
                        }
                    }
                    FieldKind::Decrementing { min, max, initial }
                        if min > max || !(min..=max).contains(&initial) =>
                    {
                        return Err(Error::config(format!(
                            "schema {}: decrementing field {} has an empty range",
                            self.name, f.name
                        )));
                    }
                    _ => {}
                }
                // Value-typed kinds are validated through 64-bit reads.
                if f.len > 64
                    && matches!(
                        f.kind.tag(),
                        FieldKindTag::Enumerated
                            | FieldKindTag::Decrementing
                            | FieldKindTag::Length
                    )
                {
                    return Err(Error::config(format!(
                        "schema {}: field {} of kind {} cannot exceed 64 bits",
                        self.name,
                        f.name,
                        f.kind.tag().name()
                    )));
                }
                if f.len == 0 {
                    return Err(Error::config(format!(
                        "schema {}: zero-length field {}",
                        self.name, f.name
                    )));
                }
            }
        }
        if let Some(o) = &self.options {
            if o.id_min > o.id_max || o.min_count > o.max_count {
                return Err(Error::config(format!(
                    "schema {}: bad element descriptor bounds",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn is_textual(&self) -> bool {
        self.textual.is_some()
    }

    pub fn field(&self, name: &str) -> Result<&Field> {
        self.fields
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| Error::config(format!("schema {}: unknown field {name}", self.name)))
    }

    /// Fields whose bit ranges intersect `[offset, offset+len)`.
    pub fn fields_covering(&self, offset: u32, len: u32) -> Vec<&Field> {
        self.fields
            .iter()
            .filter(|f| f.offset < offset + len && offset < f.offset + f.len)
            .collect()
    }

    /// Canonical token name for a textual element id.
    pub fn token_name(&self, id: u16) -> Option<&str> {
        self.textual
            .as_ref()
            .and_then(|t| t.tokens.get(id as usize))
            .map(|t| t.name.as_str())
    }

    /// Id of a token, matched case-insensitively.
    pub fn token_id(&self, name: &str) -> Option<u16> {
        self.textual.as_ref().and_then(|t| {
            t.tokens
                .iter()
                .position(|tok| tok.name.eq_ignore_ascii_case(name))
                .map(|i| i as u16)
        })
    }
}

/// One element of a PDU's variable list. For textual schemas the payload is
/// the full rendered header line, e.g. `Host: example.com`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PduElement {
    pub id: u16,
    pub payload: Vec<u8>,
}

impl PduElement {
    pub fn new(id: u16, payload: Vec<u8>) -> Self {
        PduElement { id, payload }
    }

    /// Renders a textual header line for token `id` of `schema`.
    pub fn render_token(schema: &ProtocolSchema, id: u16, value: &str) -> Self {
        let name = schema.token_name(id).unwrap_or("X-Unknown");
        PduElement {
            id,
            payload: format!("{name}: {value}").into_bytes(),
        }
    }

    /// Splits a textual payload into name and value parts at the colon.
    pub fn token_parts(&self) -> Option<(&[u8], &[u8])> {
        let pos = self.payload.iter().position(|&b| b == b':')?;
        Some((&self.payload[..pos], &self.payload[pos + 1..]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pdu {
    pub schema: Arc<ProtocolSchema>,
    pub header: Bits,
    pub options: Vec<PduElement>,
    pub payload: Vec<u8>,
    /// Microseconds since stream start.
    pub timestamp_us: u64,
    pub seq: u64,
    /// Set by the channel when it flipped bits in transit. Metadata only:
    /// validation always verifies checksums regardless.
    pub corrupted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PduStream {
    pub schema: Arc<ProtocolSchema>,
    pub pdus: Vec<Pdu>,
}

/// A validation finding. Violations are data, not errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    ChecksumMismatch {
        field: String,
    },
    LengthMismatch {
        field: String,
        expected: u64,
        actual: u64,
    },
    IllegalEnumValue {
        field: String,
        value: u64,
    },
    ValueOutOfRange {
        field: String,
        value: u64,
    },
    ElementCountOutOfRange {
        count: usize,
    },
    UnknownElementId {
        id: u16,
    },
    ElementPayloadTooLong {
        id: u16,
    },
    TokenNameMismatch {
        index: usize,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::ChecksumMismatch { field } => write!(f, "checksum mismatch in {field}"),
            Violation::LengthMismatch {
                field,
                expected,
                actual,
            } => write!(f, "length field {field} is {actual}, expected {expected}"),
            Violation::IllegalEnumValue { field, value } => {
                write!(f, "illegal value {value} in enumerated field {field}")
            }
            Violation::ValueOutOfRange { field, value } => {
                write!(f, "value {value} outside legal range of {field}")
            }
            Violation::ElementCountOutOfRange { count } => {
                write!(f, "element count {count} outside descriptor bounds")
            }
            Violation::UnknownElementId { id } => write!(f, "element id {id} outside id space"),
            Violation::ElementPayloadTooLong { id } => {
                write!(f, "element {id} payload exceeds descriptor limit")
            }
            Violation::TokenNameMismatch { index } => {
                write!(
                    f,
                    "token at position {index} does not match its vocabulary name"
                )
            }
        }
    }
}

/// 16-bit ones'-complement sum over `[cover_offset, cover_offset+cover_len)`
/// with the checksum field's own bits treated as zero.
fn internet_checksum(header: &Bits, cover_offset: u32, cover_len: u32, skip: (u32, u32)) -> u16 {
    let mut sum: u32 = 0;
    let mut off = cover_offset;
    let end = cover_offset + cover_len;
    while off < end {
        let mut word = 0u64;
        for i in 0..16u32 {
            let bit_pos = off + i;
            let in_skip = bit_pos >= skip.0 && bit_pos < skip.0 + skip.1;
            let bit = if in_skip {
                false
            } else {
                header.get(bit_pos as usize)
            };
            word = (word << 1) | bit as u64;
        }
        sum += word as u32;
        off += 16;
    }
    while sum > 0xffff {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

impl Pdu {
    pub fn read_field(&self, name: &str) -> Result<Bits> {
        let f = self.schema.field(name)?;
        Ok(self.header.read_range(f.offset as usize, f.len as usize))
    }

    pub fn read_field_uint(&self, name: &str) -> Result<u64> {
        let f = self.schema.field(name)?;
        if f.len > 64 {
            return Err(Error::config(format!("field {name} wider than 64 bits")));
        }
        Ok(self.header.read_uint(f.offset as usize, f.len as usize))
    }

    /// Replaces a field and recomputes dependent Length/Checksum fields.
    pub fn write_field(&self, name: &str, bits: &Bits) -> Result<Pdu> {
        let mut p = self.write_field_raw(name, bits)?;
        p.recompute_derived();
        Ok(p)
    }

    /// Replaces a field without touching dependent fields. Used by the
    /// corruption codec and by warden rules that defer recomputation.
    pub fn write_field_raw(&self, name: &str, bits: &Bits) -> Result<Pdu> {
        let f = self.schema.field(name)?;
        if bits.len() != f.len as usize {
            return Err(Error::config(format!(
                "field {name} is {} bits, got {}",
                f.len,
                bits.len()
            )));
        }
        let mut p = self.clone();
        p.header.write_range(f.offset as usize, bits);
        Ok(p)
    }

    pub fn write_field_uint(&self, name: &str, value: u64) -> Result<Pdu> {
        let f = self.schema.field(name)?;
        if f.len > 64 {
            return Err(Error::config(format!("field {name} wider than 64 bits")));
        }
        self.write_field(name, &Bits::from_uint(value, f.len as usize))
    }

    /// Total wire size in bytes: fixed header + elements + payload.
    pub fn total_bytes(&self) -> u64 {
        let header = (self.schema.header_bits as u64).div_ceil(8);
        header + self.element_bytes() + self.payload.len() as u64
    }

    pub fn element_bytes(&self) -> u64 {
        self.options.iter().map(|e| e.payload.len() as u64).sum()
    }

    fn length_value(&self, measure: LengthMeasure) -> u64 {
        let header = (self.schema.header_bits as u64).div_ceil(8);
        match measure {
            LengthMeasure::TotalBytes => self.total_bytes(),
            LengthMeasure::HeaderWords => (header + self.element_bytes()).div_ceil(4),
            LengthMeasure::AfterHeaderBytes => self.element_bytes() + self.payload.len() as u64,
        }
    }

    /// Recomputes Length fields, then Checksum fields, in place.
    pub fn recompute_derived(&mut self) {
        let schema = self.schema.clone();
        for f in &schema.fields {
            if let FieldKind::Length { measure } = f.kind {
                let v = self.length_value(measure) & mask(f.len);
                self.header.write_uint(f.offset as usize, f.len as usize, v);
            }
        }
        for f in &schema.fields {
            if let FieldKind::Checksum {
                cover_offset,
                cover_len,
            } = f.kind
            {
                let c = internet_checksum(&self.header, cover_offset, cover_len, (f.offset, f.len));
                self.header
                    .write_uint(f.offset as usize, f.len as usize, c as u64);
            }
        }
    }

    /// Replaces the element list and recomputes dependents.
    pub fn with_options(&self, options: Vec<PduElement>) -> Pdu {
        let mut p = self.clone();
        p.options = options;
        p.recompute_derived();
        p
    }

    /// Replaces the payload and recomputes dependents.
    pub fn with_payload(&self, payload: Vec<u8>) -> Pdu {
        let mut p = self.clone();
        p.payload = payload;
        p.recompute_derived();
        p
    }
}

fn mask(len: u32) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

/// Checks checksum, length, enumerated, range and element invariants.
/// Returns an empty list iff the PDU is clean.
pub fn validate_pdu(pdu: &Pdu) -> Vec<Violation> {
    let mut out = Vec::new();
    let schema = &pdu.schema;
    for f in &schema.fields {
        match &f.kind {
            FieldKind::Checksum {
                cover_offset,
                cover_len,
            } => {
                let want =
                    internet_checksum(&pdu.header, *cover_offset, *cover_len, (f.offset, f.len));
                let got = pdu.header.read_uint(f.offset as usize, f.len as usize) as u16;
                if want != got {
                    out.push(Violation::ChecksumMismatch {
                        field: f.name.clone(),
                    });
                }
            }
            FieldKind::Length { measure } => {
                let expected = pdu.length_value(*measure) & mask(f.len);
                let actual = pdu.header.read_uint(f.offset as usize, f.len as usize);
                if expected != actual {
                    out.push(Violation::LengthMismatch {
                        field: f.name.clone(),
                        expected,
                        actual,
                    });
                }
            }
            FieldKind::Enumerated { allowed } => {
                let v = pdu.header.read_uint(f.offset as usize, f.len as usize);
                if !allowed.contains(&v) {
                    out.push(Violation::IllegalEnumValue {
                        field: f.name.clone(),
                        value: v,
                    });
                }
            }
            FieldKind::Decrementing { min, max, .. } => {
                let v = pdu.header.read_uint(f.offset as usize, f.len as usize);
                if v < *min || v > *max {
                    out.push(Violation::ValueOutOfRange {
                        field: f.name.clone(),
                        value: v,
                    });
                }
            }
            _ => {}
        }
    }
    if let Some(desc) = &schema.options {
        let n = pdu.options.len();
        if n < desc.min_count as usize || n > desc.max_count as usize {
            out.push(Violation::ElementCountOutOfRange { count: n });
        }
        for e in &pdu.options {
            if e.id < desc.id_min || e.id > desc.id_max {
                out.push(Violation::UnknownElementId { id: e.id });
            }
            if e.payload.len() > desc.max_payload as usize {
                out.push(Violation::ElementPayloadTooLong { id: e.id });
            }
        }
    } else if !pdu.options.is_empty() {
        out.push(Violation::ElementCountOutOfRange {
            count: pdu.options.len(),
        });
    }
    if schema.is_textual() {
        for (i, e) in pdu.options.iter().enumerate() {
            let ok = match (schema.token_name(e.id), e.token_parts()) {
                (Some(name), Some((raw, _))) => {
                    std::str::from_utf8(raw).is_ok_and(|s| s.eq_ignore_ascii_case(name))
                }
                _ => false,
            };
            if !ok {
                out.push(Violation::TokenNameMismatch { index: i });
            }
        }
    }
    out
}

impl PduStream {
    pub fn len(&self) -> usize {
        self.pdus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pdus.is_empty()
    }

    /// Inter-arrival times in stream order.
    pub fn iats(&self) -> Vec<u64> {
        self.pdus
            .windows(2)
            .map(|w| w[1].timestamp_us.saturating_sub(w[0].timestamp_us))
            .collect()
    }

    pub fn validate(&self) -> Vec<(u64, Violation)> {
        let mut out = Vec::new();
        for p in &self.pdus {
            for v in validate_pdu(p) {
                out.push((p.seq, v));
            }
        }
        out
    }
}

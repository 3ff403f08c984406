//! The `.cct` trace container: a self-describing binary format holding the
//! full schema followed by per-PDU records. All integers are fixed-width
//! big-endian, so round trips are bit-exact.

use super::{
    Field, FieldKind, LengthMeasure, OptionDescriptor, Pdu, PduElement, PduStream, ProtocolSchema,
    TextualSpec, TokenSpec,
};
use crate::bits::Bits;
use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

const MAGIC: &[u8; 4] = b"CCT1";

struct Writer<W: Write> {
    inner: W,
}

impl<W: Write> Writer<W> {
    fn u8(&mut self, v: u8) -> Result<()> {
        self.inner.write_all(&[v])?;
        Ok(())
    }
    fn u16(&mut self, v: u16) -> Result<()> {
        self.inner.write_all(&v.to_be_bytes())?;
        Ok(())
    }
    fn u32(&mut self, v: u32) -> Result<()> {
        self.inner.write_all(&v.to_be_bytes())?;
        Ok(())
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        self.inner.write_all(&v.to_be_bytes())?;
        Ok(())
    }
    fn bytes(&mut self, v: &[u8]) -> Result<()> {
        self.inner.write_all(v)?;
        Ok(())
    }
    fn str16(&mut self, s: &str) -> Result<()> {
        self.u16(s.len() as u16)?;
        self.bytes(s.as_bytes())
    }
    fn blob32(&mut self, b: &[u8]) -> Result<()> {
        self.u32(b.len() as u32)?;
        self.bytes(b)
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, what: &str) -> Error {
        Error::parse(what, self.pos as u64)
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(self.err("truncated file"));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str16(&mut self) -> Result<String> {
        let n = self.u16()? as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.err("invalid utf-8 string"))
    }
    fn blob32(&mut self) -> Result<Vec<u8>> {
        let n = self.u32()? as usize;
        Ok(self.take(n)?.to_vec())
    }
}

fn kind_tag(kind: &FieldKind) -> u8 {
    match kind {
        FieldKind::Reserved => 0,
        FieldKind::Random => 1,
        FieldKind::Sequential => 2,
        FieldKind::Decrementing { .. } => 3,
        FieldKind::Checksum { .. } => 4,
        FieldKind::Address => 5,
        FieldKind::Length { .. } => 6,
        FieldKind::Enumerated { .. } => 7,
        FieldKind::Padding => 8,
        FieldKind::TextToken { .. } => 9,
    }
}

fn write_schema<W: Write>(w: &mut Writer<W>, s: &ProtocolSchema) -> Result<()> {
    w.str16(&s.name)?;
    w.u32(s.header_bits)?;
    w.u16(s.fields.len() as u16)?;
    for f in &s.fields {
        w.str16(&f.name)?;
        w.u32(f.offset)?;
        w.u32(f.len)?;
        w.u8(kind_tag(&f.kind))?;
        match &f.kind {
            FieldKind::Decrementing { min, max, initial } => {
                w.u64(*min)?;
                w.u64(*max)?;
                w.u64(*initial)?;
            }
            FieldKind::Checksum {
                cover_offset,
                cover_len,
            } => {
                w.u32(*cover_offset)?;
                w.u32(*cover_len)?;
            }
            FieldKind::Length { measure } => {
                w.u8(match measure {
                    LengthMeasure::TotalBytes => 0,
                    LengthMeasure::HeaderWords => 1,
                    LengthMeasure::AfterHeaderBytes => 2,
                })?;
            }
            FieldKind::Enumerated { allowed } => {
                w.u16(allowed.len() as u16)?;
                for v in allowed {
                    w.u64(*v)?;
                }
            }
            FieldKind::TextToken { default_text } => {
                w.str16(default_text)?;
            }
            _ => {}
        }
    }
    match &s.options {
        Some(o) => {
            w.u8(1)?;
            w.u16(o.id_min)?;
            w.u16(o.id_max)?;
            w.u16(o.min_count)?;
            w.u16(o.max_count)?;
            w.u16(o.max_payload)?;
            w.u16(o.defaults.len() as u16)?;
            for (id, payload) in &o.defaults {
                w.u16(*id)?;
                w.blob32(payload)?;
            }
        }
        None => w.u8(0)?,
    }
    match &s.textual {
        Some(t) => {
            w.u8(1)?;
            w.u16(t.tokens.len() as u16)?;
            for tok in &t.tokens {
                w.str16(&tok.name)?;
                w.str16(&tok.default_value)?;
            }
            w.u16(t.default_count as u16)?;
        }
        None => w.u8(0)?,
    }
    Ok(())
}

fn read_schema(r: &mut Reader) -> Result<ProtocolSchema> {
    let name = r.str16()?;
    let header_bits = r.u32()?;
    let nfields = r.u16()? as usize;
    let mut fields = Vec::with_capacity(nfields);
    for _ in 0..nfields {
        let fname = r.str16()?;
        let offset = r.u32()?;
        let len = r.u32()?;
        let tag = r.u8()?;
        let kind = match tag {
            0 => FieldKind::Reserved,
            1 => FieldKind::Random,
            2 => FieldKind::Sequential,
            3 => FieldKind::Decrementing {
                min: r.u64()?,
                max: r.u64()?,
                initial: r.u64()?,
            },
            4 => FieldKind::Checksum {
                cover_offset: r.u32()?,
                cover_len: r.u32()?,
            },
            5 => FieldKind::Address,
            6 => FieldKind::Length {
                measure: match r.u8()? {
                    0 => LengthMeasure::TotalBytes,
                    1 => LengthMeasure::HeaderWords,
                    2 => LengthMeasure::AfterHeaderBytes,
                    _ => return Err(r.err("unknown length measure")),
                },
            },
            7 => {
                let n = r.u16()? as usize;
                let mut allowed = Vec::with_capacity(n);
                for _ in 0..n {
                    allowed.push(r.u64()?);
                }
                FieldKind::Enumerated { allowed }
            }
            8 => FieldKind::Padding,
            9 => FieldKind::TextToken {
                default_text: r.str16()?,
            },
            _ => return Err(r.err("unknown field kind")),
        };
        fields.push(Field {
            name: fname,
            offset,
            len,
            kind,
        });
    }
    let options = if r.u8()? == 1 {
        let id_min = r.u16()?;
        let id_max = r.u16()?;
        let min_count = r.u16()?;
        let max_count = r.u16()?;
        let max_payload = r.u16()?;
        let ndef = r.u16()? as usize;
        let mut defaults = Vec::with_capacity(ndef);
        for _ in 0..ndef {
            let id = r.u16()?;
            defaults.push((id, r.blob32()?));
        }
        Some(OptionDescriptor {
            id_min,
            id_max,
            min_count,
            max_count,
            max_payload,
            defaults,
        })
    } else {
        None
    };
    let textual = if r.u8()? == 1 {
        let n = r.u16()? as usize;
        let mut tokens = Vec::with_capacity(n);
        for _ in 0..n {
            tokens.push(TokenSpec {
                name: r.str16()?,
                default_value: r.str16()?,
            });
        }
        let default_count = r.u16()? as usize;
        Some(TextualSpec {
            tokens,
            default_count,
        })
    } else {
        None
    };
    Ok(ProtocolSchema {
        name,
        header_bits,
        fields,
        options,
        textual,
    })
}

/// Serializes a stream into a writer.
pub fn write_trace<W: Write>(stream: &PduStream, out: W) -> Result<()> {
    let mut w = Writer { inner: out };
    w.bytes(MAGIC)?;
    w.u8(1)?; // container version
    write_schema(&mut w, &stream.schema)?;
    w.u64(stream.pdus.len() as u64)?;
    let header_bytes = (stream.schema.header_bits as usize).div_ceil(8);
    for p in &stream.pdus {
        w.u64(p.seq)?;
        w.u64(p.timestamp_us)?;
        w.u8(p.corrupted as u8)?;
        debug_assert_eq!(p.header.as_bytes().len(), header_bytes);
        w.bytes(p.header.as_bytes())?;
        w.u16(p.options.len() as u16)?;
        for e in &p.options {
            w.u16(e.id)?;
            w.blob32(&e.payload)?;
        }
        w.blob32(&p.payload)?;
    }
    Ok(())
}

/// Parses a trace from bytes. Errors carry the byte offset of the problem.
pub fn read_trace(data: &[u8]) -> Result<PduStream> {
    let mut r = Reader { data, pos: 0 };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::parse("bad magic, not a cct trace", 0));
    }
    let version = r.u8()?;
    if version != 1 {
        return Err(r.err("unsupported container version"));
    }
    let schema = read_schema(&mut r)?;
    schema.check()?;
    let schema = Arc::new(schema);
    let n = r.u64()? as usize;
    let header_bytes = (schema.header_bits as usize).div_ceil(8);
    let mut pdus = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let seq = r.u64()?;
        let timestamp_us = r.u64()?;
        let corrupted = r.u8()? != 0;
        let raw = r.take(header_bytes)?;
        let header = Bits::from_bytes(raw, schema.header_bits as usize);
        let nopts = r.u16()? as usize;
        let mut options = Vec::with_capacity(nopts);
        for _ in 0..nopts {
            let id = r.u16()?;
            options.push(PduElement::new(id, r.blob32()?));
        }
        let payload = r.blob32()?;
        pdus.push(Pdu {
            schema: schema.clone(),
            header,
            options,
            payload,
            timestamp_us,
            seq,
            corrupted,
        });
    }
    if r.pos != data.len() {
        return Err(r.err("trailing bytes after last record"));
    }
    Ok(PduStream { schema, pdus })
}

pub fn save_trace(stream: &PduStream, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_trace(stream, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_trace(path: &Path) -> Result<PduStream> {
    let mut data = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut data)?;
    read_trace(&data)
}

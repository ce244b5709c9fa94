//! TLV wire format shared by messages and store files.
//!
//! A stream is the magic `CPAD`, a version byte `0x01`, then records of
//! `type (1 byte) | length (4 bytes, big-endian) | payload`. Record types are
//! frozen in [`RecordType`]; see `docs/wire-format.md` for per-object schemas.

use crate::error::{Error, Result};
use crate::group::{GroupElem, Scalar, TargetElem};

pub const MAGIC: &[u8; 4] = b"CPAD";
pub const VERSION: u8 = 0x01;
const HEADER_LEN: usize = MAGIC.len() + 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum RecordType {
    /// 32-byte big-endian residue mod p.
    Scalar = 0x01,
    /// 144-byte compressed group element.
    Group = 0x02,
    /// 576-byte target group element.
    Target = 0x03,
    /// 4-byte big-endian unsigned integer.
    Uint = 0x04,
    /// UTF-8 attribute identifier.
    Attr = 0x05,
    /// Opaque bytes.
    Bytes = 0x06,
    /// ASCII label (literals such as `delete`, party names).
    Label = 0x07,
    /// A headerless record sequence embedding another object.
    Nested = 0x08,
}

impl RecordType {
    fn from_u8(b: u8) -> Option<Self> {
        Some(match b {
            0x01 => RecordType::Scalar,
            0x02 => RecordType::Group,
            0x03 => RecordType::Target,
            0x04 => RecordType::Uint,
            0x05 => RecordType::Attr,
            0x06 => RecordType::Bytes,
            0x07 => RecordType::Label,
            0x08 => RecordType::Nested,
            _ => return None,
        })
    }
}

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    fn record(&mut self, ty: RecordType, payload: &[u8]) -> &mut Self {
        let len = u32::try_from(payload.len()).expect("record payload exceeds 4 GiB");
        self.buf.push(ty as u8);
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(payload);
        self
    }

    pub fn scalar(&mut self, s: &Scalar) -> &mut Self {
        self.record(RecordType::Scalar, &s.to_bytes())
    }

    pub fn group(&mut self, g: &GroupElem) -> &mut Self {
        self.record(RecordType::Group, &g.to_bytes())
    }

    pub fn target(&mut self, t: &TargetElem) -> &mut Self {
        self.record(RecordType::Target, &t.to_bytes())
    }

    pub fn uint(&mut self, v: u32) -> &mut Self {
        self.record(RecordType::Uint, &v.to_be_bytes())
    }

    pub fn attr(&mut self, a: &str) -> &mut Self {
        self.record(RecordType::Attr, a.as_bytes())
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.record(RecordType::Bytes, b)
    }

    pub fn label(&mut self, l: &str) -> &mut Self {
        self.record(RecordType::Label, l.as_bytes())
    }

    pub fn nested(&mut self, obj: &impl Encode) -> &mut Self {
        let mut inner = Writer::new();
        obj.encode_records(&mut inner);
        self.record(RecordType::Nested, &inner.buf)
    }

    /// Records only, without the stream header.
    pub fn into_records(self) -> Vec<u8> {
        self.buf
    }

    /// A full stream: header followed by the records.
    pub fn into_stream(self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.buf.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&self.buf);
        out
    }
}

pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Reader over a full stream; checks magic and version.
    pub fn stream(data: &'a [u8]) -> Result<Self> {
        if data.len() < HEADER_LEN || &data[..4] != MAGIC {
            return Err(Error::InvalidEncoding("missing CPAD magic".into()));
        }
        if data[4] != VERSION {
            return Err(Error::InvalidEncoding(format!("unsupported version {:#04x}", data[4])));
        }
        Ok(Reader { data, pos: HEADER_LEN })
    }

    /// Reader over a headerless record sequence.
    pub fn records(data: &'a [u8]) -> Self {
        Reader { data, pos: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.pos == self.data.len()
    }

    pub fn peek_type(&self) -> Option<RecordType> {
        self.data.get(self.pos).and_then(|&b| RecordType::from_u8(b))
    }

    fn next(&mut self, want: RecordType) -> Result<&'a [u8]> {
        let rest = &self.data[self.pos..];
        if rest.len() < 5 {
            return Err(Error::InvalidEncoding(format!(
                "truncated record header at offset {}, expected {want:?}",
                self.pos
            )));
        }
        let ty = RecordType::from_u8(rest[0]).ok_or_else(|| {
            Error::InvalidEncoding(format!("unknown record type {:#04x} at offset {}", rest[0], self.pos))
        })?;
        if ty != want {
            return Err(Error::InvalidEncoding(format!(
                "expected {want:?} record at offset {}, found {ty:?}",
                self.pos
            )));
        }
        let len = u32::from_be_bytes(rest[1..5].try_into().expect("4 bytes")) as usize;
        if rest.len() - 5 < len {
            return Err(Error::InvalidEncoding(format!("truncated {ty:?} record at offset {}", self.pos)));
        }
        self.pos += 5 + len;
        Ok(&rest[5..5 + len])
    }

    pub fn scalar(&mut self) -> Result<Scalar> {
        Scalar::from_bytes(self.next(RecordType::Scalar)?)
    }

    pub fn group(&mut self) -> Result<GroupElem> {
        GroupElem::from_bytes(self.next(RecordType::Group)?)
    }

    pub fn target(&mut self) -> Result<TargetElem> {
        TargetElem::from_bytes(self.next(RecordType::Target)?)
    }

    pub fn uint(&mut self) -> Result<u32> {
        let p = self.next(RecordType::Uint)?;
        let arr: [u8; 4] = p
            .try_into()
            .map_err(|_| Error::InvalidEncoding("uint record must be 4 bytes".into()))?;
        Ok(u32::from_be_bytes(arr))
    }

    pub fn attr(&mut self) -> Result<String> {
        let p = self.next(RecordType::Attr)?;
        String::from_utf8(p.to_vec()).map_err(|_| Error::InvalidEncoding("attribute is not UTF-8".into()))
    }

    pub fn bytes(&mut self) -> Result<Vec<u8>> {
        Ok(self.next(RecordType::Bytes)?.to_vec())
    }

    pub fn label(&mut self) -> Result<String> {
        let p = self.next(RecordType::Label)?;
        String::from_utf8(p.to_vec()).map_err(|_| Error::InvalidEncoding("label is not UTF-8".into()))
    }

    /// Reads a label and checks it equals `want`.
    pub fn expect_label(&mut self, want: &str) -> Result<()> {
        let got = self.label()?;
        if got != want {
            return Err(Error::InvalidEncoding(format!("expected label {want:?}, found {got:?}")));
        }
        Ok(())
    }

    pub fn nested<T: Decode>(&mut self) -> Result<T> {
        let inner = self.next(RecordType::Nested)?;
        let mut r = Reader::records(inner);
        let v = T::decode_records(&mut r)?;
        r.finish()?;
        Ok(v)
    }

    /// Errors on trailing records.
    pub fn finish(&self) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidEncoding(format!(
                "{} trailing bytes at offset {}",
                self.data.len() - self.pos,
                self.pos
            )))
        }
    }
}

pub trait Encode {
    fn encode_records(&self, w: &mut Writer);

    fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode_records(&mut w);
        w.into_stream()
    }
}

pub trait Decode: Sized {
    fn decode_records(r: &mut Reader<'_>) -> Result<Self>;

    fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::stream(bytes)?;
        let v = Self::decode_records(&mut r)?;
        r.finish()?;
        Ok(v)
    }
}

/// Length-checked `u32` conversion for counts written into records.
pub(crate) fn count(n: usize) -> u32 {
    u32::try_from(n).expect("count exceeds u32")
}

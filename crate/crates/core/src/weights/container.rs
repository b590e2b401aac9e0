//! Sectioned little-endian container shared by model, feature and
//! test-vector files. See `docs/format.md` for the byte layout.

use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"NOLACEWF";
pub const VERSION: (u16, u16, u16) = (1, 0, 0);

pub const TAG_HEADER: [u8; 4] = *b"HEAD";
pub const TAG_TENSORS: [u8; 4] = *b"TENS";
pub const TAG_FEATURES: [u8; 4] = *b"FEAT";
pub const TAG_VECTORS: [u8; 4] = *b"TVEC";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub tag: [u8; 4],
    pub payload: Vec<u8>,
}

impl Section {
    pub fn tag_str(&self) -> String {
        String::from_utf8_lossy(&self.tag).into_owned()
    }
}

pub fn write_container(sections: &[Section]) -> Vec<u8> {
    let mut w = ByteWriter::default();
    w.bytes(&MAGIC);
    w.u16(VERSION.0);
    w.u16(VERSION.1);
    w.u16(VERSION.2);
    w.u16(0);
    for s in sections {
        w.bytes(&s.tag);
        w.u64(s.payload.len() as u64);
        w.bytes(&s.payload);
    }
    w.into_inner()
}

pub fn read_container(bytes: &[u8]) -> Result<Vec<Section>> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(8)?;
    if magic != MAGIC {
        return Err(Error::format("bad magic, not a NOLACEWF container"));
    }
    let (major, minor, patch) = (r.u16()?, r.u16()?, r.u16()?);
    let _reserved = r.u16()?;
    if major != VERSION.0 {
        return Err(Error::format(format!(
            "unsupported container version {major}.{minor}.{patch}"
        )));
    }
    let mut sections = Vec::new();
    while !r.is_empty() {
        let tag: [u8; 4] = r.take(4)?.try_into().unwrap();
        let len = r.u64()?;
        let len = usize::try_from(len).map_err(|_| Error::format("section too large"))?;
        let payload = r.take(len)?.to_vec();
        sections.push(Section { tag, payload });
    }
    Ok(sections)
}

#[derive(Debug, Default)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    pub fn u16(&mut self, v: u16) {
        self.bytes(&v.to_le_bytes());
    }
    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    pub fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    pub fn f32(&mut self, v: f32) {
        self.bytes(&v.to_le_bytes());
    }
    pub fn f32s(&mut self, v: &[f32]) {
        self.buf.reserve(4 * v.len());
        for x in v {
            self.f32(*x);
        }
    }
    /// `u16` byte length followed by UTF-8.
    pub fn name(&mut self, s: &str) {
        self.u16(s.len() as u16);
        self.bytes(s.as_bytes());
    }
    pub fn into_inner(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug)]
pub struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        ByteReader { data, pos: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.data.len()
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| {
                Error::format(format!(
                    "truncated: needed {} bytes at offset {}, {} available",
                    n,
                    self.pos,
                    self.data.len() - self.pos
                ))
            })?;
        let out = &self.data[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(
            n.checked_mul(4)
                .ok_or_else(|| Error::format("length overflow"))?,
        )?;
        Ok(bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }
    pub fn name(&mut self) -> Result<String> {
        let len = self.u16()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| Error::format("name is not UTF-8"))
    }
    pub fn finish(&self, what: &str) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(Error::format(format!(
                "{} trailing bytes in {what} section",
                self.data.len() - self.pos
            )));
        }
        Ok(())
    }
}

//! The `GHST` index container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        4 bytes  "GHST"
//! version      u32      FORMAT_VERSION
//! kind         u8       see `Kind`
//! fingerprint  str      SHA-256 hex of the training corpus
//! body         ...      kind-specific, built from the primitives below
//! ```
//!
//! A `str` is a u32 byte length followed by UTF-8 bytes. Bodies are made of
//! tagged sections (`u32` tag, `u64` element count) so readers can check
//! they are looking at what they expect.

use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GHST";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Kind {
    MainTrie = 1,
    SuffixTrie = 2,
    NGram = 3,
    TfIdf = 4,
}

impl Kind {
    pub fn from_u8(v: u8) -> Option<Kind> {
        Some(match v {
            1 => Kind::MainTrie,
            2 => Kind::SuffixTrie,
            3 => Kind::NGram,
            4 => Kind::TfIdf,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::MainTrie => "main-trie",
            Kind::SuffixTrie => "suffix-trie",
            Kind::NGram => "ngram",
            Kind::TfIdf => "tfidf",
        }
    }
}

#[derive(Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn with_header(kind: Kind, fingerprint: &str) -> Self {
        let mut e = Encoder::default();
        e.buf.extend_from_slice(MAGIC);
        e.u32(FORMAT_VERSION);
        e.u8(kind as u8);
        e.str(fingerprint);
        e
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        let mut b = [0; 2];
        LittleEndian::write_u16(&mut b, v);
        self.buf.extend_from_slice(&b);
    }

    pub fn u32(&mut self, v: u32) {
        let mut b = [0; 4];
        LittleEndian::write_u32(&mut b, v);
        self.buf.extend_from_slice(&b);
    }

    pub fn u64(&mut self, v: u64) {
        let mut b = [0; 8];
        LittleEndian::write_u64(&mut b, v);
        self.buf.extend_from_slice(&b);
    }

    pub fn f64(&mut self, v: f64) {
        let mut b = [0; 8];
        LittleEndian::write_f64(&mut b, v);
        self.buf.extend_from_slice(&b);
    }

    pub fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn section(&mut self, tag: &[u8; 4], count: usize) {
        self.buf.extend_from_slice(tag);
        self.u64(count as u64);
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Decoder<'a> {
    data: &'a [u8],
    pos: usize,
}

/// Parsed container header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub version: u32,
    pub kind: Kind,
    pub fingerprint: String,
}

impl<'a> Decoder<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Decoder { data, pos: 0 }
    }

    pub fn header(&mut self) -> Result<Header> {
        let magic = self.take(4)?;
        if magic != MAGIC {
            return Err(Error::Format("bad magic, not a GHST index".into()));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "format version {version} is not supported (expected {FORMAT_VERSION})"
            )));
        }
        let tag = self.u8()?;
        let kind = Kind::from_u8(tag).ok_or_else(|| Error::Format(format!("unknown kind tag {tag}")))?;
        let fingerprint = self.str()?;
        Ok(Header {
            version,
            kind,
            fingerprint,
        })
    }

    /// Reads the header and checks the kind tag.
    pub fn expect(&mut self, kind: Kind) -> Result<Header> {
        let h = self.header()?;
        if h.kind != kind {
            return Err(Error::Format(format!(
                "expected a {} index, found {}",
                kind.name(),
                h.kind.name()
            )));
        }
        Ok(h)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(LittleEndian::read_u16(self.take(2)?))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(LittleEndian::read_u32(self.take(4)?))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(LittleEndian::read_u64(self.take(8)?))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(LittleEndian::read_f64(self.take(8)?))
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::Format("invalid UTF-8 string".into()))
    }

    pub fn char(&mut self) -> Result<char> {
        let v = self.u32()?;
        char::from_u32(v).ok_or_else(|| Error::Format(format!("invalid char {v:#x}")))
    }

    /// Reads a section tag and returns its element count.
    pub fn section(&mut self, tag: &[u8; 4]) -> Result<usize> {
        let got = self.take(4)?;
        if got != tag {
            return Err(Error::Format(format!(
                "expected section {:?}, found {:?}",
                String::from_utf8_lossy(tag),
                String::from_utf8_lossy(got)
            )));
        }
        let n = self.u64()?;
        // every element is at least one byte
        if n as usize > self.data.len() - self.pos {
            return Err(Error::Format(format!(
                "section {:?} claims {n} elements",
                String::from_utf8_lossy(tag)
            )));
        }
        Ok(n as usize)
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(Error::Format(format!("{} trailing bytes", self.data.len() - self.pos)));
        }
        Ok(())
    }
}

/// Reads only the header of an index file.
pub fn read_header(path: &Path) -> Result<Header> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    Decoder::new(&data).header()
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

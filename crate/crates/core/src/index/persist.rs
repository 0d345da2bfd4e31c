//! Single-file index image.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "CRSIDX1\0"  8-byte magic
//! u8           format version
//! payload      config, documents, dictionary sections
//! u64          FNV-1a 64 of the payload
//! ```
//!
//! Strings are a `u32` byte length followed by UTF-8. Dictionary terms are
//! written in lexicographic order so identical indexes produce identical
//! files.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};

use super::{InvertedIndex, Posting};
use crate::error::{Error, Result};
use crate::textproc::{fnv1a, AbbreviationTable, TextConfig};

pub const MAGIC: &[u8; 8] = b"CRSIDX1\0";
pub const FORMAT_VERSION: u8 = 1;

const HEADER_LEN: usize = MAGIC.len() + 1;
const CHECKSUM_LEN: usize = 8;

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.write_u32::<LittleEndian>(s.len() as u32).unwrap();
    out.extend_from_slice(s.as_bytes());
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.write_u32::<LittleEndian>(v).unwrap();
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Format("unexpected end of payload".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(LittleEndian::read_u32(self.take(4)?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(LittleEndian::read_u64(self.take(8)?))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::Format("invalid UTF-8 string".into()))
    }

    /// Reads a count and rejects it if even `min_item_size`-byte items could
    /// not fit in what is left.
    fn count(&mut self, min_item_size: usize) -> Result<usize> {
        let n = self.u32()? as usize;
        if n.saturating_mul(min_item_size) > self.buf.len() {
            return Err(Error::Format("section count exceeds payload size".into()));
        }
        Ok(n)
    }
}

impl InvertedIndex {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut payload = Vec::new();

        let config = &self.config;
        payload.push(u8::from(config.stem));
        put_u32(&mut payload, config.stopwords.len() as u32);
        for word in &config.stopwords {
            put_str(&mut payload, word);
        }
        put_u32(&mut payload, config.abbreviations.len() as u32);
        for (abbrev, expansion) in config.abbreviations.iter() {
            put_str(&mut payload, abbrev);
            put_str(&mut payload, expansion);
        }
        payload.write_u64::<LittleEndian>(config.fingerprint()).unwrap();

        put_u32(&mut payload, self.doc_ids.len() as u32);
        for ((id, text), len) in self.doc_ids.iter().zip(&self.doc_texts).zip(&self.doc_lengths) {
            put_str(&mut payload, id);
            put_u32(&mut payload, *len);
            put_str(&mut payload, text);
        }

        let terms = self.terms();
        put_u32(&mut payload, terms.len() as u32);
        for term in terms {
            let postings = &self.dictionary[term];
            put_str(&mut payload, term);
            put_u32(&mut payload, postings.len() as u32);
            for p in postings {
                put_u32(&mut payload, p.doc);
                put_u32(&mut payload, p.tf);
            }
        }

        let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + CHECKSUM_LEN);
        out.extend_from_slice(MAGIC);
        out.push(FORMAT_VERSION);
        out.extend_from_slice(&payload);
        out.write_u64::<LittleEndian>(fnv1a(&payload)).unwrap();
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::Format("bad magic bytes; not an index file".into()));
        }
        let Some(&version) = bytes.get(MAGIC.len()) else {
            return Err(Error::Checksum);
        };
        if version != FORMAT_VERSION {
            return Err(Error::Version { found: version, expected: FORMAT_VERSION });
        }
        if bytes.len() < HEADER_LEN + CHECKSUM_LEN {
            return Err(Error::Checksum);
        }
        let (payload, checksum) = bytes[HEADER_LEN..].split_at(bytes.len() - HEADER_LEN - CHECKSUM_LEN);
        if LittleEndian::read_u64(checksum) != fnv1a(payload) {
            return Err(Error::Checksum);
        }

        let mut r = Reader { buf: payload };
        let stem = match r.u8()? {
            0 => false,
            1 => true,
            other => return Err(Error::Format(format!("bad stem flag {other}"))),
        };
        let mut stopwords = BTreeSet::new();
        for _ in 0..r.count(4)? {
            stopwords.insert(r.string()?);
        }
        let mut abbreviations = AbbreviationTable::new();
        for _ in 0..r.count(8)? {
            let abbrev = r.string()?;
            let expansion = r.string()?;
            abbreviations
                .insert(&abbrev, &expansion)
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        let config = TextConfig { stopwords, stem, abbreviations };
        if r.u64()? != config.fingerprint() {
            return Err(Error::Format("stored config fingerprint does not match config".into()));
        }

        let n_docs = r.count(12)?;
        let mut doc_ids = Vec::with_capacity(n_docs);
        let mut doc_texts = Vec::with_capacity(n_docs);
        let mut doc_lengths = Vec::with_capacity(n_docs);
        for _ in 0..n_docs {
            doc_ids.push(r.string()?);
            doc_lengths.push(r.u32()?);
            doc_texts.push(r.string()?);
        }

        let n_terms = r.count(8)?;
        let mut dictionary = HashMap::with_capacity(n_terms);
        let mut previous: Option<String> = None;
        for _ in 0..n_terms {
            let term = r.string()?;
            if previous.as_ref().is_some_and(|p| *p >= term) {
                return Err(Error::Format("dictionary terms out of order".into()));
            }
            let n_postings = r.count(8)?;
            let mut postings = Vec::with_capacity(n_postings);
            for _ in 0..n_postings {
                postings.push(Posting { doc: r.u32()?, tf: r.u32()? });
            }
            previous = Some(term.clone());
            dictionary.insert(term, postings);
        }
        if !r.buf.is_empty() {
            return Err(Error::Format("trailing bytes after dictionary".into()));
        }
        InvertedIndex::from_parts(config, doc_ids, doc_texts, doc_lengths, dictionary)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path.display(), e))?;
        file.write_all(&self.to_bytes()).map_err(|e| Error::io(path.display(), e))?;
        file.sync_all().map_err(|e| Error::io(path.display(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path.display(), e))?;
        Self::from_bytes(&bytes)
    }
}

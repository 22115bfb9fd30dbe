//! On-disk index layout, little-endian throughout:
//!
//! ```text
//! "SPIX" | version u32 | doc_count u64 | vocab_size u64
//! vocab:    per term (TermId order)     u32 len + UTF-8 bytes
//! docs:     per doc (ordinal order)     u32 len + UTF-8 external id, u32 term_count, u32 raw_length
//! postings: per term (TermId order)     u64 len, then len x (u32 doc ordinal, f32 impact)
//! CRC32C of every preceding byte, u32
//! ```

use std::collections::HashSet;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{DocRecord, ImpactIndex, IndexError, Posting, Vocabulary};

pub const MAGIC: [u8; 4] = *b"SPIX";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_index<W: Write>(index: &ImpactIndex, mut out: W) -> Result<(), IndexError> {
    out.write_all(&encode(index))?;
    Ok(())
}

pub fn save_index(index: &ImpactIndex, path: impl AsRef<Path>) -> Result<(), IndexError> {
    fs::write(path, encode(index))?;
    Ok(())
}

pub fn read_index<R: Read>(mut input: R) -> Result<ImpactIndex, IndexError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn load_index(path: impl AsRef<Path>) -> Result<ImpactIndex, IndexError> {
    decode(&fs::read(path)?)
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

pub(crate) fn encode(index: &ImpactIndex) -> Vec<u8> {
    let mut buf = Vec::with_capacity(32 + index.total_postings() * 8);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(index.docs.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(index.vocab.len() as u64).to_le_bytes());
    for term in index.vocab.terms() {
        put_str(&mut buf, term);
    }
    for doc in &index.docs {
        put_str(&mut buf, &doc.external_id);
        buf.extend_from_slice(&doc.term_count.to_le_bytes());
        buf.extend_from_slice(&doc.raw_length.to_le_bytes());
    }
    for list in &index.postings {
        buf.extend_from_slice(&(list.len() as u64).to_le_bytes());
        for p in list {
            buf.extend_from_slice(&p.doc.to_le_bytes());
            buf.extend_from_slice(&p.impact.to_le_bytes());
        }
    }
    let crc = crc32c::crc32c(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        let end = self.pos.checked_add(n).ok_or(IndexError::TruncatedFile)?;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or(IndexError::TruncatedFile)?;
        self.pos = end;
        Ok(slice)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, IndexError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn bytes_with_len(&mut self) -> Result<&'a [u8], IndexError> {
        let len = self.u32()? as usize;
        self.take(len)
    }

    /// Reads a count and caps it at what the remaining bytes could possibly hold.
    fn count(&mut self, min_item_bytes: usize) -> Result<usize, IndexError> {
        let n = self.u64()?;
        if n > (self.remaining() / min_item_bytes) as u64 {
            return Err(IndexError::TruncatedFile);
        }
        Ok(n as usize)
    }
}

fn utf8(raw: &[u8], what: &str) -> Result<String, IndexError> {
    String::from_utf8(raw.to_vec())
        .map_err(|_| IndexError::Corrupt(format!("{what} is not valid UTF-8")))
}

/// Walks the layout collecting raw fields, verifies the checksum, and only then
/// validates contents, so a damaged payload reports a checksum mismatch rather
/// than whatever it happens to decode to.
pub(crate) fn decode(bytes: &[u8]) -> Result<ImpactIndex, IndexError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(IndexError::BadMagic);
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(IndexError::UnsupportedVersion(version));
    }
    let doc_count = r.count(12)?;
    let vocab_size = r.count(12)?;

    let mut raw_terms = Vec::with_capacity(vocab_size);
    for _ in 0..vocab_size {
        raw_terms.push(r.bytes_with_len()?);
    }
    let mut raw_docs = Vec::with_capacity(doc_count);
    for _ in 0..doc_count {
        let id = r.bytes_with_len()?;
        raw_docs.push((id, r.u32()?, r.u32()?));
    }
    let mut raw_postings = Vec::with_capacity(vocab_size);
    for _ in 0..vocab_size {
        let len = r.count(8)?;
        let mut list = Vec::with_capacity(len);
        for _ in 0..len {
            list.push(Posting {
                doc: r.u32()?,
                impact: r.f32()?,
            });
        }
        raw_postings.push(list);
    }

    let body_len = r.pos;
    let stored = r.u32()?;
    let computed = crc32c::crc32c(&bytes[..body_len]);
    if stored != computed {
        return Err(IndexError::ChecksumMismatch { stored, computed });
    }
    if r.remaining() != 0 {
        return Err(IndexError::Corrupt("trailing bytes after checksum".into()));
    }

    if doc_count > u32::MAX as usize {
        return Err(IndexError::TooLarge("documents"));
    }
    let terms = raw_terms
        .into_iter()
        .map(|t| utf8(t, "vocabulary term"))
        .collect::<Result<Vec<_>, _>>()?;
    let vocab = Vocabulary::from_terms(terms)?;

    let mut docs = Vec::with_capacity(doc_count);
    let mut ids = HashSet::with_capacity(doc_count);
    for (ordinal, (id, term_count, raw_length)) in raw_docs.into_iter().enumerate() {
        let external_id = utf8(id, "document id")?;
        if !ids.insert(external_id.clone()) {
            return Err(IndexError::Corrupt(format!(
                "duplicate document id {external_id:?}"
            )));
        }
        docs.push(DocRecord {
            external_id,
            ordinal: ordinal as u32,
            term_count,
            raw_length,
        });
    }

    let mut per_doc = vec![0u32; doc_count];
    for (term, list) in raw_postings.iter().enumerate() {
        let mut prev: Option<u32> = None;
        for p in list {
            if p.doc as usize >= doc_count || prev.is_some_and(|q| q >= p.doc) {
                return Err(IndexError::Corrupt(format!(
                    "posting list of term {term} is out of order or out of range"
                )));
            }
            if !(p.impact.is_finite() && p.impact > 0.0) {
                return Err(IndexError::Corrupt(format!(
                    "term {term} has a non-positive impact"
                )));
            }
            prev = Some(p.doc);
            per_doc[p.doc as usize] += 1;
        }
    }
    if let Some(d) = docs
        .iter()
        .find(|d| d.term_count != per_doc[d.ordinal as usize])
    {
        return Err(IndexError::Corrupt(format!(
            "document {:?} term_count disagrees with its postings",
            d.external_id
        )));
    }
    Ok(ImpactIndex::from_parts(vocab, docs, raw_postings))
}

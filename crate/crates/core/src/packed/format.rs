use std::fs::File;
use std::io::{BufWriter, Seek, SeekFrom, Write};
use std::path::Path;

use memmap2::Mmap;

use super::PackedError;

pub const PACKED_MAGIC: &[u8; 8] = b"CFPKD001";
pub const PACKED_VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 40;
pub const SPAN_RECORD_LEN: u64 = 16;

/// Fixed 40-byte header at the start of every packed file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PackedHeader {
    pub token_width: u32,
    pub token_count: u64,
    pub doc_count: u64,
    pub index_offset: u64,
}

impl PackedHeader {
    pub fn new(token_width: u32, token_count: u64, doc_count: u64) -> Self {
        PackedHeader {
            token_width,
            token_count,
            doc_count,
            index_offset: HEADER_LEN + token_count * token_width as u64,
        }
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN as usize] {
        let mut out = [0u8; HEADER_LEN as usize];
        out[0..8].copy_from_slice(PACKED_MAGIC);
        out[8..12].copy_from_slice(&PACKED_VERSION.to_le_bytes());
        out[12..16].copy_from_slice(&self.token_width.to_le_bytes());
        out[16..24].copy_from_slice(&self.token_count.to_le_bytes());
        out[24..32].copy_from_slice(&self.doc_count.to_le_bytes());
        out[32..40].copy_from_slice(&self.index_offset.to_le_bytes());
        out
    }

    /// Parse and check the header against the total file length.
    pub fn parse(bytes: &[u8], file_len: u64) -> Result<Self, PackedError> {
        let fail = |m: String| Err(PackedError::Format(m));
        if bytes.len() < HEADER_LEN as usize {
            return fail(format!(
                "{} bytes is shorter than the {HEADER_LEN}-byte header",
                bytes.len()
            ));
        }
        if &bytes[0..8] != PACKED_MAGIC {
            return fail("bad magic".to_string());
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != PACKED_VERSION {
            return fail(format!("unsupported version {version}"));
        }
        let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let header = PackedHeader {
            token_width: u32::from_le_bytes(bytes[12..16].try_into().unwrap()),
            token_count: u64_at(16),
            doc_count: u64_at(24),
            index_offset: u64_at(32),
        };
        if !matches!(header.token_width, 1 | 2 | 4) {
            return fail(format!(
                "token width {} is not 1, 2 or 4",
                header.token_width
            ));
        }
        let payload_end = header
            .token_count
            .checked_mul(header.token_width as u64)
            .and_then(|n| n.checked_add(HEADER_LEN));
        if payload_end != Some(header.index_offset) {
            return fail(format!(
                "index offset {} != {HEADER_LEN} + {} tokens x {} bytes",
                header.index_offset, header.token_count, header.token_width
            ));
        }
        let expected_len = header
            .doc_count
            .checked_mul(SPAN_RECORD_LEN)
            .and_then(|n| n.checked_add(header.index_offset));
        if expected_len != Some(file_len) {
            return fail(format!(
                "file length {file_len} does not match index offset {} + {} spans",
                header.index_offset, header.doc_count
            ));
        }
        Ok(header)
    }
}

/// Token range of one document within the payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenSpan {
    pub start_token: u64,
    pub token_length: u64,
}

/// Totals of a finished packed file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct PackedSummary {
    pub token_width: u32,
    pub token_count: u64,
    pub doc_count: u64,
}

/// Streaming writer: placeholder header, payload, span index, then the
/// header is patched in place.
pub struct PackedWriter<W: Write + Seek> {
    out: W,
    token_width: u32,
    token_count: u64,
    spans: Vec<TokenSpan>,
    scratch: Vec<u8>,
}

impl PackedWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>, token_width: u32) -> Result<Self, PackedError> {
        let file = File::create(path.as_ref())?;
        PackedWriter::new(BufWriter::with_capacity(1 << 20, file), token_width)
    }
}

impl<W: Write + Seek> PackedWriter<W> {
    pub fn new(mut out: W, token_width: u32) -> Result<Self, PackedError> {
        if !matches!(token_width, 1 | 2 | 4) {
            return Err(PackedError::Format(format!(
                "token width {token_width} is not 1, 2 or 4"
            )));
        }
        out.write_all(&[0u8; HEADER_LEN as usize])?;
        Ok(PackedWriter {
            out,
            token_width,
            token_count: 0,
            spans: Vec::new(),
            scratch: Vec::new(),
        })
    }

    pub fn token_width(&self) -> u32 {
        self.token_width
    }

    pub fn doc_count(&self) -> u64 {
        self.spans.len() as u64
    }

    pub fn push_document(&mut self, tokens: &[u32]) -> Result<(), PackedError> {
        let width = self.token_width as usize;
        let limit = if width == 4 {
            u64::MAX
        } else {
            1u64 << (8 * width)
        };
        self.scratch.clear();
        self.scratch.reserve(tokens.len() * width);
        for &t in tokens {
            if t as u64 >= limit {
                return Err(PackedError::TokenOverflow {
                    token: t,
                    width: self.token_width,
                });
            }
            self.scratch.extend_from_slice(&t.to_le_bytes()[..width]);
        }
        self.out.write_all(&self.scratch)?;
        self.record_span(tokens.len() as u64);
        Ok(())
    }

    /// Append already-encoded little-endian payload bytes of this writer's
    /// width as one document.
    pub fn push_encoded(&mut self, payload: &[u8]) -> Result<(), PackedError> {
        let width = self.token_width as usize;
        if !payload.len().is_multiple_of(width) {
            return Err(PackedError::Format(format!(
                "{} payload bytes is not a multiple of width {width}",
                payload.len()
            )));
        }
        self.out.write_all(payload)?;
        self.record_span((payload.len() / width) as u64);
        Ok(())
    }

    fn record_span(&mut self, len: u64) {
        self.spans.push(TokenSpan {
            start_token: self.token_count,
            token_length: len,
        });
        self.token_count += len;
    }

    pub fn finish(mut self) -> Result<(W, PackedSummary), PackedError> {
        let mut index = Vec::with_capacity(self.spans.len() * SPAN_RECORD_LEN as usize);
        for span in &self.spans {
            index.extend_from_slice(&span.start_token.to_le_bytes());
            index.extend_from_slice(&span.token_length.to_le_bytes());
        }
        self.out.write_all(&index)?;
        let header = PackedHeader::new(self.token_width, self.token_count, self.spans.len() as u64);
        self.out.seek(SeekFrom::Start(0))?;
        self.out.write_all(&header.to_bytes())?;
        self.out.seek(SeekFrom::End(0))?;
        self.out.flush()?;
        let summary = PackedSummary {
            token_width: self.token_width,
            token_count: self.token_count,
            doc_count: header.doc_count,
        };
        Ok((self.out, summary))
    }
}

/// Read-only memory-mapped view of a packed file. Immutable and shareable
/// between threads.
#[derive(Debug)]
pub struct PackedReader {
    map: Mmap,
    header: PackedHeader,
}

impl PackedReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, PackedError> {
        let file = File::open(path.as_ref())?;
        let len = file.metadata()?.len();
        if len < HEADER_LEN {
            return Err(PackedError::Format(format!(
                "{len} bytes is shorter than the {HEADER_LEN}-byte header"
            )));
        }
        // SAFETY: mapped read-only; the file is not modified while open.
        let map = unsafe { Mmap::map(&file)? };
        let header = PackedHeader::parse(&map, len)?;
        Ok(PackedReader { map, header })
    }

    pub fn header(&self) -> &PackedHeader {
        &self.header
    }

    pub fn token_count(&self) -> u64 {
        self.header.token_count
    }

    pub fn doc_count(&self) -> u64 {
        self.header.doc_count
    }

    pub fn token_width(&self) -> u32 {
        self.header.token_width
    }

    pub fn summary(&self) -> PackedSummary {
        PackedSummary {
            token_width: self.header.token_width,
            token_count: self.header.token_count,
            doc_count: self.header.doc_count,
        }
    }

    pub fn span(&self, i: u64) -> Result<TokenSpan, PackedError> {
        if i >= self.header.doc_count {
            return Err(PackedError::OutOfRange {
                index: i,
                len: self.header.doc_count,
            });
        }
        let at = (self.header.index_offset + i * SPAN_RECORD_LEN) as usize;
        let rec = &self.map[at..at + SPAN_RECORD_LEN as usize];
        Ok(TokenSpan {
            start_token: u64::from_le_bytes(rec[0..8].try_into().unwrap()),
            token_length: u64::from_le_bytes(rec[8..16].try_into().unwrap()),
        })
    }

    /// Encoded payload bytes of tokens `[start, start + len)`.
    fn payload(&self, start: u64, len: u64) -> Result<&[u8], PackedError> {
        let end = start
            .checked_add(len)
            .filter(|&e| e <= self.header.token_count)
            .ok_or_else(|| {
                PackedError::Format(format!(
                    "token range {start}+{len} exceeds {} tokens",
                    self.header.token_count
                ))
            })?;
        let w = self.header.token_width as u64;
        Ok(&self.map[(HEADER_LEN + start * w) as usize..(HEADER_LEN + end * w) as usize])
    }

    /// Encoded payload bytes of document `i`.
    pub fn document_bytes(&self, i: u64) -> Result<&[u8], PackedError> {
        let span = self.span(i)?;
        self.payload(span.start_token, span.token_length)
    }

    pub fn document_len(&self, i: u64) -> Result<u64, PackedError> {
        Ok(self.span(i)?.token_length)
    }

    /// Tokens of document `i`: two index loads and one payload slice.
    pub fn get_document_tokens(&self, i: u64) -> Result<Vec<u32>, PackedError> {
        Ok(decode_tokens(
            self.document_bytes(i)?,
            self.header.token_width,
        ))
    }

    pub fn tokens(&self, start: u64, len: u64) -> Result<Vec<u32>, PackedError> {
        Ok(decode_tokens(
            self.payload(start, len)?,
            self.header.token_width,
        ))
    }

    /// Number of `seq_len + 1`-token samples, `⌊(token_count − 1) / seq_len⌋`.
    pub fn sample_count(&self, seq_len: u64) -> u64 {
        sample_count(self.header.token_count, seq_len)
    }

    /// Tokens `[s·L, s·L + L]` of the concatenated stream. Samples may span
    /// document boundaries.
    pub fn get_sample(&self, s: u64, seq_len: u64) -> Result<Vec<u32>, PackedError> {
        if seq_len == 0 {
            return Err(PackedError::InvalidSeqLen);
        }
        let count = self.sample_count(seq_len);
        if s >= count {
            return Err(PackedError::OutOfRange {
                index: s,
                len: count,
            });
        }
        self.tokens(s * seq_len, seq_len + 1)
    }

    /// Full scan of the span index: contiguous, increasing, ending at
    /// `token_count`.
    pub fn verify_spans(&self) -> Result<(), PackedError> {
        let mut expected = 0u64;
        for i in 0..self.header.doc_count {
            let span = self.span(i)?;
            if span.start_token != expected {
                return Err(PackedError::Format(format!(
                    "span {i} starts at {} but the previous span ends at {expected}",
                    span.start_token
                )));
            }
            expected = expected
                .checked_add(span.token_length)
                .ok_or_else(|| PackedError::Format(format!("span {i} length overflows")))?;
        }
        if expected != self.header.token_count {
            return Err(PackedError::Format(format!(
                "spans cover {expected} tokens, header says {}",
                self.header.token_count
            )));
        }
        Ok(())
    }
}

pub fn sample_count(token_count: u64, seq_len: u64) -> u64 {
    if seq_len == 0 {
        return 0;
    }
    token_count.saturating_sub(1) / seq_len
}

pub fn decode_tokens(bytes: &[u8], width: u32) -> Vec<u32> {
    match width {
        1 => bytes.iter().map(|&b| b as u32).collect(),
        2 => bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]) as u32)
            .collect(),
        4 => bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
        _ => unreachable!("token width validated on open"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn write_docs(path: &Path, width: u32, docs: &[&[u32]]) -> PackedSummary {
        let mut w = PackedWriter::create(path, width).unwrap();
        for d in docs {
            w.push_document(d).unwrap();
        }
        w.finish().unwrap().1
    }

    #[test]
    fn length_arithmetic() {
        let mut w = PackedWriter::new(Cursor::new(Vec::new()), 2).unwrap();
        w.push_document(&[1, 2, 3, 4, 5]).unwrap();
        let (cursor, summary) = w.finish().unwrap();
        let bytes = cursor.into_inner();
        assert_eq!(bytes.len(), 40 + 10 + 16);
        assert_eq!(
            summary,
            PackedSummary {
                token_width: 2,
                token_count: 5,
                doc_count: 1
            }
        );
        let header = PackedHeader::parse(&bytes, 66).unwrap();
        assert_eq!(header.index_offset, 50);
    }

    #[test]
    fn short_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.cfpk");
        std::fs::write(&path, b"CFPKD001").unwrap();
        assert!(matches!(
            PackedReader::open(&path),
            Err(PackedError::Format(_))
        ));
    }

    #[test]
    fn bad_index_offset_rejected() {
        let mut bytes = PackedHeader::new(1, 3, 0).to_bytes().to_vec();
        bytes.extend_from_slice(&[1, 2, 3]);
        assert!(PackedHeader::parse(&bytes, 43).is_ok());
        bytes[32..40].copy_from_slice(&44u64.to_le_bytes());
        assert!(matches!(
            PackedHeader::parse(&bytes, 43),
            Err(PackedError::Format(_))
        ));
        // wrong total length
        assert!(matches!(
            PackedHeader::parse(&PackedHeader::new(1, 3, 0).to_bytes(), 44),
            Err(PackedError::Format(_))
        ));
        let mut bad_width = PackedHeader::new(1, 0, 0).to_bytes();
        bad_width[12..16].copy_from_slice(&3u32.to_le_bytes());
        assert!(PackedHeader::parse(&bad_width, 40).is_err());
    }

    #[test]
    fn documents_and_samples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.cfpk");
        write_docs(&path, 2, &[&[0, 1, 2], &[3, 4], &[5, 6, 7, 8]]);
        let r = PackedReader::open(&path).unwrap();
        r.verify_spans().unwrap();
        assert_eq!(r.doc_count(), 3);
        assert_eq!(r.get_document_tokens(1).unwrap(), vec![3, 4]);
        assert!(matches!(
            r.get_document_tokens(3),
            Err(PackedError::OutOfRange { index: 3, len: 3 })
        ));
        assert_eq!(r.sample_count(4), 2);
        assert_eq!(r.get_sample(0, 4).unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(r.get_sample(1, 4).unwrap(), vec![4, 5, 6, 7, 8]);
        assert!(matches!(
            r.get_sample(2, 4),
            Err(PackedError::OutOfRange { .. })
        ));
        assert!(matches!(
            r.get_sample(0, 0),
            Err(PackedError::InvalidSeqLen)
        ));
    }

    #[test]
    fn sample_count_edges() {
        assert_eq!(sample_count(9, 4), 2);
        assert_eq!(sample_count(4, 4), 0);
        assert_eq!(sample_count(0, 4), 0);
        assert_eq!(sample_count(5, 4), 1);
    }

    #[test]
    fn token_overflow() {
        let mut w = PackedWriter::new(Cursor::new(Vec::new()), 1).unwrap();
        assert!(matches!(
            w.push_document(&[256]),
            Err(PackedError::TokenOverflow {
                token: 256,
                width: 1
            })
        ));
        let mut w = PackedWriter::new(Cursor::new(Vec::new()), 2).unwrap();
        assert!(w.push_document(&[65535]).is_ok());
        assert!(w.push_document(&[65536]).is_err());
    }

    #[test]
    fn empty_file_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.cfpk");
        write_docs(&path, 4, &[]);
        let r = PackedReader::open(&path).unwrap();
        assert_eq!((r.token_count(), r.doc_count()), (0, 0));
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 40);
        assert_eq!(r.sample_count(1), 0);
    }

    #[test]
    fn corrupt_span_is_an_error_not_a_panic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.cfpk");
        write_docs(&path, 1, &[&[1, 2]]);
        let mut bytes = std::fs::read(&path).unwrap();
        let at = bytes.len() - 8;
        bytes[at..].copy_from_slice(&100u64.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        let r = PackedReader::open(&path).unwrap();
        assert!(r.get_document_tokens(0).is_err());
        assert!(r.verify_spans().is_err());
    }
}

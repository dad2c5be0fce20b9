//! Indexation of raw JSONL corpora.
//!
//! A single sequential pass over the raw file records the byte span of every
//! non-empty line. The span table is persisted as a fixed-width binary
//! sidecar (`<raw>.didx`) so that document `i` can be located by offset
//! arithmetic and read with one positioned read.
//!
//! Sidecar layout, all integers little-endian:
//!
//! | bytes   | field                                   |
//! |---------|-----------------------------------------|
//! | 0..8    | magic `CFIDX001`                        |
//! | 8..12   | version `u32` (= 1)                     |
//! | 12..20  | source_size `u64`                       |
//! | 20..28  | doc_count `u64`                         |
//! | 28..    | doc_count × (byte_offset, byte_length)  |

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const INDEX_MAGIC: &[u8; 8] = b"CFIDX001";
pub const INDEX_VERSION: u32 = 1;
pub const INDEX_HEADER_LEN: usize = 28;
const RECORD_LEN: usize = 16;

pub const DEFAULT_READ_BUFFER: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("invalid index file: {0}")]
    Format(String),
    #[error("document {index} out of range ({len} documents)")]
    OutOfRange { index: u64, len: u64 },
    #[error("index is stale: indexed {indexed_size} bytes, file now has {current_size}")]
    Stale {
        indexed_size: u64,
        current_size: u64,
    },
}

/// Byte span of one document in the raw file, newline excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DocSpan {
    pub byte_offset: u64,
    pub byte_length: u64,
}

impl DocSpan {
    pub fn end(&self) -> u64 {
        self.byte_offset + self.byte_length
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DocumentIndex {
    /// Size of the raw file when it was indexed.
    pub source_size: u64,
    pub spans: Vec<DocSpan>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexStatus {
    Ok,
    Stale {
        indexed_size: u64,
        current_size: u64,
    },
}

impl DocumentIndex {
    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn span(&self, i: u64) -> Result<DocSpan, IndexError> {
        usize::try_from(i)
            .ok()
            .and_then(|i| self.spans.get(i).copied())
            .ok_or(IndexError::OutOfRange {
                index: i,
                len: self.spans.len() as u64,
            })
    }
}

/// Conventional sidecar location: `<raw>.didx`.
pub fn sidecar_path(raw_path: &Path) -> PathBuf {
    let mut s = raw_path.as_os_str().to_owned();
    s.push(".didx");
    PathBuf::from(s)
}

pub fn build_index(raw_path: impl AsRef<Path>) -> Result<DocumentIndex, IndexError> {
    build_index_with_buffer(raw_path, DEFAULT_READ_BUFFER)
}

/// Index with an explicit read-buffer size. The result does not depend on
/// `buffer_size`.
pub fn build_index_with_buffer(
    raw_path: impl AsRef<Path>,
    buffer_size: usize,
) -> Result<DocumentIndex, IndexError> {
    let file = File::open(raw_path.as_ref())?;
    index_reader(file, buffer_size.max(1))
}

/// Streams `reader` once, splitting on `\n`. Carriage returns stay inside
/// spans; empty lines are skipped; a trailing line without `\n` counts.
pub fn index_reader<R: Read>(
    mut reader: R,
    buffer_size: usize,
) -> Result<DocumentIndex, IndexError> {
    let mut buf = vec![0u8; buffer_size.max(1)];
    let mut spans = Vec::new();
    let mut pos: u64 = 0;
    let mut line_start: u64 = 0;

    loop {
        let n = match reader.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e.into()),
        };
        for nl in memchr::memchr_iter(b'\n', &buf[..n]) {
            let end = pos + nl as u64;
            if end > line_start {
                spans.push(DocSpan {
                    byte_offset: line_start,
                    byte_length: end - line_start,
                });
            }
            line_start = end + 1;
        }
        pos += n as u64;
    }
    if pos > line_start {
        spans.push(DocSpan {
            byte_offset: line_start,
            byte_length: pos - line_start,
        });
    }
    Ok(DocumentIndex {
        source_size: pos,
        spans,
    })
}

pub fn write_index(index: &DocumentIndex, path: impl AsRef<Path>) -> Result<(), IndexError> {
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    out.write_all(INDEX_MAGIC)?;
    out.write_all(&INDEX_VERSION.to_le_bytes())?;
    out.write_all(&index.source_size.to_le_bytes())?;
    out.write_all(&(index.spans.len() as u64).to_le_bytes())?;
    for span in &index.spans {
        out.write_all(&span.byte_offset.to_le_bytes())?;
        out.write_all(&span.byte_length.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>) -> Result<DocumentIndex, IndexError> {
    let bytes = std::fs::read(path.as_ref())?;
    decode_index(&bytes)
}

pub fn decode_index(bytes: &[u8]) -> Result<DocumentIndex, IndexError> {
    let format = |m: String| IndexError::Format(m);
    if bytes.len() < INDEX_HEADER_LEN {
        return Err(format(format!(
            "{} bytes is shorter than the {INDEX_HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[0..8] != INDEX_MAGIC {
        return Err(format("bad magic".to_string()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != INDEX_VERSION {
        return Err(format(format!("unsupported version {version}")));
    }
    let source_size = read_u64(bytes, 12);
    let doc_count = read_u64(bytes, 20);
    let expected = doc_count
        .checked_mul(RECORD_LEN as u64)
        .and_then(|n| n.checked_add(INDEX_HEADER_LEN as u64));
    if expected != Some(bytes.len() as u64) {
        return Err(format(format!(
            "{doc_count} records do not match file length {}",
            bytes.len()
        )));
    }

    let mut spans = Vec::with_capacity(doc_count as usize);
    let mut prev_end = 0u64;
    for rec in bytes[INDEX_HEADER_LEN..].chunks_exact(RECORD_LEN) {
        let span = DocSpan {
            byte_offset: read_u64(rec, 0),
            byte_length: read_u64(rec, 8),
        };
        let end = span.byte_offset.checked_add(span.byte_length);
        if span.byte_offset < prev_end || end.is_none_or(|e| e > source_size) {
            return Err(format(format!(
                "span {} is out of order or past the source end",
                spans.len()
            )));
        }
        prev_end = span.end();
        spans.push(span);
    }
    Ok(DocumentIndex { source_size, spans })
}

fn read_u64(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
}

/// Size-based staleness check.
pub fn verify_index(
    index: &DocumentIndex,
    raw_path: impl AsRef<Path>,
) -> Result<IndexStatus, IndexError> {
    let current_size = std::fs::metadata(raw_path.as_ref())?.len();
    Ok(if current_size == index.source_size {
        IndexStatus::Ok
    } else {
        IndexStatus::Stale {
            indexed_size: index.source_size,
            current_size,
        }
    })
}

/// Raw corpus opened for random document access. Safe to share between
/// threads: reads are positioned and do not move a shared cursor.
#[derive(Debug)]
pub struct RawCorpus {
    file: File,
    index: DocumentIndex,
}

impl RawCorpus {
    pub fn open(raw_path: impl AsRef<Path>, index: DocumentIndex) -> Result<Self, IndexError> {
        let file = File::open(raw_path.as_ref())?;
        let current_size = file.metadata()?.len();
        if current_size != index.source_size {
            return Err(IndexError::Stale {
                indexed_size: index.source_size,
                current_size,
            });
        }
        Ok(RawCorpus { file, index })
    }

    pub fn index(&self) -> &DocumentIndex {
        &self.index
    }

    pub fn read_document(&self, i: u64) -> Result<Vec<u8>, IndexError> {
        let span = self.index.span(i)?;
        let mut buf = vec![0u8; span.byte_length as usize];
        read_exact_at(&self.file, &mut buf, span.byte_offset)?;
        Ok(buf)
    }

    /// Read a contiguous run of documents with one I/O call. Returns the run's
    /// bytes and the spans rebased to the start of the buffer.
    pub fn read_range(
        &self,
        first: u64,
        count: usize,
    ) -> Result<(Vec<u8>, Vec<DocSpan>), IndexError> {
        if count == 0 {
            return Ok((Vec::new(), Vec::new()));
        }
        let head = self.index.span(first)?;
        let tail = self.index.span(first + count as u64 - 1)?;
        let mut buf = vec![0u8; (tail.end() - head.byte_offset) as usize];
        read_exact_at(&self.file, &mut buf, head.byte_offset)?;
        let spans = self.index.spans[first as usize..first as usize + count]
            .iter()
            .map(|s| DocSpan {
                byte_offset: s.byte_offset - head.byte_offset,
                byte_length: s.byte_length,
            })
            .collect();
        Ok((buf, spans))
    }
}

/// One-shot document read by ordinal.
pub fn read_document(
    raw_path: impl AsRef<Path>,
    index: &DocumentIndex,
    i: u64,
) -> Result<Vec<u8>, IndexError> {
    let span = index.span(i)?;
    let file = File::open(raw_path.as_ref())?;
    let mut buf = vec![0u8; span.byte_length as usize];
    read_exact_at(&file, &mut buf, span.byte_offset)?;
    Ok(buf)
}

#[cfg(unix)]
fn read_exact_at(file: &File, buf: &mut [u8], offset: u64) -> io::Result<()> {
    use std::os::unix::fs::FileExt;
    file.read_exact_at(buf, offset)
}

#[cfg(windows)]
fn read_exact_at(file: &File, mut buf: &mut [u8], mut offset: u64) -> io::Result<()> {
    use std::os::windows::fs::FileExt;
    while !buf.is_empty() {
        match file.seek_read(buf, offset) {
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => {
                buf = &mut std::mem::take(&mut buf)[n..];
                offset += n as u64;
            }
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

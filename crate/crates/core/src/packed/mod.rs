//! Packed token datasets.
//!
//! A `.cfpk` file is a 40-byte header, a payload of fixed-width
//! little-endian token ids, and a span index of `(start_token, token_length)`
//! pairs, one per document:
//!
//! | bytes        | field                                 |
//! |--------------|---------------------------------------|
//! | 0..8         | magic `CFPKD001`                      |
//! | 8..12        | version `u32` (= 1)                   |
//! | 12..16       | token_width `u32` (1, 2 or 4)         |
//! | 16..24       | token_count `u64`                     |
//! | 24..32       | doc_count `u64`                       |
//! | 32..40       | index_offset `u64`                    |
//! | 40..         | token_count × token_width payload     |
//! | index_offset | doc_count × (u64, u64) span records   |
//!
//! Files are read through a memory map, so document and sample lookup are
//! offset arithmetic plus a slice.
//!
//! Global shuffling is a seeded document permutation stored next to the
//! packed file (`.perm`), which chunking and materialization consume.

mod format;
mod shuffle;

use thiserror::Error;

pub use format::{
    decode_tokens, sample_count, PackedHeader, PackedReader, PackedSummary, PackedWriter,
    TokenSpan, HEADER_LEN, PACKED_MAGIC, PACKED_VERSION, SPAN_RECORD_LEN,
};
pub use shuffle::{
    chunk, load_permutation, make_permutation, materialize_chunk, write_permutation, ChunkSpec,
    Permutation, SplitMix64, PERM_MAGIC, PERM_VERSION,
};

#[derive(Debug, Error)]
pub enum PackedError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid packed file: {0}")]
    Format(String),
    #[error("index {index} out of range ({len} available)")]
    OutOfRange { index: u64, len: u64 },
    #[error("token {token} does not fit in {width} byte(s)")]
    TokenOverflow { token: u32, width: u32 },
    #[error("chunk count {k} must be between 1 and max(1, {n})")]
    InvalidK { k: usize, n: usize },
    #[error("sequence length must be at least 1")]
    InvalidSeqLen,
}

/// Conventional permutation sidecar location: `<packed>.perm`.
pub fn perm_sidecar_path(packed: &std::path::Path) -> std::path::PathBuf {
    let mut s = packed.as_os_str().to_owned();
    s.push(".perm");
    s.into()
}

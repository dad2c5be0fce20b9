//! Text to token-id encoders.
//!
//! Three kinds are supported:
//!
//! - `byte`: ids are the UTF-8 bytes of the text (vocabulary of 256, or 257
//!   when the end-of-document id is 256).
//! - `whitespace`: splits on runs of Unicode whitespace and looks every word
//!   up in a vocabulary file.
//! - `bpe`: starts from single-byte pieces and repeatedly applies the
//!   lowest-rank merge present anywhere in the document, leftmost first on
//!   equal rank. There is no pre-tokenization step.
//!
//! Vocabulary files hold one piece per line (id = line number). Merge files
//! hold one `left right` pair per line (rank = line number). A piece written
//! as `<0xHH>` stands for the single raw byte `HH`, which is how bytes that
//! are not valid UTF-8 on their own, spaces inside merges, and newlines are
//! expressed.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rustc_hash::FxHashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

const UNK_PIECE: &[u8] = b"<unk>";
const NO_PIECE: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("cannot read {path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("vocabulary: {0}")]
    VocabFormat(String),
    #[error("merges: {0}")]
    MergeFormat(String),
    #[error("invalid tokenizer spec: {0}")]
    InvalidSpec(String),
    #[error("token id {id} is outside the vocabulary of {vocab_size}")]
    OutOfVocab { id: u32, vocab_size: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenizerKind {
    Byte,
    Whitespace,
    Bpe,
}

impl std::str::FromStr for TokenizerKind {
    type Err = TokenizerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "byte" => Ok(TokenizerKind::Byte),
            "whitespace" => Ok(TokenizerKind::Whitespace),
            "bpe" => Ok(TokenizerKind::Bpe),
            other => Err(TokenizerError::InvalidSpec(format!(
                "unknown tokenizer kind '{other}'"
            ))),
        }
    }
}

/// How to build a [`Tokenizer`].
///
/// When `unk_token_id` is `None` for the whitespace and BPE kinds, an
/// implicit `<unk>` piece is appended after the last vocabulary line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizerSpec {
    pub kind: TokenizerKind,
    pub vocab_path: Option<PathBuf>,
    pub merges_path: Option<PathBuf>,
    pub eod_token_id: Option<u32>,
    pub unk_token_id: Option<u32>,
}

impl TokenizerSpec {
    pub fn byte(eod_token_id: Option<u32>) -> Self {
        TokenizerSpec {
            kind: TokenizerKind::Byte,
            vocab_path: None,
            merges_path: None,
            eod_token_id,
            unk_token_id: None,
        }
    }
}

/// Smallest of 1, 2 or 4 bytes that can hold every id below `vocab_size`.
pub fn token_width(vocab_size: usize) -> u32 {
    match vocab_size {
        0..=0x100 => 1,
        0x101..=0x1_0000 => 2,
        _ => 4,
    }
}

#[derive(Debug, Clone)]
struct Vocab {
    pieces: Vec<Vec<u8>>,
    ids: FxHashMap<Vec<u8>, u32>,
    unk: u32,
}

impl Vocab {
    fn new(pieces: Vec<Vec<u8>>, unk: Option<u32>) -> Result<Self, TokenizerError> {
        let mut ids = FxHashMap::with_capacity_and_hasher(pieces.len(), Default::default());
        for (id, piece) in pieces.iter().enumerate() {
            if piece.is_empty() {
                return Err(TokenizerError::VocabFormat(format!(
                    "line {} is empty",
                    id + 1
                )));
            }
            if ids.insert(piece.clone(), id as u32).is_some() {
                return Err(TokenizerError::VocabFormat(format!(
                    "piece {} on line {} is duplicated",
                    display_piece(piece),
                    id + 1
                )));
            }
        }
        let mut pieces = pieces;
        let unk = match unk {
            Some(id) if (id as usize) < pieces.len() => id,
            Some(id) => {
                return Err(TokenizerError::InvalidSpec(format!(
                    "unk_token_id {id} is not below the vocabulary size {}",
                    pieces.len()
                )))
            }
            None => {
                pieces.push(UNK_PIECE.to_vec());
                (pieces.len() - 1) as u32
            }
        };
        Ok(Vocab { pieces, ids, unk })
    }

    fn len(&self) -> usize {
        self.pieces.len()
    }
}

#[derive(Debug, Clone)]
struct BpeModel {
    vocab: Vocab,
    /// (left id, right id) -> (rank, merged id)
    merges: FxHashMap<(u32, u32), (u32, u32)>,
    /// single byte -> piece id, or NO_PIECE
    byte_ids: [u32; 256],
}

#[derive(Debug, Clone)]
enum Model {
    Byte,
    Whitespace(Vocab),
    Bpe(Box<BpeModel>),
}

/// An immutable encoder, safe to share between worker threads.
#[derive(Clone)]
pub struct Tokenizer {
    model: Model,
    eod: Option<u32>,
    vocab_size: usize,
}

impl fmt::Debug for Tokenizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tokenizer")
            .field("kind", &self.kind())
            .field("vocab_size", &self.vocab_size)
            .field("eod", &self.eod)
            .finish()
    }
}

pub fn load_tokenizer(spec: &TokenizerSpec) -> Result<Tokenizer, TokenizerError> {
    let require = |path: &Option<PathBuf>, what: &str| {
        path.clone().ok_or_else(|| {
            TokenizerError::InvalidSpec(format!("{:?} tokenizer needs {what}", spec.kind))
        })
    };
    match spec.kind {
        TokenizerKind::Byte => Tokenizer::byte(spec.eod_token_id),
        TokenizerKind::Whitespace => {
            let pieces = read_vocab(&require(&spec.vocab_path, "vocab_path")?)?;
            Tokenizer::whitespace(pieces, spec.unk_token_id, spec.eod_token_id)
        }
        TokenizerKind::Bpe => {
            let pieces = read_vocab(&require(&spec.vocab_path, "vocab_path")?)?;
            let merges = read_merges(&require(&spec.merges_path, "merges_path")?)?;
            Tokenizer::bpe(pieces, merges, spec.unk_token_id, spec.eod_token_id)
        }
    }
}

fn read_text(path: &Path) -> Result<String, TokenizerError> {
    std::fs::read_to_string(path).map_err(|source| TokenizerError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn file_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.strip_suffix('\n')
        .unwrap_or(text)
        .split('\n')
        .enumerate()
        .filter(move |_| !text.is_empty())
}

/// Decode `<0xHH>` into a single byte; anything else is the piece's UTF-8.
fn parse_piece(s: &str) -> Vec<u8> {
    if s.len() == 6 && s.starts_with("<0x") && s.ends_with('>') {
        if let Ok(b) = u8::from_str_radix(&s[3..5], 16) {
            return vec![b];
        }
    }
    s.as_bytes().to_vec()
}

fn display_piece(piece: &[u8]) -> String {
    match std::str::from_utf8(piece) {
        Ok(s) if piece.len() > 1 || !piece[0].is_ascii_whitespace() => format!("'{s}'"),
        _ => piece.iter().map(|b| format!("<0x{b:02X}>")).collect(),
    }
}

pub fn read_vocab(path: &Path) -> Result<Vec<Vec<u8>>, TokenizerError> {
    let text = read_text(path)?;
    Ok(file_lines(&text)
        .map(|(_, line)| parse_piece(line))
        .collect())
}

/// Ordered merge rules, highest priority first.
pub type MergeList = Vec<(Vec<u8>, Vec<u8>)>;

pub fn read_merges(path: &Path) -> Result<MergeList, TokenizerError> {
    let text = read_text(path)?;
    file_lines(&text)
        .map(|(n, line)| match line.split(' ').collect::<Vec<_>>()[..] {
            [l, r] if !l.is_empty() && !r.is_empty() => Ok((parse_piece(l), parse_piece(r))),
            _ => Err(TokenizerError::MergeFormat(format!(
                "line {} is not 'left right': {line:?}",
                n + 1
            ))),
        })
        .collect()
}

impl Tokenizer {
    pub fn byte(eod: Option<u32>) -> Result<Self, TokenizerError> {
        let vocab_size = match eod {
            None => 256,
            Some(id) if id < 256 => 256,
            Some(256) => 257,
            Some(id) => {
                return Err(TokenizerError::InvalidSpec(format!(
                    "byte tokenizer eod_token_id {id} must be <= 256"
                )))
            }
        };
        Ok(Tokenizer {
            model: Model::Byte,
            eod,
            vocab_size,
        })
    }

    pub fn whitespace(
        pieces: Vec<Vec<u8>>,
        unk: Option<u32>,
        eod: Option<u32>,
    ) -> Result<Self, TokenizerError> {
        let vocab = Vocab::new(pieces, unk)?;
        let vocab_size = vocab.len();
        check_eod(eod, vocab_size)?;
        Ok(Tokenizer {
            model: Model::Whitespace(vocab),
            eod,
            vocab_size,
        })
    }

    pub fn bpe(
        pieces: Vec<Vec<u8>>,
        merges: Vec<(Vec<u8>, Vec<u8>)>,
        unk: Option<u32>,
        eod: Option<u32>,
    ) -> Result<Self, TokenizerError> {
        let vocab = Vocab::new(pieces, unk)?;
        let mut table = FxHashMap::with_capacity_and_hasher(merges.len(), Default::default());
        let lookup = |piece: &[u8], rank: usize| {
            vocab.ids.get(piece).copied().ok_or_else(|| {
                TokenizerError::MergeFormat(format!(
                    "line {} references {} which is not in the vocabulary",
                    rank + 1,
                    display_piece(piece)
                ))
            })
        };
        for (rank, (left, right)) in merges.iter().enumerate() {
            let l = lookup(left, rank)?;
            let r = lookup(right, rank)?;
            let merged = lookup(&[left.as_slice(), right.as_slice()].concat(), rank)?;
            if table.insert((l, r), (rank as u32, merged)).is_some() {
                return Err(TokenizerError::MergeFormat(format!(
                    "line {} repeats an earlier pair",
                    rank + 1
                )));
            }
        }
        let mut byte_ids = [NO_PIECE; 256];
        for (b, slot) in byte_ids.iter_mut().enumerate() {
            if let Some(&id) = vocab.ids.get(&[b as u8][..]) {
                *slot = id;
            }
        }
        let vocab_size = vocab.len();
        check_eod(eod, vocab_size)?;
        Ok(Tokenizer {
            model: Model::Bpe(Box::new(BpeModel {
                vocab,
                merges: table,
                byte_ids,
            })),
            eod,
            vocab_size,
        })
    }

    pub fn kind(&self) -> TokenizerKind {
        match self.model {
            Model::Byte => TokenizerKind::Byte,
            Model::Whitespace(_) => TokenizerKind::Whitespace,
            Model::Bpe(_) => TokenizerKind::Bpe,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn eod_token_id(&self) -> Option<u32> {
        self.eod
    }

    /// Packed-file token width for this vocabulary.
    pub fn token_width(&self) -> u32 {
        token_width(self.vocab_size)
    }

    /// Encode text. Never fails; never appends the end-of-document id.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut out = Vec::new();
        self.encode_into(text, &mut out);
        out
    }

    /// Append the encoding of `text` to `out`.
    pub fn encode_into(&self, text: &str, out: &mut Vec<u32>) {
        match &self.model {
            Model::Byte => out.extend(text.bytes().map(u32::from)),
            Model::Whitespace(vocab) => out.extend(
                text.split_whitespace()
                    .map(|w| vocab.ids.get(w.as_bytes()).copied().unwrap_or(vocab.unk)),
            ),
            Model::Bpe(model) => model.encode_into(text.as_bytes(), out),
        }
    }

    pub fn decode(&self, ids: &[u32]) -> Result<String, TokenizerError> {
        if let Some(&id) = ids.iter().find(|&&id| id as usize >= self.vocab_size) {
            return Err(TokenizerError::OutOfVocab {
                id,
                vocab_size: self.vocab_size,
            });
        }
        let text = match &self.model {
            Model::Byte => {
                let bytes: Vec<u8> = ids
                    .iter()
                    .filter(|&&id| id < 256)
                    .map(|&id| id as u8)
                    .collect();
                String::from_utf8_lossy(&bytes).into_owned()
            }
            Model::Whitespace(vocab) => {
                let words: Vec<_> = ids
                    .iter()
                    .map(|&id| String::from_utf8_lossy(&vocab.pieces[id as usize]))
                    .collect();
                words.join(" ")
            }
            Model::Bpe(model) => {
                let bytes: Vec<u8> = ids
                    .iter()
                    .flat_map(|&id| model.vocab.pieces[id as usize].iter().copied())
                    .collect();
                String::from_utf8_lossy(&bytes).into_owned()
            }
        };
        Ok(text)
    }
}

fn check_eod(eod: Option<u32>, vocab_size: usize) -> Result<(), TokenizerError> {
    match eod {
        Some(id) if id as usize >= vocab_size => Err(TokenizerError::InvalidSpec(format!(
            "eod_token_id {id} is not below the vocabulary size {vocab_size}"
        ))),
        _ => Ok(()),
    }
}

#[derive(Clone, Copy)]
struct Symbol {
    id: u32,
    prev: usize,
    next: usize,
}

const NIL: usize = usize::MAX;

impl BpeModel {
    fn encode_into(&self, bytes: &[u8], out: &mut Vec<u32>) {
        if bytes.is_empty() {
            return;
        }
        let n = bytes.len();
        let mut symbols: Vec<Symbol> = bytes
            .iter()
            .enumerate()
            .map(|(i, &b)| Symbol {
                id: self.byte_ids[b as usize],
                prev: if i == 0 { NIL } else { i - 1 },
                next: if i + 1 == n { NIL } else { i + 1 },
            })
            .collect();

        // Min-heap on (rank, position of left symbol). Positions keep text
        // order because a merged symbol reuses its left half's slot.
        let mut heap = BinaryHeap::new();
        let push_pair =
            |heap: &mut BinaryHeap<Reverse<(u32, usize)>>, symbols: &[Symbol], left: usize| {
                let right = symbols[left].next;
                if right == NIL {
                    return;
                }
                if let Some(&(rank, _)) = self.merges.get(&(symbols[left].id, symbols[right].id)) {
                    heap.push(Reverse((rank, left)));
                }
            };
        for i in 0..n - 1 {
            push_pair(&mut heap, &symbols, i);
        }

        while let Some(Reverse((rank, left))) = heap.pop() {
            let Symbol {
                id: left_id,
                next: right,
                ..
            } = symbols[left];
            // Entries go stale when a neighbour merges; ranks identify pairs
            // uniquely, so a rank match means the pair is still present.
            if left_id == NO_PIECE || right == NIL {
                continue;
            }
            let Some(&(current_rank, merged)) = self.merges.get(&(left_id, symbols[right].id))
            else {
                continue;
            };
            if current_rank != rank {
                continue;
            }
            let after = symbols[right].next;
            symbols[left].id = merged;
            symbols[left].next = after;
            symbols[right].id = NO_PIECE;
            symbols[right].next = NIL;
            if after != NIL {
                symbols[after].prev = left;
            }
            let before = symbols[left].prev;
            if before != NIL {
                push_pair(&mut heap, &symbols, before);
            }
            push_pair(&mut heap, &symbols, left);
        }

        let mut i = 0;
        while i != NIL {
            let s = symbols[i];
            out.push(if s.id == NO_PIECE {
                self.vocab.unk
            } else {
                s.id
            });
            i = s.next;
        }
    }
}

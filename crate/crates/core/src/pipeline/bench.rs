//! Synthetic corpora and throughput sweeps for the tokenization pipeline.

use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::{run_pipeline, PipelineConfig, PipelineError};
use crate::corpus_index::{build_index, sidecar_path, write_index};
use crate::packed::SplitMix64;
use crate::tokenizers::{MergeList, Tokenizer, TokenizerError};

const CONSONANTS: &[u8] = b"kmnprst";
const VOWELS: &[u8] = b"aeiou";

pub const BENCH_CSV_HEADER: &str =
    "workers,batch_size,queue_capacity,documents,tokens,seconds,tokens_per_sec";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusSize {
    Documents(u64),
    /// Stop after the first document that reaches this many bytes in total.
    Bytes(u64),
}

/// Seeded generator of JSONL documents made of consonant-vowel words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticCorpus {
    pub seed: u64,
    pub size: CorpusSize,
    pub min_words: u32,
    pub max_words: u32,
}

impl SyntheticCorpus {
    pub fn new(seed: u64, size: CorpusSize) -> Self {
        SyntheticCorpus {
            seed,
            size,
            min_words: 20,
            max_words: 200,
        }
    }
}

fn syllables() -> Vec<[u8; 2]> {
    CONSONANTS
        .iter()
        .flat_map(|&c| VOWELS.iter().map(move |&v| [c, v]))
        .collect()
}

/// Write the corpus to `path`, returning `(documents, bytes)`.
pub fn write_synthetic_corpus(
    spec: &SyntheticCorpus,
    path: impl AsRef<Path>,
) -> std::io::Result<(u64, u64)> {
    let sylls = syllables();
    let mut rng = SplitMix64::new(spec.seed);
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    let (mut docs, mut bytes) = (0u64, 0u64);
    let span = u64::from(spec.max_words.saturating_sub(spec.min_words)) + 1;
    let mut line = Vec::new();
    loop {
        let done = match spec.size {
            CorpusSize::Documents(n) => docs >= n,
            CorpusSize::Bytes(n) => bytes >= n,
        };
        if done {
            break;
        }
        line.clear();
        line.extend_from_slice(br#"{"id":"#);
        line.extend_from_slice(docs.to_string().as_bytes());
        line.extend_from_slice(br#","text":""#);
        let words = u64::from(spec.min_words) + rng.bounded(span);
        for w in 0..words {
            if w > 0 {
                line.push(b' ');
            }
            for _ in 0..1 + rng.bounded(4) {
                line.extend_from_slice(&sylls[rng.bounded(sylls.len() as u64) as usize]);
            }
        }
        line.extend_from_slice(b"\"}\n");
        out.write_all(&line)?;
        docs += 1;
        bytes += line.len() as u64;
    }
    out.flush()?;
    Ok((docs, bytes))
}

/// Vocabulary and merge list covering all bytes plus syllables, spaced
/// syllables and syllable pairs, so typical words need several merges.
/// The last piece is `<eod>`.
pub fn synthetic_bpe_tables() -> (Vec<Vec<u8>>, MergeList) {
    let mut pieces: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
    let mut merges = Vec::new();
    let sylls = syllables();
    let mut add = |left: Vec<u8>, right: Vec<u8>| {
        pieces.push([left.as_slice(), right.as_slice()].concat());
        merges.push((left, right));
    };
    for s in &sylls {
        add(vec![s[0]], vec![s[1]]);
    }
    for s in &sylls {
        add(b" ".to_vec(), s.to_vec());
    }
    for a in &sylls {
        for b in &sylls {
            add(a.to_vec(), b.to_vec());
        }
    }
    for a in &sylls {
        for b in &sylls {
            add([b" ".as_slice(), a].concat(), b.to_vec());
        }
    }
    pieces.push(b"<eod>".to_vec());
    (pieces, merges)
}

pub fn synthetic_bpe_tokenizer() -> Result<Tokenizer, TokenizerError> {
    let (pieces, merges) = synthetic_bpe_tables();
    let eod = (pieces.len() - 1) as u32;
    Tokenizer::bpe(pieces, merges, None, Some(eod))
}

/// Grid of pipeline settings to time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchSweep {
    pub workers: Vec<usize>,
    pub batch_sizes: Vec<usize>,
    pub queue_capacities: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub workers: usize,
    pub batch_size: usize,
    pub queue_capacity: usize,
    pub documents: u64,
    pub tokens: u64,
    pub seconds: f64,
    pub tokens_per_sec: f64,
}

/// Tokenize `raw_path` once per grid point into `work_dir`.
pub fn bench_pipeline(
    raw_path: &Path,
    tokenizer: &Tokenizer,
    sweep: &BenchSweep,
    work_dir: &Path,
) -> Result<Vec<BenchRow>, PipelineError> {
    let index = build_index(raw_path)?;
    write_index(&index, sidecar_path(raw_path))?;
    let out = work_dir.join("bench.cfpk");
    let mut rows = Vec::new();
    for &workers in &sweep.workers {
        for &batch_size in &sweep.batch_sizes {
            for &queue_capacity in &sweep.queue_capacities {
                let cfg = PipelineConfig {
                    workers,
                    batch_size,
                    queue_capacity,
                    ..PipelineConfig::new(&out)
                };
                let (_, stats) = run_pipeline(raw_path, index.clone(), tokenizer, &cfg)?;
                log::info!(
                    "workers={workers} batch={batch_size} queue={queue_capacity}: {:.0} tok/s",
                    stats.tokens_per_sec
                );
                rows.push(BenchRow {
                    workers,
                    batch_size,
                    queue_capacity,
                    documents: stats.documents,
                    tokens: stats.tokens,
                    seconds: stats.elapsed_secs,
                    tokens_per_sec: stats.tokens_per_sec,
                });
            }
        }
    }
    let _ = std::fs::remove_file(&out);
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(BENCH_CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{:.6},{:.1}\n",
            r.workers,
            r.batch_size,
            r.queue_capacity,
            r.documents,
            r.tokens,
            r.seconds,
            r.tokens_per_sec
        ));
    }
    s
}

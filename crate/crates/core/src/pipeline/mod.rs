//! Producer-consumer tokenization into packed files.
//!
//! ```text
//!  reader ──RawBatch──▶ work queue ──▶ W workers ──TokenBatch──▶ output queue ──▶ writer
//! ```
//!
//! One reader pulls contiguous runs of documents from the raw corpus (one
//! positioned read per batch) and tags each batch with an increasing
//! sequence number. Workers extract the text field, encode it and append
//! the end-of-document id. The single writer parks out-of-order batches in
//! a reorder buffer and appends them strictly by sequence number, so the
//! packed file is byte-identical for any worker count.
//!
//! The number of batches in flight is bounded by a permit window the reader
//! acquires and the writer releases, which also bounds the reorder buffer.

mod bench;
mod extract;
mod queue;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::corpus_index::{DocSpan, DocumentIndex, IndexError, RawCorpus};
use crate::packed::{PackedError, PackedSummary, PackedWriter};
use crate::tokenizers::Tokenizer;

pub use bench::{
    bench_csv, bench_pipeline, synthetic_bpe_tables, synthetic_bpe_tokenizer,
    write_synthetic_corpus, BenchRow, BenchSweep, CorpusSize, SyntheticCorpus, BENCH_CSV_HEADER,
};
pub use extract::{extract_text, Extracted, SkipReason, DEFAULT_TEXT_KEY};
use queue::Permits;
pub use queue::{BoundedQueue, Closed};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Packed(#[from] PackedError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("reorder buffer exceeded {cap} batches while waiting for batch {waiting_for}")]
    ReorderOverflow { cap: usize, waiting_for: u64 },
    #[error("{0} thread panicked")]
    Panicked(&'static str),
}

/// Tuning knobs of one tokenization run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineConfig {
    pub workers: usize,
    pub batch_size: usize,
    pub queue_capacity: usize,
    pub append_eod: bool,
    pub text_key: String,
    /// Hard cap on batches parked in the writer; `None` means
    /// 4 × `queue_capacity`.
    pub reorder_cap: Option<usize>,
    pub out_path: PathBuf,
}

impl PipelineConfig {
    pub fn new(out_path: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            workers: default_workers(),
            batch_size: 64,
            queue_capacity: 16,
            append_eod: true,
            text_key: DEFAULT_TEXT_KEY.to_string(),
            reorder_cap: None,
            out_path: out_path.into(),
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let positive = [
            ("workers", self.workers),
            ("batch_size", self.batch_size),
            ("queue_capacity", self.queue_capacity),
            ("reorder_cap", self.reorder_cap.unwrap_or(1)),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(PipelineError::InvalidConfig(format!(
                    "{name} must be at least 1"
                )));
            }
        }
        Ok(())
    }

    fn window(&self) -> usize {
        self.reorder_cap.unwrap_or(4 * self.queue_capacity)
    }
}

/// Logical CPUs minus the reader and writer threads, at least one.
pub fn default_workers() -> usize {
    thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .saturating_sub(2)
        .max(1)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTime {
    pub busy_secs: f64,
    pub idle_secs: f64,
}

impl StageTime {
    fn add(&mut self, other: StageTime) {
        self.busy_secs += other.busy_secs;
        self.idle_secs += other.idle_secs;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PipelineStats {
    /// Documents written to the packed file.
    pub documents: u64,
    /// Documents dropped for any reason.
    pub skipped: u64,
    pub malformed: u64,
    pub missing_text: u64,
    pub empty: u64,
    pub tokens: u64,
    pub elapsed_secs: f64,
    pub tokens_per_sec: f64,
    pub reader: StageTime,
    /// Summed over all workers.
    pub workers: StageTime,
    pub writer: StageTime,
    pub work_queue_high_water: usize,
    pub output_queue_high_water: usize,
    pub reorder_high_water: usize,
}

impl PipelineStats {
    fn count_skip(&mut self, reason: SkipReason) {
        self.skipped += 1;
        match reason {
            SkipReason::Malformed => self.malformed += 1,
            SkipReason::MissingKey | SkipReason::NotString => self.missing_text += 1,
            SkipReason::Empty => self.empty += 1,
        }
    }
}

/// Destination of the writer stage.
pub trait TokenSink {
    fn write_document(&mut self, tokens: &[u32]) -> Result<(), PipelineError>;
}

impl<W: std::io::Write + std::io::Seek> TokenSink for PackedWriter<W> {
    fn write_document(&mut self, tokens: &[u32]) -> Result<(), PipelineError> {
        Ok(self.push_document(tokens)?)
    }
}

struct RawBatch {
    seq_no: u64,
    bytes: Vec<u8>,
    spans: Vec<DocSpan>,
}

enum DocOutcome {
    Tokens(usize),
    Skip(SkipReason),
}

struct TokenBatch {
    seq_no: u64,
    tokens: Vec<u32>,
    docs: Vec<DocOutcome>,
}

/// Tokenize the corpus at `raw_path` into `cfg.out_path`.
///
/// The file is written to `<out>.partial` and renamed on success.
pub fn run_pipeline(
    raw_path: impl AsRef<Path>,
    index: DocumentIndex,
    tokenizer: &Tokenizer,
    cfg: &PipelineConfig,
) -> Result<(PackedSummary, PipelineStats), PipelineError> {
    cfg.validate()?;
    eod_for(tokenizer, cfg)?;
    let corpus = RawCorpus::open(raw_path, index)?;
    let mut partial = cfg.out_path.as_os_str().to_owned();
    partial.push(".partial");
    let partial = PathBuf::from(partial);

    let result = (|| {
        let mut writer = PackedWriter::create(&partial, tokenizer.token_width())?;
        let stats = run_to_sink(&corpus, tokenizer, cfg, &mut writer)?;
        let (_, summary) = writer.finish()?;
        Ok((summary, stats))
    })();
    match result {
        Ok(done) => {
            std::fs::rename(&partial, &cfg.out_path)?;
            Ok(done)
        }
        Err(e) => {
            let _ = std::fs::remove_file(&partial);
            Err(e)
        }
    }
}

fn eod_for(tokenizer: &Tokenizer, cfg: &PipelineConfig) -> Result<Option<u32>, PipelineError> {
    match (cfg.append_eod, tokenizer.eod_token_id()) {
        (false, _) => Ok(None),
        (true, Some(id)) => Ok(Some(id)),
        (true, None) => Err(PipelineError::InvalidConfig(
            "append_eod is set but the tokenizer has no eod_token_id".to_string(),
        )),
    }
}

/// Run reader, workers and writer over `corpus`, handing documents to `sink`
/// in corpus order.
pub fn run_to_sink<S: TokenSink + ?Sized>(
    corpus: &RawCorpus,
    tokenizer: &Tokenizer,
    cfg: &PipelineConfig,
    sink: &mut S,
) -> Result<PipelineStats, PipelineError> {
    cfg.validate()?;
    let eod = eod_for(tokenizer, cfg)?;
    let started = Instant::now();

    let work: BoundedQueue<RawBatch> = BoundedQueue::new(cfg.queue_capacity);
    let output: BoundedQueue<TokenBatch> = BoundedQueue::new(cfg.queue_capacity);
    let permits = Permits::new(cfg.window());
    let live_workers = AtomicUsize::new(cfg.workers);
    let abort = || {
        permits.close();
        work.close();
        output.close();
    };

    let (writer_result, reader_result, worker_results) = thread::scope(|scope| {
        let reader = scope.spawn(|| {
            let _close = OnDrop(|| work.close());
            let result = read_batches(corpus, cfg.batch_size, &work, &permits);
            if result.is_err() {
                abort();
            }
            result
        });
        let workers: Vec<_> = (0..cfg.workers)
            .map(|_| {
                scope.spawn(|| {
                    let _last_out = OnDrop(|| {
                        if live_workers.fetch_sub(1, Ordering::AcqRel) == 1 {
                            output.close();
                        }
                    });
                    tokenize_batches(tokenizer, &cfg.text_key, eod, &work, &output)
                })
            })
            .collect();

        let writer_result = write_in_order(sink, &output, &permits, cfg.window());
        if writer_result.is_err() {
            abort();
        }
        let reader_result = reader.join();
        let worker_results: Vec<_> = workers.into_iter().map(|h| h.join()).collect();
        (writer_result, reader_result, worker_results)
    });

    let reader_time = reader_result.map_err(|_| PipelineError::Panicked("reader"))??;
    let mut worker_time = StageTime::default();
    for r in worker_results {
        worker_time.add(r.map_err(|_| PipelineError::Panicked("worker"))?);
    }
    let (mut stats, writer_time) = writer_result?;

    stats.elapsed_secs = started.elapsed().as_secs_f64();
    stats.tokens_per_sec = if stats.elapsed_secs > 0.0 {
        stats.tokens as f64 / stats.elapsed_secs
    } else {
        0.0
    };
    stats.reader = reader_time;
    stats.workers = worker_time;
    stats.writer = writer_time;
    stats.work_queue_high_water = work.high_water_mark();
    stats.output_queue_high_water = output.high_water_mark();
    log::info!(
        "tokenized {} documents ({} skipped), {} tokens in {:.3}s",
        stats.documents,
        stats.skipped,
        stats.tokens,
        stats.elapsed_secs
    );
    Ok(stats)
}

struct OnDrop<F: FnMut()>(F);

impl<F: FnMut()> Drop for OnDrop<F> {
    fn drop(&mut self) {
        (self.0)()
    }
}

fn read_batches(
    corpus: &RawCorpus,
    batch_size: usize,
    work: &BoundedQueue<RawBatch>,
    permits: &Permits,
) -> Result<StageTime, PipelineError> {
    let n = corpus.index().len() as u64;
    let mut time = StageTime::default();
    let (mut first, mut seq_no) = (0u64, 0u64);
    while first < n {
        let t0 = Instant::now();
        if !permits.acquire() {
            break;
        }
        let t1 = Instant::now();
        let count = (n - first).min(batch_size as u64) as usize;
        let (bytes, spans) = corpus.read_range(first, count)?;
        let t2 = Instant::now();
        if work
            .push(RawBatch {
                seq_no,
                bytes,
                spans,
            })
            .is_err()
        {
            break;
        }
        time.idle_secs += (t1 - t0 + t2.elapsed()).as_secs_f64();
        time.busy_secs += (t2 - t1).as_secs_f64();
        first += count as u64;
        seq_no += 1;
    }
    Ok(time)
}

fn tokenize_batches(
    tokenizer: &Tokenizer,
    text_key: &str,
    eod: Option<u32>,
    work: &BoundedQueue<RawBatch>,
    output: &BoundedQueue<TokenBatch>,
) -> StageTime {
    let mut busy = Duration::ZERO;
    let mut idle = Duration::ZERO;
    loop {
        let t0 = Instant::now();
        let Some(batch) = work.pop() else { break };
        let t1 = Instant::now();
        let mut tokens = Vec::new();
        let mut docs = Vec::with_capacity(batch.spans.len());
        for span in &batch.spans {
            let raw = &batch.bytes[span.byte_offset as usize..span.end() as usize];
            let outcome = match extract_text(raw, text_key) {
                Extracted::Skip(reason) => DocOutcome::Skip(reason),
                Extracted::Text(text) => {
                    let start = tokens.len();
                    tokenizer.encode_into(&text, &mut tokens);
                    if tokens.len() == start {
                        DocOutcome::Skip(SkipReason::Empty)
                    } else {
                        tokens.extend(eod);
                        DocOutcome::Tokens(tokens.len() - start)
                    }
                }
            };
            docs.push(outcome);
        }
        let t2 = Instant::now();
        let pushed = output.push(TokenBatch {
            seq_no: batch.seq_no,
            tokens,
            docs,
        });
        idle += t1 - t0 + t2.elapsed();
        busy += t2 - t1;
        if pushed.is_err() {
            break;
        }
    }
    StageTime {
        busy_secs: busy.as_secs_f64(),
        idle_secs: idle.as_secs_f64(),
    }
}

fn write_in_order<S: TokenSink + ?Sized>(
    sink: &mut S,
    output: &BoundedQueue<TokenBatch>,
    permits: &Permits,
    cap: usize,
) -> Result<(PipelineStats, StageTime), PipelineError> {
    let mut stats = PipelineStats::default();
    let mut time = StageTime::default();
    let mut pending: BTreeMap<u64, TokenBatch> = BTreeMap::new();
    let mut next = 0u64;
    loop {
        let t0 = Instant::now();
        let Some(batch) = output.pop() else { break };
        let t1 = Instant::now();
        pending.insert(batch.seq_no, batch);
        stats.reorder_high_water = stats.reorder_high_water.max(pending.len());
        if pending.len() > cap {
            return Err(PipelineError::ReorderOverflow {
                cap,
                waiting_for: next,
            });
        }
        while let Some(batch) = pending.remove(&next) {
            let mut offset = 0;
            for doc in &batch.docs {
                match *doc {
                    DocOutcome::Tokens(len) => {
                        sink.write_document(&batch.tokens[offset..offset + len])?;
                        offset += len;
                        stats.documents += 1;
                        stats.tokens += len as u64;
                    }
                    DocOutcome::Skip(reason) => stats.count_skip(reason),
                }
            }
            next += 1;
            permits.release();
        }
        time.idle_secs += (t1 - t0).as_secs_f64();
        time.busy_secs += t1.elapsed().as_secs_f64();
    }
    if !pending.is_empty() {
        return Err(PipelineError::InvalidConfig(format!(
            "pipeline ended with {} batches still waiting for batch {next}",
            pending.len()
        )));
    }
    Ok((stats, time))
}

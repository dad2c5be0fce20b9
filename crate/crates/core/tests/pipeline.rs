use std::io::Write;
use std::path::Path;
use std::time::Duration;

use corpusforge::corpus_index::{build_index, RawCorpus};
use corpusforge::pipeline::{
    run_pipeline, run_to_sink, synthetic_bpe_tokenizer, write_synthetic_corpus, CorpusSize,
    PipelineConfig, PipelineError, SyntheticCorpus, TokenSink,
};
use corpusforge::tokenizers::Tokenizer;

mod common;

use common::sequential_packed;

fn config(out: &Path, workers: usize, queue_capacity: usize, batch_size: usize) -> PipelineConfig {
    PipelineConfig {
        workers,
        queue_capacity,
        batch_size,
        ..PipelineConfig::new(out)
    }
}

#[test]
fn output_identical_across_worker_counts_and_capacities() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("c.jsonl");
    write_synthetic_corpus(&SyntheticCorpus::new(11, CorpusSize::Documents(300)), &raw).unwrap();
    let tok = synthetic_bpe_tokenizer().unwrap();
    let expected = sequential_packed(&raw, &tok);
    let index = build_index(&raw).unwrap();
    for workers in [1, 2, 4, 8] {
        for capacity in [1, 4, 64] {
            let out = dir.path().join(format!("o{workers}_{capacity}.cfpk"));
            run_pipeline(
                &raw,
                index.clone(),
                &tok,
                &config(&out, workers, capacity, 7),
            )
            .unwrap();
            assert_eq!(
                std::fs::read(&out).unwrap(),
                expected,
                "workers={workers} capacity={capacity}"
            );
        }
    }
}

#[test]
fn one_malformed_line_in_a_hundred() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("c.jsonl");
    let mut f = std::fs::File::create(&raw).unwrap();
    for i in 0..100 {
        if i == 37 {
            writeln!(f, "{{\"text\": \"unterminated").unwrap();
        } else {
            writeln!(f, "{{\"text\": \"document {i}\"}}").unwrap();
        }
    }
    drop(f);
    let tok = Tokenizer::byte(Some(256)).unwrap();
    let out = dir.path().join("o.cfpk");
    let (summary, stats) = run_pipeline(
        &raw,
        build_index(&raw).unwrap(),
        &tok,
        &config(&out, 3, 2, 4),
    )
    .unwrap();
    assert_eq!(summary.doc_count, 99);
    assert_eq!((stats.skipped, stats.malformed), (1, 1));
    assert_eq!(std::fs::read(&out).unwrap(), sequential_packed(&raw, &tok));
}

struct SlowSink(Vec<Vec<u32>>);

impl TokenSink for SlowSink {
    fn write_document(&mut self, tokens: &[u32]) -> Result<(), PipelineError> {
        std::thread::sleep(Duration::from_micros(200));
        self.0.push(tokens.to_vec());
        Ok(())
    }
}

#[test]
fn slow_writer_keeps_queues_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("c.jsonl");
    write_synthetic_corpus(&SyntheticCorpus::new(5, CorpusSize::Documents(400)), &raw).unwrap();
    let corpus = RawCorpus::open(&raw, build_index(&raw).unwrap()).unwrap();
    let tok = synthetic_bpe_tokenizer().unwrap();
    for capacity in [1, 3] {
        let cfg = config(Path::new("unused"), 4, capacity, 2);
        let mut sink = SlowSink(Vec::new());
        let stats = run_to_sink(&corpus, &tok, &cfg, &mut sink).unwrap();
        assert_eq!(sink.0.len(), 400);
        assert!(stats.work_queue_high_water <= capacity);
        assert!(stats.output_queue_high_water <= capacity);
        assert!(stats.reorder_high_water <= 4 * capacity);
    }
}

#[test]
fn more_workers_than_documents_and_empty_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let tok = Tokenizer::byte(Some(256)).unwrap();
    let raw = dir.path().join("two.jsonl");
    std::fs::write(&raw, "{\"text\":\"a\"}\n{\"text\":\"b\"}\n").unwrap();
    let out = dir.path().join("two.cfpk");
    let (summary, _) = run_pipeline(
        &raw,
        build_index(&raw).unwrap(),
        &tok,
        &config(&out, 16, 1, 1),
    )
    .unwrap();
    assert_eq!(summary.doc_count, 2);

    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let out = dir.path().join("empty.cfpk");
    let (summary, stats) = run_pipeline(
        &empty,
        build_index(&empty).unwrap(),
        &tok,
        &config(&out, 4, 2, 8),
    )
    .unwrap();
    assert_eq!(
        (summary.doc_count, summary.token_count, stats.documents),
        (0, 0, 0)
    );
    assert_eq!(
        std::fs::read(&out).unwrap(),
        sequential_packed(&empty, &tok)
    );
}

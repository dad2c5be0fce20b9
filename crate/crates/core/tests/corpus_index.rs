use corpusforge::corpus_index::{
    build_index, build_index_with_buffer, load_index, sidecar_path, verify_index, write_index,
    IndexError, IndexStatus, RawCorpus,
};
use proptest::prelude::*;

#[test]
fn spans_skip_blank_lines_and_keep_carriage_returns() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("c.jsonl");
    std::fs::write(&raw, "{\"a\":1}\r\n\n{\"b\":2}").unwrap();
    let index = build_index(&raw).unwrap();
    let corpus = RawCorpus::open(&raw, index).unwrap();
    assert_eq!(corpus.index().len(), 2);
    assert_eq!(corpus.read_document(0).unwrap(), b"{\"a\":1}\r");
    assert_eq!(corpus.read_document(1).unwrap(), b"{\"b\":2}");
    assert!(corpus.read_document(2).is_err());
}

#[test]
fn stale_sidecar_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("c.jsonl");
    std::fs::write(&raw, "{}\n").unwrap();
    let index = build_index(&raw).unwrap();
    let sidecar = sidecar_path(&raw);
    write_index(&index, &sidecar).unwrap();
    std::fs::write(&raw, "{}\n{}\n").unwrap();
    let loaded = load_index(&sidecar).unwrap();
    assert_eq!(
        verify_index(&loaded, &raw).unwrap(),
        IndexStatus::Stale {
            indexed_size: 3,
            current_size: 6
        }
    );
    assert!(matches!(
        RawCorpus::open(&raw, loaded),
        Err(IndexError::Stale { .. })
    ));
}

#[test]
fn corrupt_sidecar_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.didx");
    std::fs::write(&path, b"CFIDX001 but truncated").unwrap();
    assert!(load_index(&path).is_err());
}

proptest! {
    #[test]
    fn buffer_size_does_not_change_the_index(
        lines in proptest::collection::vec("[a-z]{0,20}", 0..40),
        crlf in any::<bool>(),
        buffer in 1usize..64,
    ) {
        let dir = tempfile::tempdir().unwrap();
        let raw = dir.path().join("c.jsonl");
        let text = lines.join(if crlf { "\r\n" } else { "\n" });
        std::fs::write(&raw, &text).unwrap();
        let reference = build_index(&raw).unwrap();
        prop_assert_eq!(build_index_with_buffer(&raw, buffer).unwrap(), reference.clone());
        let expected: Vec<&str> = text.split('\n').filter(|l| !l.is_empty()).collect();
        prop_assert_eq!(reference.len(), expected.len());
        let corpus = RawCorpus::open(&raw, reference).unwrap();
        for (i, line) in expected.iter().enumerate() {
            prop_assert_eq!(corpus.read_document(i as u64).unwrap(), line.as_bytes());
        }
    }
}

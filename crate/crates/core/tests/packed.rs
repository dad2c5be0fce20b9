use corpusforge::packed::{
    chunk, load_permutation, make_permutation, materialize_chunk, write_permutation, PackedError,
    PackedReader, PackedWriter,
};
use proptest::prelude::*;

fn write_docs(path: &std::path::Path, width: u32, docs: &[Vec<u32>]) {
    let mut writer = PackedWriter::create(path, width).unwrap();
    for d in docs {
        writer.push_document(d).unwrap();
    }
    writer.finish().unwrap();
}

#[test]
fn samples_cross_document_boundaries() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.cfpk");
    write_docs(&path, 2, &[vec![1, 2, 3], vec![4, 5], vec![6, 7, 8, 9]]);
    let reader = PackedReader::open(&path).unwrap();
    assert_eq!(reader.sample_count(3), 2);
    assert_eq!(reader.get_sample(0, 3).unwrap(), vec![1, 2, 3, 4]);
    assert_eq!(reader.get_sample(1, 3).unwrap(), vec![4, 5, 6, 7]);
    assert!(matches!(
        reader.get_sample(2, 3),
        Err(PackedError::OutOfRange { .. })
    ));
}

#[test]
fn overflowing_token_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut writer = PackedWriter::create(dir.path().join("o.cfpk"), 1).unwrap();
    assert!(matches!(
        writer.push_document(&[256]),
        Err(PackedError::TokenOverflow { .. })
    ));
}

#[test]
fn truncated_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.cfpk");
    write_docs(&path, 4, &[vec![1, 2, 3]]);
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
    assert!(PackedReader::open(&path).is_err());
}

#[test]
fn shuffled_chunks_partition_the_documents() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("s.cfpk");
    let docs: Vec<Vec<u32>> = (0..10).map(|i| vec![i; 1 + i as usize]).collect();
    write_docs(&src, 1, &docs);
    let reader = PackedReader::open(&src).unwrap();
    let perm = make_permutation(reader.doc_count(), 42);
    let perm_path = dir.path().join("s.cfpk.perm");
    write_permutation(&perm, &perm_path).unwrap();
    let perm = load_permutation(&perm_path).unwrap();
    let spec = chunk(&perm, 3).unwrap();
    assert_eq!(spec.sizes(), vec![4, 3, 3]);
    let mut seen = Vec::new();
    for (i, ids) in spec.assignments.iter().enumerate() {
        let out = dir.path().join(format!("chunk{i}.cfpk"));
        materialize_chunk(&reader, ids, &out).unwrap();
        let chunk = PackedReader::open(&out).unwrap();
        for (j, &id) in ids.iter().enumerate() {
            let tokens = chunk.get_document_tokens(j as u64).unwrap();
            assert_eq!(tokens, docs[id as usize]);
            seen.push(id);
        }
    }
    seen.sort_unstable();
    assert_eq!(seen, (0..10).collect::<Vec<u64>>());
    assert!(chunk(&perm, 0).is_err());
}

proptest! {
    #[test]
    fn packed_round_trip(
        docs in proptest::collection::vec(proptest::collection::vec(0u32..65_536, 0..20), 0..30)
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.cfpk");
        write_docs(&path, 2, &docs);
        let reader = PackedReader::open(&path).unwrap();
        prop_assert_eq!(reader.doc_count(), docs.len() as u64);
        prop_assert_eq!(reader.token_count(), docs.iter().map(Vec::len).sum::<usize>() as u64);
        for (i, d) in docs.iter().enumerate() {
            prop_assert_eq!(&reader.get_document_tokens(i as u64).unwrap(), d);
        }
    }
}

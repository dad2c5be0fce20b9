use corpusforge::tokenizers::{load_tokenizer, Tokenizer, TokenizerKind, TokenizerSpec};
use proptest::prelude::*;

fn bpe_files(dir: &std::path::Path) -> TokenizerSpec {
    let vocab = dir.join("vocab.txt");
    let merges = dir.join("merges.txt");
    std::fs::write(&vocab, "a\nb\n<0x20>\nab\n ab\n").unwrap();
    std::fs::write(&merges, "a b\n<0x20> ab\n").unwrap();
    TokenizerSpec {
        kind: TokenizerKind::Bpe,
        vocab_path: Some(vocab),
        merges_path: Some(merges),
        eod_token_id: None,
        unk_token_id: None,
    }
}

#[test]
fn bpe_from_files_with_byte_escapes() {
    let dir = tempfile::tempdir().unwrap();
    let tok = load_tokenizer(&bpe_files(dir.path())).unwrap();
    // Five pieces plus the implicit unknown piece.
    assert_eq!(tok.vocab_size(), 6);
    assert_eq!(tok.encode("ab ab"), vec![3, 4]);
    assert_eq!(tok.encode("abc"), vec![3, 5]);
    assert_eq!(tok.decode(&[3, 4]).unwrap(), "ab ab");
}

#[test]
fn missing_files_are_reported() {
    let spec = TokenizerSpec {
        vocab_path: Some("/nonexistent/vocab.txt".into()),
        ..TokenizerSpec::byte(None)
    };
    let spec = TokenizerSpec {
        kind: TokenizerKind::Whitespace,
        ..spec
    };
    assert!(load_tokenizer(&spec).is_err());
    let spec = TokenizerSpec {
        kind: TokenizerKind::Bpe,
        ..TokenizerSpec::byte(None)
    };
    assert!(load_tokenizer(&spec).is_err());
}

#[test]
fn whitespace_maps_unknown_words() {
    let pieces = vec![b"hello".to_vec(), b"world".to_vec()];
    let tok = Tokenizer::whitespace(pieces, None, None).unwrap();
    assert_eq!(tok.encode("hello  world\tmoon"), vec![0, 1, 2]);
}

#[test]
fn eod_outside_vocab_widens_tokens() {
    let tok = Tokenizer::byte(Some(256)).unwrap();
    assert_eq!(tok.eod_token_id(), Some(256));
    assert_eq!(tok.token_width(), 2);
    assert_eq!(Tokenizer::byte(None).unwrap().token_width(), 1);
}

proptest! {
    #[test]
    fn byte_tokenizer_round_trips(text in "\\PC{0,64}") {
        let tok = Tokenizer::byte(None).unwrap();
        let ids = tok.encode(&text);
        prop_assert_eq!(ids.len(), text.len());
        prop_assert_eq!(tok.decode(&ids).unwrap(), text);
    }

    #[test]
    fn bpe_without_unknowns_round_trips(text in "[ab ]{0,64}") {
        let dir = tempfile::tempdir().unwrap();
        let tok = load_tokenizer(&bpe_files(dir.path())).unwrap();
        prop_assert_eq!(tok.decode(&tok.encode(&text)).unwrap(), text);
    }
}

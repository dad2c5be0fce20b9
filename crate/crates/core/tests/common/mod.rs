//! Single-threaded, queue-free reference for the tokenization pipeline.

use std::path::Path;

use corpusforge::tokenizers::Tokenizer;

/// Parse every line with a full JSON parser, encode the `text` field and lay
/// out the packed file byte by byte.
pub fn sequential_packed(raw: &Path, tok: &Tokenizer) -> Vec<u8> {
    let bytes = std::fs::read(raw).unwrap();
    let width = tok.token_width() as usize;
    let eod = tok.eod_token_id().unwrap();
    let mut payload = Vec::new();
    let mut spans = Vec::new();
    let mut token_count = 0u64;
    for line in bytes.split(|&b| b == b'\n').filter(|l| !l.is_empty()) {
        let Ok(serde_json::Value::Object(obj)) = serde_json::from_slice::<serde_json::Value>(line)
        else {
            continue;
        };
        let Some(serde_json::Value::String(s)) = obj.get("text") else {
            continue;
        };
        let mut ids = tok.encode(s);
        if ids.is_empty() {
            continue;
        }
        ids.push(eod);
        for id in &ids {
            payload.extend_from_slice(&id.to_le_bytes()[..width]);
        }
        spans.push((token_count, ids.len() as u64));
        token_count += ids.len() as u64;
    }
    let mut out = b"CFPKD001".to_vec();
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&(width as u32).to_le_bytes());
    out.extend_from_slice(&token_count.to_le_bytes());
    out.extend_from_slice(&(spans.len() as u64).to_le_bytes());
    out.extend_from_slice(&(40 + payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    for (start, len) in spans {
        out.extend_from_slice(&start.to_le_bytes());
        out.extend_from_slice(&len.to_le_bytes());
    }
    out
}

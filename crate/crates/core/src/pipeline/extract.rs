use std::borrow::Cow;
use std::collections::HashMap;

use serde_json::value::RawValue;

pub const DEFAULT_TEXT_KEY: &str = "text";

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    /// Not a JSON object.
    Malformed,
    /// The object has no text key.
    MissingKey,
    /// The text key holds something other than a string.
    NotString,
    /// The text encodes to zero tokens.
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extracted {
    Text(String),
    Skip(SkipReason),
}

/// Pull the string under `key` out of one JSONL document. Only the top-level
/// object is parsed eagerly; other fields stay as raw slices.
pub fn extract_text(raw: &[u8], key: &str) -> Extracted {
    let Ok(fields) = serde_json::from_slice::<HashMap<Cow<'_, str>, &RawValue>>(raw) else {
        return Extracted::Skip(SkipReason::Malformed);
    };
    let Some(value) = fields.get(key) else {
        return Extracted::Skip(SkipReason::MissingKey);
    };
    match serde_json::from_str::<String>(value.get()) {
        Ok(text) => Extracted::Text(text),
        Err(_) => Extracted::Skip(SkipReason::NotString),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_field() {
        assert_eq!(
            extract_text(br#"{"text":"hi"}"#, "text"),
            Extracted::Text("hi".into())
        );
        assert_eq!(
            extract_text(
                r#"{"id": 3, "meta": {"a": [1]}, "text": "café \"q\""}"#.as_bytes(),
                "text"
            ),
            Extracted::Text("café \"q\"".into())
        );
        assert_eq!(
            extract_text(br#"{"body":"x"}"#, "body"),
            Extracted::Text("x".into())
        );
    }

    #[test]
    fn skips() {
        assert_eq!(
            extract_text(br#"{"other":1}"#, "text"),
            Extracted::Skip(SkipReason::MissingKey)
        );
        assert_eq!(
            extract_text(b"not json", "text"),
            Extracted::Skip(SkipReason::Malformed)
        );
        assert_eq!(
            extract_text(b"[1,2]", "text"),
            Extracted::Skip(SkipReason::Malformed)
        );
        assert_eq!(
            extract_text(br#"{"text":"a"} trailing"#, "text"),
            Extracted::Skip(SkipReason::Malformed)
        );
        assert_eq!(
            extract_text(br#"{"text":5}"#, "text"),
            Extracted::Skip(SkipReason::NotString)
        );
        assert_eq!(
            extract_text(br#"{"text":null}"#, "text"),
            Extracted::Skip(SkipReason::NotString)
        );
    }

    #[test]
    fn crlf_line_still_parses() {
        assert_eq!(
            extract_text(b"{\"text\":\"a\"}\r", "text"),
            Extracted::Text("a".into())
        );
    }
}

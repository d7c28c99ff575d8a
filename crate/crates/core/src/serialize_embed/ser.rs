//! Tuple-to-text serialization:
//! `[CLS] h1 v1 [SEP] h2 v2 [SEP] ... hn vn [SEP]`, nulls omitted.

use crate::error::{Error, Result};
use crate::lake_model::{Cell, TupleRef};

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

#[derive(Debug, Clone, PartialEq)]
pub struct SerializedTuple {
    pub source: TupleRef,
    pub text: String,
    /// Unescaped `(header, value)` segments in schema order.
    pub segments: Vec<(String, String)>,
}

impl SerializedTuple {
    /// True when every cell was null and the text is just `[CLS] [SEP]`.
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

/// Escapes backslashes, line breaks and the two marker literals so the text
/// stays on one line and parses unambiguously.
pub fn escape(value: &str) -> String {
    value
        .replace('\\', "\\\\")
        .replace('\n', "\\n")
        .replace('\r', "\\r")
        .replace(CLS, "\\[CLS]")
        .replace(SEP, "\\[SEP]")
}

pub fn unescape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

pub fn serialize_tuple(source: TupleRef, cells: &[Cell], headers: &[String]) -> SerializedTuple {
    assert_eq!(cells.len(), headers.len(), "tuple width must match schema");
    let segments: Vec<(String, String)> = headers
        .iter()
        .zip(cells)
        .filter_map(|(h, c)| c.as_ref().map(|v| (h.clone(), v.clone())))
        .collect();
    let mut text = String::from(CLS);
    for (i, (h, v)) in segments.iter().enumerate() {
        if i > 0 {
            text.push(' ');
            text.push_str(SEP);
        }
        text.push(' ');
        text.push_str(&escape(h));
        text.push(' ');
        text.push_str(&escape(v));
    }
    text.push(' ');
    text.push_str(SEP);
    if segments.is_empty() {
        log::warn!("tuple {source} has no non-null cells");
    }
    SerializedTuple {
        source,
        text,
        segments,
    }
}

/// Recovers `(header, value)` segments from serialized text. Headers are
/// matched in schema order, so the schema must be the one used to serialize.
pub fn parse_serialized(text: &str, headers: &[String]) -> Result<Vec<(String, String)>> {
    let malformed = |why: &str| Error::Malformed(format!("{why}: {text:?}"));
    let body = text
        .strip_prefix(CLS)
        .ok_or_else(|| malformed("missing [CLS]"))?;
    let body = body
        .strip_suffix(SEP)
        .ok_or_else(|| malformed("missing trailing [SEP]"))?;
    let body = body
        .strip_suffix(' ')
        .ok_or_else(|| malformed("missing space before [SEP]"))?;
    if body.is_empty() {
        return Ok(Vec::new());
    }
    let body = body
        .strip_prefix(' ')
        .ok_or_else(|| malformed("missing space after [CLS]"))?;
    let sep = format!(" {SEP} ");
    let mut next_header = 0usize;
    let mut out = Vec::new();
    for seg in split_unescaped(body, &sep) {
        let found = headers[next_header..].iter().position(|h| {
            let h = escape(h);
            seg.len() > h.len() && seg.starts_with(&h) && seg.as_bytes()[h.len()] == b' '
        });
        let pos = found.ok_or_else(|| malformed("segment matches no remaining header"))?;
        let h = &headers[next_header + pos];
        let value = &seg[escape(h).len() + 1..];
        out.push((h.clone(), unescape(value)));
        next_header += pos + 1;
    }
    Ok(out)
}

/// Splits on `sep` occurrences whose `[` is not backslash-escaped.
fn split_unescaped<'a>(s: &'a str, sep: &str) -> Vec<&'a str> {
    let mut parts = Vec::new();
    let mut start = 0;
    let mut i = 0;
    let bytes = s.as_bytes();
    while i < bytes.len() {
        if bytes[i] == b'\\' {
            i += 2;
            continue;
        }
        if bytes[i..].starts_with(sep.as_bytes()) {
            parts.push(&s[start..i]);
            i += sep.len();
            start = i;
            continue;
        }
        i += 1;
    }
    parts.push(&s[start..]);
    parts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn headers() -> Vec<String> {
        ["Park Name", "Supervisor", "City", "Country"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    fn cells(v: &[Option<&str>]) -> Vec<Cell> {
        v.iter().map(|c| c.map(str::to_string)).collect()
    }

    #[test]
    fn query_tuple_golden() {
        let t = serialize_tuple(
            TupleRef::new("a", 0),
            &cells(&[Some("River Park"), Some("Vera Onate"), Some("Fresno"), Some("USA")]),
            &headers(),
        );
        assert_eq!(
            t.text,
            "[CLS] Park Name River Park [SEP] Supervisor Vera Onate [SEP] City Fresno [SEP] Country USA [SEP]"
        );
    }

    #[test]
    fn null_slot_is_skipped() {
        let t = serialize_tuple(
            TupleRef::new("d", 0),
            &cells(&[Some("Chippewa Park"), None, Some("Brandon, MN"), Some("USA")]),
            &headers(),
        );
        assert_eq!(
            t.text,
            "[CLS] Park Name Chippewa Park [SEP] City Brandon, MN [SEP] Country USA [SEP]"
        );
    }

    #[test]
    fn all_null_tuple() {
        let t = serialize_tuple(TupleRef::new("d", 0), &cells(&[None, None, None, None]), &headers());
        assert_eq!(t.text, "[CLS] [SEP]");
        assert!(t.is_empty());
        assert!(parse_serialized(&t.text, &headers()).unwrap().is_empty());
    }

    #[test]
    fn marker_literals_are_escaped() {
        let t = serialize_tuple(
            TupleRef::new("x", 0),
            &cells(&[Some("a [SEP] b"), None, None, Some("c\\d")]),
            &headers(),
        );
        assert_eq!(t.text.matches(SEP).count(), t.text.matches("\\[SEP]").count() + 2);
        let back = parse_serialized(&t.text, &headers()).unwrap();
        assert_eq!(back[0].1, "a [SEP] b");
        assert_eq!(back[1].1, "c\\d");
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_serialized("hello", &headers()).is_err());
        assert!(parse_serialized("[CLS] Nope x [SEP]", &headers()).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(values in proptest::collection::vec(
            proptest::option::of("[A-Za-z0-9,.' -]{0,12}[A-Za-z0-9]"), 4)) {
            let cells: Vec<Cell> = values.clone();
            let t = serialize_tuple(TupleRef::new("t", 0), &cells, &headers());
            let back = parse_serialized(&t.text, &headers()).unwrap();
            let expected: Vec<(String, String)> = headers()
                .into_iter()
                .zip(values)
                .filter_map(|(h, v)| v.map(|v| (h, v)))
                .collect();
            prop_assert!(t.text.starts_with(CLS));
            prop_assert!(t.text.ends_with(SEP));
            prop_assert_eq!(back, expected);
        }
    }
}

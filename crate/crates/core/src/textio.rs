//! Line-oriented text format shared by codebook and channel files.
//!
//! ```text
//! # comment
//! dim=2 size=2
//! 0.7071067811865476+0j 0.7071067811865476+0j
//! 0.7071067811865476+0j -0.7071067811865476-0j
//! ```
//!
//! One record per line, entries written as `re+imj` and separated by
//! whitespace. Floats use Rust's shortest round-trip formatting, so a
//! written file reloads bit-exactly.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::C64;

pub fn format_complex(z: C64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:?}{}{:?}j", z.re, sign, z.im.abs())
}

pub fn parse_complex(token: &str) -> Option<C64> {
    let body = token.strip_suffix('j').or_else(|| token.strip_suffix('i'))?;
    let bytes = body.as_bytes();
    let mut split = None;
    for i in 1..bytes.len() {
        if (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E') {
            split = Some(i);
        }
    }
    let split = split?;
    let re: f64 = body[..split].parse().ok()?;
    let im: f64 = body[split..].trim_start_matches('+').parse().ok()?;
    if !re.is_finite() || !im.is_finite() {
        return None;
    }
    Some(C64::new(re, im))
}

pub struct Record {
    pub line: usize,
    pub entries: Vec<C64>,
}

pub struct Document {
    pub header: BTreeMap<String, usize>,
    pub header_line: usize,
    pub records: Vec<Record>,
}

fn err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

/// Parses a document whose header must contain exactly `keys`.
pub fn parse(path: &Path, text: &str, keys: &[&str]) -> Result<Document> {
    let mut header: Option<(BTreeMap<String, usize>, usize)> = None;
    let mut records = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        match header {
            None => {
                let mut map = BTreeMap::new();
                for field in content.split_whitespace() {
                    let (k, v) = field
                        .split_once('=')
                        .ok_or_else(|| err(path, line, format!("expected key=value header field, got `{field}`")))?;
                    if !keys.contains(&k) {
                        return Err(err(path, line, format!("unknown header field `{k}`")));
                    }
                    let v: usize =
                        v.parse().map_err(|_| err(path, line, format!("header field `{k}` is not an integer")))?;
                    map.insert(k.to_string(), v);
                }
                for k in keys {
                    if !map.contains_key(*k) {
                        return Err(err(path, line, format!("missing header field `{k}`")));
                    }
                }
                header = Some((map, line));
            }
            Some((ref map, _)) => {
                let dim = map["dim"];
                let entries = content
                    .split_whitespace()
                    .enumerate()
                    .map(|(field, tok)| {
                        parse_complex(tok).ok_or_else(|| {
                            err(path, line, format!("field {}: `{tok}` is not a complex number re+imj", field + 1))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                if entries.len() != dim {
                    return Err(err(path, line, format!("expected {dim} entries, found {}", entries.len())));
                }
                records.push(Record { line, entries });
            }
        }
    }
    let (header, header_line) = header.ok_or_else(|| err(path, 1, "missing header line"))?;
    if header["dim"] == 0 {
        return Err(err(path, header_line, "dim must be positive"));
    }
    if records.len() != header["size"] {
        return Err(err(
            path,
            header_line,
            format!("header declares size={} but file holds {} records", header["size"], records.len()),
        ));
    }
    Ok(Document { header, header_line, records })
}

pub fn write_records<'a>(
    header: &[(&str, usize)],
    comment: Option<&str>,
    rows: impl Iterator<Item = &'a [C64]>,
) -> String {
    let mut out = String::new();
    if let Some(c) = comment {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    let fields: Vec<String> = header.iter().map(|(k, v)| format!("{k}={v}")).collect();
    out.push_str(&fields.join(" "));
    out.push('\n');
    for row in rows {
        let toks: Vec<String> = row.iter().map(|&z| format_complex(z)).collect();
        out.push_str(&toks.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_plain_and_exponent_forms() {
        assert_eq!(parse_complex("1+0j"), Some(C64::new(1.0, 0.0)));
        assert_eq!(parse_complex("-0.5-2j"), Some(C64::new(-0.5, -2.0)));
        assert_eq!(parse_complex("1e-16+2.5e-3j"), Some(C64::new(1e-16, 2.5e-3)));
        assert_eq!(parse_complex("-1E+2-3e-4j"), Some(C64::new(-100.0, -3e-4)));
        assert_eq!(parse_complex("1.0"), None);
        assert_eq!(parse_complex("abc+1j"), None);
        assert_eq!(parse_complex("inf+0j"), None);
    }

    proptest! {
        #[test]
        fn complex_text_round_trip_is_bit_exact(re in proptest::num::f64::NORMAL | proptest::num::f64::ZERO,
                                                im in proptest::num::f64::NORMAL | proptest::num::f64::ZERO) {
            let z = C64::new(re, im);
            let back = parse_complex(&format_complex(z)).unwrap();
            prop_assert_eq!(back.re.to_bits(), z.re.to_bits());
            prop_assert_eq!(back.im.to_bits(), z.im.to_bits());
        }
    }
}

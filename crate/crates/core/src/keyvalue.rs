//! Plain-text `key = value` files: one pair per line, `#` comments and
//! blank lines ignored.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyValueError {
    #[error("line {line}: expected `key = value`")]
    Malformed { line: usize },
    #[error("line {line}: duplicate key {key}")]
    Duplicate { line: usize, key: String },
}

/// Returns `(line number, key, value)` triples in file order.
pub(crate) fn parse(text: &str) -> Result<Vec<(usize, String, String)>, KeyValueError> {
    let mut out: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(KeyValueError::Malformed { line: i + 1 })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(KeyValueError::Malformed { line: i + 1 });
        }
        if out.iter().any(|(_, k, _)| k == key) {
            return Err(KeyValueError::Duplicate {
                line: i + 1,
                key: key.to_string(),
            });
        }
        out.push((i + 1, key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_skips_comments() {
        let kv = parse("# header\n\na = 1\n b=two words \n").unwrap();
        assert_eq!(
            kv,
            vec![
                (3, "a".to_string(), "1".to_string()),
                (4, "b".to_string(), "two words".to_string())
            ]
        );
        assert_eq!(parse("novalue"), Err(KeyValueError::Malformed { line: 1 }));
        assert!(matches!(
            parse("a=1\na=2"),
            Err(KeyValueError::Duplicate { line: 2, .. })
        ));
    }
}

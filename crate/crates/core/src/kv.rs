//! Flat `key = value` text files: one entry per line, `#` starts a comment.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry<'a> {
    pub key: &'a str,
    pub value: &'a str,
    pub line: usize,
}

pub fn parse(text: &str) -> Result<Vec<Entry<'_>>> {
    let mut out: Vec<Entry<'_>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| Error::Parse {
            line,
            msg: format!("expected `key = value`, got {body:?}"),
        })?;
        let (key, value) = (k.trim(), v.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::Parse {
                line,
                msg: "empty key or value".into(),
            });
        }
        if out.iter().any(|e| e.key == key) {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate key {key:?}"),
            });
        }
        out.push(Entry { key, value, line });
    }
    Ok(out)
}

impl Entry<'_> {
    pub fn f64(&self) -> Result<f64> {
        crate::weather::parse_number(self.value, self.line, self.key)
    }

    pub fn bool(&self) -> Result<bool> {
        match self.value {
            "true" | "1" => Ok(true),
            "false" | "0" => Ok(false),
            other => Err(Error::Parse {
                line: self.line,
                msg: format!("{}: expected true/false, got {other:?}", self.key),
            }),
        }
    }

    pub fn unknown(&self) -> Error {
        Error::Parse {
            line: self.line,
            msg: format!("unknown key {:?}", self.key),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blanks() {
        let e = parse("# header\n\na = 1  # trailing\n b=2.5\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!((e[0].key, e[0].value, e[0].line), ("a", "1", 3));
        assert_eq!(e[1].f64().unwrap(), 2.5);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse("novalue\n").is_err());
        assert!(parse("a = 1\na = 2\n").is_err());
        assert!(parse("a =\n").is_err());
    }
}

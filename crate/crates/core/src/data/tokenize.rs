use serde::{Deserialize, Serialize};

/// Token sequence of one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub origin_id: String,
    pub tokens: Vec<String>,
}

impl TokenStream {
    pub fn new(origin_id: impl Into<String>, tokens: Vec<String>) -> Self {
        Self { origin_id: origin_id.into(), tokens }
    }

    pub fn from_source(origin_id: impl Into<String>, source: &str) -> Self {
        Self::new(origin_id, tokenize(source))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "**=", "...", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=",
    "%=", "|=", "&=", "^=", "<<", ">>", "=>", "->", "**", ":=",
];

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

/// Splits source into identifiers, numerals, string literals, operators and
/// single punctuation characters. Whitespace is dropped.
pub fn tokenize(src: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = src.char_indices().peekable();
    while let Some(&(i, c)) = it.peek() {
        if c.is_whitespace() {
            it.next();
            continue;
        }
        let rest = &src[i..];
        let end = if c.is_ascii_digit() {
            let len = rest
                .char_indices()
                .find(|&(j, ch)| {
                    !(ch.is_ascii_alphanumeric() || ch == '_' || (ch == '.' && rest[j + 1..].starts_with(|d: char| d.is_ascii_digit())))
                })
                .map_or(rest.len(), |(j, _)| j);
            i + len
        } else if is_ident_char(c) {
            i + rest.find(|ch: char| !is_ident_char(ch)).unwrap_or(rest.len())
        } else if c == '"' || c == '\'' {
            let mut escaped = false;
            let close = rest
                .char_indices()
                .skip(1)
                .find(|&(_, ch)| {
                    let hit = !escaped && ch == c;
                    escaped = !escaped && ch == '\\';
                    hit || ch == '\n'
                })
                .map_or(rest.len(), |(j, ch)| j + ch.len_utf8());
            i + close
        } else if let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(**op)) {
            i + op.len()
        } else {
            i + c.len_utf8()
        };
        out.push(src[i..end].to_string());
        while it.peek().is_some_and(|&(j, _)| j < end) {
            it.next();
        }
    }
    out
}

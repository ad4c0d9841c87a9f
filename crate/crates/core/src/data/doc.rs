use std::sync::LazyLock;

use regex::Regex;

pub const DEFAULT_BOILERPLATE: &[&str] = &[
    "spdx-license-identifier",
    "auto-generated",
    "do not edit",
    "todo",
    "fixme",
    "openzeppelin contracts",
    "see {",
];

static ESCAPES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"\\(?:u[0-9a-fA-F]{4}|x[0-9a-fA-F]{2}|[nrtbfv0'"\\])"#).unwrap());
static DELIMS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)/\*\*+|\*+/|/\*|^\s*///?|^\s*\*+").unwrap());
static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@([A-Za-z]+(?::[A-Za-z0-9_-]+)?)").unwrap());

/// Documentation cleaner with a configurable boilerplate phrase list.
#[derive(Debug, Clone)]
pub struct DocCleaner {
    pub boilerplate: Vec<String>,
}

impl Default for DocCleaner {
    fn default() -> Self {
        Self { boilerplate: DEFAULT_BOILERPLATE.iter().map(|s| s.to_string()).collect() }
    }
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl DocCleaner {
    pub fn with_boilerplate<I: IntoIterator<Item = S>, S: Into<String>>(phrases: I) -> Self {
        Self { boilerplate: phrases.into_iter().map(Into::into).collect() }
    }

    /// One output line per NatSpec section; `@param`/`@return` become
    /// `name: description`, other tag markers are dropped.
    pub fn clean(&self, raw: &str) -> String {
        let text = ESCAPES.replace_all(raw, " ");
        let text = DELIMS.replace_all(&text, " ");
        let mut sections: Vec<String> = Vec::new();
        let mut last = 0;
        let mut current_tag: Option<String> = None;
        for m in TAG.captures_iter(&text) {
            let whole = m.get(0).unwrap();
            let preceded_ok = whole.start() == 0 || text[..whole.start()].ends_with(char::is_whitespace);
            if !preceded_ok {
                continue;
            }
            self.push_section(&mut sections, current_tag.as_deref(), &text[last..whole.start()]);
            current_tag = Some(m[1].to_ascii_lowercase());
            last = whole.end();
        }
        self.push_section(&mut sections, current_tag.as_deref(), &text[last..]);
        sections.join("\n")
    }

    fn push_section(&self, out: &mut Vec<String>, tag: Option<&str>, body: &str) {
        let body = collapse(body);
        let line = match tag {
            Some("author") | Some("inheritdoc") => return,
            Some("param") => match body.split_once(' ') {
                Some((name, desc)) => format!("{name}: {desc}"),
                None => body,
            },
            Some("return") | Some("returns") => {
                if body.is_empty() {
                    body
                } else {
                    format!("returns: {body}")
                }
            }
            _ => body,
        };
        if line.is_empty() {
            return;
        }
        let lower = line.to_lowercase();
        if self.boilerplate.iter().any(|p| lower.contains(&p.to_lowercase())) {
            return;
        }
        out.push(line);
    }
}

pub fn clean_doc(raw: &str) -> String {
    DocCleaner::default().clean(raw)
}

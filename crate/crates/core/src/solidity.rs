//! Lightweight lexical view of Solidity source.
//!
//! No AST. Comments and string contents are blanked out (byte offsets and
//! line numbers preserved) and contracts, functions, modifiers and state
//! variables are segmented by brace matching. Everything downstream works on
//! byte offsets into the original text.

use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;

/// Replaces comments, and the contents of string literals, with spaces.
/// Newlines are kept so line numbers survive.
pub fn mask(src: &str) -> String {
    mask_impl(src, true)
}

/// Like [`mask`] but leaves string literals intact.
pub fn mask_comments(src: &str) -> String {
    mask_impl(src, false)
}

fn mask_impl(src: &str, strings: bool) -> String {
    #[derive(Clone, Copy, PartialEq)]
    enum St {
        Code,
        Line,
        Block,
        Str(u8),
    }
    let b = src.as_bytes();
    let mut out = b.to_vec();
    let mut st = St::Code;
    let mut i = 0;
    let blank = |out: &mut Vec<u8>, j: usize| {
        if out[j] != b'\n' {
            out[j] = b' ';
        }
    };
    while i < b.len() {
        match st {
            St::Code => match b[i] {
                b'/' if b.get(i + 1) == Some(&b'/') => {
                    st = St::Line;
                    blank(&mut out, i);
                    blank(&mut out, i + 1);
                    i += 2;
                    continue;
                }
                b'/' if b.get(i + 1) == Some(&b'*') => {
                    st = St::Block;
                    blank(&mut out, i);
                    blank(&mut out, i + 1);
                    i += 2;
                    continue;
                }
                q @ (b'"' | b'\'') => st = St::Str(q),
                _ => {}
            },
            St::Line => {
                if b[i] == b'\n' {
                    st = St::Code;
                } else {
                    blank(&mut out, i);
                }
            }
            St::Block => {
                if b[i] == b'*' && b.get(i + 1) == Some(&b'/') {
                    blank(&mut out, i);
                    blank(&mut out, i + 1);
                    st = St::Code;
                    i += 2;
                    continue;
                }
                blank(&mut out, i);
            }
            St::Str(q) => {
                if b[i] == b'\\' {
                    if strings {
                        blank(&mut out, i);
                        if i + 1 < b.len() {
                            blank(&mut out, i + 1);
                        }
                    }
                    i += 2;
                    continue;
                }
                if b[i] == q || b[i] == b'\n' {
                    st = St::Code;
                } else if strings {
                    blank(&mut out, i);
                }
            }
        }
        i += 1;
    }
    // Only whole characters were replaced by ASCII spaces.
    String::from_utf8(out).expect("masking preserves utf-8")
}

/// Maps byte offsets to 1-based line numbers.
#[derive(Debug, Clone)]
pub struct LineIndex {
    starts: Vec<usize>,
}

impl LineIndex {
    pub fn new(src: &str) -> Self {
        let mut starts = vec![0];
        starts.extend(src.match_indices('\n').map(|(i, _)| i + 1));
        Self { starts }
    }

    pub fn line_of(&self, offset: usize) -> usize {
        match self.starts.binary_search(&offset) {
            Ok(i) => i + 1,
            Err(i) => i,
        }
    }

    pub fn line_count(&self) -> usize {
        self.starts.len()
    }
}

/// Given the offset of an opening `(`, `[` or `{`, returns the offset of the
/// matching closer. Works on masked text.
pub fn matching_close(masked: &str, open: usize) -> Option<usize> {
    let b = masked.as_bytes();
    let (o, c) = match b.get(open)? {
        b'(' => (b'(', b')'),
        b'[' => (b'[', b']'),
        b'{' => (b'{', b'}'),
        _ => return None,
    };
    let mut depth = 0usize;
    for (i, &ch) in b.iter().enumerate().skip(open) {
        if ch == o {
            depth += 1;
        } else if ch == c {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

pub fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$'
}

pub fn is_identifier(s: &str) -> bool {
    let b = s.as_bytes();
    !b.is_empty() && !b[0].is_ascii_digit() && b.iter().all(|&c| is_ident_byte(c))
}

/// Finds whole-word occurrences of `word` in `hay` (byte offsets).
pub fn word_positions<'a>(hay: &'a str, word: &'a str) -> impl Iterator<Item = usize> + 'a {
    let b = hay.as_bytes();
    hay.match_indices(word).map(|(i, _)| i).filter(move |&i| {
        let before_ok = i == 0 || !is_ident_byte(b[i - 1]);
        let end = i + word.len();
        let after_ok = end >= b.len() || !is_ident_byte(b[end]);
        before_ok && after_ok
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContractKind {
    Contract,
    Library,
    Interface,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visibility {
    Public,
    External,
    Internal,
    Private,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionKind {
    Function,
    Constructor,
    Fallback,
    Receive,
    Modifier,
}

#[derive(Debug, Clone)]
pub struct FunctionDef {
    pub kind: FunctionKind,
    pub name: String,
    /// Offset of the introducing keyword.
    pub start: usize,
    /// Masked parameter list text, without the parentheses.
    pub params: String,
    /// Masked attribute text between the parameter list and the body.
    pub attributes: String,
    pub visibility: Option<Visibility>,
    pub is_view_or_pure: bool,
    pub modifiers: Vec<String>,
    /// Contents between the body braces (exclusive), if a body exists.
    pub body: Option<Range<usize>>,
    /// Offset one past the closing brace (or semicolon).
    pub end: usize,
}

#[derive(Debug, Clone)]
pub struct StateVar {
    pub name: String,
    pub type_text: String,
    pub is_mapping: bool,
    pub is_array: bool,
    pub is_dynamic_array: bool,
    pub is_constant: bool,
    pub is_integer: bool,
    pub offset: usize,
}

#[derive(Debug, Clone)]
pub struct ContractDef {
    pub kind: ContractKind,
    pub name: String,
    pub start: usize,
    /// Range strictly inside the body braces.
    pub body: Range<usize>,
    pub functions: Vec<FunctionDef>,
    pub state_vars: Vec<StateVar>,
    pub type_names: Vec<String>,
    pub uses_safemath: bool,
}

impl ContractDef {
    /// Offset of the closing brace.
    pub fn close_brace(&self) -> usize {
        self.body.end
    }

    pub fn state_var(&self, name: &str) -> Option<&StateVar> {
        self.state_vars.iter().find(|v| v.name == name)
    }
}

/// A segmented source file.
#[derive(Debug, Clone)]
pub struct SourceUnit {
    pub original: String,
    pub masked: String,
    pub lines: LineIndex,
    pub contracts: Vec<ContractDef>,
}

static CONTRACT_HEAD: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(?:abstract\s+)?(contract|library|interface)\s+([A-Za-z_$][A-Za-z0-9_$]*)")
        .unwrap()
});

const TYPE_KEYWORDS: &[&str] = &[
    "public", "private", "internal", "constant", "immutable", "override", "transient",
];

impl SourceUnit {
    pub fn parse(src: &str) -> Self {
        let masked = mask(src);
        let mut contracts = Vec::new();
        let mut search_from = 0;
        while let Some(m) = CONTRACT_HEAD.captures_at(&masked, search_from) {
            let whole = m.get(0).unwrap();
            let open = match masked[whole.end()..].find(['{', ';']) {
                Some(rel) if masked.as_bytes()[whole.end() + rel] == b'{' => whole.end() + rel,
                Some(rel) => {
                    search_from = whole.end() + rel + 1;
                    continue;
                }
                None => break,
            };
            let Some(close) = matching_close(&masked, open) else {
                break;
            };
            let kind = match &m[1] {
                "library" => ContractKind::Library,
                "interface" => ContractKind::Interface,
                _ => ContractKind::Contract,
            };
            let mut def = ContractDef {
                kind,
                name: m[2].to_string(),
                start: whole.start(),
                body: open + 1..close,
                functions: Vec::new(),
                state_vars: Vec::new(),
                type_names: Vec::new(),
                uses_safemath: false,
            };
            parse_members(&masked, &mut def);
            contracts.push(def);
            search_from = close + 1;
        }
        Self { original: src.to_string(), masked, lines: LineIndex::new(src), contracts }
    }

    pub fn line_of(&self, offset: usize) -> usize {
        self.lines.line_of(offset)
    }

    /// Trimmed original text for a byte range, widened to char boundaries.
    pub fn excerpt(&self, range: Range<usize>) -> String {
        let mut s = range.start.min(self.original.len());
        let mut e = range.end.min(self.original.len()).max(s);
        while !self.original.is_char_boundary(s) {
            s -= 1;
        }
        while !self.original.is_char_boundary(e) {
            e += 1;
        }
        self.original[s..e].trim().to_string()
    }

    /// All functions and modifiers of all contracts, with their owner.
    pub fn functions(&self) -> impl Iterator<Item = (&ContractDef, &FunctionDef)> {
        self.contracts.iter().flat_map(|c| c.functions.iter().map(move |f| (c, f)))
    }
}

fn skip_ws(b: &[u8], mut i: usize, end: usize) -> usize {
    while i < end && b[i].is_ascii_whitespace() {
        i += 1;
    }
    i
}

fn read_ident(b: &[u8], i: usize, end: usize) -> (usize, usize) {
    let mut j = i;
    while j < end && is_ident_byte(b[j]) {
        j += 1;
    }
    (i, j)
}

/// Next `;` or `{...}` at nesting depth zero, whichever terminates first.
/// Returns `(terminator offset, is_brace)`.
fn next_terminator(masked: &str, from: usize, end: usize) -> (usize, bool) {
    let b = masked.as_bytes();
    let mut depth = 0i32;
    let mut i = from;
    while i < end {
        match b[i] {
            b'(' | b'[' => depth += 1,
            b')' | b']' => depth -= 1,
            b'{' if depth <= 0 => return (i, true),
            b';' if depth <= 0 => return (i, false),
            _ => {}
        }
        i += 1;
    }
    (end, false)
}

fn parse_members(masked: &str, def: &mut ContractDef) {
    let b = masked.as_bytes();
    let end = def.body.end;
    let mut i = def.body.start;
    loop {
        i = skip_ws(b, i, end);
        if i >= end {
            break;
        }
        let (ws, we) = read_ident(b, i, end);
        let word = &masked[ws..we];
        let fkind = match word {
            "function" => Some(FunctionKind::Function),
            "constructor" => Some(FunctionKind::Constructor),
            "fallback" => Some(FunctionKind::Fallback),
            "receive" => Some(FunctionKind::Receive),
            "modifier" => Some(FunctionKind::Modifier),
            _ => None,
        };
        let (term, is_brace) = next_terminator(masked, i, end);
        let item_end = if is_brace {
            matching_close(masked, term).map_or(end, |c| c + 1)
        } else {
            (term + 1).min(end)
        };
        if let Some(kind) = fkind {
            def.functions.push(parse_function(masked, kind, i, we, term, is_brace, item_end, &def.name));
        } else if matches!(word, "struct" | "enum") {
            let (ns, ne) = read_ident(b, skip_ws(b, we, end), end);
            def.type_names.push(masked[ns..ne].to_string());
        } else if word == "using" {
            if masked[i..term].contains("SafeMath") {
                def.uses_safemath = true;
            }
        } else if !matches!(word, "event" | "error" | "" | "pragma" | "import") && !is_brace {
            if let Some(v) = parse_state_var(masked, i, term) {
                def.state_vars.push(v);
            }
        }
        i = item_end.max(i + 1);
    }
}

#[allow(clippy::too_many_arguments)]
fn parse_function(
    masked: &str,
    mut kind: FunctionKind,
    start: usize,
    after_kw: usize,
    term: usize,
    is_brace: bool,
    item_end: usize,
    contract_name: &str,
) -> FunctionDef {
    let b = masked.as_bytes();
    let name_start = skip_ws(b, after_kw, term);
    let (ns, ne) = read_ident(b, name_start, term);
    let mut name = masked[ns..ne].to_string();
    if kind == FunctionKind::Function && name.is_empty() {
        kind = FunctionKind::Fallback;
    } else if kind == FunctionKind::Function && name == contract_name {
        kind = FunctionKind::Constructor;
    }
    if name.is_empty() {
        name = match kind {
            FunctionKind::Constructor => "constructor",
            FunctionKind::Receive => "receive",
            _ => "fallback",
        }
        .to_string();
    }
    let (params, attributes) = match masked[ne..term].find('(') {
        Some(rel) => {
            let p = ne + rel;
            let pc = matching_close(masked, p).unwrap_or(term).min(term);
            (masked[p + 1..pc.max(p + 1)].to_string(), masked[(pc + 1).min(term)..term].to_string())
        }
        None => (String::new(), masked[ne..term].to_string()),
    };
    let (visibility, is_view_or_pure, modifiers) = classify_attributes(&attributes);
    FunctionDef {
        kind,
        name,
        start,
        params,
        attributes,
        visibility,
        is_view_or_pure,
        modifiers,
        body: is_brace.then(|| term + 1..item_end.saturating_sub(1).max(term + 1)),
        end: item_end,
    }
}

fn classify_attributes(attrs: &str) -> (Option<Visibility>, bool, Vec<String>) {
    let b = attrs.as_bytes();
    let mut vis = None;
    let mut view = false;
    let mut mods = Vec::new();
    let mut i = 0;
    let mut skip_next_group = false;
    while i < b.len() {
        if b[i] == b'(' {
            let close = matching_close(attrs, i).unwrap_or(b.len() - 1);
            i = close + 1;
            continue;
        }
        if is_ident_byte(b[i]) {
            let (s, e) = read_ident(b, i, b.len());
            let w = &attrs[s..e];
            match w {
                "public" => vis = Some(Visibility::Public),
                "external" => vis = Some(Visibility::External),
                "internal" => vis = Some(Visibility::Internal),
                "private" => vis = Some(Visibility::Private),
                "view" | "pure" | "constant" => view = true,
                "payable" | "virtual" | "override" | "nonpayable" => {}
                "returns" => skip_next_group = true,
                _ if !skip_next_group && !w.as_bytes()[0].is_ascii_digit() => mods.push(w.to_string()),
                _ => {}
            }
            if w != "returns" {
                skip_next_group = false;
            }
            i = e;
            continue;
        }
        i += 1;
    }
    (vis, view, mods)
}

fn parse_state_var(masked: &str, start: usize, term: usize) -> Option<StateVar> {
    let decl = &masked[start..term];
    // Cut at the first top-level `=` that is not part of a mapping arrow.
    let bytes = decl.as_bytes();
    let mut cut = decl.len();
    let mut depth = 0;
    for (i, &c) in bytes.iter().enumerate() {
        match c {
            b'(' => depth += 1,
            b')' => depth -= 1,
            b'=' if depth == 0 && bytes.get(i + 1) != Some(&b'>') => {
                cut = i;
                break;
            }
            _ => {}
        }
    }
    let lhs = &decl[..cut];
    let trimmed = lhs.trim_end();
    let b = trimmed.as_bytes();
    let mut e = b.len();
    let mut s = e;
    while s > 0 && is_ident_byte(b[s - 1]) {
        s -= 1;
    }
    if s == e || b[s].is_ascii_digit() {
        return None;
    }
    let name = trimmed[s..e].to_string();
    e = s;
    let mut type_text = trimmed[..e].to_string();
    for kw in TYPE_KEYWORDS {
        type_text = replace_word(&type_text, kw, "");
    }
    let type_text = type_text.split_whitespace().collect::<Vec<_>>().join(" ");
    if type_text.is_empty() {
        return None;
    }
    let is_mapping = type_text.starts_with("mapping");
    let is_array = !is_mapping && type_text.contains('[');
    let is_dynamic_array = is_array && type_text.contains("[]");
    let value_type = if is_mapping {
        type_text.rsplit("=>").next().unwrap_or("").trim().trim_end_matches(')').trim()
    } else {
        type_text.as_str()
    };
    let is_integer = value_type.starts_with("uint") || value_type.starts_with("int");
    let is_constant = word_positions(lhs, "constant").next().is_some()
        || word_positions(lhs, "immutable").next().is_some();
    Some(StateVar {
        name,
        type_text: type_text.clone(),
        is_mapping,
        is_array,
        is_dynamic_array,
        is_constant,
        is_integer,
        offset: start,
    })
}

fn replace_word(s: &str, word: &str, with: &str) -> String {
    let positions: Vec<usize> = word_positions(s, word).collect();
    let mut out = String::with_capacity(s.len());
    let mut last = 0;
    for p in positions {
        out.push_str(&s[last..p]);
        out.push_str(with);
        last = p + word.len();
    }
    out.push_str(&s[last..]);
    out
}

//! Lexical rule implementations over a segmented [`SourceUnit`].

use std::collections::{HashMap, HashSet};
use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;

use super::taxonomy::{RuleId, VulnRule};
use crate::compile::SolcVersion;
use crate::solidity::{
    is_ident_byte, matching_close, word_positions, ContractDef, ContractKind, FunctionDef, FunctionKind,
    SourceUnit, Visibility,
};

/// A rule hit before it is turned into a public finding.
#[derive(Debug, Clone)]
pub(super) struct Hit {
    pub rule: RuleId,
    pub offset: usize,
    pub excerpt: Range<usize>,
    pub message: String,
}

static LOW_LEVEL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\.\s*(call|delegatecall|staticcall|send|transfer)\s*(\{|\(|\.\s*(?:value|gas)\s*\()").unwrap()
});
static CAST_CALL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b([A-Z][A-Za-z0-9_]*)\s*\(").unwrap());
static MEMBER_CALL_TAIL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*\.\s*([A-Za-z_][A-Za-z0-9_]*)\s*[({]").unwrap());
static LOCAL_DECL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b([A-Za-z_][A-Za-z0-9_]*(?:\s*\[\s*\d*\s*\])*)\s+(?:memory\s+|storage\s+|calldata\s+|payable\s+)?([A-Za-z_][A-Za-z0-9_]*)\s*(?:=[^=>]|;|,|\))").unwrap()
});
static CONDITION_HEAD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(require|assert|if|while|for)\s*\(").unwrap());
static TX_ORIGIN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\btx\s*\.\s*origin\b").unwrap());
static DELEGATECALL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bdelegatecall\b").unwrap());
static SELFDESTRUCT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(selfdestruct|suicide)\s*\(").unwrap());
static TIMESTAMP: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bblock\s*\.\s*timestamp\b|\bnow\b").unwrap());
static SAFE_MATH_CALL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\.\s*(add|sub|mul|div|mod|tryAdd|trySub|tryMul)\s*\(").unwrap());
static GUARD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(require|assert)\s*\(|\brevert\b").unwrap());
static SENDER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bmsg\s*\.\s*sender\b|\b_msgSender\s*\(").unwrap());
static CHECK_HELPER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b_?(check|only|require)[A-Z][A-Za-z0-9_]*\s*\(").unwrap());
static LOOP_HEAD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(for|while)\s*\(").unwrap());
static FIXED_SIZE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[\s*(\d+)\s*\]").unwrap());

const KEYWORDS: &[&str] = &[
    "return", "returns", "emit", "new", "delete", "if", "else", "for", "while", "do", "require", "assert",
    "revert", "memory", "storage", "calldata", "true", "false", "uint", "uint256", "int", "address",
    "bool", "bytes", "string", "length", "msg", "block", "tx", "this", "payable",
];

/// ERC-20 style getters that do not hand control to the callee in practice.
const VIEW_MEMBERS: &[&str] = &["balanceOf", "allowance", "totalSupply", "decimals", "symbol", "name"];

#[derive(Debug, Clone)]
struct ExtCall {
    offset: usize,
    value_bearing: bool,
    low_level: bool,
}

#[derive(Debug, Clone)]
struct StateWrite {
    offset: usize,
    var: String,
}

/// Everything the rules need about one function body.
struct FnScope<'a> {
    unit: &'a SourceUnit,
    contract: &'a ContractDef,
    func: &'a FunctionDef,
    body: Range<usize>,
    statements: Vec<Range<usize>>,
    conditions: Vec<Range<usize>>,
    calls: Vec<ExtCall>,
    writes: Vec<StateWrite>,
    locals: HashSet<String>,
    array_locals: HashMap<String, Option<usize>>,
}

impl<'a> FnScope<'a> {
    fn text(&self) -> &'a str {
        &self.unit.masked[self.body.clone()]
    }

    fn statement_at(&self, offset: usize) -> Range<usize> {
        self.statements
            .iter()
            .find(|s| s.start <= offset && offset < s.end)
            .cloned()
            .unwrap_or(offset..offset + 1)
    }

    fn in_condition(&self, offset: usize) -> bool {
        self.conditions.iter().any(|c| c.start <= offset && offset < c.end)
    }

    /// Checks built on tx.origin are findings themselves, never guards.
    fn relies_on_origin(&self, offset: usize) -> bool {
        TX_ORIGIN.is_match(&self.unit.masked[self.statement_at(offset)])
    }

    fn hit(&self, rule: RuleId, offset: usize, message: String) -> Hit {
        Hit { rule, offset, excerpt: self.statement_at(offset), message }
    }
}

pub(super) struct Analyzer<'a> {
    unit: &'a SourceUnit,
    version: SolcVersion,
    privileged_verbs: &'a [String],
    struct_names: HashSet<String>,
    guard_modifiers: HashMap<String, bool>,
}

impl<'a> Analyzer<'a> {
    pub fn new(unit: &'a SourceUnit, version: SolcVersion, privileged_verbs: &'a [String]) -> Self {
        let struct_names = unit.contracts.iter().flat_map(|c| c.type_names.iter().cloned()).collect();
        let guard_modifiers = unit
            .functions()
            .filter(|(_, f)| f.kind == FunctionKind::Modifier)
            .map(|(_, f)| {
                let guarded = f.body.as_ref().is_some_and(|b| GUARD.is_match(&unit.masked[b.clone()]));
                (f.name.clone(), guarded)
            })
            .collect();
        Self { unit, version, privileged_verbs, struct_names, guard_modifiers }
    }

    pub fn run(&self, rules: &[VulnRule]) -> Vec<Hit> {
        let active: HashSet<RuleId> =
            rules.iter().filter(|r| r.applies_to(self.version)).map(|r| r.id).collect();
        let mut hits = Vec::new();

        if active.contains(&RuleId::Delegatecall) {
            for m in DELEGATECALL.find_iter(&self.unit.masked) {
                hits.push(self.lexical_hit(RuleId::Delegatecall, m.start(), "delegatecall executes foreign code in this contract's storage context"));
            }
        }
        if active.contains(&RuleId::Selfdestruct) {
            for m in SELFDESTRUCT.find_iter(&self.unit.masked) {
                hits.push(self.lexical_hit(RuleId::Selfdestruct, m.start(), "selfdestruct can permanently remove the contract"));
            }
        }

        for contract in &self.unit.contracts {
            if contract.kind == ContractKind::Interface {
                continue;
            }
            for func in &contract.functions {
                if active.contains(&RuleId::Visibility) {
                    self.visibility(func, &mut hits);
                }
                let Some(scope) = self.scope(contract, func) else {
                    continue;
                };
                for &rule in &[
                    RuleId::Reentrancy,
                    RuleId::TxOrigin,
                    RuleId::UncheckedCall,
                    RuleId::Timestamp,
                    RuleId::IntegerOverflow,
                    RuleId::AccessControl,
                    RuleId::ArrayBounds,
                    RuleId::GasDos,
                    RuleId::StateValidation,
                ] {
                    if !active.contains(&rule) {
                        continue;
                    }
                    match rule {
                        RuleId::Reentrancy => reentrancy(&scope, &mut hits),
                        RuleId::TxOrigin => tx_origin(&scope, &mut hits),
                        RuleId::UncheckedCall => unchecked_call(&scope, &mut hits),
                        RuleId::Timestamp => timestamp(&scope, &mut hits),
                        RuleId::IntegerOverflow => integer_overflow(&scope, &mut hits),
                        RuleId::AccessControl => self.access_control(&scope, &mut hits),
                        RuleId::ArrayBounds => array_bounds(&scope, &mut hits),
                        RuleId::GasDos => gas_dos(&scope, &mut hits),
                        RuleId::StateValidation => self.state_validation(&scope, &mut hits),
                        _ => {}
                    }
                }
            }
        }
        hits
    }

    fn lexical_hit(&self, rule: RuleId, offset: usize, message: &str) -> Hit {
        let excerpt = self
            .unit
            .functions()
            .filter_map(|(_, f)| f.body.clone())
            .find(|b| b.start <= offset && offset < b.end)
            .map(|b| statement_ranges(&self.unit.masked, b))
            .and_then(|stmts| stmts.into_iter().find(|s| s.start <= offset && offset < s.end))
            .unwrap_or_else(|| line_range(&self.unit.original, offset));
        Hit { rule, offset, excerpt, message: message.to_string() }
    }

    fn visibility(&self, func: &FunctionDef, hits: &mut Vec<Hit>) {
        if matches!(func.kind, FunctionKind::Function | FunctionKind::Fallback) && func.visibility.is_none() {
            hits.push(Hit {
                rule: RuleId::Visibility,
                offset: func.start,
                excerpt: line_range(&self.unit.original, func.start),
                message: format!("function `{}` has no explicit visibility (defaults to public)", func.name),
            });
        }
    }

    fn is_contract_type(&self, ty: &str) -> bool {
        let ty = ty.trim();
        ty.as_bytes().first().is_some_and(u8::is_ascii_uppercase)
            && ty.bytes().all(is_ident_byte)
            && !self.struct_names.contains(ty)
    }

    fn scope(&self, contract: &'a ContractDef, func: &'a FunctionDef) -> Option<FnScope<'a>> {
        if func.kind == FunctionKind::Modifier && func.body.is_none() {
            return None;
        }
        let body = func.body.clone()?;
        let masked = &self.unit.masked;
        let text = &masked[body.clone()];

        let mut locals = HashSet::new();
        let mut array_locals = HashMap::new();
        let mut contract_vars: HashSet<String> = contract
            .state_vars
            .iter()
            .filter(|v| self.is_contract_type(&v.type_text))
            .map(|v| v.name.clone())
            .collect();
        for decl in func.params.split(',').chain(std::iter::once("")) {
            let words: Vec<&str> = decl.split_whitespace().collect();
            if words.len() >= 2 {
                let name = words[words.len() - 1].to_string();
                let ty = words[0];
                if self.is_contract_type(ty) {
                    contract_vars.insert(name.clone());
                }
                if ty.contains('[') {
                    array_locals.insert(name.clone(), fixed_size(ty));
                }
                locals.insert(name);
            }
        }
        for c in LOCAL_DECL.captures_iter(text) {
            let ty = &c[1];
            if KEYWORDS.contains(&ty) && !matches!(ty, "uint" | "uint256" | "int" | "address" | "bool" | "bytes" | "string") {
                continue;
            }
            let name = c[2].to_string();
            if KEYWORDS.contains(&name.as_str()) {
                continue;
            }
            if self.is_contract_type(ty) {
                contract_vars.insert(name.clone());
            }
            if ty.contains('[') {
                array_locals.insert(name.clone(), fixed_size(ty));
            }
            locals.insert(name);
        }

        let mut calls = Vec::new();
        for c in LOW_LEVEL.captures_iter(text) {
            let m = c.get(0).unwrap();
            let offset = body.start + m.start();
            let kind = &c[1];
            let opener = c.get(2).unwrap();
            let value_in_braces = opener.as_str() == "{"
                && matching_close(masked, body.start + opener.start())
                    .is_some_and(|close| masked[body.start + opener.start()..close].contains("value"));
            let old_value = opener.as_str().contains("value");
            let receiver_constant = matches!(kind, "transfer" | "send")
                && receiver_ident(masked, offset)
                    .and_then(|r| contract.state_var(&r))
                    .is_some_and(|v| v.is_constant);
            if receiver_constant || kind == "staticcall" {
                continue;
            }
            calls.push(ExtCall {
                offset,
                value_bearing: matches!(kind, "send" | "transfer") || value_in_braces || old_value,
                low_level: matches!(kind, "call" | "delegatecall" | "send"),
            });
        }
        for c in CAST_CALL.captures_iter(text) {
            let name = &c[1];
            if self.struct_names.contains(name) {
                continue;
            }
            let m = c.get(0).unwrap();
            let open = body.start + m.end() - 1;
            let Some(close) = matching_close(masked, open).filter(|&cl| cl < body.end) else {
                continue;
            };
            let before = masked[..body.start + m.start()].trim_end();
            if before.ends_with("emit") || before.ends_with("new") || before.ends_with('.') {
                continue;
            }
            if let Some(tail) = MEMBER_CALL_TAIL.captures(&masked[close + 1..body.end]) {
                if !VIEW_MEMBERS.contains(&&tail[1]) {
                    calls.push(ExtCall { offset: body.start + m.start(), value_bearing: true, low_level: false });
                }
            }
        }
        for var in &contract_vars {
            for p in word_positions(text, var) {
                let abs = body.start + p;
                if preceded_by_dot(masked, abs) {
                    continue;
                }
                if let Some(tail) = MEMBER_CALL_TAIL.captures(&masked[abs + var.len()..body.end]) {
                    if !VIEW_MEMBERS.contains(&&tail[1]) && !matches!(&tail[1], "call" | "delegatecall" | "staticcall" | "send" | "transfer") {
                        calls.push(ExtCall { offset: abs, value_bearing: true, low_level: false });
                    }
                }
            }
        }
        calls.sort_by_key(|c| c.offset);
        calls.dedup_by_key(|c| c.offset);

        let mut writes = Vec::new();
        for var in contract.state_vars.iter().filter(|v| !v.is_constant) {
            if locals.contains(&var.name) {
                continue;
            }
            for p in word_positions(text, &var.name) {
                let abs = body.start + p;
                if is_write(masked, abs, var.name.len(), body.end) {
                    writes.push(StateWrite { offset: abs, var: var.name.clone() });
                }
            }
        }
        writes.sort_by_key(|w| w.offset);

        let conditions = CONDITION_HEAD
            .find_iter(text)
            .filter_map(|m| {
                let open = body.start + m.end() - 1;
                matching_close(masked, open).map(|close| open + 1..close)
            })
            .collect();

        Some(FnScope {
            unit: self.unit,
            contract,
            func,
            statements: statement_ranges(masked, body.clone()),
            body,
            conditions,
            calls,
            writes,
            locals,
            array_locals,
        })
    }

    fn access_control(&self, s: &FnScope<'_>, hits: &mut Vec<Hit>) {
        let f = s.func;
        if f.kind != FunctionKind::Function || f.is_view_or_pure || !f.modifiers.is_empty() {
            return;
        }
        if matches!(f.visibility, Some(Visibility::Internal | Visibility::Private)) {
            return;
        }
        if !self.privileged_verbs.iter().any(|v| verb_matches(&f.name, v)) {
            return;
        }
        let text = s.text();
        let sender_checked = SENDER.find_iter(text).any(|m| {
            let abs = s.body.start + m.start();
            if s.relies_on_origin(abs) {
                return false;
            }
            if s.in_condition(abs) {
                return true;
            }
            let stmt = &s.unit.masked[s.statement_at(abs)];
            stmt.contains("==") || stmt.contains("!=")
        }) || CHECK_HELPER.is_match(text);
        if !sender_checked {
            hits.push(Hit {
                rule: RuleId::AccessControl,
                offset: f.start,
                excerpt: line_range(&s.unit.original, f.start),
                message: format!("privileged function `{}` has no access modifier or sender check", f.name),
            });
        }
    }

    fn state_validation(&self, s: &FnScope<'_>, hits: &mut Vec<Hit>) {
        let f = s.func;
        if !matches!(f.kind, FunctionKind::Function | FunctionKind::Fallback | FunctionKind::Receive) || f.is_view_or_pure {
            return;
        }
        if s.calls.is_empty() && s.writes.is_empty() {
            return;
        }
        if GUARD.find_iter(s.text()).any(|m| !s.relies_on_origin(s.body.start + m.start())) {
            return;
        }
        // Modifiers declared elsewhere (inherited imports) are assumed to guard.
        let guarded_by_modifier = f.modifiers.iter().any(|m| *self.guard_modifiers.get(m).unwrap_or(&true));
        if guarded_by_modifier {
            return;
        }
        let first = s.calls.first().map(|c| c.offset).into_iter().chain(s.writes.first().map(|w| w.offset)).min().unwrap();
        hits.push(Hit {
            rule: RuleId::StateValidation,
            offset: f.start,
            excerpt: s.statement_at(first),
            message: format!("`{}` changes state or calls out without any require/revert guard", f.name),
        });
    }
}

fn fixed_size(ty: &str) -> Option<usize> {
    FIXED_SIZE.captures(ty).and_then(|c| c[1].parse().ok())
}

fn line_range(src: &str, offset: usize) -> Range<usize> {
    let offset = offset.min(src.len());
    let start = src[..offset].rfind('\n').map_or(0, |i| i + 1);
    let end = src[offset..].find('\n').map_or(src.len(), |i| offset + i);
    start..end
}

fn preceded_by_dot(masked: &str, offset: usize) -> bool {
    masked[..offset].trim_end().ends_with('.')
}

fn receiver_ident(masked: &str, dot: usize) -> Option<String> {
    let before = masked[..dot].trim_end();
    let b = before.as_bytes();
    let mut s = b.len();
    while s > 0 && is_ident_byte(b[s - 1]) {
        s -= 1;
    }
    if s == b.len() || before[..s].trim_end().ends_with('.') {
        return None;
    }
    Some(before[s..].to_string())
}

/// Splits a body into statements at top-level `;` and block braces.
pub(super) fn statement_ranges(masked: &str, body: Range<usize>) -> Vec<Range<usize>> {
    let b = masked.as_bytes();
    let mut out = Vec::new();
    let mut start = body.start;
    let mut depth = 0i32;
    let mut i = body.start;
    let push = |s: usize, e: usize, out: &mut Vec<Range<usize>>| {
        let seg = &masked[s..e];
        let lead = seg.len() - seg.trim_start().len();
        let trail = seg.len() - seg.trim_end().len();
        if lead + trail < seg.len() {
            out.push(s + lead..e - trail);
        }
    };
    while i < body.end {
        match b[i] {
            b'(' | b'[' => depth += 1,
            b')' | b']' => depth -= 1,
            b';' if depth <= 0 => {
                push(start, i + 1, &mut out);
                start = i + 1;
            }
            b'{' => {
                if depth > 0 || !is_block_brace(masked, i) {
                    if let Some(close) = matching_close(masked, i) {
                        i = close + 1;
                        continue;
                    }
                } else {
                    push(start, i, &mut out);
                    start = i + 1;
                }
            }
            b'}' if depth <= 0 => {
                push(start, i, &mut out);
                start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    push(start, body.end, &mut out);
    out
}

fn is_block_brace(masked: &str, open: usize) -> bool {
    let before = masked[..open].trim_end();
    let Some(&last) = before.as_bytes().last() else {
        return true;
    };
    if is_ident_byte(last) {
        let b = before.as_bytes();
        let mut s = b.len();
        while s > 0 && is_ident_byte(b[s - 1]) {
            s -= 1;
        }
        return matches!(&before[s..], "else" | "do" | "unchecked" | "assembly" | "try");
    }
    !matches!(last, b'(' | b',' | b':' | b'=')
}

/// Whether the occurrence of a state variable at `at` is written to.
fn is_write(masked: &str, at: usize, len: usize, limit: usize) -> bool {
    let b = masked.as_bytes();
    if preceded_by_dot(masked, at) {
        return false;
    }
    let before = masked[..at].trim_end();
    if before.ends_with("++") || before.ends_with("--") || before.ends_with("delete") {
        return true;
    }
    let mut i = at + len;
    loop {
        let j = skip_ws(b, i, limit);
        match b.get(j) {
            Some(b'[') if j < limit => match matching_close(masked, j) {
                Some(c) => i = c + 1,
                None => return false,
            },
            Some(b'.') if j < limit => {
                let k = skip_ws(b, j + 1, limit);
                let mut e = k;
                while e < limit && is_ident_byte(b[e]) {
                    e += 1;
                }
                let member = &masked[k..e];
                if matches!(member, "push" | "pop") && masked[e..limit].trim_start().starts_with('(') {
                    return true;
                }
                if member.is_empty() {
                    return false;
                }
                i = e;
            }
            _ => {
                let rest = &masked[j..limit];
                if rest.starts_with("++") || rest.starts_with("--") {
                    return true;
                }
                for op in ["<<=", ">>=", "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^="] {
                    if rest.starts_with(op) {
                        return true;
                    }
                }
                return rest.starts_with('=') && !rest.starts_with("==") && !rest.starts_with("=>");
            }
        }
    }
}

fn skip_ws(b: &[u8], mut i: usize, limit: usize) -> usize {
    while i < limit && b[i].is_ascii_whitespace() {
        i += 1;
    }
    i
}

fn verb_matches(name: &str, verb: &str) -> bool {
    if name == verb {
        return true;
    }
    if verb == "set" || verb.ends_with('*') {
        let stem = verb.trim_end_matches('*');
        return name.strip_prefix(stem).and_then(|r| r.chars().next()).is_some_and(|c| c.is_ascii_uppercase() || c == '_' || c.is_ascii_digit());
    }
    name.strip_prefix(verb)
        .and_then(|r| r.chars().next())
        .is_some_and(|c| c.is_ascii_uppercase() || c == '_' || c.is_ascii_digit())
}

fn reentrancy(s: &FnScope<'_>, hits: &mut Vec<Hit>) {
    for call in s.calls.iter().filter(|c| c.value_bearing || c.low_level) {
        if let Some(w) = s.writes.iter().find(|w| w.offset > call.offset) {
            hits.push(s.hit(
                RuleId::Reentrancy,
                call.offset,
                format!("external call precedes write to state variable `{}` (checks-effects-interactions violated)", w.var),
            ));
        }
    }
}

fn tx_origin(s: &FnScope<'_>, hits: &mut Vec<Hit>) {
    for m in TX_ORIGIN.find_iter(s.text()) {
        let abs = s.body.start + m.start();
        let stmt = &s.unit.masked[s.statement_at(abs)];
        if s.in_condition(abs) || stmt.contains("==") || stmt.contains("!=") {
            hits.push(s.hit(RuleId::TxOrigin, abs, "tx.origin used for authorization".into()));
        }
    }
}

fn unchecked_call(s: &FnScope<'_>, hits: &mut Vec<Hit>) {
    let masked = &s.unit.masked;
    for c in LOW_LEVEL.captures_iter(s.text()) {
        if !matches!(&c[1], "call" | "send" | "delegatecall" | "staticcall") {
            continue;
        }
        let abs = s.body.start + c.get(0).unwrap().start();
        let stmt = s.statement_at(abs);
        let prefix = &masked[stmt.start..abs];
        let assigned = prefix.char_indices().any(|(i, ch)| {
            ch == '=' && {
                let prev = prefix[..i].chars().last();
                let next = prefix[i + 1..].chars().next();
                !matches!(prev, Some('=' | '!' | '<' | '>')) && !matches!(next, Some('=' | '>'))
            }
        });
        let checked = ["require", "assert", "if", "return", "while"]
            .iter()
            .any(|kw| word_positions(prefix, kw).next().is_some())
            || s.in_condition(abs);
        if !(assigned || checked) {
            hits.push(s.hit(RuleId::UncheckedCall, abs, format!("return value of low-level `{}` is ignored", &c[1])));
        }
    }
}

fn timestamp(s: &FnScope<'_>, hits: &mut Vec<Hit>) {
    let has_transfer = s.calls.iter().any(|c| c.value_bearing);
    for m in TIMESTAMP.find_iter(s.text()) {
        let abs = s.body.start + m.start();
        if m.as_str() == "now" && preceded_by_dot(&s.unit.masked, abs) {
            continue;
        }
        let stmt = &s.unit.masked[s.statement_at(abs)];
        let arithmetic = stmt.contains(['+', '-', '*', '/', '%']);
        if s.in_condition(abs) || (arithmetic && has_transfer) {
            hits.push(s.hit(RuleId::Timestamp, abs, "block timestamp influences control flow or transferred amounts".into()));
        }
    }
}

fn integer_overflow(s: &FnScope<'_>, hits: &mut Vec<Hit>) {
    let masked = &s.unit.masked;
    let ints: Vec<&str> = s
        .contract
        .state_vars
        .iter()
        .filter(|v| v.is_integer && !v.is_constant && !s.locals.contains(&v.name))
        .map(|v| v.name.as_str())
        .collect();
    if ints.is_empty() {
        return;
    }
    for stmt in &s.statements {
        let text = &masked[stmt.clone()];
        let head = text.trim_start();
        if head.starts_with("require") || head.starts_with("assert") || SAFE_MATH_CALL.is_match(text) {
            continue;
        }
        if !text.contains(['+', '-', '*']) {
            continue;
        }
        let touched = ints.iter().find(|v| {
            word_positions(text, v).any(|p| !preceded_by_dot(masked, stmt.start + p))
        });
        if let Some(v) = touched {
            hits.push(s.hit(RuleId::IntegerOverflow, stmt.start, format!("unchecked arithmetic on integer state `{v}`")));
        }
    }
}

fn array_bounds(s: &FnScope<'_>, hits: &mut Vec<Hit>) {
    let masked = &s.unit.masked;
    let text = s.text();
    let mut arrays: Vec<(String, Option<usize>)> = s
        .contract
        .state_vars
        .iter()
        .filter(|v| v.is_array && !s.locals.contains(&v.name))
        .map(|v| (v.name.clone(), fixed_size(&v.type_text)))
        .collect();
    arrays.extend(s.array_locals.iter().map(|(k, v)| (k.clone(), *v)));
    arrays.sort();

    for (name, fixed) in &arrays {
        for p in word_positions(text, name) {
            let abs = s.body.start + p;
            if preceded_by_dot(masked, abs) {
                continue;
            }
            let after = abs + name.len();
            let j = skip_ws(masked.as_bytes(), after, s.body.end);
            if masked.as_bytes().get(j) != Some(&b'[') {
                continue;
            }
            let Some(close) = matching_close(masked, j) else { continue };
            let index = masked[j + 1..close].trim();
            if index.is_empty() {
                continue;
            }
            if let (Some(size), Ok(lit)) = (fixed, index.parse::<usize>()) {
                if lit < *size {
                    continue;
                }
            }
            let length_ref = format!("{name}.length");
            let idents: Vec<&str> = index
                .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '$'))
                .filter(|w| !w.is_empty() && !w.as_bytes()[0].is_ascii_digit() && *w != "length")
                .collect();
            let bounded = s.conditions.iter().filter(|c| c.start < abs).any(|c| {
                let cond = masked[c.clone()].split_whitespace().collect::<String>();
                cond.contains(&length_ref)
                    && (idents.is_empty() || idents.iter().any(|w| word_positions(&masked[c.clone()], w).next().is_some()))
            });
            if !bounded {
                hits.push(s.hit(RuleId::ArrayBounds, abs, format!("index into `{name}` without a preceding bound check")));
                break;
            }
        }
    }
}

fn gas_dos(s: &FnScope<'_>, hits: &mut Vec<Hit>) {
    let masked = &s.unit.masked;
    let dynamic: Vec<&str> = s
        .contract
        .state_vars
        .iter()
        .filter(|v| v.is_dynamic_array)
        .map(|v| v.name.as_str())
        .collect();
    for m in LOOP_HEAD.find_iter(s.text()) {
        let open = s.body.start + m.end() - 1;
        let Some(close) = matching_close(masked, open) else { continue };
        let header = masked[open + 1..close].split_whitespace().collect::<String>();
        let Some(arr) = dynamic.iter().find(|a| header.contains(&format!("{a}.length"))) else {
            continue;
        };
        let after = skip_ws(masked.as_bytes(), close + 1, s.body.end);
        let loop_body = if masked.as_bytes().get(after) == Some(&b'{') {
            after..matching_close(masked, after).unwrap_or(s.body.end)
        } else {
            after..masked[after..s.body.end].find(';').map_or(s.body.end, |e| after + e)
        };
        if s.calls.iter().any(|c| loop_body.contains(&c.offset)) {
            let abs = s.body.start + m.start();
            hits.push(Hit {
                rule: RuleId::GasDos,
                offset: abs,
                excerpt: line_range(&s.unit.original, abs),
                message: format!("loop over unbounded array `{arr}` performs external calls"),
            });
        }
    }
}

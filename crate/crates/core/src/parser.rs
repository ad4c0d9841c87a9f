//! Splits a raw model generation into its `<think>` reasoning and `<answer>`
//! code and grades format compliance.
//!
//! Tags are matched ASCII case-insensitively. The answer is the first
//! `<answer>` opening paired with the first `</answer>` after it. The
//! reasoning is the first `<think>` pair that closes before that answer
//! opens (or the first `<think>` pair at all when there is no answer).
//! Anything appended after a closed answer can therefore never change the
//! extraction.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: &str = "</think>";
const ANSWER_OPEN: &str = "<answer>";
const ANSWER_CLOSE: &str = "</answer>";
const ALL_TAGS: [&str; 4] = [THINK_OPEN, THINK_CLOSE, ANSWER_OPEN, ANSWER_CLOSE];

/// Minimum number of reasoning steps for a compliant output.
pub const MIN_REASONING_STEPS: usize = 3;

/// Minimum word tokens for a segment to count as one reasoning step.
pub const MIN_WORDS_PER_STEP: usize = 3;

/// Full text of a model generation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RawOutput {
    pub text: String,
}

impl RawOutput {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into() }
    }
}

impl From<&str> for RawOutput {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedOutput {
    pub reasoning: Option<String>,
    pub code: Option<String>,
    pub think_opened: bool,
    pub think_closed: bool,
    pub answer_opened: bool,
    pub answer_closed: bool,
    pub reasoning_step_count: usize,
    /// Byte range of the whole `<think>…</think>` pair in the raw text.
    #[serde(skip)]
    pub think_span: Option<Range<usize>>,
    /// Byte range of the whole `<answer>…</answer>` pair in the raw text.
    #[serde(skip)]
    pub answer_span: Option<Range<usize>>,
    /// True when either extracted block itself contains one of the four tags.
    pub nested_tags: bool,
}

impl ParsedOutput {
    /// Both blocks present and the reasoning block ends before the answer starts.
    pub fn reasoning_precedes_code(&self) -> bool {
        match (&self.think_span, &self.answer_span) {
            (Some(t), Some(a)) => t.end <= a.start,
            _ => false,
        }
    }

    /// Serializes the extracted blocks back into tagged text.
    pub fn to_tagged(&self) -> String {
        let mut out = String::new();
        if let Some(r) = &self.reasoning {
            out.push_str(THINK_OPEN);
            out.push_str(r);
            out.push_str(THINK_CLOSE);
        }
        if let Some(c) = &self.code {
            out.push_str(ANSWER_OPEN);
            out.push_str(c);
            out.push_str(ANSWER_CLOSE);
        }
        out
    }
}

fn find_ci(hay: &str, needle: &str, from: usize) -> Option<usize> {
    let h = hay.as_bytes();
    let n = needle.as_bytes();
    if from > h.len() || n.len() > h.len() - from {
        return None;
    }
    (from..=h.len() - n.len()).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

/// Locates `(pair span, content range)` for the first opening tag and the
/// first closing tag after it.
fn first_pair(text: &str, open: &str, close: &str) -> Option<(Range<usize>, Range<usize>)> {
    let o = find_ci(text, open, 0)?;
    let content_start = o + open.len();
    let c = find_ci(text, close, content_start)?;
    Some((o..c + close.len(), content_start..c))
}

fn contains_tag(s: &str) -> bool {
    ALL_TAGS.iter().any(|t| find_ci(s, t, 0).is_some())
}

pub fn extract_think_answer(raw: &RawOutput) -> ParsedOutput {
    let text = raw.text.as_str();
    let answer = first_pair(text, ANSWER_OPEN, ANSWER_CLOSE);
    let think = first_pair(text, THINK_OPEN, THINK_CLOSE).filter(|(span, _)| match &answer {
        Some((a, _)) => span.end <= a.start,
        None => true,
    });

    let reasoning = think.as_ref().map(|(_, c)| text[c.clone()].trim().to_string());
    let code = answer.as_ref().map(|(_, c)| text[c.clone()].trim().to_string());
    let nested_tags = reasoning.as_deref().is_some_and(contains_tag)
        || code.as_deref().is_some_and(contains_tag);
    let reasoning_step_count = reasoning.as_deref().map_or(0, count_reasoning_steps);

    ParsedOutput {
        think_opened: find_ci(text, THINK_OPEN, 0).is_some(),
        think_closed: find_ci(text, THINK_CLOSE, 0).is_some(),
        answer_opened: find_ci(text, ANSWER_OPEN, 0).is_some(),
        answer_closed: find_ci(text, ANSWER_CLOSE, 0).is_some(),
        reasoning,
        code,
        reasoning_step_count,
        think_span: think.map(|(s, _)| s),
        answer_span: answer.map(|(s, _)| s),
        nested_tags,
    }
}

fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x3040..=0x30FF | 0xAC00..=0xD7AF)
}

/// Word tokens: whitespace-separated pieces with an alphanumeric character;
/// each CJK ideograph counts on its own.
fn word_count(segment: &str) -> usize {
    segment
        .split_whitespace()
        .map(|tok| {
            let cjk = tok.chars().filter(|&c| is_cjk(c)).count();
            let rest = tok.chars().any(|c| c.is_alphanumeric() && !is_cjk(c));
            cjk + usize::from(rest)
        })
        .sum()
}

/// Length in bytes of a list marker (`1)`, `2.`, `-`, `*`, `•`) at the start
/// of a trimmed line, including the whitespace after it.
fn list_marker_len(line: &str) -> Option<usize> {
    let bytes = line.as_bytes();
    let mut i = 0;
    if line.starts_with('•') {
        i = '•'.len_utf8();
    } else if matches!(bytes.first(), Some(b'-' | b'*' | b'+')) {
        i = 1;
    } else {
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i == 0 || i > 3 || !matches!(bytes.get(i), Some(b'.' | b')')) {
            return None;
        }
        i += 1;
    }
    let ws = line[i..].len() - line[i..].trim_start().len();
    if ws == 0 && i < line.len() {
        return None;
    }
    Some(i + ws)
}

/// Counts reasoning steps: segments split on sentence terminators and on
/// newline-initiated list items, each holding at least
/// [`MIN_WORDS_PER_STEP`] word tokens.
pub fn count_reasoning_steps(reasoning: &str) -> usize {
    let mut segments: Vec<String> = Vec::new();
    let mut current = String::new();
    let flush = |cur: &mut String, segs: &mut Vec<String>| {
        if !cur.trim().is_empty() {
            segs.push(std::mem::take(cur));
        }
        cur.clear();
    };

    for line in reasoning.lines() {
        let trimmed = line.trim_start();
        let body = match list_marker_len(trimmed) {
            Some(len) => {
                flush(&mut current, &mut segments);
                current.push_str(trimmed[..len].trim_end());
                current.push(' ');
                &trimmed[len..]
            }
            None => {
                current.push(' ');
                trimmed
            }
        };
        let mut chars = body.char_indices().peekable();
        while let Some((_, c)) = chars.next() {
            match c {
                '。' | '！' | '？' => {
                    current.push(c);
                    flush(&mut current, &mut segments);
                }
                '.' | '!' | '?' => {
                    current.push(c);
                    let at_boundary = chars.peek().is_none_or(|(_, n)| n.is_whitespace());
                    if at_boundary {
                        flush(&mut current, &mut segments);
                    }
                }
                _ => current.push(c),
            }
        }
    }
    flush(&mut current, &mut segments);

    segments.iter().filter(|s| word_count(s) >= MIN_WORDS_PER_STEP).count()
}

/// One reason an output failed the format check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatIssue {
    MissingReasoning,
    MissingCode,
    EmptyCode,
    ReasoningNotBeforeCode,
    NestedTags,
    InsufficientSteps { found: usize },
}

impl fmt::Display for FormatIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormatIssue::MissingReasoning => f.write_str("missing <think> block"),
            FormatIssue::MissingCode => f.write_str("missing <answer> block"),
            FormatIssue::EmptyCode => f.write_str("empty <answer> block"),
            FormatIssue::ReasoningNotBeforeCode => f.write_str("reasoning does not precede code"),
            FormatIssue::NestedTags => f.write_str("nested or interleaved tags"),
            FormatIssue::InsufficientSteps { found } => {
                write!(f, "insufficient reasoning steps ({found} < {MIN_REASONING_STEPS})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatCheck {
    pub score: u8,
    pub diagnostics: Vec<FormatIssue>,
}

impl FormatCheck {
    pub fn passed(&self) -> bool {
        self.score == 1
    }
}

pub fn check_format(parsed: &ParsedOutput) -> FormatCheck {
    let mut diagnostics = Vec::new();
    if parsed.reasoning.is_none() {
        diagnostics.push(FormatIssue::MissingReasoning);
    }
    match parsed.code.as_deref() {
        None => diagnostics.push(FormatIssue::MissingCode),
        Some(c) if c.is_empty() => diagnostics.push(FormatIssue::EmptyCode),
        Some(_) => {}
    }
    if parsed.reasoning.is_some() && parsed.code.is_some() && !parsed.reasoning_precedes_code() {
        diagnostics.push(FormatIssue::ReasoningNotBeforeCode);
    }
    if parsed.nested_tags {
        diagnostics.push(FormatIssue::NestedTags);
    }
    if parsed.reasoning.is_some() && parsed.reasoning_step_count < MIN_REASONING_STEPS {
        diagnostics.push(FormatIssue::InsufficientSteps { found: parsed.reasoning_step_count });
    }
    FormatCheck { score: u8::from(diagnostics.is_empty()), diagnostics }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str) -> ParsedOutput {
        extract_think_answer(&RawOutput::from(s))
    }

    #[test]
    fn extracts_both_blocks() {
        let p = parse("<think>A. B. C.</think><answer>function f() public {}</answer>");
        assert_eq!(p.reasoning.as_deref(), Some("A. B. C."));
        assert_eq!(p.code.as_deref(), Some("function f() public {}"));
        assert!(p.reasoning_precedes_code());
    }

    #[test]
    fn empty_input() {
        let p = parse("");
        assert_eq!(p.reasoning, None);
        assert_eq!(p.code, None);
        assert!(!p.think_opened && !p.think_closed && !p.answer_opened && !p.answer_closed);
        assert_eq!(p.reasoning_step_count, 0);
    }

    #[test]
    fn reasoning_without_answer() {
        let p = parse("<think>A.</think>no answer tag");
        assert_eq!(p.reasoning.as_deref(), Some("A."));
        assert_eq!(p.code, None);
        assert!(!p.answer_opened);
    }

    #[test]
    fn tags_are_case_insensitive_and_trimmed() {
        let p = parse("<THINK>\n  one two three.\n</Think>\n<Answer>\n x \n</ANSWER>");
        assert_eq!(p.reasoning.as_deref(), Some("one two three."));
        assert_eq!(p.code.as_deref(), Some("x"));
    }

    #[test]
    fn step_counting_examples() {
        assert_eq!(
            count_reasoning_steps("First check balance. Then update state. Finally emit event."),
            3
        );
        assert_eq!(count_reasoning_steps(""), 0);
        assert_eq!(
            count_reasoning_steps(
                "1) validate input\n2) apply CEI pattern\n3) transfer funds\n4) emit event"
            ),
            4
        );
    }

    #[test]
    fn dotted_identifiers_do_not_split() {
        assert_eq!(count_reasoning_steps("Compare msg.sender with the owner under 0.8.0 rules."), 1);
        assert_eq!(count_reasoning_steps("1. check the caller\n2. update the balance"), 2);
        assert_eq!(count_reasoning_steps("首先检查余额。然后更新状态。最后发出事件。"), 3);
        assert_eq!(count_reasoning_steps("Too short. Also short."), 0);
    }

    #[test]
    fn format_examples() {
        let ok = parse("<think>Check the caller. Update the state. Emit the event.</think><answer>function f() public {}</answer>");
        assert_eq!(check_format(&ok).score, 1);

        let no_reasoning = parse("<answer>function f() public {}</answer>");
        let fc = check_format(&no_reasoning);
        assert_eq!(fc.score, 0);
        assert!(fc.diagnostics.contains(&FormatIssue::MissingReasoning));

        let two = parse("<think>Check the caller. Update the state.</think><answer>function f() public {}</answer>");
        let fc = check_format(&two);
        assert_eq!(fc.score, 0);
        assert_eq!(fc.diagnostics, vec![FormatIssue::InsufficientSteps { found: 2 }]);
        assert!(fc.diagnostics[0].to_string().starts_with("insufficient reasoning steps"));
    }

    #[test]
    fn answer_before_think_fails_format() {
        let p = parse("<answer>function f() public {}</answer><think>Check the caller. Update the state. Emit the event.</think>");
        assert_eq!(p.code.as_deref(), Some("function f() public {}"));
        assert_eq!(check_format(&p).score, 0);
    }

    #[test]
    fn nested_tags_fail_format() {
        let p = parse("<think>Check the caller now. <think>Update the state now. Emit the event now.</think><answer>x</answer>");
        assert!(p.nested_tags);
        let fc = check_format(&p);
        assert_eq!(fc.score, 0);
        assert!(fc.diagnostics.contains(&FormatIssue::NestedTags));
    }

    #[test]
    fn empty_answer_fails() {
        let p = parse("<think>Check the caller. Update the state. Emit the event.</think><answer>  </answer>");
        assert_eq!(check_format(&p).diagnostics, vec![FormatIssue::EmptyCode]);
    }

    fn tag_soup() -> impl Strategy<Value = String> {
        let piece = prop_oneof![
            Just("<think>".to_string()),
            Just("</think>".to_string()),
            Just("<answer>".to_string()),
            Just("</answer>".to_string()),
            Just("<ThInK>".to_string()),
            "[a-z .\n]{0,12}",
            "\\PC{0,6}",
        ];
        prop::collection::vec(piece, 0..10).prop_map(|v| v.concat())
    }

    proptest! {
        #[test]
        fn never_panics(s in "\\PC*") {
            let p = extract_think_answer(&RawOutput::new(s));
            let _ = check_format(&p);
        }

        #[test]
        fn reextraction_is_idempotent(s in tag_soup()) {
            let p = extract_think_answer(&RawOutput::new(s));
            let q = extract_think_answer(&RawOutput::new(p.to_tagged()));
            prop_assert_eq!(&p.reasoning, &q.reasoning);
            prop_assert_eq!(&p.code, &q.code);
        }

        #[test]
        fn appending_after_answer_is_inert(s in tag_soup(), tail in tag_soup()) {
            let p = extract_think_answer(&RawOutput::new(s.clone()));
            if p.answer_span.is_some() {
                let q = extract_think_answer(&RawOutput::new(format!("{s}{tail}")));
                prop_assert_eq!(&p.reasoning, &q.reasoning);
                prop_assert_eq!(&p.code, &q.code);
            }
        }

        #[test]
        fn compliant_implies_steps_and_code(s in tag_soup()) {
            let p = extract_think_answer(&RawOutput::new(s));
            if check_format(&p).passed() {
                prop_assert!(p.reasoning_step_count >= MIN_REASONING_STEPS);
                prop_assert!(p.code.as_deref().is_some_and(|c| !c.is_empty()));
            }
        }
    }
}

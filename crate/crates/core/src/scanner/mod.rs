//! Conservative pattern-based security scanner for Solidity.
//!
//! Rules are lexical with a light brace-matching segmenter, so they err on the
//! side of reporting. A report is secure only if nothing at or above the
//! configured severity threshold fired.

mod rules;
mod taxonomy;

use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use taxonomy::{classify_severity, default_rules, Category, RuleId, Severity, VulnRule};

use crate::compile::{detect_pragma, SolcVersion, VersionConstraint, DEFAULT_CONSTRAINT};
use crate::solidity::SourceUnit;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScanError {
    #[error("unknown vulnerability category: {0}")]
    UnknownCategory(String),
    #[error("unknown severity `{0}` (expected High, Med or Low)")]
    UnknownSeverity(String),
    #[error("external finding line {line} outside source with {lines} lines")]
    LineOutOfRange { line: usize, lines: usize },
    #[error("malformed external findings: {0}")]
    MalformedExternal(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VulnFinding {
    pub rule_id: String,
    pub category: Category,
    pub severity: Severity,
    pub line: usize,
    pub excerpt: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanReport {
    pub findings: Vec<VulnFinding>,
    pub secure: bool,
}

impl ScanReport {
    fn from_findings(mut findings: Vec<VulnFinding>, threshold: Severity) -> Self {
        findings.sort_by(|a, b| (a.line, &a.rule_id, &a.excerpt).cmp(&(b.line, &b.rule_id, &b.excerpt)));
        findings.dedup_by(|a, b| a.line == b.line && a.rule_id == b.rule_id);
        let secure = !findings.iter().any(|f| f.severity >= threshold);
        Self { findings, secure }
    }

    pub fn count(&self, category: Category) -> usize {
        self.findings.iter().filter(|f| f.category == category).count()
    }
}

/// 1 iff no finding reaches `threshold`.
pub fn security_score(report: &ScanReport, threshold: Severity) -> u8 {
    u8::from(!report.findings.iter().any(|f| f.severity >= threshold))
}

pub const DEFAULT_PRIVILEGED_VERBS: &[&str] =
    &["mint", "burn", "withdraw", "pause", "set*", "upgrade", "transferOwnership"];

/// Immutable rule set plus its configuration.
#[derive(Debug, Clone)]
pub struct Scanner {
    rules: Vec<VulnRule>,
    privileged_verbs: Vec<String>,
    threshold: Severity,
}

impl Default for Scanner {
    fn default() -> Self {
        Self {
            rules: default_rules(),
            privileged_verbs: DEFAULT_PRIVILEGED_VERBS.iter().map(|s| s.to_string()).collect(),
            threshold: Severity::Low,
        }
    }
}

/// A single entry of the external-tool JSON array.
#[derive(Debug, Clone, Deserialize)]
struct ExternalFinding {
    rule_id: String,
    category: String,
    severity: String,
    line: usize,
    message: String,
}

impl Scanner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_threshold(mut self, threshold: Severity) -> Self {
        self.threshold = threshold;
        self
    }

    /// Verbs matched against function names at a camel-case boundary; `set*`
    /// style entries match any suffix.
    pub fn with_privileged_verbs<I, S>(mut self, verbs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.privileged_verbs = verbs.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_rules(mut self, rules: Vec<VulnRule>) -> Self {
        self.rules = rules;
        self
    }

    pub fn rules(&self) -> &[VulnRule] {
        &self.rules
    }

    pub fn threshold(&self) -> Severity {
        self.threshold
    }

    pub fn scan(&self, code: &str, version: SolcVersion) -> ScanReport {
        self.scan_span(code, version, None)
    }

    /// Scan a whole source but keep only findings located inside `region`.
    pub fn scan_region(&self, code: &str, version: SolcVersion, region: Range<usize>) -> ScanReport {
        self.scan_span(code, version, Some(region))
    }

    /// Resolve the version from the source pragma (newest known release that
    /// satisfies it) and scan.
    pub fn scan_source(&self, code: &str) -> ScanReport {
        self.scan(code, resolve_version(code))
    }

    fn scan_span(&self, code: &str, version: SolcVersion, region: Option<Range<usize>>) -> ScanReport {
        let unit = SourceUnit::parse(code);
        let analyzer = rules::Analyzer::new(&unit, version, &self.privileged_verbs);
        let findings = analyzer
            .run(&self.rules)
            .into_iter()
            .filter(|h| region.as_ref().is_none_or(|r| r.contains(&h.offset)))
            .filter_map(|h| {
                let rule = self.rules.iter().find(|r| r.id == h.rule)?;
                Some(VulnFinding {
                    rule_id: h.rule.to_string(),
                    category: rule.category,
                    severity: rule.severity,
                    line: unit.line_of(h.offset),
                    excerpt: unit.excerpt(h.excerpt),
                    message: h.message,
                })
            })
            .collect();
        ScanReport::from_findings(findings, self.threshold)
    }

    /// Merge findings produced by an external analyzer (JSON array of
    /// `{rule_id, category, severity, line, message}`).
    pub fn merge_external(&self, code: &str, report: &ScanReport, json: &str) -> Result<ScanReport, ScanError> {
        let external: Vec<ExternalFinding> =
            serde_json::from_str(json).map_err(|e| ScanError::MalformedExternal(e.to_string()))?;
        let lines: Vec<&str> = code.split('\n').collect();
        let mut findings = report.findings.clone();
        for e in external {
            let category: Category = e.category.parse()?;
            let severity: Severity = e.severity.parse()?;
            if e.line == 0 || e.line > lines.len() {
                return Err(ScanError::LineOutOfRange { line: e.line, lines: lines.len() });
            }
            findings.push(VulnFinding {
                rule_id: e.rule_id,
                category,
                severity,
                line: e.line,
                excerpt: lines[e.line - 1].trim().to_string(),
                message: e.message,
            });
        }
        Ok(ScanReport::from_findings(findings, self.threshold))
    }
}

/// Version used for gating when no compiler has been resolved.
pub fn resolve_version(code: &str) -> SolcVersion {
    detect_pragma(code)
        .ok()
        .and_then(|p| p.parse::<VersionConstraint>().ok())
        .or_else(|| DEFAULT_CONSTRAINT.parse().ok())
        .and_then(|c| c.newest_known_release())
        .unwrap_or(SolcVersion::new(0, 8, 0))
}

static DISCLAIMER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(no need (for|to) |without (any )?|skip(ping)? (the )?|don'?t need (an? |the )?|omit(ting)? (the )?|ignore (the )?)(access control|ownership check|reentrancy guard|onlyowner|require|checks?|validation|bounds? checks?|modifier)",
    )
    .unwrap()
});

/// Whether the reasoning text explicitly waives a protection (opt-in check).
pub fn reasoning_disclaims_protection(reasoning: &str) -> bool {
    DISCLAIMER.is_match(reasoning)
}

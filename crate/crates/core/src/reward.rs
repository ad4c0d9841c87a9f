//! Weighted reward over the compile, security and format checks.

use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::compile::{assemble_with_span, CompileBackend, CompileError, CompileResult, SolcVersion};
use crate::parser::{check_format, extract_think_answer, FormatCheck};
use crate::sample::GenerationSample;
use crate::scalar::Weight;
use crate::scanner::{reasoning_disclaims_protection, ScanReport, Scanner, Severity};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RewardError {
    #[error("invalid reward weights: {0}")]
    InvalidWeights(String),
    #[error("unknown preset `{name}`; valid presets: {}", PRESET_NAMES.join(", "))]
    UnknownPreset { name: String },
    #[error(transparent)]
    Compile(#[from] CompileError),
}

impl RewardError {
    pub fn is_infrastructure(&self) -> bool {
        matches!(self, RewardError::Compile(e) if e.is_infrastructure())
    }
}

/// Weights in (compile, security, format) order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig<T: Weight = f64> {
    pub alpha_compile: T,
    pub alpha_security: T,
    pub alpha_format: T,
    pub severity_threshold: Severity,
}

pub const PRESET_NAMES: [&str; 7] =
    ["Ours", "Security+", "Security++", "Compile+", "Compile++", "Compile+++", "Compile++++"];

/// Weights of each preset in tenths.
const PRESET_TENTHS: [(i64, i64, i64); 7] = [(3, 5, 2), (2, 6, 2), (1, 7, 2), (4, 4, 2), (5, 3, 2), (6, 2, 2), (7, 1, 2)];

impl<T: Weight> RewardConfig<T> {
    pub fn new(alpha_compile: T, alpha_security: T, alpha_format: T) -> Result<Self, RewardError> {
        let cfg = Self { alpha_compile, alpha_security, alpha_format, severity_threshold: Severity::Low };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        let w = [self.alpha_compile, self.alpha_security, self.alpha_format];
        if w.iter().any(|a| *a < T::zero() || *a > T::one()) {
            return Err(RewardError::InvalidWeights(format!("each weight must lie in [0, 1], got {w:?}")));
        }
        let sum = (w[0] + w[1] + w[2]).to_f64().unwrap_or(f64::NAN);
        if !((sum - 1.0).abs() <= 1e-9) {
            return Err(RewardError::InvalidWeights(format!("weights sum to {sum}, expected 1")));
        }
        Ok(())
    }

    pub fn with_threshold(mut self, threshold: Severity) -> Self {
        self.severity_threshold = threshold;
        self
    }

    /// Weighted sum of three binary component scores.
    pub fn total(&self, r_compile: u8, r_security: u8, r_format: u8) -> T {
        let pick = |w: T, r: u8| if r != 0 { w } else { T::zero() };
        pick(self.alpha_compile, r_compile) + pick(self.alpha_security, r_security) + pick(self.alpha_format, r_format)
    }

    pub fn weights(&self) -> [T; 3] {
        [self.alpha_compile, self.alpha_security, self.alpha_format]
    }
}

impl<T: Weight> Default for RewardConfig<T> {
    fn default() -> Self {
        preset("Ours").expect("built-in preset")
    }
}

pub fn preset<T: Weight>(name: &str) -> Result<RewardConfig<T>, RewardError> {
    let i = PRESET_NAMES
        .iter()
        .position(|p| *p == name)
        .ok_or_else(|| RewardError::UnknownPreset { name: name.to_string() })?;
    let (c, s, f) = PRESET_TENTHS[i];
    Ok(RewardConfig {
        alpha_compile: T::ratio(c, 10),
        alpha_security: T::ratio(s, 10),
        alpha_format: T::ratio(f, 10),
        severity_threshold: Severity::Low,
    })
}

/// Parses `a,b,c` into a validated config.
pub fn parse_weights(text: &str) -> Result<RewardConfig<f64>, RewardError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| RewardError::InvalidWeights(format!("`{text}`: {e}")))?;
    match parts[..] {
        [c, s, f] => RewardConfig::new(c, s, f),
        _ => Err(RewardError::InvalidWeights(format!("expected three comma-separated weights, got `{text}`"))),
    }
}

/// Evidence for one check: either what the check produced, or why it was skipped.
#[derive(Debug, Clone, PartialEq)]
pub enum CheckEvidence<T> {
    Skipped(&'static str),
    Ran(T),
}

impl<T> CheckEvidence<T> {
    pub fn ran(&self) -> Option<&T> {
        match self {
            CheckEvidence::Ran(t) => Some(t),
            CheckEvidence::Skipped(_) => None,
        }
    }
}

impl<T: Serialize> Serialize for CheckEvidence<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            CheckEvidence::Skipped(why) => s.serialize_str(why),
            CheckEvidence::Ran(t) => t.serialize(s),
        }
    }
}

pub const NO_CODE: &str = "no code";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardEvidence {
    pub compile: CheckEvidence<CompileResult>,
    pub security: CheckEvidence<ScanReport>,
    pub format: FormatCheck,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub reasoning_disclaimer: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardBreakdown {
    pub id: String,
    pub r_compile: u8,
    pub r_security: u8,
    pub r_format: u8,
    pub total: f64,
    pub evidence: RewardEvidence,
}

impl fmt::Display for RewardBreakdown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: total={} compile={} security={} format={}",
            self.id, self.total, self.r_compile, self.r_security, self.r_format
        )
    }
}

/// Scores samples against a compiler backend.
pub struct RewardEngine<'a, T: Weight = f64> {
    config: RewardConfig<T>,
    backend: &'a dyn CompileBackend,
    scanner: Scanner,
    check_reasoning: bool,
}

impl<'a, T: Weight> RewardEngine<'a, T> {
    pub fn new(config: RewardConfig<T>, backend: &'a dyn CompileBackend) -> Self {
        let scanner = Scanner::new().with_threshold(config.severity_threshold);
        Self { config, backend, scanner, check_reasoning: false }
    }

    pub fn with_scanner(mut self, scanner: Scanner) -> Self {
        self.scanner = scanner.with_threshold(self.config.severity_threshold);
        self
    }

    /// Also fail security when the reasoning explicitly waives a protection.
    pub fn with_reasoning_check(mut self, on: bool) -> Self {
        self.check_reasoning = on;
        self
    }

    pub fn config(&self) -> &RewardConfig<T> {
        &self.config
    }

    pub fn score(&self, sample: &GenerationSample) -> Result<RewardBreakdown, RewardError> {
        let parsed = extract_think_answer(&sample.output);
        let format = check_format(&parsed);
        let code = parsed.code.as_deref().filter(|c| !c.trim().is_empty());

        let (compile, security, disclaimer) = match code {
            None => (CheckEvidence::Skipped(NO_CODE), CheckEvidence::Skipped(NO_CODE), false),
            Some(code) => {
                let context = sample.effective_context();
                context.validate()?;
                let constraint = context.constraint()?;
                let assembly = assemble_with_span(&context, code)?;
                let result = self.backend.compile(&assembly.source, &constraint)?;
                let version = result
                    .compiler_version
                    .parse::<SolcVersion>()
                    .ok()
                    .or_else(|| constraint.newest_known_release())
                    .unwrap_or(SolcVersion::new(0, 8, 0));
                let report = self.scanner.scan_region(&assembly.source, version, assembly.inserted.clone());
                let disclaimer =
                    self.check_reasoning && parsed.reasoning.as_deref().is_some_and(reasoning_disclaims_protection);
                (CheckEvidence::Ran(result), CheckEvidence::Ran(report), disclaimer)
            }
        };

        let r_compile = compile.ran().map_or(0, CompileResult::score);
        let r_security = match security.ran() {
            Some(report) if !disclaimer => u8::from(report.secure),
            _ => 0,
        };
        let r_format = format.score;
        let total = self.config.total(r_compile, r_security, r_format).to_f64().unwrap_or(f64::NAN);
        Ok(RewardBreakdown {
            id: sample.id.clone(),
            r_compile,
            r_security,
            r_format,
            total,
            evidence: RewardEvidence { compile, security, format, reasoning_disclaimer: disclaimer },
        })
    }
}

pub fn score_sample<T: Weight>(
    sample: &GenerationSample,
    config: &RewardConfig<T>,
    backend: &dyn CompileBackend,
) -> Result<RewardBreakdown, RewardError> {
    RewardEngine::new(*config, backend).score(sample)
}

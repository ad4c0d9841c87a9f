//! Compilation gate: splice a generated function into its contract, pick a
//! compiler from the pragma, and compile through solc's standard JSON
//! interface.

mod solc;
mod version;

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use solc::{default_solc_dir, SolcCompiler, DEFAULT_TIMEOUT, SOLC_DIR_ENV};
pub use version::{
    detect_pragma, detect_pragma_or, SolcVersion, VersionConstraint, DEFAULT_CONSTRAINT,
    KNOWN_RELEASES,
};

use crate::solidity::{self, SourceUnit};

/// Marker replaced by the generated function during assembly.
pub const PLACEHOLDER: &str = "/*__TARGET__*/";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("unparseable pragma: {0}")]
    UnparseablePragma(String),
    #[error("generated code is empty")]
    EmptyCode,
    #[error("no insertion point")]
    NoInsertionPoint,
    #[error("invalid contract context: {0}")]
    InvalidContext(String),
    #[error("compiler unavailable: no installed solc satisfies `{constraint}` (searched {searched})")]
    Unavailable { constraint: String, searched: String },
    #[error("compiler invocation failed: {0}")]
    Invocation(String),
}

impl CompileError {
    /// Failures of the harness rather than of the code under test.
    pub fn is_infrastructure(&self) -> bool {
        matches!(self, CompileError::Unavailable { .. } | CompileError::Invocation(_))
    }
}

/// Contract source with an insertion point for the generated function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractContext {
    pub source: String,
    pub target_function_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pragma_constraint: Option<String>,
    /// Contract receiving the function when the source has no placeholder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contract_name: Option<String>,
}

impl ContractContext {
    pub fn new(source: impl Into<String>, target_function_name: impl Into<String>) -> Result<Self, CompileError> {
        let ctx = Self {
            source: source.into(),
            target_function_name: target_function_name.into(),
            pragma_constraint: None,
            contract_name: None,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<(), CompileError> {
        if self.source.trim().is_empty() {
            return Err(CompileError::InvalidContext("empty source".into()));
        }
        if !solidity::is_identifier(&self.target_function_name) {
            return Err(CompileError::InvalidContext(format!(
                "`{}` is not a Solidity identifier",
                self.target_function_name
            )));
        }
        Ok(())
    }

    /// Explicit constraint if set, otherwise the source pragma (or default).
    pub fn constraint(&self) -> Result<VersionConstraint, CompileError> {
        match &self.pragma_constraint {
            Some(c) => c.parse(),
            None => detect_pragma(&self.source)?.parse(),
        }
    }
}

/// Assembled source plus the byte range holding the generated code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assembly {
    pub source: String,
    pub inserted: Range<usize>,
}

pub fn assemble(context: &ContractContext, generated_code: &str) -> Result<String, CompileError> {
    assemble_with_span(context, generated_code).map(|a| a.source)
}

pub fn assemble_with_span(context: &ContractContext, generated_code: &str) -> Result<Assembly, CompileError> {
    if generated_code.trim().is_empty() {
        return Err(CompileError::EmptyCode);
    }
    let src = &context.source;
    if let Some(at) = src.find(PLACEHOLDER) {
        let mut out = String::with_capacity(src.len() + generated_code.len());
        out.push_str(&src[..at]);
        out.push_str(generated_code);
        out.push_str(&src[at + PLACEHOLDER.len()..]);
        return Ok(Assembly { source: out, inserted: at..at + generated_code.len() });
    }
    let unit = SourceUnit::parse(src);
    let target = match &context.contract_name {
        Some(name) => unit.contracts.iter().find(|c| &c.name == name),
        None => unit
            .contracts
            .iter()
            .rev()
            .find(|c| c.kind != solidity::ContractKind::Interface)
            .or(unit.contracts.last()),
    };
    let close = target.ok_or(CompileError::NoInsertionPoint)?.close_brace();
    let mut out = String::with_capacity(src.len() + generated_code.len() + 2);
    out.push_str(&src[..close]);
    out.push('\n');
    let start = out.len();
    out.push_str(generated_code);
    let end = out.len();
    out.push('\n');
    out.push_str(&src[close..]);
    Ok(Assembly { source: out, inserted: start..end })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagnosticSeverity {
    Error,
    Warning,
    Info,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: DiagnosticSeverity,
    pub line: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileResult {
    pub success: bool,
    pub compiler_version: String,
    pub diagnostics: Vec<Diagnostic>,
    pub duration_ms: u64,
}

impl CompileResult {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == DiagnosticSeverity::Error)
    }

    pub fn score(&self) -> u8 {
        u8::from(self.success)
    }
}

/// Anything that can compile a full Solidity source under a constraint.
pub trait CompileBackend: Send + Sync {
    fn installed_versions(&self) -> Vec<SolcVersion>;

    fn compile(&self, source: &str, constraint: &VersionConstraint) -> Result<CompileResult, CompileError>;

    /// Newest installed compiler satisfying the constraint.
    fn resolve(&self, constraint: &VersionConstraint) -> Result<SolcVersion, CompileError> {
        constraint.newest_in(self.installed_versions().iter()).ok_or_else(|| CompileError::Unavailable {
            constraint: constraint.to_string(),
            searched: "backend".into(),
        })
    }
}

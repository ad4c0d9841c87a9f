//! Solidity compiler versions and `pragma solidity` constraints.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::CompileError;
use crate::solidity;

/// Constraint used when a source carries no `pragma solidity`.
pub const DEFAULT_CONSTRAINT: &str = "^0.8.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SolcVersion {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
}

impl SolcVersion {
    pub const fn new(major: u64, minor: u64, patch: u64) -> Self {
        Self { major, minor, patch }
    }
}

impl fmt::Display for SolcVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.patch)
    }
}

impl FromStr for SolcVersion {
    type Err = CompileError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CompileError::UnparseablePragma(s.to_string());
        let core = s.trim().trim_start_matches('v');
        let core = core.split(['+', '-']).next().unwrap_or("");
        let mut it = core.split('.');
        let mut next = || -> Result<u64, CompileError> {
            it.next().ok_or_else(bad)?.parse().map_err(|_| bad())
        };
        let v = SolcVersion::new(next()?, next()?, next()?);
        Ok(v)
    }
}

impl Serialize for SolcVersion {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SolcVersion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Eq,
    Gt,
    Ge,
    Lt,
    Le,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Comparator {
    op: Op,
    version: SolcVersion,
}

impl Comparator {
    fn matches(&self, v: SolcVersion) -> bool {
        match self.op {
            Op::Eq => v == self.version,
            Op::Gt => v > self.version,
            Op::Ge => v >= self.version,
            Op::Lt => v < self.version,
            Op::Le => v <= self.version,
        }
    }
}

/// A parsed `pragma solidity` constraint: alternatives joined by `||`, each
/// an intersection of comparators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VersionConstraint {
    text: String,
    alternatives: Vec<Vec<Comparator>>,
}

impl fmt::Display for VersionConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

static PARTIAL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(\^|~|>=|<=|>|<|=)?\s*v?(\d+|[xX*])(?:\.(\d+|[xX*]))?(?:\.(\d+|[xX*]))?$")
        .unwrap()
});

fn bump(major: u64, minor: Option<u64>) -> SolcVersion {
    match minor {
        Some(m) => SolcVersion::new(major, m + 1, 0),
        None => SolcVersion::new(major + 1, 0, 0),
    }
}

fn desugar(token: &str, original: &str) -> Result<Vec<Comparator>, CompileError> {
    let bad = || CompileError::UnparseablePragma(original.to_string());
    let caps = PARTIAL.captures(token).ok_or_else(bad)?;
    let op = caps.get(1).map_or("", |m| m.as_str());
    let num = |i: usize| -> Option<u64> { caps.get(i).and_then(|m| m.as_str().parse().ok()) };
    let Some(major) = num(2) else {
        // `*` / `x`: anything goes.
        return Ok(vec![Comparator { op: Op::Ge, version: SolcVersion::new(0, 0, 0) }]);
    };
    let minor = num(3);
    let patch = if minor.is_some() { num(4) } else { None };
    let base = SolcVersion::new(major, minor.unwrap_or(0), patch.unwrap_or(0));
    let c = |op, version| Comparator { op, version };
    let out = match op {
        "^" => {
            let upper = if major > 0 {
                SolcVersion::new(major + 1, 0, 0)
            } else {
                match (minor, patch) {
                    (Some(m), _) if m > 0 => SolcVersion::new(0, m + 1, 0),
                    (Some(0), Some(p)) => SolcVersion::new(0, 0, p + 1),
                    (Some(_), None) => SolcVersion::new(0, 1, 0),
                    _ => SolcVersion::new(1, 0, 0),
                }
            };
            vec![c(Op::Ge, base), c(Op::Lt, upper)]
        }
        "~" => {
            let upper = if minor.is_some() { bump(major, minor) } else { bump(major, None) };
            vec![c(Op::Ge, base), c(Op::Lt, upper)]
        }
        ">=" => vec![c(Op::Ge, base)],
        "<" => vec![c(Op::Lt, base)],
        ">" if patch.is_some() => vec![c(Op::Gt, base)],
        ">" => vec![c(Op::Ge, bump(major, minor))],
        "<=" if patch.is_some() => vec![c(Op::Le, base)],
        "<=" => vec![c(Op::Lt, bump(major, minor))],
        _ if patch.is_some() => vec![c(Op::Eq, base)],
        _ => vec![c(Op::Ge, base), c(Op::Lt, bump(major, minor))],
    };
    Ok(out)
}

impl FromStr for VersionConstraint {
    type Err = CompileError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let text = s.split_whitespace().collect::<Vec<_>>().join(" ");
        if text.is_empty() {
            return Err(CompileError::UnparseablePragma(s.to_string()));
        }
        let mut alternatives = Vec::new();
        for alt in text.split("||") {
            let alt = alt.trim();
            if alt.is_empty() {
                return Err(CompileError::UnparseablePragma(s.to_string()));
            }
            let mut comps = Vec::new();
            if let Some((lo, hi)) = alt.split_once(" - ") {
                comps.extend(desugar(&format!(">={}", lo.trim()), s)?);
                comps.extend(desugar(&format!("<={}", hi.trim()), s)?);
            } else {
                // Operators may be separated from their version by spaces.
                let mut pending = String::new();
                for tok in alt.split_whitespace() {
                    if matches!(tok, "^" | "~" | ">=" | "<=" | ">" | "<" | "=") {
                        pending = tok.to_string();
                        continue;
                    }
                    comps.extend(desugar(&format!("{pending}{tok}"), s)?);
                    pending.clear();
                }
                if !pending.is_empty() {
                    return Err(CompileError::UnparseablePragma(s.to_string()));
                }
            }
            alternatives.push(comps);
        }
        Ok(Self { text, alternatives })
    }
}

impl VersionConstraint {
    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn matches(&self, v: SolcVersion) -> bool {
        self.alternatives.iter().any(|alt| alt.iter().all(|c| c.matches(v)))
    }

    /// Newest candidate satisfying the constraint.
    pub fn newest_in<'a, I>(&self, candidates: I) -> Option<SolcVersion>
    where
        I: IntoIterator<Item = &'a SolcVersion>,
    {
        candidates.into_iter().copied().filter(|v| self.matches(*v)).max()
    }

    /// Newest published compiler release satisfying the constraint.
    pub fn newest_known_release(&self) -> Option<SolcVersion> {
        self.newest_in(KNOWN_RELEASES.iter())
    }
}

/// Published solc releases, 0.4.0 through 0.8.30.
pub static KNOWN_RELEASES: LazyLock<Vec<SolcVersion>> = LazyLock::new(|| {
    [(4u64, 26u64), (5, 17), (6, 12), (7, 6), (8, 30)]
        .iter()
        .flat_map(|&(minor, last)| (0..=last).map(move |p| SolcVersion::new(0, minor, p)))
        .collect()
});

static PRAGMA: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bpragma\s+solidity\b([^;]*);").unwrap());

/// Returns the first `pragma solidity` constraint, or the default when the
/// source has none.
pub fn detect_pragma(source: &str) -> Result<String, CompileError> {
    detect_pragma_or(source, DEFAULT_CONSTRAINT)
}

pub fn detect_pragma_or(source: &str, default: &str) -> Result<String, CompileError> {
    let masked = solidity::mask_comments(source);
    match PRAGMA.captures(&masked) {
        Some(c) => {
            let raw = c[1].trim();
            let parsed: VersionConstraint = raw.parse()?;
            Ok(parsed.as_str().to_string())
        }
        None if masked.contains("pragma solidity") => {
            Err(CompileError::UnparseablePragma(source.lines().find(|l| l.contains("pragma solidity")).unwrap_or("").trim().to_string()))
        }
        None => Ok(default.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> SolcVersion {
        s.parse().unwrap()
    }

    fn c(s: &str) -> VersionConstraint {
        s.parse().unwrap()
    }

    #[test]
    fn pragma_examples() {
        assert_eq!(detect_pragma("pragma solidity ^0.6.12;").unwrap(), "^0.6.12");
        assert_eq!(detect_pragma("contract A {}").unwrap(), "^0.8.0");
        assert_eq!(
            detect_pragma("pragma solidity >=0.4.22 <0.9.0;\ncontract A {}").unwrap(),
            ">=0.4.22 <0.9.0"
        );
    }

    #[test]
    fn pragma_in_comment_is_ignored() {
        assert_eq!(detect_pragma("// pragma solidity ^0.4.0;\ncontract A {}").unwrap(), "^0.8.0");
    }

    #[test]
    fn malformed_pragma() {
        let err = detect_pragma("pragma solidity banana;").unwrap_err();
        assert!(err.to_string().contains("unparseable pragma"));
        assert!(detect_pragma("pragma solidity ^0.8.0").is_err());
    }

    #[test]
    fn caret_and_tilde() {
        assert!(c("^0.6.12").matches(v("0.6.12")));
        assert!(c("^0.6.12").matches(v("0.6.99")));
        assert!(!c("^0.6.12").matches(v("0.7.0")));
        assert!(!c("^0.6.12").matches(v("0.6.11")));
        assert!(c("^0.8").matches(v("0.8.30")));
        assert!(c("~0.5.2").matches(v("0.5.17")));
        assert!(!c("~0.5.2").matches(v("0.6.0")));
        assert!(c("^1.2.3").matches(v("1.9.0")));
    }

    #[test]
    fn ranges_and_exact() {
        let r = c(">=0.4.22 <0.9.0");
        assert!(r.matches(v("0.4.22")) && r.matches(v("0.8.30")) && !r.matches(v("0.9.0")));
        assert!(c("0.8.0").matches(v("0.8.0")) && !c("0.8.0").matches(v("0.8.1")));
        assert!(c("=0.5.0").matches(v("0.5.0")));
        assert!(c("> 0.5.0").matches(v("0.5.1")));
        assert!(c("<=0.5").matches(v("0.5.17")) && !c("<=0.5").matches(v("0.6.0")));
        let alt = c("^0.4.24 || ^0.5.0");
        assert!(alt.matches(v("0.4.26")) && alt.matches(v("0.5.3")) && !alt.matches(v("0.6.0")));
        assert!(c("0.5.0 - 0.6.2").matches(v("0.6.2")));
    }

    #[test]
    fn newest_selection() {
        let installed = [v("0.6.12"), v("0.8.26"), v("0.8.4")];
        assert_eq!(c("^0.8.0").newest_in(&installed), Some(v("0.8.26")));
        assert_eq!(c("^0.6.0").newest_in(&installed), Some(v("0.6.12")));
        assert_eq!(c("^0.7.0").newest_in(&installed), None);
        assert_eq!(c(">=0.4.22 <0.9.0").newest_known_release(), Some(v("0.8.30")));
        assert_eq!(c("^0.4.24").newest_known_release(), Some(v("0.4.26")));
    }

    #[test]
    fn version_parsing() {
        assert_eq!(v("0.8.26+commit.8a97fa7a.Emscripten.clang"), SolcVersion::new(0, 8, 26));
        assert_eq!(v("v0.6.12"), SolcVersion::new(0, 6, 12));
        assert!("0.8".parse::<SolcVersion>().is_err());
    }
}

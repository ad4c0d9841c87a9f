//! Vulnerability categories, severities and the built-in rule catalog.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ScanError;
use crate::compile::SolcVersion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    Low,
    Med,
    High,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Low => "Low",
            Severity::Med => "Med",
            Severity::High => "High",
        })
    }
}

impl FromStr for Severity {
    type Err = ScanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "High" => Ok(Severity::High),
            "Med" => Ok(Severity::Med),
            "Low" => Ok(Severity::Low),
            other => Err(ScanError::UnknownSeverity(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Reentrancy,
    ArrayBoundsUnchecked,
    AccessControlMissing,
    StateValidationMissing,
    IntegerOverflow,
    ImproperErrorHandling,
    TimestampDependence,
    GasLimitDos,
    FunctionVisibility,
    TxOriginAuthentication,
    SelfdestructUsage,
    DelegatecallContext,
}

impl Category {
    pub const ALL: [Category; 12] = [
        Category::Reentrancy,
        Category::ArrayBoundsUnchecked,
        Category::AccessControlMissing,
        Category::StateValidationMissing,
        Category::IntegerOverflow,
        Category::ImproperErrorHandling,
        Category::TimestampDependence,
        Category::GasLimitDos,
        Category::FunctionVisibility,
        Category::TxOriginAuthentication,
        Category::SelfdestructUsage,
        Category::DelegatecallContext,
    ];

    /// Display name of the category.
    pub fn name(self) -> &'static str {
        match self {
            Category::Reentrancy => "Reentrancy Vulnerabilities",
            Category::ArrayBoundsUnchecked => "Array Bounds Unchecked",
            Category::AccessControlMissing => "Access Control Missing",
            Category::StateValidationMissing => "State Validation Missing",
            Category::IntegerOverflow => "Integer Overflow/Underflow",
            Category::ImproperErrorHandling => "Improper Error Handling",
            Category::TimestampDependence => "Timestamp Dependence",
            Category::GasLimitDos => "Gas Limit DoS Risk",
            Category::FunctionVisibility => "Function Visibility Issues",
            Category::TxOriginAuthentication => "tx.origin Authentication",
            Category::SelfdestructUsage => "Selfdestruct Usage",
            Category::DelegatecallContext => "Delegatecall Context Risk",
        }
    }

    /// Risk level of each category.
    pub fn severity(self) -> Severity {
        match self {
            Category::Reentrancy => Severity::High,
            Category::ArrayBoundsUnchecked => Severity::Med,
            Category::AccessControlMissing => Severity::High,
            Category::StateValidationMissing => Severity::Med,
            Category::IntegerOverflow => Severity::Med,
            Category::ImproperErrorHandling => Severity::Med,
            Category::TimestampDependence => Severity::Med,
            Category::GasLimitDos => Severity::Low,
            Category::FunctionVisibility => Severity::Low,
            Category::TxOriginAuthentication => Severity::High,
            Category::SelfdestructUsage => Severity::High,
            Category::DelegatecallContext => Severity::High,
        }
    }

    fn aliases(self) -> &'static [&'static str] {
        match self {
            Category::Reentrancy => &["reentrancy", "reentrancyvulnerability"],
            Category::ArrayBoundsUnchecked => &["arraybounds", "outofbounds"],
            Category::AccessControlMissing => &["accesscontrol", "missingaccesscontrol"],
            Category::StateValidationMissing => &["statevalidation", "missingvalidation"],
            Category::IntegerOverflow => &["integeroverflow", "integerunderflow", "overflow"],
            Category::ImproperErrorHandling => &["errorhandling", "uncheckedcall", "uncheckedlowlevelcall"],
            Category::TimestampDependence => &["timestamp", "timestampdependency"],
            Category::GasLimitDos => &["gaslimitdos", "gasdos", "dos"],
            Category::FunctionVisibility => &["functionvisibility", "visibility"],
            Category::TxOriginAuthentication => &["txorigin"],
            Category::SelfdestructUsage => &["selfdestruct", "suicide", "unprotectedsuicide"],
            Category::DelegatecallContext => &["delegatecall"],
        }
    }
}

fn normalize(s: &str) -> String {
    s.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect()
}

impl FromStr for Category {
    type Err = ScanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = normalize(s);
        Category::ALL
            .into_iter()
            .find(|c| normalize(c.name()) == key || c.aliases().contains(&key.as_str()))
            .ok_or_else(|| ScanError::UnknownCategory(s.to_string()))
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Category {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Category {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Severity for a category given by name.
pub fn classify_severity(category: &str) -> Result<Severity, ScanError> {
    category.parse::<Category>().map(Category::severity)
}

/// Identifier of a built-in rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleId {
    Reentrancy,
    TxOrigin,
    Delegatecall,
    Selfdestruct,
    UncheckedCall,
    Timestamp,
    IntegerOverflow,
    AccessControl,
    ArrayBounds,
    GasDos,
    Visibility,
    StateValidation,
}

impl RuleId {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::Reentrancy => "reentrancy",
            RuleId::TxOrigin => "tx-origin",
            RuleId::Delegatecall => "delegatecall",
            RuleId::Selfdestruct => "selfdestruct",
            RuleId::UncheckedCall => "unchecked-call",
            RuleId::Timestamp => "timestamp",
            RuleId::IntegerOverflow => "integer-overflow",
            RuleId::AccessControl => "access-control",
            RuleId::ArrayBounds => "array-bounds",
            RuleId::GasDos => "gas-dos",
            RuleId::Visibility => "visibility",
            RuleId::StateValidation => "state-validation",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VulnRule {
    pub id: RuleId,
    pub category: Category,
    pub severity: Severity,
    /// Rule only applies to compilers strictly older than this.
    pub applies_below_version: Option<SolcVersion>,
    pub description: &'static str,
}

impl VulnRule {
    pub fn applies_to(&self, version: SolcVersion) -> bool {
        self.applies_below_version.is_none_or(|bound| version < bound)
    }
}

fn rule(id: RuleId, category: Category, below: Option<SolcVersion>, description: &'static str) -> VulnRule {
    VulnRule { id, category, severity: category.severity(), applies_below_version: below, description }
}

/// The twelve built-in rules.
pub fn default_rules() -> Vec<VulnRule> {
    vec![
        rule(RuleId::Reentrancy, Category::Reentrancy, None,
            "external value-bearing call before a state-variable write in the same function"),
        rule(RuleId::TxOrigin, Category::TxOriginAuthentication, None,
            "tx.origin used in a comparison or guard"),
        rule(RuleId::Delegatecall, Category::DelegatecallContext, None, "delegatecall present"),
        rule(RuleId::Selfdestruct, Category::SelfdestructUsage, None, "selfdestruct/suicide present"),
        rule(RuleId::UncheckedCall, Category::ImproperErrorHandling, None,
            "low-level call/send result neither checked nor assigned"),
        rule(RuleId::Timestamp, Category::TimestampDependence, None,
            "block.timestamp/now used in a condition or in arithmetic near a transfer"),
        rule(RuleId::IntegerOverflow, Category::IntegerOverflow, Some(SolcVersion::new(0, 8, 0)),
            "unchecked arithmetic on integer state before 0.8.0"),
        rule(RuleId::AccessControl, Category::AccessControlMissing, None,
            "privileged state-changing function without modifier or sender check"),
        rule(RuleId::ArrayBounds, Category::ArrayBoundsUnchecked, None,
            "array index without a preceding bound check"),
        rule(RuleId::GasDos, Category::GasLimitDos, None,
            "loop over a dynamic array containing an external call"),
        rule(RuleId::Visibility, Category::FunctionVisibility, Some(SolcVersion::new(0, 5, 0)),
            "function without explicit visibility before 0.5.0"),
        rule(RuleId::StateValidation, Category::StateValidationMissing, None,
            "external call or state mutation with no require/revert guard"),
    ]
}

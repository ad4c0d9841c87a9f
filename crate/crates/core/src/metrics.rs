//! The five corpus-level metrics and their reports.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reward::RewardBreakdown;
use crate::scalar::{Exact, Weight};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("duplicate sample_id `{0}`")]
    DuplicateId(String),
    #[error("sample `{0}`: vulnerable/functional must be absent when compiled is false")]
    VerdictOnUncompiled(String),
    #[error("sample `{0}`: compiled sample has no vulnerable verdict")]
    MissingVulnerable(String),
    #[error("unknown report format `{0}` (expected json or markdown)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleVerdict {
    pub sample_id: String,
    pub compiled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vulnerable: Option<bool>,
    /// Supplied by an external test runner.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<bool>,
}

impl SampleVerdict {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !self.compiled && (self.vulnerable.is_some() || self.functional.is_some()) {
            return Err(MetricsError::VerdictOnUncompiled(self.sample_id.clone()));
        }
        if self.compiled && self.vulnerable.is_none() {
            return Err(MetricsError::MissingVulnerable(self.sample_id.clone()));
        }
        Ok(())
    }

    /// Verdict from a reward breakdown; `functional` comes from a test runner.
    pub fn from_breakdown(b: &RewardBreakdown, functional: Option<bool>) -> Self {
        let compiled = b.r_compile == 1;
        Self {
            sample_id: b.id.clone(),
            compiled,
            vulnerable: compiled.then_some(b.r_security == 0),
            functional: if compiled { functional } else { None },
        }
    }
}

/// Source of functional pass/fail results keyed by sample id.
pub trait FunctionalRunner {
    fn passes(&self, sample_id: &str) -> Option<bool>;
}

impl FunctionalRunner for HashMap<String, bool> {
    fn passes(&self, sample_id: &str) -> Option<bool> {
        self.get(sample_id).copied()
    }
}

/// Fill in functional verdicts for compiled samples that lack one.
pub fn attach_functional(verdicts: &mut [SampleVerdict], runner: &dyn FunctionalRunner) {
    for v in verdicts.iter_mut().filter(|v| v.compiled && v.functional.is_none()) {
        v.functional = runner.passes(&v.sample_id);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    ComPass,
    VulRate,
    SafeAval,
    FuncRate,
    FullRate,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::ComPass, Metric::VulRate, Metric::SafeAval, Metric::FuncRate, Metric::FullRate];

    pub fn key(self) -> &'static str {
        match self {
            Metric::ComPass => "compass",
            Metric::VulRate => "vulrate",
            Metric::SafeAval => "safeaval",
            Metric::FuncRate => "funcrate",
            Metric::FullRate => "fullrate",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Metric::ComPass => "ComPass(%)",
            Metric::VulRate => "VulRate(%)",
            Metric::SafeAval => "SafeAval(%)",
            Metric::FuncRate => "FuncRate(%)",
            Metric::FullRate => "FullRate(%)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub n_total: usize,
    pub n_compiled: usize,
    pub n_vulnerable: usize,
    pub n_secure: usize,
    pub n_functional: usize,
    pub n_full: usize,
    pub compass: f64,
    pub vulrate: f64,
    pub safeaval: f64,
    pub funcrate: f64,
    pub fullrate: f64,
    /// Set when nothing compiled, in which case vulrate is reported as 0.
    pub no_compilable_samples: bool,
}

impl MetricsReport {
    pub fn from_counts(n_total: usize, n_compiled: usize, n_vulnerable: usize, n_functional: usize, n_full: usize) -> Self {
        let mut r = Self {
            n_total,
            n_compiled,
            n_vulnerable,
            n_secure: n_compiled - n_vulnerable,
            n_functional,
            n_full,
            compass: 0.0,
            vulrate: 0.0,
            safeaval: 0.0,
            funcrate: 0.0,
            fullrate: 0.0,
            no_compilable_samples: n_compiled == 0,
        };
        r.compass = r.percent(Metric::ComPass);
        r.vulrate = r.percent(Metric::VulRate);
        r.safeaval = r.percent(Metric::SafeAval);
        r.funcrate = r.percent(Metric::FuncRate);
        r.fullrate = r.percent(Metric::FullRate);
        r
    }

    /// (numerator, denominator) of a metric; vulrate with nothing compiled is 0/1.
    pub fn counts(&self, m: Metric) -> (usize, usize) {
        match m {
            Metric::ComPass => (self.n_compiled, self.n_total),
            Metric::VulRate if self.n_compiled == 0 => (0, 1),
            Metric::VulRate => (self.n_vulnerable, self.n_compiled),
            Metric::SafeAval => (self.n_secure, self.n_total),
            Metric::FuncRate => (self.n_functional, self.n_total),
            Metric::FullRate => (self.n_full, self.n_total),
        }
    }

    /// The metric as a fraction in `[0, 1]`.
    pub fn fraction<T: Weight>(&self, m: Metric) -> T {
        let (n, d) = self.counts(m);
        T::ratio(n as i64, d as i64)
    }

    pub fn exact(&self, m: Metric) -> Exact {
        self.fraction(m)
    }

    pub fn percent(&self, m: Metric) -> f64 {
        let (n, d) = self.counts(m);
        100.0 * n as f64 / d as f64
    }

    /// Percentage rounded half-up to two decimals, computed exactly.
    pub fn rounded(&self, m: Metric) -> String {
        let (n, d) = self.counts(m);
        let (n, d) = (n as u128, d as u128);
        let hundredths = (20_000 * n + d) / (2 * d);
        format!("{}.{:02}", hundredths / 100, hundredths % 100)
    }
}

pub fn compute_metrics(verdicts: &[SampleVerdict]) -> Result<MetricsReport, MetricsError> {
    if verdicts.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let mut seen = HashSet::new();
    let (mut compiled, mut vulnerable, mut functional, mut full) = (0, 0, 0, 0);
    for v in verdicts {
        v.validate()?;
        if !seen.insert(v.sample_id.as_str()) {
            return Err(MetricsError::DuplicateId(v.sample_id.clone()));
        }
        if !v.compiled {
            continue;
        }
        compiled += 1;
        let vuln = v.vulnerable == Some(true);
        let func = v.functional == Some(true);
        vulnerable += usize::from(vuln);
        functional += usize::from(func);
        full += usize::from(!vuln && func);
    }
    Ok(MetricsReport::from_counts(verdicts.len(), compiled, vulnerable, functional, full))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(MetricsError::UnknownFormat(s.to_string())),
        }
    }
}

pub const NO_COMPILABLE_CAVEAT: &str = "no compilable samples: VulRate is undefined and reported as 0";

pub fn render_report(report: &MetricsReport, format: ReportFormat, label: &str) -> String {
    match format {
        ReportFormat::Json => {
            let mut v = serde_json::to_value(report).expect("report serializes");
            let rounded: serde_json::Map<String, serde_json::Value> =
                Metric::ALL.iter().map(|&m| (m.key().to_string(), report.rounded(m).into())).collect();
            v["rounded"] = rounded.into();
            let mut s = serde_json::to_string_pretty(&v).expect("json");
            s.push('\n');
            s
        }
        ReportFormat::Markdown => {
            let mut s = String::new();
            let titles: Vec<&str> = Metric::ALL.iter().map(|m| m.title()).collect();
            let _ = writeln!(s, "| Model | {} |", titles.join(" | "));
            let _ = writeln!(s, "|---|{}", "---:|".repeat(titles.len()));
            let values: Vec<String> = Metric::ALL.iter().map(|&m| report.rounded(m)).collect();
            let _ = writeln!(s, "| {} | {} |", label, values.join(" | "));
            let _ = writeln!(
                s,
                "\nSamples: {} total, {} compiled, {} vulnerable, {} functional, {} meeting all criteria.",
                report.n_total, report.n_compiled, report.n_vulnerable, report.n_functional, report.n_full
            );
            if report.no_compilable_samples {
                let _ = writeln!(s, "\n> Note: {NO_COMPILABLE_CAVEAT}.");
            }
            s
        }
    }
}

/// Verdicts with the given counts, for tests and demos.
pub fn synthetic_verdicts(n_total: usize, n_compiled: usize, n_vulnerable: usize, n_functional: usize, n_full: usize) -> Vec<SampleVerdict> {
    assert!(n_compiled <= n_total && n_vulnerable <= n_compiled && n_full <= n_functional && n_functional <= n_compiled);
    assert!(n_functional - n_full <= n_vulnerable && n_full <= n_compiled - n_vulnerable);
    (0..n_total)
        .map(|i| {
            let compiled = i < n_compiled;
            // Secure samples first, so the functional-and-secure ones are [0, n_full).
            let vulnerable = i >= n_compiled - n_vulnerable;
            let functional = i < n_full || (vulnerable && i < n_compiled - n_vulnerable + (n_functional - n_full));
            SampleVerdict {
                sample_id: format!("s{i:05}"),
                compiled,
                vulnerable: compiled.then_some(vulnerable),
                functional: compiled.then_some(functional),
            }
        })
        .collect()
}

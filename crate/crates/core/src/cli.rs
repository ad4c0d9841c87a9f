//! Command-line surface. Exit codes: 0 clean, 1 findings or failed samples,
//! 2 infrastructure or usage errors.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compile::{SolcCompiler, SolcVersion, DEFAULT_TIMEOUT, SOLC_DIR_ENV};
use crate::data::{self, segment_windows, DEFAULT_STRIDE, DEFAULT_THRESHOLD, MAX_WINDOW};
use crate::grpo::{train_toy, CeiTask, GrpoHyperparams, TrainConfig};
use crate::metrics::{attach_functional, compute_metrics, render_report, ReportFormat, SampleVerdict};
use crate::reward::{parse_weights, preset, RewardConfig, RewardEngine, RewardError};
use crate::sample::GenerationSample;
use crate::scanner::{ScanReport, Scanner, Severity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Outcome {
    Clean = 0,
    Findings = 1,
    Infrastructure = 2,
}

impl From<Outcome> for ExitCode {
    fn from(o: Outcome) -> Self {
        ExitCode::from(o as u8)
    }
}

#[derive(Debug, Parser)]
#[command(name = "contract-rl", version, about = "Reward scoring, scanning, evaluation and toy GRPO training for Solidity generation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = default_jobs())]
    pub jobs: usize,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Args)]
pub struct RewardArgs {
    /// Explicit weights `compile,security,format`.
    #[arg(long, conflicts_with = "preset")]
    pub weights: Option<String>,
    /// Named weight preset.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, value_enum, default_value_t = SeverityArg::Low)]
    pub severity_threshold: SeverityArg,
}

#[derive(Debug, Args)]
pub struct CompilerArgs {
    /// Directory holding `solc-X.Y.Z` binaries.
    #[arg(long, env = SOLC_DIR_ENV)]
    pub solc_dir: Option<PathBuf>,
    /// Per-compilation timeout in seconds.
    #[arg(long, default_value_t = DEFAULT_TIMEOUT.as_secs())]
    pub timeout: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SeverityArg {
    Low,
    Med,
    High,
}

impl From<SeverityArg> for Severity {
    fn from(s: SeverityArg) -> Self {
        match s {
            SeverityArg::Low => Severity::Low,
            SeverityArg::Med => Severity::Med,
            SeverityArg::High => Severity::High,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Markdown,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score a JSONL file of generation samples.
    Score {
        input: PathBuf,
        #[command(flatten)]
        reward: RewardArgs,
        #[command(flatten)]
        compiler: CompilerArgs,
        /// Also fail security when the reasoning waives a protection.
        #[arg(long)]
        reasoning_check: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Compute the corpus metrics from a JSONL verdict file.
    Evaluate {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Markdown)]
        format: FormatArg,
        /// Row label in the markdown table.
        #[arg(long, default_value = "model")]
        label: String,
        /// JSONL of `{sample_id, passed}` from an external test runner.
        #[arg(long)]
        functional: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Scan a Solidity file or directory.
    Scan {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = SeverityArg::Low)]
        severity_threshold: SeverityArg,
        /// Version for rule gating instead of the pragma.
        #[arg(long)]
        solc_version: Option<SolcVersion>,
        /// External findings (JSON array) merged into a single-file scan.
        #[arg(long)]
        external: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Near-duplicate removal over a corpus (JSONL `{id, source}` or a directory of .sol files).
    Dedup {
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        /// JSONL removal log.
        #[arg(long)]
        removed_log: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Split a corpus into overlapping token windows.
    Windows {
        input: PathBuf,
        #[arg(long, default_value_t = MAX_WINDOW)]
        window: usize,
        #[arg(long, default_value_t = DEFAULT_STRIDE)]
        stride: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Train the toy policy on the synthetic checks-effects-interactions task.
    TrainToy {
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        group_size: usize,
        #[arg(long, default_value_t = 4)]
        groups_per_step: usize,
        #[arg(long, default_value_t = 0.2)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.001)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        learning_rate: f64,
        #[arg(long, default_value_t = 4)]
        seq_len: usize,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        #[command(flatten)]
        common: Common,
    },
}

pub fn main_with(args: impl IntoIterator<Item = std::ffi::OsString>) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Outcome::Infrastructure.into() } else { Outcome::Clean.into() };
        }
    };
    match run(cli) {
        Ok(o) => o.into(),
        Err(e) => {
            eprintln!("error: {e:#}");
            Outcome::Infrastructure.into()
        }
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Score { input, reward, compiler, reasoning_check, common } => {
            cmd_score(&input, &reward, &compiler, reasoning_check, &common)
        }
        Command::Evaluate { input, format, label, functional, common } => {
            cmd_evaluate(&input, format, &label, functional.as_deref(), &common)
        }
        Command::Scan { path, severity_threshold, solc_version, external, common } => {
            cmd_scan(&path, severity_threshold.into(), solc_version, external.as_deref(), &common)
        }
        Command::Dedup { input, threshold, removed_log, common } => cmd_dedup(&input, threshold, removed_log.as_deref(), &common),
        Command::Windows { input, window, stride, common } => cmd_windows(&input, window, stride, &common),
        Command::TrainToy { epochs, seed, group_size, groups_per_step, epsilon, beta, learning_rate, seq_len, format, common } => {
            let hp = GrpoHyperparams { epsilon, beta, group_size, learning_rate };
            let cfg = TrainConfig { epochs, groups_per_step, context_order: 1, seed };
            cmd_train_toy(seq_len, &hp, &cfg, format, &common)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().context("building worker pool")
}

pub fn reward_config(args: &RewardArgs) -> Result<RewardConfig<f64>> {
    let cfg = match (&args.weights, &args.preset) {
        (Some(w), _) => parse_weights(w)?,
        (None, Some(p)) => preset(p)?,
        (None, None) => RewardConfig::default(),
    };
    Ok(cfg.with_threshold(args.severity_threshold.into()))
}

#[derive(Debug, Serialize)]
struct LineError {
    line: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    kind: &'static str,
    error: String,
}

fn cmd_score(input: &Path, reward: &RewardArgs, compiler: &CompilerArgs, reasoning_check: bool, common: &Common) -> Result<Outcome> {
    let config = reward_config(reward)?;
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let dir = compiler.solc_dir.clone().unwrap_or_else(crate::compile::default_solc_dir);
    let solc = SolcCompiler::discover(dir)
        .with_timeout(Duration::from_secs(compiler.timeout))
        .with_max_concurrency(common.jobs.max(1));
    let engine = RewardEngine::new(config, &solc).with_reasoning_check(reasoning_check);

    let lines: Vec<(usize, &str)> = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, l)| (i + 1, l)).collect();
    let results: Vec<(String, Outcome)> = pool(common.jobs)?.install(|| {
        lines
            .par_iter()
            .map(|&(line, raw)| {
                let sample: GenerationSample = match serde_json::from_str(raw) {
                    Ok(s) => s,
                    Err(e) => {
                        let err = LineError { line, id: None, kind: "parse", error: e.to_string() };
                        return (serde_json::to_string(&err).expect("json"), Outcome::Findings);
                    }
                };
                match engine.score(&sample) {
                    Ok(b) => (serde_json::to_string(&b).expect("json"), Outcome::Clean),
                    Err(e) => {
                        let (kind, outcome) = if e.is_infrastructure() {
                            ("infrastructure", Outcome::Infrastructure)
                        } else {
                            ("sample", Outcome::Findings)
                        };
                        let err = LineError { line, id: Some(sample.id.clone()), kind, error: e.to_string() };
                        (serde_json::to_string(&err).expect("json"), outcome)
                    }
                }
            })
            .collect()
    });

    let mut out = String::new();
    let mut outcome = Outcome::Clean;
    let (mut failed, mut infra) = (0, 0);
    for (json, o) in &results {
        out.push_str(json);
        out.push('\n');
        outcome = outcome.max(*o);
        failed += usize::from(*o == Outcome::Findings);
        infra += usize::from(*o == Outcome::Infrastructure);
    }
    emit(common.out.as_deref(), &out)?;
    if failed + infra > 0 {
        eprintln!("{} of {} lines failed ({} infrastructure errors)", failed + infra, results.len(), infra);
    }
    Ok(outcome)
}

#[derive(Debug, Deserialize)]
struct FunctionalResult {
    sample_id: String,
    passed: bool,
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}: line {}", path.display(), i + 1)))
        .collect()
}

fn cmd_evaluate(input: &Path, format: FormatArg, label: &str, functional: Option<&Path>, common: &Common) -> Result<Outcome> {
    let mut verdicts: Vec<SampleVerdict> = read_jsonl(input)?;
    for (i, v) in verdicts.iter().enumerate() {
        v.validate().with_context(|| format!("{}: verdict {}", input.display(), i + 1))?;
    }
    if let Some(path) = functional {
        let runner: HashMap<String, bool> =
            read_jsonl::<FunctionalResult>(path)?.into_iter().map(|r| (r.sample_id, r.passed)).collect();
        attach_functional(&mut verdicts, &runner);
    }
    let report = compute_metrics(&verdicts)?;
    let fmt = match format {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Markdown => ReportFormat::Markdown,
        FormatArg::Csv => bail!("evaluate supports json or markdown"),
    };
    emit(common.out.as_deref(), &render_report(&report, fmt, label))?;
    Ok(Outcome::Clean)
}

#[derive(Debug, Serialize)]
struct FileScan<'a> {
    file: String,
    #[serde(flatten)]
    report: &'a ScanReport,
}

fn cmd_scan(path: &Path, threshold: Severity, version: Option<SolcVersion>, external: Option<&Path>, common: &Common) -> Result<Outcome> {
    let scanner = Scanner::new().with_threshold(threshold);
    let files: Vec<(String, String)> = if path.is_dir() {
        data::load_corpus(path)?.into_iter().map(|e| (e.id, e.source)).collect()
    } else {
        let src = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        vec![(path.display().to_string(), src)]
    };
    if external.is_some() && files.len() != 1 {
        bail!("--external requires a single file");
    }
    let reports: Vec<ScanReport> = pool(common.jobs)?.install(|| {
        files
            .par_iter()
            .map(|(_, src)| match version {
                Some(v) => scanner.scan(src, v),
                None => scanner.scan_source(src),
            })
            .collect()
    });
    let reports = match external {
        Some(ext) => {
            let json = fs::read_to_string(ext).with_context(|| format!("reading {}", ext.display()))?;
            vec![scanner.merge_external(&files[0].1, &reports[0], &json)?]
        }
        None => reports,
    };
    let mut out = String::new();
    let mut outcome = Outcome::Clean;
    for ((file, _), report) in files.iter().zip(&reports) {
        out.push_str(&serde_json::to_string(&FileScan { file: file.clone(), report })?);
        out.push('\n');
        if !report.secure {
            outcome = Outcome::Findings;
        }
    }
    emit(common.out.as_deref(), &out)?;
    Ok(outcome)
}

fn cmd_dedup(input: &Path, threshold: f64, removed_log: Option<&Path>, common: &Common) -> Result<Outcome> {
    let corpus = data::load_corpus(input)?;
    let streams: Vec<_> = pool(common.jobs)?.install(|| corpus.par_iter().map(|e| e.tokens()).collect());
    let outcome = pool(common.jobs)?.install(|| data::dedup(&streams, threshold))?;
    let mut out = String::new();
    for &i in &outcome.kept {
        out.push_str(&serde_json::to_string(&corpus[i])?);
        out.push('\n');
    }
    emit(common.out.as_deref(), &out)?;
    if let Some(p) = removed_log {
        let mut log = String::new();
        for r in &outcome.removed {
            log.push_str(&serde_json::to_string(r)?);
            log.push('\n');
        }
        fs::write(p, log).with_context(|| format!("writing {}", p.display()))?;
    }
    eprintln!("kept {} of {} ({} removed)", outcome.kept.len(), corpus.len(), outcome.removed.len());
    Ok(Outcome::Clean)
}

fn cmd_windows(input: &Path, window: usize, stride: usize, common: &Common) -> Result<Outcome> {
    let corpus = data::load_corpus(input)?;
    let mut out = String::new();
    for e in &corpus {
        for w in segment_windows(&e.tokens(), window, stride)? {
            out.push_str(&serde_json::to_string(&w)?);
            out.push('\n');
        }
    }
    emit(common.out.as_deref(), &out)?;
    Ok(Outcome::Clean)
}

fn cmd_train_toy(seq_len: usize, hp: &GrpoHyperparams<f64>, cfg: &TrainConfig, format: FormatArg, common: &Common) -> Result<Outcome> {
    let env = CeiTask::new(seq_len);
    let (_, curve) = pool(common.jobs)?.install(|| train_toy(&env, hp, cfg))?;
    let text = match format {
        FormatArg::Csv => curve.to_csv(),
        FormatArg::Json => curve.to_json() + "\n",
        FormatArg::Markdown => bail!("train-toy supports csv or json"),
    };
    emit(common.out.as_deref(), &text)?;
    Ok(Outcome::Clean)
}

impl From<RewardError> for Outcome {
    fn from(e: RewardError) -> Self {
        if e.is_infrastructure() {
            Outcome::Infrastructure
        } else {
            Outcome::Findings
        }
    }
}

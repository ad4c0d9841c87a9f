//! solc subprocess backend speaking `--standard-json`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Arc, Condvar, LazyLock, Mutex};
use std::time::{Duration, Instant};

use regex::Regex;
use serde::Deserialize;
use serde_json::json;
use wait_timeout::ChildExt;

use super::{CompileBackend, CompileError, CompileResult, Diagnostic, DiagnosticSeverity, SolcVersion, VersionConstraint};
use crate::solidity::LineIndex;

/// Environment variable naming the compiler-binaries directory.
pub const SOLC_DIR_ENV: &str = "CONTRACT_RL_SOLC_DIR";

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

const SOURCE_NAME: &str = "Contract.sol";

static VERSIONED_NAME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^solc[-_]v?(\d+\.\d+\.\d+)").unwrap());
static VERSION_IN_TEXT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(\d+\.\d+\.\d+)").unwrap());

/// `$CONTRACT_RL_SOLC_DIR`, else `$HOME/.contract-rl/solc`.
pub fn default_solc_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os(SOLC_DIR_ENV) {
        return PathBuf::from(dir);
    }
    let home = std::env::var_os("HOME").map(PathBuf::from).unwrap_or_default();
    home.join(".contract-rl").join("solc")
}

struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// Compiler binaries discovered in a directory, selected per constraint.
///
/// Recognized layouts: `solc-0.8.26` style files directly in the directory or
/// one level down (`artifacts/solc-0.8.26/solc-0.8.26`), plus unversioned
/// `solc`/`solcjs` binaries whose `--version` output is queried.
pub struct SolcCompiler {
    dir: PathBuf,
    binaries: Vec<(SolcVersion, PathBuf)>,
    timeout: Duration,
    slots: Arc<Slots>,
}

impl std::fmt::Debug for SolcCompiler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolcCompiler")
            .field("dir", &self.dir)
            .field("binaries", &self.binaries)
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl SolcCompiler {
    pub fn discover(dir: impl Into<PathBuf>) -> Self {
        let dir = dir.into();
        let mut binaries = Vec::new();
        collect_binaries(&dir, 0, &mut binaries);
        binaries.sort();
        binaries.dedup_by_key(|(v, _)| *v);
        Self {
            dir,
            binaries,
            timeout: DEFAULT_TIMEOUT,
            slots: Arc::new(Slots { free: Mutex::new(default_parallelism()), cv: Condvar::new() }),
        }
    }

    /// Discovers from [`default_solc_dir`].
    pub fn from_env() -> Self {
        Self::discover(default_solc_dir())
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Upper bound on concurrently running compiler processes.
    pub fn with_max_concurrency(self, n: usize) -> Self {
        *self.slots.free.lock().unwrap() = n.max(1);
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn binaries(&self) -> &[(SolcVersion, PathBuf)] {
        &self.binaries
    }

    fn binary_for(&self, constraint: &VersionConstraint) -> Result<(SolcVersion, &Path), CompileError> {
        self.binaries
            .iter()
            .rev()
            .find(|(v, _)| constraint.matches(*v))
            .map(|(v, p)| (*v, p.as_path()))
            .ok_or_else(|| CompileError::Unavailable {
                constraint: constraint.to_string(),
                searched: self.dir.display().to_string(),
            })
    }

    fn run(&self, binary: &Path, input: &[u8]) -> Result<Option<(bool, String)>, CompileError> {
        let _slot = self.slots.acquire();
        let work = tempfile::tempdir().map_err(|e| CompileError::Invocation(e.to_string()))?;
        let mut child = Command::new(binary)
            .arg("--standard-json")
            .current_dir(work.path())
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| CompileError::Invocation(format!("{}: {e}", binary.display())))?;

        let mut stdin = child.stdin.take().expect("piped stdin");
        let input = input.to_vec();
        let writer = std::thread::spawn(move || {
            let _ = stdin.write_all(&input);
        });
        let mut stdout = child.stdout.take().expect("piped stdout");
        let reader = std::thread::spawn(move || {
            let mut buf = String::new();
            let _ = stdout.read_to_string(&mut buf);
            buf
        });
        let mut stderr = child.stderr.take().expect("piped stderr");
        let err_reader = std::thread::spawn(move || {
            let mut buf = String::new();
            let _ = stderr.read_to_string(&mut buf);
            buf
        });

        let status = child.wait_timeout(self.timeout).map_err(|e| CompileError::Invocation(e.to_string()))?;
        let Some(status) = status else {
            let _ = child.kill();
            let _ = child.wait();
            let _ = writer.join();
            return Ok(None);
        };
        let _ = writer.join();
        let out = reader.join().unwrap_or_default();
        let err = err_reader.join().unwrap_or_default();
        if !status.success() && json_start(&out).is_none() {
            return Err(CompileError::Invocation(format!("solc exited with {status}: {}", err.trim())));
        }
        Ok(Some((status.success(), out)))
    }
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn collect_binaries(dir: &Path, depth: usize, out: &mut Vec<(SolcVersion, PathBuf)>) {
    let Ok(entries) = std::fs::read_dir(dir) else {
        return;
    };
    let mut entries: Vec<_> = entries.flatten().map(|e| e.path()).collect();
    entries.sort();
    for path in entries {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("").to_string();
        if path.is_dir() {
            if depth < 2 {
                collect_binaries(&path, depth + 1, out);
            }
            continue;
        }
        if let Some(c) = VERSIONED_NAME.captures(&name) {
            if let Ok(v) = c[1].parse() {
                out.push((v, path));
            }
        } else if name == "solc" || name == "solcjs" {
            if let Some(v) = query_version(&path) {
                out.push((v, path));
            }
        }
    }
}

fn query_version(path: &Path) -> Option<SolcVersion> {
    let out = Command::new(path).arg("--version").stdin(Stdio::null()).output().ok()?;
    let text = String::from_utf8_lossy(&out.stdout);
    VERSION_IN_TEXT.captures(&text)?[1].parse().ok()
}

/// Some wrappers (solcjs) print banner lines before the JSON document.
fn json_start(stdout: &str) -> Option<usize> {
    if stdout.trim_start().starts_with('{') {
        return Some(stdout.len() - stdout.trim_start().len());
    }
    stdout.match_indices("\n{").next().map(|(i, _)| i + 1)
}

#[derive(Deserialize)]
struct StandardOutput {
    #[serde(default)]
    errors: Vec<StandardError>,
}

#[derive(Deserialize)]
struct StandardError {
    severity: String,
    message: String,
    #[serde(default, rename = "sourceLocation")]
    source_location: Option<SourceLocation>,
}

#[derive(Deserialize)]
struct SourceLocation {
    start: i64,
}

fn standard_input(source: &str) -> Vec<u8> {
    let input = json!({
        "language": "Solidity",
        "sources": { SOURCE_NAME: { "content": source } },
        "settings": { "outputSelection": { "*": { "*": [], "": [] } } }
    });
    serde_json::to_vec(&input).expect("static json")
}

/// Maps solc's `errors` array onto diagnostics.
pub(crate) fn parse_standard_output(source: &str, stdout: &str) -> Result<Vec<Diagnostic>, CompileError> {
    let start = json_start(stdout).ok_or_else(|| CompileError::Invocation("no JSON on compiler stdout".into()))?;
    let parsed: StandardOutput = serde_json::from_str(stdout[start..].trim())
        .map_err(|e| CompileError::Invocation(format!("malformed compiler output: {e}")))?;
    let lines = LineIndex::new(source);
    Ok(parsed
        .errors
        .into_iter()
        .map(|e| Diagnostic {
            severity: match e.severity.as_str() {
                "error" => DiagnosticSeverity::Error,
                "warning" => DiagnosticSeverity::Warning,
                _ => DiagnosticSeverity::Info,
            },
            line: e
                .source_location
                .filter(|l| l.start >= 0)
                .map(|l| lines.line_of(l.start as usize)),
            message: e.message,
        })
        .collect())
}

impl CompileBackend for SolcCompiler {
    fn installed_versions(&self) -> Vec<SolcVersion> {
        self.binaries.iter().map(|(v, _)| *v).collect()
    }

    fn compile(&self, source: &str, constraint: &VersionConstraint) -> Result<CompileResult, CompileError> {
        let (version, binary) = self.binary_for(constraint)?;
        let started = Instant::now();
        let outcome = self.run(binary, &standard_input(source))?;
        let duration_ms = started.elapsed().as_millis() as u64;
        let Some((exit_ok, stdout)) = outcome else {
            return Ok(CompileResult {
                success: false,
                compiler_version: version.to_string(),
                diagnostics: vec![Diagnostic {
                    severity: DiagnosticSeverity::Error,
                    line: None,
                    message: "timeout".into(),
                }],
                duration_ms,
            });
        };
        let diagnostics = parse_standard_output(source, &stdout)?;
        let success = exit_ok && !diagnostics.iter().any(|d| d.severity == DiagnosticSeverity::Error);
        Ok(CompileResult { success, compiler_version: version.to_string(), diagnostics, duration_ms })
    }

    fn resolve(&self, constraint: &VersionConstraint) -> Result<SolcVersion, CompileError> {
        self.binary_for(constraint).map(|(v, _)| v)
    }
}

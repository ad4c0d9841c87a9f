//! Dataset construction: tokenization, training windows, near-duplicate
//! removal, documentation cleaning and instruction assembly.

mod dedup;
mod doc;
mod instruction;
mod tokenize;
mod windows;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dedup::{dedup, jaccard_similarity, DedupOutcome, Removal, DEFAULT_THRESHOLD};
pub use doc::{clean_doc, DocCleaner, DEFAULT_BOILERPLATE};
pub use instruction::{build_instruction, describe_from_name, prepare_description, SamplePair, TextTransform};
pub use tokenize::{tokenize, TokenStream};
pub use windows::{segment_windows, CodeWindow, DEFAULT_STRIDE, MAX_WINDOW};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid window parameters: {0}")]
    InvalidWindow(String),
    #[error("threshold must be in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// One corpus document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub source: String,
}

impl CorpusEntry {
    pub fn tokens(&self) -> TokenStream {
        TokenStream::from_source(self.id.clone(), &self.source)
    }
}

/// Reads a JSONL file of `{id, source}` objects, or every `.sol` file under a
/// directory (sorted by path, id = relative path).
pub fn load_corpus(path: &Path) -> Result<Vec<CorpusEntry>, DataError> {
    let io = |e| DataError::Io { path: path.display().to_string(), source: e };
    if path.is_dir() {
        let mut files = Vec::new();
        collect_sol(path, &mut files).map_err(io)?;
        files.sort();
        return files
            .into_iter()
            .map(|f| {
                let source = fs::read_to_string(&f).map_err(|e| DataError::Io { path: f.display().to_string(), source: e })?;
                let id = f.strip_prefix(path).unwrap_or(&f).to_string_lossy().replace('\\', "/");
                Ok(CorpusEntry { id, source })
            })
            .collect();
    }
    let text = fs::read_to_string(path).map_err(io)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DataError::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn collect_sol(dir: &Path, out: &mut Vec<std::path::PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect_sol(&p, out)?;
        } else if p.extension().is_some_and(|e| e == "sol") {
            out.push(p);
        }
    }
    Ok(())
}

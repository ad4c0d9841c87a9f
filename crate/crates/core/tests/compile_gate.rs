use std::path::PathBuf;

use contract_rl::compile::{default_solc_dir, CompileBackend, CompileError, SolcCompiler, VersionConstraint};

fn fixture(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/compile").join(name);
    std::fs::read_to_string(p).unwrap()
}

fn installed() -> Option<SolcCompiler> {
    let c = SolcCompiler::discover(default_solc_dir());
    let caret8: VersionConstraint = "^0.8.0".parse().unwrap();
    if c.resolve(&caret8).is_ok() {
        Some(c)
    } else {
        eprintln!("no solc ^0.8 installed under {}; skipping", default_solc_dir().display());
        None
    }
}

#[test]
fn valid_fixture_compiles() {
    let Some(c) = installed() else { return };
    let r = c.compile(&fixture("minimal_valid.sol"), &"^0.8.0".parse().unwrap()).unwrap();
    assert!(r.success, "{:?}", r.diagnostics);
    assert_eq!(r.score(), 1);
    assert!(r.compiler_version.starts_with("0.8."));
}

#[test]
fn syntax_error_reports_line() {
    let Some(c) = installed() else { return };
    let r = c.compile(&fixture("syntax_error.sol"), &"^0.8.0".parse().unwrap()).unwrap();
    assert!(!r.success);
    assert_eq!(r.score(), 0);
    assert!(r.errors().any(|d| d.line.is_some_and(|l| (8..=9).contains(&l))), "{:?}", r.diagnostics);
}

#[test]
fn empty_dir_is_unavailable() {
    let dir = tempfile::tempdir().unwrap();
    let c = SolcCompiler::discover(dir.path());
    let err = c.compile(&fixture("minimal_valid.sol"), &"^0.8.0".parse().unwrap()).unwrap_err();
    assert!(matches!(err, CompileError::Unavailable { .. }));
    assert!(err.is_infrastructure());
    assert!(err.to_string().starts_with("compiler unavailable"));
}

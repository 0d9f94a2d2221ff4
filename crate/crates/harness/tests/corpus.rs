use std::path::Path;

use mustcall_harness::corpus::{bundled_corpus, load_case, run_corpus, CaseError, Mode};

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const LEAK: &str = "class A {\n  void m() {\n    Socket s = new Socket();\n  }\n}\n";

#[test]
fn bundled_corpus_passes() {
    let summary = run_corpus(&bundled_corpus());
    assert!(summary.passed(), "{summary}");
    assert!(summary.outcomes.len() >= 20);
}

#[test]
fn mismatches_are_listed_both_ways() {
    let root = tempfile::tempdir().unwrap();
    let case = root.path().join("wrong");
    std::fs::create_dir(&case).unwrap();
    write(&case, "a.moo", LEAK);
    write(&case, "expected.json", r#"{"reports":[{"file":"a.moo","line":4,"kind":"ObjectCreation"}]}"#);
    let summary = run_corpus(root.path());
    assert!(!summary.passed());
    let o = &summary.outcomes[0];
    assert_eq!(o.missing[0].line, 4);
    assert_eq!(o.unexpected[0].line, 3);
    let text = summary.to_string();
    assert!(text.contains("FAIL wrong") && text.contains("- a.moo:4 ObjectCreation") && text.contains("+ a.moo:3 ObjectCreation"), "{text}");
}

#[test]
fn mode_defaults_to_full_and_overlays_load() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.moo", LEAK);
    write(dir.path(), "expected.json", r#"{"reports":[{"file":"a.moo","line":3,"kind":"ObjectCreation"}]}"#);
    write(dir.path(), "x.rmspec", "# nothing but a comment\n");
    let c = load_case(dir.path()).unwrap();
    assert_eq!(c.mode, Mode::Full);
    assert!(c.overlay.is_empty());
    assert_eq!(c.files[0].path, "a.moo");
}

#[test]
fn malformed_cases_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.moo", LEAK);
    assert!(matches!(load_case(dir.path()), Err(CaseError::MissingExpected(_))));
    let dup = r#"{"reports":[{"file":"a.moo","line":3,"kind":"ObjectCreation"},{"file":"a.moo","line":3,"kind":"ObjectCreation"}]}"#;
    write(dir.path(), "expected.json", dup);
    assert!(matches!(load_case(dir.path()), Err(CaseError::Duplicate { .. })));
    write(dir.path(), "expected.json", r#"{"reports":[]}"#);
    write(dir.path(), "bad.rmspec", "lineNo=\"x\"\n");
    assert!(matches!(load_case(dir.path()), Err(CaseError::Overlay { .. })));
}

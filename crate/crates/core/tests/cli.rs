use std::path::Path;
use std::process::{Command, Output};

const LEAKY: &str = "class A {\n  void m(bool c) {\n    Socket a = new Socket();\n    if (c) { a.Close(); }\n  }\n}\n";
const CLEAN: &str = "class B {\n  void m() {\n    Socket a = new Socket();\n    a.Dispose();\n  }\n}\n";
const TRANSFER: &str = "class P {\n  void close(Socket s) { s.Dispose(); }\n  void m() { Socket x = new Socket(); close(x); }\n}\n";

fn check(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mustcall-check"))
        .args(args)
        .current_dir(dir)
        .env("MUSTCALL_NO_COLOR", "1")
        .output()
        .expect("binary runs")
}

fn workdir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("leaky.moo"), LEAKY).unwrap();
    std::fs::write(dir.path().join("clean.moo"), CLEAN).unwrap();
    std::fs::write(dir.path().join("transfer.moo"), TRANSFER).unwrap();
    std::fs::write(dir.path().join("bad.moo"), "class {").unwrap();
    std::fs::write(
        dir.path().join("transfer.rmspec"),
        "fileName=\"transfer.moo\" and lineNo=\"2\" and elementType=\"Parameter\" and elementName=\"s\" and annotation=\"Owning\"\n",
    )
    .unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn exit_codes_follow_contract() {
    let dir = workdir();
    assert_eq!(check(&["clean.moo"], dir.path()).status.code(), Some(0));
    assert_eq!(check(&["leaky.moo"], dir.path()).status.code(), Some(1));
    assert_eq!(check(&["missing.moo"], dir.path()).status.code(), Some(2));
    assert_eq!(check(&[], dir.path()).status.code(), Some(2));
    assert_eq!(check(&["--format", "yaml", "clean.moo"], dir.path()).status.code(), Some(2));
}

#[test]
fn text_report_names_file_line_and_kind() {
    let dir = workdir();
    let out = stdout(&check(&["leaky.moo"], dir.path()));
    assert_eq!(
        out,
        "leaky.moo:3: warning[resource-leak/ObjectCreation]: resource of type Socket may not be released on all paths\n1 warning\n"
    );
}

#[test]
fn json_is_stable_and_parseable() {
    let dir = workdir();
    let a = check(&["--format", "json", "leaky.moo", "clean.moo"], dir.path());
    let b = check(&["--format", "json", "leaky.moo", "clean.moo"], dir.path());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["reports"].as_array().unwrap().len(), 1);
    assert_eq!(v["reports"][0]["line"], 3);
    assert_eq!(v["stats"]["sources"]["ObjectCreation"], 2);
}

#[test]
fn overlay_supplies_ownership() {
    let dir = workdir();
    assert_eq!(check(&["transfer.moo"], dir.path()).status.code(), Some(1));
    assert_eq!(check(&["--specs", "transfer.rmspec", "transfer.moo"], dir.path()).status.code(), Some(0));
}

#[test]
fn naive_mode_misses_transfer() {
    let dir = workdir();
    let o = check(&["--naive", "--specs", "transfer.rmspec", "transfer.moo"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn strict_mode_rejects_parse_errors() {
    let dir = workdir();
    let lenient = check(&["bad.moo", "clean.moo"], dir.path());
    assert_eq!(lenient.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&lenient.stderr).contains("bad.moo:1:"));
    assert_eq!(check(&["--strict", "bad.moo", "clean.moo"], dir.path()).status.code(), Some(2));
}

#[test]
fn dumps_go_to_stderr() {
    let dir = workdir();
    let o = check(&["--dump-cfg", "--dump-aliases", "clean.moo"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("digraph"), "{err}");
    assert!(err.contains("aliases of B.m"), "{err}");
    assert_eq!(stdout(&o), "0 warnings\n");
}

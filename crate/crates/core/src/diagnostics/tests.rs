use super::*;

const FIG1: &str = "class A { void m(bool c) {\n    Socket a = new Socket();\n    if (c) { int x = 1; } else { a.Close(); }\n} }";

fn result_of(name: &str, src: &str) -> RunResult {
    analyze(&[SourceUnit::new(name, src)], &[], CheckMode::Full, false).unwrap()
}

#[test]
fn overlay_line_parses() {
    let text = r#"fileName="RLCTests/SimpleEg.cs" and lineNo="17" and elementType="Parameter" and elementName="s" and annotation="Owning""#;
    let e = &parse_overlay(text).unwrap()[0];
    assert_eq!(e.file_name, "RLCTests/SimpleEg.cs");
    assert_eq!(e.line_no, 17);
    assert_eq!(e.element_type, ElementKind::Parameter);
    assert_eq!(e.element_name, "s");
    assert_eq!(e.annotation, AttrKind::Owning);
    assert!(e.args.is_empty());
    assert_eq!(e.to_string(), text);
}

#[test]
fn overlay_args_and_comments() {
    let text = "# header\n\n  fileName=\"a.moo\" and lineNo=\"3\" and elementType=\"Method\" and elementName=\"Dispose\" and annotation=\"EnsuresCalledMethods\" and args=\"socket, Dispose\"\n";
    let v = parse_overlay(text).unwrap();
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].args, vec!["socket", "Dispose"]);
    assert_eq!(v[0].source_line, 3);
}

#[test]
fn overlay_missing_clause_is_named() {
    let text = "fileName=\"a.moo\" and lineNo=\"3\" and elementType=\"Field\" and annotation=\"Owning\"";
    let e = parse_overlay(text).unwrap_err();
    assert_eq!(e.line, 1);
    assert!(e.message.contains("elementName"), "{e}");
}

#[test]
fn overlay_rejects_bad_lines() {
    let bad = [
        "fileName=\"a\" and lineNo=\"0\" and elementType=\"Field\" and elementName=\"f\" and annotation=\"Owning\"",
        "fileName=\"a\" and lineNo=\"1\" and elementType=\"Local\" and elementName=\"f\" and annotation=\"Owning\"",
        "fileName=\"a\" and lineNo=\"1\" and elementType=\"Field\" and elementName=\"f\" and annotation=\"Closeable\"",
        "fileName=\"a\" and lineNo=\"1\" and elementType=\"Type\" and elementName=\"T\" and annotation=\"MustCall\"",
        "fileName=\"a\" lineNo=\"1\"",
        "fileName=\"a\" and fileName=\"b\"",
        "fileName=a",
        "color=\"red\"",
    ];
    for line in bad {
        let text = format!("# ok\n{line}");
        let e = parse_overlay(&text).unwrap_err();
        assert_eq!(e.line, 2, "{line}");
    }
}

#[test]
fn fig1_text_output() {
    let r = result_of("fig1.moo", FIG1);
    assert_eq!(r.exit_code(), 1);
    let text = render_text(&r, false);
    assert_eq!(
        text,
        "fig1.moo:2: warning[resource-leak/ObjectCreation]: resource of type Socket may not be released on all paths\n1 warning\n"
    );
    assert!(render_text(&r, true).contains("\x1b["));
}

#[test]
fn empty_result_renders_summary_only() {
    let r = RunResult::default();
    assert_eq!(render_text(&r, false), "0 warnings\n");
    assert_eq!(r.exit_code(), 0);
    let json = render_json(&r);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["version"], 1);
    assert_eq!(v["reports"], serde_json::json!([]));
    assert!(v["stats"].is_object());
}

#[test]
fn reports_in_one_file_are_sorted_by_line() {
    let src = "class A {\n void m() { Socket a = new Socket(); }\n void n() { Socket b = new Socket(); }\n}";
    let r = result_of("a.moo", src);
    let lines: Vec<u32> = r.reports.iter().map(|r| r.line).collect();
    assert_eq!(lines, vec![2, 3]);
}

#[test]
fn json_round_trips() {
    let r = result_of("fig1.moo", FIG1);
    let json = render_json(&r);
    let (reports, stats) = parse_json(&json).unwrap();
    assert_eq!(reports, r.reports);
    assert_eq!(stats, r.stats);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["reports"][0]["kind"], "ObjectCreation");
    assert!(v["reports"][0]["witness"].is_array());
    assert_eq!(render_json(&result_of("fig1.moo", FIG1)), json);
}

#[test]
fn attribute_statistics_exclude_prelude() {
    let src = "[MustCall(Dispose)]
class Container : IDisposable {
    [Owning] Socket socket;
    public Container() { socket = new Socket(); }
    [EnsuresCalledMethods(socket, Dispose)]
    public void Dispose() { socket.Dispose(); }
}";
    let r = result_of("c.moo", src);
    let expected: BTreeMap<String, usize> =
        [("EnsuresCalledMethods", 1), ("MustCall", 1), ("Owning", 1)].into_iter().map(|(k, n)| (k.to_owned(), n)).collect();
    assert_eq!(r.stats.attributes, expected);
}

#[test]
fn parse_errors_are_collected_or_fatal_in_strict_mode() {
    let units = [SourceUnit::new("bad.moo", "class {"), SourceUnit::new("fig1.moo", FIG1)];
    let r = analyze(&units, &[], CheckMode::Full, false).unwrap();
    assert_eq!(r.errors.len(), 1);
    assert_eq!(r.errors[0].file, "bad.moo");
    assert_eq!(r.reports.len(), 1);
    assert!(matches!(analyze(&units, &[], CheckMode::Full, true), Err(RunError::Strict(_))));
}

#[test]
fn overlay_matches_inline_attributes() {
    let inline = "class P {\n  void closeSocket([Owning] Socket s) { s.Dispose(); }\n  void m() { Socket x = new Socket(); closeSocket(x); }\n}";
    let bare = inline.replace("[Owning] ", "");
    let overlay = parse_overlay(
        "fileName=\"p.moo\" and lineNo=\"2\" and elementType=\"Parameter\" and elementName=\"s\" and annotation=\"Owning\"",
    )
    .unwrap();
    let a = analyze(&[SourceUnit::new("p.moo", inline)], &[], CheckMode::Full, false).unwrap();
    let b = analyze(&[SourceUnit::new("p.moo", bare.clone())], &overlay, CheckMode::Full, false).unwrap();
    assert_eq!(a.reports, b.reports);
    assert_eq!(a.stats, b.stats);
    assert!(b.errors.is_empty());
    let plain = analyze(&[SourceUnit::new("p.moo", bare)], &[], CheckMode::Full, false).unwrap();
    assert_ne!(plain.reports, a.reports);
}

#[test]
fn missing_file_is_an_error() {
    let config = Config { files: vec!["/nonexistent/x.moo".into()], ..Config::default() };
    assert!(matches!(run(&config), Err(RunError::Io { .. })));
    assert!(matches!(run(&Config::default()), Err(RunError::NoInput)));
}

//! Source-to-source rewrites used by the metamorphic checks. All of them keep
//! line numbers, and all but the using rewrite keep columns.

use std::collections::{BTreeMap, BTreeSet};

use mustcall_core::diagnostics::build;
use mustcall_core::frontend::SourceUnit;
use mustcall_core::leakcheck::{CheckMode, MethodAnalysis, SinkKind};
use mustcall_core::model::{ElementKind, ElementRef, OverlayEntry, Origin, SemanticModel};
use thiserror::Error;

/// Blanks every bracketed attribute list, keeping newlines.
pub fn strip_attributes(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut depth = 0usize;
    let mut in_string = false;
    for c in text.chars() {
        if in_string {
            out.push(c);
            in_string = c != '"';
            continue;
        }
        match c {
            '"' if depth == 0 => {
                in_string = true;
                out.push(c);
            }
            '[' => {
                depth += 1;
                out.push(' ');
            }
            ']' if depth > 0 => {
                depth -= 1;
                out.push(' ');
            }
            '\n' => out.push('\n'),
            _ if depth > 0 => out.push(' '),
            _ => out.push(c),
        }
    }
    out
}

/// Overlay entries equivalent to the in-source attributes of `model`.
pub fn overlay_from_model(model: &SemanticModel) -> Vec<OverlayEntry> {
    let mut out = Vec::new();
    for p in model.provenance.iter().filter(|p| p.origin == Origin::Source) {
        let (file, line, kind, name) = match &p.element {
            ElementRef::Type(t) => {
                let Some(ty) = model.type_info(t) else { continue };
                (ty.file.clone(), ty.span.line, ElementKind::Type, ty.name.clone())
            }
            ElementRef::Field { owner, name } => {
                let Some(ty) = model.type_info(owner) else { continue };
                let Some(f) = ty.field(name) else { continue };
                (ty.file.clone(), f.span.line, ElementKind::Field, f.name.clone())
            }
            ElementRef::Method(id) => {
                let m = model.method(*id);
                (m.file.clone(), m.span.line, ElementKind::Method, m.name.clone())
            }
            ElementRef::Return(id) => {
                let m = model.method(*id);
                (m.file.clone(), m.span.line, ElementKind::ReturnType, m.name.clone())
            }
            ElementRef::Param(id, i) => {
                let m = model.method(*id);
                let param = &m.params[*i];
                (m.file.clone(), param.span.line, ElementKind::Parameter, param.name.clone())
            }
        };
        out.push(OverlayEntry {
            file_name: file,
            line_no: line,
            element_type: kind,
            element_name: name,
            annotation: p.attr.kind,
            args: p.attr.args.clone(),
            source_line: out.len() as u32 + 1,
        });
    }
    out
}

/// Moves every in-source attribute of `units` into an overlay. Returns the
/// stripped units and the overlay.
pub fn externalize_attributes(units: &[SourceUnit]) -> (Vec<SourceUnit>, Vec<OverlayEntry>) {
    let (model, _) = build(units, &[]);
    let overlay = overlay_from_model(&model);
    let stripped = units.iter().map(|u| SourceUnit::new(u.path.clone(), strip_attributes(&u.text))).collect();
    (stripped, overlay)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("unbalanced `{0}` at byte {1}")]
    Unbalanced(char, usize),
    #[error("cannot find the variable declared by the using statement at byte {0}")]
    NoVariable(usize),
    #[error("using statement at byte {0} needs a braced body")]
    UnbracedBody(usize),
}

fn matching(text: &[u8], open: usize) -> Result<usize, RewriteError> {
    let (o, c) = (text[open], if text[open] == b'(' { b')' } else { b'}' });
    let mut depth = 0;
    let mut in_string = false;
    for (i, &b) in text.iter().enumerate().skip(open) {
        if in_string {
            in_string = b != b'"';
            continue;
        }
        if b == b'"' {
            in_string = true;
        } else if b == o {
            depth += 1;
        } else if b == c {
            depth -= 1;
            if depth == 0 {
                return Ok(i);
            }
        }
    }
    Err(RewriteError::Unbalanced(o as char, open))
}

fn find_using(text: &str) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut from = 0;
    while let Some(i) = text[from..].find("using (").map(|i| i + from) {
        let boundary = i == 0 || !(bytes[i - 1].is_ascii_alphanumeric() || bytes[i - 1] == b'_');
        if boundary {
            return Some(i);
        }
        from = i + 1;
    }
    None
}

/// Rewrites `using (T v = e) { S }` into
/// `{ T v = e; try { S } finally { v.Dispose(); } }` without moving any
/// line. Columns to the right of the header's closing parenthesis shift.
pub fn desugar_using_text(text: &str) -> Result<String, RewriteError> {
    let mut text = text.to_owned();
    while let Some(at) = find_using(&text) {
        let bytes = text.as_bytes();
        let open = at + "using ".len();
        let close = matching(bytes, open)?;
        let header = &text[open + 1..close];
        let var = header
            .split_once('=')
            .and_then(|(decl, _)| decl.split_whitespace().last())
            .filter(|v| !v.is_empty())
            .ok_or(RewriteError::NoVariable(at))?
            .to_owned();
        let body_start = close + 1 + text[close + 1..].len() - text[close + 1..].trim_start().len();
        if bytes.get(body_start) != Some(&b'{') {
            return Err(RewriteError::UnbracedBody(at));
        }
        let body_end = matching(bytes, body_start)?;
        let mut out = String::with_capacity(text.len() + 48);
        out.push_str(&text[..at]);
        out.push('{');
        out.push_str(&" ".repeat("using (".len() - 1));
        out.push_str(header);
        out.push_str("; try");
        out.push_str(&text[close + 1..=body_end]);
        out.push_str(&format!(" finally {{ {var}.Dispose(); }} }}"));
        out.push_str(&text[body_end + 1..]);
        text = out;
    }
    Ok(text)
}

/// Lines holding a discharging statement (a release call, an ownership
/// transfer, a field store) and no source, per file.
pub fn sink_lines(units: &[SourceUnit]) -> BTreeMap<String, BTreeSet<u32>> {
    let (model, _) = build(units, &[]);
    let mut out: BTreeMap<String, BTreeSet<u32>> = BTreeMap::new();
    for m in model.user_methods() {
        let Some(a) = MethodAnalysis::new(&model, m.id, CheckMode::Full) else { continue };
        let sources: BTreeSet<u32> = a.sources.iter().map(|s| s.span.line).collect();
        let lines = out.entry(m.file.clone()).or_default();
        for s in &a.sinks {
            if matches!(s.kind, SinkKind::NullDischarge | SinkKind::UsingDispose) {
                continue;
            }
            if let Some(span) = a.cfg.node(s.at).span {
                if !sources.contains(&span.line) {
                    lines.insert(span.line);
                }
            }
        }
    }
    out
}

/// Variants of `text` with one of `lines` blanked each. Only lines holding a
/// single non-declaration statement qualify, and only when the previous
/// non-empty line ends a statement or block, since blanking the body of an
/// unbraced branch would change the parse.
pub fn sink_deletions(text: &str, lines: &BTreeSet<u32>) -> Vec<String> {
    let all: Vec<&str> = text.split('\n').collect();
    let mut out = Vec::new();
    let mut prev = "";
    for (i, line) in all.iter().enumerate() {
        let t = line.trim();
        let eligible = lines.contains(&(i as u32 + 1))
            && is_simple_statement(t)
            && (prev.ends_with(';') || prev.ends_with('{') || prev.ends_with('}'));
        if eligible {
            let mut copy: Vec<String> = all.iter().map(|s| s.to_string()).collect();
            copy[i] = String::new();
            out.push(copy.join("\n"));
        }
        if !t.is_empty() {
            prev = t;
        }
    }
    out
}

fn is_simple_statement(t: &str) -> bool {
    if !t.ends_with(';') || t.contains('{') || t.contains('}') || t.matches(';').count() != 1 {
        return false;
    }
    if t.starts_with("return") || t.starts_with("throw") {
        return false;
    }
    // `T x = e;` declares a name later lines may use
    match t.split_once('=') {
        Some((lhs, _)) => lhs.split_whitespace().count() == 1,
        None => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attributes_become_spaces() {
        let src = "[MustCall(Dispose)]\nclass C {\n  void m([Owning] Socket s) { string x = \"[a]\"; }\n}";
        let out = strip_attributes(src);
        assert_eq!(out.len(), src.len());
        assert_eq!(out.lines().count(), src.lines().count());
        assert!(!out.contains("Owning") && !out.contains("MustCall"));
        assert!(out.contains("\"[a]\""));
        assert_eq!(out.find("Socket s"), src.find("Socket s"));
    }

    #[test]
    fn using_rewrite_keeps_lines() {
        let src = "class R { void m() {\n  using (Stream s = new Stream()) {\n    int n = s.Read();\n  }\n} }";
        let out = desugar_using_text(src).unwrap();
        assert_eq!(out.lines().count(), src.lines().count());
        assert!(!out.contains("using"));
        assert!(out.contains("finally { s.Dispose(); } }"));
        assert_eq!(out.lines().nth(1).unwrap(), "  {      Stream s = new Stream(); try {");
    }

    #[test]
    fn nested_using_rewrites_fully() {
        let src = "using (A a = x) { using (B b = y) { } }";
        let out = desugar_using_text(src).unwrap();
        assert!(!out.contains("using"));
        assert_eq!(out.matches("Dispose").count(), 2);
        assert!(matches!(desugar_using_text("using (A a = x) a.M();"), Err(RewriteError::UnbracedBody(0))));
    }

    #[test]
    fn sink_deletion_blanks_one_line() {
        let src = "void m() {\n  s.Close();\n  if (c)\n    t.Dispose();\n  u.Dispose();\n  Socket v = w;\n}";
        let lines: BTreeSet<u32> = (1..=7).collect();
        let out = sink_deletions(src, &lines);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0], "void m() {\n\n  if (c)\n    t.Dispose();\n  u.Dispose();\n  Socket v = w;\n}");
        assert!(out.iter().all(|o| o.lines().count() == src.lines().count()));
        assert!(sink_deletions(src, &BTreeSet::from([2])).len() == 1);
    }

    #[test]
    fn sink_lines_skip_sources() {
        let src = "class P {\n  void close([Owning] Socket s) { s.Dispose(); }\n  void m() {\n    Socket x = new Socket();\n    close(x);\n  }\n}";
        let lines = sink_lines(&[SourceUnit::new("p.moo", src)]);
        // line 2 also holds the owning parameter source
        assert_eq!(lines["p.moo"], BTreeSet::from([5]));
    }
}

//! Pipeline driver, overlay files and report rendering.

pub mod cli;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::{parse_unit, AttrKind, SourceUnit};
use crate::leakcheck::{check_program, CheckMode, LeakReport, ReportKind};
use crate::model::{apply_overlay, build_model, ElementKind, OverlayEntry, SemanticModel};

/// Extension of overlay files.
pub const OVERLAY_EXTENSION: &str = "rmspec";

/// Environment variable that disables ANSI color in text output.
pub const NO_COLOR_ENV: &str = "MUSTCALL_NO_COLOR";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct OverlayParseError {
    pub line: u32,
    pub message: String,
}

const CLAUSES: [&str; 6] = ["fileName", "lineNo", "elementType", "elementName", "annotation", "args"];

/// Parses an overlay file: one entry per line, blank lines and `#` comments
/// ignored.
///
/// ```text
/// fileName="a.moo" and lineNo="17" and elementType="Parameter" and elementName="s" and annotation="Owning"
/// ```
pub fn parse_overlay(text: &str) -> Result<Vec<OverlayEntry>, OverlayParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u32 + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push(parse_overlay_line(trimmed, line).map_err(|message| OverlayParseError { line, message })?);
    }
    Ok(out)
}

fn parse_overlay_line(text: &str, line: u32) -> Result<OverlayEntry, String> {
    let mut clauses: BTreeMap<&str, &str> = BTreeMap::new();
    let mut rest = text;
    loop {
        let (key, after) = rest.split_once('=').ok_or_else(|| format!("expected `key=\"value\"` at `{rest}`"))?;
        let key = key.trim();
        if !CLAUSES.contains(&key) {
            return Err(format!("unknown clause `{key}`"));
        }
        let after = after.trim_start().strip_prefix('"').ok_or_else(|| format!("value of `{key}` must be quoted"))?;
        let (value, after) = after.split_once('"').ok_or_else(|| format!("unterminated value of `{key}`"))?;
        if clauses.insert(key, value).is_some() {
            return Err(format!("duplicate `{key}` clause"));
        }
        let after = after.trim_start();
        if after.is_empty() {
            break;
        }
        rest = after
            .strip_prefix("and")
            .filter(|r| r.starts_with(char::is_whitespace))
            .ok_or_else(|| format!("expected `and` before `{after}`"))?;
    }
    let get = |k: &str| clauses.get(k).copied().ok_or_else(|| format!("missing `{k}` clause"));
    let file_name = get("fileName")?.to_owned();
    let line_no = get("lineNo")?;
    let line_no: u32 = line_no.parse().ok().filter(|&n| n > 0).ok_or_else(|| format!("invalid lineNo `{line_no}`"))?;
    let element_type = get("elementType")?;
    let element_type: ElementKind = element_type.parse().map_err(|()| format!("unknown elementType `{element_type}`"))?;
    let element_name = get("elementName")?.to_owned();
    let annotation = get("annotation")?;
    let annotation: AttrKind = annotation.parse().map_err(|()| format!("unknown annotation `{annotation}`"))?;
    let args: Vec<String> = match clauses.get("args") {
        Some(a) => a.split(',').map(|s| s.trim().to_owned()).collect(),
        None => Vec::new(),
    };
    if args.iter().any(|a| !is_identifier(a)) {
        return Err(format!("invalid args `{}`", clauses["args"]));
    }
    if args.len() != annotation.arity() {
        return Err(format!("{annotation} takes {} argument(s), got {}", annotation.arity(), args.len()));
    }
    Ok(OverlayEntry { file_name, line_no, element_type, element_name, annotation, args, source_line: line })
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_') && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    pub files: Vec<PathBuf>,
    pub specs: Option<PathBuf>,
    pub mode: CheckMode,
    /// Abort on parse, resolution and overlay errors.
    pub strict: bool,
}

/// A parse, resolution or overlay problem in the input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputError {
    pub file: String,
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}: {}", self.file, self.line, self.col, self.message)
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("no input files")]
    NoInput,
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Overlay { path: String, source: OverlayParseError },
    #[error("{} input error(s) in strict mode", .0.len())]
    Strict(Vec<InputError>),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub attributes: BTreeMap<String, usize>,
    pub sinks: BTreeMap<String, usize>,
    pub sources: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunResult {
    pub reports: Vec<LeakReport>,
    pub errors: Vec<InputError>,
    pub stats: Stats,
}

impl RunResult {
    /// 0 when clean, 1 when there is at least one report.
    pub fn exit_code(&self) -> i32 {
        i32::from(!self.reports.is_empty())
    }
}

/// Reads the configured files and runs the pipeline on them.
pub fn run(config: &Config) -> Result<RunResult, RunError> {
    if config.files.is_empty() {
        return Err(RunError::NoInput);
    }
    let read = |p: &PathBuf| {
        std::fs::read_to_string(p).map_err(|source| RunError::Io { path: p.display().to_string(), source })
    };
    let mut units = Vec::new();
    for p in &config.files {
        units.push(SourceUnit::new(p.display().to_string(), read(p)?));
    }
    let overlay = match &config.specs {
        Some(p) => {
            parse_overlay(&read(p)?).map_err(|source| RunError::Overlay { path: p.display().to_string(), source })?
        }
        None => Vec::new(),
    };
    analyze(&units, &overlay, config.mode, config.strict)
}

/// Builds the model for `units` with `overlay` applied.
pub fn build(units: &[SourceUnit], overlay: &[OverlayEntry]) -> (SemanticModel, Vec<InputError>) {
    let mut errors = Vec::new();
    let mut parsed = Vec::new();
    for u in units {
        match parse_unit(u) {
            Ok(cu) => parsed.push(cu),
            Err(e) => {
                let span = e.span();
                errors.push(InputError { file: u.path.clone(), line: span.line, col: span.col, message: e.to_string() });
            }
        }
    }
    let (model, model_errors) = build_model(&parsed);
    let (model, overlay_errors) = apply_overlay(&model, overlay);
    for e in model_errors.into_iter().chain(overlay_errors) {
        errors.push(InputError { file: e.file, line: e.span.line, col: e.span.col, message: e.message });
    }
    (model, errors)
}

/// In-memory pipeline: parse, model, overlay, checks.
pub fn analyze(units: &[SourceUnit], overlay: &[OverlayEntry], mode: CheckMode, strict: bool) -> Result<RunResult, RunError> {
    let (model, errors) = build(units, overlay);
    if strict && !errors.is_empty() {
        return Err(RunError::Strict(errors));
    }
    let (reports, counts) = check_program(&model, mode);
    let stats = Stats {
        attributes: model.attribute_counts().into_iter().map(|(k, n)| (k.to_string(), n)).collect(),
        sinks: counts.sinks.into_iter().map(|(k, n)| (format!("{k:?}"), n)).collect(),
        sources: counts.sources.into_iter().map(|(k, n)| (format!("{k:?}"), n)).collect(),
    };
    Ok(RunResult { reports, errors, stats })
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("1 {word}")
    } else {
        format!("{n} {word}s")
    }
}

/// One line per report plus a summary footer. Witnesses are left out.
pub fn render_text(result: &RunResult, color: bool) -> String {
    let (warn, reset) = if color { ("\x1b[1;33m", "\x1b[0m") } else { ("", "") };
    let mut out = String::new();
    for r in &result.reports {
        let _ = writeln!(out, "{}:{}: {warn}warning{reset}[resource-leak/{}]: {}", r.file, r.line, r.kind, r.message);
    }
    let _ = write!(out, "{}", plural(result.reports.len(), "warning"));
    if !result.errors.is_empty() {
        let _ = write!(out, ", {}", plural(result.errors.len(), "input error"));
    }
    out.push('\n');
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct JsonReport {
    file: String,
    line: u32,
    col: u32,
    kind: ReportKind,
    message: String,
    scope: String,
    witness: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct JsonOutput {
    version: u32,
    reports: Vec<JsonReport>,
    stats: Stats,
}

pub const JSON_VERSION: u32 = 1;

/// Stable JSON document: keys appear in a fixed order and maps are sorted.
pub fn render_json(result: &RunResult) -> String {
    let doc = JsonOutput {
        version: JSON_VERSION,
        reports: result
            .reports
            .iter()
            .map(|r| JsonReport {
                file: r.file.clone(),
                line: r.line,
                col: r.col,
                kind: r.kind,
                message: r.message.clone(),
                scope: r.scope.clone(),
                witness: r.witness.clone(),
            })
            .collect(),
        stats: result.stats.clone(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("report serialization cannot fail");
    s.push('\n');
    s
}

/// Inverse of [`render_json`] for the report list and statistics.
pub fn parse_json(text: &str) -> Result<(Vec<LeakReport>, Stats), serde_json::Error> {
    let doc: JsonOutput = serde_json::from_str(text)?;
    let reports = doc
        .reports
        .into_iter()
        .map(|r| LeakReport {
            file: r.file,
            line: r.line,
            col: r.col,
            kind: r.kind,
            message: r.message,
            scope: r.scope,
            witness: r.witness,
        })
        .collect();
    Ok((reports, doc.stats))
}

#[cfg(test)]
mod tests;

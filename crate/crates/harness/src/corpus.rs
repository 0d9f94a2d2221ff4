//! Golden corpus: one directory per case holding `.moo` files, an optional
//! `.rmspec` overlay and `expected.json`.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use mustcall_core::diagnostics::{analyze, parse_overlay, InputError, OverlayParseError};
use mustcall_core::frontend::SourceUnit;
use mustcall_core::leakcheck::{CheckMode, LeakReport};
use mustcall_core::model::OverlayEntry;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EXPECTED_FILE: &str = "expected.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Full,
    Naive,
}

impl From<Mode> for CheckMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Full => CheckMode::Full,
            Mode::Naive => CheckMode::Naive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExpectedReport {
    pub file: String,
    pub line: u32,
    pub kind: String,
}

impl From<&LeakReport> for ExpectedReport {
    fn from(r: &LeakReport) -> Self {
        ExpectedReport { file: r.file.clone(), line: r.line, kind: r.kind.to_string() }
    }
}

impl fmt::Display for ExpectedReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{} {}", self.file, self.line, self.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedFile {
    pub reports: Vec<ExpectedReport>,
    #[serde(default)]
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusCase {
    pub name: String,
    pub files: Vec<SourceUnit>,
    pub overlay: Vec<OverlayEntry>,
    pub expected: Vec<ExpectedReport>,
    pub mode: Mode,
}

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("{0}: missing {EXPECTED_FILE}")]
    MissingExpected(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Overlay { path: PathBuf, source: OverlayParseError },
    #[error("{path}: duplicate expectation {report}")]
    Duplicate { path: PathBuf, report: ExpectedReport },
    #[error("{0}: no .moo files")]
    NoSources(PathBuf),
}

fn read(path: &Path) -> Result<String, CaseError> {
    std::fs::read_to_string(path).map_err(|source| CaseError::Io { path: path.to_owned(), source })
}

fn entries(dir: &Path) -> Result<Vec<PathBuf>, CaseError> {
    let rd = std::fs::read_dir(dir).map_err(|source| CaseError::Io { path: dir.to_owned(), source })?;
    let mut out = Vec::new();
    for e in rd {
        out.push(e.map_err(|source| CaseError::Io { path: dir.to_owned(), source })?.path());
    }
    out.sort();
    Ok(out)
}

fn has_ext(p: &Path, ext: &str) -> bool {
    p.extension().is_some_and(|e| e == ext)
}

/// Loads one case directory. Source units are named by their file name.
pub fn load_case(dir: &Path) -> Result<CorpusCase, CaseError> {
    let expected_path = dir.join(EXPECTED_FILE);
    if !expected_path.is_file() {
        return Err(CaseError::MissingExpected(dir.to_owned()));
    }
    let expected: ExpectedFile = serde_json::from_str(&read(&expected_path)?)
        .map_err(|source| CaseError::Json { path: expected_path.clone(), source })?;
    let mut seen = BTreeSet::new();
    for r in &expected.reports {
        if !seen.insert(r.clone()) {
            return Err(CaseError::Duplicate { path: expected_path, report: r.clone() });
        }
    }
    let mut files = Vec::new();
    let mut overlay = Vec::new();
    for p in entries(dir)? {
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if has_ext(&p, "moo") {
            files.push(SourceUnit::new(name, read(&p)?));
        } else if has_ext(&p, mustcall_core::diagnostics::OVERLAY_EXTENSION) {
            let text = read(&p)?;
            overlay.extend(parse_overlay(&text).map_err(|source| CaseError::Overlay { path: p.clone(), source })?);
        }
    }
    if files.is_empty() {
        return Err(CaseError::NoSources(dir.to_owned()));
    }
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(CorpusCase { name, files, overlay, expected: expected.reports, mode: expected.mode })
}

/// A case directory that could not be loaded, by name.
pub type LoadFailure = (String, CaseError);

/// Every case directory below `root`, sorted by name. Load failures are
/// returned next to the successfully loaded cases.
pub fn load_corpus(root: &Path) -> Result<(Vec<CorpusCase>, Vec<LoadFailure>), CaseError> {
    let mut cases = Vec::new();
    let mut failures = Vec::new();
    for p in entries(root)?.into_iter().filter(|p| p.is_dir()) {
        match load_case(&p) {
            Ok(c) => cases.push(c),
            Err(e) => failures.push((p.file_name().unwrap_or_default().to_string_lossy().into_owned(), e)),
        }
    }
    Ok((cases, failures))
}

/// Full reports of a case.
pub fn case_reports(case: &CorpusCase) -> (Vec<LeakReport>, Vec<InputError>) {
    match analyze(&case.files, &case.overlay, case.mode.into(), false) {
        Ok(r) => (r.reports, r.errors),
        Err(e) => (Vec::new(), vec![InputError { file: case.name.clone(), line: 0, col: 0, message: e.to_string() }]),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseOutcome {
    pub name: String,
    pub actual: Vec<ExpectedReport>,
    pub missing: Vec<ExpectedReport>,
    pub unexpected: Vec<ExpectedReport>,
    pub errors: Vec<InputError>,
}

impl CaseOutcome {
    pub fn passed(&self) -> bool {
        self.missing.is_empty() && self.unexpected.is_empty() && self.errors.is_empty()
    }
}

pub fn run_case(case: &CorpusCase) -> CaseOutcome {
    let (reports, errors) = case_reports(case);
    let actual: Vec<ExpectedReport> = reports.iter().map(ExpectedReport::from).collect();
    let want: BTreeSet<&ExpectedReport> = case.expected.iter().collect();
    let got: BTreeSet<&ExpectedReport> = actual.iter().collect();
    let missing = want.difference(&got).map(|r| (*r).clone()).collect();
    let mut unexpected: Vec<ExpectedReport> = got.difference(&want).map(|r| (*r).clone()).collect();
    // a repeated actual report is a mismatch too
    if got.len() != actual.len() {
        let mut seen = BTreeSet::new();
        unexpected.extend(actual.iter().filter(|r| !seen.insert(*r)).cloned());
    }
    CaseOutcome { name: case.name.clone(), actual, missing, unexpected, errors }
}

#[derive(Debug, Default)]
pub struct CorpusSummary {
    pub outcomes: Vec<CaseOutcome>,
    pub failures: Vec<LoadFailure>,
}

impl CorpusSummary {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.outcomes.iter().all(CaseOutcome::passed)
    }

    pub fn passed_count(&self) -> usize {
        self.outcomes.iter().filter(|o| o.passed()).count()
    }
}

impl fmt::Display for CorpusSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in &self.outcomes {
            if o.passed() {
                writeln!(f, "ok   {}", o.name)?;
                continue;
            }
            writeln!(f, "FAIL {}", o.name)?;
            for r in &o.missing {
                writeln!(f, "     - {r}")?;
            }
            for r in &o.unexpected {
                writeln!(f, "     + {r}")?;
            }
            for e in &o.errors {
                writeln!(f, "     ! {e}")?;
            }
        }
        for (name, e) in &self.failures {
            writeln!(f, "ERR  {name}: {e}")?;
        }
        write!(
            f,
            "{} of {} case(s) passed",
            self.passed_count(),
            self.outcomes.len() + self.failures.len()
        )
    }
}

/// Runs every case below `root` and diffs actual against expected
/// `(file, line, kind)` triples.
pub fn run_corpus(root: &Path) -> CorpusSummary {
    match load_corpus(root) {
        Ok((cases, failures)) => CorpusSummary { outcomes: cases.iter().map(run_case).collect(), failures },
        Err(e) => CorpusSummary { outcomes: Vec::new(), failures: vec![(root.display().to_string(), e)] },
    }
}

/// Path of the corpus shipped with this crate.
pub fn bundled_corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

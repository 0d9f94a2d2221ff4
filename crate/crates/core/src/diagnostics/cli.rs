//! Command-line front end of `mustcall-check`.

use std::io::{IsTerminal, Write};
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use super::{render_json, render_text, run, Config, RunError, NO_COLOR_ENV};
use crate::alias::dump_aliases;
use crate::cfg::to_dot;
use crate::leakcheck::{CheckMode, MethodAnalysis};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_LEAKS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

/// Modular must-call resource leak checker for MiniOO.
#[derive(Debug, Parser)]
#[command(name = "mustcall-check", version)]
pub struct Args {
    /// Overlay file with out-of-source attributes (.rmspec).
    #[arg(long, value_name = "FILE")]
    pub specs: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Attribute-blind baseline checking.
    #[arg(long)]
    pub naive: bool,
    /// Print each method's CFG in DOT format on stderr.
    #[arg(long)]
    pub dump_cfg: bool,
    /// Print each method's alias pairs on stderr.
    #[arg(long)]
    pub dump_aliases: bool,
    /// Fail on parse, resolution and overlay errors.
    #[arg(long)]
    pub strict: bool,
    #[arg(required = true, value_name = "FILES")]
    pub files: Vec<PathBuf>,
}

/// Color is on for terminals unless the opt-out variable is set.
pub fn color_enabled() -> bool {
    std::env::var_os(NO_COLOR_ENV).is_none() && std::io::stdout().is_terminal()
}

/// Runs the checker with `args` (including the program name) and returns the
/// exit code: 0 clean, 1 leaks reported, 2 usage or input error.
pub fn run_cli<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write, color: bool) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_CLEAN };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{e}");
            return code;
        }
    };
    let mode = if args.naive { CheckMode::Naive } else { CheckMode::Full };
    let config = Config { files: args.files.clone(), specs: args.specs.clone(), mode, strict: args.strict };
    let result = match run(&config) {
        Ok(r) => r,
        Err(RunError::Strict(errors)) => {
            for e in &errors {
                let _ = writeln!(err, "error: {e}");
            }
            let _ = writeln!(err, "error: {} input error(s) in strict mode", errors.len());
            return EXIT_USAGE;
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    for e in &result.errors {
        let _ = writeln!(err, "error: {e}");
    }
    if args.dump_cfg || args.dump_aliases {
        dump(&config, &args, mode, err);
    }
    let text = match args.format {
        Format::Text => render_text(&result, color),
        Format::Json => render_json(&result),
    };
    let _ = out.write_all(text.as_bytes());
    if result.reports.is_empty() {
        EXIT_CLEAN
    } else {
        EXIT_LEAKS
    }
}

fn dump(config: &Config, args: &Args, mode: CheckMode, err: &mut dyn Write) {
    let units: Vec<_> = config
        .files
        .iter()
        .filter_map(|p| std::fs::read_to_string(p).ok().map(|t| crate::frontend::SourceUnit::new(p.display().to_string(), t)))
        .collect();
    let overlay = config
        .specs
        .as_ref()
        .and_then(|p| std::fs::read_to_string(p).ok())
        .and_then(|t| super::parse_overlay(&t).ok())
        .unwrap_or_default();
    let (model, _) = super::build(&units, &overlay);
    for m in model.user_methods() {
        let Some(a) = MethodAnalysis::new(&model, m.id, mode) else { continue };
        let name = m.qualified_name();
        if args.dump_cfg {
            let _ = write!(err, "{}", to_dot(&a.cfg, &name));
        }
        if args.dump_aliases {
            let _ = writeln!(err, "// aliases of {name}");
            let _ = write!(err, "{}", dump_aliases(a.body, m, &a.graph, &a.aliases));
        }
    }
}

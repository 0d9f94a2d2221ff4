//! Seeded random MiniOO programs with oracle-derived expectations.

use std::collections::BTreeSet;

use mustcall_core::cfg::NodeId;
use mustcall_core::diagnostics::build;
use mustcall_core::frontend::SourceUnit;
use mustcall_core::leakcheck::{CheckMode, MethodAnalysis, SourceKind};
use mustcall_core::model::ExprId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{run_case, CorpusCase, ExpectedReport, Mode};
use crate::oracle::{is_valid_witness, oracle_all, OracleError};

pub const GEN_FILE: &str = "gen.moo";
const MAX_STMTS: usize = 12;
const MAX_DEPTH: usize = 3;
/// Local holding the resource that the leaf-fix rewrite releases.
pub const LEAF_VAR: &str = "r";

#[derive(Debug, Clone, PartialEq, Eq)]
enum Stmt {
    Alloc(String),
    Decl(String),
    Release { var: String, close: bool },
    Send(String),
    Copy { dst: String, src: String },
    Null(String),
    If { cond: usize, then: Vec<Stmt>, els: Option<Vec<Stmt>> },
    NullGuard { var: String, eq: bool, then: Vec<Stmt>, els: Option<Vec<Stmt>> },
    While(Vec<Stmt>),
    Try { body: Vec<Stmt>, catch: Option<(String, Vec<Stmt>)>, finally: Option<Vec<Stmt>> },
    Using { var: String, body: Vec<Stmt> },
    Return,
    Throw,
    Rethrow,
    Arith(String),
}

/// Which constructs the generator may emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Features {
    pub try_catch: bool,
    pub finally: bool,
    pub throw: bool,
    pub using: bool,
}

impl Features {
    pub const ALL: Features = Features { try_catch: true, finally: true, throw: true, using: true };
    /// Constructs under which releasing [`LEAF_VAR`] before every return and
    /// at the end cannot change any other verdict.
    pub const LEAF: Features = Features { try_catch: true, finally: false, throw: false, using: false };
    /// No construct that adds exceptional edges.
    pub const STRAIGHT: Features = Features { try_catch: false, finally: false, throw: false, using: false };
}

#[derive(Debug, Clone, Copy, Default)]
struct Ctx {
    in_catch: bool,
    in_finally: bool,
}

#[derive(Debug, Clone)]
struct Var {
    name: String,
    assignable: bool,
}

struct Gen<'r> {
    rng: &'r mut ChaCha8Rng,
    budget: usize,
    fresh: usize,
    features: Features,
}

impl Gen<'_> {
    fn name(&mut self, prefix: &str) -> String {
        self.fresh += 1;
        format!("{prefix}{}", self.fresh)
    }

    fn pick<'a>(&mut self, vars: &'a [Var], assignable: bool) -> &'a str {
        let pool: Vec<&Var> = vars.iter().filter(|v| !assignable || v.assignable).collect();
        &pool[self.rng.gen_range(0..pool.len())].name
    }

    fn block(&mut self, scope: &[Var], depth: usize, ctx: Ctx) -> Vec<Stmt> {
        let mut vars = scope.to_vec();
        let len = self.rng.gen_range(1..=3);
        let mut out = Vec::new();
        for _ in 0..len {
            if self.budget == 0 {
                break;
            }
            let s = self.stmt(&mut vars, depth, ctx);
            let ends = matches!(s, Stmt::Return | Stmt::Throw | Stmt::Rethrow);
            out.push(s);
            if ends {
                break;
            }
        }
        if out.is_empty() {
            out.push(Stmt::Arith(self.name("z")));
        }
        out
    }

    fn stmt(&mut self, vars: &mut Vec<Var>, depth: usize, ctx: Ctx) -> Stmt {
        self.budget = self.budget.saturating_sub(1);
        let nested = depth < MAX_DEPTH && self.budget > 0;
        loop {
            let choice = self.rng.gen_range(0..100);
            let s = match choice {
                0..=13 => Stmt::Alloc(self.pick(vars, true).to_owned()),
                14..=19 => {
                    let v = self.name("t");
                    vars.push(Var { name: v.clone(), assignable: true });
                    Stmt::Decl(v)
                }
                20..=33 => {
                    let close = self.rng.gen_bool(0.3);
                    Stmt::Release { var: self.pick(vars, false).to_owned(), close }
                }
                34..=39 => Stmt::Send(self.pick(vars, false).to_owned()),
                40..=45 => {
                    let dst = self.pick(vars, true).to_owned();
                    let src = self.pick(vars, false).to_owned();
                    if dst == src {
                        continue;
                    }
                    Stmt::Copy { dst, src }
                }
                46..=49 => Stmt::Null(self.pick(vars, true).to_owned()),
                50..=57 if nested => {
                    let cond = self.rng.gen_range(0..3);
                    let then = self.block(vars, depth + 1, ctx);
                    let els = self.rng.gen_bool(0.5).then(|| self.block(vars, depth + 1, ctx));
                    Stmt::If { cond, then, els }
                }
                58..=63 if nested => {
                    let var = self.pick(vars, false).to_owned();
                    let eq = self.rng.gen_bool(0.4);
                    let then = self.block(vars, depth + 1, ctx);
                    let els = self.rng.gen_bool(0.4).then(|| self.block(vars, depth + 1, ctx));
                    Stmt::NullGuard { var, eq, then, els }
                }
                64..=70 if nested => self.while_stmt(vars, depth, ctx),
                71..=78 if nested && self.features.try_catch => self.try_stmt(vars, depth, ctx),
                79..=83 if nested && self.features.using => {
                    let var = self.name("u");
                    let mut inner = vars.clone();
                    inner.push(Var { name: var.clone(), assignable: false });
                    let body = self.block(&inner, depth + 1, ctx);
                    Stmt::Using { var, body }
                }
                84..=87 if !ctx.in_finally => Stmt::Return,
                88..=90 if !ctx.in_finally && self.features.throw => {
                    if ctx.in_catch && self.rng.gen_bool(0.5) {
                        Stmt::Rethrow
                    } else {
                        Stmt::Throw
                    }
                }
                91..=99 => Stmt::Arith(self.name("z")),
                _ => continue,
            };
            return s;
        }
    }

    fn while_stmt(&mut self, vars: &[Var], depth: usize, ctx: Ctx) -> Stmt {
        Stmt::While(self.block(vars, depth + 1, ctx))
    }

    fn try_stmt(&mut self, vars: &[Var], depth: usize, ctx: Ctx) -> Stmt {
        let body = self.block(vars, depth + 1, ctx);
        let with_finally = self.features.finally && self.rng.gen_bool(0.5);
        let with_catch = !with_finally || self.rng.gen_bool(0.5);
        let catch = with_catch.then(|| {
            let e = self.name("e");
            let cctx = Ctx { in_catch: true, ..ctx };
            (e, self.block(vars, depth + 1, cctx))
        });
        let finally = with_finally.then(|| self.block(vars, depth + 1, Ctx { in_finally: true, in_catch: false }));
        Stmt::Try { body, catch, finally }
    }
}

/// A generated single-method program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenProgram {
    body: Vec<Stmt>,
    leaf: bool,
}

impl GenProgram {
    pub fn has_loop(&self) -> bool {
        any_stmt(&self.body, &|s| matches!(s, Stmt::While(_)))
    }

    pub fn has_try(&self) -> bool {
        any_stmt(&self.body, &|s| matches!(s, Stmt::Try { .. }))
    }

    /// Source text. With `fixed`, [`LEAF_VAR`] is released before every
    /// `return` and at the end of the method, without moving any line.
    pub fn render(&self, fixed: bool) -> String {
        let mut lines = vec![
            "class Gen {".to_owned(),
            "    void m(bool c0, bool c1, bool c2, int n) {".to_owned(),
            "        Socket s0 = null;".to_owned(),
            "        Socket s1 = null;".to_owned(),
            "        Socket s2 = null;".to_owned(),
        ];
        if self.leaf {
            lines.push(format!("        Socket {LEAF_VAR} = new Socket();"));
        }
        render_block(&self.body, 2, fixed && self.leaf, &mut lines);
        let mut last = "        int zEnd = 0;".to_owned();
        if fixed && self.leaf {
            last.push_str(&format!(" {LEAF_VAR}.Dispose();"));
        }
        lines.push(last);
        lines.push("    }".to_owned());
        lines.push("}".to_owned());
        let mut text = lines.join("\n");
        text.push('\n');
        text
    }
}

fn any_stmt(stmts: &[Stmt], p: &dyn Fn(&Stmt) -> bool) -> bool {
    stmts.iter().any(|s| {
        p(s) || match s {
            Stmt::If { then, els, .. } | Stmt::NullGuard { then, els, .. } => {
                any_stmt(then, p) || els.as_deref().is_some_and(|e| any_stmt(e, p))
            }
            Stmt::While(b) | Stmt::Using { body: b, .. } => any_stmt(b, p),
            Stmt::Try { body, catch, finally } => {
                any_stmt(body, p)
                    || catch.as_ref().is_some_and(|(_, c)| any_stmt(c, p))
                    || finally.as_deref().is_some_and(|f| any_stmt(f, p))
            }
            _ => false,
        }
    })
}

fn render_block(stmts: &[Stmt], indent: usize, fix: bool, out: &mut Vec<String>) {
    let pad = "    ".repeat(indent);
    for s in stmts {
        match s {
            Stmt::Alloc(v) => out.push(format!("{pad}{v} = new Socket();")),
            Stmt::Decl(v) => out.push(format!("{pad}Socket {v} = new Socket();")),
            Stmt::Release { var, close } => {
                out.push(format!("{pad}{var}.{}();", if *close { "Close" } else { "Dispose" }))
            }
            Stmt::Send(v) => out.push(format!("{pad}{v}.Send(\"x\");")),
            Stmt::Copy { dst, src } => out.push(format!("{pad}{dst} = {src};")),
            Stmt::Null(v) => out.push(format!("{pad}{v} = null;")),
            Stmt::If { cond, then, els } => {
                out.push(format!("{pad}if (c{cond}) {{"));
                render_branches(then, els.as_deref(), indent, fix, out);
            }
            Stmt::NullGuard { var, eq, then, els } => {
                out.push(format!("{pad}if ({var} {} null) {{", if *eq { "==" } else { "!=" }));
                render_branches(then, els.as_deref(), indent, fix, out);
            }
            Stmt::While(body) => {
                out.push(format!("{pad}while (n > 0) {{"));
                render_block(body, indent + 1, fix, out);
                out.push(format!("{pad}    n = n - 1;"));
                out.push(format!("{pad}}}"));
            }
            Stmt::Try { body, catch, finally } => {
                out.push(format!("{pad}try {{"));
                render_block(body, indent + 1, fix, out);
                out.push(format!("{pad}}}"));
                if let Some((e, c)) = catch {
                    out.push(format!("{pad}catch (Exception {e}) {{"));
                    render_block(c, indent + 1, fix, out);
                    out.push(format!("{pad}}}"));
                }
                if let Some(f) = finally {
                    out.push(format!("{pad}finally {{"));
                    render_block(f, indent + 1, fix, out);
                    out.push(format!("{pad}}}"));
                }
            }
            Stmt::Using { var, body } => {
                out.push(format!("{pad}using (Socket {var} = new Socket()) {{"));
                render_block(body, indent + 1, fix, out);
                out.push(format!("{pad}}}"));
            }
            Stmt::Return if fix => out.push(format!("{pad}{LEAF_VAR}.Dispose(); return;")),
            Stmt::Return => out.push(format!("{pad}return;")),
            Stmt::Throw => out.push(format!("{pad}throw new Exception();")),
            Stmt::Rethrow => out.push(format!("{pad}throw;")),
            Stmt::Arith(z) => out.push(format!("{pad}int {z} = n / 2;")),
        }
    }
}

fn render_branches(then: &[Stmt], els: Option<&[Stmt]>, indent: usize, fix: bool, out: &mut Vec<String>) {
    let pad = "    ".repeat(indent);
    render_block(then, indent + 1, fix, out);
    out.push(format!("{pad}}}"));
    if let Some(e) = els {
        out.push(format!("{pad}else {{"));
        render_block(e, indent + 1, fix, out);
        out.push(format!("{pad}}}"));
    }
}

fn base_scope() -> Vec<Var> {
    (0..3).map(|i| Var { name: format!("s{i}"), assignable: true }).collect()
}

/// Draws one program. `force` selects a construct that must appear at top
/// level: 0 a loop, 1 a try statement, anything else nothing.
pub fn generate_program(rng: &mut ChaCha8Rng, features: Features, force: usize, leaf: bool) -> GenProgram {
    let mut g = Gen { rng, budget: MAX_STMTS, fresh: 0, features };
    let scope = base_scope();
    let mut body = Vec::new();
    match force {
        0 => {
            g.budget -= 1;
            body.push(g.while_stmt(&scope, 0, Ctx::default()));
        }
        1 if features.try_catch => {
            g.budget -= 1;
            body.push(g.try_stmt(&scope, 0, Ctx::default()));
        }
        _ => {}
    }
    let mut vars = scope;
    while g.budget > 0 {
        let s = g.stmt(&mut vars, 0, Ctx::default());
        let ends = matches!(s, Stmt::Return | Stmt::Throw);
        body.push(s);
        if ends {
            break;
        }
    }
    GenProgram { body, leaf }
}

/// Reports predicted by the path oracle for `units`, one per leaking
/// source expression or parameter.
pub fn oracle_reports(units: &[SourceUnit]) -> Result<Vec<ExpectedReport>, OracleError> {
    let (model, _) = build(units, &[]);
    let mut out = Vec::new();
    for m in model.user_methods() {
        let Some(a) = MethodAnalysis::new(&model, m.id, CheckMode::Full) else { continue };
        let result = oracle_all(&a)?;
        let mut seen: BTreeSet<(SourceKind, Option<ExprId>, Option<usize>)> = BTreeSet::new();
        for v in result.verdicts.iter().filter(|v| v.leaking) {
            let s = &a.sources[v.source];
            if seen.insert((s.kind, s.expr, s.param)) {
                out.push(ExpectedReport { file: m.file.clone(), line: s.span.line, kind: format!("{}", mustcall_core::leakcheck::ReportKind::from(s.kind)) });
            }
        }
    }
    out.sort();
    Ok(out)
}

/// A generated program as a corpus case.
#[derive(Debug, Clone)]
pub struct GeneratedCase {
    pub case: CorpusCase,
    pub program: GenProgram,
}

/// `count` programs from `seed`; program `k` uses seed `seed + k`. Every third
/// program contains a loop and every third a try statement. Programs whose
/// path count exceeds the oracle cap are redrawn from the same stream.
pub fn generate_random_programs(seed: u64, count: usize) -> Vec<GeneratedCase> {
    (0..count)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            loop {
                let program = generate_program(&mut rng, Features::ALL, k % 3, false);
                if let Some(case) = to_case(&program, format!("gen_{seed}_{k}")) {
                    return GeneratedCase { case, program };
                }
            }
        })
        .collect()
}

fn to_case(program: &GenProgram, name: String) -> Option<CorpusCase> {
    let files = vec![SourceUnit::new(GEN_FILE, program.render(false))];
    let expected = oracle_reports(&files).ok()?;
    Some(CorpusCase { name, files, overlay: Vec::new(), expected, mode: Mode::Full })
}

/// Per-source comparison of checker and oracle on one case.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Differential {
    pub sources: usize,
    pub paths: usize,
    pub disagreements: Vec<String>,
}

impl Differential {
    pub fn agrees(&self) -> bool {
        self.disagreements.is_empty()
    }
}

/// Compares the checker's per-source verdicts, its witnesses and its final
/// reports with the oracle.
pub fn differential(case: &CorpusCase) -> Result<Differential, OracleError> {
    let (model, errors) = build(&case.files, &case.overlay);
    let mut d = Differential::default();
    for e in errors {
        d.disagreements.push(format!("input error: {e}"));
    }
    for m in model.user_methods() {
        let Some(a) = MethodAnalysis::new(&model, m.id, CheckMode::Full) else { continue };
        let result = oracle_all(&a)?;
        d.paths += result.paths;
        for (src, v) in a.sources.iter().zip(&result.verdicts) {
            d.sources += 1;
            let path: Option<Vec<NodeId>> = a.leak_path(src);
            if path.is_some() != v.leaking {
                d.disagreements.push(format!(
                    "{}: {:?} at line {}: checker {}, oracle {}",
                    m.qualified_name(),
                    src.kind,
                    src.span.line,
                    verdict(path.is_some()),
                    verdict(v.leaking)
                ));
            }
            if let Some(p) = &path {
                if !is_valid_witness(&a, src, p) {
                    d.disagreements.push(format!("{}: invalid witness {p:?}", m.qualified_name()));
                }
            }
            if let Some(w) = &v.witness {
                if !is_valid_witness(&a, src, w) {
                    d.disagreements.push(format!("{}: invalid oracle witness {w:?}", m.qualified_name()));
                }
            }
        }
    }
    let outcome = run_case(case);
    if !outcome.passed() {
        d.disagreements.push(format!("reports differ: missing {:?}, unexpected {:?}", outcome.missing, outcome.unexpected));
    }
    Ok(d)
}

fn verdict(leaking: bool) -> &'static str {
    if leaking {
        "leak"
    } else {
        "clean"
    }
}

/// Original and fixed rendering of a leaf-fix program.
#[derive(Debug, Clone)]
pub struct LeafPair {
    pub original: String,
    pub fixed: String,
    /// Line of the allocation of [`LEAF_VAR`].
    pub leaf_line: u32,
}

/// `count` leaf-fix pairs from `seed`.
pub fn generate_leaf_pairs(seed: u64, count: usize) -> Vec<LeafPair> {
    (0..count)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let program = generate_program(&mut rng, Features::LEAF, k % 3, true);
            LeafPair { original: program.render(false), fixed: program.render(true), leaf_line: 6 }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = generate_random_programs(7, 5);
        let b = generate_random_programs(7, 5);
        let texts = |v: &[GeneratedCase]| v.iter().map(|c| c.case.files[0].text.clone()).collect::<Vec<_>>();
        assert_eq!(texts(&a), texts(&b));
        assert_ne!(texts(&a), texts(&generate_random_programs(8, 5)));
    }

    #[test]
    fn forced_features_appear() {
        for (k, c) in generate_random_programs(3, 9).iter().enumerate() {
            match k % 3 {
                0 => assert!(c.program.has_loop()),
                1 => assert!(c.program.has_try()),
                _ => {}
            }
        }
    }

    #[test]
    fn generated_programs_parse_cleanly() {
        for c in generate_random_programs(11, 30) {
            let (_, errors) = build(&c.case.files, &[]);
            assert!(errors.is_empty(), "{:?}\n{}", errors, c.case.files[0].text);
        }
    }

    #[test]
    fn leaf_fix_keeps_line_numbers() {
        for p in generate_leaf_pairs(5, 10) {
            assert_eq!(p.original.lines().count(), p.fixed.lines().count());
            assert_eq!(p.original.lines().nth(p.leaf_line as usize - 1).unwrap().trim(), "Socket r = new Socket();");
            assert!(!p.original.contains("finally") && !p.original.contains("throw"));
        }
    }
}

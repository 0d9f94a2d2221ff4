//! Must-call verification.
//!
//! Sources (where an obligation begins) and sinks (where it is discharged)
//! are classified per method from syntactic patterns and attributes. A source
//! leaks when its CFG node reaches the exit without passing a node or edge
//! that discharges a flow node aliased to it. Reachability with the
//! discharging nodes removed is the least fixpoint of the recursive
//! "not disposed" predicate and is exact in the presence of loops.
//!
//! Class-level rules check that owning fields are released by the type's
//! must-call method and that CreateMustCallFor methods release the old value
//! of a field before overwriting it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::alias::{close_aliases, flow_graph, AliasMode, AliasRelation, FlowGraph, FlowIx};
use crate::cfg::{build_cfg, Cfg, EdgeKind, Effect, NodeId};
use crate::frontend::{AttrKind, Span};
use crate::model::{AssignTarget, Body, ExprId, IrExpr, MethodId, MethodInfo, Receiver, SemanticModel, TypeInfo};

/// Witnesses longer than this are dropped from reports.
pub const MAX_WITNESS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum CheckMode {
    #[default]
    Full,
    /// Attribute-blind baseline: disposable allocations against direct
    /// Close/Dispose calls and using blocks, local aliasing only.
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SourceKind {
    ObjectCreation,
    OwningReturnCall,
    CreateMustCallForCall,
    OwningParameter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SinkKind {
    CloseDisposeCall,
    OwningReturnExpr,
    OwningArgumentCall,
    EnsuresCalledMethodsCall,
    UsingDispose,
    /// Assignment into an Owning field; the class-level checks take over.
    OwningFieldStore,
    NullDischarge,
}

/// Report categories: one per source kind plus the two class-level rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ReportKind {
    ObjectCreation,
    OwningReturnCall,
    CreateMustCallForCall,
    OwningParameter,
    OwningField,
    FieldOverwrite,
}

impl ReportKind {
    pub const ALL: [ReportKind; 6] = [
        ReportKind::ObjectCreation,
        ReportKind::OwningReturnCall,
        ReportKind::CreateMustCallForCall,
        ReportKind::OwningParameter,
        ReportKind::OwningField,
        ReportKind::FieldOverwrite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReportKind::ObjectCreation => "ObjectCreation",
            ReportKind::OwningReturnCall => "OwningReturnCall",
            ReportKind::CreateMustCallForCall => "CreateMustCallForCall",
            ReportKind::OwningParameter => "OwningParameter",
            ReportKind::OwningField => "OwningField",
            ReportKind::FieldOverwrite => "FieldOverwrite",
        }
    }
}

impl From<SourceKind> for ReportKind {
    fn from(k: SourceKind) -> Self {
        match k {
            SourceKind::ObjectCreation => ReportKind::ObjectCreation,
            SourceKind::OwningReturnCall => ReportKind::OwningReturnCall,
            SourceKind::CreateMustCallForCall => ReportKind::CreateMustCallForCall,
            SourceKind::OwningParameter => ReportKind::OwningParameter,
        }
    }
}

impl fmt::Display for ReportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ReportKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown report kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceObligation {
    pub kind: SourceKind,
    /// Flow node carrying the obligation. For CreateMustCallFor calls this is
    /// the receiver occurrence.
    pub flow: FlowIx,
    /// CFG node at which the obligation exists.
    pub at: NodeId,
    /// Creating expression; `None` for parameters.
    pub expr: Option<ExprId>,
    pub param: Option<usize>,
    /// Resource type (the field's type for CreateMustCallFor).
    pub ty: String,
    /// Release method required by the resource type.
    pub release: Option<String>,
    /// Field keyed by a CreateMustCallFor obligation.
    pub field: Option<String>,
    /// Called method, for call sources.
    pub callee: Option<String>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SinkDischarge {
    pub kind: SinkKind,
    pub flow: FlowIx,
    pub at: NodeId,
    /// For null discharges, the branch edge leaving `at` that carries it.
    pub edge: Option<EdgeKind>,
    /// Field released by an EnsuresCalledMethods call.
    pub field: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LeakReport {
    pub file: String,
    pub line: u32,
    pub col: u32,
    pub kind: ReportKind,
    pub message: String,
    /// Qualified name of the method or type the report belongs to.
    pub scope: String,
    /// CFG node ids from the source to the exit, avoiding every discharge.
    pub witness: Option<Vec<usize>>,
}

impl LeakReport {
    fn sort_key(&self) -> (&str, u32, ReportKind, u32, &str) {
        (&self.file, self.line, self.kind, self.col, &self.message)
    }
}

pub fn sort_reports(reports: &mut [LeakReport]) {
    reports.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()).then_with(|| a.cmp(b)));
}

/// Nodes and branch edges that discharge one source.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Blockers {
    pub nodes: BTreeSet<NodeId>,
    /// Blocked out-edges, by source node and edge kind.
    pub edges: BTreeSet<(NodeId, EdgeKind)>,
}

impl Blockers {
    pub fn blocks_edge(&self, from: NodeId, kind: EdgeKind) -> bool {
        self.edges.contains(&(from, kind))
    }
}

/// Everything the checker derives for one method body.
pub struct MethodAnalysis<'m> {
    pub model: &'m SemanticModel,
    pub method: &'m MethodInfo,
    pub body: &'m Body,
    pub mode: CheckMode,
    pub cfg: Cfg,
    pub graph: FlowGraph,
    pub aliases: AliasRelation,
    pub sources: Vec<SourceObligation>,
    pub sinks: Vec<SinkDischarge>,
}

impl<'m> MethodAnalysis<'m> {
    /// `None` for methods without a body.
    pub fn new(model: &'m SemanticModel, id: MethodId, mode: CheckMode) -> Option<Self> {
        let method = model.method(id);
        let body = method.body.as_ref()?;
        let cfg = build_cfg(id, body);
        let graph = flow_graph(model, method, body, &cfg);
        let alias_mode = match mode {
            CheckMode::Full => AliasMode::Full,
            CheckMode::Naive => AliasMode::LocalOnly,
        };
        let aliases = close_aliases(&graph, alias_mode);
        let sources = find_sources(model, method, body, &cfg, &graph, mode);
        let sinks = find_sinks(model, method, body, &cfg, &graph, mode);
        Some(MethodAnalysis { model, method, body, mode, cfg, graph, aliases, sources, sinks })
    }

    /// Whether `sink` can discharge `src`.
    pub fn discharges(&self, src: &SourceObligation, sink: &SinkDischarge) -> bool {
        let compatible = match (src.kind, sink.kind) {
            (_, SinkKind::NullDischarge) => true,
            (SourceKind::CreateMustCallForCall, SinkKind::EnsuresCalledMethodsCall) => sink.field == src.field,
            (SourceKind::CreateMustCallForCall, _) | (_, SinkKind::EnsuresCalledMethodsCall) => false,
            _ => true,
        };
        compatible && self.aliases.contains(src.flow, sink.flow)
    }

    /// Discharging nodes and edges for `src`.
    pub fn blockers(&self, src: &SourceObligation) -> Blockers {
        let mut b = Blockers::default();
        for s in self.sinks.iter().filter(|s| self.discharges(src, s)) {
            match s.edge {
                Some(k) => {
                    b.edges.insert((s.at, k));
                }
                None => {
                    b.nodes.insert(s.at);
                }
            }
        }
        b
    }

    /// A sink-free path from the source node to exit, if one exists.
    pub fn leak_path(&self, src: &SourceObligation) -> Option<Vec<NodeId>> {
        let b = self.blockers(src);
        let parent = self.cfg.search(src.at, |n| b.nodes.contains(&n), |a, _, k| b.blocks_edge(a, k));
        Cfg::path_to(&parent, self.cfg.exit)
    }

    pub fn not_disposed(&self, src: &SourceObligation) -> bool {
        self.leak_path(src).is_some()
    }

    /// One report per leaking source. Copies of a source inside duplicated
    /// finally blocks are merged; the source leaks if any copy does.
    pub fn reports(&self) -> Vec<LeakReport> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for src in &self.sources {
            let key = (src.kind, src.expr, src.param);
            if seen.contains(&key) {
                continue;
            }
            if let Some(path) = self.leak_path(src) {
                seen.insert(key);
                out.push(LeakReport {
                    file: self.method.file.clone(),
                    line: src.span.line,
                    col: src.span.col,
                    kind: src.kind.into(),
                    message: source_message(src),
                    scope: self.method.qualified_name(),
                    witness: (path.len() <= MAX_WITNESS).then(|| path.iter().map(|n| n.0).collect()),
                });
            }
        }
        out
    }
}

fn source_message(src: &SourceObligation) -> String {
    let callee = src.callee.as_deref().unwrap_or("?");
    match src.kind {
        SourceKind::ObjectCreation => format!("resource of type {} may not be released on all paths", src.ty),
        SourceKind::OwningReturnCall => {
            format!("resource of type {} returned by `{callee}` may not be released on all paths", src.ty)
        }
        SourceKind::CreateMustCallForCall => format!(
            "obligation for field `{}` created by `{callee}` may not be released on all paths",
            src.field.as_deref().unwrap_or("?")
        ),
        SourceKind::OwningParameter => format!(
            "owning parameter `{}` (type {}) may not be released on all paths",
            callee, src.ty
        ),
    }
}

/// True if some target binds argument `i` to a MustCallAlias parameter and
/// returns a MustCallAlias result.
fn binds_must_call_alias(model: &SemanticModel, targets: &[MethodId], nargs: usize) -> bool {
    (0..nargs).any(|i| {
        targets.iter().any(|&t| {
            let m = model.method(t);
            m.returns(AttrKind::MustCallAlias) && m.param_has(i, AttrKind::MustCallAlias)
        })
    })
}

fn call_parts(kind: &IrExpr) -> Option<(&[ExprId], &[MethodId])> {
    match kind {
        IrExpr::New { args, targets, .. } | IrExpr::Call { args, targets, .. } => Some((args, targets)),
        _ => None,
    }
}

pub fn find_sources(
    model: &SemanticModel,
    method: &MethodInfo,
    body: &Body,
    cfg: &Cfg,
    graph: &FlowGraph,
    mode: CheckMode,
) -> Vec<SourceObligation> {
    let mut out = Vec::new();
    if mode == CheckMode::Full {
        for (i, p) in method.params.iter().enumerate() {
            if !p.has(AttrKind::Owning) {
                continue;
            }
            let Some(flow) = graph.param(cfg, i) else { continue };
            out.push(SourceObligation {
                kind: SourceKind::OwningParameter,
                flow,
                at: cfg.entry,
                expr: None,
                param: Some(i),
                ty: p.ty.clone(),
                release: model.must_call(&p.ty).map(str::to_owned),
                field: None,
                callee: Some(p.name.clone()),
                span: p.span,
            });
        }
    }
    for node in &cfg.nodes {
        let Effect::Eval(e) = node.effect else { continue };
        let info = body.expr(e);
        let Some(flow) = graph.expr_at(cfg, node.id, e) else { continue };
        let base = |kind, ty: &str| SourceObligation {
            kind,
            flow,
            at: node.id,
            expr: Some(e),
            param: None,
            ty: ty.to_owned(),
            release: model.must_call(ty).map(str::to_owned),
            field: None,
            callee: None,
            span: info.span,
        };
        match (&info.kind, mode) {
            (IrExpr::New { ty, .. }, CheckMode::Naive) => {
                if model.is_disposable(ty) {
                    out.push(base(SourceKind::ObjectCreation, ty));
                }
            }
            (IrExpr::New { ty, args, targets }, CheckMode::Full) => {
                if model.in_rtype(ty) && !binds_must_call_alias(model, targets, args.len()) {
                    out.push(base(SourceKind::ObjectCreation, ty));
                }
            }
            (IrExpr::Call { receiver, method: name, targets, .. }, CheckMode::Full) => {
                if targets.iter().any(|&t| model.method(t).returns(AttrKind::Owning)) {
                    let mut s = base(SourceKind::OwningReturnCall, &info.ty);
                    s.callee = Some(name.clone());
                    out.push(s);
                }
                let cmcf = targets.iter().find_map(|&t| {
                    let m = model.method(t);
                    m.create_must_call_for().map(|f| (m, f))
                });
                if let (Some((target, field)), Receiver::Expr(r)) = (cmcf, receiver) {
                    let Some(rflow) = graph.expr_at(cfg, node.id, *r) else { continue };
                    let fty = model.find_field(&target.owner, field).map(|(_, f)| f.ty.clone()).unwrap_or_default();
                    out.push(SourceObligation {
                        kind: SourceKind::CreateMustCallForCall,
                        flow: rflow,
                        release: model.must_call(&fty).map(str::to_owned),
                        ty: fty,
                        field: Some(field.to_owned()),
                        callee: Some(name.clone()),
                        ..base(SourceKind::CreateMustCallForCall, "")
                    });
                }
            }
            _ => {}
        }
    }
    out.sort_by_key(|s| (s.span, s.kind, s.at));
    out
}

fn is_close_or_dispose(name: &str) -> bool {
    name == "Close" || name == "Dispose"
}

pub fn find_sinks(
    model: &SemanticModel,
    method: &MethodInfo,
    body: &Body,
    cfg: &Cfg,
    graph: &FlowGraph,
    mode: CheckMode,
) -> Vec<SinkDischarge> {
    let mut out = Vec::new();
    let mut push = |kind, flow: Option<FlowIx>, at: NodeId, field: Option<String>| {
        if let Some(flow) = flow {
            out.push(SinkDischarge { kind, flow, at, edge: None, field });
        }
    };
    for node in &cfg.nodes {
        let at = node.id;
        match &node.effect {
            Effect::Eval(e) => {
                let info = body.expr(*e);
                if let IrExpr::Call { receiver: Receiver::Expr(r), method: name, targets, synthetic, .. } = &info.kind {
                    let recv = graph.expr_at(cfg, at, *r);
                    let rty = &body.expr(*r).ty;
                    if *synthetic {
                        push(SinkKind::UsingDispose, recv, at, None);
                    } else if is_close_or_dispose(name)
                        || (mode == CheckMode::Full && model.must_call(rty) == Some(name.as_str()))
                    {
                        push(SinkKind::CloseDisposeCall, recv, at, None);
                    }
                    if mode == CheckMode::Full {
                        let ecm = targets.iter().find_map(|&t| model.method(t).ensures_called_methods().map(|(f, _)| f));
                        if let Some(f) = ecm {
                            push(SinkKind::EnsuresCalledMethodsCall, recv, at, Some(f.to_owned()));
                        }
                    }
                }
                if mode == CheckMode::Full {
                    if let Some((args, targets)) = call_parts(&info.kind) {
                        for (i, &a) in args.iter().enumerate() {
                            if targets.iter().any(|&t| model.method(t).param_has(i, AttrKind::Owning)) {
                                push(SinkKind::OwningArgumentCall, graph.expr_at(cfg, at, a), at, None);
                            }
                        }
                    }
                }
            }
            Effect::Return(Some(e)) if mode == CheckMode::Full && method.returns(AttrKind::Owning) => {
                push(SinkKind::OwningReturnExpr, graph.expr_at(cfg, at, *e), at, None);
            }
            Effect::Assign { target: AssignTarget::Field(fw), value } if mode == CheckMode::Full => {
                if let IrExpr::Field { owner, name, .. } = &body.expr(*fw).kind {
                    if model.find_field(owner, name).is_some_and(|(_, f)| f.is_owning()) {
                        push(SinkKind::OwningFieldStore, graph.expr_at(cfg, at, *value), at, None);
                    }
                }
            }
            _ => {}
        }
    }
    if mode == CheckMode::Full {
        out.extend(discharge_on_null_edge(body, cfg, graph));
    }
    out
}

/// Pseudo-sinks on the branch edges where a directly compared operand is
/// known to be null: the true edge of `x == null`, the false edge of
/// `x != null`. They discharge whatever the operand aliases.
pub fn discharge_on_null_edge(body: &Body, cfg: &Cfg, graph: &FlowGraph) -> Vec<SinkDischarge> {
    let mut out = Vec::new();
    for node in &cfg.nodes {
        let Effect::Cond(c) = node.effect else { continue };
        let IrExpr::NullCmp { operand, negated } = body.expr(c).kind else { continue };
        let Some(flow) = graph.expr_at(cfg, node.id, operand) else { continue };
        let edge = if negated { EdgeKind::False } else { EdgeKind::True };
        out.push(SinkDischarge { kind: SinkKind::NullDischarge, flow, at: node.id, edge: Some(edge), field: None });
    }
    out
}

pub fn check_method(model: &SemanticModel, id: MethodId, mode: CheckMode) -> Vec<LeakReport> {
    MethodAnalysis::new(model, id, mode).map(|a| a.reports()).unwrap_or_default()
}

pub fn check_naive(model: &SemanticModel, id: MethodId) -> Vec<LeakReport> {
    check_method(model, id, CheckMode::Naive)
}

/// Nodes and edges of `cfg` that release `this.field` by a call to one of
/// `releases`, or establish it null.
fn field_release_blockers(body: &Body, cfg: &Cfg, field: &str, releases: &[&str], null_store: bool) -> Blockers {
    let mut b = Blockers::default();
    for node in &cfg.nodes {
        match &node.effect {
            Effect::Eval(e) => {
                if let IrExpr::Call { receiver: Receiver::Expr(r), method, .. } = &body.expr(*e).kind {
                    if body.this_field(*r) == Some(field) && releases.contains(&method.as_str()) {
                        b.nodes.insert(node.id);
                    }
                }
            }
            Effect::Cond(c) => {
                if let IrExpr::NullCmp { operand, negated } = body.expr(*c).kind {
                    if body.this_field(operand) == Some(field) {
                        b.edges.insert((node.id, if negated { EdgeKind::False } else { EdgeKind::True }));
                    }
                }
            }
            Effect::Assign { target: AssignTarget::Field(fw), value }
                if null_store && body.this_field(*fw) == Some(field) && body.expr(*value).kind == IrExpr::Null =>
            {
                b.nodes.insert(node.id);
            }
            _ => {}
        }
    }
    b
}

/// Owning fields of `ty` must be released by its must-call method: the type
/// needs a MustCall method `d`, `d` must declare EnsuresCalledMethods for the
/// field, and `d`'s body must call the declared release method on the field
/// on every path.
pub fn check_owning_field(model: &SemanticModel, ty: &TypeInfo) -> Vec<LeakReport> {
    let mut out = Vec::new();
    for f in ty.fields.iter().filter(|f| f.is_owning()) {
        let report = |message: String| LeakReport {
            file: ty.file.clone(),
            line: f.span.line,
            col: f.span.col,
            kind: ReportKind::OwningField,
            message,
            scope: format!("{}.{}", ty.name, f.name),
            witness: None,
        };
        let Some(d) = model.must_call(&ty.name) else {
            out.push(report(format!("owning field `{}` is never released: `{}` has no must-call method", f.name, ty.name)));
            continue;
        };
        let ecm = model
            .lookup_method(&ty.name, d, 0)
            .map(|m| model.method(m))
            .and_then(|m| m.ensures_called_methods().filter(|(ef, _)| *ef == f.name).map(|(_, rm)| (m, rm)));
        let Some((dm, release)) = ecm else {
            out.push(report(format!(
                "owning field `{}` is not released: `{d}` does not declare EnsuresCalledMethods for it",
                f.name
            )));
            continue;
        };
        let Some(body) = &dm.body else { continue };
        let cfg = build_cfg(dm.id, body);
        let b = field_release_blockers(body, &cfg, &f.name, &[release], false);
        let parent = cfg.search(cfg.entry, |n| b.nodes.contains(&n), |a, _, k| b.blocks_edge(a, k));
        if let Some(path) = Cfg::path_to(&parent, cfg.exit) {
            let mut r = report(format!("owning field `{}` may not be released on all paths of `{d}`", f.name));
            r.witness = (path.len() <= MAX_WITNESS).then(|| path.iter().map(|n| n.0).collect());
            out.push(r);
        }
    }
    out
}

/// A CreateMustCallFor(f) method must release (or null out) `this.f` on every
/// path that reaches an assignment to it.
pub fn check_create_must_call_for(model: &SemanticModel, method: &MethodInfo) -> Vec<LeakReport> {
    let (Some(field), Some(body)) = (method.create_must_call_for(), &method.body) else {
        return Vec::new();
    };
    let fty = model.find_field(&method.owner, field).map(|(_, f)| f.ty.clone()).unwrap_or_default();
    let mut releases = vec!["Close", "Dispose"];
    releases.extend(model.must_call(&fty));
    let cfg = build_cfg(method.id, body);
    let b = field_release_blockers(body, &cfg, field, &releases, true);
    let parent = cfg.search(cfg.entry, |n| b.nodes.contains(&n), |a, _, k| b.blocks_edge(a, k));
    let mut out = Vec::new();
    for node in &cfg.nodes {
        let Effect::Assign { target: AssignTarget::Field(fw), value } = &node.effect else { continue };
        if body.this_field(*fw) != Some(field) || body.expr(*value).kind == IrExpr::Null {
            continue;
        }
        if let Some(path) = Cfg::path_to(&parent, node.id) {
            let span = node.span.unwrap_or(method.span);
            out.push(LeakReport {
                file: method.file.clone(),
                line: span.line,
                col: span.col,
                kind: ReportKind::FieldOverwrite,
                message: format!("field `{field}` may be overwritten by `{}` before its resource is released", method.name),
                scope: method.qualified_name(),
                witness: (path.len() <= MAX_WITNESS).then(|| path.iter().map(|n| n.0).collect()),
            });
        }
    }
    out
}

/// Counts gathered while checking a program.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CheckStats {
    pub sources: BTreeMap<SourceKind, usize>,
    pub sinks: BTreeMap<SinkKind, usize>,
}

/// Every user method, then every user type; reports sorted.
pub fn check_program(model: &SemanticModel, mode: CheckMode) -> (Vec<LeakReport>, CheckStats) {
    let mut reports = Vec::new();
    let mut stats = CheckStats::default();
    for m in model.user_methods() {
        let Some(a) = MethodAnalysis::new(model, m.id, mode) else { continue };
        let mut seen = BTreeSet::new();
        for s in &a.sources {
            if seen.insert((s.kind, s.expr, s.param)) {
                *stats.sources.entry(s.kind).or_insert(0) += 1;
            }
        }
        let mut seen = BTreeSet::new();
        for s in &a.sinks {
            // one count per syntactic sink, not per finally copy
            let key = (s.kind, a.graph.nodes[s.flow].occ, s.edge);
            if seen.insert(key) {
                *stats.sinks.entry(s.kind).or_insert(0) += 1;
            }
        }
        reports.extend(a.reports());
        if mode == CheckMode::Full {
            reports.extend(check_create_must_call_for(model, m));
        }
    }
    if mode == CheckMode::Full {
        for t in model.user_types() {
            reports.extend(check_owning_field(model, t));
        }
    }
    sort_reports(&mut reports);
    (reports, stats)
}

#[cfg(test)]
mod tests;

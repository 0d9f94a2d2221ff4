//! Intraprocedural alias relation between flow nodes.
//!
//! A flow node is one occurrence of an expression at a CFG node, or a
//! parameter at entry. Three kinds of directed steps relate them:
//!
//! * local flow: a definition's value reaches the reads it reaches
//!   (reaching definitions), a read reaches later reads of the same variable
//!   along definition-clear paths, and an assigned value reaches the field
//!   write it is stored through;
//! * resource aliasing: an argument bound to a MustCallAlias parameter of a
//!   MustCallAlias-returning target reaches the call;
//! * field aliasing: a write of a declared field reaches every read of that
//!   field reachable from it in the CFG.
//!
//! The alias relation is the reflexive-transitive closure of the enabled steps.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write;

use crate::cfg::{Cfg, Effect, NodeId};
use crate::frontend::{AttrKind, Span};
use crate::model::{AssignTarget, Body, ExprId, IrExpr, MethodInfo, Receiver, SemanticModel, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Occurrence {
    Expr(ExprId),
    Param(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowNode {
    pub occ: Occurrence,
    pub at: NodeId,
}

/// Index of a flow node inside its [`FlowGraph`].
pub type FlowIx = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AliasMode {
    /// Local flow, resource aliasing and field aliasing.
    Full,
    /// Local flow only.
    LocalOnly,
}

#[derive(Debug, Clone)]
pub struct FlowGraph {
    pub nodes: Vec<FlowNode>,
    index: HashMap<FlowNode, FlowIx>,
    local: Vec<Vec<FlowIx>>,
    resource: BTreeSet<(FlowIx, FlowIx)>,
    field: BTreeSet<(FlowIx, FlowIx)>,
}

impl FlowGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, n: FlowNode) -> Option<FlowIx> {
        self.index.get(&n).copied()
    }

    /// Flow node of the occurrence of `e` that belongs to the statement at `at`.
    pub fn expr_at(&self, cfg: &Cfg, at: NodeId, e: ExprId) -> Option<FlowIx> {
        let anchor = cfg.anchor(at, e)?;
        self.index_of(FlowNode { occ: Occurrence::Expr(e), at: anchor })
    }

    pub fn param(&self, cfg: &Cfg, i: usize) -> Option<FlowIx> {
        self.index_of(FlowNode { occ: Occurrence::Param(i), at: cfg.entry })
    }

    pub fn local_steps(&self) -> impl Iterator<Item = (FlowIx, FlowIx)> + '_ {
        self.local.iter().enumerate().flat_map(|(a, s)| s.iter().map(move |&b| (a, b)))
    }

    pub fn resource_steps(&self) -> impl Iterator<Item = (FlowIx, FlowIx)> + '_ {
        self.resource.iter().copied()
    }

    pub fn field_steps(&self) -> impl Iterator<Item = (FlowIx, FlowIx)> + '_ {
        self.field.iter().copied()
    }

    fn successors(&self, n: FlowIx, mode: AliasMode) -> Vec<FlowIx> {
        let mut out = self.local[n].clone();
        if mode == AliasMode::Full {
            out.extend(self.resource.range((n, 0)..(n + 1, 0)).map(|&(_, b)| b));
            out.extend(self.field.range((n, 0)..(n + 1, 0)).map(|&(_, b)| b));
        }
        out
    }

    /// Every node reachable from `n` (including `n`) under `mode`.
    pub fn reachable(&self, n: FlowIx, mode: AliasMode) -> BTreeSet<FlowIx> {
        let mut seen = BTreeSet::from([n]);
        let mut stack = vec![n];
        while let Some(x) = stack.pop() {
            for y in self.successors(x, mode) {
                if seen.insert(y) {
                    stack.push(y);
                }
            }
        }
        seen
    }

    fn local_reachable(&self, n: FlowIx) -> BTreeSet<FlowIx> {
        let mut seen = BTreeSet::from([n]);
        let mut stack = vec![n];
        while let Some(x) = stack.pop() {
            for &y in &self.local[x] {
                if seen.insert(y) {
                    stack.push(y);
                }
            }
        }
        seen
    }
}

/// True iff a value flows from `n1` to `n2` through local steps.
pub fn local_flow(g: &FlowGraph, n1: FlowIx, n2: FlowIx) -> bool {
    n1 == n2 || g.local_reachable(n1).contains(&n2)
}

pub fn is_resource_alias(g: &FlowGraph, n1: FlowIx, n2: FlowIx) -> bool {
    g.resource.contains(&(n1, n2))
}

pub fn is_field_alias(g: &FlowGraph, n1: FlowIx, n2: FlowIx) -> bool {
    g.field.contains(&(n1, n2))
}

/// Materialized reflexive-transitive closure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliasRelation {
    rows: Vec<BTreeSet<FlowIx>>,
}

impl AliasRelation {
    pub fn aliases(&self, n: FlowIx) -> &BTreeSet<FlowIx> {
        &self.rows[n]
    }

    pub fn contains(&self, a: FlowIx, b: FlowIx) -> bool {
        self.rows[a].contains(&b)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (FlowIx, FlowIx)> + '_ {
        self.rows.iter().enumerate().flat_map(|(a, r)| r.iter().map(move |&b| (a, b)))
    }

    pub fn len(&self) -> usize {
        self.rows.iter().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Relational composition `self ; self`.
    pub fn compose(&self) -> AliasRelation {
        let rows = self
            .rows
            .iter()
            .map(|r| r.iter().flat_map(|&m| self.rows[m].iter().copied()).collect())
            .collect();
        AliasRelation { rows }
    }
}

pub fn close_aliases(g: &FlowGraph, mode: AliasMode) -> AliasRelation {
    AliasRelation { rows: (0..g.len()).map(|n| g.reachable(n, mode)).collect() }
}

/// Builds the flow nodes and steps of one method.
pub fn flow_graph(model: &SemanticModel, method: &MethodInfo, body: &Body, cfg: &Cfg) -> FlowGraph {
    let mut g = FlowGraph {
        nodes: Vec::new(),
        index: HashMap::new(),
        local: Vec::new(),
        resource: BTreeSet::new(),
        field: BTreeSet::new(),
    };
    let add = |g: &mut FlowGraph, n: FlowNode| {
        let ix = g.nodes.len();
        g.nodes.push(n);
        g.index.insert(n, ix);
        g.local.push(Vec::new());
    };
    for i in 0..method.params.len() {
        add(&mut g, FlowNode { occ: Occurrence::Param(i), at: cfg.entry });
    }
    for node in &cfg.nodes {
        for &e in &node.exprs {
            add(&mut g, FlowNode { occ: Occurrence::Expr(e), at: node.id });
        }
    }

    definition_steps(&mut g, body, cfg);
    use_use_steps(&mut g, body, cfg);
    store_and_resource_steps(&mut g, model, body, cfg);
    field_steps(&mut g, body, cfg);
    for s in &mut g.local {
        s.sort_unstable();
        s.dedup();
    }
    g
}

struct Def {
    var: VarId,
    node: NodeId,
    value: Option<FlowIx>,
}

fn defs_of(g: &FlowGraph, body: &Body, cfg: &Cfg) -> Vec<Def> {
    let mut defs = Vec::new();
    for (i, &v) in body.params.iter().enumerate() {
        defs.push(Def { var: v, node: cfg.entry, value: g.param(cfg, i) });
    }
    for n in &cfg.nodes {
        let (var, value) = match &n.effect {
            Effect::Local { var, init } => (*var, *init),
            Effect::Assign { target: AssignTarget::Var(v), value } => (*v, Some(*value)),
            Effect::Catch(Some(v)) => (*v, None),
            _ => continue,
        };
        // null carries nothing; the definition still kills
        let value = value.filter(|&e| body.expr(e).kind != IrExpr::Null).and_then(|e| g.expr_at(cfg, n.id, e));
        defs.push(Def { var, node: n.id, value });
    }
    defs
}

/// Forward may-analysis: `gen`/`kill` per node over `universe` items.
fn forward(cfg: &Cfg, universe: usize, gen: &[Vec<usize>], kill: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = cfg.len();
    let mut inn = vec![vec![false; universe]; n];
    let mut out = vec![vec![false; universe]; n];
    let mut changed = true;
    while changed {
        changed = false;
        for id in cfg.node_ids() {
            let mut i = vec![false; universe];
            for p in cfg.predecessors(id) {
                for (x, &b) in out[p.0].iter().enumerate() {
                    i[x] |= b;
                }
            }
            let mut o: Vec<bool> = i.iter().zip(&kill[id.0]).map(|(&a, &k)| a && !k).collect();
            for &x in &gen[id.0] {
                o[x] = true;
            }
            if o != out[id.0] || i != inn[id.0] {
                out[id.0] = o;
                inn[id.0] = i;
                changed = true;
            }
        }
    }
    inn
}

fn var_read(body: &Body, occ: Occurrence) -> Option<VarId> {
    match occ {
        Occurrence::Expr(e) => match body.expr(e).kind {
            IrExpr::Var(v) => Some(v),
            _ => None,
        },
        Occurrence::Param(_) => None,
    }
}

fn definition_steps(g: &mut FlowGraph, body: &Body, cfg: &Cfg) {
    let defs = defs_of(g, body, cfg);
    let mut gen = vec![Vec::new(); cfg.len()];
    let mut kill = vec![vec![false; defs.len()]; cfg.len()];
    for (i, d) in defs.iter().enumerate() {
        gen[d.node.0].push(i);
        for (j, other) in defs.iter().enumerate() {
            if other.var == d.var && j != i {
                kill[d.node.0][j] = true;
            }
        }
    }
    let inn = forward(cfg, defs.len(), &gen, &kill);
    for r in 0..g.len() {
        let FlowNode { occ, at } = g.nodes[r];
        let Some(v) = var_read(body, occ) else { continue };
        for (i, d) in defs.iter().enumerate() {
            if d.var == v && inn[at.0][i] {
                if let Some(value) = d.value {
                    g.local[value].push(r);
                }
            }
        }
    }
}

fn use_use_steps(g: &mut FlowGraph, body: &Body, cfg: &Cfg) {
    let reads: Vec<(FlowIx, VarId)> =
        (0..g.len()).filter_map(|r| var_read(body, g.nodes[r].occ).map(|v| (r, v))).collect();
    let mut defined = vec![Vec::new(); cfg.len()];
    for n in &cfg.nodes {
        match &n.effect {
            Effect::Local { var, .. } | Effect::Assign { target: AssignTarget::Var(var), .. } | Effect::Catch(Some(var)) => {
                defined[n.id.0].push(*var)
            }
            _ => {}
        }
    }
    let mut gen = vec![Vec::new(); cfg.len()];
    let mut kill = vec![vec![false; reads.len()]; cfg.len()];
    for (i, &(r, v)) in reads.iter().enumerate() {
        let at = g.nodes[r].at;
        if !defined[at.0].contains(&v) {
            gen[at.0].push(i);
        }
    }
    for n in cfg.node_ids() {
        for (i, &(_, v)) in reads.iter().enumerate() {
            if defined[n.0].contains(&v) {
                kill[n.0][i] = true;
            }
        }
    }
    let inn = forward(cfg, reads.len(), &gen, &kill);
    for &(r2, v) in &reads {
        let at = g.nodes[r2].at;
        for (i, &(r1, v1)) in reads.iter().enumerate() {
            if v1 != v || r1 == r2 {
                continue;
            }
            let same_node_before = g.nodes[r1].at == at && r1 < r2;
            if inn[at.0][i] || same_node_before {
                g.local[r1].push(r2);
            }
        }
    }
}

fn store_and_resource_steps(g: &mut FlowGraph, model: &SemanticModel, body: &Body, cfg: &Cfg) {
    for n in &cfg.nodes {
        match &n.effect {
            Effect::Assign { target: AssignTarget::Field(fw), value } if body.expr(*value).kind != IrExpr::Null => {
                if let (Some(v), Some(w)) = (g.expr_at(cfg, n.id, *value), g.expr_at(cfg, n.id, *fw)) {
                    g.local[v].push(w);
                }
            }
            Effect::Eval(c) if !body.expr(*c).discarded => {
                let (args, targets) = match &body.expr(*c).kind {
                    IrExpr::New { args, targets, .. } | IrExpr::Call { args, targets, .. } => (args, targets),
                    _ => continue,
                };
                let Some(call) = g.expr_at(cfg, n.id, *c) else { continue };
                for (i, &a) in args.iter().enumerate() {
                    let bound = targets.iter().any(|&t| {
                        let m = model.method(t);
                        m.returns(AttrKind::MustCallAlias) && m.param_has(i, AttrKind::MustCallAlias)
                    });
                    if bound {
                        if let Some(arg) = g.expr_at(cfg, n.id, a) {
                            g.resource.insert((arg, call));
                        }
                    }
                }
            }
            _ => {}
        }
    }
}

fn field_steps(g: &mut FlowGraph, body: &Body, cfg: &Cfg) {
    let field_of = |occ: Occurrence| match occ {
        Occurrence::Expr(e) => match &body.expr(e).kind {
            IrExpr::Field { owner, name, write, .. } => Some((owner.clone(), name.clone(), *write)),
            _ => None,
        },
        Occurrence::Param(_) => None,
    };
    let accesses: Vec<(FlowIx, (String, String, bool))> =
        (0..g.len()).filter_map(|i| field_of(g.nodes[i].occ).map(|f| (i, f))).collect();
    for (w, (owner, name, write)) in &accesses {
        if !write {
            continue;
        }
        let from = g.nodes[*w].at;
        // nodes reachable by a path of length >= 1
        let mut reached = vec![false; cfg.len()];
        let mut stack: Vec<NodeId> = cfg.successors(from).into_iter().collect();
        while let Some(x) = stack.pop() {
            if std::mem::replace(&mut reached[x.0], true) {
                continue;
            }
            stack.extend(cfg.successors(x));
        }
        for (r, (o2, n2, w2)) in &accesses {
            if !w2 && o2 == owner && n2 == name && reached[g.nodes[*r].at.0] {
                g.field.insert((*w, *r));
            }
        }
    }
}

/// Short human description of a flow node.
pub fn describe(body: &Body, method: &MethodInfo, n: FlowNode) -> (Span, String) {
    match n.occ {
        Occurrence::Param(i) => (method.params[i].span, format!("param {}", method.params[i].name)),
        Occurrence::Expr(e) => {
            let info = body.expr(e);
            let text = match &info.kind {
                IrExpr::New { ty, .. } => format!("new {ty}"),
                IrExpr::Call { receiver, method, .. } => match receiver {
                    Receiver::Static(t) => format!("call {t}.{method}"),
                    Receiver::Expr(_) => format!("call {method}"),
                },
                IrExpr::Field { name, write: true, .. } => format!("write .{name}"),
                IrExpr::Field { name, .. } => format!("read .{name}"),
                IrExpr::Var(v) => body.var(*v).name.clone(),
                IrExpr::This => "this".into(),
                IrExpr::Null => "null".into(),
                IrExpr::NullCmp { negated, .. } => if *negated { "!= null" } else { "== null" }.into(),
                IrExpr::Scalar(_) => "scalar".into(),
            };
            (info.span, format!("{text} @{}", n.at.0))
        }
    }
}

/// Non-reflexive alias pairs, one per line, sorted by span.
pub fn dump_aliases(body: &Body, method: &MethodInfo, g: &FlowGraph, rel: &AliasRelation) -> String {
    let mut lines: Vec<((Span, String), (Span, String))> = rel
        .pairs()
        .filter(|(a, b)| a != b)
        .map(|(a, b)| (describe(body, method, g.nodes[a]), describe(body, method, g.nodes[b])))
        .collect();
    lines.sort();
    let mut out = String::new();
    for ((sa, da), (sb, db)) in lines {
        let _ = writeln!(out, "{sa} {da} -> {sb} {db}");
    }
    out
}

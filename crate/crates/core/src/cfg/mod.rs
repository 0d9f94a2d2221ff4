//! Per-method control-flow graphs.
//!
//! Every call and object creation gets its own evaluation node, in
//! evaluation order, followed by a statement node for declarations,
//! assignments, conditions, returns and throws. Expressions that are not
//! calls are anchored to the node of their nearest enclosing call, or to the
//! statement node.
//!
//! Exceptions are modelled only inside `try`: each statement in a try body
//! gets one exceptional edge, leaving its first node, to every catch entry
//! (or to the exceptional copy of the finally block when there are no
//! catches). Finally blocks are inlined once per route: normal completion,
//! exceptional exit and return.

mod dot;

use std::collections::{BTreeSet, VecDeque};

use crate::frontend::{Block, Expr, ExprKind, Ident, Span, Stmt, StmtKind};
use crate::model::{AssignTarget, Body, ExprId, IrExpr, IrStmt, IrStmtKind, MethodId, Receiver, VarId};

pub use dot::to_dot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Entry,
    Exit,
    Statement,
    /// Evaluation of one call or object creation.
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    Normal,
    True,
    False,
    Exceptional,
}

/// What a node does, in terms of the body IR.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    None,
    /// The call or creation evaluated by an `Eval` node.
    Eval(ExprId),
    Local { var: VarId, init: Option<ExprId> },
    Assign { target: AssignTarget, value: ExprId },
    /// Branch condition of an `if` or `while`.
    Cond(ExprId),
    Return(Option<ExprId>),
    Throw(Option<ExprId>),
    /// Handler entry; binds the exception variable if there is one.
    Catch(Option<VarId>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfgNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub span: Option<Span>,
    pub effect: Effect,
    /// Expression occurrences anchored at this node, in evaluation order.
    pub exprs: Vec<ExprId>,
    /// Anchors of every expression of the enclosing statement, shared by all
    /// nodes the statement produced.
    pub anchors: Vec<(ExprId, NodeId)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfg {
    pub method: MethodId,
    pub nodes: Vec<CfgNode>,
    pub entry: NodeId,
    pub exit: NodeId,
    succ: Vec<Vec<(NodeId, EdgeKind)>>,
    pred: Vec<Vec<(NodeId, EdgeKind)>>,
}

impl Cfg {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &CfgNode {
        &self.nodes[id.0]
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn out_edges(&self, n: NodeId) -> &[(NodeId, EdgeKind)] {
        &self.succ[n.0]
    }

    pub fn in_edges(&self, n: NodeId) -> &[(NodeId, EdgeKind)] {
        &self.pred[n.0]
    }

    pub fn successors(&self, n: NodeId) -> BTreeSet<NodeId> {
        self.succ[n.0].iter().map(|&(m, _)| m).collect()
    }

    /// Exact transpose lookup.
    ///
    /// # Panics
    /// If `n` does not belong to this graph.
    pub fn predecessors(&self, n: NodeId) -> BTreeSet<NodeId> {
        assert!(n.0 < self.nodes.len(), "node {} does not belong to this CFG", n.0);
        self.pred[n.0].iter().map(|&(m, _)| m).collect()
    }

    /// All edges as `(from, to, kind)`, sorted.
    pub fn edges(&self) -> Vec<(NodeId, NodeId, EdgeKind)> {
        let mut out: Vec<_> = self.succ.iter().enumerate().flat_map(|(a, s)| s.iter().map(move |&(b, k)| (NodeId(a), b, k))).collect();
        out.sort();
        out
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId, kind: EdgeKind) -> bool {
        self.succ[from.0].contains(&(to, kind))
    }

    /// Checks that the predecessor lists are exactly the transpose of the successor lists.
    pub fn is_transpose_consistent(&self) -> bool {
        let mut fwd = Vec::new();
        for (a, s) in self.succ.iter().enumerate() {
            for &(b, k) in s {
                fwd.push((a, b.0, k));
            }
        }
        let mut back = Vec::new();
        for (b, p) in self.pred.iter().enumerate() {
            for &(a, k) in p {
                back.push((a.0, b, k));
            }
        }
        fwd.sort();
        back.sort();
        fwd == back
    }

    /// Node holding the occurrence of `e` that belongs to the same statement
    /// copy as `at`.
    pub fn anchor(&self, at: NodeId, e: ExprId) -> Option<NodeId> {
        self.nodes[at.0].anchors.iter().find(|(x, _)| *x == e).map(|&(_, n)| n)
    }

    /// CFG nodes at which an occurrence of `e` is anchored (several when the
    /// expression sits in a duplicated finally block).
    pub fn occurrences(&self, e: ExprId) -> Vec<NodeId> {
        self.nodes.iter().filter(|n| n.exprs.contains(&e)).map(|n| n.id).collect()
    }

    /// Breadth-first reachability from `from`, skipping blocked nodes and edges.
    /// `from` itself is never blocked. Returns BFS parents, or `None` for
    /// unreached nodes.
    pub fn search(
        &self,
        from: NodeId,
        node_blocked: impl Fn(NodeId) -> bool,
        edge_blocked: impl Fn(NodeId, NodeId, EdgeKind) -> bool,
    ) -> Vec<Option<NodeId>> {
        let mut parent = vec![None; self.nodes.len()];
        parent[from.0] = Some(from);
        let mut queue = VecDeque::from([from]);
        while let Some(n) = queue.pop_front() {
            for &(m, k) in &self.succ[n.0] {
                if parent[m.0].is_some() || edge_blocked(n, m, k) || node_blocked(m) {
                    continue;
                }
                parent[m.0] = Some(n);
                queue.push_back(m);
            }
        }
        parent
    }

    /// Node path from the search root to `to`, using parents from [`Cfg::search`].
    pub fn path_to(parent: &[Option<NodeId>], to: NodeId) -> Option<Vec<NodeId>> {
        parent[to.0]?;
        let mut path = vec![to];
        let mut cur = to;
        while let Some(p) = parent[cur.0] {
            if p == cur {
                break;
            }
            path.push(p);
            cur = p;
        }
        path.reverse();
        Some(path)
    }
}

/// `using (T v = e) S` becomes `{ T v = e; try { S } finally { v.Dispose(); } }`.
/// Other statements are returned unchanged.
pub fn desugar_using(stmt: &Stmt) -> Stmt {
    let StmtKind::Using { ty, name, init, body } = &stmt.kind else {
        return stmt.clone();
    };
    let span = stmt.span;
    let decl = Stmt { kind: StmtKind::Local { ty: ty.clone(), name: name.clone(), init: Some(init.clone()) }, span };
    let try_body = match &body.kind {
        StmtKind::Block(b) => b.clone(),
        _ => Block { stmts: vec![(**body).clone()], span: body.span },
    };
    let dispose = Expr::new(
        ExprKind::Call {
            receiver: Some(Box::new(Expr::new(ExprKind::Name(name.name.clone()), span))),
            method: Ident::new("Dispose", span),
            args: Vec::new(),
            synthetic: true,
        },
        span,
    );
    let finally = Block { stmts: vec![Stmt { kind: StmtKind::Expr(dispose), span }], span };
    let try_stmt = Stmt { kind: StmtKind::Try { body: try_body, catches: Vec::new(), finally: Some(finally) }, span };
    Stmt { kind: StmtKind::Block(Block { stmts: vec![decl, try_stmt], span }), span }
}

/// Builds the graph of `body`, which belongs to `method`.
pub fn build_cfg(method: MethodId, body: &Body) -> Cfg {
    let mut b = Builder { body, nodes: Vec::new(), edges: BTreeSet::new(), frames: Vec::new() };
    let entry = b.node(NodeKind::Entry, None, Effect::None);
    let exit = b.node(NodeKind::Exit, None, Effect::None);
    let out = b.block(&body.stmts, vec![(entry, EdgeKind::Normal)]);
    b.connect(&out, exit);
    b.finish(method, entry, exit)
}

type Dangling = Vec<(NodeId, EdgeKind)>;

/// Exit is always the second node created.
const EXIT: NodeId = NodeId(1);

#[derive(Default)]
struct Frame {
    has_catches: bool,
    has_finally: bool,
    in_body: bool,
    /// Nodes that raise into the catch handlers.
    catch_pending: Dangling,
    /// Nodes whose exception runs the finally block before propagating.
    exc_pending: Dangling,
    /// Return nodes that run the finally block on their way out.
    ret_pending: Dangling,
}

struct Builder<'a> {
    body: &'a Body,
    nodes: Vec<CfgNode>,
    edges: BTreeSet<(NodeId, NodeId, EdgeKind)>,
    frames: Vec<Frame>,
}

impl Builder<'_> {
    fn node(&mut self, kind: NodeKind, span: Option<Span>, effect: Effect) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(CfgNode { id, kind, span, effect, exprs: Vec::new(), anchors: Vec::new() });
        id
    }

    fn edge(&mut self, from: NodeId, to: NodeId, kind: EdgeKind) {
        self.edges.insert((from, to, kind));
    }

    fn connect(&mut self, preds: &Dangling, to: NodeId) {
        for &(p, k) in preds {
            self.edge(p, to, k);
        }
    }

    /// Routes an exception raised at `from`. Implicit (statement-level)
    /// exceptions that escape every frame are dropped; explicit ones reach exit.
    fn raise(&mut self, from: NodeId, kind: EdgeKind, to_exit: bool) {
        for f in self.frames.iter_mut().rev() {
            if f.in_body && f.has_catches {
                f.catch_pending.push((from, kind));
                return;
            }
            if f.has_finally {
                f.exc_pending.push((from, kind));
                return;
            }
        }
        if to_exit {
            self.edge(from, EXIT, kind);
        }
    }

    fn route_return(&mut self, from: NodeId, kind: EdgeKind) {
        if let Some(f) = self.frames.iter_mut().rev().find(|f| f.has_finally) {
            f.ret_pending.push((from, kind));
        } else {
            self.edge(from, EXIT, kind);
        }
    }

    fn in_try(&self) -> bool {
        !self.frames.is_empty()
    }

    /// Creates evaluation nodes for the calls in `roots` followed by an
    /// optional statement node; wires them in sequence after `preds`.
    /// Returns `(first, last)`.
    fn chain(&mut self, roots: &[ExprId], stmt: Option<Effect>, span: Span, preds: Dangling) -> (NodeId, NodeId) {
        let mut order = Vec::new();
        for &r in roots {
            self.calls_in(r, None, &mut order);
        }
        let mut ids: Vec<NodeId> = Vec::new();
        let mut call_node = Vec::new();
        for &(e, owner) in &order {
            if owner == Some(e) {
                let id = self.node(NodeKind::Eval, Some(self.body.expr(e).span), Effect::Eval(e));
                call_node.push((e, id));
                ids.push(id);
            }
        }
        let stmt_node = match stmt {
            Some(effect) => Some(self.node(NodeKind::Statement, Some(span), effect)),
            None if ids.is_empty() => Some(self.node(NodeKind::Statement, Some(span), Effect::None)),
            None => None,
        };
        ids.extend(stmt_node);
        let mut anchors = Vec::new();
        for &(e, owner) in &order {
            let at = owner
                .and_then(|o| call_node.iter().find(|(c, _)| *c == o).map(|&(_, n)| n))
                .or(stmt_node)
                .unwrap_or(*ids.last().expect("nonempty"));
            self.nodes[at.0].exprs.push(e);
            anchors.push((e, at));
        }
        for &id in &ids {
            self.nodes[id.0].anchors = anchors.clone();
        }
        self.connect(&preds, ids[0]);
        for w in ids.windows(2) {
            self.edge(w[0], w[1], EdgeKind::Normal);
        }
        (ids[0], *ids.last().expect("nonempty"))
    }

    /// Post-order walk recording `(expr, anchoring call)`; a call anchors itself.
    fn calls_in(&self, e: ExprId, owner: Option<ExprId>, out: &mut Vec<(ExprId, Option<ExprId>)>) {
        match &self.body.expr(e).kind {
            IrExpr::New { args, .. } => {
                for &a in args {
                    self.calls_in(a, Some(e), out);
                }
                out.push((e, Some(e)));
            }
            IrExpr::Call { receiver, args, .. } => {
                if let Receiver::Expr(r) = receiver {
                    self.calls_in(*r, Some(e), out);
                }
                for &a in args {
                    self.calls_in(a, Some(e), out);
                }
                out.push((e, Some(e)));
            }
            IrExpr::Field { receiver, .. } => {
                self.calls_in(*receiver, owner, out);
                out.push((e, owner));
            }
            IrExpr::NullCmp { operand, .. } => {
                self.calls_in(*operand, owner, out);
                out.push((e, owner));
            }
            IrExpr::Scalar(ops) => {
                for &o in ops {
                    self.calls_in(o, owner, out);
                }
                out.push((e, owner));
            }
            IrExpr::Var(_) | IrExpr::This | IrExpr::Null => out.push((e, owner)),
        }
    }

    fn block(&mut self, stmts: &[IrStmt], mut preds: Dangling) -> Dangling {
        for s in stmts {
            preds = self.stmt(s, preds);
        }
        preds
    }

    /// Straight-line statement: chain its nodes, add its exceptional edge.
    fn simple(&mut self, roots: &[ExprId], effect: Option<Effect>, span: Span, preds: Dangling) -> (NodeId, NodeId) {
        let (first, last) = self.chain(roots, effect, span, preds);
        if self.in_try() {
            self.raise(first, EdgeKind::Exceptional, false);
        }
        (first, last)
    }

    fn stmt(&mut self, s: &IrStmt, preds: Dangling) -> Dangling {
        match &s.kind {
            IrStmtKind::Local { var, init } => {
                let roots: Vec<ExprId> = init.iter().copied().collect();
                let (_, last) = self.simple(&roots, Some(Effect::Local { var: *var, init: *init }), s.span, preds);
                vec![(last, EdgeKind::Normal)]
            }
            IrStmtKind::Assign { target, value } => {
                let mut roots = Vec::new();
                if let AssignTarget::Field(f) = target {
                    roots.push(*f);
                }
                roots.push(*value);
                let effect = Effect::Assign { target: target.clone(), value: *value };
                let (_, last) = self.simple(&roots, Some(effect), s.span, preds);
                vec![(last, EdgeKind::Normal)]
            }
            IrStmtKind::Expr(e) => {
                let (_, last) = self.simple(&[*e], None, s.span, preds);
                vec![(last, EdgeKind::Normal)]
            }
            IrStmtKind::If { cond, then_branch, else_branch } => {
                let (_, c) = self.simple(&[*cond], Some(Effect::Cond(*cond)), s.span, preds);
                let mut out = self.stmt(then_branch, vec![(c, EdgeKind::True)]);
                match else_branch {
                    Some(e) => out.extend(self.stmt(e, vec![(c, EdgeKind::False)])),
                    None => out.push((c, EdgeKind::False)),
                }
                out
            }
            IrStmtKind::While { cond, body } => {
                let (first, c) = self.simple(&[*cond], Some(Effect::Cond(*cond)), s.span, preds);
                let back = self.stmt(body, vec![(c, EdgeKind::True)]);
                self.connect(&back, first);
                vec![(c, EdgeKind::False)]
            }
            IrStmtKind::Return(e) => {
                let roots: Vec<ExprId> = e.iter().copied().collect();
                let (_, r) = self.simple(&roots, Some(Effect::Return(*e)), s.span, preds);
                self.route_return(r, EdgeKind::Normal);
                Vec::new()
            }
            IrStmtKind::Throw(e) => {
                let roots: Vec<ExprId> = e.iter().copied().collect();
                let (_, t) = self.simple(&roots, Some(Effect::Throw(*e)), s.span, preds);
                self.raise(t, EdgeKind::Exceptional, true);
                Vec::new()
            }
            IrStmtKind::Block(b) => self.block(b, preds),
            IrStmtKind::Try { body, catches, finally } => self.try_stmt(body, catches, finally.as_deref(), preds),
        }
    }

    fn try_stmt(&mut self, body: &[IrStmt], catches: &[crate::model::IrCatch], finally: Option<&[IrStmt]>, preds: Dangling) -> Dangling {
        self.frames.push(Frame {
            has_catches: !catches.is_empty(),
            has_finally: finally.is_some(),
            in_body: true,
            ..Frame::default()
        });
        let mut normal = self.block(body, preds);
        self.frames.last_mut().expect("frame").in_body = false;
        let raisers = std::mem::take(&mut self.frames.last_mut().expect("frame").catch_pending);
        for c in catches {
            let entry = self.node(NodeKind::Statement, Some(c.span), Effect::Catch(c.var));
            self.connect(&raisers, entry);
            normal.extend(self.block(&c.body, vec![(entry, EdgeKind::Normal)]));
        }
        let frame = self.frames.pop().expect("frame");
        let Some(fin) = finally else {
            return normal;
        };
        let out = self.block(fin, normal);
        if !frame.exc_pending.is_empty() {
            let after = self.block(fin, frame.exc_pending);
            self.reraise(after);
        }
        if !frame.ret_pending.is_empty() {
            let after = self.block(fin, frame.ret_pending);
            self.continue_return(after);
        }
        out
    }

    /// Continues an exception after its exceptional finally copy ran. Branch
    /// edges leaving the copy keep their kind.
    fn reraise(&mut self, after: Dangling) {
        for (n, k) in after {
            let k = if k == EdgeKind::Normal { EdgeKind::Exceptional } else { k };
            self.raise(n, k, true);
        }
    }

    fn continue_return(&mut self, after: Dangling) {
        for (n, k) in after {
            self.route_return(n, k);
        }
    }

    fn finish(self, method: MethodId, entry: NodeId, exit: NodeId) -> Cfg {
        let n = self.nodes.len();
        let mut fwd = vec![Vec::new(); n];
        let mut back = vec![Vec::new(); n];
        for &(a, b, _) in &self.edges {
            fwd[a.0].push(b.0);
            back[b.0].push(a.0);
        }
        let from_entry = reach(&fwd, entry.0);
        let to_exit = reach(&back, exit.0);
        let mut remap = vec![None; n];
        let mut nodes = Vec::new();
        for (i, mut node) in self.nodes.into_iter().enumerate() {
            if from_entry[i] && to_exit[i] {
                remap[i] = Some(NodeId(nodes.len()));
                node.id = NodeId(nodes.len());
                nodes.push(node);
            }
        }
        for node in &mut nodes {
            node.anchors = node.anchors.iter().filter_map(|&(e, n)| remap[n.0].map(|n| (e, n))).collect();
        }
        let mut succ = vec![Vec::new(); nodes.len()];
        let mut pred = vec![Vec::new(); nodes.len()];
        for (a, b, k) in self.edges {
            if let (Some(a), Some(b)) = (remap[a.0], remap[b.0]) {
                succ[a.0].push((b, k));
                pred[b.0].push((a, k));
            }
        }
        Cfg {
            method,
            nodes,
            entry: remap[entry.0].expect("entry kept"),
            exit: remap[exit.0].expect("exit kept"),
            succ,
            pred,
        }
    }
}

fn reach(adj: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    seen[start] = true;
    let mut stack = vec![start];
    while let Some(n) = stack.pop() {
        for &m in &adj[n] {
            if !seen[m] {
                seen[m] = true;
                stack.push(m);
            }
        }
    }
    seen
}

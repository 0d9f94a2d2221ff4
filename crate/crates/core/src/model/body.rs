//! Resolved method bodies.
//!
//! Expressions live in a per-body arena, allocated in evaluation order
//! (receiver, then arguments, then the call itself). `using` statements are
//! desugared into try/finally during lowering.

use super::{MethodId, MethodInfo, ModelError, ModelErrorKind, SemanticModel, NULL_TYPE, PRIMITIVES, UNKNOWN_TYPE};
use crate::cfg::desugar_using;
use crate::frontend::{Block, Expr, ExprKind, MethodDecl, Span, Stmt, StmtKind, TypeExpr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExprId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarInfo {
    pub name: String,
    pub ty: String,
    /// Parameter position, for parameters.
    pub param: Option<usize>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Receiver {
    Expr(ExprId),
    /// `Type.m()` or an unqualified call to a static method.
    Static(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IrExpr {
    New { ty: String, args: Vec<ExprId>, targets: Vec<MethodId> },
    Call { receiver: Receiver, method: String, args: Vec<ExprId>, targets: Vec<MethodId>, synthetic: bool },
    /// Field access; `owner` is the declaring type. `write` marks assignment targets.
    Field { receiver: ExprId, owner: String, name: String, write: bool },
    Var(VarId),
    This,
    Null,
    NullCmp { operand: ExprId, negated: bool },
    /// Literals and arithmetic; never carries a resource.
    Scalar(Vec<ExprId>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExprInfo {
    pub kind: IrExpr,
    pub ty: String,
    pub span: Span,
    /// Root of an expression statement, whose value is discarded.
    pub discarded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssignTarget {
    Var(VarId),
    /// A `Field { write: true }` expression.
    Field(ExprId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrCatch {
    pub var: Option<VarId>,
    pub body: Vec<IrStmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IrStmtKind {
    Local { var: VarId, init: Option<ExprId> },
    Assign { target: AssignTarget, value: ExprId },
    Expr(ExprId),
    If { cond: ExprId, then_branch: Box<IrStmt>, else_branch: Option<Box<IrStmt>> },
    While { cond: ExprId, body: Box<IrStmt> },
    Try { body: Vec<IrStmt>, catches: Vec<IrCatch>, finally: Option<Vec<IrStmt>> },
    Return(Option<ExprId>),
    Throw(Option<ExprId>),
    Block(Vec<IrStmt>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrStmt {
    pub kind: IrStmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Body {
    pub vars: Vec<VarInfo>,
    pub exprs: Vec<ExprInfo>,
    pub stmts: Vec<IrStmt>,
    /// Variables bound to the parameters, by position.
    pub params: Vec<VarId>,
}

impl Body {
    pub fn expr(&self, id: ExprId) -> &ExprInfo {
        &self.exprs[id.0]
    }

    pub fn var(&self, id: VarId) -> &VarInfo {
        &self.vars[id.0]
    }

    pub fn expr_ids(&self) -> impl Iterator<Item = ExprId> {
        (0..self.exprs.len()).map(ExprId)
    }

    /// Receiver expression of a call, if it has one.
    pub fn call_receiver(&self, id: ExprId) -> Option<ExprId> {
        match &self.expr(id).kind {
            IrExpr::Call { receiver: Receiver::Expr(r), .. } => Some(*r),
            _ => None,
        }
    }

    /// If `id` reads `this.f` (explicitly or implicitly), the field name.
    pub fn this_field(&self, id: ExprId) -> Option<&str> {
        match &self.expr(id).kind {
            IrExpr::Field { receiver, name, .. } if self.expr(*receiver).kind == IrExpr::This => Some(name),
            _ => None,
        }
    }
}

/// Collects every type written inside a statement list (locals, creations,
/// catch clauses).
pub(super) fn collect_types(stmts: &[Stmt], out: &mut Vec<TypeExpr>) {
    for s in stmts {
        collect_stmt(s, out);
    }
}

fn collect_stmt(s: &Stmt, out: &mut Vec<TypeExpr>) {
    match &s.kind {
        StmtKind::Local { ty, init, .. } => {
            out.extend(ty.iter().cloned());
            init.iter().for_each(|e| collect_expr(e, out));
        }
        StmtKind::Assign { target, value } => {
            collect_expr(target, out);
            collect_expr(value, out);
        }
        StmtKind::Expr(e) | StmtKind::Return(Some(e)) | StmtKind::Throw(Some(e)) => collect_expr(e, out),
        StmtKind::Return(None) | StmtKind::Throw(None) => {}
        StmtKind::If { cond, then_branch, else_branch } => {
            collect_expr(cond, out);
            collect_stmt(then_branch, out);
            if let Some(e) = else_branch {
                collect_stmt(e, out);
            }
        }
        StmtKind::While { cond, body } => {
            collect_expr(cond, out);
            collect_stmt(body, out);
        }
        StmtKind::Try { body, catches, finally } => {
            collect_types(&body.stmts, out);
            for c in catches {
                out.extend(c.ty.iter().cloned());
                collect_types(&c.body.stmts, out);
            }
            if let Some(f) = finally {
                collect_types(&f.stmts, out);
            }
        }
        StmtKind::Using { ty, init, body, .. } => {
            out.extend(ty.iter().cloned());
            collect_expr(init, out);
            collect_stmt(body, out);
        }
        StmtKind::Block(b) => collect_types(&b.stmts, out),
    }
}

fn collect_expr(e: &Expr, out: &mut Vec<TypeExpr>) {
    match &e.kind {
        ExprKind::New { ty, args } => {
            out.push(ty.clone());
            args.iter().for_each(|a| collect_expr(a, out));
        }
        ExprKind::Call { receiver, args, .. } => {
            if let Some(r) = receiver {
                collect_expr(r, out);
            }
            args.iter().for_each(|a| collect_expr(a, out));
        }
        ExprKind::Field { receiver, .. } => collect_expr(receiver, out),
        ExprKind::NullCmp { operand, .. } | ExprKind::Unary { operand, .. } => collect_expr(operand, out),
        ExprKind::Binary { lhs, rhs, .. } => {
            collect_expr(lhs, out);
            collect_expr(rhs, out);
        }
        ExprKind::Name(_) | ExprKind::This | ExprKind::Null | ExprKind::Int(_) | ExprKind::Str(_) | ExprKind::Bool(_) => {}
    }
}

pub(super) fn lower(model: &SemanticModel, method: &MethodInfo, decl: &MethodDecl, file: &str) -> (Body, Vec<ModelError>) {
    let mut l = Lowerer { model, method, file, body: Body::default(), scopes: vec![Vec::new()], errors: Vec::new() };
    for (i, p) in method.params.iter().enumerate() {
        let v = l.declare(&p.name, p.ty.clone(), Some(i), p.span);
        l.body.params.push(v);
    }
    if let Some(block) = &decl.body {
        l.body.stmts = l.block(block);
    }
    (l.body, l.errors)
}

struct Lowerer<'a> {
    model: &'a SemanticModel,
    method: &'a MethodInfo,
    file: &'a str,
    body: Body,
    scopes: Vec<Vec<(String, VarId)>>,
    errors: Vec<ModelError>,
}

impl Lowerer<'_> {
    fn err(&mut self, kind: ModelErrorKind, span: Span, message: impl Into<String>) {
        self.errors.push(ModelError::new(kind, self.file, span, message));
    }

    fn declare(&mut self, name: &str, ty: String, param: Option<usize>, span: Span) -> VarId {
        if self.scopes.last().expect("scope").iter().any(|(n, _)| n == name) {
            self.err(ModelErrorKind::DuplicateMember, span, format!("`{name}` is already declared in this scope"));
        }
        let id = VarId(self.body.vars.len());
        self.body.vars.push(VarInfo { name: name.to_string(), ty, param, span });
        self.scopes.last_mut().expect("scope").push((name.to_string(), id));
        id
    }

    fn lookup(&self, name: &str) -> Option<VarId> {
        self.scopes.iter().rev().find_map(|s| s.iter().rev().find(|(n, _)| n == name).map(|(_, v)| *v))
    }

    fn push(&mut self, kind: IrExpr, ty: String, span: Span) -> ExprId {
        let id = ExprId(self.body.exprs.len());
        self.body.exprs.push(ExprInfo { kind, ty, span, discarded: false });
        id
    }

    fn type_name(&mut self, t: &TypeExpr) -> String {
        let name = t.to_string();
        if !self.model.is_known_type(&name) {
            self.err(ModelErrorKind::UnresolvedType, t.span, format!("unknown type `{name}`"));
        }
        name
    }

    fn scoped<T>(&mut self, f: impl FnOnce(&mut Self) -> T) -> T {
        self.scopes.push(Vec::new());
        let out = f(self);
        self.scopes.pop();
        out
    }

    fn block(&mut self, b: &Block) -> Vec<IrStmt> {
        self.scoped(|l| b.stmts.iter().map(|s| l.stmt(s)).collect())
    }

    fn nested(&mut self, s: &Stmt) -> IrStmt {
        self.scoped(|l| l.stmt(s))
    }

    fn stmt(&mut self, s: &Stmt) -> IrStmt {
        let kind = match &s.kind {
            StmtKind::Local { ty, name, init } => {
                let init = init.as_ref().map(|e| self.expr(e));
                let ty = match (ty, init) {
                    (Some(t), _) => self.type_name(t),
                    (None, Some(e)) => self.body.expr(e).ty.clone(),
                    (None, None) => UNKNOWN_TYPE.to_string(),
                };
                let var = self.declare(&name.name, ty, None, name.span);
                IrStmtKind::Local { var, init }
            }
            StmtKind::Assign { target, value } => {
                let target = match &target.kind {
                    ExprKind::Name(n) => match self.lookup(n) {
                        Some(v) => Some(AssignTarget::Var(v)),
                        None => self.implicit_field(n, target.span, true).map(AssignTarget::Field),
                    },
                    ExprKind::Field { receiver, name } => {
                        let recv = self.expr(receiver);
                        self.field_access(recv, &name.name, target.span, true).map(AssignTarget::Field)
                    }
                    _ => None,
                };
                let value = self.expr(value);
                match target {
                    Some(target) => IrStmtKind::Assign { target, value },
                    None => {
                        self.err(ModelErrorKind::UnresolvedName, s.span, "unresolved assignment target");
                        IrStmtKind::Expr(value)
                    }
                }
            }
            StmtKind::Expr(e) => {
                let id = self.expr(e);
                self.body.exprs[id.0].discarded = true;
                IrStmtKind::Expr(id)
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                let cond = self.expr(cond);
                let then_branch = Box::new(self.nested(then_branch));
                let else_branch = else_branch.as_ref().map(|e| Box::new(self.nested(e)));
                IrStmtKind::If { cond, then_branch, else_branch }
            }
            StmtKind::While { cond, body } => {
                let cond = self.expr(cond);
                IrStmtKind::While { cond, body: Box::new(self.nested(body)) }
            }
            StmtKind::Try { body, catches, finally } => {
                let body = self.block(body);
                let catches = catches
                    .iter()
                    .map(|c| {
                        self.scoped(|l| {
                            let var = match (&c.ty, &c.name) {
                                (Some(t), Some(n)) => {
                                    let ty = l.type_name(t);
                                    Some(l.declare(&n.name, ty, None, n.span))
                                }
                                (Some(t), None) => {
                                    l.type_name(t);
                                    None
                                }
                                _ => None,
                            };
                            IrCatch { var, body: l.block(&c.body), span: c.span }
                        })
                    })
                    .collect();
                let finally = finally.as_ref().map(|f| self.block(f));
                IrStmtKind::Try { body, catches, finally }
            }
            StmtKind::Using { .. } => {
                let desugared = desugar_using(s);
                return self.stmt(&desugared);
            }
            StmtKind::Return(e) => {
                let e = e.as_ref().map(|e| self.expr(e));
                IrStmtKind::Return(e)
            }
            StmtKind::Throw(e) => {
                let e = e.as_ref().map(|e| self.expr(e));
                IrStmtKind::Throw(e)
            }
            StmtKind::Block(b) => IrStmtKind::Block(self.block(b)),
        };
        IrStmt { kind, span: s.span }
    }

    fn this_expr(&mut self, span: Span) -> ExprId {
        self.push(IrExpr::This, self.method.owner.clone(), span)
    }

    fn implicit_field(&mut self, name: &str, span: Span, write: bool) -> Option<ExprId> {
        self.model.find_field(&self.method.owner, name)?;
        let this = self.this_expr(span);
        self.field_access(this, name, span, write)
    }

    fn field_access(&mut self, receiver: ExprId, name: &str, span: Span, write: bool) -> Option<ExprId> {
        let recv_ty = self.body.expr(receiver).ty.clone();
        if recv_ty == UNKNOWN_TYPE {
            return None;
        }
        match self.model.find_field(&recv_ty, name) {
            Some((owner, f)) => {
                let (owner, ty) = (owner.name.clone(), f.ty.clone());
                Some(self.push(IrExpr::Field { receiver, owner, name: name.to_string(), write }, ty, span))
            }
            None => {
                self.err(ModelErrorKind::UnresolvedMember, span, format!("type `{recv_ty}` has no field `{name}`"));
                None
            }
        }
    }

    fn unknown(&mut self, operands: Vec<ExprId>, span: Span) -> ExprId {
        self.push(IrExpr::Scalar(operands), UNKNOWN_TYPE.to_string(), span)
    }

    fn expr(&mut self, e: &Expr) -> ExprId {
        match &e.kind {
            ExprKind::New { ty, args } => {
                let ty = self.type_name(ty);
                let args: Vec<ExprId> = args.iter().map(|a| self.expr(a)).collect();
                let targets = self.model.constructors(&ty, args.len());
                if targets.is_empty() && self.model.is_known_type(&ty) {
                    self.err(
                        ModelErrorKind::UnresolvedMember,
                        e.span,
                        format!("no constructor of `{ty}` takes {} argument(s)", args.len()),
                    );
                }
                self.push(IrExpr::New { ty: ty.clone(), args, targets }, ty, e.span)
            }
            ExprKind::Call { receiver, method, args, synthetic } => {
                let (recv, recv_ty, virtual_dispatch) = match receiver.as_deref() {
                    None => {
                        let static_target = self
                            .model
                            .lookup_method(&self.method.owner, &method.name, args.len())
                            .is_some_and(|m| self.model.method(m).is_static);
                        if static_target {
                            (Receiver::Static(self.method.owner.clone()), self.method.owner.clone(), false)
                        } else {
                            let this = self.this_expr(e.span);
                            (Receiver::Expr(this), self.method.owner.clone(), true)
                        }
                    }
                    Some(Expr { kind: ExprKind::Name(n), .. })
                        if self.lookup(n).is_none()
                            && self.model.find_field(&self.method.owner, n).is_none()
                            && self.model.types.contains_key(n.as_str()) =>
                    {
                        (Receiver::Static(n.clone()), n.clone(), false)
                    }
                    Some(r) => {
                        let r = self.expr(r);
                        let ty = self.body.expr(r).ty.clone();
                        (Receiver::Expr(r), ty, true)
                    }
                };
                let args: Vec<ExprId> = args.iter().map(|a| self.expr(a)).collect();
                let targets = self.model.resolve_call(&recv_ty, &method.name, args.len(), virtual_dispatch);
                let ty = match targets.first() {
                    Some(&t) => self.model.method(t).ret.clone(),
                    None => {
                        if recv_ty != UNKNOWN_TYPE {
                            self.err(
                                ModelErrorKind::UnresolvedMember,
                                method.span,
                                format!("type `{recv_ty}` has no method `{}` taking {} argument(s)", method.name, args.len()),
                            );
                        }
                        UNKNOWN_TYPE.to_string()
                    }
                };
                let kind = IrExpr::Call { receiver: recv, method: method.name.clone(), args, targets, synthetic: *synthetic };
                self.push(kind, ty, e.span)
            }
            ExprKind::Field { receiver, name } => {
                let r = self.expr(receiver);
                match self.field_access(r, &name.name, e.span, false) {
                    Some(id) => id,
                    None => self.unknown(vec![r], e.span),
                }
            }
            ExprKind::Name(n) => {
                if let Some(v) = self.lookup(n) {
                    let ty = self.body.var(v).ty.clone();
                    return self.push(IrExpr::Var(v), ty, e.span);
                }
                if let Some(id) = self.implicit_field(n, e.span, false) {
                    return id;
                }
                self.err(ModelErrorKind::UnresolvedName, e.span, format!("unresolved name `{n}`"));
                self.unknown(Vec::new(), e.span)
            }
            ExprKind::This => self.this_expr(e.span),
            ExprKind::Null => self.push(IrExpr::Null, NULL_TYPE.to_string(), e.span),
            ExprKind::NullCmp { operand, negated } => {
                let operand = self.expr(operand);
                self.push(IrExpr::NullCmp { operand, negated: *negated }, "bool".into(), e.span)
            }
            ExprKind::Int(_) => self.push(IrExpr::Scalar(Vec::new()), "int".into(), e.span),
            ExprKind::Str(_) => self.push(IrExpr::Scalar(Vec::new()), "string".into(), e.span),
            ExprKind::Bool(_) => self.push(IrExpr::Scalar(Vec::new()), "bool".into(), e.span),
            ExprKind::Binary { op, lhs, rhs } => {
                let l = self.expr(lhs);
                let r = self.expr(rhs);
                let ty = if op.is_boolean() { "bool" } else { "int" };
                self.push(IrExpr::Scalar(vec![l, r]), ty.into(), e.span)
            }
            ExprKind::Unary { operand, op } => {
                let o = self.expr(operand);
                let ty = match op {
                    crate::frontend::UnOp::Not => "bool",
                    crate::frontend::UnOp::Neg => "int",
                };
                self.push(IrExpr::Scalar(vec![o]), ty.into(), e.span)
            }
        }
    }
}

/// True for types that can never hold a resource.
pub fn is_scalar_type(ty: &str) -> bool {
    PRIMITIVES.contains(&ty) || ty == NULL_TYPE || ty == UNKNOWN_TYPE
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;
    use crate::model::build_model;

    fn body_of(src: &str, method: &str) -> (SemanticModel, Body) {
        let (m, errs) = build_model(&[parse_source("t.moo", src).unwrap()]);
        assert!(errs.is_empty(), "{errs:?}");
        let b = m.user_methods().find(|x| x.name == method).unwrap().body.clone().unwrap();
        (m, b)
    }

    #[test]
    fn evaluation_order_and_types() {
        let (_, b) = body_of("class A { void m() { Socket s = new Socket(); s.Connect(\"h\"); } }", "m");
        let kinds: Vec<&str> = b
            .exprs
            .iter()
            .map(|e| match e.kind {
                IrExpr::New { .. } => "new",
                IrExpr::Call { .. } => "call",
                IrExpr::Var(_) => "var",
                IrExpr::Scalar(_) => "scalar",
                _ => "other",
            })
            .collect();
        assert_eq!(kinds, vec!["new", "var", "scalar", "call"]);
        assert_eq!(b.exprs[0].ty, "Socket");
        assert!(b.exprs[3].discarded);
    }

    #[test]
    fn implicit_this_field_and_static_receiver() {
        let (_, b) = body_of(
            "class A { Socket f; void m() { f = null; Encoding e = Encoding.GetEncoding(\"x\"); f.Close(); } }",
            "m",
        );
        let IrStmtKind::Assign { target: AssignTarget::Field(t), .. } = &b.stmts[0].kind else { panic!() };
        assert_eq!(b.this_field(*t), Some("f"));
        let IrStmtKind::Local { init: Some(init), .. } = &b.stmts[1].kind else { panic!() };
        assert!(matches!(&b.expr(*init).kind, IrExpr::Call { receiver: Receiver::Static(t), .. } if t == "Encoding"));
        let IrStmtKind::Expr(c) = &b.stmts[2].kind else { panic!() };
        assert_eq!(b.this_field(b.call_receiver(*c).unwrap()), Some("f"));
    }

    #[test]
    fn using_is_desugared() {
        let (_, b) = body_of("class A { void m() { using (var s = new Socket()) { s.Send(\"x\"); } } }", "m");
        let IrStmtKind::Block(inner) = &b.stmts[0].kind else { panic!("{:?}", b.stmts[0]) };
        assert!(matches!(inner[0].kind, IrStmtKind::Local { .. }));
        let IrStmtKind::Try { finally: Some(f), catches, .. } = &inner[1].kind else { panic!() };
        assert!(catches.is_empty());
        let IrStmtKind::Expr(d) = &f[0].kind else { panic!() };
        assert!(matches!(&b.expr(*d).kind, IrExpr::Call { method, synthetic: true, .. } if method == "Dispose"));
    }

    #[test]
    fn unresolved_name_is_reported() {
        let (_, errs) = build_model(&[parse_source("t.moo", "class A { void m() { x.Close(); } }").unwrap()]);
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].kind, ModelErrorKind::UnresolvedName);
    }
}

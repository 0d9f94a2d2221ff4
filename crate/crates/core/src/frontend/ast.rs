//! Syntax tree for MiniOO compilation units.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A 1-based line/column position. The owning [`CompilationUnit`] carries the file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub const fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AttrKind {
    MustCall,
    Owning,
    MustCallAlias,
    EnsuresCalledMethods,
    CreateMustCallFor,
}

impl AttrKind {
    pub const ALL: [AttrKind; 5] = [
        AttrKind::MustCall,
        AttrKind::Owning,
        AttrKind::MustCallAlias,
        AttrKind::EnsuresCalledMethods,
        AttrKind::CreateMustCallFor,
    ];

    /// Number of identifier arguments the attribute takes.
    pub fn arity(self) -> usize {
        match self {
            AttrKind::MustCall | AttrKind::CreateMustCallFor => 1,
            AttrKind::Owning | AttrKind::MustCallAlias => 0,
            AttrKind::EnsuresCalledMethods => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AttrKind::MustCall => "MustCall",
            AttrKind::Owning => "Owning",
            AttrKind::MustCallAlias => "MustCallAlias",
            AttrKind::EnsuresCalledMethods => "EnsuresCalledMethods",
            AttrKind::CreateMustCallFor => "CreateMustCallFor",
        }
    }
}

impl fmt::Display for AttrKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttrKind {
    type Err = ();

    // case-sensitive on purpose
    fn from_str(s: &str) -> Result<Self, ()> {
        AttrKind::ALL.into_iter().find(|k| k.name() == s).ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub kind: AttrKind,
    pub args: Vec<String>,
    pub span: Span,
}

impl AttributeSpec {
    pub fn new(kind: AttrKind, args: Vec<String>, span: Span) -> Self {
        AttributeSpec { kind, args, span }
    }

    pub fn arity_ok(&self) -> bool {
        self.args.len() == self.kind.arity()
    }
}

impl fmt::Display for AttributeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            write!(f, "[{}]", self.kind)
        } else {
            write!(f, "[{}({})]", self.kind, self.args.join(", "))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

impl Ident {
    pub fn new(name: impl Into<String>, span: Span) -> Self {
        Ident { name: name.into(), span }
    }
}

/// A type as written: `Socket`, `int`, `List<Socket>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeExpr {
    pub name: String,
    pub arg: Option<Box<TypeExpr>>,
    pub span: Span,
}

impl TypeExpr {
    pub fn named(name: impl Into<String>, span: Span) -> Self {
        TypeExpr { name: name.into(), arg: None, span }
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.arg {
            Some(arg) => write!(f, "{}<{}>", self.name, arg),
            None => f.write_str(&self.name),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modifier {
    Public,
    Private,
    Protected,
    Internal,
    Static,
    Readonly,
    Virtual,
    Override,
    Abstract,
}

impl Modifier {
    pub fn keyword(self) -> &'static str {
        match self {
            Modifier::Public => "public",
            Modifier::Private => "private",
            Modifier::Protected => "protected",
            Modifier::Internal => "internal",
            Modifier::Static => "static",
            Modifier::Readonly => "readonly",
            Modifier::Virtual => "virtual",
            Modifier::Override => "override",
            Modifier::Abstract => "abstract",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CompilationUnit {
    pub path: String,
    pub classes: Vec<ClassDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDecl {
    pub attrs: Vec<AttributeSpec>,
    pub modifiers: Vec<Modifier>,
    pub name: Ident,
    /// `class Container() : IDisposable` style empty parameter list.
    pub empty_parens: bool,
    pub base: Option<TypeExpr>,
    pub interface: Option<TypeExpr>,
    pub members: Vec<Member>,
    pub span: Span,
}

impl ClassDecl {
    pub fn fields(&self) -> impl Iterator<Item = &FieldDecl> {
        self.members.iter().filter_map(|m| match m {
            Member::Field(f) => Some(f),
            _ => None,
        })
    }

    pub fn methods(&self) -> impl Iterator<Item = &MethodDecl> {
        self.members.iter().filter_map(|m| match m {
            Member::Method(m) => Some(m),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Member {
    Field(FieldDecl),
    Method(MethodDecl),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDecl {
    pub attrs: Vec<AttributeSpec>,
    pub modifiers: Vec<Modifier>,
    pub ty: TypeExpr,
    pub name: Ident,
    pub span: Span,
}

impl FieldDecl {
    pub fn is_readonly(&self) -> bool {
        self.modifiers.contains(&Modifier::Readonly)
    }
}

/// Method or constructor. Constructors have `ret == None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodDecl {
    pub attrs: Vec<AttributeSpec>,
    pub modifiers: Vec<Modifier>,
    pub ret: Option<TypeExpr>,
    pub name: Ident,
    pub params: Vec<Param>,
    /// `None` for external declarations ending in `;`.
    pub body: Option<Block>,
    pub span: Span,
}

impl MethodDecl {
    pub fn is_ctor(&self) -> bool {
        self.ret.is_none()
    }

    pub fn is_static(&self) -> bool {
        self.modifiers.contains(&Modifier::Static)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub attrs: Vec<AttributeSpec>,
    pub ty: TypeExpr,
    pub name: Ident,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    /// `T x = e;`, `var x = e;` or `T x;`
    Local { ty: Option<TypeExpr>, name: Ident, init: Option<Expr> },
    /// Target is a name or a field access.
    Assign { target: Expr, value: Expr },
    Expr(Expr),
    If { cond: Expr, then_branch: Box<Stmt>, else_branch: Option<Box<Stmt>> },
    While { cond: Expr, body: Box<Stmt> },
    Try { body: Block, catches: Vec<CatchClause>, finally: Option<Block> },
    Using { ty: Option<TypeExpr>, name: Ident, init: Expr, body: Box<Stmt> },
    Return(Option<Expr>),
    /// `throw;` rethrows and is only legal inside a catch block.
    Throw(Option<Expr>),
    Block(Block),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatchClause {
    pub ty: Option<TypeExpr>,
    pub name: Option<Ident>,
    pub body: Block,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Le => "<=",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn is_boolean(self) -> bool {
        !matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    New { ty: TypeExpr, args: Vec<Expr> },
    /// `recv.m(args)`, or `m(args)` when `receiver` is `None`.
    Call { receiver: Option<Box<Expr>>, method: Ident, args: Vec<Expr>, synthetic: bool },
    Field { receiver: Box<Expr>, name: Ident },
    Name(String),
    This,
    Null,
    /// `e == null` (`negated == false`) or `e != null`.
    NullCmp { operand: Box<Expr>, negated: bool },
    Int(i64),
    Str(String),
    Bool(bool),
    /// Opaque scalar arithmetic/logic; never carries a resource.
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Unary { op: UnOp, operand: Box<Expr> },
}

// ---- span erasure, for span-insensitive comparisons ----

impl CompilationUnit {
    /// Copy with every span zeroed. Two trees are structurally identical
    /// iff their stripped forms compare equal.
    pub fn without_spans(&self) -> CompilationUnit {
        let mut unit = self.clone();
        unit.classes.iter_mut().for_each(strip_class);
        unit
    }
}

fn strip_attrs(attrs: &mut [AttributeSpec]) {
    attrs.iter_mut().for_each(|a| a.span = Span::default());
}

fn strip_type(ty: &mut TypeExpr) {
    ty.span = Span::default();
    if let Some(arg) = ty.arg.as_deref_mut() {
        strip_type(arg);
    }
}

fn strip_class(c: &mut ClassDecl) {
    c.span = Span::default();
    c.name.span = Span::default();
    strip_attrs(&mut c.attrs);
    c.base.iter_mut().for_each(strip_type);
    c.interface.iter_mut().for_each(strip_type);
    for m in &mut c.members {
        match m {
            Member::Field(f) => {
                f.span = Span::default();
                f.name.span = Span::default();
                strip_attrs(&mut f.attrs);
                strip_type(&mut f.ty);
            }
            Member::Method(m) => {
                m.span = Span::default();
                m.name.span = Span::default();
                strip_attrs(&mut m.attrs);
                m.ret.iter_mut().for_each(strip_type);
                for p in &mut m.params {
                    p.span = Span::default();
                    p.name.span = Span::default();
                    strip_attrs(&mut p.attrs);
                    strip_type(&mut p.ty);
                }
                m.body.iter_mut().for_each(strip_block);
            }
        }
    }
}

pub(crate) fn strip_block(b: &mut Block) {
    b.span = Span::default();
    b.stmts.iter_mut().for_each(strip_stmt);
}

pub(crate) fn strip_stmt(s: &mut Stmt) {
    s.span = Span::default();
    match &mut s.kind {
        StmtKind::Local { ty, name, init } => {
            ty.iter_mut().for_each(strip_type);
            name.span = Span::default();
            init.iter_mut().for_each(strip_expr);
        }
        StmtKind::Assign { target, value } => {
            strip_expr(target);
            strip_expr(value);
        }
        StmtKind::Expr(e) => strip_expr(e),
        StmtKind::If { cond, then_branch, else_branch } => {
            strip_expr(cond);
            strip_stmt(then_branch);
            if let Some(e) = else_branch {
                strip_stmt(e);
            }
        }
        StmtKind::While { cond, body } => {
            strip_expr(cond);
            strip_stmt(body);
        }
        StmtKind::Try { body, catches, finally } => {
            strip_block(body);
            for c in catches {
                c.span = Span::default();
                c.ty.iter_mut().for_each(strip_type);
                if let Some(n) = &mut c.name {
                    n.span = Span::default();
                }
                strip_block(&mut c.body);
            }
            finally.iter_mut().for_each(strip_block);
        }
        StmtKind::Using { ty, name, init, body } => {
            ty.iter_mut().for_each(strip_type);
            name.span = Span::default();
            strip_expr(init);
            strip_stmt(body);
        }
        StmtKind::Return(e) | StmtKind::Throw(e) => e.iter_mut().for_each(strip_expr),
        StmtKind::Block(b) => strip_block(b),
    }
}

fn strip_expr(e: &mut Expr) {
    e.span = Span::default();
    match &mut e.kind {
        ExprKind::New { ty, args } => {
            strip_type(ty);
            args.iter_mut().for_each(strip_expr);
        }
        ExprKind::Call { receiver, method, args, .. } => {
            if let Some(r) = receiver {
                strip_expr(r);
            }
            method.span = Span::default();
            args.iter_mut().for_each(strip_expr);
        }
        ExprKind::Field { receiver, name } => {
            strip_expr(receiver);
            name.span = Span::default();
        }
        ExprKind::NullCmp { operand, .. } | ExprKind::Unary { operand, .. } => strip_expr(operand),
        ExprKind::Binary { lhs, rhs, .. } => {
            strip_expr(lhs);
            strip_expr(rhs);
        }
        ExprKind::Name(_) | ExprKind::This | ExprKind::Null | ExprKind::Int(_) | ExprKind::Str(_) | ExprKind::Bool(_) => {}
    }
}

impl CompilationUnit {
    /// Every attribute in the unit, in source order.
    pub fn attributes(&self) -> Vec<&AttributeSpec> {
        let mut out = Vec::new();
        for c in &self.classes {
            out.extend(c.attrs.iter());
            for m in &c.members {
                match m {
                    Member::Field(f) => out.extend(f.attrs.iter()),
                    Member::Method(m) => {
                        out.extend(m.attrs.iter());
                        for p in &m.params {
                            out.extend(p.attrs.iter());
                        }
                    }
                }
            }
        }
        out
    }
}

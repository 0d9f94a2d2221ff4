//! Recursive-descent parser for MiniOO.

use super::ast::*;
use super::lexer::{Token, TokenKind};
use super::FrontendError;

pub struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
    catch_depth: usize,
}

type PResult<T> = Result<T, FrontendError>;

impl<'t> Parser<'t> {
    /// `tokens` must end with `Eof`, as produced by [`super::lex`].
    pub fn new(tokens: &'t [Token]) -> Self {
        assert!(matches!(tokens.last(), Some(Token { kind: TokenKind::Eof, .. })), "token stream must end with Eof");
        Parser { tokens, pos: 0, catch_depth: 0 }
    }

    fn peek(&self) -> &TokenKind {
        &self.tokens[self.pos].kind
    }

    fn peek_at(&self, n: usize) -> &TokenKind {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].kind
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn bump(&mut self) -> &Token {
        let t = &self.tokens[self.pos];
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == kind {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        Err(FrontendError::Parse { span: self.span(), message: format!("expected {expected}, found {}", self.peek()) })
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<Span> {
        if *self.peek() == kind {
            Ok(self.bump().span)
        } else {
            self.error(&kind.to_string())
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        match self.peek().clone() {
            TokenKind::Ident(name) => {
                let span = self.bump().span;
                Ok(Ident::new(name, span))
            }
            _ => self.error("identifier"),
        }
    }

    pub fn parse_unit(&mut self, path: &str) -> PResult<CompilationUnit> {
        let mut classes = Vec::new();
        while *self.peek() != TokenKind::Eof {
            classes.push(self.class_decl()?);
        }
        Ok(CompilationUnit { path: path.to_string(), classes })
    }

    fn attributes(&mut self) -> PResult<Vec<AttributeSpec>> {
        let mut attrs = Vec::new();
        while *self.peek() == TokenKind::LBracket {
            attrs.push(self.attribute()?);
        }
        Ok(attrs)
    }

    /// Parses one bracketed attribute; the cursor must be on `[`.
    pub fn attribute(&mut self) -> PResult<AttributeSpec> {
        let span = self.expect(TokenKind::LBracket)?;
        let name = self.ident()?;
        let kind: AttrKind = name.name.parse().map_err(|_| FrontendError::Parse {
            span: name.span,
            message: format!("unknown attribute `{}`", name.name),
        })?;
        let mut args = Vec::new();
        if self.eat(&TokenKind::LParen) {
            if *self.peek() != TokenKind::RParen {
                loop {
                    args.push(self.ident()?.name);
                    if !self.eat(&TokenKind::Comma) {
                        break;
                    }
                }
            }
            self.expect(TokenKind::RParen)?;
        }
        self.expect(TokenKind::RBracket)?;
        let attr = AttributeSpec::new(kind, args, span);
        if !attr.arity_ok() {
            return Err(FrontendError::Parse {
                span,
                message: format!("attribute `{}` takes {} argument(s), found {}", kind, kind.arity(), attr.args.len()),
            });
        }
        Ok(attr)
    }

    fn modifiers(&mut self) -> Vec<Modifier> {
        let mut mods = Vec::new();
        loop {
            let m = match self.peek() {
                TokenKind::Public => Modifier::Public,
                TokenKind::Private => Modifier::Private,
                TokenKind::Protected => Modifier::Protected,
                TokenKind::Internal => Modifier::Internal,
                TokenKind::Static => Modifier::Static,
                TokenKind::Readonly => Modifier::Readonly,
                TokenKind::Virtual => Modifier::Virtual,
                TokenKind::Override => Modifier::Override,
                TokenKind::Abstract => Modifier::Abstract,
                _ => return mods,
            };
            self.bump();
            mods.push(m);
        }
    }

    fn class_decl(&mut self) -> PResult<ClassDecl> {
        let span = self.span();
        let attrs = self.attributes()?;
        let modifiers = self.modifiers();
        self.expect(TokenKind::Class)?;
        let name = self.ident()?;
        let empty_parens = if self.eat(&TokenKind::LParen) {
            self.expect(TokenKind::RParen)?;
            true
        } else {
            false
        };
        let (mut base, mut interface) = (None, None);
        if self.eat(&TokenKind::Colon) {
            loop {
                let ty = self.type_expr()?;
                if ty.name == "IDisposable" && ty.arg.is_none() {
                    if interface.is_some() {
                        return Err(FrontendError::Parse { span: ty.span, message: "duplicate interface".into() });
                    }
                    interface = Some(ty);
                } else {
                    if base.is_some() || interface.is_some() {
                        return Err(FrontendError::Parse {
                            span: ty.span,
                            message: "supertype must come first and at most one is allowed".into(),
                        });
                    }
                    base = Some(ty);
                }
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        self.expect(TokenKind::LBrace)?;
        let mut members = Vec::new();
        while !self.eat(&TokenKind::RBrace) {
            members.push(self.member(&name.name)?);
        }
        Ok(ClassDecl { attrs, modifiers, name, empty_parens, base, interface, members, span })
    }

    fn member(&mut self, class_name: &str) -> PResult<Member> {
        let span = self.span();
        let attrs = self.attributes()?;
        let modifiers = self.modifiers();
        let is_ctor = matches!(self.peek(), TokenKind::Ident(n) if n == class_name) && *self.peek_at(1) == TokenKind::LParen;
        let ret = if is_ctor { None } else { Some(self.type_expr()?) };
        let name = self.ident()?;
        if let Some(ty) = ret.as_ref().filter(|_| *self.peek() != TokenKind::LParen) {
            let ty = ty.clone();
            self.expect(TokenKind::Semi)?;
            return Ok(Member::Field(FieldDecl { attrs, modifiers, ty, name, span }));
        }
        self.expect(TokenKind::LParen)?;
        let mut params = Vec::new();
        if *self.peek() != TokenKind::RParen {
            loop {
                let pspan = self.span();
                let pattrs = self.attributes()?;
                let ty = self.type_expr()?;
                let pname = self.ident()?;
                params.push(Param { attrs: pattrs, ty, name: pname, span: pspan });
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen)?;
        let body = if self.eat(&TokenKind::Semi) { None } else { Some(self.block()?) };
        Ok(Member::Method(MethodDecl { attrs, modifiers, ret, name, params, body, span }))
    }

    fn type_expr(&mut self) -> PResult<TypeExpr> {
        let name = self.ident()?;
        let arg = if self.eat(&TokenKind::Lt) {
            let inner = self.type_expr()?;
            self.expect(TokenKind::Gt)?;
            Some(Box::new(inner))
        } else {
            None
        };
        Ok(TypeExpr { name: name.name, arg, span: name.span })
    }

    fn block(&mut self) -> PResult<Block> {
        let span = self.expect(TokenKind::LBrace)?;
        let mut stmts = Vec::new();
        while !self.eat(&TokenKind::RBrace) {
            stmts.push(self.stmt()?);
        }
        Ok(Block { stmts, span })
    }

    /// Lookahead for `Type name` at statement start.
    fn looks_like_decl(&mut self) -> bool {
        let save = self.pos;
        let ok = self.type_expr().is_ok() && matches!(self.peek(), TokenKind::Ident(_));
        self.pos = save;
        ok
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let span = self.span();
        let kind = match self.peek().clone() {
            TokenKind::LBrace => StmtKind::Block(self.block()?),
            TokenKind::If => {
                self.bump();
                self.expect(TokenKind::LParen)?;
                let cond = self.expr()?;
                self.expect(TokenKind::RParen)?;
                let then_branch = Box::new(self.stmt()?);
                let else_branch = if self.eat(&TokenKind::Else) { Some(Box::new(self.stmt()?)) } else { None };
                StmtKind::If { cond, then_branch, else_branch }
            }
            TokenKind::While => {
                self.bump();
                self.expect(TokenKind::LParen)?;
                let cond = self.expr()?;
                self.expect(TokenKind::RParen)?;
                StmtKind::While { cond, body: Box::new(self.stmt()?) }
            }
            TokenKind::Try => {
                self.bump();
                let body = self.block()?;
                let mut catches = Vec::new();
                while *self.peek() == TokenKind::Catch {
                    let cspan = self.bump().span;
                    let (mut ty, mut name) = (None, None);
                    if self.eat(&TokenKind::LParen) {
                        ty = Some(self.type_expr()?);
                        if matches!(self.peek(), TokenKind::Ident(_)) {
                            name = Some(self.ident()?);
                        }
                        self.expect(TokenKind::RParen)?;
                    }
                    self.catch_depth += 1;
                    let body = self.block();
                    self.catch_depth -= 1;
                    catches.push(CatchClause { ty, name, body: body?, span: cspan });
                }
                let finally = if self.eat(&TokenKind::Finally) { Some(self.block()?) } else { None };
                if catches.is_empty() && finally.is_none() {
                    return self.error("`catch` or `finally`");
                }
                StmtKind::Try { body, catches, finally }
            }
            TokenKind::Using => {
                self.bump();
                self.expect(TokenKind::LParen)?;
                let ty = if self.eat(&TokenKind::Var) { None } else { Some(self.type_expr()?) };
                let name = self.ident()?;
                self.expect(TokenKind::Assign)?;
                let init = self.expr()?;
                self.expect(TokenKind::RParen)?;
                StmtKind::Using { ty, name, init, body: Box::new(self.stmt()?) }
            }
            TokenKind::Return => {
                self.bump();
                let value = if *self.peek() == TokenKind::Semi { None } else { Some(self.expr()?) };
                self.expect(TokenKind::Semi)?;
                StmtKind::Return(value)
            }
            TokenKind::Throw => {
                self.bump();
                let value = if *self.peek() == TokenKind::Semi { None } else { Some(self.expr()?) };
                if value.is_none() && self.catch_depth == 0 {
                    return Err(FrontendError::Parse { span, message: "`throw;` is only allowed inside a catch block".into() });
                }
                self.expect(TokenKind::Semi)?;
                StmtKind::Throw(value)
            }
            TokenKind::Var => {
                self.bump();
                let name = self.ident()?;
                self.expect(TokenKind::Assign)?;
                let init = self.expr()?;
                self.expect(TokenKind::Semi)?;
                StmtKind::Local { ty: None, name, init: Some(init) }
            }
            TokenKind::Ident(_) if self.looks_like_decl() => {
                let ty = self.type_expr()?;
                let name = self.ident()?;
                let init = if self.eat(&TokenKind::Assign) { Some(self.expr()?) } else { None };
                self.expect(TokenKind::Semi)?;
                StmtKind::Local { ty: Some(ty), name, init }
            }
            _ => {
                let e = self.expr()?;
                if self.eat(&TokenKind::Assign) {
                    if !matches!(e.kind, ExprKind::Name(_) | ExprKind::Field { .. }) {
                        return Err(FrontendError::Parse {
                            span: e.span,
                            message: "assignment target must be a variable or field".into(),
                        });
                    }
                    let value = self.expr()?;
                    self.expect(TokenKind::Semi)?;
                    StmtKind::Assign { target: e, value }
                } else {
                    if !matches!(e.kind, ExprKind::Call { .. } | ExprKind::New { .. }) {
                        return Err(FrontendError::Parse {
                            span: e.span,
                            message: "only calls and object creations can be used as statements".into(),
                        });
                    }
                    self.expect(TokenKind::Semi)?;
                    StmtKind::Expr(e)
                }
            }
        };
        Ok(Stmt { kind, span })
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.or_expr()
    }

    fn binary_level(
        &mut self,
        ops: &[(TokenKind, BinOp)],
        next: fn(&mut Self) -> PResult<Expr>,
    ) -> PResult<Expr> {
        let mut lhs = next(self)?;
        'outer: loop {
            for (tok, op) in ops {
                if self.peek() == tok {
                    self.bump();
                    let rhs = next(self)?;
                    let span = lhs.span;
                    lhs = make_binary(*op, lhs, rhs, span);
                    continue 'outer;
                }
            }
            return Ok(lhs);
        }
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        self.binary_level(&[(TokenKind::OrOr, BinOp::Or)], Self::and_expr)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        self.binary_level(&[(TokenKind::AndAnd, BinOp::And)], Self::eq_expr)
    }

    fn eq_expr(&mut self) -> PResult<Expr> {
        self.binary_level(&[(TokenKind::EqEq, BinOp::Eq), (TokenKind::Neq, BinOp::Ne)], Self::rel_expr)
    }

    fn rel_expr(&mut self) -> PResult<Expr> {
        self.binary_level(
            &[(TokenKind::Lt, BinOp::Lt), (TokenKind::Gt, BinOp::Gt), (TokenKind::Le, BinOp::Le), (TokenKind::Ge, BinOp::Ge)],
            Self::add_expr,
        )
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        self.binary_level(&[(TokenKind::Plus, BinOp::Add), (TokenKind::Minus, BinOp::Sub)], Self::mul_expr)
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        self.binary_level(
            &[(TokenKind::Star, BinOp::Mul), (TokenKind::Slash, BinOp::Div), (TokenKind::Percent, BinOp::Rem)],
            Self::unary_expr,
        )
    }

    fn unary_expr(&mut self) -> PResult<Expr> {
        let span = self.span();
        let op = match self.peek() {
            TokenKind::Bang => UnOp::Not,
            TokenKind::Minus => UnOp::Neg,
            _ => return self.postfix_expr(),
        };
        self.bump();
        let operand = self.unary_expr()?;
        Ok(Expr::new(ExprKind::Unary { op, operand: Box::new(operand) }, span))
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect(TokenKind::LParen)?;
        let mut args = Vec::new();
        if *self.peek() != TokenKind::RParen {
            loop {
                args.push(self.expr()?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen)?;
        Ok(args)
    }

    fn postfix_expr(&mut self) -> PResult<Expr> {
        let mut e = self.primary_expr()?;
        while self.eat(&TokenKind::Dot) {
            let name = self.ident()?;
            let span = e.span;
            if *self.peek() == TokenKind::LParen {
                let args = self.args()?;
                e = Expr::new(ExprKind::Call { receiver: Some(Box::new(e)), method: name, args, synthetic: false }, span);
            } else {
                e = Expr::new(ExprKind::Field { receiver: Box::new(e), name }, span);
            }
        }
        Ok(e)
    }

    fn primary_expr(&mut self) -> PResult<Expr> {
        let span = self.span();
        let kind = match self.peek().clone() {
            TokenKind::New => {
                self.bump();
                let ty = self.type_expr()?;
                let args = self.args()?;
                ExprKind::New { ty, args }
            }
            TokenKind::Ident(name) => {
                if *self.peek_at(1) == TokenKind::LParen {
                    let method = self.ident()?;
                    let args = self.args()?;
                    ExprKind::Call { receiver: None, method, args, synthetic: false }
                } else {
                    self.bump();
                    ExprKind::Name(name)
                }
            }
            TokenKind::This => {
                self.bump();
                ExprKind::This
            }
            TokenKind::Null => {
                self.bump();
                ExprKind::Null
            }
            TokenKind::Int(v) => {
                self.bump();
                ExprKind::Int(v)
            }
            TokenKind::Str(s) => {
                self.bump();
                ExprKind::Str(s)
            }
            TokenKind::True => {
                self.bump();
                ExprKind::Bool(true)
            }
            TokenKind::False => {
                self.bump();
                ExprKind::Bool(false)
            }
            TokenKind::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(TokenKind::RParen)?;
                return Ok(inner);
            }
            _ => return self.error("expression"),
        };
        Ok(Expr::new(kind, span))
    }
}

/// `x == null` / `null != x` become null comparisons; everything else is opaque.
fn make_binary(op: BinOp, lhs: Expr, rhs: Expr, span: Span) -> Expr {
    if matches!(op, BinOp::Eq | BinOp::Ne) {
        let negated = op == BinOp::Ne;
        match (&lhs.kind, &rhs.kind) {
            (ExprKind::Null, ExprKind::Null) => {}
            (_, ExprKind::Null) => return Expr::new(ExprKind::NullCmp { operand: Box::new(lhs), negated }, span),
            (ExprKind::Null, _) => return Expr::new(ExprKind::NullCmp { operand: Box::new(rhs), negated }, span),
            _ => {}
        }
    }
    Expr::new(ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }, span)
}

#[cfg(test)]
mod tests {
    use super::super::{lex, parse_source};
    use super::*;

    fn attr(text: &str) -> PResult<AttributeSpec> {
        let toks = lex(text).unwrap();
        Parser::new(&toks).attribute()
    }

    #[test]
    fn attribute_with_two_args() {
        let a = attr("[EnsuresCalledMethods(socket, Dispose)]").unwrap();
        assert_eq!(a.kind, AttrKind::EnsuresCalledMethods);
        assert_eq!(a.args, vec!["socket", "Dispose"]);
    }

    #[test]
    fn attribute_with_one_arg() {
        let a = attr("[CreateMustCallFor(socket)]").unwrap();
        assert_eq!(a.kind, AttrKind::CreateMustCallFor);
        assert_eq!(a.args, vec!["socket"]);
    }

    #[test]
    fn attribute_without_args() {
        let a = attr("[MustCallAlias]").unwrap();
        assert_eq!(a.kind, AttrKind::MustCallAlias);
        assert!(a.args.is_empty());
    }

    #[test]
    fn attribute_errors() {
        assert!(attr("[Owned]").unwrap_err().to_string().contains("unknown attribute"));
        assert!(attr("[owning]").is_err(), "names are case-sensitive");
        assert!(attr("[MustCall]").unwrap_err().to_string().contains("takes 1 argument"));
        assert!(attr("[Owning(x)]").is_err());
        assert!(attr("[EnsuresCalledMethods(socket)]").is_err());
    }

    #[test]
    fn class_with_mustcall_and_interface() {
        let unit = parse_source(
            "ex.moo",
            "[MustCall(Dispose)]\nclass Container() : IDisposable {\n public void Dispose() { }\n}",
        )
        .unwrap();
        let c = &unit.classes[0];
        assert_eq!(c.attrs[0].kind, AttrKind::MustCall);
        assert_eq!(c.attrs[0].args, vec!["Dispose"]);
        assert_eq!(c.interface.as_ref().unwrap().name, "IDisposable");
        assert!(c.base.is_none());
        assert!(c.empty_parens);
    }

    #[test]
    fn owning_return_and_parameter() {
        let unit = parse_source(
            "ex.moo",
            "class E {\n [Owning]\n Socket createSocket() { return new Socket(); }\n void closeSocket([Owning] Socket s) { s.Dispose(); }\n}",
        )
        .unwrap();
        let methods: Vec<_> = unit.classes[0].methods().collect();
        assert_eq!(methods[0].attrs[0].kind, AttrKind::Owning);
        assert_eq!(methods[0].ret.as_ref().unwrap().name, "Socket");
        assert_eq!(methods[1].params[0].name.name, "s");
        assert_eq!(methods[1].params[0].attrs[0].kind, AttrKind::Owning);
        assert_eq!(methods[1].params[0].span.line, 4);
    }

    #[test]
    fn statements_and_generics() {
        let unit = parse_source(
            "g.moo",
            "class G { void m(int x, int y) {\n List<Socket> xs = new List<Socket>();\n var s = new Socket();\n int z = x / y;\n if (s != null) s.Dispose(); else { }\n while (x < y) { x = x + 1; }\n try { s.Close(); } catch (Exception e) { throw; } finally { }\n using (var u = new Socket()) { }\n this.m(1, 2);\n return;\n} }",
        )
        .unwrap();
        let body = unit.classes[0].methods().next().unwrap().body.as_ref().unwrap();
        assert_eq!(body.stmts.len(), 9);
        match &body.stmts[0].kind {
            StmtKind::Local { ty: Some(ty), .. } => assert_eq!(ty.to_string(), "List<Socket>"),
            other => panic!("{other:?}"),
        }
        match &body.stmts[3].kind {
            StmtKind::If { cond, .. } => assert!(matches!(cond.kind, ExprKind::NullCmp { negated: true, .. })),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bare_rethrow_outside_catch_is_rejected() {
        let err = parse_source("t.moo", "class T { void m() { throw; } }").unwrap_err();
        assert!(err.to_string().contains("catch"));
    }

    #[test]
    fn stops_at_first_error_with_expected_token() {
        let err = parse_source("t.moo", "class T {\n void m() { x = ; }\n}").unwrap_err();
        match err {
            FrontendError::Parse { span, message } => {
                assert_eq!(span.line, 2);
                assert!(message.starts_with("expected expression"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn expression_statement_must_be_call() {
        assert!(parse_source("t.moo", "class T { void m(int x) { x + 1; } }").is_err());
    }
}

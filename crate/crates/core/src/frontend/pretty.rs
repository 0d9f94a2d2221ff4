//! Source printer. Output re-parses to a structurally identical tree.

use std::fmt::Write;

use super::ast::*;

pub fn print_unit(unit: &CompilationUnit) -> String {
    let mut p = Printer::default();
    for (i, c) in unit.classes.iter().enumerate() {
        if i > 0 {
            p.out.push('\n');
        }
        p.class(c);
    }
    p.out
}

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    expr(&mut s, e);
    s
}

#[derive(Default)]
struct Printer {
    out: String,
    indent: usize,
}

fn attrs_inline(attrs: &[AttributeSpec]) -> String {
    attrs.iter().map(|a| format!("{a} ")).collect()
}

fn mods(modifiers: &[Modifier]) -> String {
    modifiers.iter().map(|m| format!("{} ", m.keyword())).collect()
}

impl Printer {
    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push_str("    ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn attr_lines(&mut self, attrs: &[AttributeSpec]) {
        for a in attrs {
            self.line(&a.to_string());
        }
    }

    fn class(&mut self, c: &ClassDecl) {
        self.attr_lines(&c.attrs);
        let mut head = format!("{}class {}", mods(&c.modifiers), c.name.name);
        if c.empty_parens {
            head.push_str("()");
        }
        let supers: Vec<String> = c.base.iter().chain(c.interface.iter()).map(|t| t.to_string()).collect();
        if !supers.is_empty() {
            let _ = write!(head, " : {}", supers.join(", "));
        }
        head.push_str(" {");
        self.line(&head);
        self.indent += 1;
        for m in &c.members {
            match m {
                Member::Field(f) => {
                    self.attr_lines(&f.attrs);
                    self.line(&format!("{}{} {};", mods(&f.modifiers), f.ty, f.name.name));
                }
                Member::Method(m) => self.method(m),
            }
        }
        self.indent -= 1;
        self.line("}");
    }

    fn method(&mut self, m: &MethodDecl) {
        self.attr_lines(&m.attrs);
        let params: Vec<String> =
            m.params.iter().map(|p| format!("{}{} {}", attrs_inline(&p.attrs), p.ty, p.name.name)).collect();
        let ret = m.ret.as_ref().map(|t| format!("{t} ")).unwrap_or_default();
        let head = format!("{}{}{}({})", mods(&m.modifiers), ret, m.name.name, params.join(", "));
        match &m.body {
            None => self.line(&format!("{head};")),
            Some(body) => {
                self.line(&format!("{head} {{"));
                self.block_body(body);
                self.line("}");
            }
        }
    }

    fn block_body(&mut self, b: &Block) {
        self.indent += 1;
        for s in &b.stmts {
            self.stmt(s);
        }
        self.indent -= 1;
    }

    fn braced(&mut self, head: &str, b: &Block) {
        self.line(&format!("{head}{{"));
        self.block_body(b);
        self.line("}");
    }

    /// Nested statement position: blocks print braced, anything else indented.
    fn nested(&mut self, head: &str, s: &Stmt) {
        match &s.kind {
            StmtKind::Block(b) => self.braced(&format!("{head} "), b),
            _ => {
                self.line(head);
                self.indent += 1;
                self.stmt(s);
                self.indent -= 1;
            }
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Local { ty, name, init } => {
                let ty = ty.as_ref().map(|t| t.to_string()).unwrap_or_else(|| "var".into());
                match init {
                    Some(e) => self.line(&format!("{ty} {} = {};", name.name, print_expr(e))),
                    None => self.line(&format!("{ty} {};", name.name)),
                }
            }
            StmtKind::Assign { target, value } => {
                self.line(&format!("{} = {};", print_expr(target), print_expr(value)));
            }
            StmtKind::Expr(e) => self.line(&format!("{};", print_expr(e))),
            StmtKind::If { cond, then_branch, else_branch } => {
                self.nested(&format!("if ({})", print_expr(cond)), then_branch);
                if let Some(e) = else_branch {
                    self.nested("else", e);
                }
            }
            StmtKind::While { cond, body } => self.nested(&format!("while ({})", print_expr(cond)), body),
            StmtKind::Try { body, catches, finally } => {
                self.braced("try ", body);
                for c in catches {
                    let head = match (&c.ty, &c.name) {
                        (Some(t), Some(n)) => format!("catch ({t} {}) ", n.name),
                        (Some(t), None) => format!("catch ({t}) "),
                        _ => "catch ".to_string(),
                    };
                    self.braced(&head, &c.body);
                }
                if let Some(f) = finally {
                    self.braced("finally ", f);
                }
            }
            StmtKind::Using { ty, name, init, body } => {
                let ty = ty.as_ref().map(|t| t.to_string()).unwrap_or_else(|| "var".into());
                self.nested(&format!("using ({ty} {} = {})", name.name, print_expr(init)), body);
            }
            StmtKind::Return(e) => match e {
                Some(e) => self.line(&format!("return {};", print_expr(e))),
                None => self.line("return;"),
            },
            StmtKind::Throw(e) => match e {
                Some(e) => self.line(&format!("throw {};", print_expr(e))),
                None => self.line("throw;"),
            },
            StmtKind::Block(b) => self.braced("", b),
        }
    }
}

fn args(out: &mut String, args: &[Expr]) {
    out.push('(');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        expr(out, a);
    }
    out.push(')');
}

fn receiver(out: &mut String, e: &Expr) {
    if matches!(e.kind, ExprKind::Unary { .. }) {
        out.push('(');
        expr(out, e);
        out.push(')');
    } else {
        expr(out, e);
    }
}

fn expr(out: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::New { ty, args: a } => {
            let _ = write!(out, "new {ty}");
            args(out, a);
        }
        ExprKind::Call { receiver: recv, method, args: a, .. } => {
            if let Some(r) = recv {
                receiver(out, r);
                out.push('.');
            }
            out.push_str(&method.name);
            args(out, a);
        }
        ExprKind::Field { receiver: recv, name } => {
            receiver(out, recv);
            out.push('.');
            out.push_str(&name.name);
        }
        ExprKind::Name(n) => out.push_str(n),
        ExprKind::This => out.push_str("this"),
        ExprKind::Null => out.push_str("null"),
        ExprKind::NullCmp { operand, negated } => {
            out.push('(');
            expr(out, operand);
            out.push_str(if *negated { " != null)" } else { " == null)" });
        }
        ExprKind::Int(v) => {
            let _ = write!(out, "{v}");
        }
        ExprKind::Str(s) => {
            out.push('"');
            for c in s.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    '\t' => out.push_str("\\t"),
                    c => out.push(c),
                }
            }
            out.push('"');
        }
        ExprKind::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        ExprKind::Binary { op, lhs, rhs } => {
            out.push('(');
            expr(out, lhs);
            let _ = write!(out, " {} ", op.symbol());
            expr(out, rhs);
            out.push(')');
        }
        ExprKind::Unary { op, operand } => {
            out.push(match op {
                UnOp::Not => '!',
                UnOp::Neg => '-',
            });
            // `- -x` must not collapse
            if matches!(operand.kind, ExprKind::Unary { .. }) {
                out.push('(');
                expr(out, operand);
                out.push(')');
            } else {
                expr(out, operand);
            }
        }
    }
}

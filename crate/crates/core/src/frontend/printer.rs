//! Canonical MiniSol printer. Expressions are fully parenthesized so that
//! re-parsing the output reproduces the tree exactly.

use std::fmt::Write;

use super::ast::*;

pub fn print_unit(unit: &SourceUnit) -> String {
    let mut p = Printer {
        out: String::new(),
        indent: 0,
    };
    for (i, c) in unit.contracts.iter().enumerate() {
        if i > 0 {
            p.out.push('\n');
        }
        p.contract(c);
    }
    p.out
}

pub fn print_expr(e: &Expression) -> String {
    let mut s = String::new();
    expr(&mut s, e);
    s
}

struct Printer {
    out: String,
    indent: usize,
}

impl Printer {
    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push_str("    ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn contract(&mut self, c: &ContractDef) {
        let mut head = format!("contract {}", c.name);
        if !c.bases.is_empty() {
            let bases: Vec<String> = c
                .bases
                .iter()
                .map(|b| match c.base_args.iter().find(|a| &a.base == b) {
                    Some(a) => format!("{b}({})", exprs(&a.args)),
                    None => b.clone(),
                })
                .collect();
            let _ = write!(head, " is {}", bases.join(", "));
        }
        head.push_str(" {");
        self.line(&head);
        self.indent += 1;
        for v in &c.state_vars {
            let mut s = v.decl.ty.to_string();
            if v.constant {
                s.push_str(" constant");
            }
            let _ = write!(s, " {}", v.decl.name);
            if let Some(init) = &v.init {
                let _ = write!(s, " = {}", print_expr(init));
            }
            s.push(';');
            self.line(&s);
        }
        for e in &c.events {
            let params: Vec<String> = e
                .params
                .iter()
                .map(|p| format!("{} {}", p.ty, p.name))
                .collect();
            self.line(&format!("event {}({});", e.name, params.join(", ")));
        }
        if let Some(ctor) = &c.constructor {
            self.function(ctor);
        }
        for f in &c.functions {
            self.function(f);
        }
        self.indent -= 1;
        self.line("}");
    }

    fn function(&mut self, f: &FunctionDef) {
        let params: Vec<String> = f
            .params
            .iter()
            .map(|p| format!("{} {}", p.ty, p.name))
            .collect();
        let mut head = match f.kind {
            FunctionKind::Constructor => format!("constructor({})", params.join(", ")),
            FunctionKind::Function => format!("function {}({})", f.name, params.join(", ")),
        };
        let _ = write!(head, " {}", f.visibility.as_str());
        if f.is_payable {
            head.push_str(" payable");
        }
        if let Some(m) = &f.mutability {
            let _ = write!(head, " {m}");
        }
        for b in &f.base_calls {
            let _ = write!(head, " {}({})", b.base, exprs(&b.args));
        }
        if !f.returns.is_empty() {
            let tys: Vec<String> = f.returns.iter().map(ToString::to_string).collect();
            let _ = write!(head, " returns ({})", tys.join(", "));
        }
        head.push_str(" {");
        self.line(&head);
        self.block_body(&f.body);
        self.line("}");
    }

    fn block_body(&mut self, b: &Block) {
        self.indent += 1;
        for s in &b.stmts {
            self.stmt(s);
        }
        self.indent -= 1;
    }

    fn stmt(&mut self, s: &Statement) {
        match &s.kind {
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.line(&format!("if ({}) {{", print_expr(cond)));
                self.block_body(then_branch);
                if let Some(e) = else_branch {
                    self.line("} else {");
                    self.block_body(e);
                }
                self.line("}");
            }
            StmtKind::While { cond, body } => {
                self.line(&format!("while ({}) {{", print_expr(cond)));
                self.block_body(body);
                self.line("}");
            }
            StmtKind::For {
                init,
                cond,
                update,
                body,
            } => {
                let init = init.as_ref().map(|s| simple(s)).unwrap_or_default();
                let cond = cond.as_ref().map(print_expr).unwrap_or_default();
                let update = update.as_ref().map(|s| simple(s)).unwrap_or_default();
                self.line(&format!("for ({init}; {cond}; {update}) {{"));
                self.block_body(body);
                self.line("}");
            }
            StmtKind::Block(b) => {
                self.line("{");
                self.block_body(b);
                self.line("}");
            }
            _ => {
                let text = format!("{};", simple(s));
                self.line(&text);
            }
        }
    }
}

/// Text of a single-line statement without its trailing `;`.
fn simple(s: &Statement) -> String {
    match &s.kind {
        StmtKind::VarDecl { decl, init } => match init {
            Some(e) => format!("{} {} = {}", decl.ty, decl.name, print_expr(e)),
            None => format!("{} {}", decl.ty, decl.name),
        },
        StmtKind::Assign { target, value } => {
            format!("{} = {}", print_expr(target), print_expr(value))
        }
        StmtKind::Require { cond, message } => match message {
            Some(m) => format!("require({}, {})", print_expr(cond), quote(m)),
            None => format!("require({})", print_expr(cond)),
        },
        StmtKind::Assert { cond } => format!("assert({})", print_expr(cond)),
        StmtKind::Return { value } => match value {
            Some(e) => format!("return {}", print_expr(e)),
            None => "return".to_string(),
        },
        StmtKind::Revert { message } => match message {
            Some(m) => format!("revert({})", quote(m)),
            None => "revert()".to_string(),
        },
        StmtKind::Expr(e) => print_expr(e),
        StmtKind::Emit { event, args } => format!("emit {event}({})", exprs(args)),
        StmtKind::ExternalCall(call) => {
            let c = external_call(call);
            match &call.result {
                CallResultUse::Ignored => c,
                CallResultUse::Required => format!("require({c})"),
                CallResultUse::Bound {
                    name,
                    declared: true,
                } => format!("bool {name} = {c}"),
                CallResultUse::Bound {
                    name,
                    declared: false,
                } => format!("{name} = {c}"),
            }
        }
        StmtKind::If { .. }
        | StmtKind::While { .. }
        | StmtKind::For { .. }
        | StmtKind::Block(_) => {
            unreachable!("compound statement printed inline")
        }
    }
}

fn external_call(call: &ExternalCall) -> String {
    let target = print_expr(&call.target);
    let value = call.value.as_ref().map(print_expr);
    match (call.kind, value) {
        (CallKind::Transfer | CallKind::Send, Some(v)) => {
            format!("{target}.{}({v})", call.kind.as_str())
        }
        (CallKind::Transfer | CallKind::Send, None) => {
            format!("{target}.{}(0)", call.kind.as_str())
        }
        (CallKind::Call, Some(v)) => format!("{target}.call{{value: {v}}}(\"\")"),
        (CallKind::Call, None) => format!("{target}.call(\"\")"),
    }
}

fn quote(m: &str) -> String {
    if m.contains('"') {
        format!("'{m}'")
    } else {
        format!("\"{m}\"")
    }
}

fn exprs(es: &[Expression]) -> String {
    es.iter().map(print_expr).collect::<Vec<_>>().join(", ")
}

fn expr(out: &mut String, e: &Expression) {
    match &e.kind {
        ExprKind::Literal(n) => {
            let _ = write!(out, "{n}");
        }
        ExprKind::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        ExprKind::Ident(name) => out.push_str(name),
        ExprKind::Env(m) => out.push_str(m.as_str()),
        ExprKind::Binary { op, lhs, rhs } => {
            out.push('(');
            expr(out, lhs);
            let _ = write!(out, " {} ", op.symbol());
            expr(out, rhs);
            out.push(')');
        }
        ExprKind::Unary { op, operand } => {
            out.push('(');
            out.push_str(op.symbol());
            expr(out, operand);
            out.push(')');
        }
        ExprKind::Index { base, key } => {
            expr(out, base);
            out.push('[');
            expr(out, key);
            out.push(']');
        }
        ExprKind::Call { callee, args } => {
            let _ = write!(out, "{callee}({})", exprs(args));
        }
    }
}

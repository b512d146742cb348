use super::ast::*;
use std::collections::BTreeSet;
use std::fmt::Write as _;

fn prec(op: BinOp) -> u8 {
    match op {
        BinOp::Add | BinOp::Sub => 1,
        BinOp::Mul | BinOp::Div | BinOp::Mod => 2,
    }
}

fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Bin(op, ..) => prec(*op),
        Expr::Cond(..) => 0,
        Expr::Int(v) if v.sign() == num_bigint::Sign::Minus => 1,
        _ => 3,
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    match e {
        Expr::Int(v) => v.to_string(),
        Expr::Var(x) => x.clone(),
        Expr::Field(x, fs) => format!("{x}.{}", fs.join(".")),
        Expr::Null => "null".into(),
        Expr::New(c) => format!("new {c}"),
        Expr::Cond(g, a, b) => format!("({}) ? {} : {}", guard_to_string(g), expr_to_string(a), expr_to_string(b)),
        Expr::Bin(op, a, b) => {
            let p = prec(*op);
            let l = if expr_prec(a) < p { format!("({})", expr_to_string(a)) } else { expr_to_string(a) };
            let r = if expr_prec(b) <= p { format!("({})", expr_to_string(b)) } else { expr_to_string(b) };
            format!("{l} {} {r}", op.symbol())
        }
    }
}

fn guard_prec(g: &Guard) -> u8 {
    match g {
        Guard::Or(..) => 1,
        Guard::And(..) => 2,
        _ => 3,
    }
}

pub fn guard_to_string(g: &Guard) -> String {
    match g {
        Guard::True => "true".into(),
        Guard::False => "false".into(),
        Guard::Cmp(op, a, b) => format!("{} {} {}", expr_to_string(a), op.symbol(), expr_to_string(b)),
        Guard::Not(x) => {
            if guard_prec(x) < 3 {
                format!("not ({})", guard_to_string(x))
            } else {
                format!("not {}", guard_to_string(x))
            }
        }
        Guard::And(a, b) | Guard::Or(a, b) => {
            let (p, kw) = if matches!(g, Guard::And(..)) { (2, "and") } else { (1, "or") };
            let l = if guard_prec(a) < p { format!("({})", guard_to_string(a)) } else { guard_to_string(a) };
            let r = if guard_prec(b) <= p { format!("({})", guard_to_string(b)) } else { guard_to_string(b) };
            format!("{l} {kw} {r}")
        }
    }
}

/// One-line rendering of a statement head, e.g. `while (i <= n)` or `x := 1;`.
pub fn stmt_head(s: &Stmt) -> String {
    match &s.kind {
        StmtKind::Skip => "skip;".into(),
        StmtKind::Assign(x, e) => format!("{x} := {};", expr_to_string(e)),
        StmtKind::FieldAssign { var, field, expr } => format!("{var}.{field} := {};", expr_to_string(expr)),
        StmtKind::If(g, ..) => format!("if ({})", guard_to_string(g)),
        StmtKind::While(g, _) => format!("while ({})", guard_to_string(g)),
        StmtKind::Read(vs) => format!("read({});", vs.join(", ")),
        StmtKind::Write(vs) => format!("write({});", vs.join(", ")),
    }
}

fn decls(p: &Program, out: &mut String) {
    for (c, fields) in &p.classes {
        let fs: Vec<String> = fields.iter().map(|(f, t)| format!("{f}: {t};")).collect();
        if fs.is_empty() {
            let _ = writeln!(out, "class {c} {{ }}");
        } else {
            let _ = writeln!(out, "class {c} {{ {} }}", fs.join(" "));
        }
    }
    for (v, t) in &p.vars {
        if t.is_ref() {
            let _ = writeln!(out, "var {v}: {t};");
        }
    }
}

/// Source text with explicit line labels; parsing it yields an equal program.
pub fn program_to_string(p: &Program) -> String {
    fn block(stmts: &[Stmt], depth: usize, out: &mut String) {
        for s in stmts {
            let pad = "  ".repeat(depth);
            match &s.kind {
                StmtKind::If(_, t, e) => {
                    let _ = writeln!(out, "{pad}{}: {} {{", s.line, stmt_head(s));
                    block(t, depth + 1, out);
                    if e.is_empty() {
                        let _ = writeln!(out, "{pad}}}");
                    } else {
                        let _ = writeln!(out, "{pad}}} else {{");
                        block(e, depth + 1, out);
                        let _ = writeln!(out, "{pad}}}");
                    }
                }
                StmtKind::While(_, b) => {
                    let _ = writeln!(out, "{pad}{}: {} {{", s.line, stmt_head(s));
                    block(b, depth + 1, out);
                    let _ = writeln!(out, "{pad}}}");
                }
                _ => {
                    let _ = writeln!(out, "{pad}{}: {}", s.line, stmt_head(s));
                }
            }
        }
    }
    let mut out = String::new();
    decls(p, &mut out);
    block(&p.body, 0, &mut out);
    out
}

/// Listing of `q` laid out against the line numbers of `p`: statements of `p`
/// missing from `q` are shown as empty numbered lines. Per-line annotations
/// are appended as trailing comments.
pub fn listing(p: &Program, q: &Program, notes: &dyn Fn(Line) -> Option<String>) -> String {
    let kept: BTreeSet<Line> = q.lines();
    let mut out = String::new();
    fn block(
        stmts: &[Stmt],
        depth: usize,
        kept: &BTreeSet<Line>,
        notes: &dyn Fn(Line) -> Option<String>,
        out: &mut String,
    ) {
        for s in stmts {
            let pad = "  ".repeat(depth);
            let note = notes(s.line).map(|n| format!("  // {n}")).unwrap_or_default();
            if !kept.contains(&s.line) {
                let _ = writeln!(out, "{:>3}:{note}", s.line);
                continue;
            }
            match &s.kind {
                StmtKind::If(_, t, e) => {
                    let _ = writeln!(out, "{:>3}: {pad}{} {{{note}", s.line, stmt_head(s));
                    block(t, depth + 1, kept, notes, out);
                    if !e.is_empty() {
                        let _ = writeln!(out, "     {pad}}} else {{");
                        block(e, depth + 1, kept, notes, out);
                    }
                    let _ = writeln!(out, "     {pad}}}");
                }
                StmtKind::While(_, b) => {
                    let _ = writeln!(out, "{:>3}: {pad}{} {{{note}", s.line, stmt_head(s));
                    block(b, depth + 1, kept, notes, out);
                    let _ = writeln!(out, "     {pad}}}");
                }
                _ => {
                    let _ = writeln!(out, "{:>3}: {pad}{}{note}", s.line, stmt_head(s));
                }
            }
        }
    }
    decls(p, &mut out);
    block(&p.body, 0, &kept, notes, &mut out);
    out
}

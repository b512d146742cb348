//! The mini-language: AST, parser, type checking and printing.

mod ast;
mod check;
mod parser;
mod print;

pub use ast::*;
pub use parser::parse_program;
pub use print::{expr_to_string, guard_to_string, listing, program_to_string, stmt_head};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LangError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("type error at statement {line}: {msg}")]
    Type { line: Line, msg: String },
    #[error("misplaced statement {line}: {msg}")]
    Placement { line: Line, msg: String },
}

/// Parses a standalone expression, e.g. for the `deps` command.
pub fn parse_expr(src: &str) -> Result<Expr, LangError> {
    let p = parse_program(&format!("__e := {src};"))?;
    match &p.body[0].kind {
        StmtKind::Assign(_, e) => Ok(e.clone()),
        _ => unreachable!(),
    }
}

/// Parses a standalone guard.
pub fn parse_guard(src: &str) -> Result<Guard, LangError> {
    let p = parse_program(&format!("if ({src}) skip;"))?;
    match &p.body[0].kind {
        StmtKind::If(g, ..) => Ok(g.clone()),
        _ => unreachable!(),
    }
}

/// Parses a guard over the classes and variables declared by `p`.
pub fn parse_guard_in(src: &str, p: &Program) -> Result<Guard, LangError> {
    let decls = Program { body: Vec::new(), ..p.clone() };
    let q = parse_program(&format!("{}if ({src}) skip;", program_to_string(&decls)))?;
    match &q.body[0].kind {
        StmtKind::If(g, ..) => Ok(g.clone()),
        _ => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WORD_COUNT: &str = include_str!("../../corpus/wordcount.prog");

    #[test]
    fn skip_program() {
        let p = parse_program("skip;").unwrap();
        assert_eq!(p.body.len(), 1);
        assert_eq!(p.body[0].line, 1);
        assert_eq!(p.body[0].kind, StmtKind::Skip);
    }

    #[test]
    fn word_count_nests_if_in_while() {
        let p = parse_program(WORD_COUNT).unwrap();
        let w = p.body.iter().find(|s| matches!(s.kind, StmtKind::While(..))).unwrap();
        let StmtKind::While(_, body) = &w.kind else { unreachable!() };
        assert!(body.iter().any(|s| matches!(s.kind, StmtKind::If(..))));
        let lines: Vec<Line> = p.all_stmts().iter().map(|s| s.line).collect();
        assert_eq!(lines, (1..=15).collect::<Vec<_>>());
    }

    #[test]
    fn write_must_be_last() {
        let err = parse_program("write(x); y:=1;").unwrap_err();
        assert!(matches!(err, LangError::Placement { .. }), "{err}");
        let err = parse_program("x := 1; read(y);").unwrap_err();
        assert!(matches!(err, LangError::Placement { .. }));
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_program("x := 1;\ny := ;").unwrap_err();
        assert_eq!(err, LangError::Syntax { line: 2, col: 6, msg: "expected expression, found Semi".into() });
    }

    #[test]
    fn type_errors() {
        assert!(matches!(parse_program("class C { } var x: C; x := 1;"), Err(LangError::Type { .. })));
        assert!(matches!(parse_program("class C { } var x: C; y := x + 1;"), Err(LangError::Type { .. })));
        assert!(matches!(parse_program("class C { f: int; } var x: C; x.g := 1;"), Err(LangError::Type { .. })));
        assert!(parse_program("class C { f: C; } var x, y: C; x.f := y; y := x.f; if (x = null) skip;").is_ok());
    }

    #[test]
    fn labels_and_defaults() {
        let p = parse_program("1: read(n); 5: while (i <= n) { s := s + i; i := i + 1; } write(s);").unwrap();
        assert_eq!(p.lines().into_iter().collect::<Vec<_>>(), vec![1, 5, 6, 7, 8]);
        assert!(parse_program("3: x := 1; 2: y := 1;").is_err());
    }

    #[test]
    fn conditional_expression_and_guards() {
        let e = parse_expr("(i mod 2 = 0) ? 17 : 18").unwrap();
        assert!(matches!(e, Expr::Cond(..)));
        let g = parse_guard("(x + 1) < y and not (y = 0 or x >= 2)").unwrap();
        assert!(matches!(g, Guard::And(..)));
    }

    #[test]
    fn printing_round_trips() {
        let src = "class Str { ch: int; next: Str; } var s: Str;\n".to_string()
            + "1: read(n); x := (n - (3 - 1)) * -2 mod 5; if (x > 0 and (n = 1 or not n < 3)) { x := ((n = 2) ? 1 : 2) + 1; } "
            + "else skip; while (s != null) { s.ch := s.ch - -1; s := s.next; } write(x, n);";
        let p = parse_program(&src).unwrap();
        let text = program_to_string(&p);
        let q = parse_program(&text).unwrap();
        assert_eq!(p, q, "{text}");
        let wc = parse_program(WORD_COUNT).unwrap();
        assert_eq!(parse_program(&program_to_string(&wc)).unwrap(), wc);
    }

    #[test]
    fn subprogram_relation() {
        let p = parse_program("a := 1; b := b + 1; c := c + 2; e := e + 1; d := 2 * c + b + a - a;").unwrap();
        let q = p.retain_lines(&|l| l != 4);
        assert!(is_subprogram(&q, &p));
        assert!(is_subprogram(&p, &p));
        let mut r = p.clone();
        r.body[1].kind = StmtKind::Assign("b".into(), parse_expr("b + 2").unwrap());
        assert!(!is_subprogram(&r, &p));
        assert!(!is_subprogram(&p, &q));
    }

    #[test]
    fn stmt_lookup() {
        let p = parse_program("a := 1; b := b + 1; c := c + 2; e := e + 1; d := 2 * c + b + a - a;").unwrap();
        let q = p.retain_lines(&|l| l != 4);
        assert!(q.stmt_at(4).is_none());
        assert!(matches!(&p.stmt_at(5).unwrap().kind, StmtKind::Assign(d, _) if d == "d"));
        assert!(p.stmt_at(0).is_none());
    }

    #[test]
    fn exposed_variables() {
        let p = parse_program("1: read(n); i := 1; while (i <= n) { s := s + i; i := i + 1; } write(i, n, s);").unwrap();
        assert_eq!(p.input_vars(), vec!["n".to_string(), "s".to_string()]);
    }
}

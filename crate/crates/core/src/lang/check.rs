use super::ast::*;
use super::LangError;

/// Static type of an expression; `Null` is compatible with every class.
#[derive(Clone, Debug, PartialEq)]
enum ETy {
    Int,
    Ref(String),
    Null,
}

fn compatible(a: &ETy, b: &ETy) -> bool {
    match (a, b) {
        (ETy::Int, ETy::Int) => true,
        (ETy::Null, ETy::Ref(_)) | (ETy::Ref(_), ETy::Null) | (ETy::Null, ETy::Null) => true,
        (ETy::Ref(x), ETy::Ref(y)) => x == y,
        _ => false,
    }
}

fn of_ty(t: &Ty) -> ETy {
    match t {
        Ty::Int => ETy::Int,
        Ty::Ref(c) => ETy::Ref(c.clone()),
    }
}

struct Checker<'a> {
    p: &'a mut Program,
    line: Line,
}

impl Checker<'_> {
    fn fail<T>(&self, msg: String) -> Result<T, LangError> {
        Err(LangError::Type { line: self.line, msg })
    }

    fn var(&mut self, v: &str) -> ETy {
        if !self.p.vars.contains_key(v) {
            self.p.vars.insert(v.to_string(), Ty::Int);
        }
        of_ty(&self.p.vars[v])
    }

    fn field_chain(&mut self, v: &str, fields: &[String]) -> Result<ETy, LangError> {
        let mut t = self.var(v);
        for f in fields {
            let class = match &t {
                ETy::Ref(c) => c.clone(),
                _ => return self.fail(format!("field access .{f} on a non-reference value")),
            };
            match self.p.field_ty(&class, f) {
                Some(ft) => t = of_ty(ft),
                None => return self.fail(format!("class {class} has no field {f}")),
            }
        }
        Ok(t)
    }

    fn expr(&mut self, e: &Expr) -> Result<ETy, LangError> {
        match e {
            Expr::Int(_) => Ok(ETy::Int),
            Expr::Var(v) => Ok(self.var(v)),
            Expr::Field(v, fs) => self.field_chain(v, fs),
            Expr::Bin(op, a, b) => {
                let ta = self.expr(a)?;
                let tb = self.expr(b)?;
                if ta != ETy::Int || tb != ETy::Int {
                    return self.fail(format!("operator {} applied to a reference", op.symbol()));
                }
                Ok(ETy::Int)
            }
            Expr::Cond(g, a, b) => {
                self.guard(g)?;
                let ta = self.expr(a)?;
                let tb = self.expr(b)?;
                if !compatible(&ta, &tb) {
                    return self.fail("branches of a conditional expression have different types".into());
                }
                Ok(if ta == ETy::Null { tb } else { ta })
            }
            Expr::Null => Ok(ETy::Null),
            Expr::New(c) => {
                if !self.p.classes.contains_key(c) {
                    return self.fail(format!("unknown class {c}"));
                }
                Ok(ETy::Ref(c.clone()))
            }
        }
    }

    fn guard(&mut self, g: &Guard) -> Result<(), LangError> {
        match g {
            Guard::True | Guard::False => Ok(()),
            Guard::Cmp(op, a, b) => {
                let ta = self.expr(a)?;
                let tb = self.expr(b)?;
                if !compatible(&ta, &tb) {
                    return self.fail("comparison between an integer and a reference".into());
                }
                if ta != ETy::Int && !matches!(op, CmpOp::Eq | CmpOp::Ne) {
                    return self.fail(format!("ordering comparison {} on references", op.symbol()));
                }
                Ok(())
            }
            Guard::Not(g) => self.guard(g),
            Guard::And(a, b) | Guard::Or(a, b) => {
                self.guard(a)?;
                self.guard(b)
            }
        }
    }

    fn stmts(&mut self, stmts: &[Stmt]) -> Result<(), LangError> {
        for s in stmts {
            self.line = s.line;
            match &s.kind {
                StmtKind::Skip => {}
                StmtKind::Assign(x, e) => {
                    let te = self.expr(e)?;
                    if !self.p.vars.contains_key(x) {
                        match &te {
                            ETy::Int => {}
                            _ => return self.fail(format!("undeclared variable {x} assigned a reference")),
                        }
                    }
                    let tx = self.var(x);
                    if !compatible(&tx, &te) {
                        return self.fail(format!("type mismatch in assignment to {x}"));
                    }
                }
                StmtKind::FieldAssign { var, field, expr } => {
                    let tf = self.field_chain(var, std::slice::from_ref(field))?;
                    let te = self.expr(expr)?;
                    if !compatible(&tf, &te) {
                        return self.fail(format!("type mismatch in assignment to {var}.{field}"));
                    }
                }
                StmtKind::If(g, t, e) => {
                    self.guard(g)?;
                    self.stmts(t)?;
                    self.stmts(e)?;
                }
                StmtKind::While(g, b) => {
                    self.guard(g)?;
                    self.stmts(b)?;
                }
                StmtKind::Read(vs) | StmtKind::Write(vs) => {
                    for v in vs {
                        self.var(v);
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_placement(p: &Program) -> Result<(), LangError> {
    let mut in_prefix = true;
    for (i, s) in p.body.iter().enumerate() {
        match &s.kind {
            StmtKind::Read(_) if !in_prefix => {
                return Err(LangError::Placement { line: s.line, msg: "read may only appear at the beginning".into() })
            }
            StmtKind::Read(_) => {}
            StmtKind::Write(_) if i + 1 != p.body.len() => {
                return Err(LangError::Placement { line: s.line, msg: "write may only appear at the end".into() })
            }
            _ => in_prefix = false,
        }
    }
    for s in p.all_stmts() {
        let nested = !p.body.iter().any(|t| std::ptr::eq(t, s));
        if nested && matches!(s.kind, StmtKind::Read(_) | StmtKind::Write(_)) {
            return Err(LangError::Placement {
                line: s.line,
                msg: "read and write may not appear inside compound statements".into(),
            });
        }
    }
    Ok(())
}

pub(crate) fn check_program(p: &mut Program) -> Result<(), LangError> {
    for (c, fields) in &p.classes {
        for (f, t) in fields {
            if let Ty::Ref(d) = t {
                if !p.classes.contains_key(d) {
                    return Err(LangError::Type { line: 0, msg: format!("field {c}.{f} has unknown class {d}") });
                }
            }
        }
    }
    for (v, t) in &p.vars {
        if let Ty::Ref(d) = t {
            if !p.classes.contains_key(d) {
                return Err(LangError::Type { line: 0, msg: format!("variable {v} has unknown class {d}") });
            }
        }
    }
    check_placement(p)?;
    let body = p.body.clone();
    let mut ck = Checker { p, line: 0 };
    ck.stmts(&body)?;
    Ok(())
}

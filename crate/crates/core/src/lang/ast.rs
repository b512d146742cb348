use indexmap::IndexMap;
use num_bigint::BigInt;
use std::collections::BTreeSet;

/// Statement label. Lines start at 1 and strictly increase in textual order.
pub type Line = u32;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ty {
    Int,
    Ref(String),
}

impl Ty {
    pub fn is_ref(&self) -> bool {
        matches!(self, Ty::Ref(_))
    }

    pub fn class(&self) -> Option<&str> {
        match self {
            Ty::Ref(c) => Some(c),
            Ty::Int => None,
        }
    }
}

impl std::fmt::Display for Ty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ty::Int => write!(f, "int"),
            Ty::Ref(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

impl BinOp {
    pub const ALL: [BinOp; 5] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Mod];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "mod",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }

    /// The operator obtained by swapping the operands.
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            other => other,
        }
    }

    pub fn holds<T: Ord>(self, a: &T, b: &T) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Int(BigInt),
    Var(String),
    /// `x.f1.f2...`, always with at least one field.
    Field(String, Vec<String>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Cond(Box<Guard>, Box<Expr>, Box<Expr>),
    Null,
    New(String),
}

impl Expr {
    pub fn int(v: i64) -> Expr {
        Expr::Int(BigInt::from(v))
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Int(_) | Expr::Null | Expr::New(_) => {}
            Expr::Var(v) | Expr::Field(v, _) => {
                out.insert(v.clone());
            }
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Cond(g, a, b) => {
                g.collect_vars(out);
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Variables in first-occurrence order, without duplicates.
    pub fn vars_ordered(&self) -> Vec<String> {
        fn go(e: &Expr, out: &mut Vec<String>) {
            match e {
                Expr::Int(_) | Expr::Null | Expr::New(_) => {}
                Expr::Var(v) | Expr::Field(v, _) => {
                    if !out.contains(v) {
                        out.push(v.clone())
                    }
                }
                Expr::Bin(_, a, b) => {
                    go(a, out);
                    go(b, out);
                }
                Expr::Cond(g, a, b) => {
                    let mut gv = BTreeSet::new();
                    g.collect_vars(&mut gv);
                    for v in gv {
                        if !out.contains(&v) {
                            out.push(v)
                        }
                    }
                    go(a, out);
                    go(b, out);
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }

    pub fn as_int_literal(&self) -> Option<&BigInt> {
        match self {
            Expr::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn reads_heap(&self) -> bool {
        match self {
            Expr::Field(..) => true,
            Expr::Bin(_, a, b) => a.reads_heap() || b.reads_heap(),
            Expr::Cond(g, a, b) => g.reads_heap() || a.reads_heap() || b.reads_heap(),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Guard {
    True,
    False,
    Cmp(CmpOp, Expr, Expr),
    Not(Box<Guard>),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
}

impl Guard {
    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> Guard {
        Guard::Cmp(op, a, b)
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Guard::True | Guard::False => {}
            Guard::Cmp(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Guard::Not(g) => g.collect_vars(out),
            Guard::And(a, b) | Guard::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn reads_heap(&self) -> bool {
        match self {
            Guard::True | Guard::False => false,
            Guard::Cmp(_, a, b) => a.reads_heap() || b.reads_heap(),
            Guard::Not(g) => g.reads_heap(),
            Guard::And(a, b) | Guard::Or(a, b) => a.reads_heap() || b.reads_heap(),
        }
    }

    /// Pushes negations down to comparisons.
    pub fn negated(&self) -> Guard {
        match self {
            Guard::True => Guard::False,
            Guard::False => Guard::True,
            Guard::Cmp(op, a, b) => Guard::Cmp(op.negate(), a.clone(), b.clone()),
            Guard::Not(g) => (**g).clone(),
            Guard::And(a, b) => Guard::Or(Box::new(a.negated()), Box::new(b.negated())),
            Guard::Or(a, b) => Guard::And(Box::new(a.negated()), Box::new(b.negated())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Stmt {
    pub line: Line,
    pub kind: StmtKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum StmtKind {
    Skip,
    Assign(String, Expr),
    FieldAssign { var: String, field: String, expr: Expr },
    If(Guard, Vec<Stmt>, Vec<Stmt>),
    While(Guard, Vec<Stmt>),
    Read(Vec<String>),
    Write(Vec<String>),
}

impl Stmt {
    pub fn new(line: Line, kind: StmtKind) -> Stmt {
        Stmt { line, kind }
    }

    pub fn is_compound(&self) -> bool {
        matches!(self.kind, StmtKind::If(..) | StmtKind::While(..))
    }

    /// Nested statements in textual order, including `self`.
    pub fn walk<'a>(&'a self, out: &mut Vec<&'a Stmt>) {
        out.push(self);
        match &self.kind {
            StmtKind::If(_, t, e) => {
                for s in t.iter().chain(e.iter()) {
                    s.walk(out)
                }
            }
            StmtKind::While(_, b) => {
                for s in b {
                    s.walk(out)
                }
            }
            _ => {}
        }
    }

    /// Variables this statement (including nested statements) may assign.
    pub fn defs(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut all = Vec::new();
        self.walk(&mut all);
        for s in all {
            match &s.kind {
                StmtKind::Assign(x, _) => {
                    out.insert(x.clone());
                }
                StmtKind::FieldAssign { var, .. } => {
                    out.insert(var.clone());
                }
                StmtKind::Read(vs) => out.extend(vs.iter().cloned()),
                _ => {}
            }
        }
        out
    }

    /// Every variable mentioned anywhere in this statement.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut all = Vec::new();
        self.walk(&mut all);
        for s in all {
            match &s.kind {
                StmtKind::Skip => {}
                StmtKind::Assign(x, e) => {
                    out.insert(x.clone());
                    e.collect_vars(&mut out);
                }
                StmtKind::FieldAssign { var, expr, .. } => {
                    out.insert(var.clone());
                    expr.collect_vars(&mut out);
                }
                StmtKind::If(g, _, _) | StmtKind::While(g, _) => g.collect_vars(&mut out),
                StmtKind::Read(vs) | StmtKind::Write(vs) => out.extend(vs.iter().cloned()),
            }
        }
        out
    }

    /// Same statement form at the head, ignoring nested bodies.
    pub fn same_head(&self, other: &Stmt) -> bool {
        if self.line != other.line {
            return false;
        }
        match (&self.kind, &other.kind) {
            (StmtKind::If(g1, ..), StmtKind::If(g2, ..)) => g1 == g2,
            (StmtKind::While(g1, _), StmtKind::While(g2, _)) => g1 == g2,
            (a, b) => a == b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub classes: IndexMap<String, IndexMap<String, Ty>>,
    /// Every variable of the program, declared ones first, then in order of first use.
    pub vars: IndexMap<String, Ty>,
    pub body: Vec<Stmt>,
}

impl Program {
    pub fn var_ty(&self, v: &str) -> Ty {
        self.vars.get(v).cloned().unwrap_or(Ty::Int)
    }

    pub fn field_ty(&self, class: &str, field: &str) -> Option<&Ty> {
        self.classes.get(class).and_then(|fs| fs.get(field))
    }

    pub fn all_stmts(&self) -> Vec<&Stmt> {
        let mut out = Vec::new();
        for s in &self.body {
            s.walk(&mut out)
        }
        out
    }

    /// The set of statement labels, `L_P`.
    pub fn lines(&self) -> BTreeSet<Line> {
        self.all_stmts().iter().map(|s| s.line).collect()
    }

    pub fn last_line(&self) -> Option<Line> {
        self.all_stmts().iter().map(|s| s.line).max()
    }

    pub fn stmt_at(&self, l: Line) -> Option<&Stmt> {
        self.all_stmts().into_iter().find(|s| s.line == l)
    }

    /// Variables supplied by leading `read` statements.
    pub fn read_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        for s in &self.body {
            match &s.kind {
                StmtKind::Read(vs) => {
                    for v in vs {
                        if !out.contains(v) {
                            out.push(v.clone())
                        }
                    }
                }
                _ => break,
            }
        }
        out
    }

    /// Variables of the trailing `write`, if any.
    pub fn write_vars(&self) -> Vec<String> {
        match self.body.last().map(|s| &s.kind) {
            Some(StmtKind::Write(vs)) => vs.clone(),
            _ => Vec::new(),
        }
    }

    /// Variables that may be read before being assigned on some path. These act
    /// as the program's inputs together with the explicitly read variables.
    pub fn exposed_vars(&self) -> Vec<String> {
        fn uses_expr(e: &Expr, defined: &BTreeSet<String>, out: &mut Vec<String>) {
            for v in e.vars_ordered() {
                if !defined.contains(&v) && !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        fn uses_guard(g: &Guard, defined: &BTreeSet<String>, out: &mut Vec<String>) {
            for v in g.vars() {
                if !defined.contains(&v) && !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        // `defined` holds variables definitely assigned on every path so far.
        fn go(stmts: &[Stmt], defined: &mut BTreeSet<String>, out: &mut Vec<String>) {
            for s in stmts {
                match &s.kind {
                    StmtKind::Skip => {}
                    StmtKind::Assign(x, e) => {
                        uses_expr(e, defined, out);
                        defined.insert(x.clone());
                    }
                    StmtKind::FieldAssign { var, expr, .. } => {
                        if !defined.contains(var) && !out.contains(var) {
                            out.push(var.clone());
                        }
                        uses_expr(expr, defined, out);
                    }
                    StmtKind::If(g, t, e) => {
                        uses_guard(g, defined, out);
                        let mut d1 = defined.clone();
                        let mut d2 = defined.clone();
                        go(t, &mut d1, out);
                        go(e, &mut d2, out);
                        *defined = d1.intersection(&d2).cloned().collect();
                    }
                    StmtKind::While(g, b) => {
                        uses_guard(g, defined, out);
                        let mut d = defined.clone();
                        go(b, &mut d, out);
                    }
                    StmtKind::Read(vs) => defined.extend(vs.iter().cloned()),
                    StmtKind::Write(vs) => {
                        for v in vs {
                            if !defined.contains(v) && !out.contains(v) {
                                out.push(v.clone());
                            }
                        }
                    }
                }
            }
        }
        let mut out = Vec::new();
        let mut defined = BTreeSet::new();
        go(&self.body, &mut defined, &mut out);
        out
    }

    /// Inputs of the program: read variables followed by other exposed ones.
    pub fn input_vars(&self) -> Vec<String> {
        let mut out = self.read_vars();
        for v in self.exposed_vars() {
            if !out.contains(&v) {
                out.push(v)
            }
        }
        out
    }

    pub fn ref_vars(&self) -> Vec<String> {
        self.vars.iter().filter(|(_, t)| t.is_ref()).map(|(v, _)| v.clone()).collect()
    }

    /// A copy of the program keeping only statements whose line satisfies `keep`.
    /// Compound statements are kept when their own line is kept.
    pub fn retain_lines(&self, keep: &dyn Fn(Line) -> bool) -> Program {
        fn filter(stmts: &[Stmt], keep: &dyn Fn(Line) -> bool) -> Vec<Stmt> {
            stmts
                .iter()
                .filter(|s| keep(s.line))
                .map(|s| {
                    let kind = match &s.kind {
                        StmtKind::If(g, t, e) => StmtKind::If(g.clone(), filter(t, keep), filter(e, keep)),
                        StmtKind::While(g, b) => StmtKind::While(g.clone(), filter(b, keep)),
                        k => k.clone(),
                    };
                    Stmt::new(s.line, kind)
                })
                .collect()
        }
        Program { classes: self.classes.clone(), vars: self.vars.clone(), body: filter(&self.body, keep) }
    }
}

/// True iff `q` is obtained from `p` by erasing statements: every line of `q`
/// is a line of `p`, statements at shared lines have the same form, and the
/// nesting of kept statements is unchanged. The variable lists of `read` and
/// `write` in `q` may be sub-lists of those in `p`.
pub fn is_subprogram(q: &Program, p: &Program) -> bool {
    fn io_sub(a: &[String], b: &[String]) -> bool {
        a.iter().all(|v| b.contains(v))
    }
    fn seq(qs: &[Stmt], ps: &[Stmt]) -> bool {
        let mut pi = 0;
        for qs_stmt in qs {
            while pi < ps.len() && ps[pi].line != qs_stmt.line {
                pi += 1;
            }
            if pi == ps.len() {
                return false;
            }
            if !stmt(qs_stmt, &ps[pi]) {
                return false;
            }
            pi += 1;
        }
        true
    }
    fn stmt(q: &Stmt, p: &Stmt) -> bool {
        if q.line != p.line {
            return false;
        }
        match (&q.kind, &p.kind) {
            (StmtKind::If(g1, t1, e1), StmtKind::If(g2, t2, e2)) => g1 == g2 && seq(t1, t2) && seq(e1, e2),
            (StmtKind::While(g1, b1), StmtKind::While(g2, b2)) => g1 == g2 && seq(b1, b2),
            (StmtKind::Read(a), StmtKind::Read(b)) | (StmtKind::Write(a), StmtKind::Write(b)) => io_sub(a, b),
            (a, b) => a == b,
        }
    }
    seq(&q.body, &p.body)
}

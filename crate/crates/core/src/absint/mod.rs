//! Non-relational abstract interpretation over per-variable library domains.

use crate::concrete::Value;
use crate::domains::{sample_ints, sample_refs, AbsValue, Library, Sort, Uco};
use crate::lang::{CmpOp, Expr, Guard, Line, Program, Stmt, StmtKind};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

/// Domain of every variable; unmapped variables use `fallback`.
#[derive(Clone, Debug)]
pub struct DomainMap {
    pub per_var: HashMap<String, Arc<Uco>>,
    pub fallback: Arc<Uco>,
}

impl DomainMap {
    pub fn uniform(d: Arc<Uco>) -> DomainMap {
        DomainMap { per_var: HashMap::new(), fallback: d }
    }

    pub fn with(mut self, var: &str, d: Arc<Uco>) -> DomainMap {
        self.per_var.insert(var.to_string(), d);
        self
    }

    pub fn get(&self, var: &str) -> &Arc<Uco> {
        self.per_var.get(var).unwrap_or(&self.fallback)
    }
}

/// Abstract state: one abstract value per variable; missing variables are top.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct AbsState {
    pub vals: BTreeMap<String, AbsValue>,
}

impl AbsState {
    pub fn get(&self, var: &str, doms: &DomainMap) -> AbsValue {
        self.vals.get(var).copied().unwrap_or_else(|| doms.get(var).top())
    }

    pub fn set(&mut self, var: &str, v: AbsValue) {
        self.vals.insert(var.to_string(), v);
    }

    pub fn leq(&self, other: &AbsState, doms: &DomainMap) -> bool {
        let keys: Vec<&String> = self.vals.keys().chain(other.vals.keys()).collect();
        keys.into_iter().all(|k| {
            let d = doms.get(k);
            d.leq(self.get(k, doms), other.get(k, doms))
        })
    }

    pub fn join(&self, other: &AbsState, doms: &DomainMap) -> AbsState {
        let mut out = AbsState::default();
        for k in self.vals.keys().chain(other.vals.keys()) {
            let d = doms.get(k);
            out.set(k, d.join(self.get(k, doms), other.get(k, doms)));
        }
        out
    }

    pub fn render(&self, doms: &DomainMap, vars: &[String]) -> String {
        let mut out = String::new();
        for v in vars {
            if !out.is_empty() {
                out.push(' ');
            }
            let _ = write!(out, "{v}↦{}", doms.get(v).value_name(self.get(v, doms)));
        }
        out
    }
}

fn join_opt(a: Option<AbsState>, b: Option<AbsState>, doms: &DomainMap) -> Option<AbsState> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.join(&y, doms)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Does the domain give an atom to every integer (the bounded identity does not)?
fn covers_all_ints(d: &Uco) -> bool {
    sample_ints(0).iter().all(|v| d.alpha_int(v).is_ok()) && d.alpha_int(&num_bigint::BigInt::from(1_000_003)).is_ok()
}

/// Converts an abstract value of `from` into the least covering value of `to`.
pub fn convert(from: &Uco, v: AbsValue, to: &Uco) -> AbsValue {
    if v == 0 {
        return 0;
    }
    if from.name() == to.name() && from.carrier() == to.carrier() {
        return v;
    }
    if v == from.top() {
        return to.top();
    }
    let mut m = 0;
    if from.sort() != Sort::Ref && to.sort() != Sort::Ref {
        let bound = 31;
        for x in sample_ints(bound) {
            if let Ok(a) = from.alpha_int(&x) {
                if a & v == a {
                    m |= to.alpha_literal(&x);
                }
            }
        }
    }
    if from.sort() != Sort::Int && to.sort() != Sort::Int {
        let (mem, samples) = sample_refs();
        for s in &samples {
            if let (Ok(a), Ok(b)) = (from.alpha_value(&mem, s), to.alpha_value(&mem, s)) {
                if a & v == a {
                    m |= b;
                }
            }
        }
    }
    to.closure(m)
}

/// Sound abstract evaluation of `e` into domain `target`. Compositional, hence
/// possibly less precise than the best correct approximation.
pub fn abs_eval(e: &Expr, s: &AbsState, doms: &DomainMap, target: &Uco) -> AbsValue {
    match e {
        Expr::Int(v) => target.alpha_literal(v),
        Expr::Var(x) => convert(doms.get(x), s.get(x, doms), target),
        Expr::Field(..) => target.top(),
        Expr::Bin(op, a, b) => {
            let va = abs_eval(a, s, doms, target);
            let vb = abs_eval(b, s, doms, target);
            target.abs_op(*op, va, vb).unwrap_or(target.top())
        }
        Expr::Cond(g, a, b) => {
            let (st, sf) = (refine(g, s, doms), refine(&g.negated(), s, doms));
            let va = st.map(|st| abs_eval(a, &st, doms, target)).unwrap_or(0);
            let vb = sf.map(|sf| abs_eval(b, &sf, doms, target)).unwrap_or(0);
            target.join(va, vb)
        }
        Expr::Null => {
            let (m, samples) = sample_refs();
            target.alpha_value(&m, &samples[0]).unwrap_or(target.top())
        }
        Expr::New(_) => {
            let (m, samples) = sample_refs();
            target.alpha_value(&m, &samples[1]).unwrap_or(target.top())
        }
    }
}

/// Refines `s` by an atomic guard `x ⋈ literal` (or `x ⋈ null`); other guards
/// leave the state unchanged. `None` means the guard cannot hold.
pub fn refine(g: &Guard, s: &AbsState, doms: &DomainMap) -> Option<AbsState> {
    match g {
        Guard::False => None,
        Guard::Not(inner) => refine(&inner.negated(), s, doms),
        Guard::Cmp(op, a, b) => {
            let (op, x, lit) = match (a, b) {
                (Expr::Var(x), l @ (Expr::Int(_) | Expr::Null)) => (*op, x, l),
                (l @ (Expr::Int(_) | Expr::Null), Expr::Var(x)) => (op.flip(), x, l),
                _ => return Some(s.clone()),
            };
            let d = doms.get(x);
            let cur = s.get(x, doms);
            let refined = match lit {
                Expr::Int(k) => {
                    if d.sort() == Sort::Ref {
                        return Some(s.clone());
                    }
                    if !covers_all_ints(d) && cur == d.top() {
                        return Some(s.clone());
                    }
                    let mut m = 0;
                    // Values around the literal witness every atom the comparison can keep.
                    let near = (-2i64..=2).map(|o| k + o);
                    for v in sample_ints(31).into_iter().chain(near) {
                        if let Ok(a) = d.alpha_int(&v) {
                            if a & cur == a && op.holds(&v, k) {
                                m |= a;
                            }
                        }
                    }
                    d.closure(m)
                }
                _ => {
                    if d.sort() == Sort::Int || !matches!(op, CmpOp::Eq | CmpOp::Ne) {
                        return Some(s.clone());
                    }
                    let (mem, samples) = sample_refs();
                    let mut m = 0;
                    for v in &samples {
                        if let Ok(a) = d.alpha_value(&mem, v) {
                            let holds = (*v == Value::Null) == (op == CmpOp::Eq);
                            if a & cur == a && holds {
                                m |= a;
                            }
                        }
                    }
                    d.closure(m)
                }
            };
            if refined == 0 {
                return None;
            }
            let mut out = s.clone();
            out.set(x, refined);
            Some(out)
        }
        _ => Some(s.clone()),
    }
}

/// Per-line abstract states: `before[l]` holds whenever line `l` is about to
/// execute, `after[l]` when it has completed. `None` marks unreachable points.
#[derive(Clone, Debug, Default)]
pub struct Invariants {
    pub before: BTreeMap<Line, Option<AbsState>>,
    pub after: BTreeMap<Line, Option<AbsState>>,
}

struct Analyzer<'a> {
    doms: &'a DomainMap,
    ref_vars: Vec<String>,
    inv: Invariants,
}

impl Analyzer<'_> {
    fn record(&mut self, which: bool, line: Line, s: &Option<AbsState>) {
        let map = if which { &mut self.inv.before } else { &mut self.inv.after };
        let prev = map.remove(&line).flatten();
        map.insert(line, join_opt(prev, s.clone(), self.doms));
    }

    fn seq(&mut self, stmts: &[Stmt], s: Option<AbsState>) -> Option<AbsState> {
        stmts.iter().fold(s, |s, st| self.stmt(st, s))
    }

    fn stmt(&mut self, st: &Stmt, s: Option<AbsState>) -> Option<AbsState> {
        self.record(true, st.line, &s);
        let out = match &st.kind {
            StmtKind::Skip | StmtKind::Read(_) | StmtKind::Write(_) => s,
            StmtKind::Assign(x, e) => s.map(|mut s| {
                let d = self.doms.get(x).clone();
                let v = abs_eval(e, &s, self.doms, &d);
                s.set(x, v);
                s
            }),
            StmtKind::FieldAssign { .. } => s.map(|mut s| {
                for r in &self.ref_vars {
                    let d = self.doms.get(r);
                    let v = d.havoc_heap(s.get(r, self.doms));
                    s.set(r, v);
                }
                s
            }),
            StmtKind::If(g, t, e) => {
                let st_t = s.as_ref().and_then(|s| refine(g, s, self.doms));
                let st_f = s.as_ref().and_then(|s| refine(&g.negated(), s, self.doms));
                let a = self.seq(t, st_t);
                let b = self.seq(e, st_f);
                join_opt(a, b, self.doms)
            }
            StmtKind::While(g, body) => {
                // The first arrival at the head is kept apart from later ones, so
                // that exit facts from a loop entered once are not lost in a join.
                let first = s;
                let neg = g.negated();
                let enter = |x: &Option<AbsState>, doms: &DomainMap| x.as_ref().and_then(|x| refine(g, x, doms));
                let mut later = self.seq(body, enter(&first, self.doms));
                loop {
                    let out = self.seq(body, enter(&later, self.doms));
                    let next = join_opt(later.clone(), out, self.doms);
                    if next == later {
                        break;
                    }
                    later = next;
                }
                self.record(true, st.line, &later);
                let exit_first = first.as_ref().and_then(|x| refine(&neg, x, self.doms));
                let exit_later = later.as_ref().and_then(|x| refine(&neg, x, self.doms));
                join_opt(exit_first, exit_later, self.doms)
            }
        };
        self.record(false, st.line, &out);
        out
    }
}

/// Abstract invariants of `p` from the entry state by Kleene iteration.
pub fn infer_invariants(p: &Program, doms: &DomainMap, entry: &AbsState) -> Invariants {
    let mut a = Analyzer { doms, ref_vars: p.ref_vars(), inv: Invariants::default() };
    a.seq(&p.body, Some(entry.clone()));
    a.inv
}

/// Renders `line: var↦value ...` for the state before each line, plus the exit state.
pub fn render_invariants(p: &Program, doms: &DomainMap, inv: &Invariants) -> String {
    let vars: Vec<String> = p.vars.keys().cloned().collect();
    let mut out = String::new();
    for l in p.lines() {
        match inv.before.get(&l).cloned().flatten() {
            Some(s) => {
                let _ = writeln!(out, "{l}: {}", s.render(doms, &vars));
            }
            None => {
                let _ = writeln!(out, "{l}: unreachable");
            }
        }
    }
    if let Some(last) = p.body.last() {
        match inv.after.get(&last.line).cloned().flatten() {
            Some(s) => {
                let _ = writeln!(out, "end: {}", s.render(doms, &vars));
            }
            None => out.push_str("end: unreachable\n"),
        }
    }
    out
}

/// Domain map giving every variable the named library domain, falling back
/// to top where the domain does not fit the variable's type.
pub fn uniform_map(p: &Program, lib: &Library, name: &str) -> Result<DomainMap, crate::domains::DomainError> {
    let d = lib.get(name)?;
    let mut map = DomainMap::uniform(lib.top());
    for (v, t) in &p.vars {
        let fits = match d.sort() {
            Sort::Any => true,
            Sort::Int => !t.is_ref(),
            Sort::Ref => t.is_ref(),
        };
        map.per_var.insert(v.clone(), if fits { d.clone() } else { lib.top() });
    }
    Ok(map)
}

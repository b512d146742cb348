//! Agreements between pairs of states, state predicates, and the provers that
//! propagate agreements backwards through a program.
//!
//! An agreement assigns a library domain to some variables and may also hold
//! guard conditions: two states agree when every listed variable has the same
//! abstract value in both and every guard evaluates the same way in both.

mod prover;

pub use prover::{Labels, Mode, Prover};

use crate::concrete::{eval_guard_pure, Memory, Shape, Value};
use crate::domains::{Library, Obs};
use crate::lang::{guard_to_string, parse_guard, parse_guard_in, CmpOp, Expr, Guard, BinOp, Line, Program, Stmt, StmtKind};
use num_bigint::BigInt;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Agreement {
    /// Variable to library domain name; absent means `top`.
    pub doms: BTreeMap<String, String>,
    /// Guards whose truth value must coincide, keyed by their rendering.
    pub guards: BTreeMap<String, Guard>,
}

impl Agreement {
    pub fn new() -> Agreement {
        Agreement::default()
    }

    /// Sets the domain of `var`; `top` removes the condition.
    pub fn with(mut self, var: &str, dom: &str) -> Agreement {
        self.set(var, dom);
        self
    }

    pub fn set(&mut self, var: &str, dom: &str) {
        if dom == "top" {
            self.doms.remove(var);
        } else {
            self.doms.insert(var.to_string(), dom.to_string());
        }
    }

    pub fn with_guard(mut self, g: Guard) -> Agreement {
        self.add_guard(g);
        self
    }

    pub fn add_guard(&mut self, g: Guard) {
        if !matches!(g, Guard::True | Guard::False) {
            self.guards.insert(guard_to_string(&g), g);
        }
    }

    pub fn domain(&self, var: &str) -> &str {
        self.doms.get(var).map(String::as_str).unwrap_or("top")
    }

    /// Identity on every listed variable.
    pub fn identity<'a>(vars: impl IntoIterator<Item = &'a String>) -> Agreement {
        Agreement { doms: vars.into_iter().map(|v| (v.clone(), "id".to_string())).collect(), guards: BTreeMap::new() }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.doms.keys().cloned().collect();
        for g in self.guards.values() {
            out.extend(g.vars());
        }
        out
    }

    pub fn mentions(&self, v: &str) -> bool {
        self.doms.contains_key(v) || self.guards.values().any(|g| g.vars().contains(v))
    }

    pub fn is_empty(&self) -> bool {
        self.doms.is_empty() && self.guards.is_empty()
    }

    pub fn non_top_count(&self) -> usize {
        self.doms.len() + self.guards.len()
    }
}

impl fmt::Display for Agreement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut items: Vec<String> = self.doms.iter().map(|(v, d)| format!("{d}@{v}")).collect();
        items.extend(self.guards.keys().map(|g| format!("[{g}]")));
        write!(f, "{{{}}}", items.join(", "))
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("bad agreement item {0:?} (expected dom@var or [guard])")]
pub struct AgreementParseError(pub String);

/// Parses `{par@n, [n > 0]}`; the braces are optional. Guards may only use
/// integer variables; see [`parse_agreement_for`].
pub fn parse_agreement(text: &str) -> Result<Agreement, AgreementParseError> {
    parse_agreement_with(text, &|g| parse_guard(g).ok())
}

/// Parses an agreement whose guards may use the variables of `p`.
pub fn parse_agreement_for(text: &str, p: &Program) -> Result<Agreement, AgreementParseError> {
    parse_agreement_with(text, &|g| parse_guard_in(g, p).ok())
}

fn parse_agreement_with(text: &str, guard: &dyn Fn(&str) -> Option<Guard>) -> Result<Agreement, AgreementParseError> {
    let t = text.trim();
    let t = t.strip_prefix('{').and_then(|s| s.strip_suffix('}')).unwrap_or(t);
    let mut g = Agreement::new();
    let mut depth = 0;
    let mut item = String::new();
    let mut items = Vec::new();
    for c in t.chars().chain(std::iter::once(',')) {
        match c {
            '[' => {
                depth += 1;
                item.push(c)
            }
            ']' => {
                depth -= 1;
                item.push(c)
            }
            ',' if depth == 0 => {
                if !item.trim().is_empty() {
                    items.push(item.trim().to_string());
                }
                item.clear();
            }
            _ => item.push(c),
        }
    }
    for it in items {
        if let Some(inner) = it.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let gd = guard(inner).ok_or_else(|| AgreementParseError(it.clone()))?;
            g.add_guard(gd);
        } else {
            let (d, v) = it.split_once('@').ok_or_else(|| AgreementParseError(it.clone()))?;
            if d.trim().is_empty() || v.trim().is_empty() {
                return Err(AgreementParseError(it));
            }
            g.set(v.trim(), d.trim());
        }
    }
    Ok(g)
}

/// One component of the value two states must share to agree.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum KeyPart {
    Obs(Obs),
    Guard(Option<bool>),
    Missing,
}

/// What `g` observes of `mem`. Reference variables under the identity are
/// observed together, so aliasing between them counts.
pub fn key(g: &Agreement, mem: &Memory, lib: &Library) -> Vec<KeyPart> {
    let mut out = Vec::with_capacity(g.doms.len() + g.guards.len() + 1);
    let mut joint: Vec<&Value> = Vec::new();
    for (v, d) in &g.doms {
        let Some(val) = mem.get(v) else {
            out.push(KeyPart::Missing);
            continue;
        };
        if d == "id" && val.is_ref() {
            joint.push(val);
            continue;
        }
        let part = lib.get(d).ok().and_then(|dom| dom.observe(mem, val).ok());
        out.push(part.map(KeyPart::Obs).unwrap_or(KeyPart::Missing));
    }
    if !joint.is_empty() {
        out.push(KeyPart::Obs(Obs::Shape(Shape::of(mem, &joint))));
    }
    for gd in g.guards.values() {
        out.push(KeyPart::Guard(eval_guard_pure(gd, mem).ok()));
    }
    out
}

/// Do the two states agree on `g`?
pub fn agree(g: &Agreement, s1: &Memory, s2: &Memory, lib: &Library) -> bool {
    key(g, s1, lib) == key(g, s2, lib)
}

/// A conjunction of heap-free facts on variables; empty means `true`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Predicate {
    pub facts: Vec<Guard>,
}

fn conjuncts(g: &Guard, out: &mut Vec<Guard>) {
    match g {
        Guard::And(a, b) => {
            conjuncts(a, out);
            conjuncts(b, out);
        }
        Guard::True => {}
        Guard::Not(inner) => {
            let n = inner.negated();
            if matches!(n, Guard::And(..)) {
                conjuncts(&n, out)
            } else {
                out.push(n)
            }
        }
        other => out.push(other.clone()),
    }
}

impl Predicate {
    pub fn truth() -> Predicate {
        Predicate::default()
    }

    pub fn from_guard(g: &Guard) -> Predicate {
        Predicate::truth().and(g)
    }

    /// Adds the heap-free conjuncts of `g`; others are dropped, which is sound.
    pub fn and(&self, g: &Guard) -> Predicate {
        let mut cs = Vec::new();
        conjuncts(g, &mut cs);
        let mut out = self.clone();
        for c in cs {
            if !c.reads_heap() && !out.facts.contains(&c) {
                out.facts.push(c);
            }
        }
        out
    }

    pub fn holds(&self, mem: &Memory) -> bool {
        self.facts.iter().all(|g| eval_guard_pure(g, mem) == Ok(true))
    }

    pub fn vars(&self) -> BTreeSet<String> {
        self.facts.iter().flat_map(|g| g.vars()).collect()
    }

    pub fn kill(&self, vars: &BTreeSet<String>) -> Predicate {
        Predicate { facts: self.facts.iter().filter(|g| g.vars().is_disjoint(vars)).cloned().collect() }
    }

    pub fn is_true(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn to_guard(&self) -> Guard {
        let mut it = self.facts.iter().cloned();
        let Some(first) = it.next() else { return Guard::True };
        it.fold(first, |a, b| Guard::And(Box::new(a), Box::new(b)))
    }

    fn common(&self, other: &Predicate) -> Predicate {
        Predicate { facts: self.facts.iter().filter(|f| other.facts.contains(f)).cloned().collect() }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.facts.is_empty() {
            write!(f, "true")
        } else {
            let parts: Vec<String> = self.facts.iter().map(guard_to_string).collect();
            write!(f, "{}", parts.join(" and "))
        }
    }
}

/// Variables assigned anywhere in `stmts` (field updates change no variable).
pub fn assigned(stmts: &[Stmt]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for s in stmts {
        let mut all = Vec::new();
        s.walk(&mut all);
        for t in all {
            match &t.kind {
                StmtKind::Assign(x, _) => {
                    out.insert(x.clone());
                }
                StmtKind::Read(vs) => out.extend(vs.iter().cloned()),
                _ => {}
            }
        }
    }
    out
}

/// `x + k` or `x - k` for a literal `k`, as a signed offset.
fn offset(e: &Expr, x: &str) -> Option<BigInt> {
    match e {
        Expr::Bin(BinOp::Add, a, b) => match (&**a, &**b) {
            (Expr::Var(v), Expr::Int(k)) | (Expr::Int(k), Expr::Var(v)) if v == x => Some(k.clone()),
            _ => None,
        },
        Expr::Bin(BinOp::Sub, a, b) => match (&**a, &**b) {
            (Expr::Var(v), Expr::Int(k)) if v == x => Some(-k.clone()),
            _ => None,
        },
        _ => None,
    }
}

/// `x op c` facts shifted through `x := x + k`.
fn shift(fact: &Guard, x: &str, k: &BigInt) -> Option<Guard> {
    let ordered = matches!(fact, Guard::Cmp(CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge | CmpOp::Eq | CmpOp::Ne, ..));
    if !ordered {
        return None;
    }
    match fact {
        Guard::Cmp(op, Expr::Var(v), Expr::Int(c)) if v == x => Some(Guard::Cmp(*op, Expr::Var(v.clone()), Expr::Int(c + k))),
        Guard::Cmp(op, Expr::Int(c), Expr::Var(v)) if v == x => Some(Guard::Cmp(*op, Expr::Int(c + k), Expr::Var(v.clone()))),
        _ => None,
    }
}

/// A predicate guaranteed to hold after `s` when `beta` holds before.
pub fn transformed_predicate(s: &Stmt, beta: &Predicate) -> Predicate {
    transformed_predicate_skipping(s, beta, &BTreeSet::new())
}

pub fn transformed_sequence(stmts: &[Stmt], beta: &Predicate) -> Predicate {
    transformed_sequence_skipping(stmts, beta, &BTreeSet::new())
}

/// Like [`transformed_predicate`], but statements on the `skipped` lines may
/// or may not run, so only facts they cannot affect survive them.
pub fn transformed_predicate_skipping(s: &Stmt, beta: &Predicate, skipped: &BTreeSet<Line>) -> Predicate {
    if skipped.contains(&s.line) {
        return beta.kill(&assigned(std::slice::from_ref(s)));
    }
    match &s.kind {
        StmtKind::Skip | StmtKind::Write(_) | StmtKind::FieldAssign { .. } => beta.clone(),
        StmtKind::Read(vs) => beta.kill(&vs.iter().cloned().collect()),
        StmtKind::Assign(x, e) => {
            let k = offset(e, x);
            let mut facts = Vec::new();
            for f in &beta.facts {
                if !f.vars().contains(x) {
                    facts.push(f.clone());
                } else if let Some(g) = k.as_ref().and_then(|k| shift(f, x, k)) {
                    facts.push(g);
                }
            }
            let var = Expr::Var(x.clone());
            match e {
                Expr::Int(_) | Expr::Null => facts.push(Guard::Cmp(CmpOp::Eq, var, e.clone())),
                Expr::New(_) => facts.push(Guard::Cmp(CmpOp::Ne, var, Expr::Null)),
                _ => {}
            }
            Predicate { facts }
        }
        StmtKind::If(b, t, e) => {
            let pt = transformed_sequence_skipping(t, &beta.and(b), skipped);
            let pf = transformed_sequence_skipping(e, &beta.and(&b.negated()), skipped);
            pt.common(&pf)
        }
        StmtKind::While(b, body) => beta.kill(&assigned(body)).and(&b.negated()),
    }
}

pub fn transformed_sequence_skipping(stmts: &[Stmt], beta: &Predicate, skipped: &BTreeSet<Line>) -> Predicate {
    stmts.iter().fold(beta.clone(), |b, s| transformed_predicate_skipping(s, &b, skipped))
}

/// Possible sharing (over-approximated) and definite aliasing
/// (under-approximated) between reference variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SharingInfo {
    pub share: BTreeMap<String, BTreeSet<String>>,
    pub dalias: BTreeMap<String, BTreeSet<String>>,
}

impl SharingInfo {
    /// Every variable of a compatible class may share; each variable only
    /// definitely aliases itself.
    pub fn conservative(p: &Program) -> SharingInfo {
        let mut s = SharingInfo::default();
        for x in p.ref_vars() {
            s.share.insert(x.clone(), crate::pdg::share(p, &x).into_iter().collect());
            s.dalias.insert(x.clone(), [x.clone()].into());
        }
        s
    }

    pub fn share(&self, x: &str) -> BTreeSet<String> {
        self.share.get(x).cloned().unwrap_or_else(|| [x.to_string()].into())
    }

    pub fn dalias(&self, x: &str) -> BTreeSet<String> {
        self.dalias.get(x).cloned().unwrap_or_else(|| [x.to_string()].into())
    }
}

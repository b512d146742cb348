//! Bounded decision procedures for agreement triples and preservation, and
//! the backward labelling of a program with agreement preconditions.
//!
//! Triples and preservation are decided by enumerating a finite grid of
//! states: integers in `[-bound, bound]` and references over a catalog of
//! small heaps. Preconditions are built by the structural rules and, for
//! assignments, by a search over library domains validated on the grid.

use super::{assigned, key, transformed_predicate_skipping, Agreement, Predicate, SharingInfo};
use crate::concrete::{
    enumerate_memories_with, eval_guard_pure, exec, int_range, run, shapes_of, HeapBound, Memory, Outcome, Value,
    DEFAULT_STEP_LIMIT,
};
use crate::domains::{refines, sample_refs, DomainError, Library, Obs, INT_DOMAINS, REF_DOMAINS};
use crate::lang::{listing, BinOp, Expr, Guard, Line, Program, Stmt, StmtKind};
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex, OnceLock};

/// `Concrete` restricts every agreement to `top` or `id`, which turns the
/// labelling into ordinary (concrete) slicing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Abstract,
    Concrete,
}

/// Agreements attached to program points by [`Prover::label_sequence`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Labels {
    pub after: BTreeMap<Line, Agreement>,
    pub before: BTreeMap<Line, Agreement>,
    /// The state predicate assumed before each statement.
    pub beta: BTreeMap<Line, Predicate>,
    pub entry: Agreement,
    /// Conditionals labelled by a check of the whole statement; their
    /// branches must not be sliced separately.
    pub atomic: BTreeSet<Line>,
}

/// Library domains ordered by precision, per value kind.
#[derive(Debug)]
struct Order {
    names: [Vec<String>; 2],
    finer: HashMap<(String, String), bool>,
}

impl Order {
    fn new(lib: &Library) -> Order {
        let names = [INT_DOMAINS.map(String::from).to_vec(), REF_DOMAINS.map(String::from).to_vec()];
        let mut finer = HashMap::new();
        for list in &names {
            for a in list {
                for b in list {
                    let r = refines(&lib.get(a).unwrap(), &lib.get(b).unwrap());
                    finer.insert((a.clone(), b.clone()), r);
                }
            }
        }
        Order { names, finer }
    }

    /// `a` is at least as precise as `b`.
    fn leq(&self, a: &str, b: &str) -> bool {
        a == b || b == "top" || a == "id" || self.finer.get(&(a.to_string(), b.to_string())).copied().unwrap_or(false)
    }

    fn list(&self, is_ref: bool) -> &[String] {
        &self.names[is_ref as usize]
    }

    fn rank(&self, d: &str, is_ref: bool) -> usize {
        self.list(is_ref).iter().position(|n| n == d).unwrap_or(0)
    }

    /// The coarsest library domain refining both.
    fn meet(&self, a: &str, b: &str, is_ref: bool) -> String {
        if self.leq(a, b) {
            return a.to_string();
        }
        if self.leq(b, a) {
            return b.to_string();
        }
        self.list(is_ref)
            .iter()
            .find(|n| self.leq(n, a) && self.leq(n, b))
            .cloned()
            .unwrap_or_else(|| "id".to_string())
    }
}

/// Which variables and whether the heap a statement sequence may change.
fn effect(stmts: &[Stmt]) -> (BTreeSet<String>, bool) {
    let mut touched = BTreeSet::new();
    let mut heap = false;
    for s in stmts {
        touched.extend(s.defs());
        let mut all = Vec::new();
        s.walk(&mut all);
        heap |= all.iter().any(|t| matches!(t.kind, StmtKind::FieldAssign { .. }));
    }
    (touched, heap)
}

fn stmt_vars(stmts: &[Stmt]) -> BTreeSet<String> {
    stmts.iter().flat_map(|s| s.vars()).collect()
}

fn hash_of(v: &impl Hash) -> u64 {
    let mut h = DefaultHasher::new();
    v.hash(&mut h);
    h.finish()
}

fn expr_size(e: &Expr) -> usize {
    match e {
        Expr::Bin(_, a, b) => 1 + expr_size(a) + expr_size(b),
        Expr::Cond(g, a, b) => 1 + guard_size(g) + expr_size(a) + expr_size(b),
        _ => 1,
    }
}

fn guard_size(g: &Guard) -> usize {
    match g {
        Guard::True | Guard::False => 1,
        Guard::Cmp(_, a, b) => 1 + expr_size(a) + expr_size(b),
        Guard::Not(a) => 1 + guard_size(a),
        Guard::And(a, b) | Guard::Or(a, b) => 1 + guard_size(a) + guard_size(b),
    }
}

fn subst_expr(e: &Expr, x: &str, r: &Expr) -> Option<Expr> {
    Some(match e {
        Expr::Var(v) if v == x => r.clone(),
        Expr::Field(v, path) if v == x => match r {
            Expr::Var(y) => Expr::Field(y.clone(), path.clone()),
            _ => return None,
        },
        Expr::Bin(op, a, b) => Expr::Bin(*op, Box::new(subst_expr(a, x, r)?), Box::new(subst_expr(b, x, r)?)),
        Expr::Cond(g, a, b) => Expr::Cond(
            Box::new(subst_guard(g, x, r)?),
            Box::new(subst_expr(a, x, r)?),
            Box::new(subst_expr(b, x, r)?),
        ),
        other => other.clone(),
    })
}

/// Folds `(e + c1) + c2` and `(e - c1) + c2` into one offset, so that guards
/// pushed back through counting loops stay readable.
fn fold_offsets(e: Expr) -> Expr {
    let Expr::Bin(op @ (BinOp::Add | BinOp::Sub), a, b) = e else { return e };
    let a = fold_offsets(*a);
    let sign = |op: BinOp, v: &BigInt| if op == BinOp::Add { v.clone() } else { -v.clone() };
    match (a, *b) {
        (Expr::Bin(inner @ (BinOp::Add | BinOp::Sub), x, c1), Expr::Int(c2)) if matches!(*c1, Expr::Int(_)) => {
            let Expr::Int(c1) = *c1 else { unreachable!() };
            let k = sign(inner, &c1) + sign(op, &c2);
            if k.is_zero() {
                *x
            } else if k.is_negative() {
                Expr::Bin(BinOp::Sub, x, Box::new(Expr::Int(-k)))
            } else {
                Expr::Bin(BinOp::Add, x, Box::new(Expr::Int(k)))
            }
        }
        (a, b) => Expr::Bin(op, Box::new(a), Box::new(b)),
    }
}

/// `g[r/x]`, when expressible.
fn subst_guard(g: &Guard, x: &str, r: &Expr) -> Option<Guard> {
    Some(match g {
        Guard::True | Guard::False => g.clone(),
        Guard::Cmp(op, a, b) => Guard::Cmp(*op, fold_offsets(subst_expr(a, x, r)?), fold_offsets(subst_expr(b, x, r)?)),
        Guard::Not(a) => Guard::Not(Box::new(subst_guard(a, x, r)?)),
        Guard::And(a, b) => Guard::And(Box::new(subst_guard(a, x, r)?), Box::new(subst_guard(b, x, r)?)),
        Guard::Or(a, b) => Guard::Or(Box::new(subst_guard(a, x, r)?), Box::new(subst_guard(b, x, r)?)),
    })
}

fn max_literal_expr(e: &Expr) -> i64 {
    match e {
        Expr::Int(v) => v.abs().to_i64().unwrap_or(i64::MAX / 4).min(1_000),
        Expr::Bin(_, a, b) => max_literal_expr(a).max(max_literal_expr(b)),
        Expr::Cond(g, a, b) => max_literal(g).max(max_literal_expr(a)).max(max_literal_expr(b)),
        _ => 0,
    }
}

fn max_literal(g: &Guard) -> i64 {
    match g {
        Guard::True | Guard::False => 0,
        Guard::Cmp(_, a, b) => max_literal_expr(a).max(max_literal_expr(b)),
        Guard::Not(a) => max_literal(a),
        Guard::And(a, b) | Guard::Or(a, b) => max_literal(a).max(max_literal(b)),
    }
}

fn reachable(mem: &Memory, v: &Value) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut work = vec![v.clone()];
    while let Some(v) = work.pop() {
        if let Value::Loc(l) = v {
            if !seen.insert(l) {
                continue;
            }
            work.extend(mem.heap[l].fields.iter().map(|(_, f)| f.clone()));
        }
    }
    seen
}

/// Largest grid enumerated before the ranges are shrunk.
pub const DEFAULT_MAX_GRID: usize = 250_000;
/// The bound actually used and the enumerated states.
type Grid = (i64, Arc<Vec<Memory>>);

const MAX_EXHAUSTIVE: usize = 256;
/// Reachable integers beyond the bound added to a variable's range.
const MAX_EXTRA_VALUES: usize = 16;
const MAX_GUARD_SIZE: usize = 24;
/// Largest number of variables searched for a whole conditional.
const MAX_IF_SEARCH: usize = 4;

pub struct Prover {
    p: Program,
    lib: Library,
    mode: Mode,
    sharing: SharingInfo,
    step_limit: usize,
    heap: HeapBound,
    max_grid: usize,
    order: Order,
    memo: Mutex<HashMap<u64, bool>>,
    grids: Mutex<HashMap<(Vec<String>, bool), Grid>>,
    extra: OnceLock<BTreeMap<String, Vec<BigInt>>>,
    /// Lines whose effects the predicates may not rely on.
    skipped: BTreeSet<Line>,
}

impl Prover {
    pub fn new(p: &Program, lib: &Library, mode: Mode) -> Prover {
        Prover {
            p: p.clone(),
            lib: lib.clone(),
            mode,
            sharing: SharingInfo::conservative(p),
            step_limit: DEFAULT_STEP_LIMIT,
            heap: HeapBound::default(),
            max_grid: DEFAULT_MAX_GRID,
            order: Order::new(lib),
            memo: Mutex::new(HashMap::new()),
            grids: Mutex::new(HashMap::new()),
            extra: OnceLock::new(),
            skipped: BTreeSet::new(),
        }
    }

    pub fn with_sharing(mut self, s: SharingInfo) -> Prover {
        self.sharing = s;
        self.clear();
        self
    }

    pub fn with_step_limit(mut self, n: usize) -> Prover {
        self.step_limit = n;
        self.clear();
        self
    }

    pub fn with_heap(mut self, h: HeapBound) -> Prover {
        self.heap = h;
        self.clear();
        self
    }

    pub fn with_max_grid(mut self, n: usize) -> Prover {
        self.max_grid = n;
        self.clear();
        self
    }

    /// Statements that may be missing from the program the labels are used
    /// for; facts they establish are not assumed past them.
    pub fn with_skipped(mut self, lines: BTreeSet<Line>) -> Prover {
        self.skipped = lines;
        self
    }

    fn clear(&mut self) {
        self.memo.lock().unwrap().clear();
        self.grids.lock().unwrap().clear();
        self.extra = OnceLock::new();
    }

    pub fn program(&self) -> &Program {
        &self.p
    }

    pub fn library(&self) -> &Library {
        &self.lib
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Rejects agreements naming unknown domains or domains of the wrong kind.
    pub fn validate(&self, g: &Agreement) -> Result<(), DomainError> {
        for (v, d) in &g.doms {
            let dom = self.lib.get(d)?;
            let is_ref = self.is_ref(v);
            if !self.order.list(is_ref).contains(d) {
                let what = if is_ref { "references" } else { "integers" };
                return Err(DomainError::Sort { domain: dom.name().to_string(), what: what.into() });
            }
        }
        Ok(())
    }

    fn is_ref(&self, v: &str) -> bool {
        self.p.var_ty(v).is_ref()
    }

    fn var_index(&self, v: &str) -> usize {
        self.p.vars.get_index_of(v).unwrap_or(usize::MAX)
    }

    fn ordered(&self, vars: impl IntoIterator<Item = String>) -> Vec<String> {
        let mut v: Vec<String> = vars.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        v.sort_by_key(|x| (self.var_index(x), x.clone()));
        v
    }

    fn candidates(&self, is_ref: bool) -> Vec<String> {
        match self.mode {
            Mode::Concrete => vec!["top".into(), "id".into()],
            Mode::Abstract => self.order.list(is_ref).to_vec(),
        }
    }

    // ---- state grids ----

    /// Integers outside `[-B, B]` that variables take while the program runs
    /// from the unextended grid. Local checks include them, so that every
    /// state reachable from the grid at some program point is checked there.
    fn extra_values(&self) -> &BTreeMap<String, Vec<BigInt>> {
        self.extra.get_or_init(|| {
            let vars = self.ordered(self.p.vars.keys().cloned());
            let (b, entry) = self.grid_with(&vars, false);
            let bound = BigInt::from(b);
            let outside = |m: &Memory, out: &mut BTreeMap<String, BTreeSet<BigInt>>| {
                for (v, val) in &m.store {
                    if let Value::Int(i) = val {
                        if i.abs() > bound {
                            out.entry(v.clone()).or_default().insert(i.clone());
                        }
                    }
                }
            };
            let found = entry
                .par_iter()
                .map(|m| {
                    let t = run(&self.p, m, self.step_limit);
                    let mut out = BTreeMap::new();
                    for s in &t.states {
                        outside(&s.mem, &mut out);
                    }
                    if let Some(m) = &t.final_mem {
                        outside(m, &mut out);
                    }
                    out
                })
                .reduce(BTreeMap::new, |mut a, b| {
                    for (v, xs) in b {
                        a.entry(v).or_default().extend(xs);
                    }
                    a
                });
            found
                .into_iter()
                .map(|(v, xs)| {
                    let mut xs: Vec<BigInt> = xs.into_iter().collect();
                    xs.sort_by(|a, b| (a.abs(), a).cmp(&(b.abs(), b)));
                    xs.truncate(MAX_EXTRA_VALUES);
                    (v, xs)
                })
                .collect()
        })
    }

    fn estimate(&self, vars: &[String], b: i64, heap: &HeapBound, extended: bool) -> f64 {
        let extra = if extended { Some(self.extra_values()) } else { None };
        let mut total = 1f64;
        let mut objects = 0f64;
        for v in vars {
            match self.p.var_ty(v).class() {
                None => {
                    let more = extra.and_then(|e| e.get(v)).map_or(0, Vec::len);
                    total *= (2 * b + 1) as f64 + more as f64;
                }
                Some(c) => {
                    let shapes = shapes_of(c, &self.p.classes, heap).len() as f64;
                    let share = if heap.sharing { objects } else { 0.0 };
                    total *= 1.0 + shapes + share;
                    objects += heap.max_nodes as f64;
                }
            }
        }
        total
    }

    /// States over `vars` and their integer bound, shrinking the heap catalog
    /// and then the integer range until the grid fits `max_grid`.
    /// With `extended`, integer variables also range over their reachable
    /// values outside the bound; those are dropped only when nothing else fits.
    fn grid_with(&self, vars: &[String], extended: bool) -> Grid {
        let cache_key = (vars.to_vec(), extended);
        if let Some(g) = self.grids.lock().unwrap().get(&cache_key) {
            return g.clone();
        }
        let b0 = self.lib.bound().max(1);
        let mut plans = vec![(b0, self.heap.clone())];
        let small = HeapBound { max_nodes: 1, ..self.heap.clone() };
        plans.push((b0, small.clone()));
        for b in (2..b0).rev() {
            plans.push((b, small.clone()));
        }
        let unshared = HeapBound { sharing: false, ..small };
        plans.push((2.min(b0), unshared.clone()));
        plans.push((1, unshared));
        let fits = |ext: bool| {
            plans.iter().find(|(b, h)| self.estimate(vars, *b, h, ext) <= self.max_grid as f64).cloned().map(|p| (p, ext))
        };
        let ((b, heap), ext) = (if extended { fits(true) } else { None })
            .or_else(|| fits(false))
            .unwrap_or_else(|| (plans.last().unwrap().clone(), false));
        let typed: Vec<(String, crate::lang::Ty)> = vars.iter().map(|v| (v.clone(), self.p.var_ty(v))).collect();
        let ints = int_range(-b, b);
        let extra = if ext { Some(self.extra_values()) } else { None };
        let ints_for = |v: &str| {
            let mut xs = ints.clone();
            xs.extend(extra.and_then(|e| e.get(v)).into_iter().flatten().cloned());
            xs
        };
        let mems = enumerate_memories_with(&typed, &ints_for, &self.p.classes, &heap);
        let mems: Vec<Memory> = mems.into_iter().filter(|m| self.respects_sharing(m, vars)).collect();
        let g = (b, Arc::new(mems));
        self.grids.lock().unwrap().insert(cache_key, g.clone());
        g
    }

    /// Excludes states contradicting the sharing information.
    fn respects_sharing(&self, m: &Memory, vars: &[String]) -> bool {
        let refs: Vec<&String> = vars.iter().filter(|v| self.is_ref(v)).collect();
        for (i, x) in refs.iter().enumerate() {
            let vx = m.get(x).cloned().unwrap_or(Value::Null);
            for y in &refs[i + 1..] {
                let vy = m.get(y).cloned().unwrap_or(Value::Null);
                let aliased = self.sharing.dalias(x).contains(*y) || self.sharing.dalias(y).contains(*x);
                if aliased && vx != vy {
                    return false;
                }
                let may_share = self.sharing.share(x).contains(*y) || self.sharing.share(y).contains(*x);
                if !may_share && !reachable(m, &vx).is_disjoint(&reachable(m, &vy)) {
                    return false;
                }
            }
        }
        true
    }

    fn states(&self, vars: BTreeSet<String>, beta: &Predicate, extended: bool) -> (Arc<Vec<Memory>>, Predicate) {
        let vars = self.ordered(vars);
        let set: BTreeSet<String> = vars.iter().cloned().collect();
        let (b, grid) = self.grid_with(&vars, extended);
        // Dropping facts only adds states, which is sound. Facts on variables
        // outside the grid cannot be evaluated, and facts whose literals reach
        // the integer bound would leave only the grid's edge (or nothing) to
        // check, which says little about the states beyond it.
        let facts: Vec<Guard> =
            beta.facts.iter().filter(|f| f.vars().is_subset(&set) && max_literal(f) < b).cloned().collect();
        let mut beta = Predicate { facts };
        if !grid.is_empty() && !grid.iter().any(|m| beta.holds(m)) {
            beta = Predicate::truth();
        }
        (grid, beta)
    }

    // ---- triples and preservation ----

    /// `{g} beta stmts {g2}`: any two states satisfying `beta` that agree on
    /// `g` still agree on `g2` after running `stmts` (a runtime error counts
    /// as an outcome of its own; runs hitting the step limit are ignored).
    ///
    /// Entry states range over the integer bound.
    pub fn check_triple(&self, g: &Agreement, beta: &Predicate, stmts: &[Stmt], g2: &Agreement) -> bool {
        self.triple(g, beta, stmts, g2, false)
    }

    /// Triple for statements inside the program: their grids also cover the
    /// values reached from the bounded entry states, so local checks compose.
    fn local_triple(&self, g: &Agreement, beta: &Predicate, stmts: &[Stmt], g2: &Agreement) -> bool {
        self.triple(g, beta, stmts, g2, true)
    }

    fn triple(&self, g: &Agreement, beta: &Predicate, stmts: &[Stmt], g2: &Agreement, extended: bool) -> bool {
        let (touched, heap) = effect(stmts);
        let (aff, rest) = self.split(g2, &touched, heap);
        if !self.implies(g, &rest) {
            return self.triple_raw(g, beta, stmts, g2, extended);
        }
        let mut w = stmt_vars(stmts);
        w.extend(aff.vars());
        self.triple_raw(&self.restrict(g, &w), beta, stmts, &aff, extended)
    }

    fn triple_raw(&self, g: &Agreement, beta: &Predicate, stmts: &[Stmt], g2: &Agreement, extended: bool) -> bool {
        if g2.is_empty() {
            return true;
        }
        let h = hash_of(&("triple", g, beta, stmts, g2, extended));
        if let Some(r) = self.memo.lock().unwrap().get(&h) {
            return *r;
        }
        let mut vars = stmt_vars(stmts);
        vars.extend(g.vars());
        vars.extend(g2.vars());
        vars.extend(beta.vars());
        let (grid, beta) = self.states(vars, beta, extended);
        let pairs: Vec<(u64, Option<u64>)> = grid
            .par_iter()
            .filter(|m| beta.holds(m))
            .filter_map(|m| {
                let pre = hash_of(&key(g, m, &self.lib));
                match exec(stmts, m.clone(), &self.p.classes, self.step_limit) {
                    Outcome::Done(m2) => Some((pre, Some(hash_of(&key(g2, &m2, &self.lib))))),
                    Outcome::Error(_) => Some((pre, None)),
                    Outcome::StepLimit => None,
                }
            })
            .collect();
        let mut seen: HashMap<u64, Option<u64>> = HashMap::new();
        let ok = pairs.into_iter().all(|(pre, post)| *seen.entry(pre).or_insert(post) == post);
        self.memo.lock().unwrap().insert(h, ok);
        ok
    }

    /// Entries of `g` a statement with this effect may change, and the rest.
    /// Identity on references is observed jointly, so all such entries move
    /// together.
    fn split(&self, g: &Agreement, touched: &BTreeSet<String>, heap: bool) -> (Agreement, Agreement) {
        let mut aff = Agreement::new();
        let mut rest = Agreement::new();
        for (v, d) in &g.doms {
            if touched.contains(v) || (heap && self.is_ref(v)) {
                aff.set(v, d)
            } else {
                rest.set(v, d)
            }
        }
        for gd in g.guards.values() {
            let vs = gd.vars();
            let hit = !vs.is_disjoint(touched) || (heap && (gd.reads_heap() || vs.iter().any(|v| self.is_ref(v))));
            if hit {
                aff.add_guard(gd.clone())
            } else {
                rest.add_guard(gd.clone())
            }
        }
        let joint_hit = aff.doms.iter().any(|(v, d)| d == "id" && self.is_ref(v));
        if joint_hit {
            let moved: Vec<String> =
                rest.doms.iter().filter(|(v, d)| *d == "id" && self.is_ref(v)).map(|(v, _)| v.clone()).collect();
            for v in moved {
                rest.doms.remove(&v);
                aff.set(&v, "id");
            }
        }
        (aff, rest)
    }

    /// Entries of `g` mentioning only variables of `w`.
    fn restrict(&self, g: &Agreement, w: &BTreeSet<String>) -> Agreement {
        let mut out = Agreement::new();
        for (v, d) in &g.doms {
            if w.contains(v) {
                out.set(v, d);
            }
        }
        for gd in g.guards.values() {
            if gd.vars().is_subset(w) {
                out.add_guard(gd.clone());
            }
        }
        out
    }

    /// Does `s` map every state satisfying `beta` to one agreeing with it on `g`?
    fn preserves(&self, beta: &Predicate, s: &Stmt, g: &Agreement) -> bool {
        let (touched, heap) = effect(std::slice::from_ref(s));
        let (aff, _) = self.split(g, &touched, heap);
        if aff.is_empty() {
            return true;
        }
        let h = hash_of(&("preserve", beta, s, &aff));
        if let Some(r) = self.memo.lock().unwrap().get(&h) {
            return *r;
        }
        let mut vars = s.vars();
        vars.extend(aff.vars());
        vars.extend(beta.vars());
        let (grid, beta) = self.states(vars, beta, true);
        let stmts = std::slice::from_ref(s);
        let ok = grid.par_iter().filter(|m| beta.holds(m)).all(|m| match exec(stmts, m.clone(), &self.p.classes, self.step_limit) {
            Outcome::Done(m2) => key(&aff, m, &self.lib) == key(&aff, &m2, &self.lib),
            Outcome::Error(_) => false,
            Outcome::StepLimit => true,
        });
        self.memo.lock().unwrap().insert(h, ok);
        ok
    }

    /// The guard evaluates without error in every state satisfying `beta`.
    fn guard_safe(&self, beta: &Predicate, b: &Guard) -> bool {
        let mut vars = b.vars();
        vars.extend(beta.vars());
        let (grid, beta) = self.states(vars, beta, true);
        grid.par_iter().filter(|m| beta.holds(m)).all(|m| eval_guard_pure(b, m).is_ok())
    }

    /// Proves that running `stmts` from a state satisfying `beta` yields a
    /// state agreeing with the initial one on `g`, so the statements can be
    /// erased for an observer that only sees `g`.
    pub fn p_prove(&self, beta: &Predicate, stmts: &[Stmt], g: &Agreement) -> bool {
        let mut b = beta.clone();
        for s in stmts {
            if !self.p_prove_stmt(&b, s, g) {
                return false;
            }
            b = transformed_predicate_skipping(s, &b, &self.skipped);
        }
        true
    }

    fn p_prove_stmt(&self, beta: &Predicate, s: &Stmt, g: &Agreement) -> bool {
        match &s.kind {
            StmtKind::Skip | StmtKind::Write(_) | StmtKind::Read(_) => true,
            StmtKind::Assign(..) | StmtKind::FieldAssign { .. } => self.preserves(beta, s, g),
            StmtKind::If(b, t, e) => {
                let (touched, heap) = effect(std::slice::from_ref(s));
                if self.split(g, &touched, heap).0.is_empty() {
                    return self.guard_safe(beta, b);
                }
                self.guard_safe(beta, b) && self.p_prove(&beta.and(b), t, g) && self.p_prove(&beta.and(&b.negated()), e, g)
            }
            StmtKind::While(b, body) => {
                let inv = beta.kill(&assigned(body));
                let (touched, heap) = effect(body);
                if self.split(g, &touched, heap).0.is_empty() {
                    return self.guard_safe(&inv, b);
                }
                self.guard_safe(&inv, b) && self.p_prove(&inv.and(b), body, g)
            }
        }
    }

    // ---- the agreement lattice ----

    /// `g1` is at least as strong as `g2`.
    pub fn leq(&self, g1: &Agreement, g2: &Agreement) -> bool {
        self.implies(g1, g2)
    }

    fn implies(&self, g1: &Agreement, g2: &Agreement) -> bool {
        g2.doms.iter().all(|(v, d)| self.order.leq(g1.domain(v), d))
            && g2.guards.iter().all(|(k, gd)| g1.guards.contains_key(k) || self.determined(gd, g1))
    }

    pub fn meet(&self, a: &Agreement, b: &Agreement) -> Agreement {
        let mut out = a.clone();
        for (v, d) in &b.doms {
            let m = self.order.meet(out.domain(v), d, self.is_ref(v));
            out.set(v, &m);
        }
        for gd in b.guards.values() {
            out.add_guard(gd.clone());
        }
        self.normalize(out)
    }

    /// Replaces guards by equivalent domains where possible and drops guards
    /// already fixed by the domains. In concrete mode guards become identity
    /// on their variables.
    pub fn normalize(&self, mut g: Agreement) -> Agreement {
        let guards: Vec<Guard> = std::mem::take(&mut g.guards).into_values().collect();
        for gd in guards {
            let vs = gd.vars();
            if vs.is_empty() {
                continue;
            }
            if self.mode == Mode::Concrete {
                for v in &vs {
                    g.set(v, "id");
                }
                continue;
            }
            if vs.len() == 1 && !gd.reads_heap() {
                let v = vs.iter().next().unwrap();
                if let Some(d) = self.guard_domain(&gd, v) {
                    let m = self.order.meet(g.domain(v), &d, self.is_ref(v));
                    g.set(v, &m);
                    continue;
                }
            }
            g.add_guard(gd);
        }
        let keep: Vec<(String, Guard)> =
            g.guards.iter().filter(|(_, gd)| !self.determined(gd, &g)).map(|(k, v)| (k.clone(), v.clone())).collect();
        g.guards = keep.into_iter().collect();
        g
    }

    fn guard_range(&self, gd: &Guard) -> i64 {
        self.lib.bound() + max_literal(gd) + 2
    }

    /// The coarsest library domain whose partition of the variable's values
    /// is exactly the one induced by the guard.
    fn guard_domain(&self, gd: &Guard, v: &str) -> Option<String> {
        let is_ref = self.is_ref(v);
        let samples: Vec<(Memory, Value)> = if is_ref {
            let (m, vals) = sample_refs();
            vals.into_iter().map(|x| (m.clone(), x)).collect()
        } else {
            let r = self.guard_range(gd);
            int_range(-r, r).into_iter().map(|i| (Memory::new(), Value::Int(i))).collect()
        };
        let truth: Vec<Option<bool>> = samples
            .iter()
            .map(|(m, x)| {
                let mut m = m.clone();
                m.set(v, x.clone());
                eval_guard_pure(gd, &m).ok()
            })
            .collect();
        for d in self.order.list(is_ref) {
            if d == "id" {
                continue;
            }
            let dom = self.lib.get(d).ok()?;
            let obs: Vec<Option<Obs>> = samples.iter().map(|(m, x)| dom.observe(m, x).ok()).collect();
            let n = samples.len();
            let same = (0..n).all(|i| (0..n).all(|j| (truth[i] == truth[j]) == (obs[i] == obs[j])));
            if same {
                return Some(d.clone());
            }
        }
        None
    }

    /// Does agreeing on the domains of `g` force agreement on the guard?
    fn determined(&self, gd: &Guard, g: &Agreement) -> bool {
        let vs = gd.vars();
        if vs.iter().all(|v| g.domain(v) == "id") {
            return true;
        }
        if gd.reads_heap() || vs.len() > 3 || vs.iter().any(|v| self.is_ref(v)) {
            return false;
        }
        let doms: Vec<(String, String)> = vs.iter().map(|v| (v.clone(), g.domain(v).to_string())).collect();
        let h = hash_of(&("determined", gd, &doms));
        if let Some(r) = self.memo.lock().unwrap().get(&h) {
            return *r;
        }
        let r = self.guard_range(gd);
        let ints = int_range(-r, r);
        let typed: Vec<(String, crate::lang::Ty)> = vs.iter().map(|v| (v.clone(), crate::lang::Ty::Int)).collect();
        let mems = enumerate_memories_with(&typed, &|_| ints.clone(), &self.p.classes, &HeapBound::default());
        let local = Agreement { doms: doms.iter().filter(|(_, d)| d != "top").cloned().collect(), guards: BTreeMap::new() };
        let mut seen: HashMap<u64, Option<bool>> = HashMap::new();
        let ok = mems.iter().all(|m| {
            let k = hash_of(&key(&local, m, &self.lib));
            let val = eval_guard_pure(gd, m).ok();
            *seen.entry(k).or_insert(val) == val
        });
        self.memo.lock().unwrap().insert(h, ok);
        ok
    }

    fn guard_agreement(&self, b: &Guard) -> Agreement {
        self.normalize(Agreement::new().with_guard(b.clone()))
    }

    // ---- preconditions ----

    /// Searches the library domains of `svars` for the weakest assignment
    /// that, together with `fixed`, makes `{pre} beta stmts {post}` hold.
    fn search(
        &self,
        stmts: &[Stmt],
        beta: &Predicate,
        fixed: &Agreement,
        svars: &[String],
        base: &Agreement,
        post: &Agreement,
    ) -> Option<Agreement> {
        let opts: Vec<Vec<(usize, String)>> = svars
            .iter()
            .map(|v| {
                let r = self.is_ref(v);
                let floor = self.order.meet(base.domain(v), fixed.domain(v), r);
                let mut o: Vec<(usize, String)> = self
                    .candidates(r)
                    .iter()
                    .map(|d| {
                        let m = self.order.meet(d, &floor, r);
                        (self.order.rank(&m, r), m)
                    })
                    .collect();
                o.sort();
                o.dedup();
                o
            })
            .collect();
        let build = |choice: &[usize]| -> Agreement {
            let mut a = fixed.clone();
            for (i, v) in svars.iter().enumerate() {
                a.set(v, &opts[i][choice[i]].1);
            }
            a
        };
        let valid = |choice: &[usize]| self.local_triple(&build(choice), beta, stmts, post);
        let total = opts.iter().map(Vec::len).product::<usize>();
        if total <= MAX_EXHAUSTIVE {
            let mut all: Vec<Vec<usize>> = vec![vec![]];
            for o in &opts {
                all = all.into_iter().flat_map(|c| (0..o.len()).map(move |j| [c.clone(), vec![j]].concat())).collect();
            }
            all.sort_by_key(|c| {
                let ranks: Vec<usize> = c.iter().enumerate().map(|(i, j)| opts[i][*j].0).collect();
                (ranks.iter().sum::<usize>(), ranks)
            });
            return all.into_iter().find(|c| valid(c)).map(|c| build(&c));
        }
        let mut choice: Vec<usize> = opts.iter().map(|o| o.len() - 1).collect();
        if !valid(&choice) {
            return None;
        }
        for i in 0..opts.len() {
            for j in 0..choice[i] {
                let mut c = choice.clone();
                c[i] = j;
                if valid(&c) {
                    choice = c;
                    break;
                }
            }
        }
        Some(build(&choice))
    }

    fn pre_assign(&self, s: &Stmt, x: &str, e: &Expr, post: &Agreement, beta: &Predicate) -> Agreement {
        let touched: BTreeSet<String> = [x.to_string()].into();
        let (aff, rest) = self.split(post, &touched, false);
        let mut fixed = Agreement::new();
        let mut svars: BTreeSet<String> = BTreeSet::new();
        for (v, d) in &aff.doms {
            if v == x {
                svars.extend(e.vars());
            } else {
                fixed.set(v, d);
            }
        }
        let substitutable = !matches!(e, Expr::New(_));
        for gd in aff.guards.values() {
            let sub = substitutable.then(|| subst_guard(gd, x, e)).flatten();
            match sub {
                Some(g2) if guard_size(&g2) <= MAX_GUARD_SIZE => fixed.add_guard(g2),
                _ => {
                    svars.extend(gd.vars().into_iter().filter(|v| v != x));
                    svars.extend(e.vars());
                }
            }
        }
        let fixed = self.normalize(fixed);
        let svars = self.ordered(svars);
        let stmts = std::slice::from_ref(s);
        let found = self.search(stmts, beta, &fixed, &svars, &rest, &aff);
        let pre = found.unwrap_or_else(|| {
            let mut vs = e.vars();
            vs.extend(aff.vars().into_iter().filter(|v| v != x));
            Agreement::identity(&vs)
        });
        self.meet(&rest, &pre)
    }

    fn pre_field(&self, s: &Stmt, x: &str, e: &Expr, post: &Agreement, beta: &Predicate) -> Agreement {
        let touched: BTreeSet<String> = [x.to_string()].into();
        let (aff, rest) = self.split(post, &touched, true);
        let mut fixed = aff.clone();
        fixed.doms.remove(x);
        let mut svars = e.vars();
        svars.insert(x.to_string());
        let svars = self.ordered(svars);
        let stmts = std::slice::from_ref(s);
        let found = self.search(stmts, beta, &fixed, &svars, &aff, &aff);
        let pre = found.unwrap_or_else(|| {
            let mut vs = s.vars();
            vs.extend(aff.vars());
            self.meet(&Agreement::identity(&vs), &aff)
        });
        self.meet(&rest, &pre)
    }

    fn pre_while(&self, s: &Stmt, b: &Guard, body: &[Stmt], post: &Agreement, beta: &Predicate, rec: Option<&mut Labels>) -> Agreement {
        let inv = beta.kill(&assigned(body)).and(b);
        let fallback = || {
            let mut vs = s.vars();
            vs.extend(post.vars());
            self.meet(&Agreement::identity(&vs), post)
        };
        let mut g = self.meet(post, &self.guard_agreement(b));
        let mut converged = false;
        for iter in 0..12 {
            let bp = self.pre_seq(body, &g, &inv, None);
            let mut next = self.meet(&g, &bp);
            if iter >= 6 {
                // Guards can keep growing through substitution; identity on
                // their variables forces convergence.
                let guards: Vec<Guard> = std::mem::take(&mut next.guards).into_values().collect();
                for gd in guards {
                    for v in gd.vars() {
                        next.set(&v, "id");
                    }
                }
            }
            if next == g {
                converged = true;
                break;
            }
            g = next;
        }
        if !converged || !self.local_triple(&g, &inv, body, &g) {
            g = fallback();
        }
        if let Some(rec) = rec {
            self.pre_seq(body, &g, &inv, Some(rec));
        }
        g
    }

    fn pre_stmt(&self, s: &Stmt, post: &Agreement, beta: &Predicate, rec: Option<&mut Labels>) -> Agreement {
        let rule = self.pre_rule(s, post, beta, rec);
        // A statement preserving the observed agreement admits it as its own
        // precondition; erasure later requires exactly that choice.
        if self.p_prove_stmt(beta, s, post) {
            return self.weakest(vec![post.clone(), rule]);
        }
        rule
    }

    fn pre_rule(&self, s: &Stmt, post: &Agreement, beta: &Predicate, rec: Option<&mut Labels>) -> Agreement {
        match &s.kind {
            StmtKind::Skip | StmtKind::Write(_) | StmtKind::Read(_) => post.clone(),
            StmtKind::Assign(x, e) => self.pre_assign(s, x, e, post, beta),
            StmtKind::FieldAssign { var, expr, .. } => self.pre_field(s, var, expr, post, beta),
            StmtKind::If(b, t, e) => self.pre_if(s, b, t, e, post, beta, rec),
            StmtKind::While(b, body) => self.pre_while(s, b, body, post, beta, rec),
        }
    }

    /// Both conditional rules: agreement on the guard with the branch
    /// preconditions, or a search over the whole statement where the two
    /// states may take different branches. The weaker one wins.
    #[allow(clippy::too_many_arguments)]
    fn pre_if(
        &self,
        s: &Stmt,
        b: &Guard,
        t: &[Stmt],
        e: &[Stmt],
        post: &Agreement,
        beta: &Predicate,
        mut rec: Option<&mut Labels>,
    ) -> Agreement {
        let gt = self.pre_seq(t, post, &beta.and(b), rec.as_deref_mut());
        let gf = self.pre_seq(e, post, &beta.and(&b.negated()), rec.as_deref_mut());
        let by_guard = self.meet(&self.meet(&gt, &gf), &self.guard_agreement(b));
        let stmts = std::slice::from_ref(s);
        let (touched, heap) = effect(stmts);
        let (aff, rest) = self.split(post, &touched, heap);
        let mut svars = s.vars();
        svars.extend(aff.vars());
        if svars.len() > MAX_IF_SEARCH {
            return by_guard;
        }
        let svars = self.ordered(svars);
        let Some(found) = self.search(stmts, beta, &Agreement::new(), &svars, &rest, &aff) else { return by_guard };
        let whole = self.meet(&rest, &found);
        if self.implies(&by_guard, &whole) && !self.implies(&whole, &by_guard) {
            if let Some(r) = rec {
                r.atomic.insert(s.line);
            }
            return whole;
        }
        by_guard
    }

    /// The weakest candidate: not strictly stronger than another one, then
    /// fewest conditions, then coarsest domains in program variable order.
    fn weakest(&self, cands: Vec<Agreement>) -> Agreement {
        let strictly_below = |c: &Agreement, d: &Agreement| self.implies(c, d) && !self.implies(d, c);
        let pool: Vec<&Agreement> = cands.iter().filter(|c| !cands.iter().any(|d| strictly_below(c, d))).collect();
        let score = |c: &Agreement| {
            let mut vars: Vec<&String> = c.doms.keys().collect();
            vars.sort_by_key(|v| self.var_index(v));
            let ranks: Vec<usize> = vars.iter().map(|v| self.order.rank(c.domain(v), self.is_ref(v))).collect();
            (c.non_top_count(), ranks.iter().sum::<usize>(), ranks)
        };
        pool.into_iter().min_by_key(|c| score(c)).cloned().expect("candidates are never empty")
    }

    /// May `s` be replaced by `skip` under these labels?
    pub fn erasable(&self, labels: &Labels, s: &Stmt) -> bool {
        let (Some(before), Some(after), Some(beta)) = (labels.before.get(&s.line), labels.after.get(&s.line), labels.beta.get(&s.line))
        else {
            return false;
        };
        self.implies(before, after) && self.p_prove_stmt(beta, s, after)
    }

    /// The precondition of `stmts` for observing `post` afterwards, assuming
    /// `beta` on entry. With `rec`, records the label at every point.
    pub fn pre_seq(&self, stmts: &[Stmt], post: &Agreement, beta: &Predicate, mut rec: Option<&mut Labels>) -> Agreement {
        let mut betas = Vec::with_capacity(stmts.len());
        let mut b = beta.clone();
        for s in stmts {
            betas.push(b.clone());
            b = transformed_predicate_skipping(s, &b, &self.skipped);
        }
        let mut g = post.clone();
        for (s, b) in stmts.iter().zip(betas).rev() {
            if let Some(r) = rec.as_deref_mut() {
                r.after.insert(s.line, g.clone());
                r.beta.insert(s.line, b.clone());
            }
            g = self.pre_stmt(s, &g, &b, rec.as_deref_mut());
            if let Some(r) = rec.as_deref_mut() {
                r.before.insert(s.line, g.clone());
            }
        }
        g
    }

    /// Labels every statement of the program with the agreement that must
    /// hold after it for `g_out` to hold at the end.
    pub fn label_sequence(&self, g_out: &Agreement, beta0: &Predicate) -> Labels {
        let mut labels = Labels::default();
        let g_out = self.normalize(g_out.clone());
        let body = self.p.body.clone();
        labels.entry = self.pre_seq(&body, &g_out, beta0, Some(&mut labels));
        labels
    }

    /// The program listing with the label after each statement as a comment.
    pub fn render_labels(&self, labels: &Labels) -> String {
        let mut out = format!("// entry: {}\n", labels.entry);
        out.push_str(&listing(&self.p, &self.p, &|l| labels.after.get(&l).map(|g| format!("after: {g}"))));
        out
    }
}

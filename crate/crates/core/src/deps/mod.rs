//! Semantic, narrow and atomic dependencies of expressions on variables,
//! the covering-based non-dependency prover and domain atomization.
//!
//! Concrete checks enumerate states whose variables range over `[-B, B]`;
//! dependencies are therefore relative to that grid.

use crate::absint::{abs_eval, AbsState, DomainMap};
use crate::concrete::{eval_guard_pure, eval_pure, Memory, Value};
use crate::domains::{AbsValue, Obs, Uco};
use crate::lang::{Expr, Guard};
use num_bigint::BigInt;
use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::Arc;

/// Expressions the dependency engines can evaluate on integer grids.
pub fn is_numeric(e: &Expr) -> bool {
    match e {
        Expr::Int(_) | Expr::Var(_) => true,
        Expr::Field(..) | Expr::Null | Expr::New(_) => false,
        Expr::Bin(_, a, b) => is_numeric(a) && is_numeric(b),
        Expr::Cond(g, a, b) => !g.reads_heap() && is_numeric(a) && is_numeric(b) && guard_is_numeric(g),
    }
}

fn guard_is_numeric(g: &Guard) -> bool {
    match g {
        Guard::True | Guard::False => true,
        Guard::Cmp(_, a, b) => is_numeric(a) && is_numeric(b),
        Guard::Not(h) => guard_is_numeric(h),
        Guard::And(a, b) | Guard::Or(a, b) => guard_is_numeric(a) && guard_is_numeric(b),
    }
}

/// Every assignment of values in `[-bound, bound]` to `vars`.
pub fn grid(vars: &[String], bound: i64) -> Vec<Memory> {
    let mut out = vec![Memory::new()];
    for v in vars {
        let mut next = Vec::with_capacity(out.len() * (2 * bound as usize + 1));
        for m in &out {
            for k in -bound..=bound {
                let mut m2 = m.clone();
                m2.set(v, Value::int(k));
                next.push(m2);
            }
        }
        out = next;
    }
    out
}

fn grid_vars(e: &Expr, x: &str, beta: Option<&Guard>) -> Vec<String> {
    let mut vars = e.vars_ordered();
    let mut extra: Vec<String> = vec![x.to_string()];
    if let Some(b) = beta {
        extra.extend(b.vars());
    }
    for v in extra {
        if !vars.contains(&v) {
            vars.push(v);
        }
    }
    vars
}

fn admitted(m: &Memory, beta: Option<&Guard>) -> bool {
    beta.is_none_or(|b| eval_guard_pure(b, m).unwrap_or(false))
}

/// Two grid states differing only in `x` on which `e` evaluates differently.
/// Non-numeric expressions are conservatively dependent on all their variables.
pub fn sem_dep_witness(e: &Expr, x: &str, bound: i64) -> Option<(Memory, Memory)> {
    if !e.vars().contains(x) {
        return None;
    }
    let others: Vec<String> = e.vars_ordered().into_iter().filter(|v| v != x).collect();
    for base in grid(&others, bound) {
        let mut first: Option<(Memory, Value)> = None;
        for k in -bound..=bound {
            let mut m = base.clone();
            m.set(x, Value::int(k));
            let Ok(v) = eval_pure(e, &m) else { continue };
            match &first {
                None => first = Some((m, v)),
                Some((m0, v0)) if *v0 != v => return Some((m0.clone(), m)),
                _ => {}
            }
        }
    }
    None
}

pub fn sem_dep(e: &Expr, x: &str, bound: i64) -> bool {
    if !is_numeric(e) {
        return e.vars().contains(x);
    }
    sem_dep_witness(e, x, bound).is_some()
}

/// The η-observations of all variables but `x`, used to group grid states.
fn eta_key(m: &Memory, vars: &[String], x: &str, eta: &DomainMap) -> Vec<Obs> {
    vars.iter()
        .filter(|v| v.as_str() != x)
        .map(|v| {
            let val = m.get(v).unwrap();
            eta.get(v).observe(m, val).unwrap_or(Obs::Int(BigInt::from(0)))
        })
        .collect()
}

/// Narrow dependency: two grid states whose other variables agree on their
/// η-properties but whose values of `e` differ in `rho`.
pub fn ndep_witness(e: &Expr, x: &str, rho: &Uco, eta: &DomainMap, beta: Option<&Guard>, bound: i64) -> Option<(Memory, Memory)> {
    let vars = grid_vars(e, x, beta);
    let mut seen: HashMap<Vec<Obs>, (Obs, Memory)> = HashMap::new();
    for m in grid(&vars, bound) {
        if !admitted(&m, beta) {
            continue;
        }
        let Ok(v) = eval_pure(e, &m) else { continue };
        let Ok(o) = rho.observe(&m, &v) else { continue };
        let key = eta_key(&m, &vars, x, eta);
        match seen.get(&key) {
            Some((o0, m0)) if *o0 != o => return Some((m0.clone(), m)),
            Some(_) => {}
            None => {
                seen.insert(key, (o, m));
            }
        }
    }
    None
}

pub fn ndep(e: &Expr, x: &str, rho: &Uco, eta: &DomainMap, beta: Option<&Guard>, bound: i64) -> bool {
    ndep_witness(e, x, rho, eta, beta, bound).is_some()
}

/// Atomic dependency: two grid states whose other variables agree on their
/// η-properties and whose joint `rho`-abstraction evaluates `e` to a
/// non-atom of `rho`.
pub fn atom_dep(e: &Expr, x: &str, rho: &Arc<Uco>, eta: &DomainMap, beta: Option<&Guard>, bound: i64) -> bool {
    let vars = grid_vars(e, x, beta);
    let doms = DomainMap::uniform(rho.clone());
    // Per η-class, the distinct vectors of ρ-abstractions of the grid states.
    let mut classes: HashMap<Vec<Obs>, HashSet<Vec<AbsValue>>> = HashMap::new();
    for m in grid(&vars, bound) {
        if !admitted(&m, beta) {
            continue;
        }
        let atoms: Option<Vec<AbsValue>> = vars.iter().map(|v| rho.alpha_int(m.int(v).unwrap()).ok()).collect();
        let Some(atoms) = atoms else { continue };
        classes.entry(eta_key(&m, &vars, x, eta)).or_default().insert(atoms);
    }
    let mut cache: HashMap<Vec<AbsValue>, bool> = HashMap::new();
    for vecs in classes.values() {
        let vecs: Vec<&Vec<AbsValue>> = vecs.iter().collect();
        for (i, a) in vecs.iter().enumerate() {
            for b in &vecs[i..] {
                let joined: Vec<AbsValue> = a.iter().zip(b.iter()).map(|(p, q)| rho.join(*p, *q)).collect();
                let non_atomic = *cache.entry(joined.clone()).or_insert_with(|| {
                    let s = state_of(&vars, &joined);
                    !rho.is_atom(abs_eval(e, &s, &doms, rho))
                });
                if non_atomic {
                    return true;
                }
            }
        }
    }
    false
}

fn state_of(vars: &[String], vals: &[AbsValue]) -> AbsState {
    let mut s = AbsState::default();
    for (v, a) in vars.iter().zip(vals) {
        s.set(v, *a);
    }
    s
}

/// Evaluates `e` on abstract states given as value vectors over `vars`.
struct Evaluator<'a> {
    e: &'a Expr,
    vars: Vec<String>,
    rho: Arc<Uco>,
    doms: DomainMap,
}

impl<'a> Evaluator<'a> {
    fn new(e: &'a Expr, rho: &Arc<Uco>) -> Self {
        Evaluator { e, vars: e.vars_ordered(), rho: rho.clone(), doms: DomainMap::uniform(rho.clone()) }
    }

    fn eval(&self, s: &[AbsValue]) -> AbsValue {
        abs_eval(self.e, &state_of(&self.vars, s), &self.doms, &self.rho)
    }

    fn ambient(&self, ambient: &AbsState) -> Vec<AbsValue> {
        self.vars.iter().map(|v| self.rho.closure(ambient.get(v, &self.doms))).collect()
    }

    fn atoms_below(&self, v: AbsValue) -> Vec<AbsValue> {
        self.rho.atoms().into_iter().filter(|a| a & v == *a).collect()
    }

    /// Every state refining `s` to atoms on the positions not in `free`.
    fn atomic_outside(&self, s: &[AbsValue], free: &[bool]) -> Vec<Vec<AbsValue>> {
        let mut out = vec![Vec::new()];
        for (i, v) in s.iter().enumerate() {
            let choices = if free[i] { vec![*v] } else { self.atoms_below(*v) };
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    choices.iter().map(move |c| {
                        let mut p = prefix.clone();
                        p.push(*c);
                        p
                    })
                })
                .collect();
        }
        out
    }
}

/// The atomicity condition: `Some(u)` when every refinement of the variables
/// at `free` positions evaluates `e` to the atom `u`, found by refining one
/// variable at a time through its direct sub-values; `None` (⊥) otherwise.
fn ac(ev: &Evaluator, s: &[AbsValue], free: &[bool], memo: &mut HashMap<Vec<AbsValue>, Option<AbsValue>>) -> Option<AbsValue> {
    if let Some(r) = memo.get(s) {
        return *r;
    }
    let v = ev.eval(s);
    let result = if ev.rho.is_atom(v) {
        Some(v)
    } else {
        let mut found = None;
        for i in (0..s.len()).filter(|i| free[*i] && !ev.rho.is_atom(s[*i]) && s[*i] != 0) {
            let mut common: Option<AbsValue> = None;
            let mut ok = true;
            for sub in ev.rho.direct_subvalues(s[i]) {
                if sub == 0 {
                    continue;
                }
                let mut t = s.to_vec();
                t[i] = sub;
                match ac(ev, &t, free, memo) {
                    Some(u) if common.is_none_or(|c| c == u) => common = Some(u),
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok && common.is_some() {
                found = common;
                break;
            }
        }
        found
    };
    memo.insert(s.to_vec(), result);
    result
}

/// Can `e` be proved independent of every variable in `x`, from the ambient
/// state? Every refinement of the other variables to atoms must have an atomic
/// condition.
pub fn prove_non_dependent(e: &Expr, x: &BTreeSet<String>, rho: &Arc<Uco>, ambient: &AbsState) -> bool {
    let ev = Evaluator::new(e, rho);
    let free: Vec<bool> = ev.vars.iter().map(|v| x.contains(v)).collect();
    let start = ev.ambient(ambient);
    let mut memo = HashMap::new();
    ev.atomic_outside(&start, &free).iter().all(|s| {
        // Unreachable atomic combinations (bottom somewhere) impose nothing.
        s.contains(&0) || ac(&ev, s, &free, &mut memo).is_some()
    })
}

/// The variables of `e` that may affect its `rho`-property, from the ambient
/// state. Candidate independent sets shrink one variable at a time, removing
/// variables in order of first occurrence; proved sets are accumulated.
pub fn find_ndeps(e: &Expr, rho: &Arc<Uco>, ambient: &AbsState) -> Vec<String> {
    let vars = e.vars_ordered();
    let mut non_dep: BTreeSet<String> = BTreeSet::new();
    let mut visited: HashSet<BTreeSet<String>> = HashSet::new();
    fn prove(
        x: BTreeSet<String>,
        order: &[String],
        e: &Expr,
        rho: &Arc<Uco>,
        ambient: &AbsState,
        non_dep: &mut BTreeSet<String>,
        visited: &mut HashSet<BTreeSet<String>>,
    ) {
        if x.is_subset(non_dep) || !visited.insert(x.clone()) {
            return;
        }
        if prove_non_dependent(e, &x, rho, ambient) {
            non_dep.extend(x);
            return;
        }
        for v in order.iter().filter(|v| x.contains(*v)) {
            let mut smaller = x.clone();
            smaller.remove(v);
            prove(smaller, order, e, rho, ambient, non_dep, visited);
        }
    }
    prove(vars.iter().cloned().collect(), &vars, e, rho, ambient, &mut non_dep, &mut visited);
    vars.into_iter().filter(|v| !non_dep.contains(v)).collect()
}

/// Coarsens `rho` so that `v` becomes an atom: keeps the elements disjoint
/// from `v` or above it.
pub fn atomize(rho: &Uco, v: AbsValue, name: &str) -> Uco {
    let keep: Vec<AbsValue> = rho.carrier().iter().copied().filter(|u| u & v == 0 || v & !u == 0).collect();
    rho.restrict(name, &keep)
}

/// Simplifies `rho0` until `e` is not narrowly dependent on `x`: every state
/// atomic on the other variables of `e` evaluates to an atom.
pub fn edep(e: &Expr, rho0: &Arc<Uco>, x: &BTreeSet<String>, ambient: &AbsState) -> Arc<Uco> {
    let mut rho = rho0.clone();
    let name = format!("{}-edep", rho0.name());
    loop {
        let mut modified = false;
        let ev = Evaluator::new(e, &rho);
        let fixed: Vec<bool> = ev.vars.iter().map(|v| !x.contains(v)).collect();
        let mut queue: VecDeque<Vec<AbsValue>> = VecDeque::from([ev.ambient(ambient)]);
        let mut seen: HashSet<Vec<AbsValue>> = HashSet::new();
        while let Some(s) = queue.pop_front() {
            if !seen.insert(s.clone()) {
                continue;
            }
            let v = ev.eval(&s);
            if v == 0 || rho.is_atom(v) {
                continue;
            }
            let refinable: Vec<usize> = (0..s.len()).filter(|i| fixed[*i] && s[*i] != 0 && !rho.is_atom(s[*i])).collect();
            match refinable.first() {
                None => {
                    rho = Arc::new(atomize(&rho, v, &name));
                    modified = true;
                    break;
                }
                Some(&i) => {
                    for sub in rho.direct_subvalues(s[i]) {
                        if sub != 0 {
                            let mut t = s.clone();
                            t[i] = sub;
                            queue.push_back(t);
                        }
                    }
                }
            }
        }
        if !modified {
            return rho;
        }
    }
}

/// Exhaustive check of the post-condition of [`edep`]: every state atomic on
/// the variables of `e` outside `x` (and below the ambient state) evaluates
/// `e` to an atom of `rho`.
pub fn edep_postcondition(e: &Expr, rho: &Arc<Uco>, x: &BTreeSet<String>, ambient: &AbsState) -> bool {
    let ev = Evaluator::new(e, rho);
    let free: Vec<bool> = ev.vars.iter().map(|v| x.contains(v)).collect();
    let start = ev.ambient(ambient);
    ev.atomic_outside(&start, &free).iter().all(|s| {
        let v = ev.eval(s);
        v == 0 || rho.is_atom(v)
    })
}

#[cfg(test)]
mod tests;

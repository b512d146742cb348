//! Slicing criteria `(I, X, O, ψ, A)`, trajectory projections, the
//! equivalence check over a bounded input set, and criterion subsumption.

mod file;

pub use file::parse_criterion;

use crate::concrete::{
    enumerate_memories_with, int_range, run, structurally_equal, HeapBound, Memory, Shape, ShapeVal, Status,
    Trajectory, Value,
};
use crate::domains::{refines, DomainError, Library, Obs, Sort, Uco};
use crate::lang::{guard_to_string, is_subprogram, Guard, Line, Program, Ty};
use num_bigint::BigInt;
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CriterionError {
    #[error("criterion line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("criterion refers to line {0}, which is not a statement of the program")]
    UnknownLine(Line),
    #[error("variable {0} appears in more than one abstraction group")]
    Overlap(String),
    #[error("abstraction for {0}, which is not an observed variable")]
    NotObserved(String),
    #[error("relational group over {0}, which is not an integer variable")]
    RelationalSort(String),
    #[error("occurrence at the end of the program can only have iteration 1")]
    EndIteration,
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// A program point of interest: a statement line or the end of the run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Point {
    Line(Line),
    End,
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Line(l) => write!(f, "{l}"),
            Point::End => f.write_str("end"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Iters {
    All,
    Set(BTreeSet<u32>),
}

impl Iters {
    pub fn contains(&self, k: u32) -> bool {
        match self {
            Iters::All => true,
            Iters::Set(s) => s.contains(&k),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Occurrence {
    pub point: Point,
    pub iters: Iters,
}

impl Occurrence {
    pub fn every(point: Point) -> Occurrence {
        Occurrence { point, iters: Iters::All }
    }
}

/// Relational observations of a group of integer variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    /// Sign of the product of the group's values.
    SignProd,
    /// Parity of the sum of the group's values.
    ParSum,
}

impl Relation {
    pub fn name(self) -> &'static str {
        match self {
            Relation::SignProd => "signprod",
            Relation::ParSum => "parsum",
        }
    }

    /// The single-variable domain the relation is computed in.
    fn base(self) -> &'static str {
        match self {
            Relation::SignProd => "sign",
            Relation::ParSum => "par",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Group {
    Single { var: String, domain: String },
    Relational { vars: Vec<String>, rel: Relation },
}

impl Group {
    pub fn vars(&self) -> Vec<&str> {
        match self {
            Group::Single { var, .. } => vec![var.as_str()],
            Group::Relational { vars, .. } => vars.iter().map(|v| v.as_str()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Inputs {
    All,
    List(Vec<Memory>),
    Cond(Guard),
}

/// A slicing criterion. Observed variables without an abstraction group are
/// observed exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Criterion {
    pub inputs: Inputs,
    /// Integer ranges for enumerated inputs; unlisted integer inputs range over `[-B, B]`.
    pub ranges: Vec<(String, i64, i64)>,
    pub heap: HeapBound,
    pub vars: Vec<String>,
    pub occ: Vec<Occurrence>,
    pub kl: bool,
    pub abs: Vec<Group>,
}

impl Criterion {
    /// Static criterion observing `vars` exactly at the end of the run.
    pub fn new(vars: &[&str]) -> Criterion {
        Criterion {
            inputs: Inputs::All,
            ranges: Vec::new(),
            heap: HeapBound::default(),
            vars: vars.iter().map(|v| v.to_string()).collect(),
            occ: vec![Occurrence::every(Point::End)],
            kl: false,
            abs: Vec::new(),
        }
    }

    pub fn at(mut self, occ: Vec<Occurrence>) -> Criterion {
        self.occ = occ;
        self
    }

    pub fn abstracted(mut self, var: &str, domain: &str) -> Criterion {
        self.abs.retain(|g| !g.vars().contains(&var));
        self.abs.push(Group::Single { var: var.into(), domain: domain.into() });
        self
    }

    pub fn range(mut self, var: &str, lo: i64, hi: i64) -> Criterion {
        self.ranges.retain(|(v, ..)| v != var);
        self.ranges.push((var.into(), lo, hi));
        self
    }

    pub fn with_inputs(mut self, inputs: Inputs) -> Criterion {
        self.inputs = inputs;
        self
    }

    pub fn with_kl(mut self, kl: bool) -> Criterion {
        self.kl = kl;
        self
    }

    /// The same criterion with every variable observed exactly.
    pub fn identity(&self) -> Criterion {
        Criterion { abs: Vec::new(), ..self.clone() }
    }

    fn range_of(&self, var: &str, bound: i64) -> (i64, i64) {
        self.ranges.iter().find(|(v, ..)| v == var).map(|(_, lo, hi)| (*lo, *hi)).unwrap_or((-bound, bound))
    }

    /// Checks the criterion against a program and resolves its abstractions.
    pub fn resolve(&self, p: &Program, lib: &Library) -> Result<Vec<Resolved>, CriterionError> {
        let lines = p.lines();
        for o in &self.occ {
            match o.point {
                Point::Line(l) if !lines.contains(&l) => return Err(CriterionError::UnknownLine(l)),
                Point::End if !o.iters.contains(1) || matches!(&o.iters, Iters::Set(s) if s.len() > 1) => {
                    return Err(CriterionError::EndIteration)
                }
                _ => {}
            }
        }
        let mut seen = BTreeSet::new();
        for g in &self.abs {
            for v in g.vars() {
                if !self.vars.iter().any(|x| x == v) {
                    return Err(CriterionError::NotObserved(v.into()));
                }
                if !seen.insert(v.to_string()) {
                    return Err(CriterionError::Overlap(v.into()));
                }
            }
        }
        let mut out: Vec<Resolved> = Vec::new();
        let mut done = BTreeSet::new();
        for x in &self.vars {
            if !done.insert(x.clone()) {
                continue;
            }
            let ty = p.var_ty(x);
            match self.abs.iter().find(|g| g.vars().contains(&x.as_str())) {
                None => out.push(Resolved { vars: vec![x.clone()], kind: ResolvedKind::Single(lib.id()) }),
                Some(Group::Single { domain, .. }) => {
                    let d = lib.get(domain)?;
                    let ok = match d.sort() {
                        Sort::Any => true,
                        Sort::Int => !ty.is_ref(),
                        Sort::Ref => ty.is_ref(),
                    };
                    if !ok {
                        return Err(DomainError::Sort {
                            domain: domain.clone(),
                            what: if ty.is_ref() { "references".into() } else { "integers".into() },
                        }
                        .into());
                    }
                    out.push(Resolved { vars: vec![x.clone()], kind: ResolvedKind::Single(d) });
                }
                Some(Group::Relational { vars, rel }) => {
                    for v in vars {
                        if p.var_ty(v).is_ref() {
                            return Err(CriterionError::RelationalSort(v.clone()));
                        }
                        done.insert(v.clone());
                    }
                    out.push(Resolved { vars: vars.clone(), kind: ResolvedKind::Relational(*rel, lib.get(rel.base())?) });
                }
            }
        }
        Ok(out)
    }

    /// Variables enumerated when building the input set.
    pub fn enumerated_vars(&self, programs: &[&Program]) -> Vec<(String, Ty)> {
        let mut names: Vec<String> = Vec::new();
        let mut push = |v: &str| {
            if !names.iter().any(|n| n == v) {
                names.push(v.to_string())
            }
        };
        for p in programs {
            for v in p.input_vars() {
                push(&v);
            }
        }
        if let Inputs::Cond(g) = &self.inputs {
            for v in g.vars() {
                push(&v);
            }
        }
        for (v, ..) in &self.ranges {
            push(v);
        }
        let ty = |v: &str| programs.iter().find_map(|p| p.vars.get(v).cloned()).unwrap_or(Ty::Int);
        names.into_iter().map(|v| {
            let t = ty(&v);
            (v, t)
        }).collect()
    }

    /// The enumerated input set `I` for running `programs`.
    pub fn input_set(&self, programs: &[&Program], bound: i64) -> Vec<Memory> {
        match &self.inputs {
            Inputs::List(ms) => ms.clone(),
            Inputs::All | Inputs::Cond(_) => {
                let vars = self.enumerated_vars(programs);
                let classes = programs.first().map(|p| p.classes.clone()).unwrap_or_default();
                let ints = |v: &str| {
                    let (lo, hi) = self.range_of(v, bound);
                    int_range(lo, hi)
                };
                let all = enumerate_memories_with(&vars, &ints, &classes, &self.heap);
                match &self.inputs {
                    Inputs::Cond(g) => all.into_iter().filter(|m| cond_holds(g, m)).collect(),
                    _ => all,
                }
            }
        }
    }
}

fn cond_holds(g: &Guard, m: &Memory) -> bool {
    crate::concrete::eval_guard_pure(g, m).unwrap_or(false)
}

/// An abstraction group with its domain looked up.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub vars: Vec<String>,
    pub kind: ResolvedKind,
}

#[derive(Clone, Debug)]
pub enum ResolvedKind {
    Single(Arc<Uco>),
    Relational(Relation, Arc<Uco>),
}

impl Resolved {
    fn observe(&self, m: &Memory) -> Obs {
        let val = |x: &str| m.get(x).cloned().unwrap_or(Value::Int(BigInt::from(0)));
        match &self.kind {
            ResolvedKind::Single(d) => {
                let v = val(&self.vars[0]);
                // The resolved domain matches the variable's declared sort, so
                // a failure can only come from a value of the wrong kind.
                d.observe(m, &v).unwrap_or_else(|_| Obs::Shape(Shape::of(m, &[&v])))
            }
            ResolvedKind::Relational(rel, d) => {
                let ints = self.vars.iter().map(|x| val(x).as_int().cloned().unwrap_or_default());
                let n = match rel {
                    Relation::SignProd => ints.product::<BigInt>(),
                    Relation::ParSum => ints.sum::<BigInt>(),
                };
                Obs::Atom(d.alpha_int(&n).unwrap_or(d.top()))
            }
        }
    }

    pub fn render(&self, o: &Obs) -> String {
        match (o, &self.kind) {
            (Obs::Atom(a), ResolvedKind::Single(d) | ResolvedKind::Relational(_, d)) => d.value_name(*a),
            (Obs::Int(i), _) => i.to_string(),
            (Obs::Shape(s), _) => render_shape(s),
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            ResolvedKind::Single(d) => format!("{}@{}", d.name(), self.vars[0]),
            ResolvedKind::Relational(r, _) => format!("{}@{{{}}}", r.name(), self.vars.join(",")),
        }
    }
}

fn render_shape(s: &Shape) -> String {
    match s.roots.first() {
        Some(ShapeVal::Null) => "null".into(),
        Some(ShapeVal::Int(i)) => i.to_string(),
        _ => format!("obj[{} nodes]", s.nodes.len()),
    }
}

/// The abstract restriction of a memory: one observation per group.
pub fn abstract_restrict(m: &Memory, groups: &[Resolved]) -> Vec<Obs> {
    groups.iter().map(|g| g.observe(m)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Entry {
    Observed { point: Point, iter: u32, obs: Vec<Obs> },
    /// A visit to a line both programs share, recorded for KL criteria.
    Marker { line: Line, iter: u32 },
    /// The run stopped with a runtime error.
    Failed,
}

pub type Projection = Vec<Entry>;

fn find_occ(occ: &[Occurrence], point: Point, iter: u32) -> bool {
    occ.iter().any(|o| o.point == point && o.iters.contains(iter))
}

/// Projects a trajectory on the occurrences of interest, with markers at the
/// lines in `markers`.
pub fn project(t: &Trajectory, occ: &[Occurrence], groups: &[Resolved], markers: &BTreeSet<Line>) -> Projection {
    let mut out = Vec::new();
    for s in &t.states {
        let point = Point::Line(s.point);
        if find_occ(occ, point, s.iter) {
            out.push(Entry::Observed { point, iter: s.iter, obs: abstract_restrict(&s.mem, groups) });
        } else if markers.contains(&s.point) {
            out.push(Entry::Marker { line: s.point, iter: s.iter });
        }
    }
    match &t.status {
        Status::Completed => {
            if find_occ(occ, Point::End, 1) {
                let m = t.final_mem.as_ref().expect("completed runs have a final memory");
                out.push(Entry::Observed { point: Point::End, iter: 1, obs: abstract_restrict(m, groups) });
            }
        }
        Status::RuntimeError(_) => out.push(Entry::Failed),
        Status::StepLimit => {}
    }
    out
}

pub fn render_projection(proj: &Projection, groups: &[Resolved]) -> String {
    let parts: Vec<String> = proj
        .iter()
        .map(|e| match e {
            Entry::Observed { point, iter, obs } => {
                let vals: Vec<String> = groups.iter().zip(obs).map(|(g, o)| g.render(o)).collect();
                format!("<{point}^{iter}, {}>", vals.join(", "))
            }
            Entry::Marker { line, iter } => format!("<{line}^{iter}, _>"),
            Entry::Failed => "<error>".into(),
        })
        .collect();
    parts.join(" ")
}

/// One entry of the exact projection: the store restricted to the observed
/// variables, with the whole heap.
#[derive(Clone, Debug)]
pub enum ConcreteEntry {
    Observed { point: Point, iter: u32, mem: Memory },
    Marker { line: Line, iter: u32 },
    Failed,
}

/// The exact projection of a trajectory, kept as memories.
pub fn concrete_project(t: &Trajectory, vars: &[String], occ: &[Occurrence], markers: &BTreeSet<Line>) -> Vec<ConcreteEntry> {
    let mut out = Vec::new();
    for s in &t.states {
        if find_occ(occ, Point::Line(s.point), s.iter) {
            out.push(ConcreteEntry::Observed { point: Point::Line(s.point), iter: s.iter, mem: s.mem.restrict(vars) });
        } else if markers.contains(&s.point) {
            out.push(ConcreteEntry::Marker { line: s.point, iter: s.iter });
        }
    }
    match &t.status {
        Status::Completed if find_occ(occ, Point::End, 1) => {
            let m = t.final_mem.as_ref().unwrap();
            out.push(ConcreteEntry::Observed { point: Point::End, iter: 1, mem: m.restrict(vars) });
        }
        Status::RuntimeError(_) => out.push(ConcreteEntry::Failed),
        _ => {}
    }
    out
}

/// Equality of exact projections: same points, and each observed variable
/// equal as an integer or structurally equal as a reference.
pub fn concrete_projections_equal(a: &[ConcreteEntry], b: &[ConcreteEntry], vars: &[String]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| match (x, y) {
            (
                ConcreteEntry::Observed { point: p1, iter: k1, mem: m1 },
                ConcreteEntry::Observed { point: p2, iter: k2, mem: m2 },
            ) => {
                p1 == p2
                    && k1 == k2
                    && vars.iter().all(|v| {
                        let zero = Value::Int(BigInt::from(0));
                        let v1 = m1.get(v).unwrap_or(&zero);
                        let v2 = m2.get(v).unwrap_or(&zero);
                        structurally_equal(m1, v1, m2, v2)
                    })
            }
            (ConcreteEntry::Marker { line: l1, iter: k1 }, ConcreteEntry::Marker { line: l2, iter: k2 }) => {
                l1 == l2 && k1 == k2
            }
            (ConcreteEntry::Failed, ConcreteEntry::Failed) => true,
            _ => false,
        })
}

/// Result of comparing two programs under a criterion.
#[derive(Clone, Debug)]
pub enum Verdict {
    /// Every enumerated input gave equal projections. Inputs on which both
    /// programs hit the step limit are counted as skipped.
    Equivalent { checked: usize, skipped: usize },
    Counterexample { input: Memory, left: String, right: String },
    /// One program hit the step limit and the other did not.
    Inconclusive { input: Memory },
    NotSubprogram,
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Equivalent { .. })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Equivalent { checked, skipped } => {
                write!(f, "equivalent on {checked} inputs")?;
                if *skipped > 0 {
                    write!(f, " ({skipped} skipped: both runs hit the step limit)")?;
                }
                Ok(())
            }
            Verdict::Counterexample { input, left, right } => {
                write!(
                    f,
                    "counterexample on input {}\n  original: {left}\n  candidate: {right}",
                    crate::concrete::memory_to_string(input, None)
                )
            }
            Verdict::Inconclusive { input } => {
                write!(f, "inconclusive: only one run hit the step limit on {}", crate::concrete::memory_to_string(input, None))
            }
            Verdict::NotSubprogram => f.write_str("not a subprogram of the original"),
        }
    }
}

enum Check {
    Same,
    Skipped,
    Differ(Memory, String, String),
    Inconclusive(Memory),
}

/// Compares the projections of `p` and `q` on every input of `c`.
pub fn equivalent(p: &Program, q: &Program, c: &Criterion, lib: &Library, step_limit: usize) -> Result<Verdict, CriterionError> {
    let groups = c.resolve(p, lib)?;
    let markers: BTreeSet<Line> = if c.kl { p.lines().intersection(&q.lines()).cloned().collect() } else { BTreeSet::new() };
    let inputs = c.input_set(&[p, q], lib.bound());
    let results: Vec<Check> = inputs
        .par_iter()
        .map(|mu| {
            let mut mu = mu.clone();
            mu.complete_for(p);
            mu.complete_for(q);
            let t1 = run(p, &mu, step_limit);
            let t2 = run(q, &mu, step_limit);
            match (t1.status == Status::StepLimit, t2.status == Status::StepLimit) {
                (true, true) => return Check::Skipped,
                (true, false) | (false, true) => return Check::Inconclusive(mu),
                _ => {}
            }
            let a = project(&t1, &c.occ, &groups, &markers);
            let b = project(&t2, &c.occ, &groups, &markers);
            if a == b {
                Check::Same
            } else {
                Check::Differ(mu, render_projection(&a, &groups), render_projection(&b, &groups))
            }
        })
        .collect();
    let mut skipped = 0;
    for r in results {
        match r {
            Check::Same => {}
            Check::Skipped => skipped += 1,
            Check::Differ(input, left, right) => return Ok(Verdict::Counterexample { input, left, right }),
            Check::Inconclusive(input) => return Ok(Verdict::Inconclusive { input }),
        }
    }
    Ok(Verdict::Equivalent { checked: inputs.len() - skipped, skipped })
}

/// `q` is a slice of `p`: a subprogram with equal projections on every input.
pub fn is_slice(p: &Program, q: &Program, c: &Criterion, lib: &Library, step_limit: usize) -> Result<Verdict, CriterionError> {
    if !is_subprogram(q, p) {
        return Ok(Verdict::NotSubprogram);
    }
    equivalent(p, q, c, lib, step_limit)
}

fn same_input(a: &Memory, b: &Memory, vars: &[(String, Ty)]) -> bool {
    vars.iter().all(|(v, t)| {
        let d = Value::default_for(t);
        structurally_equal(a, a.get(v).unwrap_or(&d), b, b.get(v).unwrap_or(&d))
    })
}

fn input_member(m: &Memory, c: &Criterion, vars: &[(String, Ty)], bound: i64) -> bool {
    let in_ranges = || {
        vars.iter().all(|(v, t)| {
            if t.is_ref() {
                return true;
            }
            let (lo, hi) = c.range_of(v, bound);
            let x = m.get(v).and_then(|x| x.as_int()).cloned().unwrap_or_default();
            BigInt::from(lo) <= x && x <= BigInt::from(hi)
        })
    };
    match &c.inputs {
        Inputs::All => in_ranges(),
        Inputs::Cond(g) => in_ranges() && cond_holds(g, m),
        Inputs::List(ms) => ms.iter().any(|n| same_input(m, n, vars)),
    }
}

/// `c1` is subsumed by `c2` on program `p`: every slice of `p` for `c2` is
/// also a slice for `c1`. Decided component-wise on inputs, occurrences,
/// observed variables, the KL flag and abstraction precision.
pub fn criterion_subsumes(c1: &Criterion, c2: &Criterion, p: &Program, lib: &Library) -> Result<bool, CriterionError> {
    let g1 = c1.resolve(p, lib)?;
    let g2 = c2.resolve(p, lib)?;
    let bound = lib.bound();
    // Inputs: every member of I¹ is a member of I².
    let mut vars = c1.enumerated_vars(&[p]);
    for v in c2.enumerated_vars(&[p]) {
        if !vars.iter().any(|(n, _)| *n == v.0) {
            vars.push(v);
        }
    }
    let i1 = c1.input_set(&[p], bound);
    if !i1.iter().all(|m| input_member(m, c2, &vars, bound)) {
        return Ok(false);
    }
    // Occurrences.
    for o in &c1.occ {
        let same: Vec<&Iters> = c2.occ.iter().filter(|o2| o2.point == o.point).map(|o2| &o2.iters).collect();
        let covered = match &o.iters {
            Iters::All => same.iter().any(|i| matches!(i, Iters::All)),
            Iters::Set(ks) => ks.iter().all(|k| same.iter().any(|i| i.contains(*k))),
        };
        if !covered {
            return Ok(false);
        }
    }
    if !c1.vars.iter().all(|v| c2.vars.contains(v)) || (c1.kl && !c2.kl) {
        return Ok(false);
    }
    // Abstractions: the observation of c2 determines that of c1.
    let find = |x: &str| g2.iter().find(|g| g.vars.iter().any(|v| v == x));
    for g in &g1 {
        let ok = match &g.kind {
            ResolvedKind::Single(d1) => match find(&g.vars[0]) {
                Some(Resolved { kind: ResolvedKind::Single(d2), .. }) => refines(d2, d1),
                Some(_) => d1.is_top(),
                None => false,
            },
            ResolvedKind::Relational(rel, base) => g.vars.iter().all(|x| match find(x) {
                Some(Resolved { kind: ResolvedKind::Single(d2), .. }) => refines(d2, base),
                Some(Resolved { kind: ResolvedKind::Relational(r2, _), vars }) => {
                    r2 == rel && {
                        let mut a = vars.clone();
                        let mut b = g.vars.clone();
                        a.sort();
                        b.sort();
                        a == b
                    }
                }
                None => false,
            }),
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.inputs {
            Inputs::All => writeln!(f, "inputs=all")?,
            Inputs::Cond(g) => writeln!(f, "inputs=cond:{}", guard_to_string(g))?,
            Inputs::List(ms) => {
                let items: Vec<String> = ms.iter().map(|m| crate::concrete::memory_to_string(m, None)).collect();
                writeln!(f, "inputs=list:{}", items.join("; "))?
            }
        }
        if !self.ranges.is_empty() {
            let rs: Vec<String> = self.ranges.iter().map(|(v, lo, hi)| format!("{v}:{lo}..{hi}")).collect();
            writeln!(f, "range={}", rs.join(","))?;
        }
        if self.heap != HeapBound::default() {
            let ints: Vec<String> = self.heap.field_ints.iter().map(|i| i.to_string()).collect();
            writeln!(f, "heap=nodes:{},ints:{},sharing:{}", self.heap.max_nodes, ints.join("|"), self.heap.sharing)?;
        }
        writeln!(f, "vars={}", self.vars.join(","))?;
        let occ: Vec<String> = self
            .occ
            .iter()
            .map(|o| match &o.iters {
                Iters::All => format!("{}:N", o.point),
                Iters::Set(ks) => {
                    let ks: Vec<String> = ks.iter().map(|k| k.to_string()).collect();
                    format!("{}:{{{}}}", o.point, ks.join(","))
                }
            })
            .collect();
        writeln!(f, "occ={}", occ.join(" "))?;
        writeln!(f, "kl={}", self.kl)?;
        if !self.abs.is_empty() {
            let gs: Vec<String> = self
                .abs
                .iter()
                .map(|g| match g {
                    Group::Single { var, domain } => format!("{var}:{domain}"),
                    Group::Relational { vars, rel } => format!("{{{}}}:{}", vars.join(","), rel.name()),
                })
                .collect();
            writeln!(f, "abs={}", gs.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;

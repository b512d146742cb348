//! Program dependence graphs with syntactic and semantic flow edges, and
//! backward slicing by graph reachability.
//!
//! `read` statements are definition nodes and `write` statements use nodes.
//! A field update `x.f := e` defines `x` and every variable that may share
//! with `x`, without killing earlier definitions.

use crate::deps::{is_numeric, sem_dep};
use crate::lang::{stmt_head, Line, Program, Stmt, StmtKind};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Entry,
    Line(Line),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    Control,
    Flow,
    SemanticFlow,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    pub from: Node,
    pub to: Line,
    pub kind: EdgeKind,
    /// The variable carried by a flow edge.
    pub var: Option<String>,
}

/// Which flow edges a slice follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowKind {
    Syntactic,
    Semantic,
}

impl FlowKind {
    fn edge(self) -> EdgeKind {
        match self {
            FlowKind::Syntactic => EdgeKind::Flow,
            FlowKind::Semantic => EdgeKind::SemanticFlow,
        }
    }
}

type Defs = BTreeSet<(String, Line)>;

#[derive(Clone, Debug)]
pub struct Pdg {
    pub lines: Vec<Line>,
    pub edges: Vec<Edge>,
    /// Definitions reaching each statement, and the end of the program.
    pub reaching: BTreeMap<Line, Defs>,
    pub reaching_end: Defs,
}

/// Variables that may share heap objects with `x`: every reference variable
/// of the same class (conservative).
pub fn share(p: &Program, x: &str) -> Vec<String> {
    let ty = p.var_ty(x);
    let Some(class) = ty.class() else { return vec![x.to_string()] };
    p.vars.iter().filter(|(_, t)| t.class() == Some(class)).map(|(v, _)| v.clone()).collect()
}

fn uses(s: &Stmt) -> BTreeSet<String> {
    match &s.kind {
        StmtKind::Skip | StmtKind::Read(_) => BTreeSet::new(),
        StmtKind::Assign(_, e) => e.vars(),
        StmtKind::FieldAssign { var, expr, .. } => {
            let mut u = expr.vars();
            u.insert(var.clone());
            u
        }
        StmtKind::If(g, ..) | StmtKind::While(g, _) => g.vars(),
        StmtKind::Write(vs) => vs.iter().cloned().collect(),
    }
}

fn reach(p: &Program, stmts: &[Stmt], mut cur: Defs, at: &mut BTreeMap<Line, Defs>) -> Defs {
    for s in stmts {
        at.entry(s.line).or_default().extend(cur.iter().cloned());
        match &s.kind {
            StmtKind::Skip | StmtKind::Write(_) => {}
            StmtKind::Assign(x, _) => {
                cur.retain(|(v, _)| v != x);
                cur.insert((x.clone(), s.line));
            }
            StmtKind::Read(vs) => {
                cur.retain(|(v, _)| !vs.contains(v));
                cur.extend(vs.iter().map(|v| (v.clone(), s.line)));
            }
            StmtKind::FieldAssign { var, .. } => {
                cur.insert((var.clone(), s.line));
                cur.extend(share(p, var).into_iter().map(|v| (v, s.line)));
            }
            StmtKind::If(_, t, e) => {
                let mut out = reach(p, t, cur.clone(), at);
                out.extend(reach(p, e, cur, at));
                cur = out;
            }
            StmtKind::While(_, body) => {
                let mut head = cur.clone();
                loop {
                    at.entry(s.line).or_default().extend(head.iter().cloned());
                    let out = reach(p, body, head.clone(), at);
                    let mut next = cur.clone();
                    next.extend(out);
                    if next == head {
                        break;
                    }
                    head = next;
                }
                cur = head;
            }
        }
    }
    cur
}

fn control(stmts: &[Stmt], parent: Node, edges: &mut Vec<Edge>) {
    for s in stmts {
        edges.push(Edge { from: parent, to: s.line, kind: EdgeKind::Control, var: None });
        match &s.kind {
            StmtKind::If(_, t, e) => {
                control(t, Node::Line(s.line), edges);
                control(e, Node::Line(s.line), edges);
            }
            StmtKind::While(_, b) => control(b, Node::Line(s.line), edges),
            _ => {}
        }
    }
}

/// The syntactic dependence graph: control edges by nesting, flow edges by
/// reaching definitions.
pub fn build_pdg(p: &Program) -> Pdg {
    let mut reaching = BTreeMap::new();
    let reaching_end = reach(p, &p.body, Defs::new(), &mut reaching);
    let mut edges = Vec::new();
    control(&p.body, Node::Entry, &mut edges);
    for s in p.all_stmts() {
        let used = uses(s);
        for (v, d) in reaching.get(&s.line).into_iter().flatten() {
            if used.contains(v) {
                edges.push(Edge { from: Node::Line(*d), to: s.line, kind: EdgeKind::Flow, var: Some(v.clone()) });
            }
        }
    }
    edges.sort();
    edges.dedup();
    Pdg { lines: p.lines().into_iter().collect(), edges, reaching, reaching_end }
}

/// Does the statement's value really depend on `v`? Only numeric assignments
/// are refined; guards, heap accesses and writes keep their syntactic uses.
fn semantic_use(s: &Stmt, v: &str, bound: i64) -> bool {
    match &s.kind {
        StmtKind::Assign(_, e) if is_numeric(e) => sem_dep(e, v, bound),
        _ => true,
    }
}

/// The dependence graph with an extra semantic flow edge for every flow edge
/// whose use semantically depends on the carried variable.
pub fn build_semantic_pdg(p: &Program, bound: i64) -> Pdg {
    let mut g = build_pdg(p);
    let extra: Vec<Edge> = g
        .edges
        .iter()
        .filter(|e| e.kind == EdgeKind::Flow)
        .filter(|e| {
            let s = p.stmt_at(e.to).expect("edge targets are statements");
            semantic_use(s, e.var.as_deref().unwrap(), bound)
        })
        .map(|e| Edge { kind: EdgeKind::SemanticFlow, ..e.clone() })
        .collect();
    g.edges.extend(extra);
    g.edges.sort();
    g
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
#[error("line {0} is not a node of the dependence graph")]
pub struct UnknownTarget(pub Line);

impl Pdg {
    pub fn preds(&self, l: Line, kinds: &[EdgeKind]) -> Vec<&Edge> {
        self.edges.iter().filter(|e| e.to == l && kinds.contains(&e.kind)).collect()
    }

    fn closure(&self, mut work: Vec<Line>, kind: FlowKind) -> BTreeSet<Line> {
        let mut seen = BTreeSet::new();
        let kinds = [EdgeKind::Control, kind.edge()];
        while let Some(l) = work.pop() {
            if !seen.insert(l) {
                continue;
            }
            for e in self.preds(l, &kinds) {
                if let Node::Line(from) = e.from {
                    work.push(from);
                }
            }
        }
        seen
    }

    /// Lines with a path of control and chosen flow edges to a target.
    pub fn slice(&self, targets: &BTreeSet<Line>, kind: FlowKind) -> Result<BTreeSet<Line>, UnknownTarget> {
        if let Some(t) = targets.iter().find(|t| !self.lines.contains(t)) {
            return Err(UnknownTarget(*t));
        }
        Ok(self.closure(targets.iter().copied().collect(), kind))
    }

    /// Slice for observing `vars` at `point` (`None` = end of the program): the
    /// point itself with its control ancestors, plus the closure of the
    /// definitions of `vars` reaching it. Other variables used at the point
    /// are not followed.
    pub fn slice_for(&self, vars: &[String], point: Option<Line>, kind: FlowKind) -> Result<BTreeSet<Line>, UnknownTarget> {
        let defs = match point {
            Some(l) => self.reaching.get(&l).ok_or(UnknownTarget(l))?,
            None => &self.reaching_end,
        };
        let mut work: Vec<Line> = defs.iter().filter(|(v, _)| vars.contains(v)).map(|(_, d)| *d).collect();
        let mut out = BTreeSet::new();
        if let Some(l) = point {
            out.insert(l);
            for e in self.preds(l, &[EdgeKind::Control]) {
                if let Node::Line(from) = e.from {
                    work.push(from);
                }
            }
        }
        out.extend(self.closure(work, kind));
        Ok(out)
    }

    pub fn to_dot(&self, p: &Program, kind: FlowKind) -> String {
        let mut out = String::from("digraph pdg {\n  node [shape=box, fontname=\"monospace\"];\n  entry [label=\"entry\"];\n");
        for l in &self.lines {
            let head = p.stmt_at(*l).map(stmt_head).unwrap_or_default();
            let _ = writeln!(out, "  n{l} [label=\"{l}: {}\"];", head.replace('"', "\\\""));
        }
        for e in &self.edges {
            let from = match e.from {
                Node::Entry => "entry".to_string(),
                Node::Line(l) => format!("n{l}"),
            };
            match e.kind {
                EdgeKind::Control => {
                    let _ = writeln!(out, "  {from} -> n{} [style=solid];", e.to);
                }
                k if k == kind.edge() => {
                    let color = if k == EdgeKind::SemanticFlow { "blue" } else { "black" };
                    let _ = writeln!(
                        out,
                        "  {from} -> n{} [style=dashed, color={color}, label=\"{}\"];",
                        e.to,
                        e.var.as_deref().unwrap_or("")
                    );
                }
                _ => {}
            }
        }
        out.push_str("}\n");
        out
    }
}

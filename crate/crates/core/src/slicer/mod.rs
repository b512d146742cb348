//! Slicing by statement erasure: label the program backwards from the
//! agreement a criterion observes, replace every statement that provably
//! preserves its label by `skip`, and re-verify the result by execution.

use crate::agreements::{Agreement, Labels, Mode, Prover, Predicate, SharingInfo};
use crate::concrete::DEFAULT_STEP_LIMIT;
use crate::criteria::{is_slice, Criterion, CriterionError, Inputs, Point, ResolvedKind, Verdict};
use crate::domains::Library;
use crate::lang::{listing, Expr, Guard, CmpOp, Line, Program, Stmt, StmtKind};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SliceError {
    #[error(transparent)]
    Criterion(#[from] CriterionError),
    #[error("unsupported criterion: {0}")]
    Unsupported(String),
    /// The erasure result failed re-verification; it is never returned.
    #[error("the computed slice failed verification: {0}")]
    Unverified(String),
}

#[derive(Clone, Debug)]
pub struct SliceOptions {
    pub mode: Mode,
    pub step_limit: usize,
    /// Overrides the conservative sharing information.
    pub sharing: Option<SharingInfo>,
}

impl Default for SliceOptions {
    fn default() -> Self {
        SliceOptions { mode: Mode::Abstract, step_limit: DEFAULT_STEP_LIMIT, sharing: None }
    }
}

#[derive(Clone, Debug)]
pub struct SliceOutcome {
    pub original: Program,
    pub slice: Program,
    pub kept: BTreeSet<Line>,
    pub erased: BTreeSet<Line>,
    /// The agreement observed at the end and the entry predicate.
    pub observed: Agreement,
    pub entry_predicate: Predicate,
    pub labels: Labels,
    pub mode: Mode,
    pub verdict: Verdict,
    pub bound: i64,
    pub heap_nodes: usize,
    pub step_limit: usize,
}

/// The end-of-run agreement and entry predicate of a criterion in the
/// supported form: observations only at the end, no KL requirement, and
/// single-variable abstractions.
pub fn criterion_agreement(p: &Program, c: &Criterion, lib: &Library, mode: Mode) -> Result<(Agreement, Predicate), SliceError> {
    let groups = c.resolve(p, lib)?;
    if c.occ.iter().any(|o| o.point != Point::End) {
        return Err(SliceError::Unsupported("observations must be at the end of the program".into()));
    }
    if c.kl {
        return Err(SliceError::Unsupported("KL criteria are not handled by erasure".into()));
    }
    let mut g = Agreement::new();
    for r in &groups {
        match &r.kind {
            ResolvedKind::Single(d) => {
                let dom = if mode == Mode::Concrete && !d.is_top() { "id" } else { d.name() };
                g.set(&r.vars[0], dom);
            }
            ResolvedKind::Relational(..) => {
                return Err(SliceError::Unsupported(format!("relational abstraction over {}", r.vars.join(", "))))
            }
        }
    }
    // Explicit input lists are over-approximated by all inputs.
    let mut beta = match &c.inputs {
        Inputs::Cond(cond) => Predicate::from_guard(cond),
        Inputs::All | Inputs::List(_) => Predicate::truth(),
    };
    if !matches!(c.inputs, Inputs::List(_)) {
        for (v, lo, hi) in &c.ranges {
            let var = Expr::Var(v.clone());
            beta = beta.and(&Guard::Cmp(CmpOp::Ge, var.clone(), Expr::int(*lo)));
            beta = beta.and(&Guard::Cmp(CmpOp::Le, var, Expr::int(*hi)));
        }
    }
    Ok((g, beta))
}

fn erase(pr: &Prover, labels: &Labels, stmts: &[Stmt], kept: &mut BTreeSet<Line>) {
    for s in stmts {
        // Input and output statements document the interface and stay.
        let io = matches!(s.kind, StmtKind::Read(_) | StmtKind::Write(_));
        if !io && pr.erasable(labels, s) {
            continue;
        }
        kept.insert(s.line);
        if labels.atomic.contains(&s.line) {
            let mut all = Vec::new();
            s.walk(&mut all);
            kept.extend(all.iter().map(|t| t.line));
            continue;
        }
        match &s.kind {
            StmtKind::If(_, t, e) => {
                erase(pr, labels, t, kept);
                erase(pr, labels, e, kept);
            }
            StmtKind::While(_, b) => erase(pr, labels, b, kept),
            _ => {}
        }
    }
}

/// Checks that `q` is a slice of `p` for `c` on the criterion's input grid.
pub fn verify_slice(p: &Program, q: &Program, c: &Criterion, lib: &Library, step_limit: usize) -> Result<Verdict, CriterionError> {
    is_slice(p, q, c, lib, step_limit)
}

/// Slices `p` for `c`, observing the criterion's abstractions.
pub fn abstract_slice(p: &Program, c: &Criterion, lib: &Library, opts: &SliceOptions) -> Result<SliceOutcome, SliceError> {
    let (observed, entry_predicate) = criterion_agreement(p, c, lib, opts.mode)?;
    let mut pr = Prover::new(p, lib, opts.mode).with_step_limit(opts.step_limit).with_heap(c.heap.clone());
    if let Some(s) = &opts.sharing {
        pr = pr.with_sharing(s.clone());
    }
    // Predicates may only use facts that also hold in the slice, so facts set
    // up by erased statements are withdrawn and the labels recomputed until
    // every erased statement is among the withdrawn ones.
    let mut skipped = BTreeSet::new();
    let (labels, kept) = loop {
        let labels = pr.label_sequence(&observed, &entry_predicate);
        let mut kept = BTreeSet::new();
        erase(&pr, &labels, &p.body, &mut kept);
        let erased: BTreeSet<Line> = p.lines().difference(&kept).copied().collect();
        if erased.is_subset(&skipped) {
            break (labels, kept);
        }
        skipped.extend(erased);
        pr = pr.with_skipped(skipped.clone());
    };
    let slice = p.retain_lines(&|l| kept.contains(&l));
    let erased = p.lines().difference(&kept).copied().collect();
    // In concrete mode the slice must hold for exact observation.
    let check = if opts.mode == Mode::Concrete { c.identity() } else { c.clone() };
    let verdict = verify_slice(p, &slice, &check, lib, opts.step_limit)?;
    if !verdict.holds() {
        return Err(SliceError::Unverified(verdict.to_string()));
    }
    Ok(SliceOutcome {
        original: p.clone(),
        slice,
        kept,
        erased,
        observed,
        entry_predicate,
        labels,
        mode: opts.mode,
        verdict,
        bound: lib.bound(),
        heap_nodes: c.heap.max_nodes,
        step_limit: opts.step_limit,
    })
}

/// Slices `p` observing every criterion variable exactly.
pub fn concrete_slice(p: &Program, c: &Criterion, lib: &Library, opts: &SliceOptions) -> Result<SliceOutcome, SliceError> {
    let opts = SliceOptions { mode: Mode::Concrete, ..opts.clone() };
    abstract_slice(p, &c.identity(), lib, &opts)
}

#[derive(Serialize)]
struct LabelEntry {
    line: Line,
    before: String,
    after: String,
    predicate: String,
}

#[derive(Serialize)]
struct VerdictEntry {
    slice: bool,
    detail: String,
}

#[derive(Serialize)]
struct Envelope {
    int_range: (i64, i64),
    heap_max_nodes: usize,
    step_limit: usize,
}

#[derive(Serialize)]
struct Report {
    mode: &'static str,
    observed: String,
    entry_predicate: String,
    kept: Vec<Line>,
    erased: Vec<Line>,
    labels: Vec<LabelEntry>,
    verification: VerdictEntry,
    envelope: Envelope,
}

impl SliceOutcome {
    /// The slice laid out against the original line numbers, erased lines as
    /// empty numbered lines, with the label after each kept statement.
    pub fn listing(&self) -> String {
        let notes = |l: Line| {
            if self.kept.contains(&l) {
                self.labels.after.get(&l).map(|g| g.to_string())
            } else {
                None
            }
        };
        listing(&self.original, &self.slice, &notes)
    }

    /// Machine-readable summary: kept and erased lines, labels, verdict and
    /// the bounds verification ran under.
    pub fn report_json(&self) -> String {
        let labels: BTreeMap<Line, LabelEntry> = self
            .labels
            .after
            .iter()
            .map(|(l, after)| {
                let entry = LabelEntry {
                    line: *l,
                    before: self.labels.before.get(l).map(|g| g.to_string()).unwrap_or_default(),
                    after: after.to_string(),
                    predicate: self.labels.beta.get(l).map(|b| b.to_string()).unwrap_or_default(),
                };
                (*l, entry)
            })
            .collect();
        let report = Report {
            mode: match self.mode {
                Mode::Abstract => "abstract",
                Mode::Concrete => "concrete",
            },
            observed: self.observed.to_string(),
            entry_predicate: self.entry_predicate.to_string(),
            kept: self.kept.iter().copied().collect(),
            erased: self.erased.iter().copied().collect(),
            labels: labels.into_values().collect(),
            verification: VerdictEntry { slice: self.verdict.holds(), detail: self.verdict.to_string() },
            envelope: Envelope {
                int_range: (-self.bound, self.bound),
                heap_max_nodes: self.heap_nodes,
                step_limit: self.step_limit,
            },
        };
        serde_json::to_string_pretty(&report).expect("reports serialize")
    }
}

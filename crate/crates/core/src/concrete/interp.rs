use super::memory::{Classes, Memory, Object, Value};
use crate::lang::{BinOp, CmpOp, Expr, Guard, Line, Program, Stmt, StmtKind};
use num_integer::Integer;
use num_traits::{Signed, Zero};
use std::collections::HashMap;
use thiserror::Error;

pub const DEFAULT_STEP_LIMIT: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq, Hash)]
pub enum EvalError {
    #[error("division by zero")]
    DivByZero,
    #[error("field access on null")]
    NullDeref,
    #[error("variable {0} is undefined")]
    Undefined(String),
    #[error("type mismatch: {0}")]
    Type(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq, Hash)]
#[error("runtime error at line {line}: {error}")]
pub struct RuntimeError {
    pub line: Line,
    pub error: EvalError,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Completed,
    StepLimit,
    RuntimeError(RuntimeError),
}

/// The state about to execute `point` for the `iter`-th time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct State {
    pub point: Line,
    pub iter: u32,
    pub mem: Memory,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trajectory {
    pub states: Vec<State>,
    /// Memory after the last statement, present iff the run completed.
    pub final_mem: Option<Memory>,
    pub status: Status,
}

fn lookup<'m>(mem: &'m Memory, x: &str) -> Result<&'m Value, EvalError> {
    mem.get(x).ok_or_else(|| EvalError::Undefined(x.to_string()))
}

fn deref<'m>(mem: &'m Memory, v: &Value, f: &str) -> Result<&'m Value, EvalError> {
    match v {
        Value::Loc(l) => mem.heap[*l].get(f).ok_or_else(|| EvalError::Type(format!("no field {f}"))),
        Value::Null => Err(EvalError::NullDeref),
        Value::Int(_) => Err(EvalError::Type(format!("field {f} of an integer"))),
    }
}

pub fn arith(op: BinOp, a: &num_bigint::BigInt, b: &num_bigint::BigInt) -> Result<num_bigint::BigInt, EvalError> {
    Ok(match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b.is_zero() {
                return Err(EvalError::DivByZero);
            }
            a / b
        }
        BinOp::Mod => {
            if b.is_zero() {
                return Err(EvalError::DivByZero);
            }
            a.mod_floor(&b.abs())
        }
    })
}

/// Evaluates `e`; `new` allocates in `mem`, so the memory is mutable.
pub fn eval_expr(e: &Expr, mem: &mut Memory, classes: &Classes) -> Result<Value, EvalError> {
    match e {
        Expr::Int(v) => Ok(Value::Int(v.clone())),
        Expr::Var(x) => lookup(mem, x).cloned(),
        Expr::Field(x, fs) => {
            let mut v = lookup(mem, x)?.clone();
            for f in fs {
                v = deref(mem, &v, f)?.clone();
            }
            Ok(v)
        }
        Expr::Bin(op, a, b) => {
            let va = eval_expr(a, mem, classes)?;
            let vb = eval_expr(b, mem, classes)?;
            match (va, vb) {
                (Value::Int(x), Value::Int(y)) => Ok(Value::Int(arith(*op, &x, &y)?)),
                _ => Err(EvalError::Type(format!("operator {} on references", op.symbol()))),
            }
        }
        Expr::Cond(g, a, b) => {
            if eval_guard(g, mem, classes)? {
                eval_expr(a, mem, classes)
            } else {
                eval_expr(b, mem, classes)
            }
        }
        Expr::Null => Ok(Value::Null),
        Expr::New(c) => {
            let l = mem.alloc(Object::new(c, classes));
            Ok(Value::Loc(l))
        }
    }
}

/// Evaluates an expression that is known not to allocate.
pub fn eval_pure(e: &Expr, mem: &Memory) -> Result<Value, EvalError> {
    let mut scratch = mem.clone();
    eval_expr(e, &mut scratch, &Classes::new())
}

pub fn eval_guard(g: &Guard, mem: &mut Memory, classes: &Classes) -> Result<bool, EvalError> {
    match g {
        Guard::True => Ok(true),
        Guard::False => Ok(false),
        Guard::Cmp(op, a, b) => {
            let va = eval_expr(a, mem, classes)?;
            let vb = eval_expr(b, mem, classes)?;
            match (&va, &vb) {
                (Value::Int(x), Value::Int(y)) => Ok(op.holds(x, y)),
                (Value::Int(_), _) | (_, Value::Int(_)) => Err(EvalError::Type("int compared with reference".into())),
                _ => match op {
                    CmpOp::Eq => Ok(va == vb),
                    CmpOp::Ne => Ok(va != vb),
                    _ => Err(EvalError::Type("ordering on references".into())),
                },
            }
        }
        Guard::Not(x) => Ok(!eval_guard(x, mem, classes)?),
        Guard::And(a, b) => Ok(eval_guard(a, mem, classes)? && eval_guard(b, mem, classes)?),
        Guard::Or(a, b) => Ok(eval_guard(a, mem, classes)? || eval_guard(b, mem, classes)?),
    }
}

pub fn eval_guard_pure(g: &Guard, mem: &Memory) -> Result<bool, EvalError> {
    let mut scratch = mem.clone();
    eval_guard(g, &mut scratch, &Classes::new())
}

/// Executes one non-compound statement.
fn exec_simple(s: &Stmt, mem: &mut Memory, classes: &Classes) -> Result<(), EvalError> {
    match &s.kind {
        StmtKind::Skip | StmtKind::Read(_) | StmtKind::Write(_) => Ok(()),
        StmtKind::Assign(x, e) => {
            let v = eval_expr(e, mem, classes)?;
            mem.set(x, v);
            Ok(())
        }
        StmtKind::FieldAssign { var, field, expr } => {
            let v = eval_expr(expr, mem, classes)?;
            match lookup(mem, var)?.clone() {
                Value::Loc(l) => {
                    if mem.heap[l].set(field, v) {
                        Ok(())
                    } else {
                        Err(EvalError::Type(format!("no field {field}")))
                    }
                }
                Value::Null => Err(EvalError::NullDeref),
                Value::Int(_) => Err(EvalError::Type("field update on an integer".into())),
            }
        }
        StmtKind::If(..) | StmtKind::While(..) => unreachable!("compound statement"),
    }
}

/// Outcome of executing a statement sequence without recording states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Done(Memory),
    Error(RuntimeError),
    StepLimit,
}

/// Small-step driver shared by `run` and `exec`. Each statement execution and
/// each guard evaluation is one step; `on_step` sees the memory before it.
fn drive(
    stmts: &[Stmt],
    mut mem: Memory,
    classes: &Classes,
    limit: usize,
    mut on_step: impl FnMut(&Stmt, &Memory),
) -> (Memory, Status) {
    // A frame's index is left on a `while` while its body runs, so finishing
    // the body returns to the loop head and re-evaluates the guard.
    let mut stack: Vec<(&[Stmt], usize)> = vec![(stmts, 0)];
    let mut steps = 0usize;
    loop {
        let Some(&(seq, idx)) = stack.last() else { return (mem, Status::Completed) };
        if idx >= seq.len() {
            stack.pop();
            continue;
        }
        if steps >= limit {
            return (mem, Status::StepLimit);
        }
        steps += 1;
        let s = &seq[idx];
        on_step(s, &mem);
        let err = |e: EvalError| Status::RuntimeError(RuntimeError { line: s.line, error: e });
        match &s.kind {
            StmtKind::If(g, t, e) => {
                let b = match eval_guard(g, &mut mem, classes) {
                    Ok(b) => b,
                    Err(e) => return (mem, err(e)),
                };
                stack.last_mut().unwrap().1 += 1;
                stack.push((if b { t } else { e }, 0));
            }
            StmtKind::While(g, body) => {
                let b = match eval_guard(g, &mut mem, classes) {
                    Ok(b) => b,
                    Err(e) => return (mem, err(e)),
                };
                if b {
                    stack.push((body, 0));
                } else {
                    stack.last_mut().unwrap().1 += 1;
                }
            }
            _ => {
                if let Err(e) = exec_simple(s, &mut mem, classes) {
                    return (mem, err(e));
                }
                debug_assert!(mem.is_well_formed(classes) || classes.is_empty());
                stack.last_mut().unwrap().1 += 1;
            }
        }
    }
}

/// Runs `p` on `input`. Variables the input leaves unset start at 0 or null.
pub fn run(p: &Program, input: &Memory, step_limit: usize) -> Trajectory {
    let mut mem = input.clone();
    mem.complete_for(p);
    let mut states = Vec::new();
    let mut visits: HashMap<Line, u32> = HashMap::new();
    let (mem, status) = drive(&p.body, mem, &p.classes, step_limit, |s, m| {
        let k = visits.entry(s.line).or_insert(0);
        *k += 1;
        states.push(State { point: s.line, iter: *k, mem: m.clone() });
    });
    let final_mem = (status == Status::Completed).then_some(mem);
    Trajectory { states, final_mem, status }
}

/// Executes a statement sequence from `mem` without recording a trajectory.
pub fn exec(stmts: &[Stmt], mem: Memory, classes: &Classes, step_limit: usize) -> Outcome {
    match drive(stmts, mem, classes, step_limit, |_, _| {}) {
        (m, Status::Completed) => Outcome::Done(m),
        (_, Status::StepLimit) => Outcome::StepLimit,
        (_, Status::RuntimeError(e)) => Outcome::Error(e),
    }
}

//! Text format for memories (`x=3, y=null, z=obj:C{next=null}`) and
//! line-oriented trajectory dumps (`n^k | var=value ...`).
//!
//! Shared or cyclic objects are labelled on first occurrence with `#k=` and
//! referenced later as `#k`, e.g. `x=#1=obj:C{next=#1}`.

use super::interp::{Status, Trajectory};
use super::memory::{Classes, Memory, Object, Value};
use num_bigint::BigInt;
use std::collections::HashMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("memory syntax error at offset {pos}: {msg}")]
pub struct MemoryParseError {
    pub pos: usize,
    pub msg: String,
}

struct P<'a> {
    s: &'a [u8],
    pos: usize,
    classes: &'a Classes,
    labels: HashMap<u32, usize>,
    mem: Memory,
}

impl P<'_> {
    fn ws(&mut self) {
        while self.pos < self.s.len() && (self.s[self.pos] as char).is_whitespace() {
            self.pos += 1;
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, MemoryParseError> {
        Err(MemoryParseError { pos: self.pos, msg: msg.into() })
    }

    fn eat(&mut self, c: u8) -> bool {
        self.ws();
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), MemoryParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected '{}'", c as char))
        }
    }

    fn ident(&mut self) -> Result<String, MemoryParseError> {
        self.ws();
        let start = self.pos;
        while self.pos < self.s.len() && ((self.s[self.pos] as char).is_alphanumeric() || self.s[self.pos] == b'_') {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected identifier");
        }
        Ok(String::from_utf8_lossy(&self.s[start..self.pos]).into_owned())
    }

    fn number(&mut self) -> Result<BigInt, MemoryParseError> {
        self.ws();
        let start = self.pos;
        if self.s.get(self.pos) == Some(&b'-') {
            self.pos += 1;
        }
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
        text.parse().or_else(|_| self.err("expected integer"))
    }

    fn value(&mut self) -> Result<Value, MemoryParseError> {
        self.ws();
        match self.s.get(self.pos) {
            Some(b'#') => {
                self.pos += 1;
                let n: u32 = self.number()?.try_into().or_else(|_| self.err("bad label"))?;
                if self.eat(b'=') {
                    if self.labels.contains_key(&n) {
                        return self.err(format!("label #{n} defined twice"));
                    }
                    self.object(Some(n))
                } else {
                    match self.labels.get(&n) {
                        Some(l) => Ok(Value::Loc(*l)),
                        None => self.err(format!("label #{n} used before its definition")),
                    }
                }
            }
            Some(b'o') if self.s[self.pos..].starts_with(b"obj:") => self.object(None),
            Some(b'n') if self.s[self.pos..].starts_with(b"null") => {
                self.pos += 4;
                Ok(Value::Null)
            }
            _ => Ok(Value::Int(self.number()?)),
        }
    }

    fn object(&mut self, label: Option<u32>) -> Result<Value, MemoryParseError> {
        self.ws();
        if !self.s[self.pos..].starts_with(b"obj:") {
            return self.err("expected obj:");
        }
        self.pos += 4;
        let class = self.ident()?;
        if !self.classes.contains_key(&class) {
            return self.err(format!("unknown class {class}"));
        }
        let loc = self.mem.alloc(Object::new(&class, self.classes));
        if let Some(n) = label {
            self.labels.insert(n, loc);
        }
        self.expect(b'{')?;
        if !self.eat(b'}') {
            loop {
                let f = self.ident()?;
                self.expect(b'=')?;
                let v = self.value()?;
                if !self.mem.heap[loc].set(&f, v) {
                    return self.err(format!("class {class} has no field {f}"));
                }
                if self.eat(b'}') {
                    break;
                }
                self.expect(b',')?;
            }
        }
        Ok(Value::Loc(loc))
    }
}

pub fn parse_memory(text: &str, classes: &Classes) -> Result<Memory, MemoryParseError> {
    let mut p = P { s: text.as_bytes(), pos: 0, classes, labels: HashMap::new(), mem: Memory::new() };
    p.ws();
    if p.pos == p.s.len() {
        return Ok(p.mem);
    }
    loop {
        let x = p.ident()?;
        p.expect(b'=')?;
        let v = p.value()?;
        p.mem.set(&x, v);
        p.ws();
        if p.pos == p.s.len() {
            return Ok(p.mem);
        }
        p.expect(b',')?;
    }
}

fn count_refs(mem: &Memory, v: &Value, counts: &mut HashMap<usize, u32>) {
    if let Value::Loc(l) = v {
        let c = counts.entry(*l).or_insert(0);
        *c += 1;
        if *c == 1 {
            for (_, fv) in &mem.heap[*l].fields {
                count_refs(mem, fv, counts);
            }
        }
    }
}

struct Printer<'a> {
    mem: &'a Memory,
    counts: HashMap<usize, u32>,
    labels: HashMap<usize, u32>,
    next_label: u32,
}

impl Printer<'_> {
    fn value(&mut self, v: &Value, out: &mut String) {
        match v {
            Value::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Value::Null => out.push_str("null"),
            Value::Loc(l) => {
                if let Some(n) = self.labels.get(l) {
                    let _ = write!(out, "#{n}");
                    return;
                }
                if self.counts.get(l).copied().unwrap_or(0) > 1 {
                    self.next_label += 1;
                    self.labels.insert(*l, self.next_label);
                    let _ = write!(out, "#{}=", self.next_label);
                }
                let obj = &self.mem.heap[*l];
                let _ = write!(out, "obj:{}{{", obj.class);
                for (i, (f, fv)) in obj.fields.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    let _ = write!(out, "{f}=");
                    self.value(fv, out);
                }
                out.push('}');
            }
        }
    }
}

/// Renders the given variables (all of the store when `vars` is `None`).
pub fn memory_to_string(mem: &Memory, vars: Option<&[String]>) -> String {
    let names: Vec<String> = match vars {
        Some(vs) => vs.iter().filter(|v| mem.store.contains_key(*v)).cloned().collect(),
        None => mem.store.keys().cloned().collect(),
    };
    let mut counts = HashMap::new();
    for x in &names {
        count_refs(mem, &mem.store[x], &mut counts);
    }
    let mut pr = Printer { mem, counts, labels: HashMap::new(), next_label: 0 };
    let mut out = String::new();
    for (i, x) in names.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{x}=");
        pr.value(&mem.store[x], &mut out);
    }
    out
}

pub fn trajectory_to_string(t: &Trajectory, vars: Option<&[String]>) -> String {
    let mut out = String::new();
    for s in &t.states {
        let _ = writeln!(out, "{}^{} | {}", s.point, s.iter, memory_to_string(&s.mem, vars));
    }
    match &t.status {
        Status::Completed => {
            if let Some(m) = &t.final_mem {
                let _ = writeln!(out, "end | {}", memory_to_string(m, vars));
            }
        }
        Status::StepLimit => out.push_str("step limit reached\n"),
        Status::RuntimeError(e) => {
            let _ = writeln!(out, "{e}");
        }
    }
    out
}

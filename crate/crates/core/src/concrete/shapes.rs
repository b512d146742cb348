//! Bounded enumeration of input memories: integers over a range, references
//! over a catalog of small heap shapes.

use super::memory::{Classes, Memory, Object, Value};
use crate::lang::Ty;
use num_bigint::BigInt;

/// Limits of the heap-shape catalog.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeapBound {
    /// Maximum number of objects reachable from one freshly generated root.
    pub max_nodes: usize,
    /// Values tried for integer fields.
    pub field_ints: Vec<BigInt>,
    /// Whether later reference variables may point into objects generated for earlier ones.
    pub sharing: bool,
}

impl Default for HeapBound {
    fn default() -> Self {
        HeapBound { max_nodes: 2, field_ints: vec![BigInt::from(0), BigInt::from(1)], sharing: true }
    }
}

/// Every heap of at most `max_nodes` objects reachable from a root object of
/// class `class`, up to isomorphism. The root is object 0 of each heap.
pub fn shapes_of(class: &str, classes: &Classes, bound: &HeapBound) -> Vec<Vec<Object>> {
    fn fill(
        objs: &mut Vec<Object>,
        node: usize,
        field: usize,
        classes: &Classes,
        bound: &HeapBound,
        out: &mut Vec<Vec<Object>>,
    ) {
        if node == objs.len() {
            out.push(objs.clone());
            return;
        }
        let decl = &classes[&objs[node].class];
        if field == decl.len() {
            fill(objs, node + 1, 0, classes, bound, out);
            return;
        }
        let (_, ty) = decl.get_index(field).unwrap();
        match ty {
            Ty::Int => {
                for v in &bound.field_ints {
                    objs[node].fields[field].1 = Value::Int(v.clone());
                    fill(objs, node, field + 1, classes, bound, out);
                }
            }
            Ty::Ref(target) => {
                objs[node].fields[field].1 = Value::Null;
                fill(objs, node, field + 1, classes, bound, out);
                for j in 0..objs.len() {
                    if objs[j].class == *target {
                        objs[node].fields[field].1 = Value::Loc(j);
                        fill(objs, node, field + 1, classes, bound, out);
                    }
                }
                if objs.len() < bound.max_nodes {
                    objs.push(Object::new(target, classes));
                    objs[node].fields[field].1 = Value::Loc(objs.len() - 1);
                    fill(objs, node, field + 1, classes, bound, out);
                    objs.pop();
                }
                objs[node].fields[field].1 = Value::Null;
            }
        }
    }
    let mut out = Vec::new();
    if bound.max_nodes == 0 || !classes.contains_key(class) {
        return out;
    }
    let mut objs = vec![Object::new(class, classes)];
    fill(&mut objs, 0, 0, classes, bound, &mut out);
    out
}

/// Copies `objs` into `mem`'s heap, relocating references; returns the new root.
fn graft(mem: &mut Memory, objs: &[Object]) -> Value {
    let base = mem.heap.len();
    for o in objs {
        let fields = o
            .fields
            .iter()
            .map(|(f, v)| {
                let v = match v {
                    Value::Loc(l) => Value::Loc(l + base),
                    other => other.clone(),
                };
                (f.clone(), v)
            })
            .collect();
        mem.heap.push(Object { class: o.class.clone(), fields });
    }
    Value::Loc(base)
}

/// All memories assigning each variable of `vars` a value: integers from
/// `ints`, references null, a fresh catalog shape, or (with sharing) any
/// existing object of the right class.
pub fn enumerate_memories(vars: &[(String, Ty)], ints: &[BigInt], classes: &Classes, bound: &HeapBound) -> Vec<Memory> {
    enumerate_memories_with(vars, &|_| ints.to_vec(), classes, bound)
}

/// As [`enumerate_memories`], with a per-variable integer range.
pub fn enumerate_memories_with(
    vars: &[(String, Ty)],
    ints_for: &dyn Fn(&str) -> Vec<BigInt>,
    classes: &Classes,
    bound: &HeapBound,
) -> Vec<Memory> {
    let mut catalog: std::collections::HashMap<String, Vec<Vec<Object>>> = Default::default();
    for (_, t) in vars {
        if let Ty::Ref(c) = t {
            catalog.entry(c.clone()).or_insert_with(|| shapes_of(c, classes, bound));
        }
    }
    let mut out = vec![Memory::new()];
    for (x, t) in vars {
        let mut next = Vec::new();
        for m in &out {
            match t {
                Ty::Int => {
                    for v in ints_for(x) {
                        let mut m2 = m.clone();
                        m2.set(x, Value::Int(v));
                        next.push(m2);
                    }
                }
                Ty::Ref(c) => {
                    let mut m2 = m.clone();
                    m2.set(x, Value::Null);
                    next.push(m2);
                    if bound.sharing {
                        for (l, o) in m.heap.iter().enumerate() {
                            if o.class == *c {
                                let mut m2 = m.clone();
                                m2.set(x, Value::Loc(l));
                                next.push(m2);
                            }
                        }
                    }
                    for shape in &catalog[c] {
                        let mut m2 = m.clone();
                        let root = graft(&mut m2, shape);
                        m2.set(x, root);
                        next.push(m2);
                    }
                }
            }
        }
        out = next;
    }
    out
}

pub fn int_range(lo: i64, hi: i64) -> Vec<BigInt> {
    (lo..=hi).map(BigInt::from).collect()
}

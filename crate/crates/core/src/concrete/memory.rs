use crate::lang::{Program, Ty};
use indexmap::IndexMap;
use num_bigint::BigInt;
use std::collections::{BTreeMap, HashMap};

pub type Classes = IndexMap<String, IndexMap<String, Ty>>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(BigInt),
    Loc(usize),
    Null,
}

impl Value {
    pub fn int(v: i64) -> Value {
        Value::Int(BigInt::from(v))
    }

    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Value::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_ref(&self) -> bool {
        !matches!(self, Value::Int(_))
    }

    pub fn default_for(t: &Ty) -> Value {
        match t {
            Ty::Int => Value::int(0),
            Ty::Ref(_) => Value::Null,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Object {
    pub class: String,
    pub fields: Vec<(String, Value)>,
}

impl Object {
    pub fn new(class: &str, classes: &Classes) -> Object {
        let fields = classes
            .get(class)
            .map(|fs| fs.iter().map(|(f, t)| (f.clone(), Value::default_for(t))).collect())
            .unwrap_or_default();
        Object { class: class.to_string(), fields }
    }

    pub fn get(&self, f: &str) -> Option<&Value> {
        self.fields.iter().find(|(n, _)| n == f).map(|(_, v)| v)
    }

    pub fn set(&mut self, f: &str, v: Value) -> bool {
        match self.fields.iter_mut().find(|(n, _)| n == f) {
            Some(slot) => {
                slot.1 = v;
                true
            }
            None => false,
        }
    }
}

/// Store plus heap. Locations index `heap`; objects are never freed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Memory {
    pub store: BTreeMap<String, Value>,
    pub heap: Vec<Object>,
}

impl Memory {
    pub fn new() -> Memory {
        Memory::default()
    }

    pub fn with_ints(pairs: &[(&str, i64)]) -> Memory {
        let mut m = Memory::new();
        for (x, v) in pairs {
            m.store.insert(x.to_string(), Value::int(*v));
        }
        m
    }

    pub fn get(&self, x: &str) -> Option<&Value> {
        self.store.get(x)
    }

    pub fn int(&self, x: &str) -> Option<&BigInt> {
        self.store.get(x).and_then(Value::as_int)
    }

    pub fn set(&mut self, x: &str, v: Value) {
        self.store.insert(x.to_string(), v);
    }

    pub fn alloc(&mut self, obj: Object) -> usize {
        self.heap.push(obj);
        self.heap.len() - 1
    }

    /// Adds a default value for every program variable missing from the store.
    pub fn complete_for(&mut self, p: &Program) {
        for (v, t) in &p.vars {
            self.store.entry(v.clone()).or_insert_with(|| Value::default_for(t));
        }
    }

    /// Every location in range and every field map matching its class.
    pub fn is_well_formed(&self, classes: &Classes) -> bool {
        let ok = |v: &Value| match v {
            Value::Loc(l) => *l < self.heap.len(),
            _ => true,
        };
        self.store.values().all(ok)
            && self.heap.iter().all(|o| {
                let Some(decl) = classes.get(&o.class) else { return false };
                decl.len() == o.fields.len()
                    && o.fields.iter().zip(decl.iter()).all(|((f, v), (g, _))| f == g && ok(v))
            })
    }

    /// Restriction of the store to `vars`, keeping the whole heap.
    pub fn restrict(&self, vars: &[String]) -> Memory {
        let store = vars.iter().filter_map(|v| self.store.get(v).map(|x| (v.clone(), x.clone()))).collect();
        Memory { store, heap: self.heap.clone() }
    }
}

/// Isomorphism-invariant encoding of the heap reachable from a list of roots.
/// Two root lists have equal shapes iff the reachable heaps are isomorphic and
/// map the roots to corresponding nodes; in particular, aliasing between roots
/// is part of the shape.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Shape {
    pub roots: Vec<ShapeVal>,
    pub nodes: Vec<(String, Vec<ShapeVal>)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShapeVal {
    Int(BigInt),
    Null,
    Node(u32),
}

impl Shape {
    pub fn of(mem: &Memory, roots: &[&Value]) -> Shape {
        fn enc(v: &Value, index: &mut HashMap<usize, u32>, order: &mut Vec<usize>) -> ShapeVal {
            match v {
                Value::Int(i) => ShapeVal::Int(i.clone()),
                Value::Null => ShapeVal::Null,
                Value::Loc(l) => ShapeVal::Node(*index.entry(*l).or_insert_with(|| {
                    order.push(*l);
                    (order.len() - 1) as u32
                })),
            }
        }
        let mut index = HashMap::new();
        let mut order = Vec::new();
        let root_vals: Vec<ShapeVal> = roots.iter().map(|v| enc(v, &mut index, &mut order)).collect();
        let mut nodes = Vec::new();
        let mut i = 0;
        while i < order.len() {
            let obj = &mem.heap[order[i]];
            let fields = obj.fields.iter().map(|(_, v)| enc(v, &mut index, &mut order)).collect();
            nodes.push((obj.class.clone(), fields));
            i += 1;
        }
        Shape { roots: root_vals, nodes }
    }
}

/// Structural equality of two values living in possibly different memories:
/// equal integers, both null, or locations whose reachable heaps are
/// isomorphic with the two locations corresponding.
pub fn structurally_equal(m1: &Memory, v1: &Value, m2: &Memory, v2: &Value) -> bool {
    Shape::of(m1, &[v1]) == Shape::of(m2, &[v2])
}

/// True iff some cycle is reachable from `v`. Null and integers are acyclic.
pub fn value_is_cyclic(m: &Memory, v: &Value) -> bool {
    let Value::Loc(start) = v else { return false };
    // 0 = unvisited, 1 = on the DFS stack, 2 = done.
    let mut color = vec![0u8; m.heap.len()];
    let mut stack: Vec<(usize, usize)> = vec![(*start, 0)];
    color[*start] = 1;
    while let Some((node, fi)) = stack.pop() {
        let fields = &m.heap[node].fields;
        if fi < fields.len() {
            stack.push((node, fi + 1));
            if let Value::Loc(next) = fields[fi].1 {
                match color[next] {
                    1 => return true,
                    0 => {
                        color[next] = 1;
                        stack.push((next, 0));
                    }
                    _ => {}
                }
            }
        } else {
            color[node] = 2;
        }
    }
    false
}

pub fn is_cyclic(m: &Memory, var: &str) -> bool {
    m.get(var).map(|v| value_is_cyclic(m, v)).unwrap_or(false)
}

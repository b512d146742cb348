use crate::concrete::{arith, value_is_cyclic, Memory, Object, Shape, Value};
use crate::lang::BinOp;
use indexmap::IndexMap;
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;
use thiserror::Error;

/// An abstract value: a set of base atoms, encoded as a bit mask. Only masks
/// in the domain's carrier are fix-points of the closure.
pub type AbsValue = u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("unknown domain '{0}'")]
    Unknown(String),
    #[error("value {value} is outside the range of domain {domain}")]
    OutOfRange { domain: String, value: String },
    #[error("domain {domain} cannot abstract {what}")]
    Sort { domain: String, what: String },
    #[error("domain {0} has no arithmetic")]
    NoArithmetic(String),
    #[error("cannot combine domains {0} and {1}")]
    Incompatible(String, String),
    #[error("domain {domain} has no value named '{name}'")]
    UnknownValue { domain: String, name: String },
}

/// Which concrete values a domain abstracts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sort {
    Int,
    Ref,
    Any,
}

impl Sort {
    fn meet(self, other: Sort) -> Option<Sort> {
        match (self, other) {
            (Sort::Any, s) | (s, Sort::Any) => Some(s),
            (a, b) if a == b => Some(a),
            _ => None,
        }
    }

    pub fn admits(self, v: &Value) -> bool {
        match self {
            Sort::Any => true,
            Sort::Int => !v.is_ref(),
            Sort::Ref => v.is_ref(),
        }
    }
}

/// What a domain observes of a concrete value. Two values are indistinguishable
/// in a domain iff their observations are equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Obs {
    Atom(AbsValue),
    Int(BigInt),
    Shape(Shape),
}

#[derive(Debug)]
enum Kind {
    Top,
    Id(i64),
    Par,
    Sign,
    Zero,
    Null,
    Cyc,
    /// Atoms are the realised pairs of factor atoms.
    Product(Arc<Uco>, Arc<Uco>, Vec<(AbsValue, AbsValue)>),
}

/// The classification and arithmetic shared by a base domain and every domain
/// derived from it by dropping carrier elements.
#[derive(Debug)]
struct Base {
    kind: Kind,
    sort: Sort,
    atom_names: Vec<String>,
    /// `tables[op][i][j]`: atoms reachable by `a op b` with `a` in atom i and `b` in atom j.
    tables: Option<Vec<Vec<Vec<AbsValue>>>>,
}

impl Base {
    fn n_atoms(&self) -> usize {
        self.atom_names.len()
    }

    fn full(&self) -> AbsValue {
        full_mask(self.n_atoms())
    }

    /// Index of the base atom containing an integer; `None` when out of range.
    fn int_atom(&self, v: &BigInt) -> Option<usize> {
        match &self.kind {
            Kind::Top => Some(0),
            Kind::Id(b) => {
                let x = v.to_i64()?;
                (x.abs() <= *b).then(|| (x + b) as usize)
            }
            Kind::Par => Some(if (v % 2u32).is_zero() { 0 } else { 1 }),
            Kind::Sign => Some(if v.is_negative() {
                0
            } else if v.is_zero() {
                1
            } else {
                2
            }),
            Kind::Zero => Some(if v.is_zero() { 0 } else { 1 }),
            Kind::Null | Kind::Cyc => None,
            Kind::Product(a, b, pairs) => {
                let pa = a.alpha_int(v).ok()?;
                let pb = b.alpha_int(v).ok()?;
                pairs.iter().position(|p| *p == (pa, pb))
            }
        }
    }

    fn ref_atom(&self, mem: &Memory, v: &Value) -> Option<usize> {
        match &self.kind {
            Kind::Top => Some(0),
            Kind::Null => Some(if *v == Value::Null { 0 } else { 1 }),
            Kind::Cyc => Some(if value_is_cyclic(mem, v) { 1 } else { 0 }),
            Kind::Product(a, b, pairs) => {
                let pa = a.alpha_value(mem, v).ok()?;
                let pb = b.alpha_value(mem, v).ok()?;
                pairs.iter().position(|p| *p == (pa, pb))
            }
            _ => None,
        }
    }
}

fn full_mask(n: usize) -> AbsValue {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// A finite partitioning abstract domain. Elements are unions of base atoms
/// closed under intersection (a Moore family), ordered by inclusion.
#[derive(Debug, Clone)]
pub struct Uco {
    name: String,
    base: Arc<Base>,
    carrier: Vec<AbsValue>,
    names: IndexMap<AbsValue, String>,
}

impl PartialEq for Uco {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.carrier == other.carrier
    }
}

/// Integers used to realise atom pairs and to build operator tables.
pub fn sample_ints(bound: i64) -> Vec<BigInt> {
    let r = (2 * bound + 2).max(24);
    (-r..=r).map(BigInt::from).collect()
}

/// Small heaps used to realise reference atoms: null, an acyclic node and a
/// self-loop.
pub fn sample_refs() -> (Memory, Vec<Value>) {
    let mut m = Memory::new();
    let a = m.alloc(Object { class: "Sample".into(), fields: vec![("next".into(), Value::Null)] });
    let c = m.alloc(Object { class: "Sample".into(), fields: vec![("next".into(), Value::Null)] });
    m.heap[c].fields[0].1 = Value::Loc(c);
    (m, vec![Value::Null, Value::Loc(a), Value::Loc(c)])
}

fn moore_closure(gens: impl IntoIterator<Item = AbsValue>, full: AbsValue) -> Vec<AbsValue> {
    let mut set: BTreeSet<AbsValue> = gens.into_iter().collect();
    set.insert(0);
    set.insert(full);
    loop {
        let items: Vec<AbsValue> = set.iter().copied().collect();
        let mut added = false;
        for (i, a) in items.iter().enumerate() {
            for b in &items[i + 1..] {
                if set.insert(a & b) {
                    added = true;
                }
            }
        }
        if !added {
            break;
        }
    }
    let mut v: Vec<AbsValue> = set.into_iter().collect();
    v.sort_by_key(|m| (m.count_ones(), *m));
    v
}

impl Uco {
    fn from_base(name: &str, base: Base, carrier: Vec<AbsValue>, mut names: IndexMap<AbsValue, String>) -> Uco {
        let base = Arc::new(base);
        let mut carrier = carrier;
        carrier.sort_by_key(|m| (m.count_ones(), *m));
        carrier.dedup();
        names.entry(0).or_insert_with(|| "bot".into());
        names.entry(base.full()).or_insert_with(|| "top".into());
        for (i, n) in base.atom_names.iter().enumerate() {
            names.entry(1 << i).or_insert_with(|| n.clone());
        }
        let mut uco = Uco { name: name.to_string(), base, carrier, names: IndexMap::new() };
        uco.names = uco.carrier.iter().map(|m| (*m, names.get(m).cloned().unwrap_or_default())).collect();
        for m in uco.carrier.clone() {
            if uco.names[&m].is_empty() {
                let label = uco.atoms_below(m).iter().map(|a| uco.base.atom_names[*a].clone()).collect::<Vec<_>>();
                uco.names.insert(m, format!("{{{}}}", label.join("|")));
            }
        }
        uco
    }

    fn with_tables(mut base: Base, bound: i64) -> Base {
        if base.sort == Sort::Ref {
            return base;
        }
        let n = base.n_atoms();
        let full = base.full();
        let samples = sample_ints(bound);
        let atoms: Vec<Option<usize>> = samples.iter().map(|v| base.int_atom(v)).collect();
        let mut zero_atoms = 0u64;
        if let Some(z) = base.int_atom(&BigInt::zero()) {
            zero_atoms |= 1 << z;
        }
        let mut tables = vec![vec![vec![0u64; n]; n]; 5];
        for op in BinOp::ALL {
            let t = &mut tables[op.index()];
            for (a, ia) in samples.iter().zip(&atoms) {
                let Some(i) = ia else { continue };
                for (b, ib) in samples.iter().zip(&atoms) {
                    let Some(j) = ib else { continue };
                    if let Ok(r) = arith(op, a, b) {
                        t[*i][*j] |= match base.int_atom(&r) {
                            Some(k) => 1 << k,
                            None => full,
                        };
                    }
                }
            }
            if matches!(op, BinOp::Div | BinOp::Mod) {
                for row in t.iter_mut() {
                    for (j, cell) in row.iter_mut().enumerate() {
                        if zero_atoms & (1 << j) != 0 {
                            *cell = full;
                        }
                    }
                }
            }
        }
        base.tables = Some(tables);
        base
    }

    fn simple(name: &str, kind: Kind, sort: Sort, atoms: &[&str], extra: &[(&str, &[usize])], bound: i64) -> Uco {
        let base = Base { kind, sort, atom_names: atoms.iter().map(|s| s.to_string()).collect(), tables: None };
        let base = Uco::with_tables(base, bound);
        let full = base.full();
        let mut names = IndexMap::new();
        let mut gens: Vec<AbsValue> = (0..atoms.len()).map(|i| 1u64 << i).collect();
        for (n, idx) in extra {
            let m = idx.iter().fold(0u64, |m, i| m | (1 << i));
            gens.push(m);
            names.insert(m, n.to_string());
        }
        Uco::from_base(name, base, moore_closure(gens, full), names)
    }

    pub fn top_domain() -> Uco {
        Uco::simple("top", Kind::Top, Sort::Any, &["top"], &[], 4)
    }

    /// The identity on integers bounded to `[-bound, bound]` (flat lattice), and
    /// structural identity on references.
    pub fn id_domain(bound: i64) -> Uco {
        assert!((0..=31).contains(&bound), "identity bound must be within 0..=31");
        let names: Vec<String> = (-bound..=bound).map(|v| v.to_string()).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        Uco::simple("id", Kind::Id(bound), Sort::Any, &refs, &[], bound)
    }

    pub fn par_domain() -> Uco {
        Uco::simple("par", Kind::Par, Sort::Int, &["even", "odd"], &[], 4)
    }

    pub fn sign_domain() -> Uco {
        Uco::simple("sign", Kind::Sign, Sort::Int, &["neg", "zero", "pos"], &[], 4)
    }

    pub fn zero_domain() -> Uco {
        Uco::simple("zero", Kind::Zero, Sort::Int, &["zero", "nonzero"], &[], 4)
    }

    pub fn null_domain() -> Uco {
        Uco::simple("null", Kind::Null, Sort::Ref, &["null", "nonnull"], &[], 4)
    }

    pub fn cyc_domain() -> Uco {
        Uco::simple("cyc", Kind::Cyc, Sort::Ref, &["acyc", "cyc"], &[], 4)
    }

    /// The most precise domain refining both arguments: atoms are the
    /// realisable pairs of atoms, elements the intersections of lifted elements.
    pub fn reduced_product(d1: &Uco, d2: &Uco, name: &str) -> Result<Uco, DomainError> {
        let sort = d1
            .sort()
            .meet(d2.sort())
            .ok_or_else(|| DomainError::Incompatible(d1.name.clone(), d2.name.clone()))?;
        let mut pairs: Vec<(AbsValue, AbsValue)> = Vec::new();
        let mut record = |p: (AbsValue, AbsValue)| {
            if !pairs.contains(&p) {
                pairs.push(p)
            }
        };
        let bound = d1.int_bound().max(d2.int_bound());
        if sort != Sort::Ref {
            for v in sample_ints(bound) {
                if let (Ok(a), Ok(b)) = (d1.alpha_int(&v), d2.alpha_int(&v)) {
                    record((a, b));
                }
            }
        }
        if sort != Sort::Int {
            let (m, vs) = sample_refs();
            for v in &vs {
                if let (Ok(a), Ok(b)) = (d1.alpha_value(&m, v), d2.alpha_value(&m, v)) {
                    record((a, b));
                }
            }
        }
        pairs.sort_by_key(|(a, b)| (a.trailing_zeros(), b.trailing_zeros()));
        let n = pairs.len();
        let atom_names: Vec<String> = pairs
            .iter()
            .map(|(a, b)| {
                let (na, nb) = (d1.value_name(*a), d2.value_name(*b));
                if na == "top" {
                    nb
                } else if nb == "top" {
                    na
                } else {
                    format!("{nb}{na}")
                }
            })
            .collect();
        let lift1 = |e: AbsValue| pairs.iter().enumerate().filter(|(_, p)| p.0 & e == p.0).fold(0u64, |m, (i, _)| m | (1 << i));
        let lift2 = |e: AbsValue| pairs.iter().enumerate().filter(|(_, p)| p.1 & e == p.1).fold(0u64, |m, (i, _)| m | (1 << i));
        let full = full_mask(n);
        let mut names: IndexMap<AbsValue, String> = IndexMap::new();
        names.insert(0, "bot".into());
        names.insert(full, "top".into());
        let mut gens = Vec::new();
        for e in d1.carrier() {
            let m = lift1(*e);
            gens.push(m);
            names.entry(m).or_insert_with(|| d1.value_name(*e));
        }
        for e in d2.carrier() {
            let m = lift2(*e);
            gens.push(m);
            names.entry(m).or_insert_with(|| d2.value_name(*e));
        }
        let carrier = moore_closure(gens, full);
        for m in &carrier {
            if names.contains_key(m) {
                continue;
            }
            'search: for e1 in d1.carrier() {
                for e2 in d2.carrier() {
                    if lift1(*e1) & lift2(*e2) == *m {
                        names.insert(*m, format!("{}{}", d2.value_name(*e2), d1.value_name(*e1)));
                        break 'search;
                    }
                }
            }
        }
        for (i, an) in atom_names.iter().enumerate() {
            names.entry(1 << i).or_insert_with(|| an.clone());
        }
        let base = Base {
            kind: Kind::Product(Arc::new(d1.clone()), Arc::new(d2.clone()), pairs),
            sort,
            atom_names,
            tables: None,
        };
        let base = Uco::with_tables(base, bound);
        Ok(Uco::from_base(name, base, carrier, names))
    }

    /// A coarser domain keeping only the given elements of this one's carrier
    /// (they must be meet-closed and include bottom and top).
    pub fn restrict(&self, name: &str, keep: &[AbsValue]) -> Uco {
        let mut carrier: Vec<AbsValue> = keep.to_vec();
        carrier.sort_by_key(|m| (m.count_ones(), *m));
        carrier.dedup();
        let names = carrier.iter().map(|m| (*m, self.value_name(*m))).collect();
        Uco { name: name.to_string(), base: self.base.clone(), carrier, names }
    }

    pub fn rename(&self, name: &str) -> Uco {
        let mut d = self.clone();
        d.name = name.to_string();
        d
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sort(&self) -> Sort {
        self.base.sort
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.base.kind, Kind::Id(_)) && self.carrier.len() == self.base.n_atoms() + 2
    }

    pub fn is_top(&self) -> bool {
        self.carrier.len() <= 2
    }

    fn int_bound(&self) -> i64 {
        match &self.base.kind {
            Kind::Id(b) => *b,
            Kind::Product(a, b, _) => a.int_bound().max(b.int_bound()),
            _ => 0,
        }
    }

    pub fn has_arithmetic(&self) -> bool {
        self.base.tables.is_some()
    }

    pub fn top(&self) -> AbsValue {
        self.base.full()
    }

    pub fn bottom(&self) -> AbsValue {
        0
    }

    pub fn carrier(&self) -> &[AbsValue] {
        &self.carrier
    }

    pub fn contains(&self, v: AbsValue) -> bool {
        self.carrier.contains(&v)
    }

    pub fn leq(&self, a: AbsValue, b: AbsValue) -> bool {
        a & !b == 0
    }

    /// Least carrier element containing `m`.
    pub fn closure(&self, m: AbsValue) -> AbsValue {
        self.carrier.iter().copied().filter(|c| c & m == m).fold(self.top(), |acc, c| acc & c)
    }

    pub fn join(&self, a: AbsValue, b: AbsValue) -> AbsValue {
        self.closure(a | b)
    }

    pub fn meet(&self, a: AbsValue, b: AbsValue) -> AbsValue {
        a & b
    }

    pub fn atoms(&self) -> Vec<AbsValue> {
        self.carrier.iter().copied().filter(|m| self.is_atom(*m)).collect()
    }

    /// Minimal non-bottom elements of the carrier.
    pub fn is_atom(&self, v: AbsValue) -> bool {
        v != 0 && self.carrier.contains(&v) && !self.carrier.iter().any(|c| *c != 0 && *c != v && c & v == *c)
    }

    fn atoms_below(&self, m: AbsValue) -> Vec<usize> {
        (0..self.base.n_atoms()).filter(|i| m & (1 << i) != 0).collect()
    }

    /// Elements covered by `v` in the Hasse diagram.
    pub fn direct_subvalues(&self, v: AbsValue) -> Vec<AbsValue> {
        let below: Vec<AbsValue> = self.carrier.iter().copied().filter(|c| *c != v && c & v == *c).collect();
        below
            .iter()
            .copied()
            .filter(|c| !below.iter().any(|d| d != c && d & c == *c))
            .collect()
    }

    pub fn value_name(&self, v: AbsValue) -> String {
        self.names.get(&v).cloned().unwrap_or_else(|| {
            let c = self.closure(v);
            self.names.get(&c).cloned().unwrap_or_else(|| format!("#{v:x}"))
        })
    }

    pub fn value_by_name(&self, name: &str) -> Result<AbsValue, DomainError> {
        self.names
            .iter()
            .find(|(_, n)| n.as_str() == name)
            .map(|(m, _)| *m)
            .ok_or_else(|| DomainError::UnknownValue { domain: self.name.clone(), name: name.to_string() })
    }

    pub fn alpha_int(&self, v: &BigInt) -> Result<AbsValue, DomainError> {
        if self.sort() == Sort::Ref {
            return Err(DomainError::Sort { domain: self.name.clone(), what: "integers".into() });
        }
        match self.base.int_atom(v) {
            Some(i) => Ok(self.closure(1 << i)),
            None => Err(DomainError::OutOfRange { domain: self.name.clone(), value: v.to_string() }),
        }
    }

    /// Abstraction of a set of integers: the least element covering all of them.
    pub fn alpha_ints<'a>(&self, vs: impl IntoIterator<Item = &'a BigInt>) -> Result<AbsValue, DomainError> {
        let mut m = 0;
        for v in vs {
            m |= self.alpha_int(v)?;
        }
        Ok(self.closure(m))
    }

    /// Abstraction of a literal, falling back to top when out of range.
    pub fn alpha_literal(&self, v: &BigInt) -> AbsValue {
        self.alpha_int(v).unwrap_or(self.top())
    }

    pub fn alpha_value(&self, mem: &Memory, v: &Value) -> Result<AbsValue, DomainError> {
        match v {
            Value::Int(i) => self.alpha_int(i),
            _ => {
                if self.sort() == Sort::Int {
                    return Err(DomainError::Sort { domain: self.name.clone(), what: "references".into() });
                }
                match self.base.ref_atom(mem, v) {
                    Some(i) => Ok(self.closure(1 << i)),
                    None => Err(DomainError::Sort { domain: self.name.clone(), what: "reference values".into() }),
                }
            }
        }
    }

    /// The observation used to compare values: exact for the identity domain,
    /// the atom otherwise.
    pub fn observe(&self, mem: &Memory, v: &Value) -> Result<Obs, DomainError> {
        if let Kind::Id(_) = self.base.kind {
            if self.is_identity() {
                return Ok(match v {
                    Value::Int(i) => Obs::Int(i.clone()),
                    _ => Obs::Shape(Shape::of(mem, &[v])),
                });
            }
        }
        if !self.sort().admits(v) {
            let what = if v.is_ref() { "references" } else { "integers" };
            return Err(DomainError::Sort { domain: self.name.clone(), what: what.into() });
        }
        Ok(Obs::Atom(self.alpha_value(mem, v)?))
    }

    pub fn abs_op(&self, op: BinOp, a: AbsValue, b: AbsValue) -> Result<AbsValue, DomainError> {
        let Some(tables) = &self.base.tables else { return Err(DomainError::NoArithmetic(self.name.clone())) };
        if a == 0 || b == 0 {
            return Ok(0);
        }
        let t = &tables[op.index()];
        let mut m = 0;
        for i in self.atoms_below(a) {
            for j in self.atoms_below(b) {
                m |= t[i][j];
            }
        }
        Ok(self.closure(m))
    }

    /// Heap updates can change cyclicity of anything not known to be null.
    pub fn havoc_heap(&self, v: AbsValue) -> AbsValue {
        if self.sort() != Sort::Ref {
            return v;
        }
        let (m, samples) = sample_refs();
        let mut nonnull = 0u64;
        let mut only_null = 0u64;
        for s in &samples {
            if let Some(i) = self.base.ref_atom(&m, s) {
                if *s == Value::Null {
                    only_null |= 1 << i;
                } else {
                    nonnull |= 1 << i;
                }
            }
        }
        only_null &= !nonnull;
        let keep = v & only_null;
        let rest = v & !only_null;
        if rest == 0 {
            v
        } else {
            self.closure(keep | nonnull | rest)
        }
    }

    /// Maps each element name to its mask; used for display and tests.
    pub fn named_carrier(&self) -> Vec<(String, AbsValue)> {
        self.carrier.iter().map(|m| (self.value_name(*m), *m)).collect()
    }
}

/// `d1` is at least as precise as `d2`: equal observations under `d1` imply
/// equal observations under `d2`, on sample integers and sample heaps.
pub fn refines(d1: &Uco, d2: &Uco) -> bool {
    if d1.is_identity() || d2.is_top() {
        return true;
    }
    if d2.is_identity() {
        return d1.is_identity();
    }
    let bound = d1.int_bound().max(d2.int_bound());
    let mut map: HashMap<Obs, Obs> = HashMap::new();
    let mut check = |o1: Result<Obs, DomainError>, o2: Result<Obs, DomainError>| -> bool {
        match (o1, o2) {
            (Ok(a), Ok(b)) => match map.get(&a) {
                Some(prev) => *prev == b,
                None => {
                    map.insert(a, b);
                    true
                }
            },
            (Err(_), Ok(_)) => false,
            _ => true,
        }
    };
    for v in sample_ints(bound) {
        let v = Value::Int(v);
        let m = Memory::new();
        if !check(d1.observe(&m, &v), d2.observe(&m, &v)) {
            return false;
        }
    }
    let (m, vs) = sample_refs();
    for v in &vs {
        if !check(d1.observe(&m, v), d2.observe(&m, v)) {
            return false;
        }
    }
    true
}

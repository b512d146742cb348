use super::*;
use crate::domains::Library;
use crate::lang::parse_expr;

fn lib() -> Library {
    Library::default()
}

fn e(s: &str) -> Expr {
    parse_expr(s).unwrap()
}

fn set(vs: &[&str]) -> BTreeSet<String> {
    vs.iter().map(|v| v.to_string()).collect()
}

fn top() -> AbsState {
    AbsState::default()
}

#[test]
fn semantic_dependencies() {
    let ex = e("w + y + 2 * (x * x) - w");
    assert!(!sem_dep(&ex, "w", 4));
    let (m1, m2) = sem_dep_witness(&ex, "y", 4).unwrap();
    assert_ne!(eval_pure(&ex, &m1).unwrap(), eval_pure(&ex, &m2).unwrap());
    assert!(sem_dep(&ex, "x", 4));
    assert!(!sem_dep(&e("5"), "x", 4));
    assert!(!sem_dep(&e("x - x"), "x", 4));
    // Division by zero is skipped, not counted as a difference.
    assert!(sem_dep(&e("10 / x"), "x", 4));
}

#[test]
fn narrow_dependencies() {
    let l = lib();
    let par = l.get("par").unwrap();
    let sign = l.get("sign").unwrap();
    let ex = e("2 * (x * x) + y");
    assert!(!ndep(&ex, "x", &par, &DomainMap::uniform(par.clone()), None, 4));
    assert!(ndep(&ex, "y", &par, &DomainMap::uniform(par.clone()), None, 4));
    let (m1, m2) = ndep_witness(&ex, "x", &sign, &DomainMap::uniform(sign.clone()), None, 4).unwrap();
    let s1 = sign.alpha_int(&eval_pure(&ex, &m1).unwrap().as_int().unwrap().clone()).unwrap();
    let s2 = sign.alpha_int(&eval_pure(&ex, &m2).unwrap().as_int().unwrap().clone()).unwrap();
    assert_ne!(s1, s2);
    assert!(!ndep(&e("x"), "x", &l.top(), &DomainMap::uniform(l.id()), None, 4));
    // A predicate restricting y to be positive removes the sign dependency on x.
    let beta = crate::lang::parse_guard("y > 0").unwrap();
    assert!(!ndep(&ex, "x", &sign, &DomainMap::uniform(sign.clone()), Some(&beta), 4));
}

#[test]
fn atomic_dependencies() {
    let l = lib();
    let par = l.get("par").unwrap();
    let eta = DomainMap::uniform(par.clone());
    assert!(atom_dep(&e("x - x"), "x", &par, &eta, None, 4));
    assert!(!ndep(&e("x - x"), "x", &par, &eta, None, 4));
    assert!(!atom_dep(&e("5"), "x", &par, &eta, None, 4));
    assert!(atom_dep(&e("x + y"), "x", &par, &eta, None, 4));
    assert!(!atom_dep(&e("2 * x + y"), "x", &par, &eta, None, 4));
}

#[test]
fn find_ndeps_examples() {
    let l = lib();
    let par = l.get("par").unwrap();
    let sign = l.get("sign").unwrap();
    assert_eq!(find_ndeps(&e("2 * (x * x) + y"), &par, &top()), vec!["y"]);
    assert_eq!(find_ndeps(&e("2 * (x * x) + y"), &sign, &top()), vec!["x", "y"]);
    assert!(find_ndeps(&e("x * x + 1"), &sign, &top()).is_empty());
    assert_eq!(find_ndeps(&e("w + y + 2 * (x * x) - w"), &par, &top()), vec!["y"]);
    assert_eq!(find_ndeps(&e("x + y"), &par, &top()), vec!["x", "y"]);
}

#[test]
fn find_ndeps_uses_ambient_state() {
    let sign = lib().get("sign").unwrap();
    let mut amb = top();
    amb.set("y", sign.value_by_name("pos").unwrap());
    // With y known positive, 2x²+y is positive whatever x is.
    assert_eq!(find_ndeps(&e("2 * (x * x) + y"), &sign, &amb), Vec::<String>::new());
}

#[test]
fn atomicity_condition() {
    let l = lib();
    let sign = l.get("sign").unwrap();
    let par = l.get("par").unwrap();
    let sq = e("x * x + 1");
    let ev = Evaluator::new(&sq, &sign);
    let mut memo = HashMap::new();
    assert_eq!(ac(&ev, &[sign.top()], &[true], &mut memo), Some(sign.value_by_name("pos").unwrap()));
    let inc = e("x + 1");
    let ev = Evaluator::new(&inc, &par);
    assert_eq!(ac(&ev, &[par.top()], &[true], &mut HashMap::new()), None);
    let seven = e("7");
    let ev = Evaluator::new(&seven, &par);
    assert_eq!(ac(&ev, &[], &[], &mut HashMap::new()), Some(par.value_by_name("odd").unwrap()));
}

#[test]
fn edep_examples() {
    let l = lib();
    let par = l.get("par").unwrap();
    let x = set(&["x"]);
    let same = edep(&e("2 * (x * x) + y"), &par, &x, &top());
    assert_eq!(same.carrier(), par.carrier());
    let coarse = edep(&e("x + y"), &par, &x, &top());
    assert_eq!(coarse.carrier().len(), 2);
    assert!(edep_postcondition(&e("x + y"), &coarse, &x, &top()));
    assert!(!ndep(&e("x + y"), "x", &coarse, &DomainMap::uniform(coarse.clone()), None, 4));
    let t = edep(&e("x * y + z"), &l.top(), &x, &top());
    assert!(t.is_top());
    // Sign of x*y+z with x free: y = 0 keeps the sign of z, other cases do not.
    let sign = l.get("sign").unwrap();
    let r = edep(&e("x * y + z"), &sign, &x, &top());
    assert!(edep_postcondition(&e("x * y + z"), &r, &x, &top()));
}

#[test]
fn atomize_makes_value_atomic() {
    let ps = lib().get("parsign").unwrap();
    let even = ps.value_by_name("even").unwrap();
    let d = atomize(&ps, even, "evenatom");
    assert!(d.is_atom(even));
    let names: BTreeSet<String> = d.carrier().iter().map(|m| d.value_name(*m)).collect();
    assert!(names.contains("odd") && names.contains("posodd") && !names.contains("poseven"));
}

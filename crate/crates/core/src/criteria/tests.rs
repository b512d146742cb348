use super::*;
use crate::concrete::{parse_memory, DEFAULT_STEP_LIMIT};
use crate::lang::parse_program;

fn prog(name: &str) -> Program {
    let path = format!("{}/corpus/{name}.prog", env!("CARGO_MANIFEST_DIR"));
    parse_program(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn lib() -> Library {
    Library::default()
}

fn crit(text: &str, p: &Program) -> Criterion {
    parse_criterion(text, &p.classes).unwrap()
}

fn check(p: &Program, q: &Program, c: &Criterion) -> Verdict {
    is_slice(p, q, c, &lib(), DEFAULT_STEP_LIMIT).unwrap()
}

#[test]
fn file_round_trip() {
    let p = prog("sum_r");
    let text = "inputs=cond:n mod 4 = 0\nrange=n:0..8\nvars=s,i\nocc=7:N 3:{1,2}\nkl=true\nabs=s:par,i:sign\n";
    let c = crit(text, &p);
    assert_eq!(c.occ.len(), 2);
    assert_eq!(c.occ[1].iters, Iters::Set([1, 2].into_iter().collect()));
    assert_eq!(crit(&c.to_string(), &p), c);
    let grouped = crit("vars=u,v,w\nabs={u,v}:signprod, w:par\nheap=nodes:1,ints:0..2", &p);
    assert_eq!(grouped.abs[0], Group::Relational { vars: vec!["u".into(), "v".into()], rel: Relation::SignProd });
    assert_eq!(grouped.heap.field_ints.len(), 3);
    assert_eq!(crit(&grouped.to_string(), &p), grouped);
}

#[test]
fn file_errors() {
    let p = prog("sum_r");
    assert!(parse_criterion("occ=7:N", &p.classes).is_err());
    assert!(parse_criterion("vars=s\nfoo=1", &p.classes).is_err());
    assert!(parse_criterion("vars=s\nabs={s}:signprod", &p.classes).is_err());
    let bad_dom = crit("vars=s\nabs=s:interval", &p);
    assert!(matches!(bad_dom.resolve(&p, &lib()), Err(CriterionError::Domain(DomainError::Unknown(_)))));
    let bad_line = crit("vars=s\nocc=12:N", &p);
    assert_eq!(bad_line.resolve(&p, &lib()).unwrap_err(), CriterionError::UnknownLine(12));
    let overlap = crit("vars=s,i\nabs=s:par,{s,i}:parsum", &p);
    assert!(matches!(overlap.resolve(&p, &lib()), Err(CriterionError::Overlap(_))));
    let sort = crit("vars=x\nabs=x:par", &prog("nullity"));
    assert!(sort.resolve(&prog("nullity"), &lib()).is_err());
}

#[test]
fn relational_restriction() {
    let p = parse_program("x1 := x1; x2 := x2; x3 := x3; x4 := x4;").unwrap();
    let c = crit("vars=x1,x2,x3\nabs={x1,x2}:signprod,x3:par", &p);
    let groups = c.resolve(&p, &lib()).unwrap();
    let m = Memory::with_ints(&[("x1", 1), ("x2", 2), ("x3", 3), ("x4", 4)]);
    let rendered: Vec<String> = groups.iter().zip(abstract_restrict(&m, &groups)).map(|(g, o)| g.render(&o)).collect();
    assert_eq!(rendered, vec!["pos", "odd"]);
}

#[test]
fn parity_projection_and_equivalence() {
    let (p, q) = (prog("parity_p"), prog("parity_q"));
    let c = crit("range=n:0..4,s:-2..3\nvars=s\nocc=7:N\nabs=s:par", &p);
    let groups = c.resolve(&p, &lib()).unwrap();
    let par = lib().get("par").unwrap();
    for n in 0..=4 {
        for s in -2..=3 {
            let t = run(&p, &Memory::with_ints(&[("n", n), ("s", s)]), DEFAULT_STEP_LIMIT);
            let proj = project(&t, &c.occ, &groups, &BTreeSet::new());
            let expected = Obs::Atom(par.alpha_int(&BigInt::from(s)).unwrap());
            assert_eq!(proj, vec![Entry::Observed { point: Point::Line(7), iter: 1, obs: vec![expected] }]);
        }
    }
    assert!(check(&p, &q, &c).holds());
    // With the exact value of s observed, the loop matters.
    assert!(!check(&p, &q, &c.identity()).holds());
}

#[test]
fn conditioned_but_not_static() {
    let (r, s) = (prog("sum_r"), prog("sum_s"));
    let cond = crit("inputs=cond:n mod 4 = 0\nrange=n:0..8\nvars=s\nocc=7:N\nabs=s:par", &r);
    assert_eq!(cond.input_set(&[&r, &s], 4).len(), 3);
    assert!(check(&r, &s, &cond).holds());
    let stat = crit("range=n:0..5\nvars=s\nocc=7:N\nabs=s:par", &r);
    match check(&r, &s, &stat) {
        Verdict::Counterexample { input, .. } => {
            let n = input.int("n").unwrap().clone();
            assert!(n.clone() % 4 != BigInt::from(0), "counterexample n = {n}");
        }
        v => panic!("expected a counterexample, got {v}"),
    }
}

#[test]
fn fig1_slices() {
    let p = prog("fig1");
    let c = crit("range=a:-2..2,b:-2..2,c:-2..2,e:-2..2\nvars=d\nocc=end\nabs=d:par", &p);
    assert_eq!(c.input_set(&[&p, &prog("fig1_s")], 4).len(), 625);
    assert!(check(&p, &prog("fig1_s"), &c).holds());
    assert!(check(&p, &prog("fig1_r"), &c).holds());
    assert!(check(&p, &prog("fig1_r"), &c.identity()).holds());
    assert!(!check(&p, &prog("fig1_s"), &c.identity()).holds());
    assert!(check(&p, &p, &c).holds());
}

#[test]
fn dynamic_occurrence_criteria() {
    let (left, middle, right) = (prog("crit_left"), prog("crit_middle"), prog("crit_right"));
    let n2 = Inputs::List(vec![Memory::with_ints(&[("n", 2)])]);
    let at3 = Criterion::new(&["x"]).at(vec![Occurrence { point: Point::Line(3), iters: Iters::Set([2].into()) }]);
    assert!(!check(&left, &right, &at3.clone().with_inputs(n2.clone())).holds());
    let at11 = Criterion::new(&["x"]).at(vec![Occurrence::every(Point::Line(11))]).with_inputs(n2);
    assert!(check(&left, &middle, &at11.clone().with_kl(true)).holds());
    assert!(check(&left, &middle, &at11).holds());
}

#[test]
fn kl_markers_distinguish_paths() {
    let (p, q) = (prog("kl"), prog("kl_q"));
    let c = Criterion::new(&["x"]).at(vec![Occurrence::every(Point::Line(8))]);
    assert!(check(&p, &q, &c).holds());
    assert!(!check(&p, &q, &c.with_kl(true)).holds());
}

#[test]
fn step_limits() {
    let p = parse_program("read(n); while (n > 0) { n := n + 1; } x := 1;").unwrap();
    let q = parse_program("read(n); x := 1;").unwrap();
    let c = Criterion::new(&["x"]).range("n", 0, 1);
    assert!(matches!(equivalent(&p, &q, &c, &lib(), 100).unwrap(), Verdict::Inconclusive { .. }));
    let c0 = Criterion::new(&["x"]).range("n", 1, 2);
    assert!(matches!(equivalent(&p, &p, &c0, &lib(), 100).unwrap(), Verdict::Equivalent { checked: 0, skipped: 2 }));
}

#[test]
fn runtime_errors_are_outcomes() {
    let p = parse_program("read(y); z := 10 / y; x := 1;").unwrap();
    let q = parse_program("1: read(y); 3: x := 1;").unwrap();
    assert!(!check(&p, &q, &Criterion::new(&["x"])).holds());
    let v = check(&p, &q, &Criterion::new(&["x"]).range("y", 1, 3));
    assert!(v.holds(), "{v}");
}

#[test]
fn reference_observations() {
    let p = prog("nullity");
    let q = p.retain_lines(&|l| l != 9 && l != 10);
    let c = crit("range=n:-4..4\nvars=x\nabs=x:null", &p);
    assert!(check(&p, &q, &c).holds());
    // Dropping line 9 keeps the final nullity but not n.
    let cn = crit("range=n:-4..4\nvars=n", &p);
    assert!(!check(&p, &q, &cn).holds());
}

#[test]
fn subsumption() {
    let p = prog("parity_p");
    let l = lib();
    let dynamic = crit("inputs=list:n=2, s=1\nvars=s\nocc=7:N\nabs=s:par", &p);
    let exact = crit("vars=s\nocc=7:N", &p);
    assert!(criterion_subsumes(&dynamic, &exact, &p, &l).unwrap());
    assert!(!criterion_subsumes(&exact, &dynamic, &p, &l).unwrap());
    assert!(criterion_subsumes(&exact, &exact, &p, &l).unwrap());
    assert!(!criterion_subsumes(&exact.clone().with_kl(true), &exact, &p, &l).unwrap());
    let narrow = crit("range=n:0..2\nvars=s\nocc=7:N", &p);
    assert!(criterion_subsumes(&narrow, &exact, &p, &l).unwrap());
    assert!(!criterion_subsumes(&exact, &narrow, &p, &l).unwrap());
    let some_iters = crit("vars=i\nocc=5:{1,3}", &p);
    let all_iters = crit("vars=i,s\nocc=5:N", &p);
    assert!(criterion_subsumes(&some_iters, &all_iters, &p, &l).unwrap());
    assert!(!criterion_subsumes(&all_iters, &some_iters, &p, &l).unwrap());
    let sum = crit("vars=i,s\nocc=7:N\nabs={i,s}:parsum", &p);
    let pars = crit("vars=i,s\nocc=7:N\nabs=i:parsign,s:par", &p);
    assert!(criterion_subsumes(&sum, &pars, &p, &l).unwrap());
    assert!(!criterion_subsumes(&pars, &sum, &p, &l).unwrap());
    // The lemma's consequence on a concrete pair: Q is an exact slice for the
    // dynamic criterion, hence also for the subsumed one.
    let q = prog("parity_q");
    assert!(check(&p, &q, &dynamic).holds());
}

#[test]
fn identity_projection_matches_exact_projection() {
    let p = prog("list_insert");
    let c = crit("range=elem:0..1,pos:0..2\nheap=nodes:2,ints:0..1\nvars=list,x,pos\nocc=40:N end", &p);
    let groups = c.resolve(&p, &lib()).unwrap();
    let inputs = c.input_set(&[&p], 4);
    let runs: Vec<Trajectory> = inputs.iter().take(60).map(|m| run(&p, m, DEFAULT_STEP_LIMIT)).collect();
    let none = BTreeSet::new();
    for a in &runs {
        for b in &runs {
            let abs_eq = project(a, &c.occ, &groups, &none) == project(b, &c.occ, &groups, &none);
            let ca = concrete_project(a, &c.vars, &c.occ, &none);
            let cb = concrete_project(b, &c.vars, &c.occ, &none);
            assert_eq!(abs_eq, concrete_projections_equal(&ca, &cb, &c.vars));
        }
    }
}

#[test]
fn explicit_inputs_with_heap() {
    let p = prog("list_insert");
    let m = parse_memory("list=obj:Node{val=1, next=null}, elem=0, pos=1", &p.classes).unwrap();
    let c = Criterion::new(&["list"]).with_inputs(Inputs::List(vec![m]));
    assert!(check(&p, &p, &c).holds());
}

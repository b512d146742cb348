//! The randomized property suites. Each returns the failure message of the
//! first counterexample proptest finds, after shrinking.

use super::{expr, guard, program, program_and_subprogram, INT_DOMS, VARS};
use absslice::absint::{abs_eval, AbsState, DomainMap};
use absslice::agreements::{Agreement, Mode, Predicate, Prover};
use absslice::concrete::{arith, eval_guard_pure, eval_pure, exec, run, Memory, Outcome, Value};
use absslice::criteria::{
    concrete_project, concrete_projections_equal, criterion_subsumes, is_slice, project, Criterion, Iters, Occurrence, Point,
};
use absslice::deps::{atom_dep, atomize, edep, find_ndeps, ndep};
use absslice::domains::{AbsValue, Library, Obs, Sort, Uco};
use absslice::lang::{parse_expr, parse_guard, program_to_string, BinOp, Expr, Line};
use absslice::pdg::{build_pdg, FlowKind};
use num_bigint::BigInt;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

pub const CASES: u32 = 1000;

fn run_suite<S: Strategy>(cases: u32, strat: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strat, test).map_err(|e| e.to_string())
}

fn grid(vars: &[String], bound: i64) -> Vec<Memory> {
    let mut out = vec![Memory::new()];
    for v in vars {
        out = out
            .into_iter()
            .flat_map(|m| {
                (-bound..=bound).map(move |k| {
                    let mut m = m.clone();
                    m.set(v, Value::int(k));
                    m
                })
            })
            .collect();
    }
    out
}

fn observe(d: &Uco, mem: &Memory, v: &Value) -> Obs {
    d.observe(mem, v).expect("integer observation")
}

/// No two grid states that agree on the `eta`-observations of every
/// variable but `x` give `e` different `rho`-observations.
fn brute_force_independent(e: &Expr, x: &str, rho: &Uco, eta: &Uco, bound: i64) -> bool {
    let vars: Vec<String> = e.vars_ordered();
    let mut seen: HashMap<Vec<Obs>, Obs> = HashMap::new();
    for m in grid(&vars, bound) {
        let Ok(v) = eval_pure(e, &m) else { continue };
        // Bounded identity domains have no atom for values outside their range.
        let Ok(out) = rho.observe(&m, &v) else { continue };
        let key: Vec<Obs> = vars.iter().filter(|w| *w != x).map(|w| observe(eta, &m, m.get(w).unwrap())).collect();
        if let Some(prev) = seen.insert(key, out.clone()) {
            if prev != out {
                return false;
            }
        }
    }
    true
}

fn int_domain(lib: &Library) -> impl Strategy<Value = Arc<Uco>> {
    let lib = lib.clone();
    proptest::sample::select(&INT_DOMS[..]).prop_map(move |n| lib.get(n).unwrap())
}

/// Closure, partition and operator-soundness laws of library domains and of
/// domains derived from them by atomization.
pub fn uco_laws(cases: u32) -> Result<(), String> {
    let lib = Library::new(4);
    let names: Vec<String> = lib.names().into_iter().map(str::to_string).collect();
    let strat = (
        proptest::sample::select(names),
        any::<bool>(),
        any::<u64>(),
        any::<u64>(),
        any::<prop::sample::Index>(),
        -8i64..=8,
        -8i64..=8,
        proptest::sample::select(&[BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Mod][..]),
    );
    run_suite(cases, strat, |(name, derive, m1, m2, pick, a, b, op)| {
        let base = lib.get(&name).unwrap();
        let d = if derive {
            let c = base.carrier();
            Arc::new(atomize(&base, c[pick.index(c.len())], "derived"))
        } else {
            base
        };
        let top = d.top();
        let (m1, m2) = (m1 & top, m1 & m2 & top);
        let c1 = d.closure(m1);
        prop_assert!(d.contains(c1));
        prop_assert_eq!(c1 & m1, m1, "extensive");
        prop_assert_eq!(d.closure(c1), c1, "idempotent");
        prop_assert_eq!(d.closure(m2) & !c1, 0, "monotone");
        // Moore family: closed under meets.
        let (x, y) = (d.closure(m2), d.closure(m1 ^ m2));
        prop_assert!(d.contains(x & y));
        // Atoms partition the top element.
        let atoms = d.atoms();
        for (i, p) in atoms.iter().enumerate() {
            for q in &atoms[i + 1..] {
                prop_assert_eq!(p & q, 0, "overlapping atoms");
            }
        }
        prop_assert_eq!(atoms.iter().fold(0, |acc, a| acc | a), top, "atoms do not cover");
        if d.sort() != Sort::Ref {
            let (ba, bb) = (BigInt::from(a), BigInt::from(b));
            if let Ok(va) = d.alpha_int(&ba) {
                prop_assert!(d.is_atom(va), "alpha of {} is not an atom", a);
                prop_assert_eq!(atoms.iter().filter(|t| **t & va != 0).count(), 1);
                if let (Ok(vb), Ok(r)) = (d.alpha_int(&bb), arith(op, &ba, &bb)) {
                    if let (Ok(vr), Ok(abs)) = (d.alpha_int(&r), d.abs_op(op, va, vb)) {
                        prop_assert!(d.leq(vr, abs), "{} {} {} in {}: {:x} not below {:x}", a, op.symbol(), b, d.name(), vr, abs);
                    }
                }
            }
        }
        Ok(())
    })
}

/// A narrow dependency is always an atomic one.
pub fn ndep_implies_atom_dep(cases: u32) -> Result<(), String> {
    let lib = Library::new(4);
    let strat = (expr(&VARS), proptest::sample::select(&VARS[..]), int_domain(&lib), int_domain(&lib));
    run_suite(cases, strat, |(text, x, rho, eta)| {
        let e = parse_expr(&text).unwrap();
        let eta = DomainMap::uniform(eta);
        if ndep(&e, x, &rho, &eta, None, 2) {
            prop_assert!(atom_dep(&e, x, &rho, &eta, None, 2), "{} on {} in {}", text, x, rho.name());
        }
        Ok(())
    })
}

/// Every variable `find_ndeps` leaves out is independent on the grid.
pub fn find_ndeps_sound(cases: u32) -> Result<(), String> {
    let lib = Library::new(4);
    let strat = (expr(&VARS), int_domain(&lib));
    run_suite(cases, strat, |(text, rho)| {
        let e = parse_expr(&text).unwrap();
        let relevant = find_ndeps(&e, &rho, &AbsState::default());
        for x in e.vars_ordered() {
            if !relevant.contains(&x) {
                prop_assert!(brute_force_independent(&e, &x, &rho, &rho, 3), "{} depends on {} in {}", text, x, rho.name());
            }
        }
        Ok(())
    })
}

/// Atomic abstract states outside `x`, with the `x` variables at top.
fn atomic_states(vars: &[String], x: &BTreeSet<String>, d: &Uco) -> Vec<AbsState> {
    let mut out = vec![AbsState::default()];
    for v in vars {
        let choices: Vec<AbsValue> = if x.contains(v) { vec![d.top()] } else { d.atoms() };
        out = out
            .into_iter()
            .flat_map(|s| {
                choices.iter().map(move |a| {
                    let mut s = s.clone();
                    s.set(v, *a);
                    s
                })
            })
            .collect();
    }
    out
}

/// The domain `edep` returns coarsens the input and makes `e` independent
/// of the chosen variables, both abstractly and on the concrete grid.
pub fn edep_non_dependency(cases: u32) -> Result<(), String> {
    let lib = Library::new(4);
    let strat = (expr(&VARS), int_domain(&lib), prop::collection::vec(any::<bool>(), 3));
    run_suite(cases, strat, |(text, rho0, mask)| {
        let e = parse_expr(&text).unwrap();
        let vars = e.vars_ordered();
        let x: BTreeSet<String> = vars.iter().zip(&mask).filter(|(_, k)| **k).map(|(v, _)| v.clone()).collect();
        if x.is_empty() {
            return Ok(());
        }
        let out = edep(&e, &rho0, &x, &AbsState::default());
        prop_assert!(out.carrier().iter().all(|c| rho0.contains(*c)), "not a coarsening");
        let doms = DomainMap::uniform(out.clone());
        for s in atomic_states(&vars, &x, &out) {
            let v = abs_eval(&e, &s, &doms, &out);
            prop_assert!(v == 0 || out.is_atom(v), "{}: non-atomic {:x}", text, v);
        }
        for v in &x {
            prop_assert!(brute_force_independent(&e, v, &out, &out, 3), "{} still depends on {}", text, v);
        }
        Ok(())
    })
}

fn agreement_strategy(lib: &Library) -> impl Strategy<Value = Agreement> {
    let _ = lib;
    (prop::collection::vec(proptest::sample::select(&INT_DOMS[..]), 3), prop::option::of(guard(&VARS))).prop_map(|(doms, g)| {
        let mut a = Agreement::new();
        for (v, d) in VARS.iter().zip(doms) {
            a.set(v, d);
        }
        if let Some(g) = g {
            a.add_guard(parse_guard(&g).unwrap());
        }
        a
    })
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
enum Key {
    Obs(Vec<Obs>, Vec<Option<bool>>),
    Error,
}

fn key(g: &Agreement, lib: &Library, mem: &Memory) -> Key {
    let obs = g
        .doms
        .iter()
        .map(|(v, d)| {
            let val = mem.get(v).cloned().unwrap_or(Value::int(0));
            observe(&lib.get(d).unwrap(), mem, &val)
        })
        .collect();
    let guards = g.guards.values().map(|b| eval_guard_pure(b, mem).ok()).collect();
    Key::Obs(obs, guards)
}

/// Preconditions computed by the labelling rules make the triple hold:
/// both through the library's checker and by pairwise brute force.
pub fn preconditions_are_sound(cases: u32) -> Result<(), String> {
    let lib = Library::new(2);
    let strat = (program(), agreement_strategy(&lib));
    run_suite(cases, strat, |(p, post)| {
        let pr = Prover::new(&p, &lib, Mode::Abstract).with_step_limit(500);
        let truth = Predicate::truth();
        let pre = pr.pre_seq(&p.body, &post, &truth, None);
        prop_assert!(pr.check_triple(&pre, &truth, &p.body, &post), "checker rejects {} for {} on\n{}", pre, post, program_to_string(&p));
        let mut vars: BTreeSet<String> = p.vars.keys().cloned().collect();
        vars.extend(VARS.iter().map(|v| v.to_string()));
        let vars: Vec<String> = vars.into_iter().collect();
        let mut seen: HashMap<Key, Key> = HashMap::new();
        for m in grid(&vars, 2) {
            let after = match exec(&p.body, m.clone(), &p.classes, 500) {
                Outcome::Done(out) => key(&post, &lib, &out),
                Outcome::Error(_) => Key::Error,
                Outcome::StepLimit => continue,
            };
            if let Some(prev) = seen.insert(key(&pre, &lib, &m), after.clone()) {
                prop_assert!(prev == after, "pre {} does not determine post {} on\n{}", pre, post, program_to_string(&p));
            }
        }
        Ok(())
    })
}

fn criterion_strategy(lines: Vec<Line>) -> impl Strategy<Value = Criterion> {
    let point = prop_oneof![
        2 => Just(Point::End),
        1 => proptest::sample::select(lines).prop_map(Point::Line),
    ];
    (
        prop::collection::vec(prop::option::of(proptest::sample::select(&["id", "par", "sign", "zero", "parsign", "top"][..])), 3),
        point,
        prop::option::of(-1i64..=1),
    )
        .prop_map(|(doms, point, lo)| {
            let vars: Vec<&str> = VARS.iter().zip(&doms).filter(|(_, d)| d.is_some()).map(|(v, _)| *v).collect();
            let vars = if vars.is_empty() { vec!["x"] } else { vars };
            let mut c = Criterion::new(&vars).at(vec![Occurrence::every(point)]);
            for (v, d) in VARS.iter().zip(&doms) {
                if let Some(d) = d {
                    c = c.abstracted(v, d);
                }
            }
            if let Some(lo) = lo {
                c = c.range("x", lo, 2);
            }
            c
        })
}

/// A coarsened copy of `c`: fewer variables, coarser domains, fewer inputs.
fn weaken(c: &Criterion, drop: &[bool], coarse: &[bool], narrow: bool) -> Criterion {
    let coarser = |d: &str| match d {
        "id" => "parsign",
        "parsign" => "par",
        "sign" => "zero",
        _ => "top",
    };
    let mut vars: Vec<&str> = c.vars.iter().map(String::as_str).collect();
    let kept: Vec<&str> = vars.iter().zip(drop).filter(|(_, d)| !**d).map(|(v, _)| *v).collect();
    if !kept.is_empty() {
        vars = kept;
    }
    let mut w = Criterion::new(&vars).at(c.occ.clone());
    for v in &vars {
        let d = c.abs.iter().find_map(|g| match g {
            absslice::criteria::Group::Single { var, domain } if var == v => Some(domain.as_str()),
            _ => None,
        });
        let i = VARS.iter().position(|x| x == v).unwrap();
        let d = d.unwrap_or("id");
        w = w.abstracted(v, if coarse[i] { coarser(d) } else { d });
    }
    w.ranges = c.ranges.clone();
    if narrow {
        w = w.range("y", 0, 1);
    }
    w
}

/// Subsumption transfers slices: a slice for the stronger criterion is a
/// slice for the weaker one.
pub fn subsumption_transfers_slices(cases: u32) -> Result<(), String> {
    let lib = Library::new(2);
    let premises = AtomicUsize::new(0);
    let strat = program_and_subprogram().prop_flat_map(|(p, q)| {
        let lines: Vec<Line> = p.lines().into_iter().collect();
        (
            Just(p),
            Just(q),
            criterion_strategy(lines.clone()),
            prop::option::of(criterion_strategy(lines)),
            prop::collection::vec(any::<bool>(), 3),
            prop::collection::vec(any::<bool>(), 3),
            any::<bool>(),
            any::<bool>(),
        )
    });
    let res = run_suite(cases, strat, |(p, q, c2, other, drop, coarse, narrow, use_pdg)| {
        let c1 = other.unwrap_or_else(|| weaken(&c2, &drop, &coarse, narrow));
        // Half of the candidates are dependence-graph slices, which often
        // satisfy the stronger criterion.
        let q = if use_pdg && c2.occ[0].point == Point::End {
            let keep = build_pdg(&p).slice_for(&c2.vars, None, FlowKind::Syntactic).unwrap();
            p.retain_lines(&|l| keep.contains(&l))
        } else {
            q
        };
        if !criterion_subsumes(&c1, &c2, &p, &lib).unwrap() {
            return Ok(());
        }
        if is_slice(&p, &q, &c2, &lib, 500).unwrap().holds() {
            premises.fetch_add(1, Ordering::Relaxed);
            let v = is_slice(&p, &q, &c1, &lib, 500).unwrap();
            prop_assert!(v.holds(), "{}", v);
        }
        Ok(())
    });
    res?;
    let n = premises.load(Ordering::Relaxed);
    if n < cases as usize / 10 {
        return Err(format!("only {n} of {cases} cases exercised the implication"));
    }
    Ok(())
}

/// Projections through the identity abstraction compare exactly like
/// concrete projections.
pub fn identity_projection_is_concrete(cases: u32) -> Result<(), String> {
    let lib = Library::new(2);
    let strat = program_and_subprogram().prop_flat_map(|(p, q)| {
        let mut points: Vec<Point> = p.lines().into_iter().map(Point::Line).collect();
        points.push(Point::End);
        let occ = prop::collection::vec(
            (proptest::sample::select(points), prop::option::of(prop::collection::btree_set(1u32..=3, 1..3))),
            1..3,
        );
        (Just(p), Just(q), occ, prop::collection::vec(-2i64..=2, 3), prop::collection::vec(any::<bool>(), 3), any::<bool>())
    });
    run_suite(cases, strat, |(p, q, occ, vals, pick, kl)| {
        let occ: Vec<Occurrence> = occ
            .into_iter()
            .map(|(point, its)| match (point, its) {
                (Point::End, _) | (_, None) => Occurrence::every(point),
                (_, Some(ks)) => Occurrence { point, iters: Iters::Set(ks) },
            })
            .collect();
        let mut vars: Vec<&str> = VARS.iter().zip(&pick).filter(|(_, k)| **k).map(|(v, _)| *v).collect();
        if vars.is_empty() {
            vars.push("y");
        }
        let c = Criterion::new(&vars).at(occ.clone()).with_kl(kl);
        let groups = c.resolve(&p, &lib).unwrap();
        let markers: BTreeSet<Line> = if kl { p.lines().intersection(&q.lines()).copied().collect() } else { BTreeSet::new() };
        let mut input = Memory::new();
        for (v, k) in VARS.iter().zip(&vals) {
            input.set(v, Value::int(*k));
        }
        let (tp, tq) = (run(&p, &input, 500), run(&q, &input, 500));
        let abs_equal = project(&tp, &occ, &groups, &markers) == project(&tq, &occ, &groups, &markers);
        let names: Vec<String> = vars.iter().map(|v| v.to_string()).collect();
        let conc_equal = concrete_projections_equal(
            &concrete_project(&tp, &names, &occ, &markers),
            &concrete_project(&tq, &names, &occ, &markers),
            &names,
        );
        prop_assert_eq!(abs_equal, conc_equal);
        Ok(())
    })
}

pub type Suite = fn(u32) -> Result<(), String>;

pub fn all() -> Vec<(&'static str, Suite)> {
    vec![
        ("uco closure, partition and operator laws", uco_laws),
        ("narrow dependency implies atomic dependency", ndep_implies_atom_dep),
        ("find_ndeps over-approximates narrow dependency", find_ndeps_sound),
        ("edep removes the dependency", edep_non_dependency),
        ("computed preconditions satisfy their triples", preconditions_are_sound),
        ("subsumption transfers slices", subsumption_transfers_slices),
        ("identity projection equals concrete projection", identity_projection_is_concrete),
    ]
}

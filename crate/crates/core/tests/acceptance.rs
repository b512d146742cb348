//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any of them does.

mod common;

use absslice::absint::{infer_invariants, uniform_map, AbsState};
use absslice::agreements::{parse_agreement, Mode, Predicate, Prover};
use absslice::concrete::{run, Memory, DEFAULT_STEP_LIMIT};
use absslice::criteria::{is_slice, parse_criterion, Criterion, Verdict};
use absslice::deps::{find_ndeps, sem_dep};
use absslice::domains::Library;
use absslice::lang::{parse_expr, parse_program, Line, Program};
use absslice::pdg::{build_pdg, build_semantic_pdg, EdgeKind, FlowKind, Node};
use absslice::slicer::{abstract_slice, concrete_slice, verify_slice, SliceError, SliceOptions};
use common::{corpus, corpus_text, suites};
use num_bigint::BigInt;
use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};

type Check = Result<(), String>;
type CheckFn = fn() -> Check;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lines(xs: &[Line]) -> BTreeSet<Line> {
    xs.iter().copied().collect()
}

fn crit(file: &str, p: &Program) -> Criterion {
    parse_criterion(&corpus_text(file), &p.classes).unwrap()
}

fn parity(v: &BigInt) -> bool {
    v % 2 != BigInt::from(0)
}

/// Parity of `var` at every visit of `line` (or at the end when `line` is None).
fn parities(p: &Program, input: &Memory, var: &str, line: Option<Line>) -> Vec<bool> {
    let t = run(p, input, DEFAULT_STEP_LIMIT);
    match line {
        None => vec![parity(t.final_mem.expect("run completes").int(var).unwrap())],
        Some(l) => t.states.iter().filter(|s| s.point == l).map(|s| parity(s.mem.int(var).unwrap())).collect(),
    }
}

fn fig1_parity_slice() -> Check {
    let p = corpus("fig1");
    let c = crit("par_d.crit", &p);
    let lib = Library::default();
    let out = abstract_slice(&p, &c, &lib, &SliceOptions::default()).map_err(|e| e.to_string())?;
    ensure(out.kept == lines(&[2, 5]), || format!("abstract slice kept {:?}", out.kept))?;
    let conc = concrete_slice(&p, &c, &lib, &SliceOptions::default()).map_err(|e| e.to_string())?;
    ensure(conc.kept == lines(&[2, 3, 5]), || format!("identity slice kept {:?}", conc.kept))?;
    ensure(out.kept.is_subset(&conc.kept) && out.kept.len() < conc.kept.len(), || "not strictly smaller".into())?;
    // Direct check: parity of d agrees on the whole input box.
    for a in -2..=2 {
        for b in -2..=2 {
            for cc in -2..=2 {
                for e in -2..=2 {
                    let m = Memory::with_ints(&[("a", a), ("b", b), ("c", cc), ("e", e)]);
                    let (x, y) = (parities(&p, &m, "d", None), parities(&out.slice, &m, "d", None));
                    ensure(x == y, || format!("parity of d differs at a={a} b={b} c={cc} e={e}"))?;
                }
            }
        }
    }
    Ok(())
}

fn parity_loop_equivalence() -> Check {
    let (p, q) = (corpus("parity_p"), corpus("parity_q"));
    let c = crit("par_s.crit", &p);
    let v = verify_slice(&p, &q, &c, &Library::default(), DEFAULT_STEP_LIMIT).map_err(|e| e.to_string())?;
    ensure(v.holds(), || v.to_string())?;
    for n in 0..=4 {
        for s in -2..=3 {
            let m = Memory::with_ints(&[("n", n), ("s", s)]);
            let (x, y) = (parities(&p, &m, "s", Some(7)), parities(&q, &m, "s", Some(7)));
            ensure(x == y && x.len() == 1, || format!("parity of s at line 7 differs for n={n} s={s}"))?;
        }
    }
    Ok(())
}

fn conditioned_equivalence() -> Check {
    let (r, s) = (corpus("sum_r"), corpus("sum_s"));
    let lib = Library::default();
    let cond = crit("par_s_mod4.crit", &r);
    let inputs = cond.input_set(&[&r, &s], 4);
    let ns: BTreeSet<BigInt> = inputs.iter().map(|m| m.int("n").unwrap().clone()).collect();
    ensure(ns == [0, 4, 8].into_iter().map(BigInt::from).collect(), || format!("conditioned inputs {ns:?}"))?;
    let v = verify_slice(&r, &s, &cond, &lib, DEFAULT_STEP_LIMIT).map_err(|e| e.to_string())?;
    ensure(v.holds(), || format!("conditioned: {v}"))?;
    let stat = crit("par_s_static.crit", &r);
    let v = verify_slice(&r, &s, &stat, &lib, DEFAULT_STEP_LIMIT).map_err(|e| e.to_string())?;
    let Verdict::Counterexample { input, .. } = &v else {
        return Err(format!("static criterion: expected a counterexample, got {v}"));
    };
    // The sum 1 + .. + n has the parity of 0 exactly when n mod 4 is 0 or 3.
    let n = input.int("n").unwrap();
    let m = Memory::with_ints(&[("n", i64::try_from(n.clone()).unwrap())]);
    ensure(parities(&r, &m, "s", Some(7)) != parities(&s, &m, "s", Some(7)), || format!("n = {n} is not a real counterexample"))?;
    for n in [0i64, 4, 8] {
        let m = Memory::with_ints(&[("n", n)]);
        ensure(parities(&r, &m, "s", Some(7)) == parities(&s, &m, "s", Some(7)), || format!("n = {n} differs"))?;
    }
    Ok(())
}

fn sign_invariants() -> Check {
    let p = corpus("invariant");
    let lib = Library::default();
    let doms = uniform_map(&p, &lib, "sign").map_err(|e| e.to_string())?;
    let inv = infer_invariants(&p, &doms, &AbsState::default());
    let last = p.body.last().unwrap().line;
    let end = inv.after[&last].clone().ok_or("exit unreachable")?;
    let text = end.render(&doms, &["i".to_string(), "j".to_string()]);
    ensure(text == "i↦neg j↦pos", || format!("exit state {text}"))
}

fn dependencies() -> Check {
    let lib = Library::default();
    let (par, sign) = (lib.get("par").unwrap(), lib.get("sign").unwrap());
    let e = |s: &str| parse_expr(s).unwrap();
    let quad = e("2 * (x * x) + y");
    let got = find_ndeps(&quad, &par, &AbsState::default());
    ensure(got == ["y"], || format!("par: {got:?}"))?;
    let got = find_ndeps(&quad, &sign, &AbsState::default());
    ensure(got == ["x", "y"], || format!("sign: {got:?}"))?;
    let got = find_ndeps(&e("x * x + 1"), &sign, &AbsState::default());
    ensure(got.is_empty(), || format!("x*x+1: {got:?}"))?;
    ensure(!sem_dep(&e("w + y + 2 * (x * x) - w"), "w", 4), || "w counted as a semantic dependency".into())?;
    // The cancelled w really cannot change the value.
    for w in -3i64..=3 {
        for x in -3i64..=3 {
            for y in -3i64..=3 {
                let direct = w + y + 2 * x * x - w;
                ensure(direct == y + 2 * x * x, || "arithmetic".into())?;
            }
        }
    }
    Ok(())
}

fn preservation() -> Check {
    let lib = Library::default();
    let prover = |src: &str| Prover::new(&parse_program(src).unwrap(), &lib, Mode::Abstract);
    let g = parse_agreement("{par@x}").unwrap();
    let truth = Predicate::truth();
    let two = prover("x := x + 2;");
    ensure(two.p_prove(&truth, &two.program().body.clone(), &g), || "x := x + 2 should preserve par@x".into())?;
    let one = prover("x := x + 1;");
    let body = one.program().body.clone();
    ensure(!one.p_prove(&truth, &body, &g), || "x := x + 1 should not preserve par@x".into())?;
    ensure(one.check_triple(&g, &truth, &body, &g), || "{par@x} x := x + 1 {par@x} should hold".into())
}

fn nullity() -> Check {
    let p = corpus("nullity");
    let c = crit("null_x.crit", &p);
    let out = abstract_slice(&p, &c, &Library::default(), &SliceOptions::default()).map_err(|e| e.to_string())?;
    for l in [9, 10] {
        let after = out.labels.after[&l].to_string();
        ensure(after == "{zero@n}", || format!("after line {l}: {after}"))?;
        ensure(out.erased.contains(&l), || format!("line {l} kept"))?;
    }
    for n in -4..=4 {
        let m = Memory::with_ints(&[("n", n)]);
        let null_at_end = |q: &Program| {
            let fin = run(q, &m, DEFAULT_STEP_LIMIT).final_mem.expect("run completes");
            fin.get("x").map(|v| matches!(v, absslice::concrete::Value::Null))
        };
        ensure(null_at_end(&p) == null_at_end(&out.slice), || format!("nullity of x differs for n={n}"))?;
    }
    Ok(())
}

/// Programs without heap variables, used for the dependence-graph checks.
const PDG_CORPUS: [&str; 10] =
    ["fig1", "ese1", "pdg_example", "parity_p", "sum_r", "sum_product", "invariant", "kl", "if_sign", "crit_left"];

fn dependence_graphs() -> Check {
    let p = corpus("pdg_example");
    let g = build_pdg(&p);
    let into8: BTreeSet<Node> = g.preds(8, &[EdgeKind::Flow]).iter().map(|e| e.from).collect();
    ensure(into8 == [Node::Line(5), Node::Line(7)].into(), || format!("preds of 8: {into8:?}"))?;
    let ese = corpus("ese1");
    let sem = build_semantic_pdg(&ese, 4).slice_for(&["z".to_string()], None, FlowKind::Semantic).map_err(|e| e.to_string())?;
    ensure(sem == lines(&[1, 2, 4]), || format!("ese1 slice for z: {sem:?}"))?;
    let lib = Library::default();
    let mut checked = 0;
    for name in PDG_CORPUS {
        let p = corpus(name);
        let g = build_semantic_pdg(&p, 4);
        for v in p.vars.keys() {
            let keep = g.slice_for(std::slice::from_ref(v), None, FlowKind::Semantic).map_err(|e| e.to_string())?;
            let q = p.retain_lines(&|l| keep.contains(&l));
            let c = Criterion::new(&[v.as_str()]).with_kl(true);
            let verdict = is_slice(&p, &q, &c, &lib, DEFAULT_STEP_LIMIT).map_err(|e| e.to_string())?;
            ensure(verdict.holds(), || format!("{name}, slice for {v}: {verdict}"))?;
            checked += 1;
        }
    }
    println!("    {checked} semantic dependence-graph slices checked");
    Ok(())
}

fn property_suites() -> Check {
    let mut failed = Vec::new();
    for (name, suite) in suites::all() {
        match suite(suites::CASES) {
            Ok(()) => println!("    {name}: ok ({} cases)", suites::CASES),
            Err(e) => {
                println!("    {name}: FAILED");
                failed.push(format!("{name}: {e}"));
            }
        }
    }
    ensure(failed.is_empty(), || failed.join("\n"))
}

fn slices_are_reverified() -> Check {
    let lib = Library::default();
    let mut jobs: Vec<(&str, Criterion)> = vec![
        ("fig1", crit("par_d.crit", &corpus("fig1"))),
        ("parity_p", crit("par_s_end.crit", &corpus("parity_p"))),
        ("parity_p", crit("par_s.crit", &corpus("parity_p"))),
        ("sum_r", crit("par_s_mod4.crit", &corpus("sum_r"))),
        ("nullity", crit("null_x.crit", &corpus("nullity"))),
        ("ese1", crit("id_z.crit", &corpus("ese1"))),
    ];
    for name in PDG_CORPUS {
        let p = corpus(name);
        for v in p.vars.keys() {
            for d in ["par", "sign"] {
                jobs.push((name, Criterion::new(&[v.as_str()]).abstracted(v, d)));
            }
        }
    }
    let mut emitted = 0;
    for (name, c) in &jobs {
        let p = corpus(name);
        for concrete in [false, true] {
            let res = if concrete {
                concrete_slice(&p, c, &lib, &SliceOptions::default())
            } else {
                abstract_slice(&p, c, &lib, &SliceOptions::default())
            };
            let out = match res {
                Ok(out) => out,
                Err(SliceError::Unsupported(_)) => continue,
                Err(e) => return Err(format!("{name}: {e}")),
            };
            ensure(out.verdict.holds(), || format!("{name}: emitted an unverified slice"))?;
            let again = verify_slice(&p, &out.slice, c, &lib, DEFAULT_STEP_LIMIT).map_err(|e| e.to_string())?;
            ensure(again.holds(), || format!("{name}: re-verification failed: {again}"))?;
            let exact = verify_slice(&p, &out.slice, &c.identity(), &lib, DEFAULT_STEP_LIMIT).map_err(|e| e.to_string())?;
            if concrete {
                ensure(exact.holds(), || format!("{name}: identity slice loses exact values: {exact}"))?;
            }
            emitted += 1;
        }
    }
    println!("    {emitted} emitted slices re-verified");
    Ok(())
}

#[test]
fn acceptance() {
    let criteria: [(&str, CheckFn); 10] = [
        ("parity of d in the introductory program keeps lines 2 and 5", fig1_parity_slice),
        ("parity loop programs are equivalent at line 7", parity_loop_equivalence),
        ("sum programs agree under n mod 4 = 0 but not statically", conditioned_equivalence),
        ("sign invariants at loop exit", sign_invariants),
        ("dependency analyses", dependencies),
        ("preservation versus agreement triples", preservation),
        ("nullity slice erases lines 9 and 10", nullity),
        ("dependence graphs and their slices", dependence_graphs),
        ("property suites", property_suites),
        ("every emitted slice is re-verified", slices_are_reverified),
    ];
    let mut failures = Vec::new();
    for (i, (desc, f)) in criteria.iter().enumerate() {
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match res {
            Ok(()) => println!("criterion {}: PASS - {desc}", i + 1),
            Err(e) => {
                println!("criterion {}: FAIL - {desc}\n    {e}", i + 1);
                failures.push(i + 1);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}

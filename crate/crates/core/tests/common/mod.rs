//! Generators and brute-force oracles shared by the property suites.
#![allow(dead_code)]

pub mod suites;

use absslice::lang::{parse_program, Program};
use proptest::prelude::*;
use std::path::PathBuf;

pub const VARS: [&str; 3] = ["x", "y", "z"];
pub const INT_DOMS: [&str; 6] = ["top", "zero", "par", "sign", "parsign", "id"];

pub fn corpus(name: &str) -> Program {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(format!("{name}.prog"));
    parse_program(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn corpus_text(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name);
    std::fs::read_to_string(path).unwrap()
}

/// Integer expressions over `vars` with small literals.
pub fn expr(vars: &'static [&'static str]) -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (-2i64..=3).prop_map(|k| if k < 0 { format!("({k})") } else { k.to_string() }),
        proptest::sample::select(vars).prop_map(str::to_string),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), proptest::sample::select(&["+", "-", "*"][..]), inner.clone())
                .prop_map(|(a, op, b)| format!("({a} {op} {b})")),
            (inner, 2i64..=3).prop_map(|(a, k)| format!("({a} mod {k})")),
        ]
    })
}

pub fn guard(vars: &'static [&'static str]) -> impl Strategy<Value = String> {
    (expr(vars), proptest::sample::select(&["<", "<=", "=", "!=", ">"][..]), expr(vars))
        .prop_map(|(a, op, b)| format!("{a} {op} {b}"))
}

#[derive(Clone, Debug)]
enum Shape {
    Assign(&'static str, String),
    If(String, Vec<Shape>, Vec<Shape>),
    /// A counting loop on a variable of its own.
    Loop(i64, Vec<Shape>),
}

fn render(stmts: &[Shape], depth: usize, out: &mut String, loops: &mut usize) {
    let pad = "  ".repeat(depth);
    for s in stmts {
        match s {
            Shape::Assign(x, e) => out.push_str(&format!("{pad}{x} := {e};\n")),
            Shape::If(g, t, e) => {
                out.push_str(&format!("{pad}if ({g}) {{\n"));
                render(t, depth + 1, out, loops);
                if e.is_empty() {
                    out.push_str(&format!("{pad}}}\n"));
                } else {
                    out.push_str(&format!("{pad}}} else {{\n"));
                    render(e, depth + 1, out, loops);
                    out.push_str(&format!("{pad}}}\n"));
                }
            }
            Shape::Loop(k, body) => {
                let i = format!("k{loops}");
                *loops += 1;
                out.push_str(&format!("{pad}{i} := 0;\n{pad}while ({i} < {k}) {{\n"));
                render(body, depth + 1, out, loops);
                out.push_str(&format!("{pad}  {i} := {i} + 1;\n{pad}}}\n"));
            }
        }
    }
}

fn shapes() -> impl Strategy<Value = Vec<Shape>> {
    let assign = (proptest::sample::select(&VARS[..]), expr(&VARS)).prop_map(|(x, e)| Shape::Assign(x, e));
    let stmt = assign.prop_recursive(2, 10, 3, |inner| {
        prop_oneof![
            3 => (proptest::sample::select(&VARS[..]), expr(&VARS)).prop_map(|(x, e)| Shape::Assign(x, e)),
            2 => (guard(&VARS), prop::collection::vec(inner.clone(), 1..3), prop::collection::vec(inner.clone(), 0..2))
                .prop_map(|(g, t, e)| Shape::If(g, t, e)),
            1 => (1i64..=3, prop::collection::vec(inner, 1..3)).prop_map(|(k, b)| Shape::Loop(k, b)),
        ]
    });
    prop::collection::vec(stmt, 1..5)
}

/// Small integer programs over x, y and z; loops count on private variables.
pub fn program() -> impl Strategy<Value = Program> {
    shapes().prop_map(|s| {
        let mut out = String::new();
        render(&s, 0, &mut out, &mut 0);
        parse_program(&out).unwrap_or_else(|e| panic!("generated program does not parse: {e}\n{out}"))
    })
}

/// A program together with a random subset of its lines to keep.
pub fn program_and_subprogram() -> impl Strategy<Value = (Program, Program)> {
    program().prop_flat_map(|p| {
        let n = p.lines().len();
        (Just(p), prop::collection::vec(any::<bool>(), n))
    })
    .prop_map(|(p, mask)| {
        let lines: Vec<u32> = p.lines().into_iter().collect();
        let keep: std::collections::BTreeSet<u32> =
            lines.iter().zip(&mask).filter(|(_, k)| **k).map(|(l, _)| *l).collect();
        let q = p.retain_lines(&|l| keep.contains(&l));
        (p, q)
    })
}

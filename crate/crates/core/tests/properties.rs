mod common;

use common::suites::{self, CASES};

fn check(r: Result<(), String>) {
    if let Err(e) = r {
        panic!("{e}");
    }
}

#[test]
fn uco_laws() {
    check(suites::uco_laws(CASES));
}

#[test]
fn ndep_implies_atom_dep() {
    check(suites::ndep_implies_atom_dep(CASES));
}

#[test]
fn find_ndeps_is_sound() {
    check(suites::find_ndeps_sound(CASES));
}

#[test]
fn edep_removes_dependency() {
    check(suites::edep_non_dependency(CASES));
}

#[test]
fn preconditions_are_sound() {
    check(suites::preconditions_are_sound(CASES));
}

#[test]
fn subsumption_transfers_slices() {
    check(suites::subsumption_transfers_slices(CASES));
}

#[test]
fn identity_projection_is_concrete() {
    check(suites::identity_projection_is_concrete(CASES));
}

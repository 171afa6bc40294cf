//! One test per acceptance criterion, each at its stated scale and tolerance.

use scorelaw::acceptance::{run_criterion, Settings};

fn check(id: &str) {
    let result = run_criterion(id, &Settings::default()).unwrap();
    println!("{result}");
    assert!(result.pass, "{result}");
}

#[test]
fn a01_closed_form_matches_recurrence() {
    check("A1");
}

#[test]
fn a02_tail_coefficient() {
    check("A2");
}

#[test]
fn a03_mass_identity() {
    check("A3");
}

#[test]
fn a04_oracle_vs_monte_carlo() {
    check("A4");
}

#[test]
fn a05_limit_convergence() {
    check("A5");
}

#[test]
fn a06_deviation_events() {
    check("A6");
}

#[test]
fn a07_interior_exponent() {
    check("A7");
}

#[test]
fn a08_second_parameter_point() {
    check("A8");
}

#[test]
fn a09_vertex_law() {
    check("A9");
}

#[test]
fn a10_transition_probe() {
    check("A10");
}

#[test]
fn a11_determinism_and_structure() {
    check("A11");
}

mod common;

use common::setup;
use dmxm_core::dirac::Sign;
use dmxm_core::solver::{outer_minimize, SolverConfig};
use dmxm_core::trial::{projected_trial, stream_rng, Envelope};
use dmxm_core::verify::{appendix_sides, check_appendix_lemma, check_coulomb_positivity, check_kato, check_solution_bounds, kato_sides, margin};

#[test]
fn coulomb_positivity_holds_on_mixtures() {
    let s = setup(32, 40.0, 1.0);
    let r = check_coulomb_positivity(&s.kernel, 100, 1).unwrap();
    assert_eq!(r.failures, 0);
    assert_eq!(r.trials, 100);
}

#[test]
fn kato_holds_for_narrow_densities_and_fast_spinors() {
    let s = setup(32, 40.0, 1.0);
    let h = s.grid.spacing();
    let mut rng = stream_rng(2, 0);
    let mut margins = Vec::new();
    for width in [1.5 * h, 3.0 * h, 6.0 * h] {
        let rho = Envelope {
            width,
            momentum: [0.0; 3],
            polarization: [1.0.into(), 0.0.into(), 0.0.into(), 0.0.into()],
        }
        .density(&s.grid);
        let psi = Envelope::sample(&mut rng, &s.grid, 0.0).spinor(&s.grid);
        let (lhs, rhs) = kato_sides(&s.mult, &s.kernel, &rho, &psi).unwrap();
        assert!(lhs <= rhs);
        margins.push(margin(lhs, rhs));
    }
    // Narrower densities probe the singularity harder.
    assert!(margins[0] <= margins[2]);

    let fast = Envelope {
        width: s.grid.box_length() / 16.0,
        momentum: [2.0, 0.0, 0.0],
        polarization: [0.5.into(), 0.5.into(), 0.5.into(), 0.5.into()],
    }
    .spinor(&s.grid);
    let rho = Envelope::sample(&mut rng, &s.grid, 0.0).density(&s.grid);
    let (lhs, rhs) = kato_sides(&s.mult, &s.kernel, &rho, &fast).unwrap();
    assert!(lhs <= rhs);

    let r = check_kato(&s.mult, &s.kernel, 50, 3).unwrap();
    assert_eq!(r.failures, 0);
}

#[test]
fn quartic_split_margin_shrinks_with_eta() {
    let s = setup(32, 40.0, 1.0);
    let mut rng = stream_rng(4, 0);
    let w = projected_trial(&s.mult, &mut rng, Sign::Plus).unwrap();
    let dir = projected_trial(&s.mult, &mut rng, Sign::Minus).unwrap();
    let w_h = s.mult.h_norm_sq(&w).unwrap();
    // The part of the bound that survives at eta = 0.
    let floor = 14.0 * std::f64::consts::FRAC_PI_2 * (w_h - 1.0);
    let mut prev = f64::INFINITY;
    for r in [0.4, 0.2, 0.1, 0.05, 0.0] {
        let (bound, q) = appendix_sides(&s.mult, &s.kernel, &w, &dir.scaled(r.into())).unwrap();
        assert!(bound <= q);
        let excess = q - bound - (1.0 - r * r) * floor;
        assert!(excess <= prev + 1e-12);
        prev = excess;
    }
    assert!(prev.abs() < 1e-12);
    let r = check_appendix_lemma(&s.mult, &s.kernel, 30, 5).unwrap();
    assert_eq!(r.failures, 0);
}

#[test]
fn checks_are_reproducible() {
    let s = setup(16, 40.0, 1.0);
    let a = check_appendix_lemma(&s.mult, &s.kernel, 10, 6).unwrap();
    let b = check_appendix_lemma(&s.mult, &s.kernel, 10, 6).unwrap();
    assert_eq!(a, b);
    let c = check_appendix_lemma(&s.mult, &s.kernel, 10, 7).unwrap();
    assert_ne!(a.worst_margin, c.worst_margin);
}

#[test]
fn solution_bounds_pass_for_a_solve_and_catch_a_forged_multiplier() {
    let s = setup(16, 40.0, 1.0);
    let config = SolverConfig {
        grid_n: 16,
        ..SolverConfig::default()
    };
    let report = outer_minimize(&s.mult, &s.kernel, &config).unwrap();
    let results = check_solution_bounds(&s.mult, &s.kernel, &report).unwrap();
    assert_eq!(results.len(), 4);
    assert!(results.iter().all(|r| r.passed()), "{results:#?}");

    let mut forged = report.clone();
    forged.omega = 1.5;
    let results = check_solution_bounds(&s.mult, &s.kernel, &forged).unwrap();
    let gap = results.iter().find(|r| r.name == "omega_in_gap").unwrap();
    assert!(gap.failures > 0);

    let mut stripped = report;
    stripped.w = None;
    assert!(check_solution_bounds(&s.mult, &s.kernel, &stripped).is_err());
}

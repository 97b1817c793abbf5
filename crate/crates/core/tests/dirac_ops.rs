mod common;

use common::{eigenvalues, setup};
use dmxm_core::dirac::{beta, identity4, mat_add, mat_scale, max_entry_diff, Sign};
use dmxm_core::{Direction, Space, SpinorField};
use num_complex::Complex64;
use proptest::prelude::*;

fn momentum_field(raw: &[(f64, f64)]) -> SpinorField {
    let s = setup(8, 9.0, 1.3);
    SpinorField::from_values(&s.grid, raw.iter().map(|&(a, b)| Complex64::new(a, b)).collect(), Space::Momentum).unwrap()
}

fn raw_field() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 4 * 512)
}

fn diff_norm(a: &SpinorField, b: &SpinorField) -> f64 {
    let mut d = a.clone();
    d.axpy((-1.0).into(), b).unwrap();
    d.norm()
}

#[test]
fn zero_mode_projector_is_upper_block() {
    let s = setup(8, 10.0, 1.0);
    assert_eq!(s.mult.lambda(0), 1.0);
    let expected = mat_scale(&mat_add(&identity4(), &beta(), 1.0.into()), 0.5.into());
    assert!(max_entry_diff(&s.mult.projector(0, Sign::Plus), &expected) < 1e-15);
}

#[test]
fn projector_spectrum_at_three_zero_zero() {
    let s = setup(16, 2.0 * std::f64::consts::PI, 1.0);
    let idx = s.grid.index(3, 0, 0);
    assert!((s.mult.lambda(idx) - 10f64.sqrt()).abs() < 1e-14);
    for sign in [Sign::Plus, Sign::Minus] {
        let ev = eigenvalues(&s.mult.projector(idx, sign));
        for (got, want) in ev.iter().zip([0.0, 0.0, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }
    let ev = eigenvalues(&s.mult.h_matrix(idx));
    let l = 10f64.sqrt();
    for (got, want) in ev.iter().zip([-l, -l, l, l]) {
        assert!((got - want).abs() < 1e-12);
    }

    let mut f = SpinorField::zeros(&s.grid, Space::Momentum);
    f.values_mut()[4 * idx] = 1.0.into();
    assert!((s.mult.h_norm_sq(&f).unwrap() - 10f64.sqrt()).abs() < 1e-14);
}

#[test]
fn zero_mode_eigenvalues_are_plus_minus_mass() {
    let s = setup(8, 10.0, 2.0);
    let mut up = SpinorField::zeros(&s.grid, Space::Momentum);
    up.values_mut()[0] = 1.0.into();
    let mut down = SpinorField::zeros(&s.grid, Space::Momentum);
    down.values_mut()[2] = 1.0.into();
    assert!(diff_norm(&s.mult.apply_h(&up).unwrap(), &up.scaled(2.0.into())) < 1e-15);
    assert!(diff_norm(&s.mult.apply_h(&down).unwrap(), &down.scaled((-2.0).into())) < 1e-15);
    assert!((s.mult.h_norm_sq(&up).unwrap() - 2.0).abs() < 1e-15);
}

#[test]
fn mixed_zero_mode_splits_into_blocks() {
    let s = setup(8, 10.0, 1.0);
    let mut f = SpinorField::zeros(&s.grid, Space::Momentum);
    f.set_site(0, [1.0.into(), Complex64::new(0.0, 2.0), 3.0.into(), (-1.0).into()]);
    let plus = s.mult.project(&f, Sign::Plus).unwrap().site(0);
    let minus = s.mult.project(&f, Sign::Minus).unwrap().site(0);
    assert_eq!(plus[2], Complex64::default());
    assert_eq!(plus[3], Complex64::default());
    assert_eq!(minus[0], Complex64::default());
    assert_eq!(minus[1], Complex64::default());
    assert_eq!(plus[1], Complex64::new(0.0, 2.0));
    assert_eq!(minus[2], 3.0.into());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projectors_are_complementary_and_idempotent(raw in raw_field()) {
        let s = setup(8, 9.0, 1.3);
        let f = momentum_field(&raw);
        let plus = s.mult.project(&f, Sign::Plus).unwrap();
        let minus = s.mult.project(&f, Sign::Minus).unwrap();
        let scale = f.norm();
        prop_assert!(diff_norm(&s.mult.project(&plus, Sign::Plus).unwrap(), &plus) <= 1e-12 * scale);
        prop_assert!(s.mult.project(&plus, Sign::Minus).unwrap().norm() <= 1e-12 * scale);
        prop_assert!(diff_norm(&plus.combine(1.0.into(), &minus, 1.0.into()).unwrap(), &f) <= 1e-12 * scale);
    }

    #[test]
    fn subspaces_are_orthogonal_in_both_products(a in raw_field(), b in raw_field()) {
        let s = setup(8, 9.0, 1.3);
        let f = s.mult.project(&momentum_field(&a), Sign::Plus).unwrap();
        let g = s.mult.project(&momentum_field(&b), Sign::Minus).unwrap();
        let scale = f.norm() * g.norm();
        prop_assert!(f.inner(&g).unwrap().norm() <= 1e-12 * scale);
        prop_assert!(s.mult.h_inner(&f, &g).unwrap().norm() <= 1e-12 * scale * s.mult.lambda_max());
    }

    #[test]
    fn energy_form_splits_by_sign(raw in raw_field()) {
        let s = setup(8, 9.0, 1.3);
        let f = momentum_field(&raw);
        let lhs = f.inner(&s.mult.apply_h(&f).unwrap()).unwrap().re;
        let plus = s.mult.project(&f, Sign::Plus).unwrap();
        let minus = s.mult.project(&f, Sign::Minus).unwrap();
        let quarter = |g: &SpinorField| s.mult.apply_lambda_power(g, 0.5).unwrap().norm_sq();
        let rhs = quarter(&plus) - quarter(&minus);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * f.norm_sq() * s.mult.lambda_max());
        prop_assert!(s.mult.h_norm_sq(&f).unwrap() >= s.mult.mass() * f.norm_sq() * (1.0 - 1e-14));
    }

    #[test]
    fn fw_transform_is_unitary_and_diagonalizing(raw in raw_field()) {
        let s = setup(8, 9.0, 1.3);
        let f = momentum_field(&raw);
        let u = s.mult.apply_fw(&f, Direction::Forward).unwrap();
        prop_assert!((u.norm() - f.norm()).abs() <= 1e-12 * f.norm());
        let back = s.mult.apply_fw(&u, Direction::Inverse).unwrap();
        prop_assert!(diff_norm(&back, &f) <= 1e-12 * f.norm());
        // U H U^-1 acts as lambda * beta.
        let lhs = s.mult.apply_fw(&s.mult.apply_h(&s.mult.apply_fw(&f, Direction::Inverse).unwrap()).unwrap(), Direction::Forward).unwrap();
        let mut rhs = s.mult.apply_lambda_power(&f, 1.0).unwrap();
        for idx in 0..s.grid.len() {
            let v = rhs.site(idx);
            rhs.set_site(idx, [v[0], v[1], -v[2], -v[3]]);
        }
        prop_assert!(diff_norm(&lhs, &rhs) <= 1e-12 * f.norm() * s.mult.lambda_max());
    }
}

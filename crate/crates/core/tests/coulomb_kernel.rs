mod common;

use std::f64::consts::PI;

use common::{direct_pairing, setup};
use dmxm_core::coulomb::beta_density;
use dmxm_core::dirac::Sign;
use dmxm_core::trial::{signed_mixture, stream_rng, Envelope};
use dmxm_core::{ScalarField, Space, SpinorField};
use num_complex::Complex64;
use proptest::prelude::*;

fn gaussian_charge(s: &common::Setup, center: [f64; 3], width: f64) -> ScalarField {
    let mut f = ScalarField::from_position_fn(&s.grid, |x| {
        let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
        (-(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (width * width)).exp()
    });
    let q = f.l1_norm();
    f.values_mut().iter_mut().for_each(|v| *v /= q);
    f
}

#[test]
fn pairing_matches_direct_double_sum() {
    let s = setup(8, 12.0, 1.0);
    for t in 0..4 {
        let mut rng = stream_rng(5, t);
        let f = signed_mixture(&s.grid, &mut rng);
        let g = signed_mixture(&s.grid, &mut rng);
        let fast = s.kernel.pairing(&f, &g).unwrap();
        let slow = direct_pairing(&s.kernel, &f, &g);
        let scale = (s.kernel.pairing(&f, &f).unwrap() * s.kernel.pairing(&g, &g).unwrap()).sqrt();
        assert!((fast - slow).abs() <= 1e-10 * scale, "{fast} vs {slow}");
    }
}

#[test]
fn gaussian_potential_matches_erf() {
    // Density (pi sigma^2)^{-3/2} exp(-|x|^2 / sigma^2) with sigma = L/16.
    let s = setup(32, 40.0, 1.0);
    let sigma = s.grid.box_length() / 16.0;
    let rho = gaussian_charge(&s, [0.0; 3], sigma);
    let phi = s.kernel.potential(&rho).unwrap();
    let mut worst: f64 = 0.0;
    for idx in 0..s.grid.len() {
        let x = s.grid.offset_from_center(idx);
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if r > 0.25 * s.grid.box_length() {
            continue;
        }
        let exact = if r == 0.0 { 2.0 / (sigma * PI.sqrt()) } else { statrs::function::erf::erf(r / sigma) / r };
        worst = worst.max((phi.values()[idx].re - exact).abs() / exact);
    }
    assert!(worst <= 1e-6, "worst relative error {worst:e}");
}

#[test]
fn separated_charges_interact_like_points() {
    let s = setup(32, 40.0, 1.0);
    let d = 8.0;
    let a = gaussian_charge(&s, [-d / 2.0, 0.0, 0.0], 1.5);
    let b = gaussian_charge(&s, [d / 2.0, 0.0, 0.0], 1.5);
    let e = s.kernel.pairing(&a, &b).unwrap();
    assert!((e - 1.0 / d).abs() <= 1e-4, "{e}");
}

#[test]
fn beta_density_integrates_to_block_difference() {
    let s = setup(8, 10.0, 1.0);
    let mut f = SpinorField::zeros(&s.grid, Space::Momentum);
    f.set_site(0, [0.6.into(), Complex64::new(0.0, 0.3), 0.5.into(), 0.2.into()]);
    let rho = beta_density(&f.to_position().unwrap()).unwrap();
    let total: f64 = rho.values().iter().map(|v| v.re).sum::<f64>() * s.grid.cell_volume();
    let plus = s.mult.project(&f, Sign::Plus).unwrap().norm_sq();
    let minus = s.mult.project(&f, Sign::Minus).unwrap().norm_sq();
    assert!((total - (plus - minus)).abs() < 1e-14);
}

#[test]
fn multiplier_is_finite_and_nonnegative() {
    let s = setup(16, 20.0, 1.0);
    assert!(s.kernel.multiplier().iter().all(|m| m.is_finite() && *m >= 0.0));
    assert!((s.kernel.multiplier()[0] - 2.0 * PI * 100.0).abs() < 1e-10);
}

#[test]
fn quartic_energy_obeys_kinetic_bound() {
    let s = setup(32, 40.0, 1.0);
    for t in 0..20 {
        let mut rng = stream_rng(8, t);
        let psi = Envelope::sample(&mut rng, &s.grid, 1.0).spinor(&s.grid);
        let q = s.kernel.quartic_energy(&psi).unwrap();
        let bound = PI / 2.0 * psi.norm_sq() * s.mult.h_norm_sq(&psi.to_momentum().unwrap()).unwrap();
        assert!(q <= bound, "{q} > {bound}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pairing_is_symmetric_bilinear_and_positive(
        a in prop::collection::vec(-1.0..1.0f64, 512),
        b in prop::collection::vec(-1.0..1.0f64, 512),
        c in -2.0..2.0f64,
    ) {
        let s = setup(8, 10.0, 1.0);
        let field = |v: &[f64]| ScalarField::from_values(&s.grid, v.iter().map(|&x| x.into()).collect(), Space::Position).unwrap();
        let f = field(&a);
        let g = field(&b);
        let fg = s.kernel.pairing(&f, &g).unwrap();
        let gf = s.kernel.pairing(&g, &f).unwrap();
        let ff = s.kernel.pairing(&f, &f).unwrap();
        let gg = s.kernel.pairing(&g, &g).unwrap();
        let scale = ff.max(gg).max(1e-300);
        prop_assert!((fg - gf).abs() <= 1e-12 * scale);
        prop_assert!(ff >= -1e-12 * scale);
        let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| c * x + y).collect();
        let h = field(&combo);
        let expanded = c * c * ff + 2.0 * c * fg + gg;
        prop_assert!((s.kernel.pairing(&h, &h).unwrap() - expanded).abs() <= 1e-10 * scale * (1.0 + c * c));
    }
}

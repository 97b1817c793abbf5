//! Seeded random fields for probes, multi-start and the inequality harness.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dirac::{DiracMultipliers, Sign, Spinor};
use crate::error::Result;
use crate::grid::{FourierGrid, ScalarField, Space, SpinorField};

/// Independent generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Uniformly distributed unit spinor.
pub fn random_polarization<R: Rng + ?Sized>(rng: &mut R) -> Spinor {
    let mut v = [Complex64::default(); 4];
    v.iter_mut().for_each(|c| *c = complex_normal(rng));
    let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    v.map(|c| c / n)
}

fn random_direction<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-12 {
            return v.map(|c| c / n);
        }
    }
}

/// Shape of a Gaussian-envelope trial field.
#[derive(Debug, Clone, Copy)]
pub struct Envelope {
    pub width: f64,
    pub momentum: [f64; 3],
    pub polarization: Spinor,
}

impl Envelope {
    /// Width uniform in `[L/16, L/8]`, momentum offset of length at most `max_momentum`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, grid: &FourierGrid, max_momentum: f64) -> Self {
        let l = grid.box_length();
        let width = rng.random_range(l / 16.0..=l / 8.0);
        let k = rng.random_range(0.0..=max_momentum);
        let dir = random_direction(rng);
        Self {
            width,
            momentum: dir.map(|c| c * k),
            polarization: random_polarization(rng),
        }
    }

    fn amplitude(&self, x: [f64; 3]) -> Complex64 {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let phase = self.momentum[0] * x[0] + self.momentum[1] * x[1] + self.momentum[2] * x[2];
        Complex64::from_polar((-r2 / (2.0 * self.width * self.width)).exp(), phase)
    }

    /// Unit-norm spinor centred in the box, in position space.
    pub fn spinor(&self, grid: &Arc<FourierGrid>) -> SpinorField {
        let mut f = SpinorField::from_position_fn(grid, |x| {
            let a = self.amplitude(x);
            self.polarization.map(|c| c * a)
        });
        let n = f.norm();
        f.scale((1.0 / n).into());
        f
    }

    /// Nonnegative Gaussian density of unit mass, in position space.
    pub fn density(&self, grid: &Arc<FourierGrid>) -> ScalarField {
        let w = self.width;
        let mut f = ScalarField::from_position_fn(grid, |x| {
            (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * w * w)).exp()
        });
        let mass = f.l1_norm();
        f.values_mut().iter_mut().for_each(|v| *v /= mass);
        f
    }
}

/// Largest momentum offset used for trial fields: `min(4m, p_nyquist / 2)`.
pub fn max_trial_momentum(mult: &DiracMultipliers) -> f64 {
    (4.0 * mult.mass()).min(0.5 * mult.grid().nyquist())
}

/// Random trial spinor projected onto one energy subspace and normalized, in momentum space.
pub fn projected_trial<R: Rng + ?Sized>(mult: &DiracMultipliers, rng: &mut R, sign: Sign) -> Result<SpinorField> {
    let env = Envelope::sample(rng, mult.grid(), max_trial_momentum(mult));
    let mut f = mult.project(&env.spinor(mult.grid()).to_momentum()?, sign)?;
    let n = f.norm();
    f.scale((1.0 / n).into());
    Ok(f)
}

/// Smooth random direction in the negative subspace with unit H-norm.
///
/// Coefficients are complex normal with a Gaussian taper in `|p|`, so the
/// probe is spread over the low modes that carry the physics.
pub fn negative_probe<R: Rng + ?Sized>(mult: &DiracMultipliers, rng: &mut R) -> Result<SpinorField> {
    let grid = mult.grid();
    let taper = 1.0 / (grid.nyquist() * grid.nyquist());
    let mut f = SpinorField::zeros(grid, Space::Momentum);
    for idx in 0..grid.len() {
        let p = grid.momentum(idx);
        let damp = (-(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) * 4.0 * taper).exp();
        let mut v = [Complex64::default(); 4];
        v.iter_mut().for_each(|c| *c = complex_normal(rng) * damp);
        f.set_site(idx, v);
    }
    let mut f = mult.project(&f, Sign::Minus)?;
    let n = mult.h_norm_sq(&f)?.sqrt();
    f.scale((1.0 / n).into());
    Ok(f)
}

/// Real density made of up to three signed Gaussians, in position space.
pub fn signed_mixture<R: Rng + ?Sized>(grid: &Arc<FourierGrid>, rng: &mut R) -> ScalarField {
    let l = grid.box_length();
    let count = rng.random_range(1..=3);
    let bumps: Vec<([f64; 3], f64, f64)> = (0..count)
        .map(|_| {
            let shift = [0, 1, 2].map(|_| rng.random_range(-l / 16.0..=l / 16.0));
            let width = rng.random_range(l / 16.0..=l / 8.0);
            let weight: f64 = rng.sample(StandardNormal);
            (shift, width, weight)
        })
        .collect();
    ScalarField::from_position_fn(grid, |x| {
        bumps
            .iter()
            .map(|(c, w, a)| {
                let d = [x[0] - c[0], x[1] - c[1], x[2] - c[2]];
                a * (-(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (2.0 * w * w)).exp() / (2.0 * PI * w * w).powf(1.5)
            })
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: f64 = stream_rng(7, 3).random();
        let b: f64 = stream_rng(7, 3).random();
        let c: f64 = stream_rng(7, 4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn trial_fields_are_normalized() {
        let grid = build_grid(16, 20.0).unwrap();
        let mult = DiracMultipliers::new(&grid, 1.0).unwrap();
        let mut rng = stream_rng(1, 0);
        let w = projected_trial(&mult, &mut rng, Sign::Plus).unwrap();
        assert!((w.norm() - 1.0).abs() < 1e-12);
        assert!(mult.project(&w, Sign::Minus).unwrap().norm() < 1e-12);
        let xi = negative_probe(&mult, &mut rng).unwrap();
        assert!((mult.h_norm_sq(&xi).unwrap() - 1.0).abs() < 1e-12);
        let env = Envelope::sample(&mut rng, &grid, 1.0);
        assert!((env.density(&grid).l1_norm() - 1.0).abs() < 1e-12);
    }
}

//! Coulomb convolution `rho * 1/|x|` with a spherically truncated kernel.
//!
//! The kernel `1/|x|` restricted to `|x| < R_c` has the Fourier multiplier
//! `4 pi (1 - cos(|p| R_c)) / |p|^2`, with value `2 pi R_c^2` at `p = 0`. With
//! `R_c = L/2` the periodic convolution coincides with the free-space one for
//! densities supported in the ball of radius `R_c/2` around the box centre.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::dirac::beta_form;
use crate::error::{Error, Result};
use crate::grid::{Direction, FourierGrid, ScalarField, Space, SpinorField};

/// Imaginary parts above this fraction of the amplitude are rejected.
pub const REAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct CoulombKernel {
    grid: Arc<FourierGrid>,
    cutoff_radius: f64,
    multiplier: Vec<f64>,
}

/// Multiplier of the kernel `1/|x|` truncated at `cutoff`.
pub fn truncated_multiplier(p_norm: f64, cutoff: f64) -> f64 {
    if p_norm == 0.0 {
        2.0 * PI * cutoff * cutoff
    } else {
        let s = (0.5 * p_norm * cutoff).sin();
        8.0 * PI * s * s / (p_norm * p_norm)
    }
}

impl CoulombKernel {
    pub fn new(grid: &Arc<FourierGrid>) -> Self {
        Self::with_cutoff(grid, 0.5 * grid.box_length())
    }

    pub fn with_cutoff(grid: &Arc<FourierGrid>, cutoff_radius: f64) -> Self {
        let multiplier = (0..grid.len())
            .map(|idx| {
                let p = grid.momentum(idx);
                truncated_multiplier((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt(), cutoff_radius)
            })
            .collect();
        Self {
            grid: Arc::clone(grid),
            cutoff_radius,
            multiplier,
        }
    }

    pub fn grid(&self) -> &Arc<FourierGrid> {
        &self.grid
    }

    pub fn cutoff_radius(&self) -> f64 {
        self.cutoff_radius
    }

    pub fn multiplier(&self) -> &[f64] {
        &self.multiplier
    }

    fn check_real(&self, f: &ScalarField) -> Result<()> {
        f.grid()
            .as_ref()
            .eq(self.grid.as_ref())
            .then_some(())
            .ok_or(Error::GridMismatch)?;
        if f.space() != Space::Position {
            return Err(Error::SpaceMismatch {
                expected: Space::Position,
                found: f.space(),
            });
        }
        let ratio = f.max_imag_ratio();
        if ratio > REAL_TOLERANCE {
            return Err(Error::ComplexDensity(ratio));
        }
        Ok(())
    }

    /// Momentum coefficients of a real density, plus `D(rho, rho)`.
    pub(crate) fn density_spectrum(&self, rho: &ScalarField) -> Result<(ScalarField, f64)> {
        self.check_real(rho)?;
        let hat = rho.transform(Direction::Forward)?;
        let self_energy = hat
            .values()
            .iter()
            .zip(&self.multiplier)
            .map(|(v, m)| m * v.norm_sqr())
            .sum();
        Ok((hat, self_energy))
    }

    /// Potential from momentum coefficients of a real density.
    pub(crate) fn potential_from_spectrum(&self, rho_hat: &ScalarField) -> Result<ScalarField> {
        let mut phi = rho_hat.clone();
        phi.values_mut()
            .iter_mut()
            .zip(&self.multiplier)
            .for_each(|(v, m)| *v *= m);
        phi.transform_in_place(Direction::Inverse)?;
        phi.values_mut().iter_mut().for_each(|v| v.im = 0.0);
        Ok(phi)
    }

    pub fn potential(&self, rho: &ScalarField) -> Result<ScalarField> {
        let (hat, _) = self.density_spectrum(rho)?;
        self.potential_from_spectrum(&hat)
    }

    /// `D(f, g) = int int f(x) g(y) / |x - y|` for real position-space fields.
    pub fn pairing(&self, f: &ScalarField, g: &ScalarField) -> Result<f64> {
        self.check_real(f)?;
        self.check_real(g)?;
        let fh = f.transform(Direction::Forward)?;
        let gh = g.transform(Direction::Forward)?;
        Ok(fh
            .values()
            .iter()
            .zip(gh.values())
            .zip(&self.multiplier)
            .map(|((a, b), m)| m * (a.conj() * b).re)
            .sum())
    }

    /// `Q(psi) = D(rho_beta, rho_beta)`.
    pub fn quartic_energy(&self, psi: &SpinorField) -> Result<f64> {
        let rho = beta_density(psi)?;
        Ok(self.density_spectrum(&rho)?.1)
    }
}

/// Pointwise `<psi(x), beta psi(x)>`.
pub fn beta_density(psi: &SpinorField) -> Result<ScalarField> {
    psi.expect_space(Space::Position)?;
    let values = (0..psi.grid().len())
        .map(|idx| Complex64::new(beta_form(&psi.site(idx)), 0.0))
        .collect();
    ScalarField::from_values(psi.grid(), values, Space::Position)
}

/// Pointwise `|psi(x)|^2`.
pub fn mass_density(psi: &SpinorField) -> Result<ScalarField> {
    psi.expect_space(Space::Position)?;
    let values = (0..psi.grid().len())
        .map(|idx| {
            let z = psi.site(idx);
            Complex64::new(z.iter().map(|c| c.norm_sqr()).sum(), 0.0)
        })
        .collect();
    ScalarField::from_values(psi.grid(), values, Space::Position)
}

pub fn potential(kernel: &CoulombKernel, rho: &ScalarField) -> Result<ScalarField> {
    kernel.potential(rho)
}

pub fn coulomb_pairing(kernel: &CoulombKernel, f: &ScalarField, g: &ScalarField) -> Result<f64> {
    kernel.pairing(f, g)
}

pub fn quartic_energy(kernel: &CoulombKernel, psi: &SpinorField) -> Result<f64> {
    kernel.quartic_energy(psi)
}

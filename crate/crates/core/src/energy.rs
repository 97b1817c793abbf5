//! The variational layer.
//!
//! For `w` on the positive-energy unit sphere and `eta` in the open unit ball
//! of the negative-energy subspace, the trial state is
//! `psi = a(eta) w + eta` with `a(eta) = sqrt(1 - |eta|^2)`, so `|psi| = 1`.
//! The functional is
//!
//! ```text
//! I(psi) = 1/2 |L+ psi|_H^2 - 1/2 |L- psi|_H^2 - s/4 Q(psi),   Q = D(rho_beta, rho_beta)
//! ```
//!
//! and `J_w(eta) = I(a(eta) w + eta)`. All derivatives are taken over the
//! reals. The L^2 gradient of `I` is `G = H psi - s phi beta psi` with
//! `phi = rho_beta * 1/|x|`, so `dI(psi)[h] = Re <G, h>`. Gradients returned
//! here are Riesz representatives for the H inner product, i.e. the L^2 ones
//! multiplied by `lambda(p)^-1` mode by mode.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coulomb::{beta_density, CoulombKernel};
use crate::dirac::{beta_apply, beta_pairing, DiracMultipliers, Sign};
use crate::error::{Error, Result};
use crate::grid::{ScalarField, Space, SpinorField};

/// Smallest `a(eta)` for which `da`, `omega` and the chain rule are evaluated.
pub const BOUNDARY_GUARD: f64 = 1e-6;

/// Tolerance on the subspace and normalization invariants of [`SplitState`].
pub const SUBSPACE_TOLERANCE: f64 = 1e-10;

/// Constrained pair `(w, eta)` with the derived `a(eta)` and `psi`, all in momentum space.
#[derive(Debug, Clone)]
pub struct SplitState {
    w: SpinorField,
    eta: SpinorField,
    a: f64,
    psi: SpinorField,
}

impl SplitState {
    pub fn new(mult: &DiracMultipliers, w: SpinorField, eta: SpinorField) -> Result<Self> {
        w.expect_space(Space::Momentum)?;
        eta.expect_space(Space::Momentum)?;
        let w_norm = w.norm();
        if (w_norm - 1.0).abs() > SUBSPACE_TOLERANCE {
            return Err(Error::InvalidState(format!("|w| = {w_norm}, expected 1")));
        }
        let w_leak = mult.project(&w, Sign::Minus)?.norm();
        if w_leak > SUBSPACE_TOLERANCE {
            return Err(Error::InvalidState(format!("w has negative-energy part {w_leak:e}")));
        }
        let eta_leak = mult.project(&eta, Sign::Plus)?.norm();
        if eta_leak > SUBSPACE_TOLERANCE {
            return Err(Error::InvalidState(format!("eta has positive-energy part {eta_leak:e}")));
        }
        let eta_sq = eta.norm_sq();
        if eta_sq >= 1.0 {
            return Err(Error::InvalidState(format!("|eta|^2 = {eta_sq} >= 1")));
        }
        let a = (1.0 - eta_sq).sqrt();
        let psi = w.combine(a.into(), &eta, 1.0.into())?;
        Ok(Self { w, eta, a, psi })
    }

    /// State with `eta = 0`.
    pub fn at_origin(mult: &DiracMultipliers, w: SpinorField) -> Result<Self> {
        let eta = SpinorField::zeros(w.grid(), Space::Momentum);
        Self::new(mult, w, eta)
    }

    pub fn w(&self) -> &SpinorField {
        &self.w
    }

    pub fn eta(&self) -> &SpinorField {
        &self.eta
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn psi(&self) -> &SpinorField {
        &self.psi
    }

    pub fn eta_norm_sq(&self) -> f64 {
        self.eta.norm_sq()
    }

    /// Same state multiplied by a global phase.
    pub fn with_phase(&self, phase: Complex64) -> Self {
        Self {
            w: self.w.scaled(phase),
            eta: self.eta.scaled(phase),
            a: self.a,
            psi: self.psi.scaled(phase),
        }
    }

    pub fn into_parts(self) -> (SpinorField, SpinorField) {
        (self.w, self.eta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `|L+ psi|_H^2`, equal to `|a w|_H^2` for a split state.
    pub kinetic_plus: f64,
    /// `|L- psi|_H^2`, equal to `|eta|_H^2` for a split state.
    pub kinetic_minus: f64,
    pub quartic: f64,
    pub i_value: f64,
    pub j_value: f64,
    /// `a^-1 dI(psi)[w]` for split states, `dI(psi)[psi] / |psi|^2` otherwise.
    pub omega: f64,
    pub coupling: f64,
    pub mass: f64,
}

impl EnergyBreakdown {
    /// `1/2 K+ - 1/2 K- - s/4 Q` recomputed from the parts.
    pub fn recomposed(&self) -> f64 {
        0.5 * self.kinetic_plus - 0.5 * self.kinetic_minus - 0.25 * self.coupling * self.quartic
    }
}

/// Everything one pass over a state produces; reused by the derivative routines.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub breakdown: EnergyBreakdown,
    psi_x: SpinorField,
    rho: ScalarField,
    phi: ScalarField,
    /// `G = H psi - s phi beta psi` in momentum space.
    force: SpinorField,
}

impl Evaluation {
    pub fn psi_position(&self) -> &SpinorField {
        &self.psi_x
    }

    pub fn density(&self) -> &ScalarField {
        &self.rho
    }

    pub fn potential(&self) -> &ScalarField {
        &self.phi
    }

    pub fn force(&self) -> &SpinorField {
        &self.force
    }
}

/// Worst-case diagnostics of the Hessian of `J_w` along probe directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerCriticalAudit {
    /// `int phi_psi Re<w, beta eta>`.
    pub gamma_eta: f64,
    /// Max over probes of `d2J[xi, xi] / |xi|_H^2`.
    pub hessian_rayleigh_max: f64,
    /// `Re<eta, xi> / (1 - |eta|^2)` for the worst probe.
    pub r_coeff: f64,
    /// `|xi|^2 + 2 R Re<eta, xi> - |eta|^2 (|xi|^2 / (1 - |eta|^2) + R^2)` for the worst probe.
    pub q_coeff: f64,
    pub probes: usize,
}

/// Derivative of `E` on the sphere at an inner optimum.
#[derive(Debug, Clone)]
pub struct OuterGradient {
    /// H-Riesz representative, L^2-projected onto the tangent space at `w`.
    pub direction: SpinorField,
    /// Dual norm of `dE(w)` on the positive subspace, `|r|_H`.
    pub norm: f64,
    pub evaluation: Evaluation,
}

/// The functional at fixed mass, kernel and coupling.
#[derive(Debug, Clone, Copy)]
pub struct EnergyModel<'a> {
    pub mult: &'a DiracMultipliers,
    pub kernel: &'a CoulombKernel,
    pub coupling: f64,
}

impl<'a> EnergyModel<'a> {
    pub fn new(mult: &'a DiracMultipliers, kernel: &'a CoulombKernel, coupling: f64) -> Self {
        Self {
            mult,
            kernel,
            coupling,
        }
    }

    pub fn mass(&self) -> f64 {
        self.mult.mass()
    }

    fn check_coupling(&self) -> Result<()> {
        if self.coupling < 0.0 || !self.coupling.is_finite() {
            return Err(Error::Config(format!("coupling must be >= 0, got {}", self.coupling)));
        }
        Ok(())
    }

    /// Density, potential, quartic energy and `G` for a momentum-space `psi`.
    fn nonlinear_pass(&self, psi: &SpinorField) -> Result<(SpinorField, ScalarField, ScalarField, f64, SpinorField)> {
        psi.expect_space(Space::Momentum)?;
        let psi_x = psi.to_position()?;
        let rho = beta_density(&psi_x)?;
        let (rho_hat, quartic) = self.kernel.density_spectrum(&rho)?;
        let phi = self.kernel.potential_from_spectrum(&rho_hat)?;
        let mut source = SpinorField::zeros(psi.grid(), Space::Position);
        for idx in 0..psi.grid().len() {
            let v = beta_apply(&psi_x.site(idx));
            let f = phi.values()[idx].re;
            source.set_site(idx, [v[0] * f, v[1] * f, v[2] * f, v[3] * f]);
        }
        let source_hat = source.to_momentum()?;
        let mut force = self.mult.apply_h(psi)?;
        force.axpy((-self.coupling).into(), &source_hat)?;
        Ok((psi_x, rho, phi, quartic, force))
    }

    /// `I(psi)` with its parts; `psi` may be in either space.
    pub fn eval_i(&self, psi: &SpinorField) -> Result<Evaluation> {
        self.check_coupling()?;
        let psi_p = match psi.space() {
            Space::Momentum => psi.clone(),
            Space::Position => psi.to_momentum()?,
        };
        let kinetic_plus = self.mult.h_norm_sq(&self.mult.project(&psi_p, Sign::Plus)?)?;
        let kinetic_minus = self.mult.h_norm_sq(&self.mult.project(&psi_p, Sign::Minus)?)?;
        let (psi_x, rho, phi, quartic, force) = self.nonlinear_pass(&psi_p)?;
        let i_value = 0.5 * kinetic_plus - 0.5 * kinetic_minus - 0.25 * self.coupling * quartic;
        let norm_sq = psi_p.norm_sq();
        let omega = if norm_sq > 0.0 {
            force.inner(&psi_p)?.re / norm_sq
        } else {
            0.0
        };
        Ok(Evaluation {
            breakdown: EnergyBreakdown {
                kinetic_plus,
                kinetic_minus,
                quartic,
                i_value,
                j_value: i_value,
                omega,
                coupling: self.coupling,
                mass: self.mass(),
            },
            psi_x,
            rho,
            phi,
            force,
        })
    }

    /// `J_w(eta)` with its parts and the multiplier `omega`.
    pub fn eval_j(&self, state: &SplitState) -> Result<Evaluation> {
        self.check_coupling()?;
        let a = state.a;
        let kinetic_plus = a * a * self.mult.h_norm_sq(&state.w)?;
        let kinetic_minus = self.mult.h_norm_sq(&state.eta)?;
        let (psi_x, rho, phi, quartic, force) = self.nonlinear_pass(&state.psi)?;
        let j_value = 0.5 * kinetic_plus - 0.5 * kinetic_minus - 0.25 * self.coupling * quartic;
        let omega = if a >= BOUNDARY_GUARD {
            force.inner(&state.w)?.re / a
        } else {
            f64::NAN
        };
        Ok(Evaluation {
            breakdown: EnergyBreakdown {
                kinetic_plus,
                kinetic_minus,
                quartic,
                i_value: j_value,
                j_value,
                omega,
                coupling: self.coupling,
                mass: self.mass(),
            },
            psi_x,
            rho,
            phi,
            force,
        })
    }

    /// `J_w(eta)` only.
    pub fn j_value(&self, state: &SplitState) -> Result<f64> {
        let a = state.a;
        let kinetic_plus = a * a * self.mult.h_norm_sq(&state.w)?;
        let kinetic_minus = self.mult.h_norm_sq(&state.eta)?;
        let psi_x = state.psi.to_position()?;
        let quartic = self.kernel.density_spectrum(&beta_density(&psi_x)?)?.1;
        Ok(0.5 * kinetic_plus - 0.5 * kinetic_minus - 0.25 * self.coupling * quartic)
    }

    fn guard(state: &SplitState) -> Result<()> {
        if state.a < BOUNDARY_GUARD {
            Err(Error::Boundary(state.a))
        } else {
            Ok(())
        }
    }

    /// L^2 representative of `dJ_w(eta)` on the negative subspace: `L- G - omega eta`.
    fn inner_l2_gradient(&self, state: &SplitState, ev: &Evaluation) -> Result<SpinorField> {
        Self::guard(state)?;
        let mut g = self.mult.project(&ev.force, Sign::Minus)?;
        g.axpy((-ev.breakdown.omega).into(), &state.eta)?;
        Ok(g)
    }

    /// H-Riesz representative of `dJ_w(eta)` in the negative subspace, from a prior evaluation.
    pub fn grad_j_from(&self, state: &SplitState, ev: &Evaluation) -> Result<SpinorField> {
        let g = self.inner_l2_gradient(state, ev)?;
        self.mult.apply_lambda_power(&g, -1.0)
    }

    pub fn grad_j(&self, state: &SplitState) -> Result<SpinorField> {
        Self::guard(state)?;
        let ev = self.eval_j(state)?;
        self.grad_j_from(state, &ev)
    }

    /// `dJ_w(eta)[xi]` evaluated directly from the chain rule.
    pub fn directional_j(&self, state: &SplitState, ev: &Evaluation, xi: &SpinorField) -> Result<f64> {
        Self::guard(state)?;
        let da = -state.eta.inner(xi)?.re / state.a;
        let h = xi.combine(1.0.into(), &state.w, da.into())?;
        Ok(ev.force.inner(&h)?.re)
    }

    /// `dJ_w(eta)[eta]`.
    pub fn radial_derivative(&self, state: &SplitState) -> Result<f64> {
        Self::guard(state)?;
        let ev = self.eval_j(state)?;
        self.radial_derivative_from(state, &ev)
    }

    pub fn radial_derivative_from(&self, state: &SplitState, ev: &Evaluation) -> Result<f64> {
        Self::guard(state)?;
        let g = self.inner_l2_gradient(state, ev)?;
        Ok(g.inner(&state.eta)?.re)
    }

    /// `omega = a^-1 dI(psi)[w]`.
    pub fn multiplier_omega(&self, state: &SplitState) -> Result<f64> {
        Self::guard(state)?;
        Ok(self.eval_j(state)?.breakdown.omega)
    }

    /// `dI(psi)[psi]`, the multiplier at a constrained critical point.
    pub fn di_psi_psi(&self, psi: &SpinorField) -> Result<f64> {
        let ev = self.eval_i(psi)?;
        let psi_p = match psi.space() {
            Space::Momentum => psi.clone(),
            Space::Position => psi.to_momentum()?,
        };
        Ok(ev.force.inner(&psi_p)?.re)
    }

    /// `d2J_w(eta)[xi, xi]` for `xi` in the negative subspace.
    ///
    /// With `h = da[xi] w + xi`, `r = Re<psi, beta h>` and
    /// `d2a[xi, xi] = -a^-1 (|xi|^2 + Re<eta, xi>^2 / (1 - |eta|^2))`:
    ///
    /// ```text
    /// d2J = da^2 |w|_H^2 - |xi|_H^2 - s D(rho, <h, beta h>) - 2 s D(r, r)
    ///       + d2a a |w|_H^2 - s d2a int phi Re<psi, beta w>
    /// ```
    pub fn hessian_quadform_j(&self, state: &SplitState, xi: &SpinorField) -> Result<f64> {
        let ev = self.eval_j(state)?;
        let w_x = state.w.to_position()?;
        self.hessian_with(state, &ev, &w_x, xi)
    }

    fn hessian_with(&self, state: &SplitState, ev: &Evaluation, w_x: &SpinorField, xi: &SpinorField) -> Result<f64> {
        Self::guard(state)?;
        xi.expect_space(Space::Momentum)?;
        let a = state.a;
        let eta_sq = state.eta.norm_sq();
        let eta_xi = state.eta.inner(xi)?.re;
        let xi_sq = xi.norm_sq();
        let da = -eta_xi / a;
        let d2a = -(xi_sq + eta_xi * eta_xi / (1.0 - eta_sq)) / a;
        let w_h = self.mult.h_norm_sq(&state.w)?;
        let xi_h = self.mult.h_norm_sq(xi)?;

        let h = xi.combine(1.0.into(), &state.w, da.into())?;
        let h_x = h.to_position()?;
        let grid = xi.grid();
        let cell = grid.cell_volume();
        let mut r = ScalarField::zeros(grid, Space::Position);
        let mut rho_h_term = 0.0;
        let mut w_term = 0.0;
        for idx in 0..grid.len() {
            let p = ev.psi_x.site(idx);
            let hv = h_x.site(idx);
            let phi = ev.phi.values()[idx].re;
            rho_h_term += phi * beta_pairing(&hv, &hv).re;
            w_term += phi * beta_pairing(&p, &w_x.site(idx)).re;
            r.values_mut()[idx] = Complex64::new(beta_pairing(&p, &hv).re, 0.0);
        }
        rho_h_term *= cell;
        w_term *= cell;
        let r_self = self.kernel.density_spectrum(&r)?.1;
        let s = self.coupling;
        Ok(da * da * w_h - xi_h - s * rho_h_term - 2.0 * s * r_self + d2a * a * w_h - s * d2a * w_term)
    }

    /// Hessian audit over the given probe directions (each projected into the negative subspace).
    pub fn inner_audit(&self, state: &SplitState, probes: &[SpinorField]) -> Result<InnerCriticalAudit> {
        let ev = self.eval_j(state)?;
        let w_x = state.w.to_position()?;
        let eta_x = state.eta.to_position()?;
        let grid = state.w.grid();
        let mut gamma_eta = 0.0;
        for idx in 0..grid.len() {
            gamma_eta += ev.phi.values()[idx].re * beta_pairing(&w_x.site(idx), &eta_x.site(idx)).re;
        }
        gamma_eta *= grid.cell_volume();

        let eta_sq = state.eta.norm_sq();
        let mut worst = InnerCriticalAudit {
            gamma_eta,
            hessian_rayleigh_max: f64::NEG_INFINITY,
            r_coeff: 0.0,
            q_coeff: 0.0,
            probes: probes.len(),
        };
        for probe in probes {
            let xi = self.mult.project(probe, Sign::Minus)?;
            let xi_h = self.mult.h_norm_sq(&xi)?;
            if xi_h == 0.0 {
                continue;
            }
            let quot = self.hessian_with(state, &ev, &w_x, &xi)? / xi_h;
            if quot > worst.hessian_rayleigh_max {
                let eta_xi = state.eta.inner(&xi)?.re;
                let xi_sq = xi.norm_sq();
                let r = eta_xi / (1.0 - eta_sq);
                worst.hessian_rayleigh_max = quot;
                worst.r_coeff = r;
                worst.q_coeff = xi_sq + 2.0 * r * eta_xi - eta_sq * (xi_sq / (1.0 - eta_sq) + r * r);
            }
        }
        Ok(worst)
    }

    /// Outer gradient from an evaluation at an (assumed) inner optimum.
    pub fn grad_e_from(&self, state: &SplitState, ev: &Evaluation) -> Result<OuterGradient> {
        Self::guard(state)?;
        let a = state.a;
        let omega = ev.breakdown.omega;
        let mut r = self.mult.project(&ev.force, Sign::Plus)?;
        r.scale(a.into());
        r.axpy((-a * a * omega).into(), &state.w)?;
        let r = self.mult.apply_lambda_power(&r, -1.0)?;
        let norm = self.mult.h_norm_sq(&r)?.max(0.0).sqrt();
        let c = state.w.inner(&r)?;
        let mut direction = r;
        direction.axpy(-c, &state.w)?;
        Ok(OuterGradient {
            direction,
            norm,
            evaluation: ev.clone(),
        })
    }

    /// `dE(w)` on the sphere, valid when `eta` maximizes `J_w` to within `inner_tol`.
    pub fn grad_e(&self, state: &SplitState, inner_tol: f64) -> Result<OuterGradient> {
        let ev = self.eval_j(state)?;
        let g = self.grad_j_from(state, &ev)?;
        let g_norm = self.mult.h_norm_sq(&g)?.sqrt();
        if g_norm > inner_tol {
            return Err(Error::InnerNotConverged(g_norm));
        }
        self.grad_e_from(state, &ev)
    }

    /// `|H psi - s phi beta psi - omega psi|_{L^2}` for a normalized `psi`.
    pub fn residual(&self, psi: &SpinorField, omega: f64) -> Result<f64> {
        let ev = self.eval_i(psi)?;
        let psi_p = match psi.space() {
            Space::Momentum => psi.clone(),
            Space::Position => psi.to_momentum()?,
        };
        let mut res = ev.force;
        res.axpy((-omega).into(), &psi_p)?;
        Ok(res.norm())
    }
}

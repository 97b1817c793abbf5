//! Two-level min-max: projected ascent in `eta` for fixed `w`, then
//! Riemannian descent in `w` on the positive-energy unit sphere.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coulomb::CoulombKernel;
use crate::dirac::{DiracMultipliers, Sign};
use crate::energy::{EnergyBreakdown, EnergyModel, Evaluation, InnerCriticalAudit, SplitState};
use crate::error::{Error, Result};
use crate::grid::{FourierGrid, Space, SpinorField};
use crate::trial::{negative_probe, stream_rng};

/// Sharp constant in the Coulomb-kinetic inequality.
pub const KATO: f64 = PI / 2.0;

/// Couplings must lie strictly below this value.
pub const MAX_COUPLING: f64 = 1.0 / (8.0 * PI);

/// Position-space width of the unscaled initializer Gaussian, in units of `1/m`.
pub const INIT_BASE_WIDTH: f64 = 2.0;

/// Bound violations smaller than this are reported but do not fail a solve.
pub const FLAG_SLACK: f64 = 1e-6;

/// Slack on inequalities that hold with equality at the torus ground state.
pub const BOUND_SLACK: f64 = 1e-8;

/// Iterates never leave the ball of this L^2 radius.
pub const ETA_RADIUS: f64 = 0.99;

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const ROUNDOFF: f64 = 1e-14;
const HESSIAN_PROBES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub coupling: f64,
    pub mass: f64,
    pub grid_n: usize,
    pub box_length: f64,
    pub tol_inner: f64,
    pub tol_outer: f64,
    pub max_inner_iters: usize,
    pub max_outer_iters: usize,
    pub epsilon_init: f64,
    pub rng_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            coupling: 0.01,
            mass: 1.0,
            grid_n: 32,
            box_length: 40.0,
            tol_inner: 1e-8,
            tol_outer: 1e-6,
            max_inner_iters: 500,
            max_outer_iters: 5000,
            epsilon_init: 0.3,
            rng_seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.coupling > 0.0 && self.coupling < MAX_COUPLING) {
            return bad(format!("coupling {} outside (0, 1/(8 pi)) = (0, {MAX_COUPLING:.6})", self.coupling));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return bad(format!("mass must be positive, got {}", self.mass));
        }
        if !(self.box_length > 0.0 && self.box_length.is_finite()) {
            return bad(format!("box length must be positive, got {}", self.box_length));
        }
        if !(self.tol_inner > 0.0 && self.tol_outer > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.max_inner_iters == 0 || self.max_outer_iters == 0 {
            return bad("iteration limits must be positive".into());
        }
        if !(self.epsilon_init > 0.0 && self.epsilon_init.is_finite()) {
            return bad(format!("epsilon_init must be positive, got {}", self.epsilon_init));
        }
        FourierGrid::new(self.grid_n, self.box_length).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

/// One inequality `lhs <= rhs` (or `lhs < rhs` when `strict`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub slack: f64,
    pub strict: bool,
    pub passed: bool,
    /// Violated by less than the slack.
    pub flagged: bool,
}

impl BoundCheck {
    pub fn new(name: &str, lhs: f64, rhs: f64, slack: f64) -> Self {
        let margin = rhs - lhs;
        Self {
            name: name.into(),
            lhs,
            rhs,
            margin,
            slack,
            strict: false,
            passed: margin >= -slack,
            flagged: margin < 0.0 && margin >= -slack,
        }
    }

    pub fn strict(name: &str, lhs: f64, rhs: f64) -> Self {
        let margin = rhs - lhs;
        Self {
            name: name.into(),
            lhs,
            rhs,
            margin,
            slack: 0.0,
            strict: true,
            passed: margin > 0.0,
            flagged: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundsAudit {
    pub checks: Vec<BoundCheck>,
}

impl BoundsAudit {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Invariant bookkeeping along inner ascent iterates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AscentChecks {
    /// Accepted iterates with `J >= 0` tested against `|eta|_H^2 <= a^2 |w|_H^2 - 2J`.
    pub kinetic_checked: usize,
    pub kinetic_violations: usize,
    /// Trial points with `|eta|^2 >= 1/2` and `J >= 0`, tested for inward radial drive.
    pub inward_checked: usize,
    pub inward_violations: usize,
}

impl AscentChecks {
    fn absorb(&mut self, other: &AscentChecks) {
        self.kinetic_checked += other.kinetic_checked;
        self.kinetic_violations += other.kinetic_violations;
        self.inward_checked += other.inward_checked;
        self.inward_violations += other.inward_violations;
    }
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub state: SplitState,
    pub evaluation: Evaluation,
    pub grad_norm: f64,
    pub iters: usize,
    pub checks: AscentChecks,
}

impl InnerResult {
    pub fn j_value(&self) -> f64 {
        self.evaluation.breakdown.j_value
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub coupling: f64,
    pub mass: f64,
    pub grid_n: usize,
    pub box_length: f64,
    pub e_value: f64,
    pub omega: f64,
    pub di_psi_psi: f64,
    pub residual_l2: f64,
    pub psi_l2_norm: f64,
    pub w_h_norm_sq: f64,
    pub eta_l2_sq: f64,
    pub eta_h_norm_sq: f64,
    pub outer_grad_norm: f64,
    pub inner_grad_norm: f64,
    pub inner_iters: usize,
    pub outer_iters: usize,
    pub epsilon_used: f64,
    pub breakdown: EnergyBreakdown,
    pub ascent_checks: AscentChecks,
    pub bounds_audit: BoundsAudit,
    pub hessian_audit: InnerCriticalAudit,
    #[serde(skip)]
    pub psi: Option<SpinorField>,
    #[serde(skip)]
    pub w: Option<SpinorField>,
    #[serde(skip)]
    pub eta: Option<SpinorField>,
}

impl SolveReport {
    /// All audits hold: bounds, Hessian negativity and ascent invariants.
    pub fn passed(&self) -> bool {
        self.bounds_audit.passed()
            && self.hessian_audit.hessian_rayleigh_max < 0.0
            && self.ascent_checks.kinetic_violations == 0
            && self.ascent_checks.inward_violations == 0
    }
}

fn normalized(mut f: SpinorField) -> Result<SpinorField> {
    let n = f.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::ProjectionCollapse(n));
    }
    f.scale((1.0 / n).into());
    Ok(f)
}

/// Positive-energy projection followed by L^2 normalization.
pub fn retract(mult: &DiracMultipliers, w: &SpinorField) -> Result<SpinorField> {
    normalized(mult.project(w, Sign::Plus)?)
}

/// Phase making the largest-magnitude momentum coefficient real and positive.
pub fn gauge_phase(w: &SpinorField) -> Complex64 {
    let mut best = Complex64::new(1.0, 0.0);
    let mut best_norm = -1.0;
    for v in w.values() {
        let n = v.norm();
        if n > best_norm {
            best_norm = n;
            best = *v;
        }
    }
    if best_norm > 0.0 {
        best.conj() / best_norm
    } else {
        Complex64::new(1.0, 0.0)
    }
}

/// Normalized upper-spinor Gaussian of width `INIT_BASE_WIDTH / (m eps)` centred in the box,
/// before projection, in momentum space.
pub fn scaled_trial(mult: &DiracMultipliers, epsilon: f64) -> Result<SpinorField> {
    let grid = mult.grid();
    let sigma = INIT_BASE_WIDTH / (mult.mass() * epsilon);
    let c = grid.center();
    let f = SpinorField::from_momentum_fn(grid, |p| {
        let p2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        let amp = Complex64::from_polar((-0.5 * p2 * sigma * sigma).exp(), -(p[0] * c[0] + p[1] * c[1] + p[2] * c[2]));
        [amp, Complex64::default(), Complex64::default(), Complex64::default()]
    });
    normalized(f)
}

/// Initial point on the sphere and the scaling parameter actually used.
///
/// The projection must keep more than half of the L^2 mass; otherwise the
/// scaling parameter is halved, up to eight times.
pub fn initial_w(mult: &DiracMultipliers, epsilon: f64) -> Result<(SpinorField, f64)> {
    let mut eps = epsilon;
    let mut last = 0.0;
    for _ in 0..=8 {
        let raw = scaled_trial(mult, eps)?;
        let plus = mult.project(&raw, Sign::Plus)?;
        last = plus.norm();
        if last > 0.5 {
            return Ok((normalized(plus)?, eps));
        }
        eps *= 0.5;
    }
    Err(Error::ProjectionCollapse(last))
}

/// Random start in the negative subspace with L^2 norm `radius`.
pub fn random_eta(mult: &DiracMultipliers, seed: u64, stream: u64, radius: f64) -> Result<SpinorField> {
    let mut rng = stream_rng(seed, stream);
    let f = normalized(negative_probe(mult, &mut rng)?)?;
    Ok(f.scaled(radius.into()))
}

fn clamp_to_ball(mut eta: SpinorField) -> SpinorField {
    let n = eta.norm();
    if n > ETA_RADIUS {
        eta.scale((ETA_RADIUS / n).into());
    }
    eta
}

/// Maximizes `J_w` over the negative-subspace ball by projected gradient ascent.
pub fn inner_maximize(
    model: &EnergyModel,
    w: &SpinorField,
    config: &SolverConfig,
    warm_start: Option<&SpinorField>,
) -> Result<InnerResult> {
    let mult = model.mult;
    let eta0 = match warm_start {
        Some(e) => clamp_to_ball(mult.project(e, Sign::Minus)?),
        None => SpinorField::zeros(w.grid(), Space::Momentum),
    };
    let mut state = SplitState::new(mult, w.clone(), eta0)?;
    let mut ev = model.eval_j(&state)?;
    let mut grad = model.grad_j_from(&state, &ev)?;
    let mut grad_norm = mult.h_norm_sq(&grad)?.sqrt();
    let mut checks = AscentChecks::default();

    // Optimal fixed step for the quadratic part, whose H-Rayleigh quotients
    // lie in [-(1 + W/m), -(1 + W/lambda_max)].
    let w_h = mult.h_norm_sq(w)?;
    let t0 = 2.0 / ((1.0 + w_h / mult.mass()) + (1.0 + w_h / mult.lambda_max()));
    let mut step = t0;

    let mut iters = 0;
    while grad_norm > config.tol_inner {
        if iters >= config.max_inner_iters {
            return Err(Error::NotConverged {
                stage: "inner ascent",
                iters,
                grad_norm,
            });
        }
        iters += 1;
        let j = ev.breakdown.j_value;
        let mut t = step;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut trial = state.eta().clone();
            trial.axpy(t.into(), &grad)?;
            let trial = clamp_to_ball(trial);
            let cand = SplitState::new(mult, w.clone(), trial)?;
            let cand_ev = model.eval_j(&cand)?;
            let cand_j = cand_ev.breakdown.j_value;

            if cand.eta_norm_sq() >= 0.5 && cand_j >= 0.0 {
                let radial = model.radial_derivative_from(&cand, &cand_ev)?;
                checks.inward_checked += 1;
                if radial > -0.5 * (1.0 - 4.0 * model.coupling * KATO) * mult.mass() {
                    checks.inward_violations += 1;
                }
                t *= 0.5;
                continue;
            }

            let delta = cand.eta().combine(1.0.into(), state.eta(), (-1.0).into())?;
            let slope = mult.h_inner(&grad, &delta)?.re;
            let armijo = cand_j >= j + ARMIJO * slope;
            let cand_grad = model.grad_j_from(&cand, &cand_ev)?;
            let cand_norm = mult.h_norm_sq(&cand_grad)?.sqrt();
            let floor = cand_j >= j - ROUNDOFF * j.abs().max(1.0);
            if (armijo && cand_j >= j) || (floor && (armijo || cand_norm < grad_norm)) {
                accepted = Some((cand, cand_ev, cand_grad, cand_norm));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, cand_ev, cand_grad, cand_norm)) = accepted else {
            return Err(Error::LineSearch {
                stage: "inner ascent",
                iter: iters,
            });
        };
        state = cand;
        ev = cand_ev;
        grad = cand_grad;
        grad_norm = cand_norm;
        step = (2.0 * t).min(t0);

        let j = ev.breakdown.j_value;
        if j >= 0.0 {
            checks.kinetic_checked += 1;
            let lhs = mult.h_norm_sq(state.eta())?;
            let rhs = state.a() * state.a() * w_h - 2.0 * j;
            if lhs > rhs + BOUND_SLACK * rhs.abs().max(1.0) {
                checks.kinetic_violations += 1;
            }
        }
    }
    Ok(InnerResult {
        state,
        evaluation: ev,
        grad_norm,
        iters,
        checks,
    })
}

/// Hessian audit at an inner optimum over seeded random probes.
pub fn hessian_audit(model: &EnergyModel, state: &SplitState, seed: u64, probes: usize) -> Result<InnerCriticalAudit> {
    let mut rng = stream_rng(seed, 0x4845_5353);
    let dirs = (0..probes)
        .map(|_| negative_probe(model.mult, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    model.inner_audit(state, &dirs)
}

struct OuterPoint {
    w: SpinorField,
    inner: InnerResult,
    direction: SpinorField,
    grad_norm: f64,
}

fn outer_point(model: &EnergyModel, w: SpinorField, config: &SolverConfig, warm: Option<&SpinorField>) -> Result<OuterPoint> {
    let inner = inner_maximize(model, &w, config, warm)?;
    let g = model.grad_e_from(&inner.state, &inner.evaluation)?;
    Ok(OuterPoint {
        w,
        inner,
        direction: g.direction,
        grad_norm: g.norm,
    })
}

/// Minimizes the reduced energy over the positive-energy unit sphere.
pub fn outer_minimize(mult: &DiracMultipliers, kernel: &CoulombKernel, config: &SolverConfig) -> Result<SolveReport> {
    config.validate()?;
    if (mult.mass() - config.mass).abs() > 0.0 || mult.grid().n() != config.grid_n || mult.grid().box_length() != config.box_length {
        return Err(Error::Config("multipliers do not match the configuration".into()));
    }
    let model = EnergyModel::new(mult, kernel, config.coupling);
    let (w0, eps_used) = initial_w(mult, config.epsilon_init)?;
    let phase = gauge_phase(&w0);
    let mut cur = outer_point(&model, w0.scaled(phase), config, None)?;
    let mut inner_iters = cur.inner.iters;
    let mut checks = cur.inner.checks;

    let mut step = 1.0;
    let mut prev: Option<(SpinorField, SpinorField)> = None;
    let mut outer_iters = 0;
    while cur.grad_norm > config.tol_outer {
        if outer_iters >= config.max_outer_iters {
            return Err(Error::NotConverged {
                stage: "outer descent",
                iters: outer_iters,
                grad_norm: cur.grad_norm,
            });
        }
        outer_iters += 1;

        if let Some((pw, pd)) = &prev {
            let s = cur.w.combine(1.0.into(), pw, (-1.0).into())?;
            let y = cur.direction.combine(1.0.into(), pd, (-1.0).into())?;
            let ss = mult.h_norm_sq(&s)?;
            let sy = mult.h_inner(&s, &y)?.re;
            if sy > 0.0 && (ss / sy).is_finite() {
                step = (ss / sy).clamp(1e-3, 1e3);
            }
        }

        let e = cur.inner.j_value();
        let slope = mult.h_inner(&cur.direction, &cur.direction)?.re;
        let mut t = step;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let raw = cur.w.combine(1.0.into(), &cur.direction, (-t).into())?;
            let w_try = retract(mult, &raw)?;
            let phase = gauge_phase(&w_try);
            let w_try = w_try.scaled(phase);
            let cand = outer_point(&model, w_try, config, Some(cur.inner.state.eta()))?;
            let e_try = cand.inner.j_value();
            let armijo = e_try <= e - ARMIJO * t * slope;
            let floor = e_try <= e + ROUNDOFF * e.abs().max(1.0);
            inner_iters += cand.inner.iters;
            checks.absorb(&cand.inner.checks);
            if armijo || (floor && cand.grad_norm < cur.grad_norm) {
                accepted = Some(cand);
                break;
            }
            t *= 0.5;
        }
        let Some(next) = accepted else {
            return Err(Error::LineSearch {
                stage: "outer descent",
                iter: outer_iters,
            });
        };
        step = t;
        prev = Some((cur.w.clone(), cur.direction.clone()));
        cur = next;
    }

    finish_report(&model, config, cur, inner_iters, outer_iters, checks, eps_used)
}

fn finish_report(
    model: &EnergyModel,
    config: &SolverConfig,
    point: OuterPoint,
    inner_iters: usize,
    outer_iters: usize,
    checks: AscentChecks,
    eps_used: f64,
) -> Result<SolveReport> {
    let mult = model.mult;
    let s = config.coupling;
    let m = mult.mass();
    let state = &point.inner.state;
    let b = point.inner.evaluation.breakdown;
    let e = b.j_value;
    let omega = b.omega;
    let psi = state.psi().clone();
    let residual = model.residual(&psi, omega)?;
    let di = model.di_psi_psi(&psi)?;
    let w_h = mult.h_norm_sq(state.w())?;
    let eta_h = mult.h_norm_sq(state.eta())?;
    let eta_sq = state.eta_norm_sq();
    let a = state.a();
    let hessian = hessian_audit(model, state, config.rng_seed, HESSIAN_PROBES)?;

    let checks_list = vec![
        BoundCheck::new("psi_normalized", (psi.norm() - 1.0).abs(), 1e-9, 0.0),
        BoundCheck::new("residual", residual, 10.0 * config.tol_outer, 0.0),
        BoundCheck::new("multiplier_consistency", (omega - di).abs(), 1e-6, 0.0),
        BoundCheck::strict("omega_positive", 0.0, omega),
        BoundCheck::strict("omega_below_mass", omega, m),
        BoundCheck::new("multiplier_lower", (1.0 - 3.0 * s * KATO) * w_h, omega, BOUND_SLACK),
        BoundCheck::new("multiplier_upper", omega, 2.0 * e, BOUND_SLACK),
        BoundCheck::new("energy_lower", 0.25 * (2.0 - s * KATO) * m, e, BOUND_SLACK),
        BoundCheck::new("energy_upper", e, 0.5 * w_h, BOUND_SLACK),
        BoundCheck::strict("energy_below_half_mass", e, 0.5 * m),
        BoundCheck::strict("eta_mass_below_half", eta_sq, 0.5),
        BoundCheck::new("eta_kinetic_gap", eta_h + m, a * a * w_h, FLAG_SLACK),
        BoundCheck::new("eta_coupling_bound", eta_h, 0.5 * s * KATO * w_h, FLAG_SLACK),
        BoundCheck::new("inner_value_nonnegative", 0.0, e, 0.0),
    ];

    Ok(SolveReport {
        coupling: s,
        mass: m,
        grid_n: config.grid_n,
        box_length: config.box_length,
        e_value: e,
        omega,
        di_psi_psi: di,
        residual_l2: residual,
        psi_l2_norm: psi.norm(),
        w_h_norm_sq: w_h,
        eta_l2_sq: eta_sq,
        eta_h_norm_sq: eta_h,
        outer_grad_norm: point.grad_norm,
        inner_grad_norm: point.inner.grad_norm,
        inner_iters,
        outer_iters,
        epsilon_used: eps_used,
        breakdown: b,
        ascent_checks: checks,
        bounds_audit: BoundsAudit { checks: checks_list },
        hessian_audit: hessian,
        psi: Some(psi),
        w: Some(state.w().clone()),
        eta: Some(state.eta().clone()),
    })
}

/// `|H psi - s phi beta psi - omega psi|` for the report's state.
pub fn residual(mult: &DiracMultipliers, kernel: &CoulombKernel, report: &SolveReport) -> Result<f64> {
    let psi = report
        .psi
        .as_ref()
        .ok_or_else(|| Error::InvalidState("report carries no state".into()))?;
    EnergyModel::new(mult, kernel, report.coupling).residual(psi, report.omega)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub reports: Vec<SolveReport>,
    /// `e(s_i) - e(s_{i+1})` for consecutive couplings.
    pub decrease_margins: Vec<f64>,
    /// Doubling checks `2(e(2s) - m/2) <= 4(e(s) - m/2)` for pairs present in the list.
    pub doubling_checks: Vec<BoundCheck>,
}

impl SweepResult {
    pub fn monotone(&self) -> bool {
        self.decrease_margins.iter().all(|&d| d > BOUND_SLACK)
    }

    pub fn passed(&self) -> bool {
        self.monotone() && self.doubling_checks.iter().all(|c| c.passed) && self.reports.iter().all(|r| r.passed())
    }
}

/// Solves at every coupling (sorted ascending) and checks the decrease of `e(s)`.
pub fn sweep_e(mult: &DiracMultipliers, kernel: &CoulombKernel, couplings: &[f64], config: &SolverConfig) -> Result<SweepResult> {
    let mut list = couplings.to_vec();
    list.sort_by(f64::total_cmp);
    list.dedup();
    let reports = list
        .par_iter()
        .map(|&s| {
            let cfg = SolverConfig {
                coupling: s,
                ..config.clone()
            };
            outer_minimize(mult, kernel, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let decrease_margins = reports.windows(2).map(|p| p[0].e_value - p[1].e_value).collect();
    let half = 0.5 * mult.mass();
    let mut doubling_checks = Vec::new();
    for r in &reports {
        if let Some(r2) = reports.iter().find(|q| (q.coupling - 2.0 * r.coupling).abs() <= 1e-12 * q.coupling) {
            doubling_checks.push(BoundCheck::new(
                &format!("doubling_s{}", r.coupling),
                2.0 * (r2.e_value - half),
                4.0 * (r.e_value - half),
                BOUND_SLACK,
            ));
        }
    }
    Ok(SweepResult {
        reports,
        decrease_margins,
        doubling_checks,
    })
}

//! Randomized stress tests of the inequalities the min-max scheme relies on.
//!
//! Every check samples independent trials, each from its own generator stream
//! `(seed, trial)`, and records the normalized margin
//! `(rhs - lhs) / max(1, |lhs|, |rhs|)` of an inequality `lhs <= rhs`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coulomb::{mass_density, CoulombKernel};
use crate::dirac::{DiracMultipliers, Sign};
use crate::energy::{EnergyModel, SplitState};
use crate::error::{Error, Result};
use crate::grid::{ScalarField, Space, SpinorField};
use crate::solver::{SolveReport, KATO};
use crate::trial::{projected_trial, signed_mixture, stream_rng, Envelope, max_trial_momentum};

/// Slack for inequalities proved on the whole space and tested on the torus.
pub const CONTINUUM_SLACK: f64 = 1e-8;

/// Slack for identities that hold exactly on the grid.
pub const DISCRETE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IneqResult {
    pub name: String,
    pub trials: usize,
    pub worst_margin: f64,
    pub worst_trial: Option<usize>,
    pub failures: usize,
    pub tolerance_slack: f64,
}

impl IneqResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    fn from_sides(name: &str, sides: &[(f64, f64)], slack: f64) -> Self {
        let mut worst_margin = f64::INFINITY;
        let mut worst_trial = None;
        let mut failures = 0;
        for (i, &(lhs, rhs)) in sides.iter().enumerate() {
            let m = margin(lhs, rhs);
            if m < worst_margin || m.is_nan() {
                worst_margin = m;
                worst_trial = Some(i);
            }
            if !(m >= -slack) {
                failures += 1;
            }
        }
        Self {
            name: name.into(),
            trials: sides.len(),
            worst_margin,
            worst_trial,
            failures,
            tolerance_slack: slack,
        }
    }
}

/// `(rhs - lhs) / max(1, |lhs|, |rhs|)`.
pub fn margin(lhs: f64, rhs: f64) -> f64 {
    (rhs - lhs) / 1f64.max(lhs.abs()).max(rhs.abs())
}

fn run_trials<F>(name: &str, trials: usize, slack: f64, f: F) -> Result<IneqResult>
where
    F: Fn(usize) -> Result<(f64, f64)> + Sync + Send,
{
    let sides = (0..trials).into_par_iter().map(f).collect::<Result<Vec<_>>>()?;
    Ok(IneqResult::from_sides(name, &sides, slack))
}

/// `D(f, f) >= 0` for signed Gaussian mixtures.
pub fn check_coulomb_positivity(kernel: &CoulombKernel, trials: usize, seed: u64) -> Result<IneqResult> {
    run_trials("coulomb_positivity", trials, DISCRETE_SLACK, |t| {
        let mut rng = stream_rng(seed, t as u64);
        let f = signed_mixture(kernel.grid(), &mut rng);
        let scale = f.l1_norm().powi(2).max(1.0);
        Ok((0.0, kernel.pairing(&f, &f)? / scale))
    })
}

/// `int int rho(x) |psi(y)|^2 / |x - y| <= (pi/2) |rho|_1 |psi|_H^2` for `rho >= 0`.
pub fn check_kato(mult: &DiracMultipliers, kernel: &CoulombKernel, trials: usize, seed: u64) -> Result<IneqResult> {
    let grid = mult.grid();
    let pmax = max_trial_momentum(mult);
    run_trials("kato", trials, CONTINUUM_SLACK, |t| {
        let mut rng = stream_rng(seed, t as u64);
        let rho = Envelope::sample(&mut rng, grid, pmax).density(grid);
        let psi = Envelope::sample(&mut rng, grid, pmax).spinor(grid);
        kato_sides(mult, kernel, &rho, &psi)
    })
}

/// Both sides of the Coulomb-kinetic inequality for a given density and spinor.
pub fn kato_sides(
    mult: &DiracMultipliers,
    kernel: &CoulombKernel,
    rho: &ScalarField,
    psi: &SpinorField,
) -> Result<(f64, f64)> {
    let psi_x = match psi.space() {
        Space::Position => psi.clone(),
        Space::Momentum => psi.to_position()?,
    };
    let lhs = kernel.pairing(rho, &mass_density(&psi_x)?)?;
    let rhs = KATO * rho.l1_norm() * mult.h_norm_sq(&psi_x.to_momentum()?)?;
    Ok((lhs, rhs))
}

/// Lower bound on `Q(a w + eta)` in terms of `Q(w)` and the sizes of `eta` and `w`.
pub fn check_appendix_lemma(mult: &DiracMultipliers, kernel: &CoulombKernel, trials: usize, seed: u64) -> Result<IneqResult> {
    run_trials("quartic_split", trials, CONTINUUM_SLACK, |t| {
        let mut rng = stream_rng(seed, t as u64);
        let w = projected_trial(mult, &mut rng, Sign::Plus)?;
        let dir = projected_trial(mult, &mut rng, Sign::Minus)?;
        let radius: f64 = rand::Rng::random_range(&mut rng, 0.0..=0.7);
        let eta = dir.scaled(radius.into());
        appendix_sides(mult, kernel, &w, &eta)
    })
}

/// Sides `(rhs_bound, Q(psi))` of the quartic lower bound, so that `lhs <= rhs` is the claim.
pub fn appendix_sides(
    mult: &DiracMultipliers,
    kernel: &CoulombKernel,
    w: &SpinorField,
    eta: &SpinorField,
) -> Result<(f64, f64)> {
    let state = SplitState::new(mult, w.clone(), eta.clone())?;
    let a = state.a();
    let eta_sq = state.eta_norm_sq();
    let w_h = mult.h_norm_sq(w)?;
    let eta_h = mult.h_norm_sq(eta)?;
    let m = mult.mass();
    let q_psi = kernel.quartic_energy(&state.psi().to_position()?)?;
    let q_w = kernel.quartic_energy(&w.to_position()?)?;
    let bound = q_w - 2.0 * KATO * eta_sq * w_h - 14.0 * a * a * KATO * (w_h - m * w.norm_sq()) - 18.0 * KATO * eta_h;
    Ok((bound, q_psi))
}

/// Re-derives the energy and multiplier bounds of a solve from its stored state.
///
/// Each family mixes the reported numbers with a fresh evaluation, so a
/// report whose fields disagree with its state fails as well.
pub fn check_solution_bounds(mult: &DiracMultipliers, kernel: &CoulombKernel, report: &SolveReport) -> Result<Vec<IneqResult>> {
    let (w, eta) = match (&report.w, &report.eta) {
        (Some(w), Some(eta)) => (w.clone(), eta.clone()),
        _ => return Err(Error::InvalidState("report carries no state".into())),
    };
    let s = report.coupling;
    let m = mult.mass();
    let model = EnergyModel::new(mult, kernel, s);
    let state = SplitState::new(mult, w, eta)?;
    let ev = model.eval_j(&state)?;
    let e_fresh = ev.breakdown.j_value;
    let omega_fresh = model.di_psi_psi(state.psi())?;
    let w_h = mult.h_norm_sq(state.w())?;

    let mut out = Vec::new();
    let mut energy = Vec::new();
    let mut multiplier = Vec::new();
    let mut gap = Vec::new();
    let mut below = Vec::new();
    for (e, omega) in [(report.e_value, report.omega), (e_fresh, omega_fresh)] {
        energy.push((0.25 * (2.0 - s * KATO) * m, e));
        energy.push((e, 0.5 * w_h));
        multiplier.push(((1.0 - 3.0 * s * KATO) * w_h, omega));
        multiplier.push((omega, 2.0 * e));
        gap.push((0.0, omega));
        gap.push((omega, m));
        below.push((e, 0.5 * m));
    }
    out.push(IneqResult::from_sides("energy_bounds", &energy, CONTINUUM_SLACK));
    out.push(IneqResult::from_sides("multiplier_bounds", &multiplier, CONTINUUM_SLACK));
    out.push(strict("omega_in_gap", &gap));
    out.push(strict("energy_below_half_mass", &below));
    Ok(out)
}

fn strict(name: &str, sides: &[(f64, f64)]) -> IneqResult {
    let mut r = IneqResult::from_sides(name, sides, 0.0);
    r.failures = sides.iter().filter(|&&(l, h)| !(margin(l, h) > 0.0)).count();
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Coulomb,
    Kato,
    Appendix,
}

impl CheckKind {
    pub const ALL: [CheckKind; 3] = [CheckKind::Coulomb, CheckKind::Kato, CheckKind::Appendix];

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "coulomb" => Some(Self::Coulomb),
            "kato" => Some(Self::Kato),
            "appendix" => Some(Self::Appendix),
            _ => None,
        }
    }

    pub fn run(self, mult: &DiracMultipliers, kernel: &CoulombKernel, trials: usize, seed: u64) -> Result<IneqResult> {
        match self {
            Self::Coulomb => check_coulomb_positivity(kernel, trials, seed),
            Self::Kato => check_kato(mult, kernel, trials, seed),
            Self::Appendix => check_appendix_lemma(mult, kernel, trials, seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn margin_is_scale_aware() {
        assert_eq!(margin(0.0, 0.5), 0.5);
        assert_eq!(margin(10.0, 12.0), 2.0 / 12.0);
        assert!(margin(2.0, 1.0) < 0.0);
    }

    #[test]
    fn failures_count_below_slack() {
        let r = IneqResult::from_sides("x", &[(0.0, 1.0), (1.0, 1.0 - 1e-12), (1.0, 0.5)], 1e-10);
        assert_eq!(r.failures, 1);
        assert_eq!(r.worst_trial, Some(2));
        assert_eq!(r.trials, 3);
    }

    #[test]
    fn zero_density_gives_equality() {
        let grid = build_grid(8, 10.0).unwrap();
        let mult = DiracMultipliers::new(&grid, 1.0).unwrap();
        let kernel = CoulombKernel::new(&grid);
        let rho = ScalarField::zeros(&grid, Space::Position);
        let psi = Envelope::sample(&mut stream_rng(0, 0), &grid, 0.5).spinor(&grid);
        assert_eq!(kato_sides(&mult, &kernel, &rho, &psi).unwrap().0, 0.0);
        assert_eq!(kato_sides(&mult, &kernel, &rho, &psi).unwrap().1, 0.0);
    }

    #[test]
    fn vanishing_eta_gives_zero_margin() {
        let grid = build_grid(16, 20.0).unwrap();
        let mult = DiracMultipliers::new(&grid, 1.0).unwrap();
        let kernel = CoulombKernel::new(&grid);
        let w = projected_trial(&mult, &mut stream_rng(3, 0), Sign::Plus).unwrap();
        let eta = SpinorField::zeros(&grid, Space::Momentum);
        let (bound, q) = appendix_sides(&mult, &kernel, &w, &eta).unwrap();
        let w_h = mult.h_norm_sq(&w).unwrap();
        assert!((q - bound - 14.0 * KATO * (w_h - 1.0)).abs() <= 1e-12 * q.max(1.0));
    }

    #[test]
    fn check_names_parse() {
        assert_eq!(CheckKind::parse("kato"), Some(CheckKind::Kato));
        assert_eq!(CheckKind::parse("nope"), None);
    }
}

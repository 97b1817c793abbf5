#![allow(dead_code)]

use std::sync::Arc;

use dmxm_core::dirac::{Mat4, Sign};
use dmxm_core::energy::{EnergyModel, SplitState};
use dmxm_core::grid::{FourierGrid, ScalarField};
use dmxm_core::trial::{projected_trial, stream_rng};
use dmxm_core::{CoulombKernel, DiracMultipliers, SpinorField};
use nalgebra::Matrix4;
use num_complex::Complex64;
use rand::Rng;

pub struct Setup {
    pub grid: Arc<FourierGrid>,
    pub mult: DiracMultipliers,
    pub kernel: CoulombKernel,
}

pub fn setup(n: usize, l: f64, m: f64) -> Setup {
    let grid = dmxm_core::build_grid(n, l).unwrap();
    let mult = DiracMultipliers::new(&grid, m).unwrap();
    let kernel = CoulombKernel::new(&grid);
    Setup { grid, mult, kernel }
}

/// Random localized split state with `|eta|` uniform in `[0.1, 0.5]`.
pub fn random_state(mult: &DiracMultipliers, seed: u64, stream: u64) -> SplitState {
    let mut rng = stream_rng(seed, stream);
    let w = projected_trial(mult, &mut rng, Sign::Plus).unwrap();
    let eta = projected_trial(mult, &mut rng, Sign::Minus).unwrap();
    let r: f64 = rng.random_range(0.1..=0.5);
    SplitState::new(mult, w, eta.scaled(r.into())).unwrap()
}

pub fn shifted(mult: &DiracMultipliers, state: &SplitState, xi: &SpinorField, t: f64) -> SplitState {
    let mut eta = state.eta().clone();
    eta.axpy(t.into(), xi).unwrap();
    SplitState::new(mult, state.w().clone(), eta).unwrap()
}

fn j_at(model: &EnergyModel, state: &SplitState, xi: &SpinorField, t: f64) -> f64 {
    model.j_value(&shifted(model.mult, state, xi, t)).unwrap()
}

/// Central first difference of `J` along `xi`, Richardson-extrapolated.
pub fn fd_first(model: &EnergyModel, state: &SplitState, xi: &SpinorField, t: f64) -> f64 {
    let d = |h: f64| (j_at(model, state, xi, h) - j_at(model, state, xi, -h)) / (2.0 * h);
    (4.0 * d(0.5 * t) - d(t)) / 3.0
}

/// Central second difference of `J` along `xi`, Richardson-extrapolated.
pub fn fd_second(model: &EnergyModel, state: &SplitState, xi: &SpinorField, t: f64) -> f64 {
    let j0 = model.j_value(state).unwrap();
    let d = |h: f64| (j_at(model, state, xi, h) - 2.0 * j0 + j_at(model, state, xi, -h)) / (h * h);
    (4.0 * d(0.5 * t) - d(t)) / 3.0
}

/// `D(f, g)` by direct summation over all pairs of sites, with the periodic
/// kernel itself assembled by a direct sum over modes.
pub fn direct_pairing(kernel: &CoulombKernel, f: &ScalarField, g: &ScalarField) -> f64 {
    let grid = kernel.grid();
    let n = grid.n();
    let l = grid.box_length();
    let h = grid.spacing();
    let modes: Vec<([f64; 3], f64)> = (0..grid.len())
        .map(|idx| (grid.momentum(idx), kernel.multiplier()[idx]))
        .collect();
    let kernel_at = |d: [usize; 3]| -> f64 {
        let r = d.map(|c| c as f64 * h);
        modes
            .iter()
            .map(|(p, m)| m * (p[0] * r[0] + p[1] * r[1] + p[2] * r[2]).cos())
            .sum::<f64>()
            / (l * l * l)
    };
    let mut table = vec![0.0; grid.len()];
    for (idx, slot) in table.iter_mut().enumerate() {
        *slot = kernel_at(grid.unravel(idx));
    }
    let mut total = 0.0;
    for x in 0..grid.len() {
        let a = grid.unravel(x);
        let fx = f.values()[x].re;
        for y in 0..grid.len() {
            let b = grid.unravel(y);
            let d = grid.index((a[0] + n - b[0]) % n, (a[1] + n - b[1]) % n, (a[2] + n - b[2]) % n);
            total += fx * g.values()[y].re * table[d];
        }
    }
    total * grid.cell_volume() * grid.cell_volume()
}

pub fn to_na(a: &Mat4) -> Matrix4<Complex64> {
    Matrix4::from_fn(|i, j| a[i][j])
}

/// Spectral projector onto the eigenvalues of the given sign, from a Hermitian eigensolver.
pub fn eigen_projector(h: &Mat4, sign: Sign) -> Mat4 {
    let eig = to_na(h).symmetric_eigen();
    let mut p = Matrix4::<Complex64>::zeros();
    for k in 0..4 {
        if eig.eigenvalues[k] * sign.factor() > 0.0 {
            let v = eig.eigenvectors.column(k);
            p += v * v.adjoint();
        }
    }
    let mut out = [[Complex64::default(); 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c = p[(i, j)];
        }
    }
    out
}

pub fn eigenvalues(h: &Mat4) -> Vec<f64> {
    let mut v: Vec<f64> = to_na(h).symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

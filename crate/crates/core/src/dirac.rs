//! Free Dirac operator `H = -i alpha . grad + m beta` as per-mode 4x4 algebra.
//!
//! Standard representation with the Hermitian Pauli matrices. Per momentum
//! mode the symbol is `alpha . p + m beta`, with eigenvalues `+-lambda(p)`,
//! `lambda(p) = sqrt(|p|^2 + m^2)`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Direction, FourierGrid, Space, SpinorField};

pub type Spinor = [Complex64; 4];
pub type Mat4 = [[Complex64; 4]; 4];
pub type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Energy sign selecting a spectral subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

pub fn pauli(k: usize) -> Mat2 {
    match k {
        0 => [[ZERO, ONE], [ONE, ZERO]],
        1 => [[ZERO, -I], [I, ZERO]],
        2 => [[ONE, ZERO], [ZERO, -ONE]],
        _ => panic!("Pauli index {k} out of range"),
    }
}

pub fn identity4() -> Mat4 {
    let mut m = [[ZERO; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = ONE;
    }
    m
}

pub fn beta() -> Mat4 {
    let mut m = identity4();
    m[2][2] = -ONE;
    m[3][3] = -ONE;
    m
}

/// `alpha_k = [[0, sigma_k], [sigma_k, 0]]`.
pub fn alpha(k: usize) -> Mat4 {
    let s = pauli(k);
    let mut m = [[ZERO; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j + 2] = s[i][j];
            m[i + 2][j] = s[i][j];
        }
    }
    m
}

/// `gamma^0 = beta`, `gamma^k = [[0, sigma_k], [-sigma_k, 0]]` for k = 1..3.
pub fn gamma(mu: usize) -> Mat4 {
    if mu == 0 {
        return beta();
    }
    let s = pauli(mu - 1);
    let mut m = [[ZERO; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j + 2] = s[i][j];
            m[i + 2][j] = -s[i][j];
        }
    }
    m
}

pub fn mat_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[ZERO; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat_add(a: &Mat4, b: &Mat4, scale_b: Complex64) -> Mat4 {
    let mut out = *a;
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] += scale_b * b[i][j];
        }
    }
    out
}

pub fn mat_scale(a: &Mat4, s: Complex64) -> Mat4 {
    let mut out = *a;
    out.iter_mut().flatten().for_each(|v| *v *= s);
    out
}

pub fn adjoint(a: &Mat4) -> Mat4 {
    let mut out = [[ZERO; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[j][i].conj();
        }
    }
    out
}

pub fn mat_vec(a: &Mat4, v: &Spinor) -> Spinor {
    let mut out = [ZERO; 4];
    for (i, o) in out.iter_mut().enumerate() {
        *o = (0..4).map(|k| a[i][k] * v[k]).sum();
    }
    out
}

/// Largest entrywise modulus of `a - b`.
pub fn max_entry_diff(a: &Mat4, b: &Mat4) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

/// `sigma . p` applied to a two-spinor.
#[inline]
fn sigma_dot(p: &[f64; 3], u0: Complex64, u1: Complex64) -> (Complex64, Complex64) {
    let minus = Complex64::new(p[0], -p[1]);
    let plus = Complex64::new(p[0], p[1]);
    (p[2] * u0 + minus * u1, plus * u0 - p[2] * u1)
}

#[inline]
pub fn alpha_dot_p(p: &[f64; 3], v: &Spinor) -> Spinor {
    let (a0, a1) = sigma_dot(p, v[2], v[3]);
    let (b0, b1) = sigma_dot(p, v[0], v[1]);
    [a0, a1, b0, b1]
}

#[inline]
pub fn beta_apply(v: &Spinor) -> Spinor {
    [v[0], v[1], -v[2], -v[3]]
}

/// `<z, beta z>` = |z1|^2 + |z2|^2 - |z3|^2 - |z4|^2.
#[inline]
pub fn beta_form(z: &Spinor) -> f64 {
    z[0].norm_sqr() + z[1].norm_sqr() - z[2].norm_sqr() - z[3].norm_sqr()
}

/// `<z, beta v>` with conjugation on `z`.
#[inline]
pub fn beta_pairing(z: &Spinor, v: &Spinor) -> Complex64 {
    z[0].conj() * v[0] + z[1].conj() * v[1] - z[2].conj() * v[2] - z[3].conj() * v[3]
}

#[derive(Debug, Clone, Copy)]
pub struct ModeData {
    pub p: [f64; 3],
    pub p_norm: f64,
    pub lambda: f64,
    pub u_plus: f64,
    pub u_minus: f64,
}

#[derive(Debug, Clone)]
pub struct DiracMultipliers {
    grid: Arc<FourierGrid>,
    mass: f64,
    modes: Vec<ModeData>,
}

pub fn build_multipliers(grid: &Arc<FourierGrid>, mass: f64) -> Result<DiracMultipliers> {
    DiracMultipliers::new(grid, mass)
}

impl DiracMultipliers {
    pub fn new(grid: &Arc<FourierGrid>, mass: f64) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidMass(mass));
        }
        let modes = (0..grid.len())
            .map(|idx| {
                let p = grid.momentum(idx);
                let p_norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                let lambda = (p_norm * p_norm + mass * mass).sqrt();
                ModeData {
                    p,
                    p_norm,
                    lambda,
                    u_plus: (0.5 * (1.0 + mass / lambda)).sqrt(),
                    u_minus: (0.5 * (1.0 - mass / lambda)).sqrt(),
                }
            })
            .collect();
        Ok(Self {
            grid: Arc::clone(grid),
            mass,
            modes,
        })
    }

    pub fn grid(&self) -> &Arc<FourierGrid> {
        &self.grid
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn modes(&self) -> &[ModeData] {
        &self.modes
    }

    pub fn lambda(&self, idx: usize) -> f64 {
        self.modes[idx].lambda
    }

    pub fn lambda_max(&self) -> f64 {
        self.modes.iter().fold(0.0, |m, d| m.max(d.lambda))
    }

    /// Dirac symbol `alpha . p + m beta` at mode `idx`.
    pub fn h_matrix(&self, idx: usize) -> Mat4 {
        let d = &self.modes[idx];
        let mut h = mat_scale(&beta(), self.mass.into());
        for k in 0..3 {
            h = mat_add(&h, &alpha(k), d.p[k].into());
        }
        h
    }

    /// `(I +- (m beta + alpha . p) / lambda) / 2`.
    pub fn projector(&self, idx: usize, sign: Sign) -> Mat4 {
        let d = &self.modes[idx];
        let h = self.h_matrix(idx);
        mat_scale(
            &mat_add(&identity4(), &h, (sign.factor() / d.lambda).into()),
            0.5.into(),
        )
    }

    /// Foldy-Wouthuysen matrix `u+ I + u- beta (alpha . p) / |p|`, or its inverse.
    /// At `p = 0` both reduce to the identity.
    pub fn fw_matrix(&self, idx: usize, direction: Direction) -> Mat4 {
        let d = &self.modes[idx];
        if d.p_norm == 0.0 {
            return identity4();
        }
        let mut ap = [[ZERO; 4]; 4];
        for k in 0..3 {
            ap = mat_add(&ap, &alpha(k), d.p[k].into());
        }
        let b_ap = mat_mul(&beta(), &ap);
        let sign = match direction {
            Direction::Forward => 1.0,
            Direction::Inverse => -1.0,
        };
        mat_add(
            &mat_scale(&identity4(), d.u_plus.into()),
            &b_ap,
            (sign * d.u_minus / d.p_norm).into(),
        )
    }

    fn check(&self, psi: &SpinorField) -> Result<()> {
        psi.expect_space(Space::Momentum)?;
        if **psi.grid() != *self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    fn map_modes(&self, psi: &SpinorField, f: impl Fn(&ModeData, &Spinor) -> Spinor) -> Result<SpinorField> {
        self.check(psi)?;
        let mut out = psi.clone();
        for (idx, d) in self.modes.iter().enumerate() {
            out.set_site(idx, f(d, &psi.site(idx)));
        }
        Ok(out)
    }

    /// Multiplies each mode by `lambda(p)^power`.
    pub fn apply_lambda_power(&self, psi: &SpinorField, power: f64) -> Result<SpinorField> {
        self.map_modes(psi, |d, v| {
            let f = d.lambda.powf(power);
            [v[0] * f, v[1] * f, v[2] * f, v[3] * f]
        })
    }

    pub fn h_norm_sq(&self, psi: &SpinorField) -> Result<f64> {
        Ok(self.h_inner(psi, psi)?.re)
    }

    /// `<phi, psi>_H = sum_p lambda(p) <phi^(p), psi^(p)>`.
    pub fn h_inner(&self, phi: &SpinorField, psi: &SpinorField) -> Result<Complex64> {
        self.check(phi)?;
        self.check(psi)?;
        let mut acc = ZERO;
        for (idx, d) in self.modes.iter().enumerate() {
            let a = phi.site(idx);
            let b = psi.site(idx);
            let dot: Complex64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
            acc += dot * d.lambda;
        }
        Ok(acc)
    }

    pub fn apply_h(&self, psi: &SpinorField) -> Result<SpinorField> {
        let m = self.mass;
        self.map_modes(psi, |d, v| h_symbol(d, m, v))
    }

    pub fn project(&self, psi: &SpinorField, sign: Sign) -> Result<SpinorField> {
        let m = self.mass;
        let s = sign.factor();
        self.map_modes(psi, |d, v| {
            let h = h_symbol(d, m, v);
            let c = s / d.lambda;
            [
                0.5 * (v[0] + c * h[0]),
                0.5 * (v[1] + c * h[1]),
                0.5 * (v[2] + c * h[2]),
                0.5 * (v[3] + c * h[3]),
            ]
        })
    }

    pub fn apply_fw(&self, psi: &SpinorField, direction: Direction) -> Result<SpinorField> {
        let sign = match direction {
            Direction::Forward => 1.0,
            Direction::Inverse => -1.0,
        };
        self.map_modes(psi, |d, v| {
            if d.p_norm == 0.0 {
                return *v;
            }
            let ap = alpha_dot_p(&d.p, v);
            let c = sign * d.u_minus / d.p_norm;
            [
                d.u_plus * v[0] + c * ap[0],
                d.u_plus * v[1] + c * ap[1],
                d.u_plus * v[2] - c * ap[2],
                d.u_plus * v[3] - c * ap[3],
            ]
        })
    }
}

#[inline]
fn h_symbol(d: &ModeData, m: f64, v: &Spinor) -> Spinor {
    let ap = alpha_dot_p(&d.p, v);
    [ap[0] + m * v[0], ap[1] + m * v[1], ap[2] - m * v[2], ap[3] - m * v[3]]
}

pub fn apply_h(mult: &DiracMultipliers, psi: &SpinorField) -> Result<SpinorField> {
    mult.apply_h(psi)
}

pub fn project(mult: &DiracMultipliers, psi: &SpinorField, sign: Sign) -> Result<SpinorField> {
    mult.project(psi, sign)
}

pub fn h_inner(mult: &DiracMultipliers, phi: &SpinorField, psi: &SpinorField) -> Result<Complex64> {
    mult.h_inner(phi, psi)
}

pub fn apply_fw(mult: &DiracMultipliers, psi: &SpinorField, direction: Direction) -> Result<SpinorField> {
    mult.apply_fw(psi, direction)
}

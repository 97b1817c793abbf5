//! Periodic box discretization, momentum lattice and the 3-D transform.
//!
//! The transform is unitary between position space with the cell-volume
//! weighted inner product `h^3 sum conj(f) g` and momentum space with the
//! plain sum over modes. Concretely
//!
//! ```text
//! forward:  f^(p_k) = sqrt(h^3 / N) * sum_j f(x_j) exp(-i p_k . x_j)
//! inverse:  f(x_j)  = L^{-3/2}      * sum_k f^(p_k) exp(+i p_k . x_j)
//! ```
//!
//! so `f^(p_k)` is the coefficient of `f` on the orthonormal plane wave
//! `exp(i p_k . x) / L^{3/2}`. Every multiplier in the crate is written
//! against this convention.

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which representation a field's values are stored in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Position,
    Momentum,
}

impl Space {
    fn tag(self) -> u8 {
        match self {
            Space::Position => 0,
            Space::Momentum => 1,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Space::Position),
            1 => Some(Space::Momentum),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

pub struct FourierGrid {
    n: usize,
    box_length: f64,
    spacing: f64,
    cell_volume: f64,
    /// Momentum value for each array index along one axis.
    axis_momenta: Vec<f64>,
    forward_plan: Arc<dyn Fft<f64>>,
    inverse_plan: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FourierGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierGrid")
            .field("n", &self.n)
            .field("box_length", &self.box_length)
            .finish()
    }
}

impl PartialEq for FourierGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.box_length == other.box_length
    }
}

/// Builds a shareable grid of `n` points per axis on a cube of side `box_length`.
pub fn build_grid(n: usize, box_length: f64) -> Result<Arc<FourierGrid>> {
    FourierGrid::new(n, box_length).map(Arc::new)
}

impl FourierGrid {
    pub fn new(n: usize, box_length: f64) -> Result<Self> {
        if !n.is_power_of_two() || !(8..=256).contains(&n) {
            return Err(Error::InvalidGridSize(n));
        }
        if !(box_length > 0.0) || !box_length.is_finite() {
            return Err(Error::InvalidBoxLength(box_length));
        }
        let spacing = box_length / n as f64;
        let dk = 2.0 * std::f64::consts::PI / box_length;
        let axis_momenta = (0..n).map(|i| signed_index(i, n) as f64 * dk).collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            box_length,
            spacing,
            cell_volume: spacing.powi(3),
            axis_momenta,
            forward_plan: planner.plan_fft_forward(n),
            inverse_plan: planner.plan_fft_inverse(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    /// Number of lattice sites (equivalently, momentum modes).
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lattice index `k` in `-n/2 .. n/2` for each array position along an axis.
    pub fn lattice_indices(&self) -> Vec<i64> {
        (0..self.n).map(|i| signed_index(i, self.n)).collect()
    }

    pub fn axis_momenta(&self) -> &[f64] {
        &self.axis_momenta
    }

    /// Largest representable momentum magnitude along one axis.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.spacing
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    /// Position of site `idx` in the transform frame `x_j = j h`.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.unravel(idx);
        let h = self.spacing;
        [i as f64 * h, j as f64 * h, k as f64 * h]
    }

    /// Geometric centre of the box, the site with index `n/2` on every axis.
    pub fn center(&self) -> [f64; 3] {
        let c = (self.n / 2) as f64 * self.spacing;
        [c, c, c]
    }

    /// Displacement of site `idx` from the box centre.
    pub fn offset_from_center(&self, idx: usize) -> [f64; 3] {
        let x = self.position(idx);
        let c = self.center();
        [x[0] - c[0], x[1] - c[1], x[2] - c[2]]
    }

    pub fn momentum(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.unravel(idx);
        [
            self.axis_momenta[i],
            self.axis_momenta[j],
            self.axis_momenta[k],
        ]
    }

    /// Array index of the mode `-p` for the mode at `idx` (Nyquist maps to itself).
    pub fn negated_mode(&self, idx: usize) -> usize {
        let n = self.n;
        let [i, j, k] = self.unravel(idx);
        self.index((n - i) % n, (n - j) % n, (n - k) % n)
    }

    fn forward_scale(&self) -> f64 {
        (self.cell_volume / self.len() as f64).sqrt()
    }

    fn inverse_scale(&self) -> f64 {
        self.box_length.powf(-1.5)
    }

    /// In-place transform of one scalar array of `n^3` values, normalization included.
    pub(crate) fn fft3(&self, data: &mut [Complex64], direction: Direction) {
        debug_assert_eq!(data.len(), self.len());
        let plan = match direction {
            Direction::Forward => &self.forward_plan,
            Direction::Inverse => &self.inverse_plan,
        };
        let n = self.n;
        // Last axis is contiguous.
        data.par_chunks_mut(n * n).for_each(|plane| plan.process(plane));
        let mut scratch = vec![Complex64::default(); data.len()];
        for axis in [1usize, 0] {
            gather_axis(data, &mut scratch, n, axis);
            scratch.par_chunks_mut(n * n).for_each(|block| plan.process(block));
            scatter_axis(&scratch, data, n, axis);
        }
        let scale = match direction {
            Direction::Forward => self.forward_scale(),
            Direction::Inverse => self.inverse_scale(),
        };
        data.par_iter_mut().for_each(|v| *v *= scale);
    }
}

fn signed_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Copies `data` into `lines` so that `axis` becomes the contiguous one.
fn gather_axis(data: &[Complex64], lines: &mut [Complex64], n: usize, axis: usize) {
    lines
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(line, out)| {
            let (a, b) = (line / n, line % n);
            for (t, v) in out.iter_mut().enumerate() {
                let idx = match axis {
                    0 => (t * n + a) * n + b,
                    _ => (a * n + t) * n + b,
                };
                *v = data[idx];
            }
        });
}

fn scatter_axis(lines: &[Complex64], data: &mut [Complex64], n: usize, axis: usize) {
    data.par_chunks_mut(n * n)
        .enumerate()
        .for_each(|(i, plane)| {
            for j in 0..n {
                for k in 0..n {
                    let (line, t) = match axis {
                        0 => (j * n + k, i),
                        _ => (i * n + k, j),
                    };
                    plane[j * n + k] = lines[line * n + t];
                }
            }
        });
}

fn check_same_grid(a: &FourierGrid, b: &FourierGrid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

fn expect_space(found: Space, expected: Space) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::SpaceMismatch { expected, found })
    }
}

fn source_space(direction: Direction) -> Space {
    match direction {
        Direction::Forward => Space::Position,
        Direction::Inverse => Space::Momentum,
    }
}

fn target_space(direction: Direction) -> Space {
    match direction {
        Direction::Forward => Space::Momentum,
        Direction::Inverse => Space::Position,
    }
}

/// Complex scalar field such as a density or a potential.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<FourierGrid>,
    values: Vec<Complex64>,
    space: Space,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<FourierGrid>, space: Space) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![Complex64::default(); grid.len()],
            space,
        }
    }

    pub fn from_values(grid: &Arc<FourierGrid>, values: Vec<Complex64>, space: Space) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
            space,
        })
    }

    /// Real field sampled at the sites, evaluated with the offset from the box centre.
    pub fn from_position_fn(grid: &Arc<FourierGrid>, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|idx| Complex64::new(f(grid.offset_from_center(idx)), 0.0))
            .collect();
        Self {
            grid: Arc::clone(grid),
            values,
            space: Space::Position,
        }
    }

    pub fn grid(&self) -> &Arc<FourierGrid> {
        &self.grid
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn transform(&self, direction: Direction) -> Result<Self> {
        let mut out = self.clone();
        out.transform_in_place(direction)?;
        Ok(out)
    }

    pub fn transform_in_place(&mut self, direction: Direction) -> Result<()> {
        expect_space(self.space, source_space(direction))?;
        self.grid.fft3(&mut self.values, direction);
        self.space = target_space(direction);
        Ok(())
    }

    /// Weighted Hermitian inner product in whichever space the fields live.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        check_same_grid(&self.grid, &other.grid)?;
        expect_space(other.space, self.space)?;
        let raw: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(raw * self.weight())
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.weight()
    }

    /// `sum |f|` times the cell volume; the L^1 norm for a position-space field.
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).sum::<f64>() * self.grid.cell_volume
    }

    /// Largest imaginary part relative to the largest modulus.
    pub fn max_imag_ratio(&self) -> f64 {
        let amp = self.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        if amp == 0.0 {
            return 0.0;
        }
        self.values.iter().fold(0.0f64, |m, v| m.max(v.im.abs())) / amp
    }

    fn weight(&self) -> f64 {
        match self.space {
            Space::Position => self.grid.cell_volume,
            Space::Momentum => 1.0,
        }
    }
}

/// Four-component spinor field, components innermost.
#[derive(Debug, Clone)]
pub struct SpinorField {
    grid: Arc<FourierGrid>,
    values: Vec<Complex64>,
    space: Space,
}

impl SpinorField {
    pub fn zeros(grid: &Arc<FourierGrid>, space: Space) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![Complex64::default(); 4 * grid.len()],
            space,
        }
    }

    pub fn from_values(grid: &Arc<FourierGrid>, values: Vec<Complex64>, space: Space) -> Result<Self> {
        if values.len() != 4 * grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
            space,
        })
    }

    /// Samples `f(x - centre)` at every site in position space.
    pub fn from_position_fn(grid: &Arc<FourierGrid>, f: impl Fn([f64; 3]) -> [Complex64; 4]) -> Self {
        let mut values = Vec::with_capacity(4 * grid.len());
        for idx in 0..grid.len() {
            values.extend_from_slice(&f(grid.offset_from_center(idx)));
        }
        Self {
            grid: Arc::clone(grid),
            values,
            space: Space::Position,
        }
    }

    /// Fills momentum coefficients mode by mode from `f(p)`.
    pub fn from_momentum_fn(grid: &Arc<FourierGrid>, f: impl Fn([f64; 3]) -> [Complex64; 4]) -> Self {
        let mut values = Vec::with_capacity(4 * grid.len());
        for idx in 0..grid.len() {
            values.extend_from_slice(&f(grid.momentum(idx)));
        }
        Self {
            grid: Arc::clone(grid),
            values,
            space: Space::Momentum,
        }
    }

    pub fn grid(&self) -> &Arc<FourierGrid> {
        &self.grid
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn site(&self, idx: usize) -> [Complex64; 4] {
        let v = &self.values[4 * idx..4 * idx + 4];
        [v[0], v[1], v[2], v[3]]
    }

    pub fn set_site(&mut self, idx: usize, value: [Complex64; 4]) {
        self.values[4 * idx..4 * idx + 4].copy_from_slice(&value);
    }

    pub fn expect_space(&self, expected: Space) -> Result<()> {
        expect_space(self.space, expected)
    }

    pub fn transform(&self, direction: Direction) -> Result<Self> {
        let mut out = self.clone();
        out.transform_in_place(direction)?;
        Ok(out)
    }

    pub fn transform_in_place(&mut self, direction: Direction) -> Result<()> {
        expect_space(self.space, source_space(direction))?;
        let len = self.grid.len();
        let mut components: Vec<Vec<Complex64>> = (0..4)
            .map(|c| (0..len).map(|i| self.values[4 * i + c]).collect())
            .collect();
        for comp in components.iter_mut() {
            self.grid.fft3(comp, direction);
        }
        for (c, comp) in components.iter().enumerate() {
            for (i, v) in comp.iter().enumerate() {
                self.values[4 * i + c] = *v;
            }
        }
        self.space = target_space(direction);
        Ok(())
    }

    pub fn to_momentum(&self) -> Result<Self> {
        self.transform(Direction::Forward)
    }

    pub fn to_position(&self) -> Result<Self> {
        self.transform(Direction::Inverse)
    }

    /// `<self, other>` in the representation both fields share.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        l2_inner(self, other)
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.weight()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&mut self, factor: Complex64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: Complex64, other: &Self) -> Result<()> {
        check_same_grid(&self.grid, &other.grid)?;
        expect_space(other.space, self.space)?;
        self.values
            .iter_mut()
            .zip(&other.values)
            .for_each(|(a, b)| *a += alpha * b);
        Ok(())
    }

    /// `alpha * self + beta * other` as a new field.
    pub fn combine(&self, alpha: Complex64, other: &Self, beta: Complex64) -> Result<Self> {
        check_same_grid(&self.grid, &other.grid)?;
        expect_space(other.space, self.space)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(Self {
            grid: Arc::clone(&self.grid),
            values,
            space: self.space,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    fn weight(&self) -> f64 {
        match self.space {
            Space::Position => self.grid.cell_volume,
            Space::Momentum => 1.0,
        }
    }
}

/// Hermitian L^2 inner product `<f, g>`, conjugate-linear in `f`.
pub fn l2_inner(f: &SpinorField, g: &SpinorField) -> Result<Complex64> {
    check_same_grid(&f.grid, &g.grid)?;
    expect_space(g.space, f.space)?;
    let raw: Complex64 = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| a.conj() * b)
        .sum();
    Ok(raw * f.weight())
}

pub const DUMP_MAGIC: &[u8; 4] = b"DMXM";
pub const DUMP_VERSION: u32 = 1;

/// A field read back from a binary dump; the payload length decides the kind.
#[derive(Debug, Clone)]
pub enum DumpedField {
    Scalar(ScalarField),
    Spinor(SpinorField),
}

fn write_dump<W: Write>(
    mut out: W,
    grid: &FourierGrid,
    space: Space,
    values: &[Complex64],
) -> Result<()> {
    out.write_all(DUMP_MAGIC)?;
    out.write_all(&DUMP_VERSION.to_le_bytes())?;
    out.write_all(&(grid.n as u32).to_le_bytes())?;
    out.write_all(&grid.box_length.to_le_bytes())?;
    out.write_all(&[space.tag()])?;
    let mut buf = Vec::with_capacity(16 * values.len());
    for v in values {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn write_spinor_dump<W: Write>(out: W, field: &SpinorField) -> Result<()> {
    write_dump(out, &field.grid, field.space, &field.values)
}

pub fn write_scalar_dump<W: Write>(out: W, field: &ScalarField) -> Result<()> {
    write_dump(out, &field.grid, field.space, &field.values)
}

pub fn read_dump<R: Read>(mut input: R) -> Result<DumpedField> {
    let mut header = [0u8; 21];
    input.read_exact(&mut header)?;
    if &header[0..4] != DUMP_MAGIC {
        return Err(Error::Dump("bad magic".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != DUMP_VERSION {
        return Err(Error::Dump(format!("unsupported version {version}")));
    }
    let n = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let box_length = f64::from_le_bytes(header[12..20].try_into().unwrap());
    let space = Space::from_tag(header[20])
        .ok_or_else(|| Error::Dump(format!("unknown space tag {}", header[20])))?;
    let grid = build_grid(n, box_length)?;
    let mut payload = Vec::new();
    input.read_to_end(&mut payload)?;
    if payload.len() % 16 != 0 {
        return Err(Error::Dump("truncated complex payload".into()));
    }
    let values: Vec<Complex64> = payload
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect();
    if values.len() == grid.len() {
        Ok(DumpedField::Scalar(ScalarField::from_values(&grid, values, space)?))
    } else if values.len() == 4 * grid.len() {
        Ok(DumpedField::Spinor(SpinorField::from_values(&grid, values, space)?))
    } else {
        Err(Error::Dump(format!(
            "payload holds {} values, expected {} or {}",
            values.len(),
            grid.len(),
            4 * grid.len()
        )))
    }
}

//! Real scalar fields on the unit torus `T^d = [0,1)^d` in grid and spectral form.
//!
//! Grid values are stored row-major with axis 0 slowest. Spectral coefficients
//! use the same layout in FFT order, normalized so that
//!
//! ```text
//! f(x) = sum_k c(k) exp(2 pi i k.x),     c(0) = mean of f.
//! ```
//!
//! With this normalization Parseval reads `sum_k |c(k)|^2 = mean(f^2)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{KrdError, Result};

/// Integer wavevector. Entries past the grid dimension are zero.
pub type Wavevector = [i64; 3];

/// Default dealiasing fraction for pseudospectral products.
pub const TWO_THIRDS: f64 = 2.0 / 3.0;

const HERMITIAN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TorusGrid {
    d: usize,
    n: usize,
}

impl TorusGrid {
    /// Uniform grid with `n` points per axis on `T^d`. Requires `d` in {2, 3}
    /// and an even `n >= 8`.
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if !(2..=3).contains(&d) {
            return Err(KrdError::InvalidGrid(format!("dimension {d} not in {{2, 3}}")));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(KrdError::InvalidGrid(format!(
                "points per axis must be even and >= 8, got {n}"
            )));
        }
        Ok(Self { d, n })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of nodes, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Equal quadrature weight of every node.
    pub fn weight(&self) -> f64 {
        1.0 / self.len() as f64
    }

    /// Signed wavenumber of FFT index `i`. The Nyquist index maps to `+n/2`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i <= self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rem = flat;
        for j in (0..self.d).rev() {
            idx[j] = rem % self.n;
            rem /= self.n;
        }
        idx
    }

    pub fn flat_index(&self, idx: [usize; 3]) -> usize {
        idx[..self.d].iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn wavevector(&self, flat: usize) -> Wavevector {
        let idx = self.multi_index(flat);
        let mut k = [0i64; 3];
        for j in 0..self.d {
            k[j] = self.wavenumber(idx[j]);
        }
        k
    }

    /// True if any component of the mode at `flat` sits on the Nyquist index.
    pub fn touches_nyquist(&self, flat: usize) -> bool {
        let idx = self.multi_index(flat);
        idx[..self.d].contains(&(self.n / 2))
    }

    /// Flat index of wavevector `k`, if every component satisfies `|k_j| <= n/2`.
    pub fn index_of(&self, k: &Wavevector) -> Option<usize> {
        let half = (self.n / 2) as i64;
        let mut idx = [0usize; 3];
        for j in 0..self.d {
            if k[j].abs() > half {
                return None;
            }
            idx[j] = k[j].rem_euclid(self.n as i64) as usize;
        }
        Some(self.flat_index(idx))
    }

    /// Flat index of `-k` for the mode stored at `flat`.
    pub fn negated(&self, flat: usize) -> usize {
        let mut idx = self.multi_index(flat);
        for i in idx.iter_mut().take(self.d) {
            *i = (self.n - *i) % self.n;
        }
        self.flat_index(idx)
    }

    /// Coordinates of node `flat`.
    pub fn node(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for j in 0..self.d {
            x[j] = idx[j] as f64 * h;
        }
        x
    }
}

/// Real samples at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(KrdError::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: TorusGrid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    /// Samples `f` at every node; `f` receives the first `d` coordinates.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.node(i);
                f(&x[..grid.dim()])
            })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(KrdError::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.weight()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Fourier coefficients of a real field, Hermitian-symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self { grid, coeffs: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Wraps raw coefficients without checking symmetry; `to_grid` checks it.
    pub fn from_coeffs(grid: TorusGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(KrdError::GridMismatch(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient of wavevector `k`; zero if `k` is outside the grid.
    pub fn coeff(&self, k: &Wavevector) -> Complex64 {
        self.grid
            .index_of(k)
            .map(|i| self.coeffs[i])
            .unwrap_or_else(|| Complex64::new(0.0, 0.0))
    }

    /// Sets `c(k) = value` and `c(-k) = conj(value)`.
    pub fn set_mode_pair(&mut self, k: &Wavevector, value: Complex64) -> Result<()> {
        let i = self.grid.index_of(k).ok_or_else(|| {
            KrdError::GridMismatch(format!("wavevector {k:?} not on grid"))
        })?;
        let j = self.grid.negated(i);
        self.coeffs[i] = value;
        self.coeffs[j] = value.conj();
        if i == j {
            self.coeffs[i] = Complex64::new(value.re, 0.0);
        }
        Ok(())
    }

    /// Spatial mean, the real part of the zero mode.
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// `sum_k |c(k)|^2`, equal to the squared L^2 norm on the unit torus.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Largest `|c(-k) - conj(c(k))|` over all modes.
    pub fn hermitian_deviation(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|i| (self.coeffs[self.grid.negated(i)] - self.coeffs[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Replaces each coefficient by the Hermitian part `(c(k) + conj c(-k)) / 2`.
    pub fn symmetrize(&mut self) {
        symmetrize_coeffs(self.grid, &mut self.coeffs);
    }

    pub fn scale(&mut self, s: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= s);
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &SpectralField) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * s;
        }
    }
}

fn symmetrize_coeffs(grid: TorusGrid, coeffs: &mut [Complex64]) {
    for i in 0..coeffs.len() {
        let j = grid.negated(i);
        if j < i {
            continue;
        }
        if i == j {
            coeffs[i].im = 0.0;
        } else {
            let avg = (coeffs[i] + coeffs[j].conj()) * 0.5;
            coeffs[i] = avg;
            coeffs[j] = avg.conj();
        }
    }
}

/// Multi-dimensional real FFT on a [`TorusGrid`] with owned scratch space.
///
/// The last axis uses real-to-complex transforms, so only the half spectrum
/// `k_last in 0..=n/2` is transformed along the remaining axes; the other half
/// follows from Hermitian symmetry.
///
/// Not `Sync`-shared: every worker thread owns its own plan.
pub struct FftPlan {
    grid: TorusGrid,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Row index of `-k` for each row of the first `d - 1` axes.
    neg_row: Vec<usize>,
    half: Vec<Complex64>,
    lines: Vec<Complex64>,
    row: Vec<f64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for FftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlan").field("grid", &self.grid).finish()
    }
}

impl Clone for FftPlan {
    fn clone(&self) -> Self {
        Self {
            grid: self.grid,
            r2c: Arc::clone(&self.r2c),
            c2r: Arc::clone(&self.c2r),
            forward: Arc::clone(&self.forward),
            inverse: Arc::clone(&self.inverse),
            neg_row: self.neg_row.clone(),
            half: self.half.clone(),
            lines: self.lines.clone(),
            row: self.row.clone(),
            scratch: self.scratch.clone(),
        }
    }
}

impl FftPlan {
    pub fn new(grid: TorusGrid) -> Self {
        let n = grid.n();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let mut real_planner = RealFftPlanner::new();
        let r2c = real_planner.plan_fft_forward(n);
        let c2r = real_planner.plan_fft_inverse(n);
        let scratch_len = [
            forward.get_inplace_scratch_len(),
            inverse.get_inplace_scratch_len(),
            r2c.get_scratch_len(),
            c2r.get_scratch_len(),
        ]
        .into_iter()
        .max()
        .unwrap_or(0);
        let rows = grid.len() / n;
        let neg_row = (0..rows).map(|r| grid.negated(r * n) / n).collect();
        let half_len = rows * (n / 2 + 1);
        Self {
            grid,
            r2c,
            c2r,
            forward,
            inverse,
            neg_row,
            half: vec![Complex64::new(0.0, 0.0); half_len],
            lines: vec![Complex64::new(0.0, 0.0); half_len],
            row: vec![0.0; n],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    /// Complex transforms of the half spectrum along every axis but the last.
    fn transform_leading_axes(&mut self, inverse: bool) {
        let n = self.grid.n();
        let width = n / 2 + 1;
        let len = self.half.len();
        let fft = if inverse { &self.inverse } else { &self.forward };
        for axis in 0..self.grid.dim() - 1 {
            let stride = width * n.pow((self.grid.dim() - 2 - axis) as u32);
            let outer = len / (n * stride);
            let mut line = 0;
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * n * stride + inner;
                    for m in 0..n {
                        self.lines[line * n + m] = self.half[base + m * stride];
                    }
                    line += 1;
                }
            }
            fft.process_with_scratch(&mut self.lines, &mut self.scratch);
            let mut line = 0;
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * n * stride + inner;
                    for m in 0..n {
                        self.half[base + m * stride] = self.lines[line * n + m];
                    }
                    line += 1;
                }
            }
        }
    }

    /// Forward transform without input validation; output is symmetrized.
    pub(crate) fn to_spectral_unchecked(&mut self, f: &GridField) -> SpectralField {
        let n = self.grid.n();
        let width = n / 2 + 1;
        for (r, chunk) in f.values().chunks_exact(n).enumerate() {
            self.row.copy_from_slice(chunk);
            self.r2c
                .process_with_scratch(&mut self.row, &mut self.half[r * width..(r + 1) * width], &mut self.scratch)
                .expect("buffer lengths match the plan");
        }
        self.transform_leading_axes(false);
        let w = self.grid.weight();
        let mut data = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (r, out) in data.chunks_exact_mut(n).enumerate() {
            let src = &self.half[r * width..(r + 1) * width];
            let neg = &self.half[self.neg_row[r] * width..(self.neg_row[r] + 1) * width];
            for (j, c) in out.iter_mut().enumerate() {
                *c = if j < width { src[j] * w } else { neg[n - j].conj() * w };
            }
        }
        // Columns 1..n/2 pair with their conjugates by construction; only the
        // self-conjugate columns k_last = 0 and n/2 need averaging.
        for j in [0, n / 2] {
            for r in 0..self.neg_row.len() {
                let m = self.neg_row[r];
                let (a, b) = (r * n + j, m * n + j);
                if m == r {
                    data[a].im = 0.0;
                } else if m > r {
                    let avg = (data[a] + data[b].conj()) * 0.5;
                    data[a] = avg;
                    data[b] = avg.conj();
                }
            }
        }
        SpectralField { grid: self.grid, coeffs: data }
    }

    /// Inverse transform without the symmetry check. Only the half spectrum
    /// `k_last >= 0` is read, so the result is the real field whose spectrum
    /// is the Hermitian completion of that half.
    pub(crate) fn to_grid_unchecked(&mut self, c: &SpectralField) -> GridField {
        let n = self.grid.n();
        let width = n / 2 + 1;
        for (r, src) in c.coeffs.chunks_exact(n).enumerate() {
            self.half[r * width..(r + 1) * width].copy_from_slice(&src[..width]);
        }
        self.transform_leading_axes(true);
        let mut values = vec![0.0; self.grid.len()];
        for (r, out) in values.chunks_exact_mut(n).enumerate() {
            let buf = &mut self.half[r * width..(r + 1) * width];
            buf[0].im = 0.0;
            buf[width - 1].im = 0.0;
            self.c2r
                .process_with_scratch(buf, out, &mut self.scratch)
                .expect("buffer lengths match the plan");
        }
        GridField { grid: self.grid, values }
    }

    pub fn to_spectral(&mut self, f: &GridField) -> Result<SpectralField> {
        if f.grid() != self.grid {
            return Err(KrdError::GridMismatch("field and plan grids differ".into()));
        }
        f.check_finite()?;
        Ok(self.to_spectral_unchecked(f))
    }

    pub fn to_grid(&mut self, c: &SpectralField) -> Result<GridField> {
        if c.grid() != self.grid {
            return Err(KrdError::GridMismatch("field and plan grids differ".into()));
        }
        let scale = c.max_abs();
        let deviation = c.hermitian_deviation();
        if scale > 0.0 && deviation > HERMITIAN_TOL * scale {
            return Err(KrdError::NotHermitian { deviation });
        }
        Ok(self.to_grid_unchecked(c))
    }
}

/// Grid values to Fourier coefficients. Rejects non-finite input.
pub fn to_spectral(f: &GridField) -> Result<SpectralField> {
    FftPlan::new(f.grid()).to_spectral(f)
}

/// Fourier coefficients to grid values. Rejects coefficients whose Hermitian
/// deviation exceeds `1e-8` relative to the largest coefficient.
pub fn to_grid(c: &SpectralField) -> Result<GridField> {
    FftPlan::new(c.grid()).to_grid(c)
}

/// Spectral derivative along `axis`: multiplies by `2 pi i k_axis`.
/// Nyquist modes along `axis` are zeroed to keep the result real.
pub fn partial_derivative(c: &SpectralField, axis: usize) -> Result<SpectralField> {
    let grid = c.grid();
    if axis >= grid.dim() {
        return Err(KrdError::InvalidAxis { axis, d: grid.dim() });
    }
    let mut out = c.clone();
    differentiate_in_place(&mut out, axis);
    Ok(out)
}

pub(crate) fn differentiate_in_place(c: &mut SpectralField, axis: usize) {
    let grid = c.grid;
    let n = grid.n();
    let stride = n.pow((grid.dim() - 1 - axis) as u32);
    for (i, coeff) in c.coeffs.iter_mut().enumerate() {
        let idx = (i / stride) % n;
        if idx == n / 2 {
            *coeff = Complex64::new(0.0, 0.0);
        } else {
            let k = grid.wavenumber(idx) as f64;
            *coeff *= Complex64::new(0.0, 2.0 * PI * k);
        }
    }
}

/// Symbol of the Laplacian, `-4 pi^2 |k|^2`.
pub fn laplacian_multiplier(k: &[i64]) -> f64 {
    let k2: i64 = k.iter().map(|x| x * x).sum();
    -4.0 * PI * PI * k2 as f64
}

/// `L^q` norm by equal-weight quadrature; `q = inf` gives the max norm.
pub fn lp_norm(f: &GridField, q: f64) -> Result<f64> {
    lp_norm_values(f.values(), f.grid().weight(), q)
}

fn lp_norm_values(values: &[f64], weight: f64, q: f64) -> Result<f64> {
    if q.is_nan() || q < 1.0 {
        return Err(KrdError::InvalidExponent(q));
    }
    if q.is_infinite() {
        return Ok(values.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    let s: f64 = if q == 2.0 {
        values.iter().map(|v| v * v).sum()
    } else if q == 1.0 {
        values.iter().map(|v| v.abs()).sum()
    } else {
        values.iter().map(|v| v.abs().powf(q)).sum()
    };
    Ok((s * weight).powf(1.0 / q))
}

/// `L^q(T^d; R^l)` norm of a vector field, using the Euclidean norm across components.
pub fn lp_norm_vector(fields: &[GridField], q: f64) -> Result<f64> {
    let Some(first) = fields.first() else {
        return Ok(0.0);
    };
    if fields.len() == 1 {
        return lp_norm(first, q);
    }
    let grid = first.grid();
    if fields.iter().any(|f| f.grid() != grid) {
        return Err(KrdError::GridMismatch("species fields on different grids".into()));
    }
    let pointwise: Vec<f64> = (0..grid.len())
        .map(|i| fields.iter().map(|f| f.values[i] * f.values[i]).sum::<f64>().sqrt())
        .collect();
    lp_norm_values(&pointwise, grid.weight(), q)
}

/// Precomputed mask of modes kept by a dealiasing rule.
///
/// A mode is kept when every component satisfies `|k_j| < rule * n / 2`; a
/// rule `>= 1` keeps everything.
#[derive(Debug, Clone)]
pub struct DealiasMask {
    grid: TorusGrid,
    keep: Vec<bool>,
}

impl DealiasMask {
    pub fn new(grid: TorusGrid, rule: f64) -> Self {
        let keep = if rule >= 1.0 {
            vec![true; grid.len()]
        } else {
            let kmax = max_kept_wavenumber(grid.n(), rule);
            (0..grid.len())
                .map(|i| {
                    let k = grid.wavevector(i);
                    k[..grid.dim()].iter().all(|kj| kj.abs() <= kmax)
                })
                .collect()
        };
        Self { grid, keep }
    }

    pub fn keeps(&self, flat: usize) -> bool {
        self.keep[flat]
    }

    pub fn apply(&self, c: &mut SpectralField) {
        debug_assert_eq!(c.grid, self.grid);
        for (coeff, &keep) in c.coeffs.iter_mut().zip(&self.keep) {
            if !keep {
                *coeff = Complex64::new(0.0, 0.0);
            }
        }
    }
}

/// Largest `|k_j|` kept by `rule`: the largest integer strictly below `rule * n / 2`.
pub fn max_kept_wavenumber(n: usize, rule: f64) -> i64 {
    if rule >= 1.0 {
        return (n / 2) as i64;
    }
    let edge = rule * n as f64 / 2.0;
    ((edge - 1e-9).ceil() as i64 - 1).max(0)
}

/// Zeroes every mode with some `|k_j| >= rule * n / 2`.
pub fn dealias(c: &SpectralField, rule: f64) -> SpectralField {
    let mut out = c.clone();
    DealiasMask::new(c.grid(), rule).apply(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid2(n: usize) -> TorusGrid {
        TorusGrid::new(2, n).unwrap()
    }

    fn random_field(grid: TorusGrid, seed: u64) -> GridField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        GridField::new(grid, values).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(TorusGrid::new(2, 7).is_err());
        assert!(TorusGrid::new(2, 6).is_err());
        assert!(TorusGrid::new(4, 8).is_err());
        assert!(TorusGrid::new(1, 8).is_err());
        let g = TorusGrid::new(3, 8).unwrap();
        assert_eq!(g.len(), 512);
        assert_relative_eq!(g.weight(), 1.0 / 512.0);
    }

    #[test]
    fn index_round_trip() {
        let g = TorusGrid::new(3, 8).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.flat_index(g.multi_index(i)), i);
            let k = g.wavevector(i);
            assert_eq!(g.index_of(&k), Some(i));
            let neg = g.negated(i);
            let kn = g.wavevector(neg);
            for j in 0..3 {
                if g.multi_index(i)[j] != 4 {
                    assert_eq!(kn[j], -k[j]);
                }
            }
        }
    }

    #[test]
    fn constant_field_has_only_mean_mode() {
        let g = grid2(16);
        let c = to_spectral(&GridField::constant(g, 1.0)).unwrap();
        assert_relative_eq!(c.coeffs()[0].re, 1.0, epsilon = 1e-15);
        for z in &c.coeffs()[1..] {
            assert!(z.norm() < 1e-15);
        }
    }

    #[test]
    fn cosine_mode_coefficients() {
        let g = grid2(16);
        let f = GridField::from_fn(g, |x| (2.0 * PI * x[0]).cos());
        let c = to_spectral(&f).unwrap();
        for i in 0..g.len() {
            let k = g.wavevector(i);
            let expected = if (k[0] == 1 || k[0] == -1) && k[1] == 0 { 0.5 } else { 0.0 };
            assert!((c.coeffs()[i] - Complex64::new(expected, 0.0)).norm() < 1e-14, "{k:?}");
        }
    }

    #[test]
    fn random_round_trip_and_parseval() {
        for (d, n) in [(2, 16), (3, 8)] {
            let g = TorusGrid::new(d, n).unwrap();
            let f = random_field(g, 7 + d as u64);
            let c = to_spectral(&f).unwrap();
            let back = to_grid(&c).unwrap();
            let scale = f.max_abs();
            for (a, b) in f.values().iter().zip(back.values()) {
                assert!((a - b).abs() <= 1e-12 * scale);
            }
            let mean_sq = f.values().iter().map(|v| v * v).sum::<f64>() * g.weight();
            assert_relative_eq!(c.l2_norm_sq(), mean_sq, max_relative = 1e-12);
            assert!(c.hermitian_deviation() == 0.0);
        }
    }

    #[test]
    fn non_finite_input_rejected() {
        let g = grid2(8);
        let mut f = GridField::zeros(g);
        f.values_mut()[3] = f64::NAN;
        assert_eq!(to_spectral(&f), Err(KrdError::NonFinite { index: 3 }));
    }

    #[test]
    fn to_grid_examples() {
        let g = grid2(16);
        let mut c = SpectralField::zeros(g);
        c.coeffs_mut()[0] = Complex64::new(3.0, 0.0);
        let f = to_grid(&c).unwrap();
        assert!(f.values().iter().all(|v| (v - 3.0).abs() < 1e-15));

        let mut c = SpectralField::zeros(g);
        c.set_mode_pair(&[0, 1, 0], Complex64::new(0.5, 0.0)).unwrap();
        let f = to_grid(&c).unwrap();
        let expected = GridField::from_fn(g, |x| (2.0 * PI * x[1]).cos());
        for (a, b) in f.values().iter().zip(expected.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn broken_symmetry_rejected() {
        let g = grid2(8);
        let mut c = SpectralField::zeros(g);
        let i = g.index_of(&[1, 0, 0]).unwrap();
        c.coeffs_mut()[i] = Complex64::new(1.0, 0.0);
        assert!(matches!(to_grid(&c), Err(KrdError::NotHermitian { .. })));
    }

    #[test]
    fn derivative_of_cosine() {
        let g = grid2(16);
        let f = GridField::from_fn(g, |x| (2.0 * PI * x[0]).cos());
        let df = to_grid(&partial_derivative(&to_spectral(&f).unwrap(), 0).unwrap()).unwrap();
        let expected = GridField::from_fn(g, |x| -2.0 * PI * (2.0 * PI * x[0]).sin());
        for (a, b) in df.values().iter().zip(expected.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let dy = partial_derivative(&to_spectral(&f).unwrap(), 1).unwrap();
        assert!(dy.max_abs() < 1e-15);
        assert!(partial_derivative(&dy, 2).is_err());
    }

    #[test]
    fn derivative_of_constant_is_exactly_zero() {
        let g = grid2(8);
        let c = to_spectral(&GridField::constant(g, 4.2)).unwrap();
        let d = partial_derivative(&c, 1).unwrap();
        assert!(d.coeffs().iter().all(|z| z.re == 0.0 && z.im == 0.0));
    }

    #[test]
    fn derivatives_commute() {
        let g = grid2(16);
        let c = to_spectral(&random_field(g, 3)).unwrap();
        let a = partial_derivative(&partial_derivative(&c, 0).unwrap(), 1).unwrap();
        let b = partial_derivative(&partial_derivative(&c, 1).unwrap(), 0).unwrap();
        let scale = a.max_abs();
        for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
            assert!((x - y).norm() <= 1e-12 * scale);
        }
        assert!(a.hermitian_deviation() <= 1e-12 * scale);
    }

    #[test]
    fn laplacian_symbol() {
        assert_eq!(laplacian_multiplier(&[0, 0]), 0.0);
        assert_relative_eq!(laplacian_multiplier(&[1, 0]), -39.47841760435743, epsilon = 1e-12);
        assert_relative_eq!(laplacian_multiplier(&[1, 1]), -8.0 * PI * PI, epsilon = 1e-12);
    }

    #[test]
    fn lebesgue_norms() {
        let g = grid2(32);
        let one = GridField::constant(g, 1.0);
        for q in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert_relative_eq!(lp_norm(&one, q).unwrap(), 1.0, epsilon = 1e-14);
        }
        let s = GridField::from_fn(g, |x| (2.0 * PI * x[0]).sin());
        // closed forms: int sin^2 = 1/2, int sin^4 = 3/8
        assert_relative_eq!(lp_norm(&s, 2.0).unwrap(), 0.5f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(lp_norm(&s, 4.0).unwrap(), 0.375f64.powf(0.25), epsilon = 1e-12);
        assert!(lp_norm(&s, 0.5).is_err());
    }

    #[test]
    fn dealias_examples() {
        let g = grid2(16);
        let mut inside = SpectralField::zeros(g);
        inside.set_mode_pair(&[2, -3, 0], Complex64::new(0.3, 0.1)).unwrap();
        assert_eq!(dealias(&inside, TWO_THIRDS), inside);

        let mut nyq = SpectralField::zeros(g);
        nyq.set_mode_pair(&[8, 0, 0], Complex64::new(1.0, 0.0)).unwrap();
        nyq.set_mode_pair(&[0, 8, 0], Complex64::new(1.0, 0.0)).unwrap();
        assert!(dealias(&nyq, TWO_THIRDS).max_abs() == 0.0);
    }

    #[test]
    fn kept_wavenumber_is_alias_safe() {
        assert_eq!(max_kept_wavenumber(64, TWO_THIRDS), 21);
        assert_eq!(max_kept_wavenumber(96, TWO_THIRDS), 31);
        assert_eq!(max_kept_wavenumber(12, TWO_THIRDS), 3);
        for n in (8..200).step_by(2) {
            let k = max_kept_wavenumber(n, TWO_THIRDS);
            // quadratic products of kept modes alias only into removed modes
            assert!(n as i64 - 2 * k > k, "n = {n}");
        }
    }

    /// Direct convolution of two band-limited fields against the dealiased
    /// pseudospectral product.
    #[test]
    fn dealiased_product_matches_convolution() {
        let g = grid2(12);
        let kmax = max_kept_wavenumber(12, TWO_THIRDS);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut make = || {
            let mut c = SpectralField::zeros(g);
            for k0 in -kmax..=kmax {
                for k1 in -kmax..=kmax {
                    if (k0, k1) > (0, 0) {
                        let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                        c.set_mode_pair(&[k0, k1, 0], z).unwrap();
                    }
                }
            }
            c.coeffs_mut()[0] = Complex64::new(rng.random_range(-1.0..1.0), 0.0);
            c
        };
        let (a, b) = (make(), make());
        let fa = to_grid(&a).unwrap();
        let fb = to_grid(&b).unwrap();
        let prod: Vec<f64> = fa.values().iter().zip(fb.values()).map(|(x, y)| x * y).collect();
        let pc = dealias(&to_spectral(&GridField::new(g, prod).unwrap()).unwrap(), TWO_THIRDS);
        for p0 in -kmax..=kmax {
            for p1 in -kmax..=kmax {
                let mut exact = Complex64::new(0.0, 0.0);
                for k0 in -kmax..=kmax {
                    for k1 in -kmax..=kmax {
                        exact += a.coeff(&[k0, k1, 0]) * b.coeff(&[p0 - k0, p1 - k1, 0]);
                    }
                }
                let got = pc.coeff(&[p0, p1, 0]);
                assert!((got - exact).norm() < 1e-13, "p = ({p0},{p1})");
            }
        }
    }
}

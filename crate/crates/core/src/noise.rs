//! Kraichnan transport noise on `T^d`.
//!
//! The noise is `sqrt(c_d nu) sum_{k,alpha} theta_k (sigma_{k,alpha} . grad) v dw^{k,alpha}`
//! with `sigma_{k,alpha} = a_{k,alpha} exp(2 pi i k.x)`, `a_{k,alpha}` an orthonormal
//! basis of `k^perp`, and complex Brownian motions with `conj(w^k) = w^{-k}`.
//! Only the `plus` half of the lattice carries independent increments; the
//! `minus` half is materialized by conjugation, so the symmetry is exact.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{KrdError, Result};
use crate::torus_field::{
    differentiate_in_place, DealiasMask, FftPlan, GridField, SpectralField, TorusGrid,
    Wavevector, TWO_THIRDS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// Lexicographic partition of `Z^d_0`: `k` is plus iff its first nonzero entry is positive.
pub fn lattice_partition(k: &[i64]) -> Result<Sign> {
    match k.iter().find(|&&x| x != 0) {
        Some(&x) if x > 0 => Ok(Sign::Plus),
        Some(_) => Ok(Sign::Minus),
        None => Err(KrdError::ZeroWavevector),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis `a_{k,1..d-1}` of the hyperplane `k^perp`.
///
/// Computed for the plus representative of `{k, -k}` so that `a_{-k} = a_k`.
/// In `d = 2` the basis is the +90 degree rotation `(-k_2, k_1)/|k|`; otherwise
/// Gram-Schmidt runs over the canonical unit vectors in index order, skipping
/// the one most parallel to `k` (lowest index on ties).
pub fn hyperplane_basis(k: &[i64], d: usize) -> Result<Vec<[f64; 3]>> {
    let sign = lattice_partition(&k[..d])?;
    let mut rep = [0.0f64; 3];
    for j in 0..d {
        rep[j] = if sign == Sign::Plus { k[j] as f64 } else { -k[j] as f64 };
    }
    let norm = dot(&rep[..d], &rep[..d]).sqrt();
    if d == 2 {
        return Ok(vec![[-rep[1] / norm, rep[0] / norm, 0.0]]);
    }
    let unit: Vec<f64> = rep.iter().map(|x| x / norm).collect();
    let skip = (0..d)
        .fold((0usize, -1.0f64), |best, j| {
            if unit[j].abs() > best.1 {
                (j, unit[j].abs())
            } else {
                best
            }
        })
        .0;
    let mut basis: Vec<[f64; 3]> = Vec::with_capacity(d - 1);
    for j in (0..d).filter(|&j| j != skip) {
        let mut v = [0.0f64; 3];
        v[j] = 1.0;
        let p = dot(&v[..d], &unit[..d]);
        for m in 0..d {
            v[m] -= p * unit[m];
        }
        for b in &basis {
            let p = dot(&v[..d], &b[..d]);
            for m in 0..d {
                v[m] -= p * b[m];
            }
        }
        let len = dot(&v[..d], &v[..d]).sqrt();
        for x in v.iter_mut() {
            *x /= len;
        }
        basis.push(v);
    }
    Ok(basis)
}

/// Finite, normalized, radially symmetric spectrum `theta_k` on `Z^d_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpectrum {
    d: usize,
    modes: Vec<(Wavevector, f64)>,
}

fn norm_sq(k: &Wavevector) -> i64 {
    k.iter().map(|x| x * x).sum()
}

/// All lattice vectors of `Z^d` with `|k|^2 = r2`.
fn lattice_sphere(d: usize, r2: i64) -> Vec<Wavevector> {
    let r = (r2 as f64).sqrt().ceil() as i64;
    let third = if d == 3 { r } else { 0 };
    let mut out = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            for c in -third..=third {
                let k = [a, b, c];
                if norm_sq(&k) == r2 {
                    out.push(k);
                }
            }
        }
    }
    out
}

impl NoiseSpectrum {
    /// Validated spectrum: entries nonzero, `theta >= 0`, `||theta||_2 = 1`,
    /// radially symmetric over every occupied lattice sphere.
    pub fn new(d: usize, modes: Vec<(Wavevector, f64)>) -> Result<Self> {
        let spec = Self::from_modes_unchecked(d, modes)?;
        let norm = spec.l2_norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(KrdError::InvalidSpectrum(format!("l2 norm {norm} != 1")));
        }
        let mut by_radius: BTreeMap<i64, Vec<(Wavevector, f64)>> = BTreeMap::new();
        for &(k, t) in &spec.modes {
            if t < 0.0 {
                return Err(KrdError::InvalidSpectrum(format!("negative theta at {k:?}")));
            }
            if t > 0.0 {
                by_radius.entry(norm_sq(&k)).or_default().push((k, t));
            }
        }
        for (r2, entries) in by_radius {
            let sphere = lattice_sphere(d, r2);
            let t0 = entries[0].1;
            if entries.len() != sphere.len()
                || entries.iter().any(|(_, t)| (t - t0).abs() > 1e-12 * t0)
            {
                return Err(KrdError::InvalidSpectrum(format!(
                    "not radially symmetric on |k|^2 = {r2}"
                )));
            }
        }
        Ok(spec)
    }

    /// Spectrum without normalization or symmetry checks; for detectors and diagnostics.
    pub fn from_modes_unchecked(d: usize, mut modes: Vec<(Wavevector, f64)>) -> Result<Self> {
        if !(2..=3).contains(&d) {
            return Err(KrdError::InvalidSpectrum(format!("dimension {d} not in {{2, 3}}")));
        }
        for (k, t) in &modes {
            if k[..d].iter().all(|&x| x == 0) || k[d..].iter().any(|&x| x != 0) {
                return Err(KrdError::InvalidSpectrum(format!("bad wavevector {k:?}")));
            }
            if !t.is_finite() {
                return Err(KrdError::InvalidSpectrum(format!("non-finite theta at {k:?}")));
            }
        }
        modes.sort_by_key(|a| a.0);
        if modes.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(KrdError::InvalidSpectrum("duplicate wavevector".into()));
        }
        Ok(Self { d, modes })
    }

    /// Normalized annulus `theta_k ∝ 1{n <= |k| <= 2n} |k|^-gamma`.
    pub fn theta_shell(n: u32, gamma: f64, d: usize) -> Result<Self> {
        if n == 0 || !(gamma >= 0.0) {
            return Err(KrdError::InvalidSpectrum(format!("shell n = {n}, gamma = {gamma}")));
        }
        let (lo, hi) = ((n as i64).pow(2), 4 * (n as i64).pow(2));
        let mut modes: Vec<(Wavevector, f64)> = (lo..=hi)
            .flat_map(|r2| lattice_sphere(d, r2))
            .map(|k| (k, (norm_sq(&k) as f64).powf(-gamma / 2.0)))
            .collect();
        if modes.is_empty() {
            return Err(KrdError::InvalidSpectrum("empty shell".into()));
        }
        let norm = modes.iter().map(|(_, t)| t * t).sum::<f64>().sqrt();
        modes.iter_mut().for_each(|(_, t)| *t /= norm);
        Self::new(d, modes)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn modes(&self) -> &[(Wavevector, f64)] {
        &self.modes
    }

    pub fn theta(&self, k: &Wavevector) -> f64 {
        self.modes
            .binary_search_by(|m| m.0.cmp(k))
            .map(|i| self.modes[i].1)
            .unwrap_or(0.0)
    }

    pub fn l2_norm(&self) -> f64 {
        self.modes.iter().map(|(_, t)| t * t).sum::<f64>().sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.modes.iter().fold(0.0, |m, (_, t)| m.max(t.abs()))
    }

    /// Largest `|k_j|` over the support.
    pub fn max_component(&self) -> i64 {
        self.modes
            .iter()
            .flat_map(|(k, _)| k.iter().map(|x| x.abs()))
            .max()
            .unwrap_or(0)
    }

    /// CSV with header `k1,..,kd,theta`.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let header: Vec<String> = (1..=self.d).map(|j| format!("k{j}")).collect();
        let _ = writeln!(s, "{},theta", header.join(","));
        for (k, t) in &self.modes {
            let ks: Vec<String> = k[..self.d].iter().map(|x| x.to_string()).collect();
            let _ = writeln!(s, "{},{}", ks.join(","), t);
        }
        s
    }

    /// Parses the CSV written by [`NoiseSpectrum::to_csv`] without validation,
    /// so that malformed spectra can still be inspected.
    pub fn from_csv_unchecked(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| KrdError::InvalidSpectrum("empty spectrum file".into()))?;
        let d = header.split(',').count().saturating_sub(1);
        let mut modes = Vec::new();
        for (row, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != d + 1 {
                return Err(KrdError::InvalidSpectrum(format!("row {}: expected {} columns", row + 1, d + 1)));
            }
            let mut k = [0i64; 3];
            for j in 0..d {
                k[j] = cells[j]
                    .parse()
                    .map_err(|_| KrdError::InvalidSpectrum(format!("row {}: bad k{}", row + 1, j + 1)))?;
            }
            let t: f64 = cells[d]
                .parse()
                .map_err(|_| KrdError::InvalidSpectrum(format!("row {}: bad theta", row + 1)))?;
            modes.push((k, t));
        }
        Self::from_modes_unchecked(d, modes)
    }
}

/// One plus-mode of the noise with its hyperplane basis.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMode {
    pub k: Wavevector,
    pub theta: f64,
    pub basis: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    d: usize,
    spectrum: NoiseSpectrum,
    plus_modes: Vec<NoiseMode>,
    nu: f64,
    c_d: f64,
}

impl NoiseModel {
    pub fn new(spectrum: NoiseSpectrum, nu: f64) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(KrdError::InvalidSpectrum(format!("intensity nu = {nu} must be > 0")));
        }
        let d = spectrum.dim();
        let mut plus_modes = Vec::new();
        for &(k, theta) in spectrum.modes() {
            if lattice_partition(&k[..d])? == Sign::Plus {
                plus_modes.push(NoiseMode { k, theta, basis: hyperplane_basis(&k, d)? });
            }
        }
        Ok(Self { d, spectrum, plus_modes, nu, c_d: d as f64 / (d as f64 - 1.0) })
    }

    /// Shell spectrum of scale `n` and decay `gamma` with intensity `nu`.
    pub fn shell(d: usize, n: u32, gamma: f64, nu: f64) -> Result<Self> {
        Self::new(NoiseSpectrum::theta_shell(n, gamma, d)?, nu)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn c_d(&self) -> f64 {
        self.c_d
    }

    pub fn spectrum(&self) -> &NoiseSpectrum {
        &self.spectrum
    }

    pub fn plus_modes(&self) -> &[NoiseMode] {
        &self.plus_modes
    }

    /// Number of independent complex increments per step.
    pub fn channel_count(&self) -> usize {
        self.plus_modes.len() * (self.d - 1)
    }

    /// Errors unless `3 * max |k_j| <= n`, so products with the noise dealias cleanly.
    pub fn check_resolved(&self, grid: TorusGrid) -> Result<()> {
        let max_k = self.spectrum.max_component();
        if grid.dim() != self.d {
            return Err(KrdError::GridMismatch(format!(
                "noise dimension {} vs grid dimension {}",
                self.d,
                grid.dim()
            )));
        }
        if 3 * max_k > grid.n() as i64 {
            return Err(KrdError::UnderResolved { max_k, n: grid.n() });
        }
        Ok(())
    }
}

/// `max_{n,m} |sum_{k,alpha} theta_k^2 a^n a^m - delta_{nm} / c_d|` over the full support.
pub fn verify_ellipticity(model: &NoiseModel) -> f64 {
    let d = model.d;
    let mut sum = [[0.0f64; 3]; 3];
    for &(k, theta) in model.spectrum.modes() {
        // a_{-k} = a_k, so the basis of the plus representative serves both
        let basis = hyperplane_basis(&k, d).expect("nonzero support");
        let t2 = theta * theta;
        for a in &basis {
            for n in 0..d {
                for m in 0..d {
                    sum[n][m] += t2 * a[n] * a[m];
                }
            }
        }
    }
    let mut dev = 0.0f64;
    for n in 0..d {
        for m in 0..d {
            let target = if n == m { 1.0 / model.c_d } else { 0.0 };
            dev = dev.max((sum[n][m] - target).abs());
        }
    }
    dev
}

/// Complex Brownian increments over one step, stored for plus modes only.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSet {
    dt: f64,
    per_mode: usize,
    values: Vec<Complex64>,
}

impl IncrementSet {
    pub fn zeros(model: &NoiseModel, dt: f64) -> Self {
        Self {
            dt,
            per_mode: model.d - 1,
            values: vec![Complex64::new(0.0, 0.0); model.channel_count()],
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Increments of plus mode `mode_index`, one per basis vector.
    pub fn for_mode(&self, mode_index: usize) -> &[Complex64] {
        &self.values[mode_index * self.per_mode..(mode_index + 1) * self.per_mode]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// `dW^{k,alpha}` for any `k` in the support; minus modes by conjugation.
    pub fn get(&self, model: &NoiseModel, k: &Wavevector, alpha: usize) -> Option<Complex64> {
        let d = model.d;
        let sign = lattice_partition(&k[..d]).ok()?;
        let mut rep = *k;
        if sign == Sign::Minus {
            rep.iter_mut().for_each(|x| *x = -*x);
        }
        let i = model.plus_modes.iter().position(|m| m.k == rep)?;
        let w = *self.for_mode(i).get(alpha)?;
        Some(if sign == Sign::Plus { w } else { w.conj() })
    }

    /// `self += other` (summing increments over consecutive sub-intervals).
    pub fn accumulate(&mut self, other: &IncrementSet) {
        self.dt += other.dt;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }
}

/// Draws `dW = X + iY` with `X, Y ~ N(0, dt)` independent, so `E|dW|^2 = 2 dt`.
pub fn sample_increments<R: Rng + ?Sized>(model: &NoiseModel, dt: f64, rng: &mut R) -> IncrementSet {
    let mut inc = IncrementSet::zeros(model, dt);
    if dt == 0.0 {
        return inc;
    }
    let s = dt.sqrt();
    for w in inc.values.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *w = Complex64::new(s * re, s * im);
    }
    inc
}

/// Effective advecting velocity increment at a single point `x`:
/// `sqrt(c_d nu) sum_{k in plus, alpha} theta_k a_{k,alpha} 2 Re(exp(2 pi i k.x) dW)`.
pub fn velocity_at(model: &NoiseModel, inc: &IncrementSet, x: &[f64]) -> [f64; 3] {
    let c = (model.c_d * model.nu).sqrt();
    let mut u = [0.0; 3];
    for (i, mode) in model.plus_modes.iter().enumerate() {
        let phase: f64 = 2.0 * PI * (0..model.d).map(|j| mode.k[j] as f64 * x[j]).sum::<f64>();
        let e = Complex64::from_polar(1.0, phase);
        for (a, w) in mode.basis.iter().zip(inc.for_mode(i)) {
            let amp = 2.0 * c * mode.theta * (e * w).re;
            for j in 0..model.d {
                u[j] += amp * a[j];
            }
        }
    }
    u
}

/// Pseudospectral evaluation of the transport term with owned scratch.
#[derive(Debug, Clone)]
pub struct TransportOperator {
    grid: TorusGrid,
    plan: FftPlan,
    mask: DealiasMask,
    mode_index: Vec<(usize, usize)>,
}

impl TransportOperator {
    pub fn new(model: &NoiseModel, grid: TorusGrid, dealias_rule: f64) -> Result<Self> {
        model.check_resolved(grid)?;
        let mode_index = model
            .plus_modes
            .iter()
            .map(|m| {
                let i = grid.index_of(&m.k).expect("resolved support lies on grid");
                (i, grid.negated(i))
            })
            .collect();
        Ok(Self {
            grid,
            plan: FftPlan::new(grid),
            mask: DealiasMask::new(grid, dealias_rule),
            mode_index,
        })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    /// Velocity field `scale * sqrt(c_d nu) sum theta sigma dW` sampled on the grid.
    pub fn velocity(&mut self, model: &NoiseModel, inc: &IncrementSet, scale: f64) -> Vec<GridField> {
        let c = scale * (model.c_d * model.nu).sqrt();
        (0..model.d)
            .map(|j| {
                let mut u = SpectralField::zeros(self.grid);
                let coeffs = u.coeffs_mut();
                for (i, mode) in model.plus_modes.iter().enumerate() {
                    let mut z = Complex64::new(0.0, 0.0);
                    for (a, w) in mode.basis.iter().zip(inc.for_mode(i)) {
                        z += w * a[j];
                    }
                    z *= c * mode.theta;
                    let (p, m) = self.mode_index[i];
                    coeffs[p] += z;
                    coeffs[m] += z.conj();
                }
                self.plan.to_grid_unchecked(&u)
            })
            .collect()
    }

    /// Spectral coefficients of `u . grad v`, dealiased, with the zero mode set to 0
    /// (the product is mean-free because `div u = 0`).
    pub fn advect(&mut self, u: &[GridField], v: &SpectralField) -> SpectralField {
        let mut acc = vec![0.0; self.grid.len()];
        for (j, uj) in u.iter().enumerate() {
            let mut dv = v.clone();
            differentiate_in_place(&mut dv, j);
            let g = self.plan.to_grid_unchecked(&dv);
            for ((a, x), y) in acc.iter_mut().zip(uj.values()).zip(g.values()) {
                *a += x * y;
            }
        }
        let field = GridField::new(self.grid, acc).expect("grid-sized buffer");
        let mut out = self.plan.to_spectral_unchecked(&field);
        self.mask.apply(&mut out);
        out.coeffs_mut()[0] = Complex64::new(0.0, 0.0);
        out
    }
}

/// One Itô transport increment `sqrt(c_d nu) sum theta (sigma . grad) v dW`,
/// dealiased with the two-thirds rule.
pub fn transport_increment(
    model: &NoiseModel,
    v: &SpectralField,
    inc: &IncrementSet,
) -> Result<SpectralField> {
    let mut op = TransportOperator::new(model, v.grid(), TWO_THIRDS)?;
    let u = op.velocity(model, inc, 1.0);
    Ok(op.advect(&u, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus_field::{to_grid, to_spectral};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn partition_rule() {
        assert_eq!(lattice_partition(&[1, -5]).unwrap(), Sign::Plus);
        assert_eq!(lattice_partition(&[0, -2]).unwrap(), Sign::Minus);
        assert_eq!(lattice_partition(&[0, 0, 3]).unwrap(), Sign::Plus);
        assert!(lattice_partition(&[0, 0]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let k: Vec<i64> = (0..3).map(|_| rng.random_range(-5..=5)).collect();
            if k.iter().all(|&x| x == 0) {
                continue;
            }
            let neg: Vec<i64> = k.iter().map(|x| -x).collect();
            assert_ne!(lattice_partition(&k).unwrap(), lattice_partition(&neg).unwrap());
        }
    }

    #[test]
    fn basis_examples() {
        let a = hyperplane_basis(&[3, 4, 0], 2).unwrap();
        assert_relative_eq!(a[0][0], -0.8, epsilon = 1e-15);
        assert_relative_eq!(a[0][1], 0.6, epsilon = 1e-15);
        assert_eq!(hyperplane_basis(&[-3, -4, 0], 2).unwrap(), a);

        let b = hyperplane_basis(&[0, 0, 1], 3).unwrap();
        assert_eq!(b, vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert!(hyperplane_basis(&[0, 0, 0], 3).is_err());
    }

    #[test]
    fn basis_is_orthonormal_and_orthogonal_to_k() {
        for k0 in -3i64..=3 {
            for k1 in -3i64..=3 {
                for k2 in -3i64..=3 {
                    let k = [k0, k1, k2];
                    if k == [0, 0, 0] {
                        continue;
                    }
                    let kf: Vec<f64> = k.iter().map(|&x| x as f64).collect();
                    let basis = hyperplane_basis(&k, 3).unwrap();
                    assert_eq!(basis.len(), 2);
                    for (a, x) in basis.iter().enumerate() {
                        assert!(dot(x, &kf).abs() < 1e-14);
                        for (b, y) in basis.iter().enumerate() {
                            let g = dot(x, y);
                            let target = if a == b { 1.0 } else { 0.0 };
                            assert!((g - target).abs() < 1e-14);
                        }
                    }
                }
            }
        }
    }

    /// Brute-force annulus count for the shell oracle.
    fn count_annulus(n: i64, d: usize) -> usize {
        let r = 2 * n;
        let mut count = 0;
        for a in -r..=r {
            for b in -r..=r {
                let cs: Vec<i64> = if d == 3 { (-r..=r).collect() } else { vec![0] };
                for c in cs {
                    let s = a * a + b * b + c * c;
                    if s > 0 && n * n <= s && s <= 4 * n * n {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    #[test]
    fn shell_spectra() {
        let s1 = NoiseSpectrum::theta_shell(1, 0.0, 2).unwrap();
        assert_eq!(s1.modes().len(), 12);
        assert_eq!(count_annulus(1, 2), 12);
        for (_, t) in s1.modes() {
            assert_relative_eq!(*t, 12f64.powf(-0.5), epsilon = 1e-15);
        }
        let s2 = NoiseSpectrum::theta_shell(2, 0.0, 2).unwrap();
        assert_eq!(s2.modes().len(), 40);
        assert_eq!(count_annulus(2, 2), 40);
        assert_relative_eq!(s2.modes()[0].1, 40f64.powf(-0.5), epsilon = 1e-15);
        assert!(s2.linf_norm() < s1.linf_norm());
        for d in [2, 3] {
            for n in [1, 2, 3] {
                for gamma in [0.0, 0.5, 1.0] {
                    let s = NoiseSpectrum::theta_shell(n, gamma, d).unwrap();
                    assert_eq!(s.modes().len(), count_annulus(n as i64, d));
                    let sum: f64 = s.modes().iter().map(|(_, t)| t * t).sum();
                    assert!((sum - 1.0).abs() < 1e-13);
                    for (k, t) in s.modes() {
                        let neg = [-k[0], -k[1], -k[2]];
                        assert_eq!(s.theta(&neg), *t);
                    }
                }
            }
        }
    }

    #[test]
    fn spectrum_validation() {
        let s = NoiseSpectrum::theta_shell(1, 0.0, 2).unwrap();
        let mut modes = s.modes().to_vec();
        modes.pop();
        assert!(NoiseSpectrum::new(2, modes.clone()).is_err());
        let norm: f64 = modes.iter().map(|(_, t)| t * t).sum::<f64>().sqrt();
        modes.iter_mut().for_each(|(_, t)| *t /= norm);
        // normalized but missing a lattice point on its sphere
        assert!(NoiseSpectrum::new(2, modes).is_err());
        assert!(NoiseSpectrum::theta_shell(0, 0.0, 2).is_err());
    }

    #[test]
    fn ellipticity_holds_for_shells() {
        for d in [2, 3] {
            for n in [1, 2, 4, 8] {
                for gamma in [0.0, 0.5, 1.0] {
                    let m = NoiseModel::shell(d, n, gamma, 1.0).unwrap();
                    let dev = verify_ellipticity(&m);
                    assert!(dev < 1e-12, "d={d} n={n} gamma={gamma}: {dev:e}");
                }
            }
        }
    }

    #[test]
    fn ellipticity_detector_flags_broken_spectrum() {
        let s = NoiseSpectrum::theta_shell(1, 0.0, 2).unwrap();
        let modes: Vec<_> = s
            .modes()
            .iter()
            .map(|&(k, t)| if k == [1, 0, 0] { (k, 0.0) } else { (k, t) })
            .collect();
        let broken = NoiseModel::new(NoiseSpectrum::from_modes_unchecked(2, modes).unwrap(), 1.0).unwrap();
        assert!(verify_ellipticity(&broken) > 0.01);
    }

    #[test]
    fn csv_round_trip() {
        let s = NoiseSpectrum::theta_shell(1, 0.5, 3).unwrap();
        let csv = s.to_csv();
        assert!(csv.starts_with("k1,k2,k3,theta\n"));
        assert_eq!(NoiseSpectrum::from_csv_unchecked(&csv).unwrap(), s);
        assert!(NoiseSpectrum::from_csv_unchecked("k1,k2,theta\n1,x,0.5\n").is_err());
    }

    #[test]
    fn increments_zero_step_and_conjugation() {
        let m = NoiseModel::shell(2, 2, 0.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = sample_increments(&m, 0.0, &mut rng);
        assert!(z.values().iter().all(|w| w.re == 0.0 && w.im == 0.0));
        let inc = sample_increments(&m, 0.01, &mut rng);
        for &(k, _) in m.spectrum().modes() {
            let neg = [-k[0], -k[1], -k[2]];
            assert_eq!(inc.get(&m, &neg, 0).unwrap(), inc.get(&m, &k, 0).unwrap().conj());
        }
    }

    #[test]
    fn increment_second_moment() {
        let m = NoiseModel::shell(2, 1, 0.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let dt = 0.01;
        let mut sum = 0.0;
        let mut count = 0usize;
        while count < 100_000 {
            let inc = sample_increments(&m, dt, &mut rng);
            for w in inc.values() {
                sum += w.norm_sqr() / dt;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        assert!((mean - 2.0).abs() < 0.03, "{mean}");
    }

    #[test]
    fn velocity_covariance_is_isotropic() {
        // E[u u^T] = 2 nu dt I follows from the ellipticity identity
        let (nu, dt) = (0.3, 0.01);
        let m = NoiseModel::shell(2, 2, 0.0, nu).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let x = [0.3, 0.7];
        let samples = 20_000;
        let mut acc = [[0.0f64; 2]; 2];
        let mut acc2 = [[0.0f64; 2]; 2];
        for _ in 0..samples {
            let inc = sample_increments(&m, dt, &mut rng);
            let u = velocity_at(&m, &inc, &x);
            for a in 0..2 {
                for b in 0..2 {
                    let p = u[a] * u[b];
                    acc[a][b] += p;
                    acc2[a][b] += p * p;
                }
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                let mean = acc[a][b] / samples as f64;
                let var = acc2[a][b] / samples as f64 - mean * mean;
                let se = (var / samples as f64).sqrt();
                let target = if a == b { 2.0 * nu * dt } else { 0.0 };
                assert!((mean - target).abs() < 5.0 * se, "({a},{b}) {mean} vs {target} se {se}");
            }
        }
    }

    #[test]
    fn transport_trivial_cases() {
        let grid = TorusGrid::new(2, 32).unwrap();
        let m = NoiseModel::shell(2, 2, 0.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inc = sample_increments(&m, 0.01, &mut rng);
        let c = to_spectral(&GridField::constant(grid, 2.0)).unwrap();
        assert_eq!(transport_increment(&m, &c, &inc).unwrap().max_abs(), 0.0);
        let v = to_spectral(&GridField::from_fn(grid, |x| (2.0 * PI * x[0]).sin())).unwrap();
        let zero = IncrementSet::zeros(&m, 0.01);
        assert_eq!(transport_increment(&m, &v, &zero).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn transport_rejects_under_resolved_grid() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let m = NoiseModel::shell(2, 4, 0.0, 0.1).unwrap();
        let v = SpectralField::zeros(grid);
        let inc = IncrementSet::zeros(&m, 0.1);
        assert!(matches!(transport_increment(&m, &v, &inc), Err(KrdError::UnderResolved { .. })));
    }

    #[test]
    fn transport_single_mode_closed_form() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let theta = 0.6;
        let nu = 0.2;
        let spec = NoiseSpectrum::from_modes_unchecked(2, vec![([0, 1, 0], theta), ([0, -1, 0], theta)]).unwrap();
        let m = NoiseModel::new(spec, nu).unwrap();
        let mut inc = IncrementSet::zeros(&m, 0.01);
        let dw = Complex64::new(0.07, -0.03);
        inc.values[0] = dw;
        let v = to_spectral(&GridField::from_fn(grid, |x| (2.0 * PI * x[0]).sin())).unwrap();
        let out = to_grid(&transport_increment(&m, &v, &inc).unwrap()).unwrap();
        // a_{(0,1)} = (-1, 0), so (a . grad) sin(2 pi x1) = -2 pi cos(2 pi x1)
        let c = (2.0 * nu).sqrt();
        let expected = GridField::from_fn(grid, |x| {
            let e = Complex64::from_polar(1.0, 2.0 * PI * x[1]);
            c * theta * (-2.0 * PI * (2.0 * PI * x[0]).cos()) * 2.0 * (e * dw).re
        });
        for (a, b) in out.values().iter().zip(expected.values()) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn transport_output_is_mean_free_and_real() {
        let grid = TorusGrid::new(2, 32).unwrap();
        let m = NoiseModel::shell(2, 2, 1.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let inc = sample_increments(&m, 0.01, &mut rng);
        let v = to_spectral(&GridField::from_fn(grid, |x| {
            (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos() + 0.3 * (4.0 * PI * x[1]).sin()
        }))
        .unwrap();
        let t = transport_increment(&m, &v, &inc).unwrap();
        assert_eq!(t.coeffs()[0], Complex64::new(0.0, 0.0));
        assert!(t.hermitian_deviation() < 1e-10 * t.max_abs().max(1e-300));
    }
}

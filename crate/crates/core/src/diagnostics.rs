//! Observables recorded along trajectories: Lebesgue norms, weighted mass,
//! the `L^q` energy balance residual, trajectory distances and survival statistics.
//!
//! Time integrals use the trapezoid rule on the recorded samples.

use std::fmt::Write as _;

use crate::error::{KrdError, Result};
use crate::reactions::{flux_divergence_with, ReactionSystem};
use crate::torus_field::{
    differentiate_in_place, lp_norm, lp_norm_vector, DealiasMask, FftPlan, GridField, SpectralField,
    TorusGrid,
};

/// Two-sided 95% normal quantile used by the Wilson interval.
pub const WILSON_Z: f64 = 1.959964;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpeciesTrace {
    /// `lq_norms[j][s]` is `||v_i(t_s)||_{L^{q_j}}`.
    pub lq_norms: Vec<Vec<f64>>,
    pub mass: Vec<f64>,
    pub min_value: Vec<f64>,
    /// Running `int_0^t int |v_i|^{q-2} |grad v_i|^2`, `q` the balance exponent.
    pub grad_energy: Vec<f64>,
    pub residual: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticsRecord {
    pub q_list: Vec<f64>,
    pub balance_q: f64,
    pub times: Vec<f64>,
    pub species: Vec<SpeciesTrace>,
    pub cutoff_phi: Vec<f64>,
    pub cutoff_acc: Vec<f64>,
    pub blowup_tau: Option<f64>,
}

impl DiagnosticsRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest `|residual|` over species and samples.
    pub fn max_abs_residual(&self) -> f64 {
        self.species
            .iter()
            .flat_map(|s| s.residual.iter())
            .fold(0.0, |m, r| m.max(r.abs()))
    }

    /// Weighted mass `sum_i alpha_i mass_i(t)` at every sample.
    pub fn weighted_mass(&self, alpha: &[f64]) -> Vec<f64> {
        (0..self.times.len())
            .map(|s| self.species.iter().zip(alpha).map(|(sp, a)| a * sp.mass[s]).sum())
            .collect()
    }

    /// One row per `(t, species)`:
    /// `t,species,lq_<q>...,mass,min_val,grad_energy,phi,residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,species");
        for q in &self.q_list {
            let _ = write!(out, ",lq_{q}");
        }
        out.push_str(",mass,min_val,grad_energy,phi,residual\n");
        for (s, t) in self.times.iter().enumerate() {
            for (i, sp) in self.species.iter().enumerate() {
                let _ = write!(out, "{t},{i}");
                for norms in &sp.lq_norms {
                    let _ = write!(out, ",{}", norms[s]);
                }
                let _ = writeln!(
                    out,
                    ",{},{},{},{},{}",
                    sp.mass[s], sp.min_value[s], sp.grad_energy[s], self.cutoff_phi[s], sp.residual[s]
                );
            }
        }
        out
    }
}

/// Pointwise balance integrands for each species at one instant.
#[derive(Debug, Clone)]
struct BalanceTerms {
    lq_power: Vec<f64>,
    grad: Vec<f64>,
    source: Vec<f64>,
}

/// Streaming builder for a [`DiagnosticsRecord`].
///
/// The balance residual for species `i` is
/// `||v_i(t)||_q^q + nu_i q (q-1) int |v_i|^{q-2}|grad v_i|^2 - ||v_i(0)||_q^q
///  - q int int |v_i|^{q-2} v_i phi (div F_i + f_i)`.
#[derive(Debug, Clone)]
pub struct Recorder {
    grid: TorusGrid,
    balance_nu: Vec<f64>,
    plan: FftPlan,
    mask: DealiasMask,
    record: DiagnosticsRecord,
    prev: Option<(f64, BalanceTerms)>,
    initial_power: Vec<f64>,
    grad_int: Vec<f64>,
    source_int: Vec<f64>,
}

impl Recorder {
    pub fn new(grid: TorusGrid, q_list: Vec<f64>, balance_q: f64, balance_nu: Vec<f64>, dealias_rule: f64) -> Result<Self> {
        if !(balance_q >= 2.0) || !balance_q.is_finite() {
            return Err(KrdError::InvalidExponent(balance_q));
        }
        if let Some(&bad) = q_list.iter().find(|q| q.is_nan() || **q < 1.0) {
            return Err(KrdError::InvalidExponent(bad));
        }
        let ell = balance_nu.len();
        Ok(Self {
            grid,
            plan: FftPlan::new(grid),
            mask: DealiasMask::new(grid, dealias_rule),
            record: DiagnosticsRecord {
                species: vec![
                    SpeciesTrace { lq_norms: vec![Vec::new(); q_list.len()], ..Default::default() };
                    ell
                ],
                q_list,
                balance_q,
                ..Default::default()
            },
            balance_nu,
            prev: None,
            initial_power: Vec::new(),
            grad_int: vec![0.0; ell],
            source_int: vec![0.0; ell],
        })
    }

    fn balance_terms(
        &mut self,
        sys: &ReactionSystem,
        t: f64,
        fields: &[GridField],
        spectral: &[SpectralField],
        phi: f64,
    ) -> Result<BalanceTerms> {
        let q = self.record.balance_q;
        let ell = fields.len();
        let d = self.grid.dim();
        let w = self.grid.weight();
        let mut terms = BalanceTerms { lq_power: vec![0.0; ell], grad: vec![0.0; ell], source: vec![0.0; ell] };
        let mut drive: Vec<Vec<f64>> = vec![vec![0.0; self.grid.len()]; ell];
        if phi != 0.0 && sys.has_reaction() {
            let f = crate::reactions::evaluate_reaction(sys, t, fields)?;
            for (dst, src) in drive.iter_mut().zip(f) {
                dst.copy_from_slice(src.values());
            }
        }
        if phi != 0.0 && sys.has_flux() {
            let div = flux_divergence_with(sys, t, fields, &mut self.plan, &self.mask)?;
            for (dst, c) in drive.iter_mut().zip(div) {
                let g = self.plan.to_grid_unchecked(&c);
                for (a, b) in dst.iter_mut().zip(g.values()) {
                    *a += b;
                }
            }
        }
        for i in 0..ell {
            let v = fields[i].values();
            let mut grad_sq = vec![0.0; v.len()];
            for j in 0..d {
                let mut c = spectral[i].clone();
                differentiate_in_place(&mut c, j);
                let g = self.plan.to_grid_unchecked(&c);
                for (a, b) in grad_sq.iter_mut().zip(g.values()) {
                    *a += b * b;
                }
            }
            let (mut power, mut grad, mut source) = (0.0, 0.0, 0.0);
            for ((&x, &g2), &f) in v.iter().zip(&grad_sq).zip(&drive[i]) {
                let a = x.abs();
                let pow_q2 = if q == 2.0 { 1.0 } else { a.powf(q - 2.0) };
                power += pow_q2 * a * a;
                grad += pow_q2 * g2;
                source += pow_q2 * x * f;
            }
            terms.lq_power[i] = power * w;
            terms.grad[i] = grad * w;
            terms.source[i] = q * phi * source * w;
        }
        Ok(terms)
    }

    /// Appends one sample at time `t` (strictly after the previous one).
    pub fn sample(
        &mut self,
        sys: &ReactionSystem,
        t: f64,
        fields: &[GridField],
        spectral: &[SpectralField],
        phi: f64,
        cutoff_acc: f64,
    ) -> Result<()> {
        if let Some(&last) = self.record.times.last() {
            if !(t > last) {
                return Err(KrdError::InvalidConfig(format!("sample time {t} not after {last}")));
            }
        }
        let terms = self.balance_terms(sys, t, fields, spectral, phi)?;
        let q = self.record.balance_q;
        match &self.prev {
            None => self.initial_power = terms.lq_power.clone(),
            Some((t0, prev)) => {
                let h = 0.5 * (t - t0);
                for i in 0..fields.len() {
                    self.grad_int[i] += h * (prev.grad[i] + terms.grad[i]);
                    self.source_int[i] += h * (prev.source[i] + terms.source[i]);
                }
            }
        }
        self.record.times.push(t);
        self.record.cutoff_phi.push(phi);
        self.record.cutoff_acc.push(cutoff_acc);
        for (i, f) in fields.iter().enumerate() {
            let trace = &mut self.record.species[i];
            for (j, &qj) in self.record.q_list.iter().enumerate() {
                trace.lq_norms[j].push(lp_norm(f, qj)?);
            }
            trace.mass.push(spectral[i].mean());
            trace.min_value.push(f.min());
            trace.grad_energy.push(self.grad_int[i]);
            trace.residual.push(
                terms.lq_power[i] + self.balance_nu[i] * q * (q - 1.0) * self.grad_int[i]
                    - self.initial_power[i]
                    - self.source_int[i],
            );
        }
        self.prev = Some((t, terms));
        Ok(())
    }

    pub fn record(&self) -> &DiagnosticsRecord {
        &self.record
    }

    pub fn finish(mut self, blowup_tau: Option<f64>) -> DiagnosticsRecord {
        self.record.blowup_tau = blowup_tau;
        self.record
    }
}

/// Residual of the `L^q` balance for a stored trajectory without cut-off.
/// `diffusivity[i]` is the total diffusivity acting on species `i`.
pub fn lq_balance_residual(
    sys: &ReactionSystem,
    traj: &Trajectory,
    q: f64,
    diffusivity: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if traj.times.len() < 2 {
        return Err(KrdError::InsufficientData("balance residual needs at least two samples".into()));
    }
    let grid = traj.grid()?;
    let mut plan = FftPlan::new(grid);
    let mut rec = Recorder::new(grid, Vec::new(), q, diffusivity.to_vec(), crate::torus_field::TWO_THIRDS)?;
    for (t, frame) in traj.times.iter().zip(&traj.frames) {
        let spectral: Vec<SpectralField> = frame.iter().map(|f| plan.to_spectral(f)).collect::<Result<_>>()?;
        rec.sample(sys, *t, frame, &spectral, 1.0, 0.0)?;
    }
    Ok(rec.finish(None).species.into_iter().map(|s| s.residual).collect())
}

/// Sampled multi-species trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub frames: Vec<Vec<GridField>>,
}

impl Trajectory {
    pub fn push(&mut self, t: f64, frame: Vec<GridField>) {
        self.times.push(t);
        self.frames.push(frame);
    }

    fn grid(&self) -> Result<TorusGrid> {
        self.frames
            .first()
            .and_then(|f| f.first())
            .map(|f| f.grid())
            .ok_or_else(|| KrdError::InsufficientData("empty trajectory".into()))
    }
}

/// `(int_0^T g(t)^r dt)^{1/r}` by trapezoid from samples of `g`.
pub fn lr_time_norm(times: &[f64], values: &[f64], r: f64) -> Result<f64> {
    if times.len() != values.len() {
        return Err(KrdError::InsufficientData("times and values differ in length".into()));
    }
    if !(r >= 1.0) {
        return Err(KrdError::InvalidExponent(r));
    }
    let integral: f64 = times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, g)| 0.5 * (t[1] - t[0]) * (g[0].powf(r) + g[1].powf(r)))
        .sum();
    Ok(integral.powf(1.0 / r))
}

/// `||u - w||_{L^r(0,T; L^q(T^d; R^l))}` on common sample times.
pub fn lrlq_distance(u: &Trajectory, w: &Trajectory, r: f64, q: f64) -> Result<f64> {
    if u.times != w.times || u.frames.len() != w.frames.len() {
        return Err(KrdError::InsufficientData("trajectories sampled at different times".into()));
    }
    let norms = u
        .frames
        .iter()
        .zip(&w.frames)
        .map(|(a, b)| {
            if a.len() != b.len() {
                return Err(KrdError::GridMismatch("species counts differ".into()));
            }
            let diff = a
                .iter()
                .zip(b)
                .map(|(x, y)| {
                    if x.grid() != y.grid() {
                        return Err(KrdError::GridMismatch("frames on different grids".into()));
                    }
                    let v = x.values().iter().zip(y.values()).map(|(p, q)| p - q).collect();
                    GridField::new(x.grid(), v)
                })
                .collect::<Result<Vec<_>>>()?;
            lp_norm_vector(&diff, q)
        })
        .collect::<Result<Vec<_>>>()?;
    lr_time_norm(&u.times, &norms, r)
}

/// Exponential mass bound `M(t) <= C (e^{a1 t} M(0) + a0 (e^{a1 t} - 1) / a1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassBound {
    pub a0: f64,
    pub a1: f64,
    pub c: f64,
}

impl MassBound {
    pub fn value(&self, t: f64, m0: f64) -> f64 {
        let growth = (self.a1 * t).exp();
        let inhom = if self.a1 == 0.0 { self.a0 * t } else { self.a0 * (growth - 1.0) / self.a1 };
        self.c * (growth * m0 + inhom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassTrace {
    pub values: Vec<f64>,
    /// `max_t (M(t) - bound(t))`, when a bound was supplied.
    pub worst_excess: Option<f64>,
}

impl MassTrace {
    pub fn violated(&self, tol: f64) -> bool {
        self.worst_excess.is_some_and(|e| e > tol)
    }

    /// `max_t |M(t) - M(0)|`.
    pub fn max_drift(&self) -> f64 {
        let m0 = self.values.first().copied().unwrap_or(0.0);
        self.values.iter().fold(0.0, |m, v| m.max((v - m0).abs()))
    }
}

pub fn mass_trace(record: &DiagnosticsRecord, alpha: &[f64], bound: Option<MassBound>) -> Result<MassTrace> {
    if alpha.len() != record.species.len() || alpha.iter().any(|a| !(*a > 0.0)) {
        return Err(KrdError::InvalidReaction("mass weights must be positive, one per species".into()));
    }
    let values = record.weighted_mass(alpha);
    let worst_excess = bound.map(|b| {
        let m0 = values.first().copied().unwrap_or(0.0);
        record
            .times
            .iter()
            .zip(&values)
            .map(|(&t, &m)| m - b.value(t - record.times[0], m0))
            .fold(f64::NEG_INFINITY, f64::max)
    });
    Ok(MassTrace { values, worst_excess })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalEstimate {
    pub survivors: usize,
    pub total: usize,
    pub p_hat: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Fraction of paths with no blow-up before `t_end`, with a Wilson 95% interval.
pub fn survival_estimate(taus: &[Option<f64>], t_end: f64) -> Result<SurvivalEstimate> {
    if taus.is_empty() {
        return Err(KrdError::InsufficientData("no paths".into()));
    }
    let total = taus.len();
    let survivors = taus.iter().filter(|t| t.is_none_or(|tau| tau >= t_end)).count();
    let (lower, upper) = wilson_interval(survivors, total);
    Ok(SurvivalEstimate { survivors, total, p_hat: survivors as f64 / total as f64, lower, upper })
}

pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lower = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let upper = if successes as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lower, upper)
}

/// `||v||_{H^{-gamma}} = (sum (1 + |k|^2)^{-gamma} |c_k|^2)^{1/2}`.
pub fn h_minus_norm(c: &SpectralField, gamma: f64) -> f64 {
    let grid = c.grid();
    c.coeffs()
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let k = grid.wavevector(i);
            let k2: i64 = k.iter().map(|x| x * x).sum();
            (1.0 + k2 as f64).powf(-gamma) * z.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// Least-squares slope `-b` of `ln y = a - b t`, i.e. the exponential decay rate.
/// `None` when fewer than two positive samples remain.
pub fn log_linear_rate(times: &[f64], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 0.0 && v.is_finite())
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    Some(-sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reactions::Builtin;
    use crate::torus_field::to_spectral;
    use std::f64::consts::PI;

    fn traj_from(grid: TorusGrid, times: &[f64], f: impl Fn(f64, &[f64]) -> f64) -> Trajectory {
        let mut tr = Trajectory::default();
        for &t in times {
            tr.push(t, vec![GridField::from_fn(grid, |x| f(t, x))]);
        }
        tr
    }

    #[test]
    fn wilson_examples() {
        let all = survival_estimate(&[None; 10], 1.0).unwrap();
        assert_eq!((all.p_hat, all.upper), (1.0, 1.0));
        let none = survival_estimate(&[Some(0.1); 10], 1.0).unwrap();
        assert_eq!(none.p_hat, 0.0);
        let mut taus = vec![None; 9];
        taus.push(Some(0.5));
        let nine = survival_estimate(&taus, 1.0).unwrap();
        assert_eq!(nine.p_hat, 0.9);
        assert!((nine.lower - 0.5958).abs() < 1e-3, "{}", nine.lower);
        assert!((nine.upper - 0.9821).abs() < 1e-3, "{}", nine.upper);
        assert_eq!(survival_estimate(&[Some(2.0)], 1.0).unwrap().p_hat, 1.0);
        assert!(survival_estimate(&[], 1.0).is_err());
    }

    #[test]
    fn wilson_width_shrinks_like_inverse_sqrt() {
        let (l1, u1) = wilson_interval(90, 100);
        let (l2, u2) = wilson_interval(360, 400);
        let ratio = (u1 - l1) / (u2 - l2);
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn equilibrium_residual_vanishes() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let sys = ReactionSystem::zero(vec![0.3]).unwrap();
        let tr = traj_from(grid, &[0.0, 0.1, 0.2, 0.3], |_, _| 1.5);
        let res = lq_balance_residual(&sys, &tr, 2.0, &[0.3]).unwrap();
        assert!(res[0].iter().all(|r| r.abs() < 1e-12));
        let res4 = lq_balance_residual(&sys, &tr, 4.0, &[0.3]).unwrap();
        assert!(res4[0].iter().all(|r| r.abs() < 1e-12));
        assert!(lq_balance_residual(&sys, &Trajectory::default(), 2.0, &[0.3]).is_err());
    }

    #[test]
    fn heat_residual_is_second_order_in_sampling() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let nu = 0.05;
        let lambda = 4.0 * PI * PI * nu;
        let sys = ReactionSystem::zero(vec![nu]).unwrap();
        let residual_at = |dt: f64| {
            let steps = (0.5 / dt).round() as usize;
            let times: Vec<f64> = (0..=steps).map(|s| s as f64 * dt).collect();
            let tr = traj_from(grid, &times, |t, x| (-lambda * t).exp() * (2.0 * PI * x[0]).cos());
            *lq_balance_residual(&sys, &tr, 2.0, &[nu]).unwrap()[0].last().unwrap()
        };
        let ratio = residual_at(0.02) / residual_at(0.01);
        assert!((ratio - 4.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn decay_balance_accounts_for_the_source() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let sys = ReactionSystem::builtin(Builtin::Decay, vec![0.0]).unwrap();
        let times: Vec<f64> = (0..=200).map(|s| s as f64 * 0.005).collect();
        let tr = traj_from(grid, &times, |t, _| 2.0 * (-t).exp());
        let res = lq_balance_residual(&sys, &tr, 3.0, &[0.0]).unwrap();
        assert!(res[0].last().unwrap().abs() < 1e-3);
    }

    #[test]
    fn distance_examples() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let times: Vec<f64> = (0..=10).map(|s| s as f64 * 0.1).collect();
        let u = traj_from(grid, &times, |t, x| t * (2.0 * PI * x[1]).sin());
        assert_eq!(lrlq_distance(&u, &u, 2.0, 2.0).unwrap(), 0.0);
        let c = 0.7;
        let mut u2 = Trajectory::default();
        let mut w2 = Trajectory::default();
        for (t, frame) in u.times.iter().zip(&u.frames) {
            let f = &frame[0];
            let shifted = GridField::new(grid, f.values().iter().map(|v| v + c).collect()).unwrap();
            u2.push(*t, vec![f.clone(), f.clone()]);
            w2.push(*t, vec![shifted.clone(), shifted]);
        }
        let d = lrlq_distance(&u2, &w2, 2.0, 2.0).unwrap();
        assert!((d - c * 2f64.sqrt()).abs() < 1e-12);
        let mut bad = u.clone();
        bad.times[3] += 1e-3;
        assert!(lrlq_distance(&u, &bad, 2.0, 2.0).is_err());
    }

    #[test]
    fn mass_trace_bounds() {
        let mut rec = DiagnosticsRecord { times: vec![0.0, 0.5, 1.0], ..Default::default() };
        rec.species = vec![SpeciesTrace { mass: vec![1.0, (-0.5f64).exp(), (-1f64).exp()], ..Default::default() }];
        let bound = MassBound { a0: 0.0, a1: -1.0, c: 1.0 };
        let tr = mass_trace(&rec, &[1.0], Some(bound)).unwrap();
        assert!(!tr.violated(1e-12));
        let rate = log_linear_rate(&rec.times, &tr.values).unwrap();
        assert!((rate - 1.0).abs() < 1e-12);
        let tight = MassBound { a0: 0.0, a1: -2.0, c: 1.0 };
        assert!(mass_trace(&rec, &[1.0], Some(tight)).unwrap().violated(1e-12));
        assert!(mass_trace(&rec, &[0.0], None).is_err());
        assert_eq!(MassBound { a0: 1.0, a1: 0.0, c: 1.0 }.value(2.0, 1.0), 3.0);
    }

    #[test]
    fn recorder_csv_layout() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let sys = ReactionSystem::zero(vec![0.1, 0.2]).unwrap();
        let mut rec = Recorder::new(grid, vec![2.0, 4.0], 2.0, vec![0.1, 0.2], 2.0 / 3.0).unwrap();
        let f = GridField::from_fn(grid, |x| 1.0 + (2.0 * PI * x[0]).cos());
        let c = to_spectral(&f).unwrap();
        for t in [0.0, 0.1] {
            rec.sample(&sys, t, &[f.clone(), f.clone()], &[c.clone(), c.clone()], 1.0, 0.0).unwrap();
        }
        assert!(rec.sample(&sys, 0.1, &[f.clone(), f.clone()], &[c.clone(), c.clone()], 1.0, 0.0).is_err());
        let csv = rec.finish(None).to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,species,lq_2,lq_4,mass,min_val,grad_energy,phi,residual");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,0,"));
        assert!(lines[4].starts_with("0.1,1,"));
        assert!(lines.iter().all(|l| l.split(',').count() == 9));
    }

    #[test]
    fn h_minus_norm_weights() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let f = GridField::from_fn(grid, |x| (2.0 * PI * x[0]).cos());
        let c = to_spectral(&f).unwrap();
        assert!((h_minus_norm(&c, 0.0) - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((h_minus_norm(&c, 1.0) - 0.25f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn degenerate_rate() {
        assert_eq!(log_linear_rate(&[0.0, 1.0], &[0.0, 0.0]), None);
    }
}

//! Monte-Carlo harnesses: scaling limit towards the enhanced-diffusion
//! equation, survival probability against blow-up, and exponential decay.
//!
//! Paths run in parallel on the ambient rayon pool. Each path draws from its
//! own counter-based stream, so tables do not depend on scheduling order.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::diagnostics::{
    h_minus_norm, log_linear_rate, lr_time_norm, survival_estimate, wilson_interval, DiagnosticsRecord,
    SurvivalEstimate,
};
use crate::error::{KrdError, Result};
use crate::noise::NoiseModel;
use crate::reactions::ReactionSystem;
use crate::rng::derive_seed;
use crate::solver::{SimState, Solver, SolverConfig};
use crate::torus_field::{lp_norm_vector, GridField, SpectralField, TorusGrid, Wavevector};

/// Outcome of a single Monte-Carlo path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRecord {
    pub path: u64,
    pub tau: Option<f64>,
    pub survived: bool,
    /// `L^r(0,T; L^q)` distance to the reference, `NaN` when not measured.
    pub dist: f64,
}

/// `path,tau,survived,dist_LrLq`; an empty `tau` means no blow-up.
pub fn paths_csv(records: &[PathRecord]) -> String {
    let mut out = String::from("path,tau,survived,dist_LrLq\n");
    for r in records {
        let tau = r.tau.map(|t| t.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", r.path, tau, r.survived, r.dist);
    }
    out
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_nonneg(v0: &[GridField]) -> Result<()> {
    if v0.iter().any(|f| f.min() < 0.0) {
        return Err(KrdError::InvalidConfig("initial data must be nonnegative".into()));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ScalingLimitPlan {
    pub grid: TorusGrid,
    pub shells: Vec<u32>,
    pub gamma: f64,
    pub nu: f64,
    pub paths: usize,
    pub base: SolverConfig,
    pub sys: ReactionSystem,
    pub v0: Vec<GridField>,
    pub epsilon: f64,
    pub r: f64,
    pub q: f64,
    /// Also report `sup_t ||v - v_det||_{H^{-gamma}}` for this `gamma`.
    pub h_minus_gamma: Option<f64>,
}

impl ScalingLimitPlan {
    pub fn validate(&self) -> Result<()> {
        if self.shells.is_empty() || self.shells.windows(2).any(|w| w[0] >= w[1]) || self.shells[0] == 0 {
            return Err(KrdError::InvalidConfig("shells must be positive and strictly increasing".into()));
        }
        let n_max = *self.shells.last().expect("nonempty") as usize;
        if 6 * n_max > self.grid.n() {
            return Err(KrdError::UnderResolved { max_k: 2 * n_max as i64, n: self.grid.n() });
        }
        if self.paths == 0 {
            return Err(KrdError::InvalidConfig("paths must be >= 1".into()));
        }
        if !(self.nu >= 0.0) || !(self.r >= 1.0) || !(self.q >= 1.0) {
            return Err(KrdError::InvalidConfig("need nu >= 0, r >= 1, q >= 1".into()));
        }
        self.base.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub n: u32,
    pub theta_linf: f64,
    pub mean_dist: f64,
    pub std_err: f64,
    pub p_exceed: f64,
    /// Max over paths of `sup_t ||v||_q^q + grad_energy`.
    pub energy_bound: f64,
    pub mean_h_minus: Option<f64>,
    pub paths: Vec<PathRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
}

impl ScalingTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,theta_linf,mean_dist,std_err,p_exceed,energy_bound,mean_h_minus\n");
        for r in &self.rows {
            let hm = r.mean_h_minus.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.n, r.theta_linf, r.mean_dist, r.std_err, r.p_exceed, r.energy_bound, hm
            );
        }
        out
    }

    /// Mean distances strictly decrease along the shells.
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].mean_dist < w[0].mean_dist)
    }
}

struct Reference {
    times: Vec<f64>,
    spectral: Vec<Vec<SpectralField>>,
    grid: Vec<Vec<GridField>>,
}

fn energy_bound(rec: &DiagnosticsRecord) -> f64 {
    let q = rec.balance_q;
    (0..rec.times.len())
        .map(|s| {
            rec.species
                .iter()
                .map(|sp| {
                    let j = rec.q_list.iter().position(|&x| x == q);
                    let power = j.map_or(0.0, |j| sp.lq_norms[j][s].powf(q));
                    power + sp.grad_energy[s]
                })
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

fn distance_at(reference: &Reference, idx: usize, state: &SimState, q: f64) -> f64 {
    if q == 2.0 {
        let sq: f64 = state
            .fields
            .iter()
            .zip(&reference.spectral[idx])
            .map(|(a, b)| a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>())
            .sum();
        sq.sqrt()
    } else {
        let diff: Vec<GridField> = state
            .grid_fields
            .iter()
            .zip(&reference.grid[idx])
            .map(|(a, b)| {
                let v = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
                GridField::new(a.grid(), v).expect("same grid")
            })
            .collect();
        lp_norm_vector(&diff, q).expect("valid exponent")
    }
}

fn h_minus_distance(reference: &Reference, idx: usize, state: &SimState, gamma: f64) -> f64 {
    state
        .fields
        .iter()
        .zip(&reference.spectral[idx])
        .map(|(a, b)| {
            let mut d = a.clone();
            d.axpy(-1.0, b);
            h_minus_norm(&d, gamma).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Distances of stochastic paths to the deterministic `nu`-enhanced solution,
/// one row per shell. Shell `i` uses seed `derive_seed(master_seed, i)`.
pub fn run_scaling_limit(plan: &ScalingLimitPlan, master_seed: u64) -> Result<ScalingTable> {
    plan.validate()?;
    let mut det = Solver::deterministic(plan.sys.clone(), plan.nu, plan.base.clone(), plan.grid)?;
    let mut reference = Reference { times: Vec::new(), spectral: Vec::new(), grid: Vec::new() };
    let (det_state, _) = det.run_with(&plan.v0, 0, |s| {
        reference.times.push(s.t);
        reference.spectral.push(s.fields.clone());
        reference.grid.push(s.grid_fields.clone());
    })?;
    if det_state.blown_up.is_some() {
        return Err(KrdError::InvalidConfig("deterministic reference blew up".into()));
    }

    let mut rows = Vec::with_capacity(plan.shells.len());
    for (si, &n) in plan.shells.iter().enumerate() {
        let cfg = SolverConfig { seed: derive_seed(master_seed, si as u64), ..plan.base.clone() };
        let (solver, theta_linf) = if plan.nu > 0.0 {
            let noise = NoiseModel::shell(plan.grid.dim(), n, plan.gamma, plan.nu)?;
            let linf = noise.spectrum().linf_norm();
            (Solver::stochastic(plan.sys.clone(), noise, cfg, plan.grid)?, linf)
        } else {
            (Solver::deterministic(plan.sys.clone(), 0.0, cfg, plan.grid)?, 0.0)
        };
        let outcomes: Vec<Result<(PathRecord, f64, f64)>> = (0..plan.paths as u64)
            .into_par_iter()
            .map(|path| {
                let mut solver = solver.clone();
                let mut norms = Vec::with_capacity(reference.times.len());
                let mut h_sup: f64 = 0.0;
                let (state, rec) = solver.run_with(&plan.v0, path, |s| {
                    let idx = norms.len();
                    norms.push(distance_at(&reference, idx, s, plan.q));
                    if let Some(g) = plan.h_minus_gamma {
                        h_sup = h_sup.max(h_minus_distance(&reference, idx, s, g));
                    }
                })?;
                let dist = match state.blown_up {
                    Some(_) => f64::INFINITY,
                    None => lr_time_norm(&reference.times, &norms, plan.r)?,
                };
                let record = PathRecord { path, tau: state.blown_up, survived: state.blown_up.is_none(), dist };
                Ok((record, energy_bound(&rec), h_sup))
            })
            .collect();
        let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
        let dists: Vec<f64> = outcomes.iter().map(|o| o.0.dist).collect();
        let (mean_dist, std_err) = mean_and_stderr(&dists);
        let h: Vec<f64> = outcomes.iter().map(|o| o.2).collect();
        rows.push(ScalingRow {
            n,
            theta_linf,
            mean_dist,
            std_err,
            p_exceed: dists.iter().filter(|&&d| d > plan.epsilon).count() as f64 / dists.len() as f64,
            energy_bound: outcomes.iter().map(|o| o.1).fold(0.0, f64::max),
            mean_h_minus: plan.h_minus_gamma.map(|_| mean_and_stderr(&h).0),
            paths: outcomes.into_iter().map(|o| o.0).collect(),
        });
    }
    Ok(ScalingTable { rows })
}

#[derive(Debug, Clone)]
pub struct SurvivalPlan {
    pub grid: TorusGrid,
    pub nus: Vec<f64>,
    pub shell: u32,
    pub gamma: f64,
    pub paths: usize,
    pub base: SolverConfig,
    pub sys: ReactionSystem,
    pub v0: Vec<GridField>,
    /// Data bound `||v0||_{L^q} <= N` as `(q, N)`.
    pub data_bound: Option<(f64, f64)>,
}

impl SurvivalPlan {
    pub fn validate(&self) -> Result<()> {
        if self.nus.is_empty() || self.paths == 0 {
            return Err(KrdError::InvalidConfig("need at least one nu and one path".into()));
        }
        if self.nus.iter().any(|nu| !(*nu >= 0.0)) {
            return Err(KrdError::InvalidConfig("nu values must be >= 0".into()));
        }
        check_nonneg(&self.v0)?;
        if let Some((q, n)) = self.data_bound {
            let norm = lp_norm_vector(&self.v0, q)?;
            if norm > n {
                return Err(KrdError::InvalidConfig(format!("||v0||_L{q} = {norm} exceeds N = {n}")));
            }
        }
        self.base.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRow {
    pub nu: f64,
    pub estimate: SurvivalEstimate,
    pub mean_tau: Option<f64>,
    pub paths: Vec<PathRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalTable {
    pub t_end: f64,
    pub rows: Vec<SurvivalRow>,
}

impl SurvivalTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("nu,survivors,paths,p_hat,wilson_lo,wilson_hi,mean_tau\n");
        for r in &self.rows {
            let e = r.estimate;
            let tau = r.mean_tau.map(|t| t.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{},{},{}", r.nu, e.survivors, e.total, e.p_hat, e.lower, e.upper, tau);
        }
        out
    }

    /// `p_hat` is nondecreasing along the `nu` sweep as given.
    pub fn monotone_in_nu(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].estimate.p_hat >= w[0].estimate.p_hat)
    }
}

/// Survival fraction `P(tau >= T)` per noise intensity. `nu = 0` runs the
/// deterministic system once and replicates it over all paths.
pub fn run_survival(plan: &SurvivalPlan, master_seed: u64) -> Result<SurvivalTable> {
    plan.validate()?;
    let mut rows = Vec::with_capacity(plan.nus.len());
    for (i, &nu) in plan.nus.iter().enumerate() {
        let cfg = SolverConfig { seed: derive_seed(master_seed, i as u64), ..plan.base.clone() };
        let records: Vec<PathRecord> = if nu == 0.0 {
            let mut det = Solver::deterministic(plan.sys.clone(), 0.0, cfg, plan.grid)?;
            let (state, _) = det.run(&plan.v0, 0)?;
            (0..plan.paths as u64)
                .map(|path| PathRecord { path, tau: state.blown_up, survived: state.blown_up.is_none(), dist: f64::NAN })
                .collect()
        } else {
            let noise = NoiseModel::shell(plan.grid.dim(), plan.shell, plan.gamma, nu)?;
            let solver = Solver::stochastic(plan.sys.clone(), noise, cfg, plan.grid)?;
            let out: Vec<Result<PathRecord>> = (0..plan.paths as u64)
                .into_par_iter()
                .map(|path| {
                    let mut s = solver.clone();
                    let (state, _) = s.run(&plan.v0, path)?;
                    Ok(PathRecord { path, tau: state.blown_up, survived: state.blown_up.is_none(), dist: f64::NAN })
                })
                .collect();
            out.into_iter().collect::<Result<_>>()?
        };
        let taus: Vec<Option<f64>> = records.iter().map(|r| r.tau).collect();
        let estimate = survival_estimate(&taus, plan.base.t_end)?;
        let blown: Vec<f64> = taus.iter().flatten().copied().collect();
        let mean_tau = (!blown.is_empty()).then(|| blown.iter().sum::<f64>() / blown.len() as f64);
        rows.push(SurvivalRow { nu, estimate, mean_tau, paths: records });
    }
    Ok(SurvivalTable { t_end: plan.base.t_end, rows })
}

#[derive(Debug, Clone)]
pub struct DecayPlan {
    pub grid: TorusGrid,
    pub sys: ReactionSystem,
    /// `(shell n, gamma, nu)`; `None` runs without noise.
    pub noise: Option<(u32, f64, f64)>,
    pub paths: usize,
    pub base: SolverConfig,
    pub v0: Vec<GridField>,
    /// Exponent of the fitted norm.
    pub q0: f64,
    /// Fraction of the horizon used for the fit, counted from the end.
    pub tail_fraction: f64,
    /// Also fit the decay of the expected Fourier coefficient at this mode (species 0).
    pub mode: Option<Wavevector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    /// Fitted rate of `E ||v(t)||_{L^{q0}}`; `None` when degenerate.
    pub norm_rate: Option<f64>,
    /// Fitted rate of the mean weighted mass.
    pub mass_rate: Option<f64>,
    pub mode_rate: Option<f64>,
    /// `|a_1|`, the rate guaranteed by the mass-control constants.
    pub bound_rate: f64,
    pub degenerate: bool,
    pub times: Vec<f64>,
    pub mean_norm: Vec<f64>,
    pub mean_mass: Vec<f64>,
}

impl DecayReport {
    pub fn to_csv(&self) -> String {
        let show = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_else(|| "degenerate".into());
        let mut out = String::from("quantity,value\n");
        let _ = writeln!(out, "norm_rate,{}", show(self.norm_rate));
        let _ = writeln!(out, "mass_rate,{}", show(self.mass_rate));
        let _ = writeln!(out, "mode_rate,{}", show(self.mode_rate));
        let _ = writeln!(out, "bound_rate,{}", self.bound_rate);
        let _ = writeln!(out, "degenerate,{}", self.degenerate);
        out
    }

    pub fn series_csv(&self) -> String {
        let mut out = String::from("t,mean_norm,mean_mass\n");
        for ((t, n), m) in self.times.iter().zip(&self.mean_norm).zip(&self.mean_mass) {
            let _ = writeln!(out, "{t},{n},{m}");
        }
        out
    }
}

fn tail_rate(times: &[f64], values: &[f64], tail: f64) -> Option<f64> {
    let t_end = *times.last()?;
    let start = t_end * (1.0 - tail);
    let (t, v): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= start)
        .map(|(t, v)| (*t, *v))
        .unzip();
    log_linear_rate(&t, &v)
}

/// Exponential decay in the regime `a_0 = 0`, `a_1 < 0`.
pub fn run_decay(plan: &DecayPlan, master_seed: u64) -> Result<DecayReport> {
    let (a0, a1) = plan.sys.mass_consts();
    if a0 != 0.0 || !(a1 < 0.0) {
        return Err(KrdError::InvalidConfig(format!("decay needs a0 = 0 and a1 < 0, got ({a0}, {a1})")));
    }
    if plan.paths == 0 || !(plan.tail_fraction > 0.0 && plan.tail_fraction <= 1.0) {
        return Err(KrdError::InvalidConfig("need paths >= 1 and tail_fraction in (0, 1]".into()));
    }
    let alpha = plan.sys.mass_alpha().map(<[f64]>::to_vec).unwrap_or_else(|| vec![1.0; plan.sys.species()]);
    let cfg = SolverConfig { seed: master_seed, ..plan.base.clone() };
    let (solver, paths) = match plan.noise {
        Some((n, gamma, nu)) => {
            let noise = NoiseModel::shell(plan.grid.dim(), n, gamma, nu)?;
            (Solver::stochastic(plan.sys.clone(), noise, cfg, plan.grid)?, plan.paths)
        }
        None => (Solver::deterministic(plan.sys.clone(), 0.0, cfg, plan.grid)?, 1),
    };
    type Series = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<Complex64>);
    let runs: Vec<Result<Series>> = (0..paths as u64)
        .into_par_iter()
        .map(|path| {
            let mut s = solver.clone();
            let (mut t, mut norm, mut mass, mut mode) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            s.run_with(&plan.v0, path, |st| {
                t.push(st.t);
                norm.push(lp_norm_vector(&st.grid_fields, plan.q0).unwrap_or(f64::NAN));
                mass.push(st.fields.iter().zip(&alpha).map(|(f, a)| a * f.mean()).sum());
                if let Some(k) = plan.mode {
                    mode.push(st.fields[0].coeff(&k));
                }
            })?;
            Ok((t, norm, mass, mode))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let times = runs[0].0.clone();
    if runs.iter().any(|r| r.0.len() != times.len()) {
        return Err(KrdError::InsufficientData("a path blew up during the decay run".into()));
    }
    let avg = |sel: &dyn Fn(&Series) -> &Vec<f64>| -> Vec<f64> {
        (0..times.len()).map(|i| runs.iter().map(|r| sel(r)[i]).sum::<f64>() / runs.len() as f64).collect()
    };
    let mean_norm = avg(&|r| &r.1);
    let mean_mass = avg(&|r| &r.2);
    let degenerate = mean_norm.iter().all(|&v| v == 0.0);
    let mode_rate = plan.mode.and_then(|_| {
        let mean_mode: Vec<f64> = (0..times.len())
            .map(|i| (runs.iter().map(|r| r.3[i]).sum::<Complex64>() / runs.len() as f64).norm())
            .collect();
        tail_rate(&times, &mean_mode, plan.tail_fraction)
    });
    Ok(DecayReport {
        norm_rate: if degenerate { None } else { tail_rate(&times, &mean_norm, plan.tail_fraction) },
        mass_rate: if degenerate { None } else { tail_rate(&times, &mean_mass, plan.tail_fraction) },
        mode_rate,
        bound_rate: a1.abs(),
        degenerate,
        times,
        mean_norm,
        mean_mass,
    })
}

/// Wilson interval half-width for `successes` out of `n`, used to size sweeps.
pub fn wilson_half_width(successes: usize, n: usize) -> f64 {
    let (lo, hi) = wilson_interval(successes, n);
    0.5 * (hi - lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reactions::Builtin;
    use crate::solver::cosine_mode;
    use std::f64::consts::PI;

    fn small_scaling(nu: f64) -> ScalingLimitPlan {
        let grid = TorusGrid::new(2, 24).unwrap();
        ScalingLimitPlan {
            grid,
            shells: vec![1, 2],
            gamma: 0.0,
            nu,
            paths: 4,
            base: SolverConfig { dt: 2e-3, t_end: 0.04, record_every: 2, ..Default::default() },
            sys: ReactionSystem::zero(vec![0.01]).unwrap(),
            v0: vec![cosine_mode(grid, [1, 0, 0], 0.5)],
            epsilon: 0.1,
            r: 2.0,
            q: 2.0,
            h_minus_gamma: Some(1.0),
        }
    }

    #[test]
    fn no_noise_means_no_distance() {
        let table = run_scaling_limit(&small_scaling(0.0), 1).unwrap();
        assert!(table.rows.iter().all(|r| r.mean_dist == 0.0 && r.p_exceed == 0.0));
    }

    #[test]
    fn scaling_is_reproducible_and_order_free() {
        let plan = small_scaling(0.1);
        let a = run_scaling_limit(&plan, 9).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_scaling_limit(&plan, 9).unwrap());
        assert_eq!(a, b);
        assert!(a.rows.iter().all(|r| r.mean_dist > 0.0 && r.mean_h_minus.is_some()));
        assert!(a.to_csv().starts_with("n,theta_linf,mean_dist"));
    }

    #[test]
    fn l4_distance_path() {
        let mut plan = small_scaling(0.1);
        plan.q = 4.0;
        plan.shells = vec![1];
        let t = run_scaling_limit(&plan, 2).unwrap();
        assert!(t.rows[0].mean_dist.is_finite() && t.rows[0].mean_dist > 0.0);
    }

    #[test]
    fn scaling_plan_validation() {
        let mut plan = small_scaling(0.1);
        plan.shells = vec![2, 1];
        assert!(run_scaling_limit(&plan, 0).is_err());
        plan.shells = vec![1, 8];
        assert!(matches!(run_scaling_limit(&plan, 0), Err(KrdError::UnderResolved { .. })));
    }

    #[test]
    fn logistic_always_survives_and_square_blows_up() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let base = SolverConfig { dt: 1e-3, t_end: 0.1, blowup_threshold: 1e6, record_every: 50, ..Default::default() };
        let mut plan = SurvivalPlan {
            grid,
            nus: vec![0.0, 0.05],
            shell: 1,
            gamma: 0.0,
            paths: 3,
            base: base.clone(),
            sys: ReactionSystem::builtin(Builtin::Logistic, vec![0.01]).unwrap(),
            v0: vec![GridField::constant(grid, 0.5)],
            data_bound: Some((4.0, 1.0)),
        };
        let table = run_survival(&plan, 4).unwrap();
        assert!(table.rows.iter().all(|r| r.estimate.p_hat == 1.0 && r.mean_tau.is_none()));
        assert!(table.monotone_in_nu());

        plan.sys = ReactionSystem::builtin(Builtin::Square, vec![0.0]).unwrap();
        plan.v0 = vec![GridField::constant(grid, 4.0)];
        plan.nus = vec![0.0];
        plan.data_bound = None;
        plan.base = SolverConfig { t_end: 1.0, ..base };
        let table = run_survival(&plan, 4).unwrap();
        let row = &table.rows[0];
        assert_eq!(row.estimate.p_hat, 0.0);
        assert!((row.mean_tau.unwrap() - 0.25).abs() < 0.2 * 0.25);
        assert!(paths_csv(&row.paths).starts_with("path,tau,survived,dist_LrLq\n0,"));
    }

    #[test]
    fn survival_rejects_negative_data() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let plan = SurvivalPlan {
            grid,
            nus: vec![0.0],
            shell: 1,
            gamma: 0.0,
            paths: 1,
            base: SolverConfig { dt: 1e-2, t_end: 0.1, ..Default::default() },
            sys: ReactionSystem::builtin(Builtin::Logistic, vec![0.01]).unwrap(),
            v0: vec![GridField::constant(grid, -0.5)],
            data_bound: None,
        };
        assert!(run_survival(&plan, 0).is_err());
    }

    fn decay_plan(v0: GridField, noise: Option<(u32, f64, f64)>) -> DecayPlan {
        let grid = v0.grid();
        DecayPlan {
            grid,
            sys: ReactionSystem::builtin(Builtin::Decay, vec![0.0]).unwrap(),
            noise,
            paths: 4,
            base: SolverConfig { dt: 1e-3, t_end: 1.0, record_every: 20, ..Default::default() },
            v0: vec![v0],
            q0: 4.0,
            tail_fraction: 0.5,
            mode: Some([1, 0, 0]),
        }
    }

    #[test]
    fn pure_decay_rate() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let report = run_decay(&decay_plan(GridField::constant(grid, 1.0), None), 0).unwrap();
        assert!((report.norm_rate.unwrap() - 1.0).abs() < 0.02);
        assert!((report.mass_rate.unwrap() - 1.0).abs() < 0.02);
        assert_eq!(report.bound_rate, 1.0);
        let zero = run_decay(&decay_plan(GridField::zeros(grid), None), 0).unwrap();
        assert!(zero.degenerate && zero.norm_rate.is_none());
        assert!(zero.to_csv().contains("norm_rate,degenerate"));
    }

    #[test]
    fn decay_mode_rate_with_noise() {
        let grid = TorusGrid::new(2, 24).unwrap();
        let (nu_i, nu) = (0.0, 0.05);
        let mut plan = decay_plan(cosine_mode(grid, [1, 0, 0], 0.5), Some((1, 0.0, nu)));
        plan.sys = ReactionSystem::builtin(Builtin::Decay, vec![nu_i]).unwrap();
        plan.paths = 32;
        plan.base.t_end = 0.2;
        plan.base.record_every = 10;
        let report = run_decay(&plan, 3).unwrap();
        let expected = 4.0 * PI * PI * (nu_i + nu) + 1.0;
        assert!((report.mode_rate.unwrap() / expected - 1.0).abs() < 0.1, "{:?}", report.mode_rate);
    }

    #[test]
    fn decay_requires_negative_a1() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let mut plan = decay_plan(GridField::constant(grid, 1.0), None);
        plan.sys = ReactionSystem::builtin(Builtin::Logistic, vec![0.0]).unwrap();
        assert!(run_decay(&plan, 0).is_err());
    }
}

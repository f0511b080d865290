//! Time integration of the transport-noise reaction-diffusion system.
//!
//! The primary scheme is Itô Euler-Maruyama with an exact exponential
//! propagator for the diffusion: per step
//!
//! ```text
//! v+ = E(dt) [ v + dt phi (div F + f)(v) + sqrt(c_d nu) sum theta (sigma . grad) v dW ],
//! E(dt) = exp(-4 pi^2 |k|^2 (nu_i + nu) dt),
//! ```
//!
//! where the extra `nu` is the Itô correction of the Stratonovich noise. The
//! `strat_substep` scheme instead integrates the frozen-increment transport
//! ODE with classical RK4 substeps and propagates with `nu_i` alone.

use num_complex::Complex64;

use crate::diagnostics::{DiagnosticsRecord, Recorder};
use crate::error::{KrdError, Result};
use crate::noise::{sample_increments, NoiseModel, TransportOperator};
use crate::reactions::{evaluate_reaction, flux_divergence_with, ReactionSystem};
use crate::rng::step_rng;
use crate::torus_field::{
    laplacian_multiplier, lp_norm_vector, max_kept_wavenumber, DealiasMask, FftPlan, GridField,
    SpectralField, TorusGrid, TWO_THIRDS,
};

/// Smooth cut-off profile: 1 on `[0, 1]`, 0 on `[2, inf)`, quintic smoothstep between.
pub fn phi_bump(x: f64) -> f64 {
    if x <= 1.0 {
        1.0
    } else if x >= 2.0 {
        0.0
    } else {
        let s = x - 1.0;
        1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    EulerMaruyamaIto,
    StratSubstep,
}

impl Scheme {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "euler_maruyama_ito" => Some(Self::EulerMaruyamaIto),
            "strat_substep" => Some(Self::StratSubstep),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::EulerMaruyamaIto => "euler_maruyama_ito",
            Self::StratSubstep => "strat_substep",
        }
    }
}

/// Cut-off `phi(R^{-1} ||v||_{L^r(0,t; L^q)})` parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffParams {
    pub level: f64,
    pub r: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub noise_on: bool,
    pub cutoff: Option<CutoffParams>,
    pub blowup_threshold: f64,
    pub blowup_q0: f64,
    pub seed: u64,
    pub dealias: bool,
    pub record_every: usize,
    pub require_nonneg: bool,
    /// Step guard `dt <= cfl / (nu max|k_noise| n)`.
    pub cfl: f64,
    /// Exponents for the recorded `L^q` norms.
    pub diag_q: Vec<f64>,
    /// Exponent of the energy balance residual.
    pub balance_q: f64,
    /// Bound on `2 pi k_max |u|_inf h` for each RK4 transport substep.
    pub substep_courant: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 1.0,
            scheme: Scheme::EulerMaruyamaIto,
            noise_on: true,
            cutoff: None,
            blowup_threshold: 1e8,
            blowup_q0: 4.0,
            seed: 0,
            dealias: true,
            record_every: 1,
            require_nonneg: false,
            cfl: 0.5,
            diag_q: vec![2.0],
            balance_q: 2.0,
            substep_courant: 0.12,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(KrdError::InvalidConfig(msg));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return bad(format!("T = {} must be finite and >= 0", self.t_end));
        }
        let steps = (self.t_end / self.dt).round();
        if (steps * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(self.dt) {
            return bad(format!("T = {} is not a multiple of dt = {}", self.t_end, self.dt));
        }
        if !(self.blowup_q0 > 2.0) {
            return bad(format!("blow-up exponent q0 = {} must exceed 2", self.blowup_q0));
        }
        if !(self.blowup_threshold > 0.0) {
            return bad("blow-up threshold must be positive".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be >= 1".into());
        }
        if !(self.cfl > 0.0) || !(self.substep_courant > 0.0) {
            return bad("cfl and substep_courant must be positive".into());
        }
        if let Some(c) = self.cutoff {
            if !(c.level > 0.0) || !(c.r > 1.0) || !(c.q >= 1.0) {
                return bad(format!("cut-off needs R > 0, r > 1, q >= 1; got {c:?}"));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }
}

/// State of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub step: u64,
    pub path: u64,
    pub fields: Vec<SpectralField>,
    pub grid_fields: Vec<GridField>,
    /// `A(t) = int_0^t ||v||^r_{L^q} ds`.
    pub cutoff_acc: f64,
    cutoff_last: f64,
    /// Cut-off value that applies to the next step.
    pub phi: f64,
    pub blown_up: Option<f64>,
}

#[derive(Debug, Clone)]
struct NoisePart {
    model: NoiseModel,
    op: TransportOperator,
}

/// Stepper bound to one system, grid and configuration. Reusable across paths.
#[derive(Debug, Clone)]
pub struct Solver {
    sys: ReactionSystem,
    cfg: SolverConfig,
    grid: TorusGrid,
    plan: FftPlan,
    mask: DealiasMask,
    noise: Option<NoisePart>,
    propagator: Vec<Vec<f64>>,
    balance_nu: Vec<f64>,
    k_eff: f64,
}

impl Solver {
    /// Stochastic system with Kraichnan transport `noise`.
    pub fn stochastic(sys: ReactionSystem, noise: NoiseModel, cfg: SolverConfig, grid: TorusGrid) -> Result<Self> {
        cfg.validate()?;
        if noise.dim() != grid.dim() {
            return Err(KrdError::GridMismatch(format!("noise in d = {} on grid d = {}", noise.dim(), grid.dim())));
        }
        let rule = if cfg.dealias { TWO_THIRDS } else { 1.0 };
        let op = TransportOperator::new(&noise, grid, rule)?;
        if cfg.noise_on {
            let max_k = noise.spectrum().max_component() as f64;
            let limit = cfg.cfl / (noise.nu() * max_k * grid.n() as f64);
            if cfg.dt > limit {
                return Err(KrdError::InvalidConfig(format!("dt = {} exceeds the noise step guard {limit:e}", cfg.dt)));
            }
        }
        let nu = noise.nu();
        let (extra, balance_extra) = match (cfg.scheme, cfg.noise_on) {
            (Scheme::EulerMaruyamaIto, true) => (nu, 0.0),
            (Scheme::EulerMaruyamaIto, false) => (nu, nu),
            (Scheme::StratSubstep, _) => (0.0, 0.0),
        };
        Self::build(sys, cfg, grid, Some(NoisePart { model: noise, op }), extra, balance_extra)
    }

    /// Deterministic system with diffusivities `nu_i + enhancement`.
    pub fn deterministic(sys: ReactionSystem, enhancement: f64, cfg: SolverConfig, grid: TorusGrid) -> Result<Self> {
        cfg.validate()?;
        if !(enhancement >= 0.0) {
            return Err(KrdError::InvalidConfig(format!("enhancement {enhancement} must be >= 0")));
        }
        Self::build(sys, cfg, grid, None, enhancement, enhancement)
    }

    fn build(
        sys: ReactionSystem,
        cfg: SolverConfig,
        grid: TorusGrid,
        noise: Option<NoisePart>,
        extra: f64,
        balance_extra: f64,
    ) -> Result<Self> {
        let rule = if cfg.dealias { TWO_THIRDS } else { 1.0 };
        let propagator = sys
            .diffusivities()
            .iter()
            .map(|nu_i| {
                (0..grid.len())
                    .map(|i| (laplacian_multiplier(&grid.wavevector(i)[..grid.dim()]) * (nu_i + extra) * cfg.dt).exp())
                    .collect()
            })
            .collect();
        let balance_nu = sys.diffusivities().iter().map(|nu_i| nu_i + balance_extra).collect();
        let k_eff = max_kept_wavenumber(grid.n(), rule) as f64 * (grid.dim() as f64).sqrt();
        Ok(Self {
            sys,
            cfg,
            grid,
            plan: FftPlan::new(grid),
            mask: DealiasMask::new(grid, rule),
            noise,
            propagator,
            balance_nu,
            k_eff,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn system(&self) -> &ReactionSystem {
        &self.sys
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    /// Diffusivities used by the energy balance residual.
    pub fn balance_diffusivities(&self) -> &[f64] {
        &self.balance_nu
    }

    fn cutoff_norm(&self, fields: &[GridField]) -> Result<f64> {
        match self.cfg.cutoff {
            Some(c) => Ok(lp_norm_vector(fields, c.q)?.powf(c.r)),
            None => Ok(0.0),
        }
    }

    fn phi_of(&self, acc: f64) -> f64 {
        match self.cfg.cutoff {
            Some(c) => phi_bump(acc.powf(1.0 / c.r) / c.level),
            None => 1.0,
        }
    }

    pub fn initial_state(&mut self, v0: &[GridField], path: u64) -> Result<SimState> {
        if v0.len() != self.sys.species() {
            return Err(KrdError::GridMismatch(format!(
                "{} initial fields for {} species",
                v0.len(),
                self.sys.species()
            )));
        }
        for f in v0 {
            if f.grid() != self.grid {
                return Err(KrdError::GridMismatch("initial data on a different grid".into()));
            }
            f.check_finite()?;
            if self.cfg.require_nonneg && f.min() < 0.0 {
                return Err(KrdError::InvalidConfig("initial data must be nonnegative".into()));
            }
        }
        let fields = v0.iter().map(|f| self.plan.to_spectral(f)).collect::<Result<Vec<_>>>()?;
        let blown_up = (lp_norm_vector(v0, self.cfg.blowup_q0)? >= self.cfg.blowup_threshold).then_some(0.0);
        Ok(SimState {
            t: 0.0,
            step: 0,
            path,
            fields,
            grid_fields: v0.to_vec(),
            cutoff_acc: 0.0,
            cutoff_last: self.cutoff_norm(v0)?,
            phi: 1.0,
            blown_up,
        })
    }

    fn drift(&mut self, t: f64, fields: &[GridField]) -> Result<Vec<SpectralField>> {
        let mut out = if self.sys.has_flux() {
            flux_divergence_with(&self.sys, t, fields, &mut self.plan, &self.mask)?
        } else {
            vec![SpectralField::zeros(self.grid); fields.len()]
        };
        if self.sys.has_reaction() {
            for (acc, f) in out.iter_mut().zip(evaluate_reaction(&self.sys, t, fields)?) {
                let mut c = self.plan.to_spectral_unchecked(&f);
                self.mask.apply(&mut c);
                acc.axpy(1.0, &c);
            }
        }
        Ok(out)
    }

    /// Advances `state` by one step. A blown-up state is left unchanged.
    pub fn step(&mut self, state: &mut SimState) -> Result<()> {
        if state.blown_up.is_some() {
            return Ok(());
        }
        let dt = self.cfg.dt;
        let phi = self.phi_of(state.cutoff_acc);
        let mut next = state.fields.clone();

        if phi != 0.0 && (self.sys.has_reaction() || self.sys.has_flux()) {
            match self.drift(state.t, &state.grid_fields) {
                Ok(drift) => {
                    for (v, r) in next.iter_mut().zip(&drift) {
                        v.axpy(dt * phi, r);
                    }
                }
                Err(KrdError::NonFinite { .. }) => {
                    state.blown_up = Some(state.t + dt);
                    return Ok(());
                }
                Err(e) => return Err(e),
            }
        }

        if self.cfg.noise_on {
            if let Some(noise) = self.noise.as_mut() {
                let mut rng = step_rng(self.cfg.seed, state.path, state.step);
                let inc = sample_increments(&noise.model, dt, &mut rng);
                match self.cfg.scheme {
                    Scheme::EulerMaruyamaIto => {
                        let u = noise.op.velocity(&noise.model, &inc, 1.0);
                        for (v, old) in next.iter_mut().zip(&state.fields) {
                            v.axpy(1.0, &noise.op.advect(&u, old));
                        }
                    }
                    Scheme::StratSubstep => {
                        let u = noise.op.velocity(&noise.model, &inc, 1.0 / dt);
                        let umax = (0..self.grid.len())
                            .map(|i| u.iter().map(|c| c.values()[i].powi(2)).sum::<f64>())
                            .fold(0.0, f64::max)
                            .sqrt();
                        let y = 2.0 * std::f64::consts::PI * self.k_eff * umax * dt;
                        let m = ((y / self.cfg.substep_courant).ceil() as usize).max(1);
                        let h = dt / m as f64;
                        for v in next.iter_mut() {
                            for _ in 0..m {
                                rk4_transport(&mut noise.op, &u, v, h);
                            }
                        }
                    }
                }
            }
        }

        for (v, e) in next.iter_mut().zip(&self.propagator) {
            for (c, m) in v.coeffs_mut().iter_mut().zip(e) {
                *c *= m;
            }
        }

        let grid_fields: Vec<GridField> = next.iter().map(|c| self.plan.to_grid_unchecked(c)).collect();
        let t_next = (state.step + 1) as f64 * dt;
        if grid_fields.iter().any(|f| f.check_finite().is_err())
            || lp_norm_vector(&grid_fields, self.cfg.blowup_q0)? >= self.cfg.blowup_threshold
        {
            state.blown_up = Some(t_next);
            return Ok(());
        }
        let norm = self.cutoff_norm(&grid_fields)?;
        state.cutoff_acc += 0.5 * dt * (state.cutoff_last + norm);
        state.cutoff_last = norm;
        state.phi = self.phi_of(state.cutoff_acc);
        state.fields = next;
        state.grid_fields = grid_fields;
        state.step += 1;
        state.t = t_next;
        Ok(())
    }

    /// Steps until `T` or blow-up, sampling diagnostics and `observer` at step 0,
    /// every `record_every` steps and at the final step.
    pub fn run_with(
        &mut self,
        v0: &[GridField],
        path: u64,
        mut observer: impl FnMut(&SimState),
    ) -> Result<(SimState, DiagnosticsRecord)> {
        let mut state = self.initial_state(v0, path)?;
        let rule = if self.cfg.dealias { TWO_THIRDS } else { 1.0 };
        let mut rec = Recorder::new(self.grid, self.cfg.diag_q.clone(), self.cfg.balance_q, self.balance_nu.clone(), rule)?;
        let steps = self.cfg.steps();
        if state.blown_up.is_none() {
            rec.sample(&self.sys, 0.0, &state.grid_fields, &state.fields, state.phi, 0.0)?;
            observer(&state);
        }
        while state.step < steps && state.blown_up.is_none() {
            self.step(&mut state)?;
            if state.blown_up.is_some() {
                break;
            }
            if state.step % self.cfg.record_every as u64 == 0 || state.step == steps {
                rec.sample(&self.sys, state.t, &state.grid_fields, &state.fields, state.phi, state.cutoff_acc)?;
                observer(&state);
            }
        }
        let tau = state.blown_up;
        Ok((state, rec.finish(tau)))
    }

    pub fn run(&mut self, v0: &[GridField], path: u64) -> Result<(SimState, DiagnosticsRecord)> {
        self.run_with(v0, path, |_| {})
    }
}

fn rk4_transport(op: &mut TransportOperator, u: &[GridField], v: &mut SpectralField, h: f64) {
    let k1 = op.advect(u, v);
    let mut w = v.clone();
    w.axpy(0.5 * h, &k1);
    let k2 = op.advect(u, &w);
    w.clone_from(v);
    w.axpy(0.5 * h, &k2);
    let k3 = op.advect(u, &w);
    w.clone_from(v);
    w.axpy(h, &k3);
    let k4 = op.advect(u, &w);
    for (((c, a), b), (e, f)) in v
        .coeffs_mut()
        .iter_mut()
        .zip(k1.coeffs())
        .zip(k2.coeffs())
        .zip(k3.coeffs().iter().zip(k4.coeffs()))
    {
        *c += (h / 6.0) * (a + 2.0 * b + 2.0 * e + f);
    }
}

/// Single-mode field `2 amplitude cos(2 pi k.x)` as grid values.
pub fn cosine_mode(grid: TorusGrid, k: [i64; 3], amplitude: f64) -> GridField {
    let mut c = SpectralField::zeros(grid);
    c.set_mode_pair(&k, Complex64::new(amplitude, 0.0)).expect("mode on grid");
    FftPlan::new(grid).to_grid_unchecked(&c)
}

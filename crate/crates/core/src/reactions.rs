//! Reaction nonlinearities `f_i` and conservative fluxes `F_i`.
//!
//! Evaluators are pure functions of `(t, x, y)`; the structural hypotheses
//! (polynomial growth, positivity at `y_i = 0`, mass control) are checked by
//! sampling rather than assumed.

use num_complex::Complex64;

use crate::error::{KrdError, Result};
use crate::torus_field::{
    differentiate_in_place, DealiasMask, FftPlan, GridField, SpectralField, TorusGrid,
};

/// Growth-exponent floor for reactions whose stoichiometric sums are at most 1.
pub const GROWTH_GUARD: f64 = 1e-6;

/// `q_1 V_1 + ... + q_l V_l  <=>  p_1 V_1 + ... + p_l V_l` with rates `R_+`, `R_-`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassActionSpec {
    pub q: Vec<u32>,
    pub p: Vec<u32>,
    pub r_plus: f64,
    pub r_minus: f64,
}

impl MassActionSpec {
    pub fn new(q: Vec<u32>, p: Vec<u32>, r_plus: f64, r_minus: f64) -> Result<Self> {
        if q.len() != p.len() || q.is_empty() {
            return Err(KrdError::InvalidReaction(format!(
                "stoichiometry lengths {} and {} must match and be nonzero",
                q.len(),
                p.len()
            )));
        }
        if q.iter().chain(&p).all(|&c| c == 0) {
            return Err(KrdError::InvalidReaction("all stoichiometric coefficients are zero".into()));
        }
        if !(r_plus > 0.0 && r_minus > 0.0) || !r_plus.is_finite() || !r_minus.is_finite() {
            return Err(KrdError::InvalidReaction("reaction rates must be positive".into()));
        }
        Ok(Self { q, p, r_plus, r_minus })
    }

    pub fn species(&self) -> usize {
        self.q.len()
    }

    /// `max(sum q, sum p)`, raised to `1 + 1e-6` when both sums are at most 1.
    pub fn growth_exponent(&self) -> f64 {
        let sq: u32 = self.q.iter().sum();
        let sp: u32 = self.p.iter().sum();
        (sq.max(sp) as f64).max(1.0 + GROWTH_GUARD)
    }

    fn rate_difference(&self, y: &[f64]) -> f64 {
        let prod = |c: &[u32]| c.iter().zip(y).map(|(&e, &v)| v.powi(e as i32)).product::<f64>();
        self.r_minus * prod(&self.q) - self.r_plus * prod(&self.p)
    }
}

/// Strictly positive `alpha` with `sum alpha_i (q_i - p_i) = 0`, normalized to
/// `min alpha_i = 1`, or `None` when no positive solution exists.
///
/// The constraint is a single linear form `c . alpha = 0`. It has a positive
/// solution iff `c` vanishes or has entries of both signs; in the latter case
/// weighting positive entries by the total negative mass and vice versa balances it.
pub fn find_mass_weights(spec: &MassActionSpec) -> Option<Vec<f64>> {
    let c: Vec<f64> = spec.q.iter().zip(&spec.p).map(|(&q, &p)| q as f64 - p as f64).collect();
    let pos: f64 = c.iter().filter(|&&x| x > 0.0).sum();
    let neg: f64 = -c.iter().filter(|&&x| x < 0.0).sum::<f64>();
    if pos == 0.0 && neg == 0.0 {
        return Some(vec![1.0; c.len()]);
    }
    if pos == 0.0 || neg == 0.0 {
        return None;
    }
    let mut alpha: Vec<f64> = c
        .iter()
        .map(|&x| if x > 0.0 { neg } else if x < 0.0 { pos } else { f64::NAN })
        .collect();
    let min = alpha.iter().copied().filter(|a| !a.is_nan()).fold(f64::INFINITY, f64::min);
    for a in alpha.iter_mut() {
        *a = if a.is_nan() { 1.0 } else { *a / min };
    }
    Some(alpha)
}

/// Named nonlinearities that are not plain mass-action kinetics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    /// `f_i = -y_i`
    Decay,
    /// `f_i = y_i - y_i^2`
    Logistic,
    /// `f_i = y_i^2`; violates mass control, used to calibrate the blow-up detector.
    Square,
    /// `F_i = y_i e_1`, `f = 0`
    LinearFlux,
    /// `F_i = (y_i^2 / 2) e_1`, `f = 0`
    BurgersFlux,
}

impl Builtin {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "decay" => Self::Decay,
            "logistic" => Self::Logistic,
            "square" => Self::Square,
            "linear_flux" => Self::LinearFlux,
            "burgers_flux" => Self::BurgersFlux,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Decay => "decay",
            Self::Logistic => "logistic",
            Self::Square => "square",
            Self::LinearFlux => "linear_flux",
            Self::BurgersFlux => "burgers_flux",
        }
    }

    pub fn growth_exponent(&self) -> f64 {
        match self {
            Self::Decay | Self::Logistic | Self::Square | Self::LinearFlux => 2.0,
            Self::BurgersFlux => 3.0,
        }
    }

    /// Whether this built-in violates the mass-control hypothesis.
    pub fn is_unsafe(&self) -> bool {
        matches!(self, Self::Square)
    }
}

/// Mass-action system with `q_1 = p_2 = 1`, `q_2 = p_1 = 2`.
pub fn cubic_nontriangular(r_plus: f64, r_minus: f64) -> Result<MassActionSpec> {
    MassActionSpec::new(vec![1, 2], vec![2, 1], r_plus, r_minus)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReactionKind {
    Zero,
    MassAction(MassActionSpec),
    Builtin(Builtin),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionSystem {
    ell: usize,
    nu: Vec<f64>,
    h: f64,
    kind: ReactionKind,
    mass_alpha: Option<Vec<f64>>,
    mass_consts: (f64, f64),
}

fn check_diffusivities(nu: &[f64]) -> Result<()> {
    if nu.is_empty() {
        return Err(KrdError::InvalidReaction("at least one species required".into()));
    }
    if nu.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(KrdError::InvalidReaction("diffusivities must be finite and >= 0".into()));
    }
    Ok(())
}

impl ReactionSystem {
    /// `f = F = 0`: pure (stochastic) heat equation per species.
    pub fn zero(nu: Vec<f64>) -> Result<Self> {
        check_diffusivities(&nu)?;
        let ell = nu.len();
        Ok(Self {
            ell,
            nu,
            h: 1.0 + GROWTH_GUARD,
            kind: ReactionKind::Zero,
            mass_alpha: Some(vec![1.0; ell]),
            mass_consts: (0.0, 0.0),
        })
    }

    /// Mass-action kinetics; conservation weights are attached when they exist,
    /// with `(a_0, a_1) = (0, 0)`.
    pub fn mass_action(spec: MassActionSpec, nu: Vec<f64>) -> Result<Self> {
        check_diffusivities(&nu)?;
        if nu.len() != spec.species() {
            return Err(KrdError::InvalidReaction(format!(
                "{} diffusivities for {} species",
                nu.len(),
                spec.species()
            )));
        }
        Ok(Self {
            ell: spec.species(),
            nu,
            h: spec.growth_exponent(),
            mass_alpha: find_mass_weights(&spec),
            mass_consts: (0.0, 0.0),
            kind: ReactionKind::MassAction(spec),
        })
    }

    /// Built-in nonlinearity applied componentwise to `nu.len()` species.
    /// Default mass control: decay `(0, -1)`, logistic `(0, 1)`, fluxes `(0, 0)`;
    /// the square test mode carries none.
    pub fn builtin(which: Builtin, nu: Vec<f64>) -> Result<Self> {
        check_diffusivities(&nu)?;
        let ell = nu.len();
        let (alpha, consts) = match which {
            Builtin::Decay => (Some(vec![1.0; ell]), (0.0, -1.0)),
            Builtin::Logistic => (Some(vec![1.0; ell]), (0.0, 1.0)),
            Builtin::LinearFlux | Builtin::BurgersFlux => (Some(vec![1.0; ell]), (0.0, 0.0)),
            Builtin::Square => (None, (0.0, 0.0)),
        };
        Ok(Self {
            ell,
            nu,
            h: which.growth_exponent(),
            kind: ReactionKind::Builtin(which),
            mass_alpha: alpha,
            mass_consts: consts,
        })
    }

    /// Declares mass-control weights and constants `(a_0, a_1)`.
    pub fn with_mass_control(mut self, alpha: Vec<f64>, a0: f64, a1: f64) -> Result<Self> {
        if alpha.len() != self.ell || alpha.iter().any(|a| !(*a > 0.0)) {
            return Err(KrdError::InvalidReaction("mass weights must be positive, one per species".into()));
        }
        self.mass_alpha = Some(alpha);
        self.mass_consts = (a0, a1);
        Ok(self)
    }

    pub fn with_mass_consts(mut self, a0: f64, a1: f64) -> Self {
        self.mass_consts = (a0, a1);
        self
    }

    pub fn species(&self) -> usize {
        self.ell
    }

    pub fn diffusivities(&self) -> &[f64] {
        &self.nu
    }

    pub fn growth_exponent(&self) -> f64 {
        self.h
    }

    pub fn kind(&self) -> &ReactionKind {
        &self.kind
    }

    pub fn mass_alpha(&self) -> Option<&[f64]> {
        self.mass_alpha.as_deref()
    }

    pub fn mass_consts(&self) -> (f64, f64) {
        self.mass_consts
    }

    pub fn has_reaction(&self) -> bool {
        match &self.kind {
            ReactionKind::Zero => false,
            ReactionKind::MassAction(_) => true,
            ReactionKind::Builtin(b) => !matches!(b, Builtin::LinearFlux | Builtin::BurgersFlux),
        }
    }

    pub fn has_flux(&self) -> bool {
        matches!(self.kind, ReactionKind::Builtin(Builtin::LinearFlux | Builtin::BurgersFlux))
    }

    pub fn is_unsafe(&self) -> bool {
        matches!(self.kind, ReactionKind::Builtin(b) if b.is_unsafe())
    }

    /// `out[i] = f_i(t, x, y)`.
    pub fn eval_f(&self, _t: f64, _x: &[f64], y: &[f64], out: &mut [f64]) {
        match &self.kind {
            ReactionKind::Zero => out.fill(0.0),
            ReactionKind::MassAction(spec) => {
                let r = spec.rate_difference(y);
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (spec.p[i] as f64 - spec.q[i] as f64) * r;
                }
            }
            ReactionKind::Builtin(b) => {
                for (o, &v) in out.iter_mut().zip(y) {
                    *o = match b {
                        Builtin::Decay => -v,
                        Builtin::Logistic => v - v * v,
                        Builtin::Square => v * v,
                        Builtin::LinearFlux | Builtin::BurgersFlux => 0.0,
                    };
                }
            }
        }
    }

    /// `out[i * d + j] = F_i(t, x, y)_j` for `d = x.len()`.
    pub fn eval_flux(&self, _t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        let d = x.len();
        out.fill(0.0);
        if let ReactionKind::Builtin(b) = self.kind {
            for (i, &v) in y.iter().enumerate() {
                out[i * d] = match b {
                    Builtin::LinearFlux => v,
                    Builtin::BurgersFlux => 0.5 * v * v,
                    _ => 0.0,
                };
            }
        }
    }
}

fn check_fields(sys: &ReactionSystem, fields: &[GridField]) -> Result<TorusGrid> {
    if fields.len() != sys.species() {
        return Err(KrdError::GridMismatch(format!(
            "{} fields for {} species",
            fields.len(),
            sys.species()
        )));
    }
    let grid = fields[0].grid();
    if fields.iter().any(|f| f.grid() != grid) {
        return Err(KrdError::GridMismatch("species fields on different grids".into()));
    }
    Ok(grid)
}

/// Pointwise `f_i(t, x, v(x))` at every node. Non-finite output is reported as
/// [`KrdError::NonFinite`], which the solver treats as a blow-up signal.
pub fn evaluate_reaction(sys: &ReactionSystem, t: f64, fields: &[GridField]) -> Result<Vec<GridField>> {
    let grid = check_fields(sys, fields)?;
    let ell = sys.species();
    let mut out: Vec<Vec<f64>> = vec![vec![0.0; grid.len()]; ell];
    let mut y = vec![0.0; ell];
    let mut f = vec![0.0; ell];
    for node in 0..grid.len() {
        for (yi, field) in y.iter_mut().zip(fields) {
            *yi = field.values()[node];
        }
        let x = grid.node(node);
        sys.eval_f(t, &x[..grid.dim()], &y, &mut f);
        for (i, &fi) in f.iter().enumerate() {
            if !fi.is_finite() {
                return Err(KrdError::NonFinite { index: node });
            }
            out[i][node] = fi;
        }
    }
    out.into_iter().map(|v| GridField::new(grid, v)).collect()
}

/// Spectral `div F_i(t, x, v)`, dealiased by `mask`. The zero mode is exactly 0.
pub fn flux_divergence_with(
    sys: &ReactionSystem,
    t: f64,
    fields: &[GridField],
    plan: &mut FftPlan,
    mask: &DealiasMask,
) -> Result<Vec<SpectralField>> {
    let grid = check_fields(sys, fields)?;
    let (ell, d) = (sys.species(), grid.dim());
    if !sys.has_flux() {
        return Ok(vec![SpectralField::zeros(grid); ell]);
    }
    let mut comps: Vec<Vec<f64>> = vec![vec![0.0; grid.len()]; ell * d];
    let mut y = vec![0.0; ell];
    let mut flux = vec![0.0; ell * d];
    for node in 0..grid.len() {
        for (yi, field) in y.iter_mut().zip(fields) {
            *yi = field.values()[node];
        }
        let x = grid.node(node);
        sys.eval_flux(t, &x[..d], &y, &mut flux);
        for (c, &v) in flux.iter().enumerate() {
            if !v.is_finite() {
                return Err(KrdError::NonFinite { index: node });
            }
            comps[c][node] = v;
        }
    }
    let mut out = Vec::with_capacity(ell);
    for i in 0..ell {
        let mut acc = SpectralField::zeros(grid);
        for j in 0..d {
            let values = std::mem::take(&mut comps[i * d + j]);
            let mut c = plan.to_spectral_unchecked(&GridField::new(grid, values)?);
            differentiate_in_place(&mut c, j);
            acc.axpy(1.0, &c);
        }
        mask.apply(&mut acc);
        acc.coeffs_mut()[0] = Complex64::new(0.0, 0.0);
        out.push(acc);
    }
    Ok(out)
}

/// [`flux_divergence_with`] using a fresh plan and the two-thirds rule.
pub fn evaluate_flux_divergence(
    sys: &ReactionSystem,
    t: f64,
    fields: &[GridField],
) -> Result<Vec<SpectralField>> {
    let grid = check_fields(sys, fields)?;
    let mut plan = FftPlan::new(grid);
    let mask = DealiasMask::new(grid, crate::torus_field::TWO_THIRDS);
    flux_divergence_with(sys, t, fields, &mut plan, &mask)
}

/// Scrambled Sobol points in `[0, radius]^ell`, the first one at the origin.
fn sobol_points(ell: usize, samples: usize, radius: f64) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; ell]];
    for i in 0..samples.saturating_sub(1) {
        pts.push(
            (0..ell)
                .map(|j| radius * sobol_burley::sample(i as u32, j as u32, 0x5eed) as f64)
                .collect(),
        );
    }
    pts
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassControlReport {
    pub holds: bool,
    /// `max (sum alpha_i f_i - a_0 - a_1 sum y_i)` over the samples.
    pub worst_violation: f64,
}

/// Samples `sum alpha_i f_i(y) <= a_0 + a_1 sum y_i` over `y in [0, radius]^l`.
pub fn check_mass_control(sys: &ReactionSystem, samples: usize, radius: f64) -> Result<MassControlReport> {
    let alpha = sys
        .mass_alpha()
        .ok_or_else(|| KrdError::InvalidReaction("no mass weights declared".into()))?;
    let (a0, a1) = sys.mass_consts();
    let ell = sys.species();
    let mut f = vec![0.0; ell];
    let mut worst = f64::NEG_INFINITY;
    let mut scale: f64 = 1.0;
    for y in sobol_points(ell, samples, radius) {
        sys.eval_f(0.0, &[0.0; 3], &y, &mut f);
        let lhs: f64 = alpha.iter().zip(&f).map(|(a, fi)| a * fi).sum();
        let rhs = a0 + a1 * y.iter().sum::<f64>();
        scale = scale.max(alpha.iter().zip(&f).map(|(a, fi)| (a * fi).abs()).sum());
        worst = worst.max(lhs - rhs);
    }
    Ok(MassControlReport { holds: worst <= 1e-12 * scale, worst_violation: worst })
}

/// Smallest `f_i(y)` over samples with `y_i = 0` and the other entries in `[0, radius]`.
pub fn positivity_margin(sys: &ReactionSystem, samples: usize, radius: f64) -> f64 {
    let ell = sys.species();
    let mut f = vec![0.0; ell];
    let mut worst = f64::INFINITY;
    for mut y in sobol_points(ell, samples, radius) {
        for i in 0..ell {
            let saved = y[i];
            y[i] = 0.0;
            sys.eval_f(0.0, &[0.0; 3], &y, &mut f);
            worst = worst.min(f[i]);
            y[i] = saved;
        }
    }
    worst
}

/// `max |f(y)| / (1 + |y|^h)` over samples in `[0, radius]^l`.
pub fn growth_certificate(sys: &ReactionSystem, samples: usize, radius: f64) -> f64 {
    let ell = sys.species();
    let mut f = vec![0.0; ell];
    sobol_points(ell, samples, radius)
        .into_iter()
        .map(|y| {
            sys.eval_f(0.0, &[0.0; 3], &y, &mut f);
            let fy = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            fy / (1.0 + ny.powf(sys.growth_exponent()))
        })
        .fold(0.0, f64::max)
}

//! Closed-form exponent arithmetic: criticality windows, interpolation
//! exponents, the cut-off exponent `r_0`, the high-diffusivity barrier and a
//! self-verifying search for the interpolation tuple `(theta, r_1, zeta_1, xi_1)`.

use std::fmt::Write as _;

use crate::error::{KrdError, Result};

/// Strict margin required of every inequality returned by [`interp_feasible_tuple`].
pub const TUPLE_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSet {
    pub d: usize,
    pub h: f64,
    pub q: f64,
    pub p: f64,
    pub delta: f64,
    /// Bound `N` on the initial data.
    pub n_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityReport {
    /// `d(h-1)/2 v d/(d-delta)`.
    pub q_lower: f64,
    /// `d(h-1)/delta`.
    pub q_upper: f64,
    pub window_nonempty: bool,
    pub q_in_window: bool,
    /// `2/(2-delta) v q`.
    pub p_lower: f64,
    pub p_ok: bool,
    /// `a_{p,delta} = p(1 - delta/2) - 1`.
    pub a_p_delta: f64,
    /// `d(h-1)/2 v 2`, the strong-setting lower bound for `q`.
    pub strong_q_lower: f64,
    pub strong_ok: bool,
}

pub fn admissibility(ps: &ParamSet) -> AdmissibilityReport {
    let d = ps.d as f64;
    let critical = d * (ps.h - 1.0) / 2.0;
    let sobolev = if ps.delta < d { d / (d - ps.delta) } else { f64::INFINITY };
    let q_lower = critical.max(sobolev);
    let q_upper = d * (ps.h - 1.0) / ps.delta;
    let p_lower = if ps.delta < 2.0 { (2.0 / (2.0 - ps.delta)).max(ps.q) } else { f64::INFINITY };
    let strong_q_lower = critical.max(2.0);
    AdmissibilityReport {
        q_lower,
        q_upper,
        window_nonempty: q_lower < q_upper,
        q_in_window: q_lower < ps.q && ps.q < q_upper,
        p_lower,
        p_ok: ps.p >= p_lower,
        a_p_delta: ps.p * (1.0 - ps.delta / 2.0) - 1.0,
        strong_q_lower,
        strong_ok: ps.q > strong_q_lower,
    }
}

/// `(phi, psi)` without the subcriticality check:
/// `phi = max(0, (dh - d - q)/(hq))`, `psi = (d/q)(h-1)/(h+1)`.
pub fn interp_exponents_raw(d: usize, h: f64, q: f64) -> (f64, f64) {
    let d = d as f64;
    let phi = ((d * h - d - q) / (h * q)).max(0.0);
    let psi = d / q * (h - 1.0) / (h + 1.0);
    (phi, psi)
}

/// Interpolation exponents of the strong setting; requires `q > d(h-1)/2 v 2`.
pub fn interp_exponents_strong(d: usize, h: f64, q: f64) -> Result<(f64, f64)> {
    let lower = (d as f64 * (h - 1.0) / 2.0).max(2.0);
    if !(h > 1.0) || !(q > lower) {
        return Err(KrdError::Subcritical(format!("need h > 1 and q > {lower}, got h = {h}, q = {q}")));
    }
    Ok(interp_exponents_raw(d, h, q))
}

/// `r_0 = max((1-phi) h p / (1 - phi h), ((1-psi) p / (1 - psi (h+1)/2)) (h+1)/2) v 2`.
pub fn cutoff_r0(d: usize, h: f64, q: f64, p: f64) -> Result<f64> {
    let (phi, psi) = interp_exponents_strong(d, h, q)?;
    let den1 = 1.0 - phi * h;
    let den2 = 1.0 - psi * (h + 1.0) / 2.0;
    if den1 <= 0.0 || den2 <= 0.0 {
        return Err(KrdError::Subcritical(format!("denominators {den1}, {den2} must be positive")));
    }
    let t1 = (1.0 - phi) * h * p / den1;
    let t2 = (1.0 - psi) * p / den2 * (h + 1.0) / 2.0;
    Ok(t1.max(t2).max(2.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpTuple {
    pub theta: f64,
    pub r1: f64,
    pub zeta1: f64,
    pub xi1: f64,
    /// `1/psi - ((1-theta)/r1 + theta/2)`.
    pub margin_time: f64,
    /// `1/psi - ((1-theta)/zeta1 + theta/xi1)`.
    pub margin_space: f64,
}

/// Both slacks of the interpolation conditions for a candidate tuple.
pub fn interp_margins(psi: f64, theta: f64, r1: f64, zeta1: f64, xi1: f64) -> (f64, f64) {
    (
        1.0 / psi - ((1.0 - theta) / r1 + theta / 2.0),
        1.0 / psi - ((1.0 - theta) / zeta1 + theta / xi1),
    )
}

/// Searches `(theta, r1, zeta1, xi1)` satisfying
/// `(1-theta)/r1 + theta/2 <= 1/psi` and `(1-theta)/zeta1 + theta/xi1 <= 1/psi`
/// with margin at least [`TUPLE_MARGIN`], `theta < d/(d+2)`, `r1 < inf`,
/// `zeta1 in (1, 2)` and `xi1 < 2d/(d-2)` (`xi1` finite when `d = 2`).
///
/// `theta` is scanned upward from 0; for each value the remaining exponents
/// are moved in from their extremes `(inf, 2, 2d/(d-2))` by a shrinking amount.
pub fn interp_feasible_tuple(d: usize, psi: f64) -> Result<InterpTuple> {
    if d < 2 {
        return Err(KrdError::Infeasible(format!("dimension {d} < 2")));
    }
    let df = d as f64;
    let psi_max = 2.0 * (df + 2.0) / df;
    if !(psi > 1.0 && psi < psi_max) {
        return Err(KrdError::Infeasible(format!("psi = {psi} outside (1, {psi_max})")));
    }
    let theta_max = df / (df + 2.0);
    let xi_star = if d > 2 { 2.0 * df / (df - 2.0) } else { f64::INFINITY };
    const THETA_STEPS: usize = 20_000;
    for j in 1..THETA_STEPS {
        let theta = theta_max * j as f64 / THETA_STEPS as f64;
        let mut s = 0.5;
        while s > 1e-12 {
            let r1 = 2.0 / s;
            let zeta1 = 2.0 - s;
            let xi1 = if d > 2 { 2.0 + (xi_star - 2.0) * (1.0 - s) } else { 2.0 / s };
            let (m1, m2) = interp_margins(psi, theta, r1, zeta1, xi1);
            if m1 >= TUPLE_MARGIN && m2 >= TUPLE_MARGIN {
                return Ok(InterpTuple { theta, r1, zeta1, xi1, margin_time: m1, margin_space: m2 });
            }
            s *= 0.5;
        }
    }
    Err(KrdError::Infeasible(format!("no tuple with margin {TUPLE_MARGIN} for psi = {psi}")))
}

/// `gamma = d/(d+2)` of the mean-zero interpolation inequality.
pub fn mean_zero_gamma(d: usize) -> f64 {
    d as f64 / (d as f64 + 2.0)
}

/// Barrier exponent `(h-1)/q`.
pub fn barrier_exponent(h: f64, q: f64) -> f64 {
    (h - 1.0) / q
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barrier {
    pub mu0: f64,
    pub m: f64,
    pub big_m: f64,
    pub k0: f64,
}

/// `m_{mu,R} = (R mu^gamma / (1+e))^{1/e}`.
pub fn barrier_m(mu: f64, r: f64, e_bar: f64, gamma: f64) -> f64 {
    (r * mu.powf(gamma) / (1.0 + e_bar)).powf(1.0 / e_bar)
}

/// `M_{mu,R} = R e / (1+e) m_{mu,R}`.
pub fn barrier_big_m(mu: f64, r: f64, e_bar: f64, gamma: f64) -> f64 {
    r * e_bar / (1.0 + e_bar) * barrier_m(mu, r, e_bar, gamma)
}

/// Solves `M_{mu,R} = 2 + N^q` for `mu` in closed form and returns
/// `(mu_0, m_{mu_0,R}, M_{mu_0,R}, K_0)` with `K_0 = (1+e)/(R e) (1 + N^q)`.
pub fn barrier_mu0(r: f64, e_bar: f64, gamma: f64, n_bound: f64, q: f64) -> Result<Barrier> {
    if [r, e_bar, gamma, n_bound, q].iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(KrdError::InvalidConfig("barrier inputs must be positive and finite".into()));
    }
    let target = 2.0 + n_bound.powf(q);
    let m = target * (1.0 + e_bar) / (r * e_bar);
    let mu0 = ((1.0 + e_bar) * m.powf(e_bar) / r).powf(1.0 / gamma);
    Ok(Barrier {
        mu0,
        m: barrier_m(mu0, r, e_bar, gamma),
        big_m: barrier_big_m(mu0, r, e_bar, gamma),
        k0: (1.0 + e_bar) / (r * e_bar) * (1.0 + n_bound.powf(q)),
    })
}

/// Every quantity above for one parameter set, as text and as `quantity,value` CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentReport {
    pub rows: Vec<(String, String)>,
}

impl ExponentReport {
    pub fn build(ps: &ParamSet, r_level: f64, psi_target: Option<f64>) -> Self {
        let mut rows = Vec::new();
        let mut put = |k: &str, v: String| rows.push((k.to_string(), v));
        let a = admissibility(ps);
        put("d", ps.d.to_string());
        put("h", ps.h.to_string());
        put("q", ps.q.to_string());
        put("p", ps.p.to_string());
        put("delta", ps.delta.to_string());
        put("N", ps.n_bound.to_string());
        put("R", r_level.to_string());
        put("q_window_lower", a.q_lower.to_string());
        put("q_window_upper", a.q_upper.to_string());
        put("q_window_nonempty", a.window_nonempty.to_string());
        put("q_in_window", a.q_in_window.to_string());
        put("p_lower", a.p_lower.to_string());
        put("p_ok", a.p_ok.to_string());
        put("a_p_delta", a.a_p_delta.to_string());
        put("strong_q_lower", a.strong_q_lower.to_string());
        put("strong_ok", a.strong_ok.to_string());
        let show = |r: Result<f64>| r.map_or_else(|e| format!("n/a ({e})"), |v| v.to_string());
        let strong = interp_exponents_strong(ps.d, ps.h, ps.q);
        put("phi", show(strong.clone().map(|x| x.0)));
        put("psi", show(strong.map(|x| x.1)));
        put("r0", show(cutoff_r0(ps.d, ps.h, ps.q, ps.p)));
        let gamma = mean_zero_gamma(ps.d);
        let e_bar = barrier_exponent(ps.h, ps.q);
        put("gamma_mean_zero", gamma.to_string());
        put("e_bar", e_bar.to_string());
        match barrier_mu0(r_level, e_bar, gamma, ps.n_bound, ps.q) {
            Ok(b) => {
                put("mu0", b.mu0.to_string());
                put("m", b.m.to_string());
                put("M", b.big_m.to_string());
                put("K0", b.k0.to_string());
            }
            Err(e) => put("mu0", format!("n/a ({e})")),
        }
        if let Some(psi) = psi_target {
            match interp_feasible_tuple(ps.d, psi) {
                Ok(t) => {
                    put("tuple_theta", t.theta.to_string());
                    put("tuple_r1", t.r1.to_string());
                    put("tuple_zeta1", t.zeta1.to_string());
                    put("tuple_xi1", t.xi1.to_string());
                }
                Err(e) => put("tuple_theta", format!("n/a ({e})")),
            }
        }
        Self { rows }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.rows.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in &self.rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity,value\n");
        for (k, v) in &self.rows {
            let v = if v.contains(',') || v.contains('"') { format!("\"{}\"", v.replace('"', "\"\"")) } else { v.clone() };
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }
}

//! Run configuration: TOML text with dotted keys, flattened and read into
//! typed sections. Every problem is reported with its key path, unknown keys
//! are rejected, and the resolved form serializes back to equivalent text.

use std::collections::BTreeMap;
use std::fmt;

use sha2::{Digest, Sha256};
use toml::Value;

use crate::error::{KrdError, Result};
use crate::exponents::{admissibility, ParamSet};
use crate::noise::NoiseModel;
use crate::reactions::{Builtin, MassActionSpec, ReactionSystem};
use crate::snapshot::read_snapshot;
use crate::solver::{cosine_mode, CutoffParams, Scheme, SolverConfig};
use crate::torus_field::{GridField, TorusGrid};

/// One configuration problem, located by its dotted key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

fn issues_error(issues: Vec<ConfigIssue>) -> KrdError {
    let text: Vec<String> = issues.iter().map(ToString::to_string).collect();
    KrdError::InvalidConfig(text.join("; "))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSection {
    pub d: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSection {
    pub enabled: bool,
    pub nu: f64,
    pub shell_n: u32,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionSection {
    /// `zero`, `mass_action` or `builtin:<name>`.
    pub kind: String,
    pub q: Vec<u32>,
    pub p: Vec<u32>,
    pub r_plus: f64,
    pub r_minus: f64,
    pub nu: Vec<f64>,
    pub mass_alpha: Option<Vec<f64>>,
    pub mass_a0: Option<f64>,
    pub mass_a1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSection {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub seed: u64,
    pub record_every: usize,
    pub blowup_q0: f64,
    pub blowup_threshold: f64,
    pub dealias: bool,
    pub cfl: f64,
    pub substep_courant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutoffSection {
    pub enabled: bool,
    pub level: f64,
    pub r: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSection {
    pub paths: usize,
    pub shells: Vec<u32>,
    pub nus: Vec<f64>,
    pub epsilon: f64,
    pub r: f64,
    pub q: f64,
    pub h_minus_gamma: Option<f64>,
    pub data_q: f64,
    pub data_bound: Option<f64>,
    pub tail_fraction: f64,
    pub q0: f64,
    pub mode: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitSection {
    /// `cosine`, `constant` or `snapshot`.
    pub kind: String,
    pub mean: f64,
    pub amplitude: f64,
    pub mode: Vec<i64>,
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridSection,
    pub noise: NoiseSection,
    pub reaction: ReactionSection,
    pub solver: SolverSection,
    pub cutoff: CutoffSection,
    pub experiment: ExperimentSection,
    pub init: InitSection,
    pub diagnostics_q: Vec<f64>,
    pub balance_q: f64,
    pub snapshots_every: usize,
    pub paper_hypotheses: bool,
    pub delta: f64,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

/// Parses TOML text into a flat `dotted.key -> value` map.
pub fn parse_flat(text: &str) -> Result<BTreeMap<String, Value>> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| issues_error(vec![ConfigIssue { key: "<syntax>".into(), message: e.message().trim().to_string() }]))?;
    let mut out = BTreeMap::new();
    flatten("", &table, &mut out);
    Ok(out)
}

/// Applies `key=value`; the value is read as TOML and falls back to a bare string.
pub fn apply_override(map: &mut BTreeMap<String, Value>, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| KrdError::InvalidConfig(format!("override `{spec}` is not key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(KrdError::InvalidConfig(format!("override `{spec}` has an empty key")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    map.insert(key.to_string(), value);
    Ok(())
}

struct Reader {
    map: BTreeMap<String, Value>,
    issues: Vec<ConfigIssue>,
}

impl Reader {
    fn issue(&mut self, key: &str, message: impl Into<String>) {
        self.issues.push(ConfigIssue { key: key.to_string(), message: message.into() });
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        self.map.remove(key)
    }

    fn number(&mut self, key: &str, v: &Value) -> Option<f64> {
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.issue(key, format!("expected a number, found {}", other.type_str()));
                None
            }
        }
    }

    fn opt_f64(&mut self, key: &str) -> Option<f64> {
        let v = self.take(key)?;
        self.number(key, &v)
    }

    fn f64(&mut self, key: &str, default: f64) -> f64 {
        self.opt_f64(key).unwrap_or(default)
    }

    fn uint(&mut self, key: &str, default: u64) -> u64 {
        match self.take(key) {
            None => default,
            Some(Value::Integer(i)) if i >= 0 => i as u64,
            Some(other) => {
                self.issue(key, format!("expected a nonnegative integer, found {other}"));
                default
            }
        }
    }

    fn boolean(&mut self, key: &str, default: bool) -> bool {
        match self.take(key) {
            None => default,
            Some(Value::Boolean(b)) => b,
            Some(other) => {
                self.issue(key, format!("expected a boolean, found {}", other.type_str()));
                default
            }
        }
    }

    fn opt_string(&mut self, key: &str) -> Option<String> {
        match self.take(key)? {
            Value::String(s) => Some(s),
            other => {
                self.issue(key, format!("expected a string, found {}", other.type_str()));
                None
            }
        }
    }

    fn string(&mut self, key: &str, default: &str) -> String {
        self.opt_string(key).unwrap_or_else(|| default.to_string())
    }

    fn opt_f64_list(&mut self, key: &str) -> Option<Vec<f64>> {
        let v = self.take(key)?;
        let Value::Array(items) = v else {
            self.issue(key, format!("expected an array, found {}", v.type_str()));
            return None;
        };
        items.iter().map(|x| self.number(key, x)).collect()
    }

    fn f64_list(&mut self, key: &str, default: &[f64]) -> Vec<f64> {
        self.opt_f64_list(key).unwrap_or_else(|| default.to_vec())
    }

    fn int_list(&mut self, key: &str, default: &[i64]) -> Vec<i64> {
        let Some(v) = self.take(key) else {
            return default.to_vec();
        };
        let ints = match &v {
            Value::Array(items) => items.iter().map(Value::as_integer).collect::<Option<Vec<i64>>>(),
            _ => None,
        };
        ints.unwrap_or_else(|| {
            self.issue(key, "expected an array of integers");
            default.to_vec()
        })
    }

    fn uint_list(&mut self, key: &str, default: &[u32]) -> Vec<u32> {
        let fallback: Vec<i64> = default.iter().map(|&x| x as i64).collect();
        let raw = self.int_list(key, &fallback);
        if raw.iter().any(|&x| !(0..=u32::MAX as i64).contains(&x)) {
            self.issue(key, "entries must be nonnegative integers");
            return default.to_vec();
        }
        raw.into_iter().map(|x| x as u32).collect()
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_map(BTreeMap::new()).expect("defaults are valid")
    }
}

impl RunConfig {
    /// Parses and validates configuration text, applying `overrides` first.
    pub fn parse_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut map = parse_flat(text)?;
        for o in overrides {
            apply_override(&mut map, o)?;
        }
        Self::from_map(map)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with(text, &[])
    }

    pub fn from_map(map: BTreeMap<String, Value>) -> Result<Self> {
        let mut rd = Reader { map, issues: Vec::new() };
        let grid = GridSection { d: rd.uint("grid.d", 2) as usize, n: rd.uint("grid.n", 64) as usize };
        let noise = NoiseSection {
            enabled: rd.boolean("noise.enabled", true),
            nu: rd.f64("noise.nu", 0.1),
            shell_n: rd.uint("noise.shell_n", 1) as u32,
            gamma: rd.f64("noise.gamma", 0.0),
        };
        let reaction = ReactionSection {
            kind: rd.string("reaction.kind", "zero"),
            q: rd.uint_list("reaction.q", &[]),
            p: rd.uint_list("reaction.p", &[]),
            r_plus: rd.f64("reaction.r_plus", 1.0),
            r_minus: rd.f64("reaction.r_minus", 1.0),
            nu: rd.f64_list("reaction.nu", &[0.01]),
            mass_alpha: rd.opt_f64_list("reaction.mass.alpha"),
            mass_a0: rd.opt_f64("reaction.mass.a0"),
            mass_a1: rd.opt_f64("reaction.mass.a1"),
        };
        let scheme_name = rd.string("solver.scheme", Scheme::EulerMaruyamaIto.name());
        let scheme = Scheme::from_name(&scheme_name).unwrap_or_else(|| {
            rd.issue("solver.scheme", format!("unknown scheme `{scheme_name}`"));
            Scheme::EulerMaruyamaIto
        });
        let defaults = SolverConfig::default();
        let solver = SolverSection {
            dt: rd.f64("solver.dt", defaults.dt),
            t_end: rd.f64("solver.T", defaults.t_end),
            scheme,
            seed: rd.uint("solver.seed", 0),
            record_every: rd.uint("solver.record_every", 10) as usize,
            blowup_q0: rd.f64("solver.blowup.q0", defaults.blowup_q0),
            blowup_threshold: rd.f64("solver.blowup.threshold", defaults.blowup_threshold),
            dealias: rd.boolean("solver.dealias", true),
            cfl: rd.f64("solver.cfl", defaults.cfl),
            substep_courant: rd.f64("solver.substep_courant", defaults.substep_courant),
        };
        let cutoff = CutoffSection {
            enabled: rd.boolean("cutoff.enabled", false),
            level: rd.f64("cutoff.R", 100.0),
            r: rd.f64("cutoff.r", 4.0),
            q: rd.f64("cutoff.q", 2.0),
        };
        let experiment = ExperimentSection {
            paths: rd.uint("experiment.paths", 16) as usize,
            shells: rd.uint_list("experiment.shells", &[1, 2, 4, 8]),
            nus: rd.f64_list("experiment.nus", &[0.0, 0.05, 0.1]),
            epsilon: rd.f64("experiment.epsilon", 0.1),
            r: rd.f64("experiment.r", 2.0),
            q: rd.f64("experiment.q", 2.0),
            h_minus_gamma: rd.opt_f64("experiment.h_minus_gamma"),
            data_q: rd.f64("experiment.data_q", 2.0),
            data_bound: rd.opt_f64("experiment.data_bound"),
            tail_fraction: rd.f64("experiment.tail_fraction", 0.5),
            q0: rd.f64("experiment.q0", 2.0),
            mode: rd.int_list("experiment.mode", &[1, 0]),
        };
        let init = InitSection {
            kind: rd.string("init.kind", "cosine"),
            mean: rd.f64("init.mean", 1.0),
            amplitude: rd.f64("init.amplitude", 0.25),
            mode: rd.int_list("init.mode", &[1, 0]),
            path: rd.opt_string("init.path"),
        };
        let cfg = RunConfig {
            grid,
            noise,
            reaction,
            solver,
            cutoff,
            experiment,
            init,
            diagnostics_q: rd.f64_list("diagnostics.q", &[2.0]),
            balance_q: rd.f64("diagnostics.balance_q", 2.0),
            snapshots_every: rd.uint("io.snapshots_every", 0) as usize,
            paper_hypotheses: rd.boolean("validate.paper_hypotheses", false),
            delta: rd.f64("validate.delta", 1.0),
        };
        let leftover: Vec<String> = rd.map.keys().cloned().collect();
        for key in leftover {
            rd.issue(&key, "unknown key");
        }
        cfg.check(&mut rd);
        if rd.issues.is_empty() {
            Ok(cfg)
        } else {
            Err(issues_error(rd.issues))
        }
    }

    fn check(&self, rd: &mut Reader) {
        let g = &self.grid;
        if !(2..=3).contains(&g.d) {
            rd.issue("grid.d", format!("dimension {} not in 2..=3", g.d));
        }
        if g.n < 8 || !g.n.is_multiple_of(2) {
            rd.issue("grid.n", format!("{} must be even and >= 8", g.n));
        }
        if self.noise.enabled {
            if !(self.noise.nu >= 0.0) {
                rd.issue("noise.nu", "must be >= 0");
            }
            if self.noise.shell_n == 0 {
                rd.issue("noise.shell_n", "must be >= 1");
            } else if 6 * self.noise.shell_n as usize > g.n {
                rd.issue(
                    "noise.shell_n",
                    format!("2 * {} exceeds grid.n / 3 = {:.3}", self.noise.shell_n, g.n as f64 / 3.0),
                );
            }
        }
        if self.experiment.paths == 0 {
            rd.issue("experiment.paths", "must be >= 1");
        }
        if self.solver.record_every == 0 {
            rd.issue("solver.record_every", "must be >= 1");
        }
        if !(self.solver.dt > 0.0) {
            rd.issue("solver.dt", "must be positive");
        } else if !(self.solver.t_end >= 0.0) {
            rd.issue("solver.T", "must be >= 0");
        } else if let Err(e) = self.solver_config().validate() {
            rd.issue("solver", e.to_string());
        }
        if !["cosine", "constant", "snapshot"].contains(&self.init.kind.as_str()) {
            rd.issue("init.kind", format!("unknown kind `{}`", self.init.kind));
        }
        if self.init.kind == "snapshot" && self.init.path.is_none() {
            rd.issue("init.path", "required for init.kind = \"snapshot\"");
        }
        if self.init.mode.len() > g.d {
            rd.issue("init.mode", format!("at most {} entries", g.d));
        }
        if self.experiment.mode.len() > g.d {
            rd.issue("experiment.mode", format!("at most {} entries", g.d));
        }
        if self.diagnostics_q.iter().any(|q| !(*q >= 1.0)) {
            rd.issue("diagnostics.q", "exponents must be >= 1");
        }
        if let Err(e) = self.system(true) {
            rd.issue("reaction", e.to_string());
        } else if self.paper_hypotheses {
            self.check_hypotheses(rd);
        }
    }

    fn check_hypotheses(&self, rd: &mut Reader) {
        let sys = self.system(true).expect("checked");
        if sys.mass_alpha().is_none() {
            rd.issue("validate.paper_hypotheses", "reaction has no mass-control weights");
        }
        let ps = ParamSet {
            d: self.grid.d,
            h: sys.growth_exponent(),
            q: self.cutoff.q,
            p: self.cutoff.r,
            delta: self.delta,
            n_bound: 1.0,
        };
        let a = admissibility(&ps);
        if !a.strong_ok {
            rd.issue(
                "validate.paper_hypotheses",
                format!("cutoff.q = {} must exceed d(h-1)/2 v 2 = {}", ps.q, a.strong_q_lower),
            );
        }
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.grid.d, self.grid.n)
    }

    /// Reaction system; the square test mode needs `allow_unsafe`.
    pub fn system(&self, allow_unsafe: bool) -> Result<ReactionSystem> {
        let r = &self.reaction;
        let nu = r.nu.clone();
        let mut sys = match r.kind.as_str() {
            "zero" => ReactionSystem::zero(nu)?,
            "mass_action" => {
                let spec = MassActionSpec::new(r.q.clone(), r.p.clone(), r.r_plus, r.r_minus)?;
                ReactionSystem::mass_action(spec, nu)?
            }
            other => {
                let name = other.strip_prefix("builtin:").unwrap_or(other);
                let b = Builtin::from_name(name)
                    .ok_or_else(|| KrdError::InvalidReaction(format!("unknown reaction kind `{other}`")))?;
                if b.is_unsafe() && !allow_unsafe {
                    return Err(KrdError::InvalidReaction(format!(
                        "`{}` is not mass-controlled and needs --unsafe-reaction",
                        b.name()
                    )));
                }
                ReactionSystem::builtin(b, nu)?
            }
        };
        let (a0, a1) = sys.mass_consts();
        let (a0, a1) = (r.mass_a0.unwrap_or(a0), r.mass_a1.unwrap_or(a1));
        sys = match &r.mass_alpha {
            Some(alpha) => sys.with_mass_control(alpha.clone(), a0, a1)?,
            None => sys.with_mass_consts(a0, a1),
        };
        Ok(sys)
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            dt: s.dt,
            t_end: s.t_end,
            scheme: s.scheme,
            noise_on: self.noise.enabled,
            cutoff: self.cutoff.enabled.then_some(CutoffParams { level: self.cutoff.level, r: self.cutoff.r, q: self.cutoff.q }),
            blowup_threshold: s.blowup_threshold,
            blowup_q0: s.blowup_q0,
            seed: s.seed,
            dealias: s.dealias,
            record_every: s.record_every,
            require_nonneg: false,
            cfl: s.cfl,
            diag_q: self.diagnostics_q.clone(),
            balance_q: self.balance_q,
            substep_courant: s.substep_courant,
        }
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        NoiseModel::shell(self.grid.d, self.noise.shell_n, self.noise.gamma, self.noise.nu)
    }

    /// Initial data for `species` components, identical across species.
    pub fn initial_data(&self, grid: TorusGrid, species: usize) -> Result<Vec<GridField>> {
        let i = &self.init;
        match i.kind.as_str() {
            "snapshot" => {
                let path = i.path.as_deref().expect("validated");
                let fields = read_snapshot(std::io::BufReader::new(std::fs::File::open(path)?))?;
                if fields.len() != species || fields.iter().any(|f| f.grid() != grid) {
                    return Err(KrdError::GridMismatch(format!("snapshot {path} does not match the configured grid")));
                }
                Ok(fields)
            }
            "constant" => Ok(vec![GridField::constant(grid, i.mean); species]),
            _ => {
                let mut k = [0i64; 3];
                k[..i.mode.len().min(3)].copy_from_slice(&i.mode[..i.mode.len().min(3)]);
                let wave = cosine_mode(grid, k, i.amplitude);
                let v: Vec<f64> = wave.values().iter().map(|w| i.mean + w).collect();
                let field = GridField::new(grid, v)?;
                Ok(vec![field; species])
            }
        }
    }

    fn entries(&self) -> Vec<(&'static str, Value)> {
        let f = Value::Float;
        let int = |x: u64| Value::Integer(x as i64);
        let floats = |xs: &[f64]| Value::Array(xs.iter().map(|&x| Value::Float(x)).collect());
        let ints = |xs: &[i64]| Value::Array(xs.iter().map(|&x| Value::Integer(x)).collect());
        let uints = |xs: &[u32]| Value::Array(xs.iter().map(|&x| Value::Integer(x as i64)).collect());
        let (r, s, e, i) = (&self.reaction, &self.solver, &self.experiment, &self.init);
        let mut out = vec![
            ("grid.d", int(self.grid.d as u64)),
            ("grid.n", int(self.grid.n as u64)),
            ("noise.enabled", Value::Boolean(self.noise.enabled)),
            ("noise.nu", f(self.noise.nu)),
            ("noise.shell_n", int(self.noise.shell_n as u64)),
            ("noise.gamma", f(self.noise.gamma)),
            ("reaction.kind", Value::String(r.kind.clone())),
            ("reaction.q", uints(&r.q)),
            ("reaction.p", uints(&r.p)),
            ("reaction.r_plus", f(r.r_plus)),
            ("reaction.r_minus", f(r.r_minus)),
            ("reaction.nu", floats(&r.nu)),
            ("solver.dt", f(s.dt)),
            ("solver.T", f(s.t_end)),
            ("solver.scheme", Value::String(s.scheme.name().into())),
            ("solver.seed", int(s.seed)),
            ("solver.record_every", int(s.record_every as u64)),
            ("solver.blowup.q0", f(s.blowup_q0)),
            ("solver.blowup.threshold", f(s.blowup_threshold)),
            ("solver.dealias", Value::Boolean(s.dealias)),
            ("solver.cfl", f(s.cfl)),
            ("solver.substep_courant", f(s.substep_courant)),
            ("cutoff.enabled", Value::Boolean(self.cutoff.enabled)),
            ("cutoff.R", f(self.cutoff.level)),
            ("cutoff.r", f(self.cutoff.r)),
            ("cutoff.q", f(self.cutoff.q)),
            ("experiment.paths", int(e.paths as u64)),
            ("experiment.shells", uints(&e.shells)),
            ("experiment.nus", floats(&e.nus)),
            ("experiment.epsilon", f(e.epsilon)),
            ("experiment.r", f(e.r)),
            ("experiment.q", f(e.q)),
            ("experiment.data_q", f(e.data_q)),
            ("experiment.tail_fraction", f(e.tail_fraction)),
            ("experiment.q0", f(e.q0)),
            ("experiment.mode", ints(&e.mode)),
            ("init.kind", Value::String(i.kind.clone())),
            ("init.mean", f(i.mean)),
            ("init.amplitude", f(i.amplitude)),
            ("init.mode", ints(&i.mode)),
            ("diagnostics.q", floats(&self.diagnostics_q)),
            ("diagnostics.balance_q", f(self.balance_q)),
            ("io.snapshots_every", int(self.snapshots_every as u64)),
            ("validate.paper_hypotheses", Value::Boolean(self.paper_hypotheses)),
            ("validate.delta", f(self.delta)),
        ];
        let optional = [
            ("reaction.mass.alpha", r.mass_alpha.as_deref().map(floats)),
            ("reaction.mass.a0", r.mass_a0.map(f)),
            ("reaction.mass.a1", r.mass_a1.map(f)),
            ("experiment.h_minus_gamma", e.h_minus_gamma.map(f)),
            ("experiment.data_bound", e.data_bound.map(f)),
            ("init.path", i.path.clone().map(Value::String)),
        ];
        out.extend(optional.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))));
        out
    }

    /// Fully resolved configuration as dotted-key TOML, one key per line.
    pub fn to_toml(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of the resolved configuration text, in hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Manifest text; metadata lines are comments, so the file is itself a
    /// config that reproduces the run.
    pub fn manifest(&self, command: &str, timestamp: u64) -> String {
        format!(
            "# krd run manifest\n# command = {command}\n# version = {}\n# config_sha256 = {}\n# created_unix = {timestamp}\n{}",
            env!("CARGO_PKG_VERSION"),
            self.hash(),
            self.to_toml()
        )
    }
}

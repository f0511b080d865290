//! Command-line front end. Exit status 0 means success, 1 a usage or
//! validation error, 2 a failure while running.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::KrdError;
use crate::experiments::{
    paths_csv, run_decay, run_scaling_limit, run_survival, DecayPlan, ScalingLimitPlan, SurvivalPlan,
};
use crate::exponents::{ExponentReport, ParamSet};
use crate::noise::{verify_ellipticity, NoiseModel, NoiseSpectrum};
use crate::reactions::{check_mass_control, find_mass_weights, positivity_margin, MassActionSpec, ReactionSystem};
use crate::snapshot::write_snapshot;
use crate::solver::Solver;

/// Ellipticity deviations above this fail `verify-noise`.
pub const ELLIPTICITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "krd", version, about = "Reaction-diffusion systems with Kraichnan transport noise on the torus")]
struct Cli {
    /// Worker threads for Monte-Carlo paths (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One stochastic path; writes diagnostics.csv and optional snapshots.
    Simulate(RunArgs),
    /// Deterministic run with diffusivities enhanced by noise.nu.
    SimulateDet(RunArgs),
    /// Distance of stochastic paths to the enhanced deterministic solution per shell.
    ScalingLimit(RunArgs),
    /// Survival probability against blow-up for each nu in experiment.nus.
    Survival(RunArgs),
    /// Exponential decay rates when the mass constants satisfy a0 = 0, a1 < 0.
    Decay(RunArgs),
    /// Exponent, cut-off and barrier report for a parameter set.
    Exponents(ExponentArgs),
    /// Ellipticity check of a shell or user-supplied noise spectrum.
    VerifyNoise(VerifyArgs),
    /// Conservation weights and sampled mass control of a mass-action reaction.
    MassActionCheck(MassArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Set a configuration key, e.g. `--override grid.n=96`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "krd_out")]
    out: PathBuf,
    /// Master seed; replaces solver.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Paths per sweep point; replaces experiment.paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Allow reactions without mass control (the square test mode).
    #[arg(long)]
    unsafe_reaction: bool,
}

#[derive(Debug, Args)]
struct ExponentArgs {
    #[arg(long)]
    d: usize,
    /// Growth exponent of the nonlinearity.
    #[arg(long)]
    h: f64,
    #[arg(long)]
    q: f64,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    delta: f64,
    /// Bound on the initial data.
    #[arg(long = "N", default_value_t = 1.0)]
    n_bound: f64,
    /// Cut-off level.
    #[arg(long = "R", default_value_t = 1.0)]
    r_level: f64,
    /// Also search an interpolation tuple for this psi.
    #[arg(long)]
    psi: Option<f64>,
    /// Write exponents.csv into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 1)]
    shell: u32,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Spectrum CSV (`k1,..,kd,theta`) to check instead of a shell.
    #[arg(long)]
    spectrum: Option<PathBuf>,
    /// Write the checked spectrum as spectrum.csv into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MassArgs {
    /// Configuration whose reaction section is checked.
    #[arg(long, conflicts_with_all = ["q", "p"])]
    config: Option<PathBuf>,
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Left stoichiometry, comma separated.
    #[arg(long, value_delimiter = ',')]
    q: Vec<u32>,
    /// Right stoichiometry, comma separated.
    #[arg(long, value_delimiter = ',')]
    p: Vec<u32>,
    #[arg(long, default_value_t = 1.0)]
    r_plus: f64,
    #[arg(long, default_value_t = 1.0)]
    r_minus: f64,
    #[arg(long, default_value_t = 0.0)]
    a0: f64,
    #[arg(long, default_value_t = 0.0)]
    a1: f64,
    #[arg(long, default_value_t = 4096)]
    samples: usize,
    /// Samples are drawn from [0, radius]^l.
    #[arg(long, default_value_t = 10.0)]
    radius: f64,
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

fn invalid(e: impl ToString) -> Failure {
    Failure::Invalid(e.to_string())
}

fn runtime(e: impl ToString) -> Failure {
    Failure::Runtime(e.to_string())
}

type Outcome = std::result::Result<(), Failure>;

/// Parses `args` (program name first) and runs the command, printing reports to `out`.
pub fn dispatch_with<I, T>(args: I, out: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let outcome = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(cli.command, out)),
            Err(e) => Err(invalid(format!("--threads {n}: {e}"))),
        },
        None => execute(cli.command, out),
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("runtime error: {msg}");
            2
        }
    }
}

pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    dispatch_with(args, &mut std::io::stdout())
}

fn execute(command: Command, out: &mut (dyn Write + Send)) -> Outcome {
    match command {
        Command::Simulate(a) => simulate(&a, false, out),
        Command::SimulateDet(a) => simulate(&a, true, out),
        Command::ScalingLimit(a) => scaling_limit(&a, out),
        Command::Survival(a) => survival(&a, out),
        Command::Decay(a) => decay(&a, out),
        Command::Exponents(a) => exponents(&a, out),
        Command::VerifyNoise(a) => verify_noise(&a, out),
        Command::MassActionCheck(a) => mass_action_check(&a, out),
    }
}

fn load_config(path: Option<&Path>, overrides: &[String]) -> std::result::Result<RunConfig, Failure> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| invalid(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    RunConfig::parse_with(&text, overrides).map_err(invalid)
}

fn resolve(args: &RunArgs) -> std::result::Result<RunConfig, Failure> {
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("solver.seed={seed}"));
    }
    if let Some(paths) = args.paths {
        overrides.push(format!("experiment.paths={paths}"));
    }
    load_config(args.config.as_deref(), &overrides)
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Outcome {
    fs::write(dir.join(name), contents).map_err(|e| runtime(format!("{}: {e}", dir.join(name).display())))
}

fn prepare_out(dir: &Path, cfg: &RunConfig, command: &str) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    write_file(dir, "manifest.toml", cfg.manifest(command, stamp).as_bytes())
}

fn report(out: &mut (dyn Write + Send), text: &str) -> Outcome {
    out.write_all(text.as_bytes()).map_err(runtime)
}

fn build_solver(cfg: &RunConfig, unsafe_ok: bool, deterministic: bool) -> std::result::Result<Solver, KrdError> {
    let grid = cfg.grid()?;
    let sys = cfg.system(unsafe_ok)?;
    let scfg = cfg.solver_config();
    let enhancement = if cfg.noise.enabled { cfg.noise.nu } else { 0.0 };
    if deterministic || cfg.noise.nu == 0.0 {
        return Solver::deterministic(sys, if deterministic { enhancement } else { 0.0 }, scfg, grid);
    }
    Solver::stochastic(sys, cfg.noise_model()?, scfg, grid)
}

fn simulate(args: &RunArgs, deterministic: bool, out: &mut (dyn Write + Send)) -> Outcome {
    let cfg = resolve(args)?;
    let mut solver = build_solver(&cfg, args.unsafe_reaction, deterministic).map_err(invalid)?;
    let grid = solver.grid();
    let v0 = cfg.initial_data(grid, solver.system().species()).map_err(invalid)?;
    let command = if deterministic { "simulate-det" } else { "simulate" };
    prepare_out(&args.out, &cfg, command)?;

    let every = cfg.snapshots_every as u64;
    let mut snapshot_error = None;
    let (state, record) = solver
        .run_with(&v0, 0, |s| {
            if every > 0 && s.step % every == 0 && snapshot_error.is_none() {
                let mut buf = Vec::new();
                let name = format!("snapshot_{:08}.krdf", s.step);
                snapshot_error = write_snapshot(&mut buf, &s.grid_fields)
                    .and_then(|_| fs::write(args.out.join(&name), &buf).map_err(KrdError::from))
                    .err();
            }
        })
        .map_err(runtime)?;
    if let Some(e) = snapshot_error {
        return Err(runtime(e));
    }
    write_file(&args.out, "diagnostics.csv", record.to_csv().as_bytes())?;
    if every > 0 {
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &state.grid_fields).map_err(runtime)?;
        write_file(&args.out, "final.krdf", &buf)?;
    }
    let status = match state.blown_up {
        Some(tau) => format!("blow-up at t = {tau}"),
        None => format!("reached T = {}", state.t),
    };
    report(
        out,
        &format!("{status}; {} samples, max |residual| = {:e}\n", record.len(), record.max_abs_residual()),
    )
}

fn scaling_limit(args: &RunArgs, out: &mut (dyn Write + Send)) -> Outcome {
    let cfg = resolve(args)?;
    let grid = cfg.grid().map_err(invalid)?;
    let sys = cfg.system(args.unsafe_reaction).map_err(invalid)?;
    let e = &cfg.experiment;
    let plan = ScalingLimitPlan {
        grid,
        shells: e.shells.clone(),
        gamma: cfg.noise.gamma,
        nu: cfg.noise.nu,
        paths: e.paths,
        base: cfg.solver_config(),
        v0: cfg.initial_data(grid, sys.species()).map_err(invalid)?,
        sys,
        epsilon: e.epsilon,
        r: e.r,
        q: e.q,
        h_minus_gamma: e.h_minus_gamma,
    };
    plan.validate().map_err(invalid)?;
    if plan.nu > 0.0 {
        for &n in &plan.shells {
            let noise = NoiseModel::shell(grid.dim(), n, plan.gamma, plan.nu).map_err(invalid)?;
            Solver::stochastic(plan.sys.clone(), noise, plan.base.clone(), grid).map_err(invalid)?;
        }
    }
    prepare_out(&args.out, &cfg, "scaling-limit")?;
    let table = run_scaling_limit(&plan, cfg.solver.seed).map_err(runtime)?;
    write_file(&args.out, "scaling_limit.csv", table.to_csv().as_bytes())?;
    for row in &table.rows {
        write_file(&args.out, &format!("paths_n{}.csv", row.n), paths_csv(&row.paths).as_bytes())?;
    }
    report(out, &table.to_csv())?;
    report(out, &format!("strictly decreasing: {}\n", table.strictly_decreasing()))
}

fn survival(args: &RunArgs, out: &mut (dyn Write + Send)) -> Outcome {
    let cfg = resolve(args)?;
    let grid = cfg.grid().map_err(invalid)?;
    let sys = cfg.system(args.unsafe_reaction).map_err(invalid)?;
    let e = &cfg.experiment;
    let plan = SurvivalPlan {
        grid,
        nus: e.nus.clone(),
        shell: cfg.noise.shell_n,
        gamma: cfg.noise.gamma,
        paths: e.paths,
        base: cfg.solver_config(),
        v0: cfg.initial_data(grid, sys.species()).map_err(invalid)?,
        sys,
        data_bound: e.data_bound.map(|n| (e.data_q, n)),
    };
    plan.validate().map_err(invalid)?;
    for &nu in plan.nus.iter().filter(|&&nu| nu > 0.0) {
        let noise = NoiseModel::shell(grid.dim(), plan.shell, plan.gamma, nu).map_err(invalid)?;
        Solver::stochastic(plan.sys.clone(), noise, plan.base.clone(), grid).map_err(invalid)?;
    }
    prepare_out(&args.out, &cfg, "survival")?;
    let table = run_survival(&plan, cfg.solver.seed).map_err(runtime)?;
    write_file(&args.out, "survival.csv", table.to_csv().as_bytes())?;
    for row in &table.rows {
        write_file(&args.out, &format!("paths_nu{}.csv", row.nu), paths_csv(&row.paths).as_bytes())?;
    }
    report(out, &table.to_csv())?;
    report(out, &format!("monotone in nu: {}\n", table.monotone_in_nu()))
}

fn decay(args: &RunArgs, out: &mut (dyn Write + Send)) -> Outcome {
    let cfg = resolve(args)?;
    let grid = cfg.grid().map_err(invalid)?;
    let sys = cfg.system(args.unsafe_reaction).map_err(invalid)?;
    let e = &cfg.experiment;
    let mut mode = [0i64; 3];
    mode[..e.mode.len()].copy_from_slice(&e.mode);
    let plan = DecayPlan {
        grid,
        noise: (cfg.noise.enabled && cfg.noise.nu > 0.0).then_some((cfg.noise.shell_n, cfg.noise.gamma, cfg.noise.nu)),
        paths: e.paths,
        base: cfg.solver_config(),
        v0: cfg.initial_data(grid, sys.species()).map_err(invalid)?,
        sys,
        q0: e.q0,
        tail_fraction: e.tail_fraction,
        mode: Some(mode),
    };
    let (a0, a1) = plan.sys.mass_consts();
    if a0 != 0.0 || !(a1 < 0.0) {
        return Err(invalid(format!("decay needs reaction.mass.a0 = 0 and a1 < 0, got ({a0}, {a1})")));
    }
    if let Some((n, gamma, nu)) = plan.noise {
        let noise = NoiseModel::shell(grid.dim(), n, gamma, nu).map_err(invalid)?;
        Solver::stochastic(plan.sys.clone(), noise, plan.base.clone(), grid).map_err(invalid)?;
    }
    prepare_out(&args.out, &cfg, "decay")?;
    let rep = run_decay(&plan, cfg.solver.seed).map_err(runtime)?;
    write_file(&args.out, "decay.csv", rep.to_csv().as_bytes())?;
    write_file(&args.out, "decay_series.csv", rep.series_csv().as_bytes())?;
    report(out, &rep.to_csv())
}

fn exponents(args: &ExponentArgs, out: &mut (dyn Write + Send)) -> Outcome {
    let finite = [args.h, args.q, args.p, args.delta, args.n_bound, args.r_level];
    if args.d == 0 || finite.iter().any(|x| !x.is_finite()) {
        return Err(invalid("exponent parameters must be finite with d >= 1"));
    }
    let ps = ParamSet { d: args.d, h: args.h, q: args.q, p: args.p, delta: args.delta, n_bound: args.n_bound };
    let rep = ExponentReport::build(&ps, args.r_level, args.psi);
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(runtime)?;
        write_file(dir, "exponents.csv", rep.to_csv().as_bytes())?;
    }
    report(out, &rep.to_text())
}

fn verify_noise(args: &VerifyArgs, out: &mut (dyn Write + Send)) -> Outcome {
    let spectrum = match &args.spectrum {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            NoiseSpectrum::from_csv_unchecked(&text).map_err(invalid)?
        }
        None => NoiseSpectrum::theta_shell(args.shell, args.gamma, args.d).map_err(invalid)?,
    };
    let model = NoiseModel::new(spectrum.clone(), 1.0).map_err(invalid)?;
    let dev = verify_ellipticity(&model);
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(runtime)?;
        write_file(dir, "spectrum.csv", spectrum.to_csv().as_bytes())?;
    }
    report(
        out,
        &format!(
            "modes = {}\nl2_norm = {}\nlinf_norm = {}\nellipticity_deviation = {dev:e}\n",
            spectrum.modes().len(),
            spectrum.l2_norm(),
            spectrum.linf_norm()
        ),
    )?;
    if dev < ELLIPTICITY_TOLERANCE {
        Ok(())
    } else {
        Err(invalid(format!("ellipticity deviation {dev:e} exceeds {ELLIPTICITY_TOLERANCE:e}")))
    }
}

fn mass_action_check(args: &MassArgs, out: &mut (dyn Write + Send)) -> Outcome {
    let sys = if args.config.is_some() || !args.overrides.is_empty() {
        let cfg = load_config(args.config.as_deref(), &args.overrides)?;
        cfg.system(false).map_err(invalid)?
    } else {
        let spec = MassActionSpec::new(args.q.clone(), args.p.clone(), args.r_plus, args.r_minus).map_err(invalid)?;
        let ell = spec.species();
        let weights = find_mass_weights(&spec);
        let sys = ReactionSystem::mass_action(spec, vec![0.0; ell]).map_err(invalid)?;
        match weights {
            Some(alpha) => sys.with_mass_control(alpha, args.a0, args.a1).map_err(invalid)?,
            None => sys,
        }
    };
    let Some(alpha) = sys.mass_alpha().map(<[f64]>::to_vec) else {
        report(out, "weights = none\n")?;
        return Err(invalid("no strictly positive conservation weights exist"));
    };
    let check = check_mass_control(&sys, args.samples, args.radius).map_err(runtime)?;
    let margin = positivity_margin(&sys, args.samples, args.radius);
    let (a0, a1) = sys.mass_consts();
    let shown: Vec<String> = alpha.iter().map(ToString::to_string).collect();
    report(
        out,
        &format!(
            "weights = [{}]\na0 = {a0}\na1 = {a1}\nmass_control = {}\nworst_violation = {:e}\npositivity_margin = {margin:e}\n",
            shown.join(", "),
            check.holds,
            check.worst_violation
        ),
    )?;
    if check.holds {
        Ok(())
    } else {
        Err(invalid("sampled mass control fails"))
    }
}

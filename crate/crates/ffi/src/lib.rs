//! C ABI over `krd-core`.
//!
//! Objects are opaque handles created by `krd_*_new`-style constructors and
//! released with the matching `*_free`. Every fallible call returns a
//! [`KrdStatus`]; on failure a message is kept per thread and can be read with
//! [`krd_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use krd_core::config::RunConfig;
use krd_core::exponents::{cutoff_r0, interp_exponents_raw};
use krd_core::noise::{verify_ellipticity, NoiseModel};
use krd_core::solver::{SimState, Solver};
use krd_core::KrdError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    Runtime = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Kraichnan noise model.
pub struct KrdNoise {
    model: NoiseModel,
}

/// One simulation path with its current state.
pub struct KrdSimulation {
    solver: Solver,
    state: SimState,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = clean);
}

fn fail(status: KrdStatus, msg: impl AsRef<str>) -> KrdStatus {
    set_error(msg.as_ref());
    status
}

fn status_of(e: &KrdError) -> KrdStatus {
    match e {
        KrdError::NonFinite { .. } | KrdError::Io(_) | KrdError::Snapshot(_) => KrdStatus::Runtime,
        KrdError::InvalidConfig(_) => KrdStatus::InvalidConfig,
        _ => KrdStatus::InvalidArgument,
    }
}

fn guard(body: impl FnOnce() -> KrdStatus) -> KrdStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(KrdStatus::Panic, "internal panic"),
    }
}

fn from_core(r: krd_core::Result<()>) -> KrdStatus {
    match r {
        Ok(()) => KrdStatus::Ok,
        Err(e) => fail(status_of(&e), e.to_string()),
    }
}

/// Message of the last failed call on this thread; empty when none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn krd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn krd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Shell noise `theta ∝ 1{n <= |k| <= 2n} |k|^-gamma` with intensity `nu`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn krd_noise_shell(d: usize, n: u32, gamma: f64, nu: f64, out: *mut *mut KrdNoise) -> KrdStatus {
    guard(|| {
        if out.is_null() {
            return fail(KrdStatus::NullPointer, "out is null");
        }
        match NoiseModel::shell(d, n, gamma, nu) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(KrdNoise { model }));
                KrdStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Number of lattice modes in the support of the spectrum.
///
/// # Safety
/// `noise` must be a live handle or null; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn krd_noise_mode_count(noise: *const KrdNoise, out: *mut usize) -> KrdStatus {
    guard(|| match (noise.as_ref(), out.is_null()) {
        (Some(n), false) => {
            *out = n.model.spectrum().modes().len();
            KrdStatus::Ok
        }
        _ => fail(KrdStatus::NullPointer, "null argument"),
    })
}

/// Maximal deviation of the noise covariance from `I / c_d`.
///
/// # Safety
/// `noise` must be a live handle or null; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn krd_noise_ellipticity(noise: *const KrdNoise, out: *mut f64) -> KrdStatus {
    guard(|| match (noise.as_ref(), out.is_null()) {
        (Some(n), false) => {
            *out = verify_ellipticity(&n.model);
            KrdStatus::Ok
        }
        _ => fail(KrdStatus::NullPointer, "null argument"),
    })
}

/// # Safety
/// `noise` must come from [`krd_noise_shell`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn krd_noise_free(noise: *mut KrdNoise) {
    if !noise.is_null() {
        drop(Box::from_raw(noise));
    }
}

fn build_simulation(text: &str, allow_unsafe: bool, path: u64) -> krd_core::Result<KrdSimulation> {
    let cfg = RunConfig::parse(text)?;
    let grid = cfg.grid()?;
    let sys = cfg.system(allow_unsafe)?;
    let scfg = cfg.solver_config();
    let mut solver = if cfg.noise.nu > 0.0 {
        Solver::stochastic(sys, cfg.noise_model()?, scfg, grid)?
    } else {
        Solver::deterministic(sys, 0.0, scfg, grid)?
    };
    let v0 = cfg.initial_data(grid, solver.system().species())?;
    let state = solver.initial_state(&v0, path)?;
    Ok(KrdSimulation { solver, state })
}

/// Simulation from TOML configuration text, positioned at `t = 0` on Monte-Carlo path `path`.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn krd_simulation_new(
    config: *const c_char,
    allow_unsafe: bool,
    path: u64,
    out: *mut *mut KrdSimulation,
) -> KrdStatus {
    guard(|| {
        if config.is_null() || out.is_null() {
            return fail(KrdStatus::NullPointer, "null argument");
        }
        let Ok(text) = CStr::from_ptr(config).to_str() else {
            return fail(KrdStatus::InvalidArgument, "config is not UTF-8");
        };
        match build_simulation(text, allow_unsafe, path) {
            Ok(sim) => {
                *out = Box::into_raw(Box::new(sim));
                KrdStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Advances up to `steps` steps, stopping early at `T` or on blow-up.
///
/// # Safety
/// `sim` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn krd_simulation_step(sim: *mut KrdSimulation, steps: u64) -> KrdStatus {
    guard(|| {
        let Some(sim) = sim.as_mut() else {
            return fail(KrdStatus::NullPointer, "sim is null");
        };
        let total = sim.solver.config().steps();
        for _ in 0..steps {
            if sim.state.step >= total || sim.state.blown_up.is_some() {
                break;
            }
            if let Err(e) = sim.solver.step(&mut sim.state) {
                return from_core(Err(e));
            }
        }
        KrdStatus::Ok
    })
}

/// Current time.
///
/// # Safety
/// `sim` must be a live handle or null; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn krd_simulation_time(sim: *const KrdSimulation, out: *mut f64) -> KrdStatus {
    guard(|| match (sim.as_ref(), out.is_null()) {
        (Some(s), false) => {
            *out = s.state.t;
            KrdStatus::Ok
        }
        _ => fail(KrdStatus::NullPointer, "null argument"),
    })
}

/// Writes whether the path blew up and, if so, the blow-up time (NaN otherwise).
///
/// # Safety
/// `sim` must be a live handle or null; `blown_up` and `tau` must be writable.
#[no_mangle]
pub unsafe extern "C" fn krd_simulation_blowup(sim: *const KrdSimulation, blown_up: *mut bool, tau: *mut f64) -> KrdStatus {
    guard(|| match (sim.as_ref(), blown_up.is_null() || tau.is_null()) {
        (Some(s), false) => {
            *blown_up = s.state.blown_up.is_some();
            *tau = s.state.blown_up.unwrap_or(f64::NAN);
            KrdStatus::Ok
        }
        _ => fail(KrdStatus::NullPointer, "null argument"),
    })
}

/// Number of species and grid points per species.
///
/// # Safety
/// `sim` must be a live handle or null; `species` and `points` must be writable.
#[no_mangle]
pub unsafe extern "C" fn krd_simulation_shape(sim: *const KrdSimulation, species: *mut usize, points: *mut usize) -> KrdStatus {
    guard(|| match (sim.as_ref(), species.is_null() || points.is_null()) {
        (Some(s), false) => {
            *species = s.state.grid_fields.len();
            *points = s.solver.grid().len();
            KrdStatus::Ok
        }
        _ => fail(KrdStatus::NullPointer, "null argument"),
    })
}

/// Copies the grid values of one species (row-major) into `buf` of length `len`.
///
/// # Safety
/// `sim` must be a live handle or null; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn krd_simulation_field(sim: *const KrdSimulation, species: usize, buf: *mut f64, len: usize) -> KrdStatus {
    guard(|| {
        let Some(s) = sim.as_ref() else {
            return fail(KrdStatus::NullPointer, "sim is null");
        };
        if buf.is_null() {
            return fail(KrdStatus::NullPointer, "buf is null");
        }
        let Some(field) = s.state.grid_fields.get(species) else {
            return fail(KrdStatus::InvalidArgument, format!("species {species} out of range"));
        };
        let values = field.values();
        if len < values.len() {
            return fail(KrdStatus::BufferTooSmall, format!("need {} values, got {len}", values.len()));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
        KrdStatus::Ok
    })
}

/// Spatial mean of `v^2` for one species.
///
/// # Safety
/// `sim` must be a live handle or null; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn krd_simulation_energy(sim: *const KrdSimulation, species: usize, out: *mut f64) -> KrdStatus {
    guard(|| match (sim.as_ref(), out.is_null()) {
        (Some(s), false) => match s.state.fields.get(species) {
            Some(f) => {
                *out = f.l2_norm_sq();
                KrdStatus::Ok
            }
            None => fail(KrdStatus::InvalidArgument, format!("species {species} out of range")),
        },
        _ => fail(KrdStatus::NullPointer, "null argument"),
    })
}

/// # Safety
/// `sim` must come from [`krd_simulation_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn krd_simulation_free(sim: *mut KrdSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Interpolation exponents `(phi, psi)` for dimension `d`, growth `h` and integrability `q`.
///
/// # Safety
/// `phi` and `psi` must be writable.
#[no_mangle]
pub unsafe extern "C" fn krd_interp_exponents(d: usize, h: f64, q: f64, phi: *mut f64, psi: *mut f64) -> KrdStatus {
    guard(|| {
        if phi.is_null() || psi.is_null() {
            return fail(KrdStatus::NullPointer, "null argument");
        }
        let (a, b) = interp_exponents_raw(d, h, q);
        *phi = a;
        *psi = b;
        KrdStatus::Ok
    })
}

/// Smallest admissible cut-off time exponent `r_0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn krd_cutoff_r0(d: usize, h: f64, q: f64, p: f64, out: *mut f64) -> KrdStatus {
    guard(|| {
        if out.is_null() {
            return fail(KrdStatus::NullPointer, "out is null");
        }
        match cutoff_r0(d, h, q, p) {
            Ok(r0) => {
                *out = r0;
                KrdStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

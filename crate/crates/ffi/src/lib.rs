//! C ABI over the `trafficgame` simulator.
//!
//! Simulations live behind an opaque `TgSim` handle created by
//! [`tg_sim_new`] and released by [`tg_sim_free`]. Every fallible call
//! returns a [`TgStatus`]; on failure [`tg_last_error`] describes what went
//! wrong on the calling thread. Strings handed out by the library must be
//! released with [`tg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use trafficgame::estimation::{bayes_estimate, harvest_observations, minimax_estimate, ObservationBatch};
use trafficgame::snapshot::snapshot;
use trafficgame::{BehaviorModel, Error, HazardMode, SimConfig, SimState, WeibullParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    Domain = 3,
    NoData = 4,
    Invariant = 5,
    Io = 6,
    Panic = 7,
}

/// Opaque simulation handle.
pub struct TgSim {
    state: SimState,
}

/// Behavior model selector for [`TgConfig::model`].
pub const TG_MODEL_FIXED: u32 = 1;
pub const TG_MODEL_IMITATION: u32 = 2;
pub const TG_MODEL_IMPATIENCE: u32 = 3;

/// Plain-data simulation settings. Fill with [`tg_config_default`] and then
/// change what you need.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TgConfig {
    pub model: u32,
    pub seed: u64,
    pub p_new: f64,
    pub p_slow: f64,
    pub v_max: u32,
    pub max_vehicles: u64,
    pub warmup_steps: u64,
    /// DE share for the fixed model, initial DE share for imitation.
    pub p_de: f64,
    pub core_fraction: f64,
    pub tau: u64,
    pub weibull_a: f64,
    pub weibull_b: f64,
    /// 0 discrete conditional, 1 raw clipped hazard.
    pub hazard_mode: u32,
    pub clear_junction: bool,
    pub record_meetings: bool,
}

/// Counts and means after the most recent step. Means are NaN when no
/// vehicle contributes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TgMetrics {
    pub step: u64,
    pub n_co: u64,
    pub n_de: u64,
    pub queued: u64,
    pub mean_speed_all: f64,
    pub mean_speed_co: f64,
    pub mean_speed_de: f64,
    pub ratio_q: f64,
    pub mean_wait: f64,
    pub conflicts_step: u64,
    pub type_changes_step: u64,
    pub conflicts_total: u64,
    pub type_changes_total: u64,
    pub meetings_logged: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: TgStatus, msg: impl Into<String>) -> TgStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> TgStatus {
    let status = match &e {
        Error::Config(_) | Error::Parse(_) => TgStatus::InvalidConfig,
        Error::Domain(_) => TgStatus::Domain,
        Error::NoData(_) => TgStatus::NoData,
        Error::Invariant(_) => TgStatus::Invariant,
        Error::Io(_) => TgStatus::Io,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> TgStatus) -> TgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(TgStatus::Panic, "internal panic"),
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code; unknown codes give "unknown status".
#[no_mangle]
pub extern "C" fn tg_status_name(status: i32) -> *const c_char {
    let s: &'static CStr = match status {
        0 => c"ok",
        1 => c"null pointer",
        2 => c"invalid configuration",
        3 => c"argument out of domain",
        4 => c"no data",
        5 => c"invariant violated",
        6 => c"i/o error",
        7 => c"internal panic",
        _ => c"unknown status",
    };
    s.as_ptr()
}

/// # Safety
/// `out` must be NULL or point to writable memory for one `TgConfig`.
#[no_mangle]
pub unsafe extern "C" fn tg_config_default(model: u32, out: *mut TgConfig) -> TgStatus {
    let Some(out) = (unsafe { out.as_mut() }) else {
        return fail(TgStatus::NullPointer, "out is NULL");
    };
    if !(TG_MODEL_FIXED..=TG_MODEL_IMPATIENCE).contains(&model) {
        return fail(TgStatus::InvalidConfig, format!("unknown model {model}"));
    }
    let base = SimConfig::new(BehaviorModel::FixedRatio { p_co: 1.0 });
    let w = WeibullParams::default();
    *out = TgConfig {
        model,
        seed: base.seed,
        p_new: base.p_new,
        p_slow: base.p_slow,
        v_max: base.v_max,
        max_vehicles: base.max_vehicles as u64,
        warmup_steps: base.warmup_steps,
        p_de: 0.25,
        core_fraction: 0.0,
        tau: 500,
        weibull_a: w.a,
        weibull_b: w.b,
        hazard_mode: 0,
        clear_junction: base.clear_junction,
        record_meetings: false,
    };
    TgStatus::Ok
}

fn sim_config(c: &TgConfig) -> Result<SimConfig, Error> {
    let behavior = match c.model {
        TG_MODEL_FIXED => BehaviorModel::FixedRatio { p_co: 1.0 - c.p_de },
        TG_MODEL_IMITATION => BehaviorModel::Imitation {
            initial_p_de: c.p_de,
            core_fraction: c.core_fraction,
            tau: c.tau,
        },
        TG_MODEL_IMPATIENCE => BehaviorModel::Impatience {
            weibull: WeibullParams::new(c.weibull_a, c.weibull_b)?,
            hazard_mode: match c.hazard_mode {
                0 => HazardMode::DiscreteConditional,
                1 => HazardMode::RawClipped,
                m => return Err(Error::Config(format!("unknown hazard mode {m}"))),
            },
        },
        m => return Err(Error::Config(format!("unknown model {m}"))),
    };
    let mut s = SimConfig::new(behavior);
    s.seed = c.seed;
    s.p_new = c.p_new;
    s.p_slow = c.p_slow;
    s.v_max = c.v_max;
    s.max_vehicles = usize::try_from(c.max_vehicles).map_err(|_| Error::Config("max_vehicles too large".into()))?;
    s.warmup_steps = c.warmup_steps;
    s.clear_junction = c.clear_junction;
    s.record_meetings = c.record_meetings;
    Ok(s)
}

/// Creates a simulation. On success `*out` owns a handle for [`tg_sim_free`].
///
/// # Safety
/// `config` must be NULL or point to a valid `TgConfig`; `out` must be NULL
/// or writable.
#[no_mangle]
pub unsafe extern "C" fn tg_sim_new(config: *const TgConfig, out: *mut *mut TgSim) -> TgStatus {
    guard(|| {
        let (Some(c), false) = (unsafe { config.as_ref() }, out.is_null()) else {
            return fail(TgStatus::NullPointer, "config or out is NULL");
        };
        match sim_config(c).and_then(SimState::new) {
            Ok(state) => {
                unsafe { *out = Box::into_raw(Box::new(TgSim { state })) };
                TgStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `sim` must be NULL or a handle from [`tg_sim_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tg_sim_free(sim: *mut TgSim) {
    if !sim.is_null() {
        drop(unsafe { Box::from_raw(sim) });
    }
}

/// Advances `steps` time steps. With `check` set, lattice invariants are
/// verified after every step and the first violation stops the run.
///
/// # Safety
/// `sim` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tg_sim_step(sim: *mut TgSim, steps: u64, check: bool) -> TgStatus {
    guard(|| {
        let Some(sim) = (unsafe { sim.as_mut() }) else {
            return fail(TgStatus::NullPointer, "sim is NULL");
        };
        for _ in 0..steps {
            sim.state.step_network();
            if check {
                if let Err(e) = sim.state.check_invariants() {
                    return from_error(e);
                }
            }
        }
        TgStatus::Ok
    })
}

/// # Safety
/// `sim` must be NULL or a live handle; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn tg_sim_metrics(sim: *const TgSim, out: *mut TgMetrics) -> TgStatus {
    guard(|| {
        let (Some(sim), Some(out)) = (unsafe { sim.as_ref() }, unsafe { out.as_mut() }) else {
            return fail(TgStatus::NullPointer, "sim or out is NULL");
        };
        let s = &sim.state;
        let m = s.collect_step(s.step_count());
        let nan = |x: Option<f64>| x.unwrap_or(f64::NAN);
        *out = TgMetrics {
            step: s.step_count(),
            n_co: m.n_co as u64,
            n_de: m.n_de as u64,
            queued: s.queue_len() as u64,
            mean_speed_all: nan(m.mean_speed_all),
            mean_speed_co: nan(m.mean_speed_co),
            mean_speed_de: nan(m.mean_speed_de),
            ratio_q: nan(m.ratio_q),
            mean_wait: nan(m.mean_wait),
            conflicts_step: m.n_conflicts_step,
            type_changes_step: m.n_type_changes_step,
            conflicts_total: s.conflicts_total(),
            type_changes_total: s.type_changes_total(),
            meetings_logged: s.meeting_log().len() as u64,
        };
        TgStatus::Ok
    })
}

/// Text picture of the lattice. Release `*out` with [`tg_string_free`].
///
/// # Safety
/// `sim` must be NULL or a live handle; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn tg_sim_snapshot(sim: *const TgSim, out: *mut *mut c_char) -> TgStatus {
    guard(|| {
        let (Some(sim), false) = (unsafe { sim.as_ref() }, out.is_null()) else {
            return fail(TgStatus::NullPointer, "sim or out is NULL");
        };
        match CString::new(snapshot(&sim.state)) {
            Ok(c) => {
                unsafe { *out = c.into_raw() };
                TgStatus::Ok
            }
            Err(_) => fail(TgStatus::Panic, "snapshot contains NUL"),
        }
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn tg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Minimax and Bayes estimates of the CO share from the meetings logged so
/// far (requires `record_meetings`). Either output pointer may be NULL.
///
/// # Safety
/// `sim` must be NULL or a live handle; outputs must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn tg_sim_estimate(
    sim: *const TgSim,
    prior_alpha: f64,
    prior_beta: f64,
    minimax: *mut f64,
    bayes: *mut f64,
) -> TgStatus {
    guard(|| {
        let Some(sim) = (unsafe { sim.as_ref() }) else {
            return fail(TgStatus::NullPointer, "sim is NULL");
        };
        let batch = match harvest_observations(sim.state.meeting_log()) {
            Ok(b) => b,
            Err(e) => return from_error(e),
        };
        unsafe { write_estimates(batch, prior_alpha, prior_beta, minimax, bayes) }
    })
}

/// Estimates from `n` meetings with `sigma_xi` CO drivers among them.
///
/// # Safety
/// Outputs must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn tg_estimate(
    n: u64,
    sigma_xi: u64,
    prior_alpha: f64,
    prior_beta: f64,
    minimax: *mut f64,
    bayes: *mut f64,
) -> TgStatus {
    guard(|| match ObservationBatch::new(n, sigma_xi) {
        Ok(batch) => unsafe { write_estimates(batch, prior_alpha, prior_beta, minimax, bayes) },
        Err(e) => from_error(e),
    })
}

unsafe fn write_estimates(
    batch: ObservationBatch,
    prior_alpha: f64,
    prior_beta: f64,
    minimax: *mut f64,
    bayes: *mut f64,
) -> TgStatus {
    let m = match minimax_estimate(batch) {
        Ok(v) => v,
        Err(e) => return from_error(e),
    };
    let b = match bayes_estimate(batch, prior_alpha, prior_beta) {
        Ok(v) => v,
        Err(e) => return from_error(e),
    };
    if let Some(p) = unsafe { minimax.as_mut() } {
        *p = m;
    }
    if let Some(p) = unsafe { bayes.as_mut() } {
        *p = b;
    }
    TgStatus::Ok
}

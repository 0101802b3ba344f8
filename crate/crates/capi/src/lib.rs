//! C ABI for the surface-assisted beamforming library.
//!
//! The surface gives callers an opaque scenario handle, a single-trial
//! entry point, and two scalar helpers, which is enough to embed the
//! pipeline in simulators written in C, Python (ctypes/cffi), or Julia.
//!
//! Conventions:
//!
//! - every fallible call returns a `BDRIS_*` status code; `0` is success
//! - `bdris_last_error` retrieves a UTF-8 message for the calling thread's
//!   most recent failure
//! - handles from `bdris_scenario_new_default` / `bdris_scenario_from_toml`
//!   must be released with `bdris_scenario_free`
//! - panics never cross the boundary; they surface as `BDRIS_ERR_PANIC`
//!
//! The generated header lands in `include/bdris.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use bdris_core::channel::ScenarioConfig;
use bdris_core::linalg::derive_seed;
use bdris_core::runner::{parse_scenario_toml, run_trial, Stage1Choice, Stage2Choice};
use bdris_core::Error;

/// Success.
pub const BDRIS_OK: c_int = 0;
/// Null pointer or out-of-range argument.
pub const BDRIS_ERR_ARG: c_int = 1;
/// Scenario rejected by validation or unparsable input.
pub const BDRIS_ERR_CONFIG: c_int = 2;
/// Solver or factorization failure.
pub const BDRIS_ERR_NUMERICAL: c_int = 3;
/// Internal panic caught at the boundary.
pub const BDRIS_ERR_PANIC: c_int = 4;

/// Stage-one solver: Riemannian descent on the full surface.
pub const BDRIS_STAGE1_MO: c_int = 0;
/// Stage-one solver: relax-then-project least squares.
pub const BDRIS_STAGE1_RTP: c_int = 1;
/// Stage-one solver: per-group block descent (needs `group_size`).
pub const BDRIS_STAGE1_GROUP: c_int = 2;
/// Stage-one solver: coordinate descent over diagonal phases.
pub const BDRIS_STAGE1_DIAG: c_int = 3;
/// Stage-one solver: joint alternation with the beamformers.
pub const BDRIS_STAGE1_JOINT: c_int = 4;

/// Stage-two design: per-link SVD with waterfilling.
pub const BDRIS_STAGE2_SVD: c_int = 0;
/// Stage-two design: leakage-minimizing subspace alternation.
pub const BDRIS_STAGE2_MINIL: c_int = 1;
/// Stage-two design: per-stream SINR maximization.
pub const BDRIS_STAGE2_MAXSINR: c_int = 2;
/// Stage-two design: sum-rate surrogate ascent.
pub const BDRIS_STAGE2_MAXSR: c_int = 3;

/// Opaque scenario handle.
pub struct BdrisScenario {
    cfg: ScenarioConfig,
}

/// Metrics of one Monte-Carlo trial.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BdrisTrialMetrics {
    /// Residual interference leakage after stage one (linear, mW).
    pub il: f64,
    /// Interference-to-noise change versus the surface switched off (dB).
    pub delta_inr_db: f64,
    /// Sum rate over all links (bit/s/Hz).
    pub sum_rate: f64,
    /// Stage-one iteration count.
    pub iters_stage1: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn code_of(err: &Error) -> c_int {
    match err.exit_code() {
        2 => BDRIS_ERR_CONFIG,
        _ => BDRIS_ERR_NUMERICAL,
    }
}

fn fail(err: &Error) -> c_int {
    set_last_error(&err.to_string());
    code_of(err)
}

fn arg_error(msg: &str) -> c_int {
    set_last_error(msg);
    BDRIS_ERR_ARG
}

/// Run `f` with panics converted to `BDRIS_ERR_PANIC`.
fn guarded(f: impl FnOnce() -> c_int) -> c_int {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_last_error("internal panic");
            BDRIS_ERR_PANIC
        }
    }
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `cap` bytes). Returns the full message length in bytes
/// excluding the NUL; call with a null `buf` or `cap` 0 to query the length.
#[no_mangle]
pub extern "C" fn bdris_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Allocate a scenario with the default three-link desk-scale geometry.
#[no_mangle]
pub extern "C" fn bdris_scenario_new_default() -> *mut BdrisScenario {
    Box::into_raw(Box::new(BdrisScenario { cfg: ScenarioConfig::default() }))
}

/// Parse a scenario from TOML text (same keys as the CLI experiment file,
/// sweeps ignored). Returns null and sets the thread error on failure.
///
/// # Safety
/// `text` must be a valid NUL-terminated C string.
#[no_mangle]
pub unsafe extern "C" fn bdris_scenario_from_toml(text: *const c_char) -> *mut BdrisScenario {
    if text.is_null() {
        arg_error("null text");
        return std::ptr::null_mut();
    }
    let s = match CStr::from_ptr(text).to_str() {
        Ok(s) => s,
        Err(_) => {
            arg_error("text is not valid UTF-8");
            return std::ptr::null_mut();
        }
    };
    let cfg: ScenarioConfig = match parse_scenario_toml(s) {
        Ok(c) => c,
        Err(e) => {
            set_last_error(&format!("parse error: {}", e));
            return std::ptr::null_mut();
        }
    };
    Box::into_raw(Box::new(BdrisScenario { cfg }))
}

/// Release a scenario handle. Null is a no-op.
///
/// # Safety
/// `scenario` must be null or a pointer produced by a `bdris_scenario_*`
/// constructor that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn bdris_scenario_free(scenario: *mut BdrisScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

unsafe fn with_scenario_mut(
    scenario: *mut BdrisScenario,
    f: impl FnOnce(&mut ScenarioConfig) -> c_int,
) -> c_int {
    if scenario.is_null() {
        return arg_error("null scenario");
    }
    guarded(AssertUnwindSafe(|| f(&mut (*scenario).cfg)))
}

/// Set the number of surface elements.
///
/// # Safety
/// `scenario` must be a live handle from a `bdris_scenario_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn bdris_scenario_set_m(scenario: *mut BdrisScenario, m: c_int) -> c_int {
    with_scenario_mut(scenario, |cfg| {
        if m < 1 {
            return arg_error("m must be >= 1");
        }
        cfg.m = m as usize;
        BDRIS_OK
    })
}

/// Set the transmit power per link in dBm.
///
/// # Safety
/// `scenario` must be a live handle from a `bdris_scenario_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn bdris_scenario_set_pt_dbm(
    scenario: *mut BdrisScenario,
    pt_dbm: c_double,
) -> c_int {
    with_scenario_mut(scenario, |cfg| {
        if !pt_dbm.is_finite() {
            return arg_error("pt_dbm must be finite");
        }
        cfg.pt_dbm = pt_dbm;
        BDRIS_OK
    })
}

/// Set the surface position in meters.
///
/// # Safety
/// `scenario` must be a live handle from a `bdris_scenario_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn bdris_scenario_set_position(
    scenario: *mut BdrisScenario,
    x: c_double,
    y: c_double,
    z: c_double,
) -> c_int {
    with_scenario_mut(scenario, |cfg| {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return arg_error("position must be finite");
        }
        cfg.ris_position = [x, y, z];
        BDRIS_OK
    })
}

/// Set the master seed that trial indices are derived from.
///
/// # Safety
/// `scenario` must be a live handle from a `bdris_scenario_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn bdris_scenario_set_seed(scenario: *mut BdrisScenario, seed: u64) -> c_int {
    with_scenario_mut(scenario, |cfg| {
        cfg.seed = seed;
        BDRIS_OK
    })
}

/// Free-space-plus-exponent path loss in dB at `distance_m` meters.
#[no_mangle]
pub extern "C" fn bdris_path_loss_db(distance_m: c_double, alpha: c_double) -> c_double {
    bdris_core::channel::path_loss_db(distance_m, alpha).unwrap_or(f64::NAN)
}

/// Thermal noise power in dBm for the given bandwidth and noise figure.
#[no_mangle]
pub extern "C" fn bdris_noise_power_dbm(
    bandwidth_hz: c_double,
    noise_figure_db: c_double,
) -> c_double {
    bdris_core::channel::noise_power_dbm(bandwidth_hz, noise_figure_db).unwrap_or(f64::NAN)
}

fn parse_stage1(stage1: c_int, group_size: c_int) -> Result<Stage1Choice, c_int> {
    match stage1 {
        BDRIS_STAGE1_MO => Ok(Stage1Choice::Mo),
        BDRIS_STAGE1_RTP => Ok(Stage1Choice::Rtp),
        BDRIS_STAGE1_GROUP => {
            if group_size < 1 {
                Err(arg_error("group_size must be >= 1 for the group solver"))
            } else {
                Ok(Stage1Choice::Group(group_size as usize))
            }
        }
        BDRIS_STAGE1_DIAG => Ok(Stage1Choice::Diag),
        BDRIS_STAGE1_JOINT => Ok(Stage1Choice::Joint),
        _ => Err(arg_error("unknown stage1 code")),
    }
}

fn parse_stage2(stage2: c_int) -> Result<Stage2Choice, c_int> {
    match stage2 {
        BDRIS_STAGE2_SVD => Ok(Stage2Choice::Svd),
        BDRIS_STAGE2_MINIL => Ok(Stage2Choice::MinIl),
        BDRIS_STAGE2_MAXSINR => Ok(Stage2Choice::MaxSinr),
        BDRIS_STAGE2_MAXSR => Ok(Stage2Choice::MaxSr),
        _ => Err(arg_error("unknown stage2 code")),
    }
}

/// Run one seeded trial: draw channels, solve stage one, design stage-two
/// beamformers, and fill `out`. `trial` indexes an independent random
/// stream derived from the scenario seed; the same (scenario, trial) pair
/// always reproduces the same metrics.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer to a
/// `BdrisTrialMetrics`.
#[no_mangle]
pub unsafe extern "C" fn bdris_run_trial(
    scenario: *const BdrisScenario,
    trial: u64,
    stage1: c_int,
    group_size: c_int,
    stage2: c_int,
    out: *mut BdrisTrialMetrics,
) -> c_int {
    if scenario.is_null() {
        return arg_error("null scenario");
    }
    if out.is_null() {
        return arg_error("null out pointer");
    }
    let cfg = &(*scenario).cfg;
    let s1 = match parse_stage1(stage1, group_size) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let s2 = match parse_stage2(stage2) {
        Ok(s) => s,
        Err(code) => return code,
    };
    guarded(AssertUnwindSafe(|| {
        if let Err(e) = cfg.validate() {
            return fail(&e);
        }
        if let Stage1Choice::Group(mg) = s1 {
            if cfg.m % mg != 0 {
                return arg_error("group_size must divide m");
            }
        }
        // same stream mapping as sweep 0 of the batch runner
        let seed = derive_seed(&[cfg.seed, 0, trial]);
        match run_trial(cfg, s1, s2, seed, 1) {
            Ok((res, iters, _w1, _w2)) => {
                *out = BdrisTrialMetrics {
                    il: res.il,
                    delta_inr_db: res.delta_inr_db,
                    sum_rate: res.sum_rate,
                    iters_stage1: iters.min(i32::MAX as usize) as i32,
                };
                BDRIS_OK
            }
            Err(e) => fail(&e),
        }
    }))
}

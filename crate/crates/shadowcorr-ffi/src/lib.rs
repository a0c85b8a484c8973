//! C ABI for the shadowcorr library.
//!
//! Conventions:
//! * every fallible function returns an [`ScStatus`]; `SC_STATUS_OK` (0)
//!   means success and the out-parameters are filled;
//! * on failure a thread-local message is set, readable via
//!   [`sc_last_error_message`] until the next failing call on the same
//!   thread;
//! * scenario objects are opaque handles created with
//!   [`sc_scenario_new`] and released with [`sc_scenario_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use shadowcorr::{
    dual_failure_probability, event_correlation, invert_correlation, max_event_correlation,
    normal_pdf, q_function, q_inverse, table_one, DualLinkScenario, Error, LinkBudget,
    LinkReliability, McMethod, ShadowingCorrelation, SimConfig, StandardScore, UnitProbability,
};

/// Status of an FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScStatus {
    Ok = 0,
    /// An input was outside the operation's domain.
    Domain = 1,
    /// A degenerate scenario or correlation (constant indicator, |rho_h| = 1).
    Degenerate = 2,
    /// The inversion target is outside the attainable range.
    Unattainable = 3,
    /// Too few Monte Carlo events to form an estimate.
    InsufficientEvents = 4,
    /// Invalid simulation configuration.
    InvalidConfig = 5,
    /// Internal numerical failure.
    Internal = 6,
    /// A required pointer argument was null.
    NullPointer = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn status_of(err: &Error) -> ScStatus {
    match err {
        Error::Domain { .. } => ScStatus::Domain,
        Error::DegenerateCorrelation { .. }
        | Error::NotDegenerate { .. }
        | Error::DegenerateScenario { .. } => ScStatus::Degenerate,
        Error::TargetUnattainable { .. } => ScStatus::Unattainable,
        Error::InsufficientEvents { .. } => ScStatus::InsufficientEvents,
        Error::InvalidConfig(_) => ScStatus::InvalidConfig,
        Error::Internal(_) => ScStatus::Internal,
    }
}

fn fail(err: &Error) -> ScStatus {
    set_error(&err.to_string());
    status_of(err)
}

fn guard<F: FnOnce() -> ScStatus>(f: F) -> ScStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("panic across FFI boundary");
            ScStatus::Internal
        }
    }
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

// ---------------------------------------------------------------------------
// Scalar primitives
// ---------------------------------------------------------------------------

/// Standard-normal density.
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn sc_normal_pdf(x: f64, out: *mut f64) -> ScStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return ScStatus::NullPointer;
        }
        match StandardScore::new(x) {
            Ok(score) => {
                unsafe { *out = normal_pdf(score) };
                ScStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Upper-tail probability Q(x) = P(Z > x).
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn sc_q_function(x: f64, out: *mut f64) -> ScStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return ScStatus::NullPointer;
        }
        match StandardScore::new(x) {
            Ok(score) => {
                unsafe { *out = q_function(score).value() };
                ScStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Inverse Q-function for p in (0, 1).
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn sc_q_inverse(p: f64, out: *mut f64) -> ScStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return ScStatus::NullPointer;
        }
        let result = UnitProbability::new(p).and_then(q_inverse);
        match result {
            Ok(score) => {
                unsafe { *out = score.value() };
                ScStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Joint upper-orthant probability P(X1 > b1, X2 > b2) under shadowing
/// correlation rho_h.
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn sc_upper_tail(b1: f64, b2: f64, rho_h: f64, out: *mut f64) -> ScStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return ScStatus::NullPointer;
        }
        let result = (|| {
            let b1 = StandardScore::new(b1)?;
            let b2 = StandardScore::new(b2)?;
            let rho = ShadowingCorrelation::new(rho_h)?;
            shadowcorr::upper_tail(b1, b2, rho)
        })();
        match result {
            Ok(orthant) => {
                unsafe { *out = orthant.value.value() };
                ScStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Largest event correlation attainable for the given per-link failure
/// probabilities.
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn sc_max_event_correlation(eps1: f64, eps2: f64, out: *mut f64) -> ScStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return ScStatus::NullPointer;
        }
        let result = (|| {
            let e1 = UnitProbability::new(eps1)?;
            let e2 = UnitProbability::new(eps2)?;
            max_event_correlation(e1, e2)
        })();
        match result {
            Ok(v) => {
                unsafe { *out = v };
                ScStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// rho_h whose forward image equals `rho_target` for the given marginals.
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn sc_invert_correlation(
    rho_target: f64,
    eps1: f64,
    eps2: f64,
    out: *mut f64,
) -> ScStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return ScStatus::NullPointer;
        }
        let result = (|| {
            let e1 = UnitProbability::new(eps1)?;
            let e2 = UnitProbability::new(eps2)?;
            invert_correlation(rho_target, e1, e2)
        })();
        match result {
            Ok(rho_h) => {
                unsafe { *out = rho_h.value() };
                ScStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// The reference mapping table at eps = 1e-4: fills two arrays of length 8
/// with the tabulated rho_h values and the corresponding rho values.
///
/// # Safety
/// `rho_h_out` and `rho_out` must point to writable arrays of 8 doubles.
#[no_mangle]
pub unsafe extern "C" fn sc_table(rho_h_out: *mut f64, rho_out: *mut f64) -> ScStatus {
    guard(|| {
        if rho_h_out.is_null() || rho_out.is_null() {
            set_error("output array is null");
            return ScStatus::NullPointer;
        }
        for (i, (rho_h, rho)) in table_one().into_iter().enumerate() {
            unsafe {
                *rho_h_out.add(i) = rho_h.value();
                *rho_out.add(i) = rho;
            }
        }
        ScStatus::Ok
    })
}

// ---------------------------------------------------------------------------
// Scenario handle
// ---------------------------------------------------------------------------

/// Opaque dual-link scenario under construction.
pub struct ScScenario {
    links: [Option<LinkReliability>; 2],
    rho_h: Option<f64>,
}

/// Monte Carlo estimator selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScMethod {
    Plain = 0,
    Importance = 1,
}

/// Forward-mapping outputs for a scenario.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ScCorrelation {
    pub beta1: f64,
    pub beta2: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub rho_h: f64,
    pub joint_failure: f64,
    pub rho: f64,
    pub sigma_ind1: f64,
    pub sigma_ind2: f64,
}

/// A Monte Carlo estimate with its standard error.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ScEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: u64,
}

/// Create an empty scenario. Free with [`sc_scenario_free`].
#[no_mangle]
pub extern "C" fn sc_scenario_new() -> *mut ScScenario {
    Box::into_raw(Box::new(ScScenario {
        links: [None, None],
        rho_h: None,
    }))
}

/// Release a scenario created by [`sc_scenario_new`].
///
/// # Safety
/// `scenario` must be a pointer returned by [`sc_scenario_new`] that has
/// not been freed yet, or null.
#[no_mangle]
pub unsafe extern "C" fn sc_scenario_free(scenario: *mut ScScenario) {
    if !scenario.is_null() {
        drop(unsafe { Box::from_raw(scenario) });
    }
}

unsafe fn with_scenario<F>(scenario: *mut ScScenario, f: F) -> ScStatus
where
    F: FnOnce(&mut ScScenario) -> ScStatus,
{
    if scenario.is_null() {
        set_error("scenario is null");
        return ScStatus::NullPointer;
    }
    f(unsafe { &mut *scenario })
}

fn check_link_index(index: u32) -> Result<usize, ScStatus> {
    if index < 2 {
        Ok(index as usize)
    } else {
        set_error("link index must be 0 or 1");
        Err(ScStatus::Domain)
    }
}

/// Specify link `index` (0 or 1) by its normalized margin.
///
/// # Safety
/// `scenario` must be a live handle from [`sc_scenario_new`].
#[no_mangle]
pub unsafe extern "C" fn sc_scenario_set_link_beta(
    scenario: *mut ScScenario,
    index: u32,
    beta: f64,
) -> ScStatus {
    guard(|| {
        unsafe {
            with_scenario(scenario, |s| {
                let i = match check_link_index(index) {
                    Ok(i) => i,
                    Err(st) => return st,
                };
                match StandardScore::new(beta) {
                    Ok(b) => {
                        s.links[i] = Some(LinkReliability::from_beta(b));
                        ScStatus::Ok
                    }
                    Err(e) => fail(&e),
                }
            })
        }
    })
}

/// Specify link `index` (0 or 1) by its failure probability.
///
/// # Safety
/// `scenario` must be a live handle from [`sc_scenario_new`].
#[no_mangle]
pub unsafe extern "C" fn sc_scenario_set_link_epsilon(
    scenario: *mut ScScenario,
    index: u32,
    epsilon: f64,
) -> ScStatus {
    guard(|| {
        unsafe {
            with_scenario(scenario, |s| {
                let i = match check_link_index(index) {
                    Ok(i) => i,
                    Err(st) => return st,
                };
                let result = UnitProbability::new(epsilon).and_then(LinkReliability::from_epsilon);
                match result {
                    Ok(l) => {
                        s.links[i] = Some(l);
                        ScStatus::Ok
                    }
                    Err(e) => fail(&e),
                }
            })
        }
    })
}

/// Specify link `index` (0 or 1) by its link budget (dBm/dB).
///
/// # Safety
/// `scenario` must be a live handle from [`sc_scenario_new`].
#[no_mangle]
pub unsafe extern "C" fn sc_scenario_set_link_budget(
    scenario: *mut ScScenario,
    index: u32,
    p_t_dbm: f64,
    p_l_db: f64,
    p_th_dbm: f64,
    sigma_db: f64,
) -> ScStatus {
    guard(|| {
        unsafe {
            with_scenario(scenario, |s| {
                let i = match check_link_index(index) {
                    Ok(i) => i,
                    Err(st) => return st,
                };
                let result = LinkBudget::new(p_t_dbm, p_l_db, p_th_dbm, sigma_db)
                    .and_then(|b| LinkReliability::from_budget(&b));
                match result {
                    Ok(l) => {
                        s.links[i] = Some(l);
                        ScStatus::Ok
                    }
                    Err(e) => fail(&e),
                }
            })
        }
    })
}

/// Set the shadowing cross-correlation.
///
/// # Safety
/// `scenario` must be a live handle from [`sc_scenario_new`].
#[no_mangle]
pub unsafe extern "C" fn sc_scenario_set_rho_h(scenario: *mut ScScenario, rho_h: f64) -> ScStatus {
    guard(|| {
        unsafe {
            with_scenario(scenario, |s| match ShadowingCorrelation::new(rho_h) {
                Ok(r) => {
                    s.rho_h = Some(r.value());
                    ScStatus::Ok
                }
                Err(e) => fail(&e),
            })
        }
    })
}

fn build(s: &ScScenario) -> Result<DualLinkScenario, ScStatus> {
    let missing = |msg: &str| {
        set_error(msg);
        ScStatus::Domain
    };
    let link1 = s.links[0].ok_or_else(|| missing("link 0 is unspecified"))?;
    let link2 = s.links[1].ok_or_else(|| missing("link 1 is unspecified"))?;
    let rho_h = s.rho_h.ok_or_else(|| missing("rho_h is unspecified"))?;
    let rho_h = ShadowingCorrelation::new(rho_h).map_err(|e| fail(&e))?;
    Ok(DualLinkScenario::new(link1, link2, rho_h))
}

/// Forward mapping for a fully specified scenario.
///
/// # Safety
/// `scenario` must be a live handle; `out` must point to a writable
/// [`ScCorrelation`].
#[no_mangle]
pub unsafe extern "C" fn sc_scenario_correlation(
    scenario: *mut ScScenario,
    out: *mut ScCorrelation,
) -> ScStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return ScStatus::NullPointer;
        }
        unsafe {
            with_scenario(scenario, |s| {
                let built = match build(s) {
                    Ok(b) => b,
                    Err(st) => return st,
                };
                match event_correlation(&built) {
                    Ok(c) => {
                        *out = ScCorrelation {
                            beta1: built.link1.beta().value(),
                            beta2: built.link2.beta().value(),
                            eps1: built.link1.epsilon().value(),
                            eps2: built.link2.epsilon().value(),
                            rho_h: built.rho_h.value(),
                            joint_failure: c.joint_failure.value(),
                            rho: c.rho,
                            sigma_ind1: c.sigma_ind1,
                            sigma_ind2: c.sigma_ind2,
                        };
                        ScStatus::Ok
                    }
                    Err(e) => fail(&e),
                }
            })
        }
    })
}

/// Residual end-to-end failure probability under packet duplication.
///
/// # Safety
/// `scenario` must be a live handle; `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn sc_scenario_dual_failure(
    scenario: *mut ScScenario,
    out: *mut f64,
) -> ScStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return ScStatus::NullPointer;
        }
        unsafe {
            with_scenario(scenario, |s| {
                let built = match build(s) {
                    Ok(b) => b,
                    Err(st) => return st,
                };
                match dual_failure_probability(&built) {
                    Ok(p) => {
                        *out = p.value();
                        ScStatus::Ok
                    }
                    Err(e) => fail(&e),
                }
            })
        }
    })
}

/// Monte Carlo estimate of the joint failure probability.
///
/// # Safety
/// `scenario` must be a live handle; `out` must point to a writable
/// [`ScEstimate`].
#[no_mangle]
pub unsafe extern "C" fn sc_scenario_estimate_joint_failure(
    scenario: *mut ScScenario,
    n_samples: u64,
    seed: u64,
    method: ScMethod,
    batch_count: u32,
    out: *mut ScEstimate,
) -> ScStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return ScStatus::NullPointer;
        }
        unsafe {
            with_scenario(scenario, |s| {
                let built = match build(s) {
                    Ok(b) => b,
                    Err(st) => return st,
                };
                let mut cfg = SimConfig::new(
                    n_samples,
                    seed,
                    match method {
                        ScMethod::Plain => McMethod::Plain,
                        ScMethod::Importance => McMethod::Importance,
                    },
                );
                cfg.batch_count = batch_count;
                match shadowcorr::estimate_joint_failure(
                    built.link1.beta(),
                    built.link2.beta(),
                    built.rho_h,
                    &cfg,
                ) {
                    Ok(est) => {
                        *out = ScEstimate {
                            estimate: est.estimate,
                            std_error: est.std_error,
                            n_samples: est.n_samples,
                        };
                        ScStatus::Ok
                    }
                    Err(e) => fail(&e),
                }
            })
        }
    })
}

/// Monte Carlo estimate of the failure-event correlation (plain method).
///
/// # Safety
/// `scenario` must be a live handle; `out` must point to a writable
/// [`ScEstimate`].
#[no_mangle]
pub unsafe extern "C" fn sc_scenario_estimate_event_correlation(
    scenario: *mut ScScenario,
    n_samples: u64,
    seed: u64,
    batch_count: u32,
    out: *mut ScEstimate,
) -> ScStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return ScStatus::NullPointer;
        }
        unsafe {
            with_scenario(scenario, |s| {
                let built = match build(s) {
                    Ok(b) => b,
                    Err(st) => return st,
                };
                let mut cfg = SimConfig::new(n_samples, seed, McMethod::Plain);
                cfg.batch_count = batch_count;
                match shadowcorr::estimate_event_correlation(
                    built.link1.beta(),
                    built.link2.beta(),
                    built.rho_h,
                    &cfg,
                ) {
                    Ok(est) => {
                        *out = ScEstimate {
                            estimate: est.estimate,
                            std_error: est.std_error,
                            n_samples: est.n_samples,
                        };
                        ScStatus::Ok
                    }
                    Err(e) => fail(&e),
                }
            })
        }
    })
}

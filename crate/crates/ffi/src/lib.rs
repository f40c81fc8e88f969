//! C ABI over `alp-core`.
//!
//! Every fallible call returns an [`AlpStatus`] and writes its result
//! through an out-pointer. After a non-zero status,
//! [`alp_last_error_message`] describes the failure on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use alp_core::estimation::{
    estimate_count, expected_tally, EstimationError, EstimatorKind, PopulationSpec,
};
use alp_core::mechanisms::{MechanismParams, ParamError, Response, TrueValue};
use alp_core::privacy::{self, PrivacyError};
use alp_core::rng::Substream;
use alp_core::simulation::{run_epoch, SimulationConfig, SimulationError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParams = 2,
    EstimationFailed = 3,
    PrivacyFailed = 4,
    SimulationFailed = 5,
    InvalidArgument = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlpEstimator {
    FromYes = 0,
    FromNo = 1,
    FromBottom = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlpResponse {
    Yes = 0,
    No = 1,
    Bottom = 2,
}

/// Opaque, validated mechanism parameters.
pub struct AlpParams(MechanismParams);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AlpEpsilon {
    pub epsilon_one: f64,
    pub epsilon_two: f64,
    pub epsilon_dp: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AlpCounts {
    pub yes: f64,
    pub no: f64,
    pub bottom: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AlpTally {
    pub yes: u64,
    pub no: u64,
    pub bottom: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AlpEstimate {
    pub point: f64,
    pub sigma: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// 1 when the raw point lies outside `[0, DO]`.
    pub out_of_range: u8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AlpCrowd {
    pub expected_noisy_yes: f64,
    pub threshold_at_confidence: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let message = CString::new(message.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

struct Failure(AlpStatus, String);

impl From<ParamError> for Failure {
    fn from(e: ParamError) -> Self {
        Failure(AlpStatus::InvalidParams, format!("{}: {e}", e.code()))
    }
}

impl From<EstimationError> for Failure {
    fn from(e: EstimationError) -> Self {
        let status = match e {
            EstimationError::Param(_) => AlpStatus::InvalidParams,
            _ => AlpStatus::EstimationFailed,
        };
        Failure(status, format!("{}: {e}", e.code()))
    }
}

impl From<PrivacyError> for Failure {
    fn from(e: PrivacyError) -> Self {
        Failure(AlpStatus::PrivacyFailed, format!("{}: {e}", e.code()))
    }
}

impl From<SimulationError> for Failure {
    fn from(e: SimulationError) -> Self {
        Failure(AlpStatus::SimulationFailed, format!("{}: {e}", e.code()))
    }
}

fn null(what: &str) -> Failure {
    Failure(AlpStatus::NullPointer, format!("{what} is null"))
}

/// Run `f`, translate its error or panic into a status, and record the message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AlpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AlpStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AlpStatus::Panic
        }
    }
}

unsafe fn params<'a>(p: *const AlpParams) -> Result<&'a MechanismParams, Failure> {
    p.as_ref().map(|p| &p.0).ok_or_else(|| null("params"))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    let out = out.as_mut().ok_or_else(|| null("output pointer"))?;
    *out = value;
    Ok(())
}

/// Validate six mechanism parameters and allocate a handle.
///
/// # Safety
/// `out` must be valid for writes. Free the handle with [`alp_params_free`].
#[no_mangle]
pub unsafe extern "C" fn alp_params_new(
    pi_s_yes1: f64,
    pi_s_yes2: f64,
    pi_s_no: f64,
    pi_1: f64,
    pi_2: f64,
    pi_3: f64,
    out: *mut *mut AlpParams,
) -> AlpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let p = MechanismParams::new(pi_s_yes1, pi_s_yes2, pi_s_no, pi_1, pi_2, pi_3)?;
        *out = Box::into_raw(Box::new(AlpParams(p)));
        Ok(())
    })
}

/// Handle for (0.45, 0.50, 0.068, 0.95, 0.98, 0.98).
#[no_mangle]
pub extern "C" fn alp_params_reference() -> *mut AlpParams {
    Box::into_raw(Box::new(AlpParams(MechanismParams::reference())))
}

/// # Safety
/// `params` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn alp_params_free(params: *mut AlpParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// # Safety
/// `params` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn alp_epsilon(params: *const AlpParams, out: *mut AlpEpsilon) -> AlpStatus {
    guard(|| {
        let r = privacy::epsilon_dp(self::params(params)?)?;
        write(
            out,
            AlpEpsilon {
                epsilon_one: r.epsilon_one,
                epsilon_two: r.epsilon_two,
                epsilon_dp: r.epsilon_dp,
            },
        )
    })
}

/// # Safety
/// `params` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn alp_expected_tally(
    params: *const AlpParams,
    yes_count: u64,
    no_count: u64,
    out: *mut AlpCounts,
) -> AlpStatus {
    guard(|| {
        let c = expected_tally(
            self::params(params)?,
            PopulationSpec::new(yes_count, no_count),
        );
        write(
            out,
            AlpCounts {
                yes: c.yes,
                no: c.no,
                bottom: c.bottom,
            },
        )
    })
}

/// Estimate YES from an observed tally with one of the single-count estimators.
///
/// # Safety
/// `params` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn alp_estimate(
    params: *const AlpParams,
    estimator: AlpEstimator,
    tally: AlpCounts,
    confidence: f64,
    out: *mut AlpEstimate,
) -> AlpStatus {
    guard(|| {
        let kind = match estimator {
            AlpEstimator::FromYes => EstimatorKind::FromYes,
            AlpEstimator::FromNo => EstimatorKind::FromNo,
            AlpEstimator::FromBottom => EstimatorKind::FromBottom,
        };
        let counts = alp_core::estimation::Counts::new(tally.yes, tally.no, tally.bottom);
        let e = estimate_count(kind, counts, self::params(params)?, confidence)?;
        write(
            out,
            AlpEstimate {
                point: e.point,
                sigma: e.sigma,
                ci_low: e.ci_low,
                ci_high: e.ci_high,
                out_of_range: e.out_of_range as u8,
            },
        )
    })
}

/// `P[X >= k]` for `X ~ Binomial(n, p)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn alp_binomial_ccdf(n: u64, p: f64, k: u64, out: *mut f64) -> AlpStatus {
    guard(|| {
        if !(0.0..=1.0).contains(&p) {
            return Err(Failure(
                AlpStatus::InvalidArgument,
                format!("p = {p} is outside [0, 1]"),
            ));
        }
        write(out, privacy::binomial_ccdf(n, p, k))
    })
}

/// # Safety
/// `params` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn alp_crowd_size(
    params: *const AlpParams,
    no_population: u64,
    confidence: f64,
    out: *mut AlpCrowd,
) -> AlpStatus {
    guard(|| {
        let r = privacy::crowd_size(no_population, self::params(params)?, confidence)?;
        write(
            out,
            AlpCrowd {
                expected_noisy_yes: r.expected_noisy_yes,
                threshold_at_confidence: r.threshold_at_confidence,
            },
        )
    })
}

/// # Safety
/// `params` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn alp_expected_locations(
    params: *const AlpParams,
    num_locations: u64,
    out: *mut f64,
) -> AlpStatus {
    guard(|| {
        write(
            out,
            privacy::expected_locations(num_locations, self::params(params)?)?,
        )
    })
}

/// Privatize one owner's value with a counter-based stream keyed by `seed`
/// and `stream`.
///
/// # Safety
/// `params` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn alp_privatize(
    params: *const AlpParams,
    value_is_yes: bool,
    seed: u64,
    stream: u64,
    out: *mut AlpResponse,
) -> AlpStatus {
    guard(|| {
        let value = if value_is_yes {
            TrueValue::Yes
        } else {
            TrueValue::No
        };
        let mut rng = Substream::from_raw(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let r = match self::params(params)?.privatize(value, &mut rng) {
            Response::Yes => AlpResponse::Yes,
            Response::No => AlpResponse::No,
            Response::Bottom => AlpResponse::Bottom,
        };
        write(out, r)
    })
}

/// Simulate one epoch of `yes_count + no_count` owners. Matches the
/// simulator's tallies for the same seed and epoch.
///
/// # Safety
/// `params` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn alp_run_epoch(
    params: *const AlpParams,
    seed: u64,
    epoch: u64,
    yes_count: u64,
    no_count: u64,
    out: *mut AlpTally,
) -> AlpStatus {
    guard(|| {
        let pop = PopulationSpec::new(yes_count, no_count);
        let config = SimulationConfig::new(*self::params(params)?, seed, pop.total());
        let tally = run_epoch(pop, &config, epoch)?.single().ok_or_else(|| {
            Failure(
                AlpStatus::SimulationFailed,
                "unexpected multi-slot tally".into(),
            )
        })?;
        write(
            out,
            AlpTally {
                yes: tally.yes,
                no: tally.no,
                bottom: tally.bottom,
            },
        )
    })
}

/// Message for the last failure on this thread. Valid until the next call
/// into this library from the same thread.
#[no_mangle]
pub extern "C" fn alp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Short name of a status code. Static; never free it.
#[no_mangle]
pub extern "C" fn alp_status_name(status: AlpStatus) -> *const c_char {
    let name: &'static CStr = match status {
        AlpStatus::Ok => c"Ok",
        AlpStatus::NullPointer => c"NullPointer",
        AlpStatus::InvalidParams => c"InvalidParams",
        AlpStatus::EstimationFailed => c"EstimationFailed",
        AlpStatus::PrivacyFailed => c"PrivacyFailed",
        AlpStatus::SimulationFailed => c"SimulationFailed",
        AlpStatus::InvalidArgument => c"InvalidArgument",
        AlpStatus::Panic => c"Panic",
    };
    name.as_ptr()
}

#[no_mangle]
pub extern "C" fn alp_version() -> *const c_char {
    const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

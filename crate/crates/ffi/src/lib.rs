//! C ABI for `excitent`.
//!
//! Every fallible call returns an [`ExStatus`] and writes its result through
//! an out-pointer. On failure the message is kept per thread and can be read
//! with [`ex_last_error_message`]. Objects are opaque handles created by
//! `ex_*_new`-style constructors and released with the matching `ex_*_free`.
//! Strings returned to the caller must be released with [`ex_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use excitent::dynamics::{decohered_dimer_state, evolve_with_vacuum};
use excitent::entanglement::{self, ExcitationProjector};
use excitent::hilbert::{DensityMatrix, FockVector, ModeDims};
use excitent::linalg::{c, CMatrix};
use excitent::states;
use excitent::transport::{self, EfficiencyReport, NetworkSpec, RobustnessSettings};
use excitent::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> ExStatus {
    match err {
        Error::Config(_) => ExStatus::Config,
        e if e.is_numerical() => ExStatus::Numerical,
        _ => ExStatus::InvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ExStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ExStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            ExStatus::NullPointer
        }
        Ok(Err(Failure::Model(err))) => {
            set_error(err.to_string());
            status_of(&err)
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(msg);
            ExStatus::InvalidArgument
        }
        Err(_) => {
            set_error("internal panic".into());
            ExStatus::Panic
        }
    }
}

enum Failure {
    Null(&'static str),
    Model(Error),
    Arg(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    // SAFETY: caller guarantees `p` is null or valid for writes
    unsafe { p.as_mut() }.ok_or(Failure::Null(what))
}

fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    // SAFETY: caller guarantees `p` is null or a live handle from this library
    unsafe { p.as_ref() }.ok_or(Failure::Null(what))
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn ex_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn ex_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ex_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Pure state of one or more truncated modes.
pub struct ExState(FockVector);

/// Leveled coherent state `|alpha_N>` on a single mode with `levels` levels.
#[no_mangle]
pub extern "C" fn ex_state_leveled_coherent(alpha_re: f64, alpha_im: f64, levels: usize, state_out: *mut *mut ExState) -> ExStatus {
    guard(|| {
        let slot = out(state_out, "state_out")?;
        let psi = states::leveled_coherent(c(alpha_re, alpha_im), levels)?;
        *slot = boxed(ExState(psi));
        Ok(())
    })
}

/// Coherent state truncated at dimension `dim`; fails if the discarded
/// weight exceeds `tail_tol`.
#[no_mangle]
pub extern "C" fn ex_state_coherent(alpha_re: f64, alpha_im: f64, dim: usize, tail_tol: f64, state_out: *mut *mut ExState) -> ExStatus {
    guard(|| {
        let slot = out(state_out, "state_out")?;
        let psi = states::coherent_truncated(c(alpha_re, alpha_im), dim, tail_tol)?;
        *slot = boxed(ExState(psi));
        Ok(())
    })
}

/// Puts a single-mode state next to a vacuum mode of dimension `dim_b` and
/// applies the exchange evolution for phase `gt`.
///
/// # Safety
/// `state` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ex_state_evolve_with_vacuum(state: *const ExState, dim_b: usize, gt: f64, state_out: *mut *mut ExState) -> ExStatus {
    guard(|| {
        let s = handle(state, "state")?;
        let slot = out(state_out, "state_out")?;
        let evolved = evolve_with_vacuum(&s.0, dim_b, gt)?;
        *slot = boxed(ExState(evolved));
        Ok(())
    })
}

/// Total Hilbert-space dimension of the state.
///
/// # Safety
/// `state` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ex_state_dimension(state: *const ExState, dim_out: *mut usize) -> ExStatus {
    guard(|| {
        *out(dim_out, "dim_out")? = handle(state, "state")?.0.dims().total();
        Ok(())
    })
}

/// Copies the amplitudes into `re` and `im`, each of length `len` (which
/// must equal the state dimension).
///
/// # Safety
/// `re` and `im` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ex_state_amplitudes(state: *const ExState, re: *mut f64, im: *mut f64, len: usize) -> ExStatus {
    guard(|| {
        let s = handle(state, "state")?;
        if re.is_null() || im.is_null() {
            return Err(Failure::Null("amplitude buffer"));
        }
        let amps = s.0.amps();
        if len != amps.len() {
            return Err(Failure::Arg(format!("buffer length {len} differs from dimension {}", amps.len())));
        }
        for (k, a) in amps.iter().enumerate() {
            *re.add(k) = a.re;
            *im.add(k) = a.im;
        }
        Ok(())
    })
}

/// Pure-state concurrence between mode 0 and the remaining modes.
///
/// # Safety
/// `state` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ex_state_concurrence(state: *const ExState, value_out: *mut f64) -> ExStatus {
    guard(|| {
        let s = handle(state, "state")?;
        let slot = out(value_out, "value_out")?;
        *slot = entanglement::concurrence_pure(&s.0, &[0])?.value;
        Ok(())
    })
}

/// Projects onto the listed total-excitation numbers and renormalizes;
/// `weight_out` receives the squared norm of the projection.
///
/// # Safety
/// `state` must be a live handle and `retained` valid for `count` reads.
#[no_mangle]
pub unsafe extern "C" fn ex_state_project(
    state: *const ExState,
    retained: *const usize,
    count: usize,
    state_out: *mut *mut ExState,
    weight_out: *mut f64,
) -> ExStatus {
    guard(|| {
        let s = handle(state, "state")?;
        if retained.is_null() && count > 0 {
            return Err(Failure::Null("retained"));
        }
        let keep: Vec<usize> = if count == 0 { Vec::new() } else { std::slice::from_raw_parts(retained, count).to_vec() };
        let slot = out(state_out, "state_out")?;
        let weight = out(weight_out, "weight_out")?;
        let (projected, w) = entanglement::project_renormalize(&s.0, &ExcitationProjector::new(s.0.dims().clone(), keep))?;
        *slot = boxed(ExState(projected));
        *weight = w;
        Ok(())
    })
}

/// # Safety
/// `state` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ex_state_free(state: *mut ExState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Maximal concurrence of the evolved leveled coherent state.
#[no_mangle]
pub extern "C" fn ex_cmax(alpha: f64, levels: usize, value_out: *mut f64) -> ExStatus {
    guard(|| {
        let slot = out(value_out, "value_out")?;
        *slot = entanglement::cmax(alpha, levels)?;
        Ok(())
    })
}

/// Small-amplitude leading coefficient `f_N`.
#[no_mangle]
pub extern "C" fn ex_fn_estimate(levels: usize, value_out: *mut f64) -> ExStatus {
    guard(|| {
        let slot = out(value_out, "value_out")?;
        *slot = entanglement::fn_estimate(levels)?.value;
        Ok(())
    })
}

/// Wootters concurrence of a two-qubit density matrix given as 16 real and
/// 16 imaginary parts in row-major order (basis `|00>, |01>, |10>, |11>`).
///
/// # Safety
/// `re` and `im` must each be valid for 16 reads.
#[no_mangle]
pub unsafe extern "C" fn ex_concurrence_wootters(re: *const f64, im: *const f64, value_out: *mut f64) -> ExStatus {
    guard(|| {
        if re.is_null() || im.is_null() {
            return Err(Failure::Null("matrix"));
        }
        let slot = out(value_out, "value_out")?;
        let re = std::slice::from_raw_parts(re, 16);
        let im = std::slice::from_raw_parts(im, 16);
        let mat = CMatrix::from_fn(4, 4, |i, j| c(re[4 * i + j], im[4 * i + j]));
        let rho = DensityMatrix::new(ModeDims::pair(2, 2)?, mat)?;
        *slot = entanglement::concurrence_wootters(&rho)?.value;
        Ok(())
    })
}

/// Wootters concurrence of the number-decohered dimer state.
#[no_mangle]
pub extern "C" fn ex_decohered_dimer_concurrence(alpha: f64, gt: f64, value_out: *mut f64) -> ExStatus {
    guard(|| {
        let slot = out(value_out, "value_out")?;
        *slot = entanglement::concurrence_wootters(&decohered_dimer_state(alpha, gt))?.value;
        Ok(())
    })
}

/// Transport network description.
pub struct ExNetwork(NetworkSpec);

/// Parses a network from TOML text (the fields of a `[network]` table).
///
/// # Safety
/// `toml_text` must be a valid nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ex_network_from_toml(toml_text: *const c_char, network_out: *mut *mut ExNetwork) -> ExStatus {
    guard(|| {
        if toml_text.is_null() {
            return Err(Failure::Null("toml_text"));
        }
        let text = CStr::from_ptr(toml_text)
            .to_str()
            .map_err(|e| Failure::Arg(format!("config is not UTF-8: {e}")))?;
        let spec: NetworkSpec = excitent::cli::parse_toml(text)?;
        spec.validate()?;
        *out(network_out, "network_out")? = boxed(ExNetwork(spec));
        Ok(())
    })
}

/// Uniform chain with entry at site 0 and the sink on the last site.
#[no_mangle]
pub extern "C" fn ex_network_chain(sites: usize, coupling: f64, dephasing: f64, sink_rate: f64, network_out: *mut *mut ExNetwork) -> ExStatus {
    guard(|| {
        let spec = NetworkSpec::chain(sites, coupling, dephasing, sink_rate);
        spec.validate()?;
        *out(network_out, "network_out")? = boxed(ExNetwork(spec));
        Ok(())
    })
}

/// # Safety
/// `network` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ex_network_free(network: *mut ExNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}

/// Full-versus-restricted transport report for one input amplitude.
pub struct ExReport(EfficiencyReport);

/// Runs the truncation-robustness comparison on `steps` time steps over
/// the default window.
///
/// # Safety
/// `network` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ex_transport_report(network: *const ExNetwork, alpha: f64, steps: usize, report_out: *mut *mut ExReport) -> ExStatus {
    guard(|| {
        let net = handle(network, "network")?;
        let slot = out(report_out, "report_out")?;
        let settings = RobustnessSettings { steps, ..Default::default() };
        *slot = boxed(ExReport(transport::truncation_robustness(&net.0, alpha, &settings)?));
        Ok(())
    })
}

/// Integrated efficiencies of the full and restricted runs.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ex_report_efficiencies(report: *const ExReport, full_out: *mut f64, restricted_out: *mut f64) -> ExStatus {
    guard(|| {
        let r = handle(report, "report")?;
        *out(full_out, "full_out")? = r.0.full.efficiency.value;
        *out(restricted_out, "restricted_out")? = r.0.restricted.efficiency.value;
        Ok(())
    })
}

/// Relative efficiency difference between the full and restricted runs.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ex_report_relative_difference(report: *const ExReport, value_out: *mut f64) -> ExStatus {
    guard(|| {
        *out(value_out, "value_out")? = handle(report, "report")?.0.relative_difference;
        Ok(())
    })
}

/// Serializes the report as JSON; free the result with [`ex_string_free`].
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ex_report_to_json(report: *const ExReport, json_out: *mut *mut c_char) -> ExStatus {
    guard(|| {
        let r = handle(report, "report")?;
        let slot = out(json_out, "json_out")?;
        let text = serde_json::to_string(&r.0).map_err(|e| Failure::Arg(e.to_string()))?;
        *slot = CString::new(text).map_err(|e| Failure::Arg(e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `report` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ex_report_free(report: *mut ExReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

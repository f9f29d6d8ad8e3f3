//! C ABI over the `gkdv` core.
//!
//! Every entry point returns a [`GkdvStatus`]; results are written through out-pointers.
//! Objects are opaque handles released by their matching `_free` function. The message
//! of the most recent failure on the calling thread is available from
//! [`gkdv_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gkdv::family::{critical_speed, functionals, resolve_bracket};
use gkdv::soliton::{amplitude, build_profile, SolitonProfile};
use gkdv::{GkdvError, Grid, Nonlinearity};

/// Status codes returned by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GkdvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NoSolitaryWave = 3,
    Numerical = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

impl From<&GkdvError> for GkdvStatus {
    fn from(e: &GkdvError) -> Self {
        match e {
            GkdvError::NoSolitaryWave { .. } | GkdvError::SonicLimit { .. } => GkdvStatus::NoSolitaryWave,
            GkdvError::ParseNonlinearity { .. }
            | GkdvError::InvalidNonlinearity(_)
            | GkdvError::InvalidArgument(_)
            | GkdvError::Config(_)
            | GkdvError::NegativeBase { .. } => GkdvStatus::InvalidArgument,
            _ => GkdvStatus::Numerical,
        }
    }
}

/// Opaque nonlinearity handle.
pub struct GkdvNonlinearity(Nonlinearity);

/// Opaque solitary-wave profile handle.
pub struct GkdvProfile {
    profile: SolitonProfile,
    nl: Nonlinearity,
}

/// Conserved functionals of a profile.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GkdvFunctionals {
    pub energy: f64,
    pub momentum: f64,
    pub mass: f64,
}

/// Critical speed and the derivative data at it.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GkdvCritical {
    pub c_star: f64,
    pub d2n_dc2: f64,
    pub di_dc: f64,
    pub lambda_prime: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub nondegenerate: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn guard<F>(f: F) -> GkdvStatus
where
    F: FnOnce() -> Result<(), GkdvStatus>,
{
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GkdvStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic".into());
            GkdvStatus::Panic
        }
    }
}

fn fail(e: GkdvError) -> GkdvStatus {
    let status = GkdvStatus::from(&e);
    set_error(e.to_string());
    status
}

fn null(what: &str) -> GkdvStatus {
    set_error(format!("null pointer: {what}"));
    GkdvStatus::NullPointer
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, GkdvStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, GkdvStatus> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failure on this thread, or NULL. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn gkdv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gkdv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a spec such as `kdv`, `power:5` or `minus:1,6,1,8`.
///
/// # Safety
/// `spec` must be a valid NUL-terminated string and `out_nl` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn gkdv_nonlinearity_parse(spec: *const c_char, out_nl: *mut *mut GkdvNonlinearity) -> GkdvStatus {
    guard(|| {
        let slot = out(out_nl, "out_nl")?;
        *slot = ptr::null_mut();
        if spec.is_null() {
            return Err(null("spec"));
        }
        let text = CStr::from_ptr(spec).to_str().map_err(|_| {
            set_error("spec is not UTF-8".into());
            GkdvStatus::InvalidArgument
        })?;
        let nl: Nonlinearity = text.parse().map_err(fail)?;
        *slot = Box::into_raw(Box::new(GkdvNonlinearity(nl)));
        Ok(())
    })
}

/// Releases a nonlinearity. NULL is ignored.
///
/// # Safety
/// `nl` must come from [`gkdv_nonlinearity_parse`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gkdv_nonlinearity_free(nl: *mut GkdvNonlinearity) {
    if !nl.is_null() {
        drop(Box::from_raw(nl));
    }
}

/// Writes the `order`-th derivative of `f` at `u`.
///
/// # Safety
/// `nl` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn gkdv_nonlinearity_eval(
    nl: *const GkdvNonlinearity,
    u: f64,
    order: u32,
    value: *mut f64,
) -> GkdvStatus {
    guard(|| {
        let nl = borrow(nl, "nl")?;
        *out(value, "value")? = nl.0.eval(u, order).map_err(fail)?;
        Ok(())
    })
}

/// Writes the peak height of the wave of speed `c`.
///
/// # Safety
/// `nl` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn gkdv_amplitude(nl: *const GkdvNonlinearity, c: f64, value: *mut f64) -> GkdvStatus {
    guard(|| {
        let nl = borrow(nl, "nl")?;
        *out(value, "value")? = amplitude(&nl.0, c).map_err(fail)?;
        Ok(())
    })
}

/// Builds the profile of speed `c` on the default grid for that speed.
///
/// # Safety
/// `nl` must be a live handle and `out_profile` writable.
#[no_mangle]
pub unsafe extern "C" fn gkdv_profile_build(
    nl: *const GkdvNonlinearity,
    c: f64,
    out_profile: *mut *mut GkdvProfile,
) -> GkdvStatus {
    guard(|| {
        let slot = out(out_profile, "out_profile")?;
        *slot = ptr::null_mut();
        let nl = borrow(nl, "nl")?;
        if !(c.is_finite() && c > 0.0) {
            return Err(fail(GkdvError::InvalidArgument(format!("speed must be positive, got {c}"))));
        }
        let profile = build_profile(&nl.0, c, &Grid::default_for_speed(c)).map_err(fail)?;
        *slot = Box::into_raw(Box::new(GkdvProfile { profile, nl: nl.0.clone() }));
        Ok(())
    })
}

/// Releases a profile. NULL is ignored.
///
/// # Safety
/// `profile` must come from [`gkdv_profile_build`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gkdv_profile_free(profile: *mut GkdvProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// Number of grid nodes of the profile, 0 for NULL.
///
/// # Safety
/// `profile` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gkdv_profile_len(profile: *const GkdvProfile) -> usize {
    profile.as_ref().map_or(0, |p| p.profile.values().len())
}

/// Peak height of the profile.
///
/// # Safety
/// `profile` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn gkdv_profile_amplitude(profile: *const GkdvProfile, value: *mut f64) -> GkdvStatus {
    guard(|| {
        let p = borrow(profile, "profile")?;
        *out(value, "value")? = p.profile.amplitude();
        Ok(())
    })
}

/// Copies nodes and values into caller buffers of length `len`. Either buffer may be NULL.
///
/// # Safety
/// Non-NULL buffers must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gkdv_profile_copy(
    profile: *const GkdvProfile,
    x: *mut f64,
    phi: *mut f64,
    len: usize,
) -> GkdvStatus {
    guard(|| {
        let p = borrow(profile, "profile")?;
        let values = p.profile.values();
        if len < values.len() {
            set_error(format!("buffer holds {len} values, profile has {}", values.len()));
            return Err(GkdvStatus::BufferTooSmall);
        }
        if !x.is_null() {
            let nodes = p.profile.grid().nodes();
            ptr::copy_nonoverlapping(nodes.as_ptr(), x, nodes.len());
        }
        if !phi.is_null() {
            ptr::copy_nonoverlapping(values.as_ptr(), phi, values.len());
        }
        Ok(())
    })
}

/// Energy, momentum and mass of the profile.
///
/// # Safety
/// `profile` must be a live handle and `result` writable.
#[no_mangle]
pub unsafe extern "C" fn gkdv_profile_functionals(
    profile: *const GkdvProfile,
    result: *mut GkdvFunctionals,
) -> GkdvStatus {
    guard(|| {
        let p = borrow(profile, "profile")?;
        let f = functionals(&p.profile, &p.nl);
        *out(result, "result")? = GkdvFunctionals { energy: f.energy, momentum: f.momentum, mass: f.mass };
        Ok(())
    })
}

/// Locates the speed where `dN/dc` vanishes inside `[lo, hi]`, adjusting the bracket
/// below the sonic limit as the CLI does.
///
/// # Safety
/// `nl` must be a live handle and `result` writable.
#[no_mangle]
pub unsafe extern "C" fn gkdv_critical_speed(
    nl: *const GkdvNonlinearity,
    lo: f64,
    hi: f64,
    result: *mut GkdvCritical,
) -> GkdvStatus {
    guard(|| {
        let nl = borrow(nl, "nl")?;
        let slot = out(result, "result")?;
        let bracket = resolve_bracket(&nl.0, (lo, hi)).map_err(fail)?;
        let r = critical_speed(&nl.0, bracket.used).map_err(fail)?;
        *slot = GkdvCritical {
            c_star: r.c_star,
            d2n_dc2: r.d2n_dc2,
            di_dc: r.di_dc,
            lambda_prime: r.lambda_prime,
            bracket_lo: bracket.used.0,
            bracket_hi: bracket.used.1,
            nondegenerate: r.nondegenerate,
        };
        Ok(())
    })
}

//! C ABI over `rdiag`.
//!
//! Models are opaque handles created by `rdiag_model_*` and released with
//! [`rdiag_model_free`]. Every fallible call returns an [`RdiagStatus`]; on
//! failure the message is kept per thread and can be read back with
//! [`rdiag_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rdiag::cumulants::{Builtin, ModelSpec, OperatorModel};
use rdiag::ring::{parse_rational, rational_to_string};
use rdiag::Error;

/// Result codes. `Ok` is zero; everything else is a failure.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RdiagStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ResourceBound = 3,
    Pole = 4,
    BranchUndefined = 5,
    SingularInverse = 6,
    Numerical = 7,
    OutsideRegime = 8,
    Parse = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

impl From<&Error> for RdiagStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Argument(_) => RdiagStatus::InvalidArgument,
            Error::Resource(_) => RdiagStatus::ResourceBound,
            Error::Pole(_) => RdiagStatus::Pole,
            Error::BranchUndefined(_) => RdiagStatus::BranchUndefined,
            Error::SingularInverse(_) => RdiagStatus::SingularInverse,
            Error::Numerical(_) => RdiagStatus::Numerical,
            Error::Regime(_) => RdiagStatus::OutsideRegime,
            Error::Parse(_) => RdiagStatus::Parse,
        }
    }
}

/// An operator model. Opaque to C.
pub struct RdiagModel {
    inner: OperatorModel,
}

/// Output of [`rdiag_resolvent_norm`].
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RdiagNormResult {
    pub lambda: f64,
    pub norm: f64,
    pub m_lambda: f64,
    pub asymptotic: f64,
    pub ratio: f64,
    pub x_lambda: f64,
    /// 0 for a closed-form R-transform, otherwise the truncation order.
    pub truncation_order: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (RdiagStatus, String)>) -> RdiagStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RdiagStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RdiagStatus::Panic
        }
    }
}

fn lib<T>(r: rdiag::Result<T>) -> Result<T, (RdiagStatus, String)> {
    r.map_err(|e| (RdiagStatus::from(&e), e.to_string()))
}

fn null(what: &str) -> (RdiagStatus, String) {
    (RdiagStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (RdiagStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (RdiagStatus::Parse, format!("{what} is not UTF-8")))
}

unsafe fn model_ref<'a>(m: *const RdiagModel) -> Result<&'a OperatorModel, (RdiagStatus, String)> {
    m.as_ref().map(|m| &m.inner).ok_or_else(|| null("model"))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), (RdiagStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Copies `text` and a terminating NUL into `buf` when it fits. `needed`
/// (if non-null) always receives the required size including the NUL.
unsafe fn write_string(text: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> Result<(), (RdiagStatus, String)> {
    let bytes = text.as_bytes();
    if !needed.is_null() {
        needed.write(bytes.len() + 1);
    }
    if buf.is_null() || len < bytes.len() + 1 {
        return Err((RdiagStatus::BufferTooSmall, format!("need {} bytes, got {len}", bytes.len() + 1)));
    }
    ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), bytes.len());
    buf.add(bytes.len()).write(0);
    Ok(())
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rdiag_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rdiag_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a builtin model: `"circular"`, `"haar"` or `"two-atom"`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rdiag_model_builtin(name: *const c_char, out: *mut *mut RdiagModel) -> RdiagStatus {
    guard(|| {
        let b: Builtin = lib(read_str(name, "name")?.parse())?;
        let handle = Box::into_raw(Box::new(RdiagModel { inner: OperatorModel::builtin(b) }));
        write_out(out, handle, "out").inspect_err(|_| drop(Box::from_raw(handle)))
    })
}

/// Creates a model from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rdiag_model_from_json(json: *const c_char, out: *mut *mut RdiagModel) -> RdiagStatus {
    guard(|| {
        let spec = lib(ModelSpec::from_json(read_str(json, "json")?))?;
        let model = lib(spec.into_model())?;
        let handle = Box::into_raw(Box::new(RdiagModel { inner: model }));
        write_out(out, handle, "out").inspect_err(|_| drop(Box::from_raw(handle)))
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from `rdiag_model_*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rdiag_model_free(model: *mut RdiagModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// `v(a) = ‖a‖₄⁴ − 1`.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rdiag_model_variance(model: *const RdiagModel, out: *mut f64) -> RdiagStatus {
    guard(|| {
        let v = lib(rdiag::resolvent::variance_v(model_ref(model)?))?;
        write_out(out, v, "out")
    })
}

/// `‖(λ − a)^{−1}‖` and the quantities around it.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rdiag_resolvent_norm(model: *const RdiagModel, lambda: f64, out: *mut RdiagNormResult) -> RdiagStatus {
    guard(|| {
        let r = lib(rdiag::resolvent::resolvent_norm(model_ref(model)?, lambda))?;
        let truncation_order = match r.route {
            rdiag::resolvent::Route::ClosedForm => 0,
            rdiag::resolvent::Route::Truncated { order } => order as u32,
        };
        let res = RdiagNormResult {
            lambda: r.lambda,
            norm: r.norm,
            m_lambda: r.m_lambda,
            asymptotic: r.asymptotic,
            ratio: r.ratio,
            x_lambda: r.x_lambda,
            truncation_order,
        };
        write_out(out, res, "out")
    })
}

/// Exact `m_{−2k−2}` of `|λ − a|²` at a rational `λ` (given as `"p/q"` or a
/// finite decimal), written as `"p/q"` into `buf`.
///
/// # Safety
/// `model` must be a live handle, `lambda` a NUL-terminated string and `buf`
/// writable for `len` bytes. `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn rdiag_negative_moment(
    model: *const RdiagModel,
    lambda: *const c_char,
    k: u32,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> RdiagStatus {
    guard(|| {
        let text = read_str(lambda, "lambda")?;
        let l = parse_rational(text).ok_or_else(|| (RdiagStatus::Parse, format!("'{text}' is not a rational number")))?;
        let m = lib(rdiag::series::negative_moment_at(model_ref(model)?, k as usize, &l))?;
        write_string(&rational_to_string(&m), buf, len, needed)
    })
}

/// Support `[s⁻, s⁺]` of `|λ − c|²` for the circular operator.
///
/// # Safety
/// `lo` and `hi` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rdiag_circular_support(lambda: f64, lo: *mut f64, hi: *mut f64) -> RdiagStatus {
    guard(|| {
        let (a, b) = lib(rdiag::circular::support_endpoints(lambda))?;
        write_out(lo, a, "lo")?;
        write_out(hi, b, "hi")
    })
}

/// Number of non-crossing partitions of `n` points, by enumeration.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rdiag_count_nc(n: u32, out: *mut u64) -> RdiagStatus {
    guard(|| {
        let c = lib(rdiag::nc::enumerate_nc(n as usize))?.len() as u64;
        write_out(out, c, "out")
    })
}

/// Number of 4-gon tilings of the `2(k+1)`-gon.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rdiag_count_tilings(k: u32, out: *mut u64) -> RdiagStatus {
    guard(|| {
        let c = lib(rdiag::psd::count_quadrangulations(k as usize))?;
        let c = u64::try_from(c).map_err(|_| (RdiagStatus::ResourceBound, "count exceeds 64 bits".to_string()))?;
        write_out(out, c, "out")
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping_covers_errors() {
        assert_eq!(RdiagStatus::from(&Error::Regime(String::new())), RdiagStatus::OutsideRegime);
        assert_eq!(RdiagStatus::from(&Error::Parse(String::new())), RdiagStatus::Parse);
        assert_eq!(RdiagStatus::Ok as i32, 0);
    }

    #[test]
    fn string_buffer_contract() {
        let mut buf = [0 as c_char; 4];
        let mut needed = 0usize;
        unsafe {
            assert!(write_string("abc", buf.as_mut_ptr(), 4, &mut needed).is_ok());
            assert_eq!(CStr::from_ptr(buf.as_ptr()).to_str().unwrap(), "abc");
            assert_eq!(write_string("abcd", buf.as_mut_ptr(), 4, &mut needed).unwrap_err().0, RdiagStatus::BufferTooSmall);
        }
        assert_eq!(needed, 5);
    }

    #[test]
    fn panics_become_status() {
        assert_eq!(guard(|| panic!("boom")), RdiagStatus::Panic);
        let msg = unsafe { CStr::from_ptr(rdiag_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "internal panic");
    }
}

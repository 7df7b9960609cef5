//! C ABI over `fpmul`.
//!
//! Every entry point returns an [`FpmulStatus`]; on anything but `Ok` a
//! message is kept in a thread-local slot readable with
//! [`fpmul_last_error_message`]. Panics never cross the boundary.
//!
//! Coefficient buffers are arrays of `uint64_t` in `[0, p)`, lowest degree
//! first. Output buffers are caller-owned: pass the capacity, receive the
//! required length, and retry on `FPMUL_STATUS_BUFFER_TOO_SMALL`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fpmul::error::Error;
use fpmul::multiplier::{explain, MulConfig, Multiplier, Strategy};
use fpmul::prime_field::{FpPoly, PrimeContext};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpmulStatus {
    Ok = 0,
    NullPointer = 1,
    NotPrime = 2,
    InvalidArgument = 3,
    BufferTooSmall = 4,
    CoefficientOutOfRange = 5,
    Internal = 6,
    Panic = 7,
}

/// Algorithm selection for a multiplier handle.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpmulStrategy {
    Auto = 0,
    Kronecker = 1,
    CfFft = 2,
}

impl From<FpmulStrategy> for Strategy {
    fn from(s: FpmulStrategy) -> Self {
        match s {
            FpmulStrategy::Auto => Strategy::Auto,
            FpmulStrategy::Kronecker => Strategy::Kronecker,
            FpmulStrategy::CfFft => Strategy::CfFft,
        }
    }
}

/// Opaque multiplier bound to one prime. Plans are cached per handle; a
/// handle may be shared across threads for concurrent multiplications.
pub struct FpmulMultiplier {
    inner: Multiplier,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(FpmulStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::NotPrime(_) => FpmulStatus::NotPrime,
            Error::InvalidParameter(_) | Error::LengthMismatch { .. } | Error::ContextMismatch { .. } => {
                FpmulStatus::InvalidArgument
            }
            _ => FpmulStatus::Internal,
        };
        Fail(status, e.to_string())
    }
}

fn fail(status: FpmulStatus, msg: impl Into<String>) -> Fail {
    Fail(status, msg.into())
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FpmulStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            clear_error();
            FpmulStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            FpmulStatus::Panic
        }
    }
}

/// Borrows `len` coefficients; a null pointer is allowed only when `len == 0`.
///
/// # Safety
/// `data` must point to `len` readable `u64`s when non-null.
unsafe fn read_poly(ctx: PrimeContext, data: *const u64, len: usize, name: &str) -> Result<FpPoly, Fail> {
    let coeffs: &[u64] = if len == 0 {
        &[]
    } else if data.is_null() {
        return Err(fail(FpmulStatus::NullPointer, format!("{name} is null")));
    } else {
        unsafe { std::slice::from_raw_parts(data, len) }
    };
    if let Some((i, &c)) = coeffs.iter().enumerate().find(|(_, &c)| c >= ctx.p()) {
        return Err(fail(
            FpmulStatus::CoefficientOutOfRange,
            format!("{name}[{i}] = {c} is not below p = {}", ctx.p()),
        ));
    }
    Ok(FpPoly::new(ctx, coeffs.to_vec())?)
}

/// Copies `coeffs` zero-padded to `required` entries.
///
/// # Safety
/// `out` must point to `out_cap` writable `u64`s when non-null.
unsafe fn write_coeffs(coeffs: &[u64], required: usize, out: *mut u64, out_cap: usize) -> Result<(), Fail> {
    if required == 0 {
        return Ok(());
    }
    if out_cap < required {
        return Err(fail(
            FpmulStatus::BufferTooSmall,
            format!("output needs {required} coefficients, capacity is {out_cap}"),
        ));
    }
    if out.is_null() {
        return Err(fail(FpmulStatus::NullPointer, "out is null"));
    }
    let dst = unsafe { std::slice::from_raw_parts_mut(out, required) };
    let k = coeffs.len().min(required);
    dst[..k].copy_from_slice(&coeffs[..k]);
    dst[k..].fill(0);
    Ok(())
}

fn handle<'a>(m: *const FpmulMultiplier) -> Result<&'a FpmulMultiplier, Fail> {
    // SAFETY: callers pass a handle from `fpmul_multiplier_new` or null.
    unsafe { m.as_ref() }.ok_or_else(|| fail(FpmulStatus::NullPointer, "multiplier handle is null"))
}

/// Creates a multiplier for the prime `p` and stores it in `*out`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn fpmul_multiplier_new(
    p: u64,
    strategy: FpmulStrategy,
    out: *mut *mut FpmulMultiplier,
) -> FpmulStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(FpmulStatus::NullPointer, "out is null"));
        }
        let ctx = PrimeContext::new(p)?;
        let m = Box::new(FpmulMultiplier {
            inner: Multiplier::new(ctx, MulConfig::default().with_strategy(strategy.into())),
        });
        unsafe { *out = Box::into_raw(m) };
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `m` must come from `fpmul_multiplier_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fpmul_multiplier_free(m: *mut FpmulMultiplier) {
    if !m.is_null() {
        drop(unsafe { Box::from_raw(m) });
    }
}

/// Writes the handle's prime to `*p`.
///
/// # Safety
/// `m` must be a live handle and `p` writable.
#[no_mangle]
pub unsafe extern "C" fn fpmul_multiplier_prime(m: *const FpmulMultiplier, p: *mut u64) -> FpmulStatus {
    guard(|| {
        let m = handle(m)?;
        if p.is_null() {
            return Err(fail(FpmulStatus::NullPointer, "p is null"));
        }
        unsafe { *p = m.inner.ctx().p() };
        Ok(())
    })
}

/// Full product of `a` and `b`. The product has `a_len + b_len - 1`
/// coefficients (zero if either is empty); that count is written to
/// `*out_len` whether or not `out_cap` suffices.
///
/// # Safety
/// `a`, `b` point to `a_len`, `b_len` readable coefficients; `out` to
/// `out_cap` writable ones; `out_len` is writable.
#[no_mangle]
pub unsafe extern "C" fn fpmul_multiply(
    m: *const FpmulMultiplier,
    a: *const u64,
    a_len: usize,
    b: *const u64,
    b_len: usize,
    out: *mut u64,
    out_cap: usize,
    out_len: *mut usize,
) -> FpmulStatus {
    guard(|| {
        let m = handle(m)?;
        if out_len.is_null() {
            return Err(fail(FpmulStatus::NullPointer, "out_len is null"));
        }
        let required = if a_len == 0 || b_len == 0 {
            0
        } else {
            a_len
                .checked_add(b_len - 1)
                .ok_or_else(|| fail(FpmulStatus::InvalidArgument, "product length overflows"))?
        };
        unsafe { *out_len = required };
        if out_cap < required {
            return unsafe { write_coeffs(&[], required, out, out_cap) };
        }
        let ctx = *m.inner.ctx();
        let (pa, pb) = unsafe { (read_poly(ctx, a, a_len, "a")?, read_poly(ctx, b, b_len, "b")?) };
        let c = m.inner.multiply(&pa, &pb)?;
        unsafe { write_coeffs(c.coeffs(), required, out, out_cap) }
    })
}

/// Product of `a` and `b` modulo `X^n - 1`, written as `n` coefficients.
/// Inputs longer than `n` are folded first.
///
/// # Safety
/// As for [`fpmul_multiply`], with `out` holding at least `n` entries.
#[no_mangle]
pub unsafe extern "C" fn fpmul_cyclic_multiply(
    m: *const FpmulMultiplier,
    a: *const u64,
    a_len: usize,
    b: *const u64,
    b_len: usize,
    n: usize,
    out: *mut u64,
    out_cap: usize,
) -> FpmulStatus {
    guard(|| {
        let m = handle(m)?;
        if n == 0 {
            return Err(fail(FpmulStatus::InvalidArgument, "n must be positive"));
        }
        if out_cap < n {
            return unsafe { write_coeffs(&[], n, out, out_cap) };
        }
        let ctx = *m.inner.ctx();
        let (pa, pb) = unsafe { (read_poly(ctx, a, a_len, "a")?, read_poly(ctx, b, b_len, "b")?) };
        let c = m.inner.cyclic_multiply(&pa.fold_cyclic(n)?, &pb.fold_cyclic(n)?, n)?;
        unsafe { write_coeffs(c.coeffs(), n, out, out_cap) }
    })
}

/// Writes the planner report for `(p, n)` as a NUL-terminated string.
/// `*out_len` receives the byte count including the terminator.
///
/// # Safety
/// `buf` must hold `cap` writable bytes (may be null when `cap == 0`);
/// `out_len` is writable.
#[no_mangle]
pub unsafe extern "C" fn fpmul_explain(
    p: u64,
    n: usize,
    strategy: FpmulStrategy,
    buf: *mut c_char,
    cap: usize,
    out_len: *mut usize,
) -> FpmulStatus {
    guard(|| {
        if out_len.is_null() {
            return Err(fail(FpmulStatus::NullPointer, "out_len is null"));
        }
        if n == 0 {
            return Err(fail(FpmulStatus::InvalidArgument, "n must be positive"));
        }
        let ctx = PrimeContext::new(p)?;
        let text = explain(&ctx, n, &MulConfig::default().with_strategy(strategy.into()))?;
        let bytes = CString::new(text).map_err(|e| fail(FpmulStatus::Internal, e.to_string()))?;
        let bytes = bytes.as_bytes_with_nul();
        unsafe { *out_len = bytes.len() };
        if cap < bytes.len() {
            return Err(fail(FpmulStatus::BufferTooSmall, format!("report needs {} bytes", bytes.len())));
        }
        if buf.is_null() {
            return Err(fail(FpmulStatus::NullPointer, "buf is null"));
        }
        unsafe { ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, bytes.len()) };
        Ok(())
    })
}

/// Copies the calling thread's last error message (NUL-terminated,
/// truncated to `cap`) and returns its full length including the
/// terminator; 0 when there is none.
///
/// # Safety
/// `buf` must hold `cap` writable bytes (may be null when `cap == 0`).
#[no_mangle]
pub unsafe extern "C" fn fpmul_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && cap > 0 {
            let k = bytes.len().min(cap);
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, k);
                *buf.add(k - 1) = 0;
            }
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fpmul_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

//! C ABI for the slicer.
//!
//! Objects are passed as opaque handles that the caller frees with the
//! matching `_free` function. Every fallible call returns an
//! [`AbssliceStatus`]; the message of the last failure on the calling thread
//! is available from [`absslice_last_error`]. Strings returned to the caller
//! are released with [`absslice_string_free`].

use absslice::criteria::{parse_criterion, Criterion};
use absslice::deps::find_ndeps;
use absslice::domains::Library;
use absslice::lang::{parse_program, program_to_string, Program};
use absslice::slicer::{abstract_slice, concrete_slice, verify_slice, SliceError, SliceOptions, SliceOutcome};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AbssliceStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    CriterionError = 4,
    Unsupported = 5,
    /// The analysis ran and the answer is negative (for example, a failed
    /// slice verification).
    AnalysisFailed = 6,
    InvalidArgument = 7,
    Panic = 8,
}

pub struct AbssliceProgram {
    program: Program,
}

pub struct AbssliceCriterion {
    criterion: Criterion,
}

pub struct AbssliceSlice {
    outcome: SliceOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

type Failure = (AbssliceStatus, String);

fn fail<T>(status: AbssliceStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err((status, msg.into()))
}

/// Runs `f`, records its error message, and turns panics into a status.
fn guarded(f: impl FnOnce() -> Result<(), Failure>) -> AbssliceStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AbssliceStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AbssliceStatus::Panic
        }
    }
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, Failure> {
    if s.is_null() {
        return fail(AbssliceStatus::NullArgument, "null string argument");
    }
    CStr::from_ptr(s).to_str().or_else(|_| fail(AbssliceStatus::InvalidUtf8, "string is not valid UTF-8"))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref().map_or_else(|| fail(AbssliceStatus::NullArgument, "null handle"), Ok)
}

fn library(bound: i64) -> Result<Library, Failure> {
    if !(1..=16).contains(&bound) {
        return fail(AbssliceStatus::InvalidArgument, "bound must be between 1 and 16");
    }
    Ok(Library::new(bound))
}

fn out_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(std::ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn absslice_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn absslice_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses program source into `*out`.
///
/// # Safety
/// `src` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn absslice_program_parse(src: *const c_char, out: *mut *mut AbssliceProgram) -> AbssliceStatus {
    guarded(|| {
        if out.is_null() {
            return fail(AbssliceStatus::NullArgument, "null output pointer");
        }
        let program = parse_program(text(src)?).or_else(|e| fail(AbssliceStatus::ParseError, e.to_string()))?;
        *out = Box::into_raw(Box::new(AbssliceProgram { program }));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn absslice_program_free(p: *mut AbssliceProgram) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Source text of a program with line labels; null on a null handle.
///
/// # Safety
/// `p` must be null or a live program handle.
#[no_mangle]
pub unsafe extern "C" fn absslice_program_to_string(p: *const AbssliceProgram) -> *mut c_char {
    match p.as_ref() {
        Some(p) => out_string(program_to_string(&p.program)),
        None => std::ptr::null_mut(),
    }
}

/// Parses a criterion file's text for use with `program`.
///
/// # Safety
/// `text_` must be a NUL-terminated string, `program` a live handle and `out`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn absslice_criterion_parse(
    text_: *const c_char,
    program: *const AbssliceProgram,
    out: *mut *mut AbssliceCriterion,
) -> AbssliceStatus {
    guarded(|| {
        if out.is_null() {
            return fail(AbssliceStatus::NullArgument, "null output pointer");
        }
        let p = handle(program)?;
        let criterion =
            parse_criterion(text(text_)?, &p.program.classes).or_else(|e| fail(AbssliceStatus::CriterionError, e.to_string()))?;
        *out = Box::into_raw(Box::new(AbssliceCriterion { criterion }));
        Ok(())
    })
}

/// # Safety
/// `c` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn absslice_criterion_free(c: *mut AbssliceCriterion) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Computes a verified slice. With `concrete` set, every criterion variable is
/// observed exactly.
///
/// # Safety
/// `program` and `criterion` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn absslice_slice(
    program: *const AbssliceProgram,
    criterion: *const AbssliceCriterion,
    bound: i64,
    step_limit: usize,
    concrete: bool,
    out: *mut *mut AbssliceSlice,
) -> AbssliceStatus {
    guarded(|| {
        if out.is_null() {
            return fail(AbssliceStatus::NullArgument, "null output pointer");
        }
        let (p, c) = (handle(program)?, handle(criterion)?);
        let lib = library(bound)?;
        let opts = SliceOptions { step_limit, ..SliceOptions::default() };
        let res = if concrete {
            concrete_slice(&p.program, &c.criterion, &lib, &opts)
        } else {
            abstract_slice(&p.program, &c.criterion, &lib, &opts)
        };
        let outcome = res.or_else(|e| {
            let status = match e {
                SliceError::Criterion(_) => AbssliceStatus::CriterionError,
                SliceError::Unsupported(_) => AbssliceStatus::Unsupported,
                SliceError::Unverified(_) => AbssliceStatus::AnalysisFailed,
            };
            fail(status, e.to_string())
        })?;
        *out = Box::into_raw(Box::new(AbssliceSlice { outcome }));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn absslice_slice_free(s: *mut AbssliceSlice) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// The sliced program as a new handle, or null on a null argument.
///
/// # Safety
/// `s` must be null or a live slice handle.
#[no_mangle]
pub unsafe extern "C" fn absslice_slice_program(s: *const AbssliceSlice) -> *mut AbssliceProgram {
    match s.as_ref() {
        Some(s) => Box::into_raw(Box::new(AbssliceProgram { program: s.outcome.slice.clone() })),
        None => std::ptr::null_mut(),
    }
}

/// Copies up to `cap` kept line numbers into `buf` and returns how many lines
/// were kept in total.
///
/// # Safety
/// `s` must be a live slice handle; `buf` must have room for `cap` values
/// (it may be null when `cap` is 0).
#[no_mangle]
pub unsafe extern "C" fn absslice_slice_kept(s: *const AbssliceSlice, buf: *mut u32, cap: usize) -> usize {
    let Some(s) = s.as_ref() else { return 0 };
    let kept = &s.outcome.kept;
    if !buf.is_null() {
        for (i, l) in kept.iter().take(cap).enumerate() {
            *buf.add(i) = *l;
        }
    }
    kept.len()
}

/// JSON report of the slice, or null on a null argument.
///
/// # Safety
/// `s` must be null or a live slice handle.
#[no_mangle]
pub unsafe extern "C" fn absslice_slice_report_json(s: *const AbssliceSlice) -> *mut c_char {
    match s.as_ref() {
        Some(s) => out_string(s.outcome.report_json()),
        None => std::ptr::null_mut(),
    }
}

/// Sets `*holds` to whether `candidate` is a slice of `program` for
/// `criterion` on the enumerated inputs.
///
/// # Safety
/// All handles must be live and `holds` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn absslice_check(
    program: *const AbssliceProgram,
    candidate: *const AbssliceProgram,
    criterion: *const AbssliceCriterion,
    bound: i64,
    step_limit: usize,
    holds: *mut bool,
) -> AbssliceStatus {
    guarded(|| {
        if holds.is_null() {
            return fail(AbssliceStatus::NullArgument, "null output pointer");
        }
        let (p, q, c) = (handle(program)?, handle(candidate)?, handle(criterion)?);
        let lib = library(bound)?;
        let v = verify_slice(&p.program, &q.program, &c.criterion, &lib, step_limit)
            .or_else(|e| fail(AbssliceStatus::CriterionError, e.to_string()))?;
        *holds = v.holds();
        Ok(())
    })
}

/// Variables of `expr` that may affect its property in `domain`, as a
/// comma-separated string in `*out`.
///
/// # Safety
/// `expr` and `domain` must be NUL-terminated strings and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn absslice_find_ndeps(
    expr: *const c_char,
    domain: *const c_char,
    bound: i64,
    out: *mut *mut c_char,
) -> AbssliceStatus {
    guarded(|| {
        if out.is_null() {
            return fail(AbssliceStatus::NullArgument, "null output pointer");
        }
        let e = absslice::lang::parse_expr(text(expr)?).or_else(|e| fail(AbssliceStatus::ParseError, e.to_string()))?;
        let rho = library(bound)?.get(text(domain)?).or_else(|e| fail(AbssliceStatus::InvalidArgument, e.to_string()))?;
        let vars = find_ndeps(&e, &rho, &Default::default());
        *out = out_string(vars.join(","));
        Ok(())
    })
}

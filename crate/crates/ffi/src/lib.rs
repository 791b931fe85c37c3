//! C ABI for the archipelago library.
//!
//! Every function returns an [`ArchStatus`]; results come back through out
//! pointers. Objects are opaque handles owned by the caller and released
//! with the matching `*_free` function. On failure a message is kept per
//! thread and can be read with [`arch_last_error_message`].
//!
//! Feature indices are zero-based.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Duration;

use archipelago::error::EvalFailure;
use archipelago::expr::Expr;
use archipelago::{
    attribute_sets, bridge_open, detect_pairs, explain, BlackBox, BridgeCommand, Context,
    ContextRegime, DetectorConfig, Error, Evaluator, Explanation, FeatureSet, HConvention,
    InteractionRanking, Method, PerturbationSpace, SyntheticFunction, SyntheticId, WireMode,
};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The function (callback, expression or bridge host) failed.
    Evaluation = 3,
    /// Exhaustive enumeration over too many features.
    Capacity = 4,
    /// A caller buffer is too small; the needed length was written.
    BufferTooSmall = 5,
    OutOfRange = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchH {
    Unit = 0,
    Eq4 = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchMethod {
    ArchAttribute = 0,
    Difference = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchWireMode {
    Vector = 0,
    Mask = 1,
}

/// Scalar model supplied by the caller. Writes `f(x)` to `out` and returns
/// 0, or returns nonzero on failure. Never called concurrently for one
/// black box.
pub type ArchEvalFn =
    Option<unsafe extern "C" fn(user_data: *mut c_void, x: *const f64, p: usize, out: *mut f64) -> c_int>;

/// A memoized function bound to a target and a baseline.
pub struct ArchBlackBox {
    inner: BlackBox,
}

/// Feature pairs ranked by interaction strength.
pub struct ArchRanking {
    inner: InteractionRanking,
}

/// Disjoint feature sets and their attributions.
pub struct ArchExplanation {
    inner: Explanation,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(ArchStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            e if e.is_evaluation() => ArchStatus::Evaluation,
            Error::Capacity { .. } => ArchStatus::Capacity,
            Error::IndexOutOfRange { .. } => ArchStatus::OutOfRange,
            _ => ArchStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: ArchStatus, message: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, message.into()))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ArchStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ArchStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {message}"));
            ArchStatus::Panic
        }
    }
}

unsafe fn non_null<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, Failure> {
    ptr.as_ref()
        .map_or_else(|| fail(ArchStatus::NullPointer, format!("`{name}` is null")), Ok)
}

unsafe fn out_ptr<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut()
        .map_or_else(|| fail(ArchStatus::NullPointer, format!("`{name}` is null")), Ok)
}

unsafe fn c_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, Failure> {
    let s = CStr::from_ptr(non_null(ptr, name)?);
    s.to_str()
        .or_else(|_| fail(ArchStatus::InvalidArgument, format!("`{name}` is not UTF-8")))
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    Ok(std::slice::from_raw_parts(non_null(ptr, name)?, len))
}

unsafe fn space_from(target: *const f64, baseline: *const f64, p: usize, h: ArchH) -> Result<PerturbationSpace, Failure> {
    let t = slice(target, p, "target")?.to_vec();
    let b = slice(baseline, p, "baseline")?.to_vec();
    let h = match h {
        ArchH::Unit => HConvention::Unit,
        ArchH::Eq4 => HConvention::Eq4,
    };
    Ok(PerturbationSpace::new(t, b, h)?)
}

fn method(m: ArchMethod) -> Method {
    match m {
        ArchMethod::ArchAttribute => Method::ArchAttribute,
        ArchMethod::Difference => Method::Difference,
    }
}

fn emit<T>(out: &mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn arch_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn arch_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// One of the benchmark functions `"F1"`..`"F4"` at its default target
/// (all ones) and baseline (all minus ones).
///
/// # Safety
/// `name` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn arch_blackbox_synthetic(name: *const c_char, h: ArchH, out: *mut *mut ArchBlackBox) -> ArchStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let id: SyntheticId = c_str(name, "name")?.parse()?;
        let f = SyntheticFunction::bench(id);
        let space = f.space(match h {
            ArchH::Unit => HConvention::Unit,
            ArchH::Eq4 => HConvention::Eq4,
        });
        emit(out, ArchBlackBox {
            inner: BlackBox::from_fn(space, move |v| f.eval(v)),
        });
        Ok(())
    })
}

/// A function given in the expression language (`x1..xp`, `+ - * /`,
/// `min`, `max`, `relu`, `abs`).
///
/// # Safety
/// `expr` must be a nul-terminated string, `target` and `baseline` must
/// point to `p` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn arch_blackbox_expr(
    expr: *const c_char,
    target: *const f64,
    baseline: *const f64,
    p: usize,
    h: ArchH,
    out: *mut *mut ArchBlackBox,
) -> ArchStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let e: Expr = c_str(expr, "expr")?.parse()?;
        let space = space_from(target, baseline, p, h)?;
        if e.arity() > p {
            return fail(ArchStatus::InvalidArgument, format!("expression uses x{} but p = {p}", e.arity()));
        }
        emit(out, ArchBlackBox {
            inner: BlackBox::from_fn(space, move |v| e.eval(v)),
        });
        Ok(())
    })
}

struct Callback {
    f: unsafe extern "C" fn(*mut c_void, *const f64, usize, *mut f64) -> c_int,
    user_data: *mut c_void,
}

// SAFETY: the black box serializes evaluation, so the callback is never
// entered concurrently; the caller keeps `user_data` alive and usable from
// whichever thread drives the black box.
unsafe impl Send for Callback {}
unsafe impl Sync for Callback {}

impl Evaluator for Callback {
    fn evaluate(&self, space: &PerturbationSpace, batch: &[Context]) -> Result<Vec<f64>, EvalFailure> {
        batch
            .iter()
            .map(|ctx| {
                let v = space.realize(ctx).map_err(|e| EvalFailure::Message(e.to_string()))?;
                let mut y = f64::NAN;
                let rc = unsafe { (self.f)(self.user_data, v.as_ptr(), v.len(), &mut y) };
                if rc != 0 {
                    return Err(EvalFailure::Message(format!("callback returned {rc}")));
                }
                Ok(y)
            })
            .collect()
    }
}

/// A function supplied as a C callback.
///
/// # Safety
/// `target` and `baseline` must point to `p` values, `f` must be safe to
/// call with `user_data` until the handle is freed, and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn arch_blackbox_callback(
    f: ArchEvalFn,
    user_data: *mut c_void,
    target: *const f64,
    baseline: *const f64,
    p: usize,
    h: ArchH,
    out: *mut *mut ArchBlackBox,
) -> ArchStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let Some(f) = f else {
            return fail(ArchStatus::NullPointer, "`f` is null");
        };
        let space = space_from(target, baseline, p, h)?;
        emit(out, ArchBlackBox {
            inner: BlackBox::new(space, Callback { f, user_data }),
        });
        Ok(())
    })
}

/// A model hosted by a child process speaking the line-delimited JSON
/// protocol. `timeout_ms` of 0 keeps the default.
///
/// # Safety
/// `command` must be a nul-terminated string, `target` and `baseline` must
/// point to `p` values and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn arch_blackbox_bridge(
    command: *const c_char,
    mode: ArchWireMode,
    timeout_ms: u64,
    target: *const f64,
    baseline: *const f64,
    p: usize,
    h: ArchH,
    out: *mut *mut ArchBlackBox,
) -> ArchStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let mut cmd = BridgeCommand::parse(c_str(command, "command")?)
            .map_err(|e| Failure(ArchStatus::InvalidArgument, e.to_string()))?
            .with_mode(match mode {
                ArchWireMode::Vector => WireMode::Vector,
                ArchWireMode::Mask => WireMode::Mask,
            });
        if timeout_ms > 0 {
            cmd = cmd.with_timeout(Duration::from_millis(timeout_ms));
        }
        let space = space_from(target, baseline, p, h)?;
        emit(out, ArchBlackBox {
            inner: bridge_open(&cmd, space)?,
        });
        Ok(())
    })
}

/// # Safety
/// `bb` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn arch_blackbox_free(bb: *mut ArchBlackBox) {
    if !bb.is_null() {
        drop(Box::from_raw(bb));
    }
}

/// # Safety
/// `bb` and `p` must be valid.
#[no_mangle]
pub unsafe extern "C" fn arch_blackbox_p(bb: *const ArchBlackBox, p: *mut usize) -> ArchStatus {
    guard(|| {
        *out_ptr(p, "p")? = non_null(bb, "bb")?.inner.p();
        Ok(())
    })
}

/// Distinct evaluations performed so far.
///
/// # Safety
/// `bb` and `count` must be valid.
#[no_mangle]
pub unsafe extern "C" fn arch_blackbox_call_count(bb: *const ArchBlackBox, count: *mut u64) -> ArchStatus {
    guard(|| {
        *out_ptr(count, "count")? = non_null(bb, "bb")?.inner.call_count();
        Ok(())
    })
}

/// Evaluates one mask of `p` bytes (nonzero selects the target value).
///
/// # Safety
/// `mask` must point to `p` bytes where `p` is the handle's dimension.
#[no_mangle]
pub unsafe extern "C" fn arch_blackbox_eval_mask(bb: *const ArchBlackBox, mask: *const u8, value: *mut f64) -> ArchStatus {
    guard(|| {
        let bb = &non_null(bb, "bb")?.inner;
        let value = out_ptr(value, "value")?;
        let bits: Vec<bool> = slice(mask, bb.p(), "mask")?.iter().map(|&b| b != 0).collect();
        *value = bb.eval(&Context::from_bits(&bits))?;
        Ok(())
    })
}

/// Ranks every pair. `contexts` is `"archdetect"`, `"target-only"`,
/// `"baseline-only"`, `"random:N"` or `"full"` (null means archdetect);
/// `seed` drives the random regime; `workers` of 0 uses all cores.
///
/// # Safety
/// `bb` and `out` must be valid; `contexts` null or nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn arch_detect(
    bb: *const ArchBlackBox,
    contexts: *const c_char,
    seed: u64,
    workers: usize,
    out: *mut *mut ArchRanking,
) -> ArchStatus {
    guard(|| {
        let bb = &non_null(bb, "bb")?.inner;
        let out = out_ptr(out, "out")?;
        let regime: ContextRegime = if contexts.is_null() {
            ContextRegime::ArchDetect
        } else {
            c_str(contexts, "contexts")?.parse()?
        };
        let cfg = DetectorConfig {
            contexts: regime.with_seed(seed),
            workers,
            ..DetectorConfig::default()
        };
        emit(out, ArchRanking {
            inner: detect_pairs(bb, &cfg)?,
        });
        Ok(())
    })
}

/// # Safety
/// `r` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn arch_ranking_free(r: *mut ArchRanking) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// # Safety
/// `r` and `len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn arch_ranking_len(r: *const ArchRanking, len: *mut usize) -> ArchStatus {
    guard(|| {
        *out_ptr(len, "len")? = non_null(r, "r")?.inner.len();
        Ok(())
    })
}

/// The pair at rank `k` (0 is strongest).
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn arch_ranking_get(
    r: *const ArchRanking,
    k: usize,
    i: *mut usize,
    j: *mut usize,
    strength: *mut f64,
) -> ArchStatus {
    guard(|| {
        let r = &non_null(r, "r")?.inner;
        let (i, j, strength) = (out_ptr(i, "i")?, out_ptr(j, "j")?, out_ptr(strength, "strength")?);
        let Some(s) = r.pairs.get(k) else {
            return fail(ArchStatus::OutOfRange, format!("rank {k} of {} pairs", r.len()));
        };
        (*i, *j, *strength) = (s.i, s.j, s.strength);
        Ok(())
    })
}

/// Merges the top `top_k` nonzero pairs into islands, adds singletons and
/// attributes each set.
///
/// # Safety
/// All pointers must be valid handles or out pointers.
#[no_mangle]
pub unsafe extern "C" fn arch_explain(
    bb: *const ArchBlackBox,
    r: *const ArchRanking,
    top_k: usize,
    m: ArchMethod,
    out: *mut *mut ArchExplanation,
) -> ArchStatus {
    guard(|| {
        let bb = &non_null(bb, "bb")?.inner;
        let r = &non_null(r, "r")?.inner;
        let out = out_ptr(out, "out")?;
        emit(out, ArchExplanation {
            inner: explain(bb, r, top_k, method(m))?,
        });
        Ok(())
    })
}

/// Attribution of one set of `n` feature indices.
///
/// # Safety
/// `indices` must point to `n` values; `bb` and `phi` must be valid.
#[no_mangle]
pub unsafe extern "C" fn arch_attribute(
    bb: *const ArchBlackBox,
    indices: *const usize,
    n: usize,
    m: ArchMethod,
    phi: *mut f64,
) -> ArchStatus {
    guard(|| {
        let bb = &non_null(bb, "bb")?.inner;
        let phi = out_ptr(phi, "phi")?;
        let set = FeatureSet::new(slice(indices, n, "indices")?.iter().copied())?;
        *phi = archipelago::attribute::attribute(bb, &set, method(m))?;
        Ok(())
    })
}

/// Attributes caller-chosen disjoint sets given in CSR form: set `k` holds
/// `indices[offsets[k]..offsets[k + 1]]`, with `num_sets + 1` offsets.
///
/// # Safety
/// `offsets` must point to `num_sets + 1` values and `indices` to
/// `offsets[num_sets]` values.
#[no_mangle]
pub unsafe extern "C" fn arch_attribute_sets(
    bb: *const ArchBlackBox,
    indices: *const usize,
    offsets: *const usize,
    num_sets: usize,
    m: ArchMethod,
    out: *mut *mut ArchExplanation,
) -> ArchStatus {
    guard(|| {
        let bb = &non_null(bb, "bb")?.inner;
        let out = out_ptr(out, "out")?;
        let offsets = slice(offsets, num_sets + 1, "offsets")?;
        if offsets.windows(2).any(|w| w[0] > w[1]) {
            return fail(ArchStatus::InvalidArgument, "offsets must be nondecreasing");
        }
        let all = slice(indices, offsets[num_sets], "indices")?;
        let sets = offsets
            .windows(2)
            .map(|w| FeatureSet::new(all[w[0]..w[1]].iter().copied()))
            .collect::<Result<Vec<_>, _>>()?;
        emit(out, ArchExplanation {
            inner: attribute_sets(bb, &sets, method(m))?,
        });
        Ok(())
    })
}

/// # Safety
/// `e` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn arch_explanation_free(e: *mut ArchExplanation) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// # Safety
/// `e` and `n` must be valid.
#[no_mangle]
pub unsafe extern "C" fn arch_explanation_num_sets(e: *const ArchExplanation, n: *mut usize) -> ArchStatus {
    guard(|| {
        *out_ptr(n, "n")? = non_null(e, "e")?.inner.sets.len();
        Ok(())
    })
}

/// Copies the indices of set `k` into `buf`. `len` receives the set size;
/// when `cap` is too small nothing is copied and
/// `ARCH_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `buf` must hold `cap` values (may be null when `cap` is 0).
#[no_mangle]
pub unsafe extern "C" fn arch_explanation_set(
    e: *const ArchExplanation,
    k: usize,
    buf: *mut usize,
    cap: usize,
    len: *mut usize,
) -> ArchStatus {
    guard(|| {
        let e = &non_null(e, "e")?.inner;
        let len = out_ptr(len, "len")?;
        let Some(set) = e.sets.get(k) else {
            return fail(ArchStatus::OutOfRange, format!("set {k} of {}", e.sets.len()));
        };
        *len = set.len();
        if cap < set.len() {
            return fail(ArchStatus::BufferTooSmall, format!("set {k} has {} indices", set.len()));
        }
        let buf = std::slice::from_raw_parts_mut(out_ptr(buf, "buf")?, cap);
        buf[..set.len()].copy_from_slice(set.indices());
        Ok(())
    })
}

/// # Safety
/// `e` and `phi` must be valid.
#[no_mangle]
pub unsafe extern "C" fn arch_explanation_phi(e: *const ArchExplanation, k: usize, phi: *mut f64) -> ArchStatus {
    guard(|| {
        let e = &non_null(e, "e")?.inner;
        let phi = out_ptr(phi, "phi")?;
        let Some(&v) = e.phi.get(k) else {
            return fail(ArchStatus::OutOfRange, format!("set {k} of {}", e.phi.len()));
        };
        *phi = v;
        Ok(())
    })
}

/// `f(target)`, `f(baseline)` and `f(target) - f(baseline) - sum(phi)`.
/// Any out pointer may be null.
///
/// # Safety
/// `e` must be valid.
#[no_mangle]
pub unsafe extern "C" fn arch_explanation_summary(
    e: *const ArchExplanation,
    f_target: *mut f64,
    f_baseline: *mut f64,
    residual: *mut f64,
) -> ArchStatus {
    guard(|| {
        let e = &non_null(e, "e")?.inner;
        for (ptr, v) in [(f_target, e.f_target), (f_baseline, e.f_baseline), (residual, e.completeness_residual)] {
            if let Some(p) = ptr.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

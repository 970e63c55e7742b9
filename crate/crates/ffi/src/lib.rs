//! C ABI for ri-switch.
//!
//! Handles are opaque pointers created by `*_new`/`*_parse` functions and
//! released with the matching `*_free`. Every fallible function returns an
//! [`RiStatus`]; on failure a description is available from
//! [`ri_last_error`] on the same thread until the next failing call.
//!
//! Valuations cross the boundary as a flat `double` buffer plus one length
//! per channel, in declaration order. Scalar channels have length 1.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use ri_switch::check::check_trace;
use ri_switch::manager::{ManagerError, RiManager as Manager, SelectionPolicy};
use ri_switch::trace::{ChannelDecl, ChannelKind, Valuation, Value};
use ri_switch::tracelog::{read_records, traces_by_car};
use ri_switch::vdta::expr::MinFront;
use ri_switch::vdta::{BuiltinRegistry, Policy, PolicyError};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    ElaborateError = 4,
    InvalidArgument = 5,
    InvalidInput = 6,
    InvalidOutput = 7,
    OutOfOrder = 8,
    MaskViolation = 9,
    PolicyDeadlock = 10,
    StepError = 11,
    BufferTooSmall = 12,
    TraceError = 13,
    Panic = 99,
}

/// How the manager picks among valid groups.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiSelection {
    PreferLast = 0,
    LowestIndex = 1,
    SeededRandom = 2,
}

/// Outcome of one completed tick.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RiTickResult {
    pub tick: u64,
    pub selected: usize,
    /// True when no group was valid and the fallback group was released.
    pub fallback_used: bool,
}

/// Verdicts of a trace check; `first_violation` is -1 for a passing
/// constraint. Order: Snd, Snd-witness, Mono, Inst, Ca.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RiCheckReport {
    pub pass: [bool; 5],
    pub first_violation: [i64; 5],
    /// Runs (cars) found in the trace; the verdicts combine all of them.
    pub runs: usize,
}

/// Opaque elaborated policy.
pub struct RiPolicy {
    inner: Policy,
}

/// Opaque manager.
pub struct RiManager {
    inner: Manager,
    last_output: Option<Valuation>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn fail(status: RiStatus, msg: impl Into<String>) -> RiStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> RiStatus) -> RiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(RiStatus::Panic, "internal panic"),
    }
}

fn manager_status(e: &ManagerError) -> RiStatus {
    match e {
        ManagerError::NoPolicies | ManagerError::SignatureMismatch { .. } | ManagerError::FallbackOutOfRange(_) => {
            RiStatus::InvalidArgument
        }
        ManagerError::InvalidInput(_) => RiStatus::InvalidInput,
        ManagerError::InvalidOutput { .. } | ManagerError::OutputCount { .. } => RiStatus::InvalidOutput,
        ManagerError::OutOfOrder(_) => RiStatus::OutOfOrder,
        ManagerError::MaskViolation { .. } => RiStatus::MaskViolation,
        ManagerError::PolicyDeadlock { .. } => RiStatus::PolicyDeadlock,
        ManagerError::Step { .. } | ManagerError::Eval { .. } => RiStatus::StepError,
    }
}

unsafe fn str_arg<'a>(s: *const c_char) -> Result<&'a str, RiStatus> {
    if s.is_null() {
        return Err(fail(RiStatus::NullPointer, "string argument is null"));
    }
    CStr::from_ptr(s).to_str().map_err(|e| fail(RiStatus::InvalidUtf8, e.to_string()))
}

/// Builds a valuation from a flat buffer against channel declarations.
unsafe fn valuation_from(
    decls: &[ChannelDecl],
    data: *const f64,
    lens: *const usize,
    n_channels: usize,
) -> Result<Valuation, RiStatus> {
    if n_channels != decls.len() {
        return Err(fail(
            RiStatus::InvalidArgument,
            format!("expected {} channels, got {n_channels}", decls.len()),
        ));
    }
    if n_channels == 0 {
        return Ok(Valuation::new(Vec::new()));
    }
    if lens.is_null() || data.is_null() {
        return Err(fail(RiStatus::NullPointer, "valuation buffer is null"));
    }
    let lens = std::slice::from_raw_parts(lens, n_channels);
    let total: usize = lens.iter().sum();
    let data = std::slice::from_raw_parts(data, total);
    let mut values = Vec::with_capacity(n_channels);
    let mut at = 0;
    for (d, &len) in decls.iter().zip(lens) {
        let chunk = &data[at..at + len];
        at += len;
        values.push(match d.kind {
            ChannelKind::Scalar => {
                if len != 1 {
                    return Err(fail(
                        RiStatus::InvalidArgument,
                        format!("scalar channel `{}` given {len} values", d.name),
                    ));
                }
                Value::Scalar(chunk[0])
            }
            ChannelKind::Array => Value::Array(chunk.into()),
        });
    }
    Ok(Valuation::new(values))
}

/// Message for the last failure on this thread. Valid until the next
/// failing call on the same thread. Never null.
#[no_mangle]
pub extern "C" fn ri_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ri_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses and elaborates a policy. `fov_deg` configures the scanner
/// geometry seen by `min_front`; pass 0 for the default 230°.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ri_policy_parse(source: *const c_char, fov_deg: f64, out: *mut *mut RiPolicy) -> RiStatus {
    guard(|| {
        if out.is_null() {
            return fail(RiStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let src = match str_arg(source) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let mut reg = BuiltinRegistry::default();
        if fov_deg > 0.0 {
            reg.register(Arc::new(MinFront { fov_deg, ..MinFront::default() }));
        }
        match Policy::from_source(src, &reg) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(RiPolicy { inner: p }));
                RiStatus::Ok
            }
            Err(e @ PolicyError::Dsl(_)) => fail(RiStatus::ParseError, e.to_string()),
            Err(e @ PolicyError::Elaborate(_)) => fail(RiStatus::ElaborateError, e.to_string()),
        }
    })
}

/// # Safety
/// `policy` must come from [`ri_policy_parse`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ri_policy_free(policy: *mut RiPolicy) {
    if !policy.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(policy))));
    }
}

/// Copies the policy name into `buf` (NUL-terminated). `needed` receives the
/// required size including the terminator.
///
/// # Safety
/// `buf` must hold `len` bytes; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn ri_policy_name(
    policy: *const RiPolicy,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> RiStatus {
    guard(|| {
        let Some(p) = policy.as_ref() else {
            return fail(RiStatus::NullPointer, "policy is null");
        };
        let name = p.inner.name().as_bytes();
        if !needed.is_null() {
            *needed = name.len() + 1;
        }
        if buf.is_null() || len < name.len() + 1 {
            return fail(RiStatus::BufferTooSmall, format!("name needs {} bytes", name.len() + 1));
        }
        ptr::copy_nonoverlapping(name.as_ptr(), buf.cast(), name.len());
        *buf.add(name.len()) = 0;
        RiStatus::Ok
    })
}

/// Creates a manager over `n` policies, one per controller group, in group
/// order. The policies are shared, so they may be freed afterwards.
/// `fallback` is a group index released when no group is valid, or -1 for
/// none (deadlock is then an error).
///
/// # Safety
/// `policies` must point to `n` valid policy handles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ri_manager_new(
    policies: *const *const RiPolicy,
    n: usize,
    selection: RiSelection,
    seed: u64,
    fallback: i64,
    out: *mut *mut RiManager,
) -> RiStatus {
    guard(|| {
        if out.is_null() || (policies.is_null() && n > 0) {
            return fail(RiStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let mut list = Vec::with_capacity(n);
        for i in 0..n {
            let Some(p) = (*policies.add(i)).as_ref() else {
                return fail(RiStatus::NullPointer, format!("policy {i} is null"));
            };
            list.push(p.inner.clone());
        }
        let sel = match selection {
            RiSelection::PreferLast => SelectionPolicy::PreferLast,
            RiSelection::LowestIndex => SelectionPolicy::LowestIndex,
            RiSelection::SeededRandom => SelectionPolicy::SeededRandom(seed),
        };
        let fallback = if fallback < 0 { None } else { Some(fallback as usize) };
        match Manager::new(list, sel).and_then(|m| m.with_fallback(fallback)) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(RiManager { inner: m, last_output: None }));
                RiStatus::Ok
            }
            Err(e) => fail(manager_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `mgr` must come from [`ri_manager_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ri_manager_free(mgr: *mut RiManager) {
    if !mgr.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(mgr))));
    }
}

/// Number of policies (and controller groups).
///
/// # Safety
/// `mgr` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn ri_manager_len(mgr: *const RiManager) -> usize {
    mgr.as_ref().map_or(0, |m| m.inner.len())
}

/// Number of input channels.
///
/// # Safety
/// `mgr` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn ri_manager_input_count(mgr: *const RiManager) -> usize {
    mgr.as_ref().map_or(0, |m| m.inner.signature().inputs.len())
}

/// Number of output channels.
///
/// # Safety
/// `mgr` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn ri_manager_output_count(mgr: *const RiManager) -> usize {
    mgr.as_ref().map_or(0, |m| m.inner.signature().outputs.len())
}

/// Ticks completed so far.
///
/// # Safety
/// `mgr` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn ri_manager_tick(mgr: *const RiManager) -> u64 {
    mgr.as_ref().map_or(0, |m| m.inner.tick())
}

/// Input phase. Writes one flag per group into `mask` (`mask_len` must be
/// at least the group count): nonzero groups must be executed, zero groups
/// are suspended.
///
/// # Safety
/// Buffers must match the given lengths.
#[no_mangle]
pub unsafe extern "C" fn ri_manager_begin_tick(
    mgr: *mut RiManager,
    data: *const f64,
    lens: *const usize,
    n_channels: usize,
    mask: *mut bool,
    mask_len: usize,
) -> RiStatus {
    guard(|| {
        let Some(m) = mgr.as_mut() else {
            return fail(RiStatus::NullPointer, "manager is null");
        };
        if mask.is_null() {
            return fail(RiStatus::NullPointer, "mask is null");
        }
        if mask_len < m.inner.len() {
            return fail(RiStatus::BufferTooSmall, format!("mask needs {} entries", m.inner.len()));
        }
        let input = match valuation_from(&m.inner.signature().inputs, data, lens, n_channels) {
            Ok(v) => v,
            Err(s) => return s,
        };
        match m.inner.begin_tick(input) {
            Ok(bits) => {
                std::slice::from_raw_parts_mut(mask, bits.len()).copy_from_slice(&bits);
                RiStatus::Ok
            }
            Err(e) => fail(manager_status(&e), e.to_string()),
        }
    })
}

/// Output phase. `outputs[g]` points to group `g`'s flat output buffer, or
/// is null for a suspended group. `lens` gives the per-channel lengths,
/// shared by all groups. On failure nothing is committed and the tick
/// stays open.
///
/// # Safety
/// `outputs` must hold `n_groups` pointers, each null or pointing to a
/// buffer of `sum(lens)` doubles.
#[no_mangle]
pub unsafe extern "C" fn ri_manager_end_tick(
    mgr: *mut RiManager,
    outputs: *const *const f64,
    n_groups: usize,
    lens: *const usize,
    n_channels: usize,
    result: *mut RiTickResult,
) -> RiStatus {
    guard(|| {
        let Some(m) = mgr.as_mut() else {
            return fail(RiStatus::NullPointer, "manager is null");
        };
        if outputs.is_null() && n_groups > 0 {
            return fail(RiStatus::NullPointer, "outputs is null");
        }
        let decls = m.inner.signature().outputs.clone();
        let mut ys = Vec::with_capacity(n_groups);
        for g in 0..n_groups {
            let p = *outputs.add(g);
            if p.is_null() {
                ys.push(None);
            } else {
                match valuation_from(&decls, p, lens, n_channels) {
                    Ok(v) => ys.push(Some(v)),
                    Err(s) => return s,
                }
            }
        }
        match m.inner.end_tick(ys) {
            Ok(o) => {
                if let Some(r) = result.as_mut() {
                    *r = RiTickResult { tick: o.tick, selected: o.selected, fallback_used: o.fallback_used };
                }
                m.last_output = o.event.output;
                RiStatus::Ok
            }
            Err(e) => fail(manager_status(&e), e.to_string()),
        }
    })
}

/// Copies the output released on the last tick into `buf` as a flat
/// buffer. `written` receives the number of doubles needed.
///
/// # Safety
/// `buf` must hold `len` doubles; `written` may be null.
#[no_mangle]
pub unsafe extern "C" fn ri_manager_released(
    mgr: *const RiManager,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> RiStatus {
    guard(|| {
        let Some(m) = mgr.as_ref() else {
            return fail(RiStatus::NullPointer, "manager is null");
        };
        let Some(out) = &m.last_output else {
            return fail(RiStatus::OutOfOrder, "no tick has completed");
        };
        let flat: Vec<f64> = out
            .values()
            .iter()
            .flat_map(|v| match v {
                Value::Scalar(s) => vec![*s],
                Value::Array(a) => a.to_vec(),
            })
            .collect();
        if !written.is_null() {
            *written = flat.len();
        }
        if buf.is_null() || len < flat.len() {
            return fail(RiStatus::BufferTooSmall, format!("released output needs {} doubles", flat.len()));
        }
        std::slice::from_raw_parts_mut(buf, flat.len()).copy_from_slice(&flat);
        RiStatus::Ok
    })
}

/// Checks a JSON-lines tick log against `n` policies in group order.
///
/// # Safety
/// `policies` must hold `n` valid handles, `jsonl` must be NUL-terminated
/// and `report` valid.
#[no_mangle]
pub unsafe extern "C" fn ri_check_trace_jsonl(
    policies: *const *const RiPolicy,
    n: usize,
    jsonl: *const c_char,
    report: *mut RiCheckReport,
) -> RiStatus {
    guard(|| {
        if report.is_null() || (policies.is_null() && n > 0) {
            return fail(RiStatus::NullPointer, "null argument");
        }
        let text = match str_arg(jsonl) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let mut list = Vec::with_capacity(n);
        for i in 0..n {
            let Some(p) = (*policies.add(i)).as_ref() else {
                return fail(RiStatus::NullPointer, format!("policy {i} is null"));
            };
            list.push(p.inner.clone());
        }
        let runs = match read_records(text.as_bytes()).and_then(|r| traces_by_car(&r)) {
            Ok(r) => r,
            Err(e) => return fail(RiStatus::TraceError, e.to_string()),
        };
        let mut out = RiCheckReport { pass: [true; 5], first_violation: [-1; 5], runs: runs.len() };
        for run in &runs {
            if run.histories.len() != n {
                return fail(
                    RiStatus::InvalidArgument,
                    format!("trace has {} groups, {n} policies given", run.histories.len()),
                );
            }
            let r = check_trace(&list, &run.released, &run.histories);
            for (k, v) in [&r.snd, &r.snd_witness, &r.mono, &r.inst, &r.ca].into_iter().enumerate() {
                if !v.pass {
                    out.pass[k] = false;
                    let t = v.first_violation.map_or(0, |t| t as i64);
                    if out.first_violation[k] < 0 || t < out.first_violation[k] {
                        out.first_violation[k] = t;
                    }
                }
            }
        }
        *report = out;
        RiStatus::Ok
    })
}

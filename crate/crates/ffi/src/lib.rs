//! C interface to bridgewatch.
//!
//! Handles are opaque pointers created by `*_new`/`*_load` functions and
//! released by the matching `*_free`. Every fallible call returns a
//! [`BwStatus`]; on failure [`bw_last_error`] describes what went wrong on
//! the calling thread. Strings returned through out-parameters are owned
//! by the caller and must be released with [`bw_string_free`].
//!
//! A [`BwMonitor`] may be shared between threads.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use bridgewatch::checker::CheckOptions;
use bridgewatch::ingest::{load_config, BridgeConfig, Strictness};
use bridgewatch::monitor::Monitor;
use bridgewatch::pipeline::{self, AnalyzeError, Input};
use bridgewatch::report::{render_jsonl, Report, DEFAULT_CLUSTER_GAP};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BwStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Config = 5,
    Analysis = 6,
    Panic = 7,
}

/// Validated bridge configuration.
pub struct BwConfig(BridgeConfig);

/// Runtime monitor holding allowed-unlock history.
pub struct BwMonitor(Monitor);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: BwStatus, msg: impl Into<String>) -> BwStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning a panic into [`BwStatus::Panic`].
fn guard(f: impl FnOnce() -> BwStatus) -> BwStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(BwStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, BwStatus> {
    if p.is_null() {
        return Err(fail(BwStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(BwStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn path_list(p: *const *const c_char, n: usize, name: &str) -> Result<Vec<PathBuf>, BwStatus> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(fail(BwStatus::NullArgument, format!("{name} is null")));
    }
    (0..n).map(|i| str_arg(*p.add(i), name).map(PathBuf::from)).collect()
}

fn out_string(out: *mut *mut c_char, s: String) -> BwStatus {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            BwStatus::Ok
        }
        Err(_) => fail(BwStatus::Analysis, "output contains a NUL byte"),
    }
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($p:expr, $name:literal) => {
        if $p.is_null() {
            return fail(BwStatus::NullArgument, concat!($name, " is null"));
        }
    };
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn bw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static, NUL-terminated version string.
#[no_mangle]
pub extern "C" fn bw_version() -> *const c_char {
    concat!("bridgewatch ", env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads and validates a config file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bw_config_load(path: *const c_char, out: *mut *mut BwConfig) -> BwStatus {
    guard(|| {
        non_null!(out, "out");
        let path = try_status!(str_arg(path, "path"));
        match load_config(path.as_ref()) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(BwConfig(cfg)));
                BwStatus::Ok
            }
            Err(e) => fail(BwStatus::Config, e.to_string()),
        }
    })
}

/// Parses and validates a config from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bw_config_from_json(json: *const c_char, out: *mut *mut BwConfig) -> BwStatus {
    guard(|| {
        non_null!(out, "out");
        let text = try_status!(str_arg(json, "json"));
        match BridgeConfig::from_json(text) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(BwConfig(cfg)));
                BwStatus::Ok
            }
            Err(e) => fail(BwStatus::Config, e.to_string()),
        }
    })
}

/// # Safety
/// `cfg` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bw_config_free(cfg: *mut BwConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Analyzes trace files and relayer logs. On success `*out_report` holds
/// the JSONL report and `*out_violations` the violation count.
///
/// # Safety
/// Path arrays must hold `n_*` valid strings; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn bw_analyze(
    cfg: *const BwConfig,
    trace_paths: *const *const c_char,
    n_traces: usize,
    action_paths: *const *const c_char,
    n_actions: usize,
    out_report: *mut *mut c_char,
    out_violations: *mut usize,
) -> BwStatus {
    guard(|| {
        non_null!(cfg, "cfg");
        non_null!(out_report, "out_report");
        non_null!(out_violations, "out_violations");
        let cfg = &(*cfg).0;
        let input = Input {
            trace_files: try_status!(path_list(trace_paths, n_traces, "trace_paths")),
            action_logs: try_status!(path_list(action_paths, n_actions, "action_paths")),
            strictness: Strictness::Strict,
        };
        let analysis = match pipeline::analyze(&input, cfg, CheckOptions::from_config(cfg)) {
            Ok(a) => a,
            Err(e @ AnalyzeError::Ingest(bridgewatch::ingest::IngestError::Io { .. })) => {
                return fail(BwStatus::Io, e.to_string())
            }
            Err(e @ AnalyzeError::Fact(_)) => return fail(BwStatus::Config, e.to_string()),
            Err(e) => return fail(BwStatus::Parse, e.to_string()),
        };
        let n = analysis.violations.len();
        let report = Report::new(analysis.violations, analysis.input_digest, DEFAULT_CLUSTER_GAP, analysis.dropped);
        let status = out_string(out_report, render_jsonl(&report));
        if status == BwStatus::Ok {
            *out_violations = n;
        }
        status
    })
}

/// Creates a monitor. The config is copied; `cfg` may be freed afterwards.
///
/// # Safety
/// `cfg` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bw_monitor_new(cfg: *const BwConfig, out: *mut *mut BwMonitor) -> BwStatus {
    guard(|| {
        non_null!(cfg, "cfg");
        non_null!(out, "out");
        let cfg = (*cfg).0.clone();
        let opts = CheckOptions::from_config(&cfg);
        *out = Box::into_raw(Box::new(BwMonitor(Monitor::new(cfg, opts))));
        BwStatus::Ok
    })
}

/// Screens one request line. A malformed request is not an error: it
/// yields an abort response, like any other screening failure.
///
/// # Safety
/// `m` must come from this library; `request` must be a NUL-terminated
/// string; `out_response` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bw_monitor_screen(
    m: *const BwMonitor,
    request: *const c_char,
    out_response: *mut *mut c_char,
) -> BwStatus {
    guard(|| {
        non_null!(m, "monitor");
        non_null!(out_response, "out_response");
        let line = try_status!(str_arg(request, "request"));
        out_string(out_response, (*m).0.handle_line(line))
    })
}

/// # Safety
/// `m` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bw_monitor_free(m: *mut BwMonitor) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `s` must be a string returned by this library, or null.
#[no_mangle]
pub unsafe extern "C" fn bw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

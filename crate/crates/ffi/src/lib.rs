//! C ABI over a loaded cube engine.
//!
//! An engine is an opaque handle obtained from [`netcube_engine_open`]
//! (snapshot file) or [`netcube_engine_build`] (build config). Queries take
//! an endpoint name and a JSON request and return a JSON string that the
//! caller releases with [`netcube_string_free`]. Every function returns a
//! [`NetcubeStatus`]; the message of the last failure on the calling thread
//! is available from [`netcube_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use netcube::api;
use netcube::config::BuildConfig;
use netcube::engine::CubeEngine;
use netcube::snapshot;
use serde::de::DeserializeOwned;
use serde_json::Value;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetcubeStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    LoadFailed = 3,
    BadRequest = 4,
    NotFound = 5,
    UnknownEndpoint = 6,
    Panic = 7,
}

/// Opaque engine handle.
pub struct NetcubeEngine {
    inner: CubeEngine,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: NetcubeStatus, msg: &str) -> NetcubeStatus {
    set_error(msg);
    status
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<Option<&'a str>, NetcubeStatus> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| fail(NetcubeStatus::InvalidUtf8, "argument is not valid UTF-8"))
}

fn guarded(f: impl FnOnce() -> NetcubeStatus) -> NetcubeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(NetcubeStatus::Panic, "internal panic"),
    }
}

unsafe fn open_with(
    path: *const c_char,
    out: *mut *mut NetcubeEngine,
    load: impl FnOnce(&Path) -> Result<CubeEngine, String>,
) -> NetcubeStatus {
    if out.is_null() {
        return fail(NetcubeStatus::NullArgument, "out is null");
    }
    *out = ptr::null_mut();
    let path = match read_str(path) {
        Ok(Some(p)) => p,
        Ok(None) => return fail(NetcubeStatus::NullArgument, "path is null"),
        Err(s) => return s,
    };
    match load(Path::new(path)) {
        Ok(engine) => {
            *out = Box::into_raw(Box::new(NetcubeEngine { inner: engine }));
            NetcubeStatus::Ok
        }
        Err(msg) => fail(NetcubeStatus::LoadFailed, &msg),
    }
}

/// Loads a snapshot file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn netcube_engine_open(path: *const c_char, out: *mut *mut NetcubeEngine) -> NetcubeStatus {
    guarded(|| open_with(path, out, |p| snapshot::load(p).map_err(|e| e.to_string())))
}

/// Builds an engine in memory from a build config file.
///
/// # Safety
/// `config_path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn netcube_engine_build(config_path: *const c_char, out: *mut *mut NetcubeEngine) -> NetcubeStatus {
    guarded(|| {
        open_with(config_path, out, |p| {
            let cfg = BuildConfig::load(p).map_err(|e| e.to_string())?;
            cfg.build().map_err(|e| e.to_string())
        })
    })
}

/// Releases an engine. Null is ignored.
///
/// # Safety
/// `engine` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn netcube_engine_free(engine: *mut NetcubeEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Node and edge counts of the base network.
///
/// # Safety
/// `engine` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn netcube_engine_counts(
    engine: *const NetcubeEngine,
    nodes: *mut u64,
    edges: *mut u64,
) -> NetcubeStatus {
    if engine.is_null() || nodes.is_null() || edges.is_null() {
        return fail(NetcubeStatus::NullArgument, "null argument");
    }
    let net = (*engine).inner.network();
    *nodes = net.node_count() as u64;
    *edges = net.edge_count() as u64;
    NetcubeStatus::Ok
}

fn parse_request<T: DeserializeOwned + Default>(body: Option<&str>) -> Result<T, api::ApiError> {
    match body {
        None => Ok(T::default()),
        Some(text) if text.trim().is_empty() => Ok(T::default()),
        Some(text) => serde_json::from_str(text).map_err(|e| api::ApiError::bad_request(e.to_string())),
    }
}

fn dispatch(engine: &CubeEngine, endpoint: &str, cell: &str, body: Option<&str>) -> Option<api::ApiResult> {
    let r = match endpoint {
        "dimensions" => api::dimensions(engine),
        "summary" => api::summary(engine, cell),
        "patterns" => parse_request(body).and_then(|r| api::patterns(engine, cell, &r)),
        "prox" => parse_request(body).and_then(|r| api::prox(engine, cell, &r)),
        "embed" => parse_request(body).and_then(|r| api::embed(engine, cell, &r)),
        "rollup" => parse_request(body).and_then(|r| api::rollup(engine, &r)),
        "drilldown" => parse_request(body).and_then(|r| api::drilldown(engine, &r)),
        "backtrack" => parse_request(body).and_then(|r| api::backtrack(engine, &r)),
        "localize" => parse_request(body).and_then(|r| api::localize(engine, &r)),
        "contrast" => parse_request(body).and_then(|r| api::contrast(engine, &r)),
        _ => return None,
    };
    Some(r)
}

/// Runs one endpoint. `cell` may be null (top cell); `request_json` may be
/// null (defaults). On success and on request errors `*out_json` receives a
/// JSON document (the response or `{"code", "message"}`) that must be
/// released with [`netcube_string_free`].
///
/// Endpoints: `dimensions`, `summary`, `patterns`, `prox`, `embed`,
/// `rollup`, `drilldown`, `backtrack`, `localize`, `contrast`.
///
/// # Safety
/// `engine` must be a live handle, string arguments NUL-terminated, and
/// `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn netcube_query(
    engine: *const NetcubeEngine,
    endpoint: *const c_char,
    cell: *const c_char,
    request_json: *const c_char,
    out_json: *mut *mut c_char,
) -> NetcubeStatus {
    guarded(|| {
        if engine.is_null() || out_json.is_null() {
            return fail(NetcubeStatus::NullArgument, "engine or out_json is null");
        }
        *out_json = ptr::null_mut();
        let (endpoint, cell, body) = match (read_str(endpoint), read_str(cell), read_str(request_json)) {
            (Ok(Some(e)), Ok(c), Ok(b)) => (e, c.unwrap_or("*"), b),
            (Ok(None), _, _) => return fail(NetcubeStatus::NullArgument, "endpoint is null"),
            (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
        };
        let Some(result) = dispatch(&(*engine).inner, endpoint, cell, body) else {
            return fail(NetcubeStatus::UnknownEndpoint, &format!("unknown endpoint `{endpoint}`"));
        };
        let (value, status): (Value, NetcubeStatus) = match result {
            Ok(v) => (v, NetcubeStatus::Ok),
            Err(e) => {
                set_error(&e.message);
                let s = if e.status == 404 {
                    NetcubeStatus::NotFound
                } else {
                    NetcubeStatus::BadRequest
                };
                (e.body(), s)
            }
        };
        let text = serde_json::to_string(&value).unwrap_or_default();
        *out_json = CString::new(text).unwrap_or_default().into_raw();
        status
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn netcube_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failure on this thread; empty if none. Valid until
/// the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn netcube_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn netcube_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

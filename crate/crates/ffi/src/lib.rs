//! C ABI for the simulator: opaque scenario handles, integer error codes,
//! and a thread-local last-error message. The header `gridcoal.h` is
//! generated at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;

use gridcoal::scenario::{load_scenario, Scenario};
use gridcoal::sim;

/// Result codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridcoalStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ScenarioError = 3,
    RuntimeError = 4,
}

/// Opaque handle to a loaded, validated scenario.
pub struct GridcoalScenario {
    inner: Scenario,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl std::fmt::Display) {
    let c = CString::new(msg.to_string()).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gridcoal_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

unsafe fn path_arg(ptr: *const c_char) -> Result<PathBuf, GridcoalStatus> {
    if ptr.is_null() {
        set_error("null path argument");
        return Err(GridcoalStatus::NullArgument);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(e) => {
            set_error(e);
            Err(GridcoalStatus::InvalidUtf8)
        }
    }
}

/// Load and validate a scenario file; on success writes a handle the caller
/// must release with `gridcoal_scenario_free`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gridcoal_scenario_load(
    path: *const c_char,
    out: *mut *mut GridcoalScenario,
) -> GridcoalStatus {
    if out.is_null() {
        set_error("null output handle");
        return GridcoalStatus::NullArgument;
    }
    let path = match path_arg(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match load_scenario(&path) {
        Ok(scn) => {
            *out = Box::into_raw(Box::new(GridcoalScenario { inner: scn }));
            GridcoalStatus::Ok
        }
        Err(e) => {
            set_error(e);
            GridcoalStatus::ScenarioError
        }
    }
}

/// Release a scenario handle. Passing NULL is a no-op.
///
/// # Safety
/// `scn` must come from `gridcoal_scenario_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gridcoal_scenario_free(scn: *mut GridcoalScenario) {
    if !scn.is_null() {
        drop(Box::from_raw(scn));
    }
}

/// Run market rounds and write `market_trace.csv` under `out_dir`.
/// `settled_out` (optional) receives 1 if the trace settled.
///
/// # Safety
/// `scn` must be a live handle; `out_dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gridcoal_run_market(
    scn: *const GridcoalScenario,
    rounds: usize,
    out_dir: *const c_char,
    settled_out: *mut i32,
) -> GridcoalStatus {
    let Some(scn) = scn.as_ref() else {
        set_error("null scenario handle");
        return GridcoalStatus::NullArgument;
    };
    let dir = match path_arg(out_dir) {
        Ok(p) => p,
        Err(s) => return s,
    };
    let run = || -> gridcoal::Result<bool> {
        let trace = sim::run_market(&scn.inner, rounds)?;
        std::fs::create_dir_all(&dir)?;
        std::fs::write(
            dir.join("market_trace.csv"),
            sim::market_trace_csv(&scn.inner, &trace),
        )?;
        Ok(trace.settled)
    };
    match run() {
        Ok(settled) => {
            if !settled_out.is_null() {
                *settled_out = settled as i32;
            }
            GridcoalStatus::Ok
        }
        Err(e) => {
            set_error(e);
            GridcoalStatus::RuntimeError
        }
    }
}

/// Run the coupled market/physics simulation and persist the full artifact.
///
/// # Safety
/// `scn` must be a live handle; `out_dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gridcoal_run_coupled(
    scn: *const GridcoalScenario,
    out_dir: *const c_char,
) -> GridcoalStatus {
    let Some(scn) = scn.as_ref() else {
        set_error("null scenario handle");
        return GridcoalStatus::NullArgument;
    };
    let dir = match path_arg(out_dir) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match sim::run_coupled(&scn.inner, &dir) {
        Ok(_) => GridcoalStatus::Ok,
        Err(e) => {
            set_error(e);
            GridcoalStatus::RuntimeError
        }
    }
}

/// Produce the consolidated analysis report as a JSON string the caller
/// frees with `gridcoal_string_free`.
///
/// # Safety
/// `scn` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gridcoal_analyze(
    scn: *const GridcoalScenario,
    rounds: usize,
    out: *mut *mut c_char,
) -> GridcoalStatus {
    let Some(scn) = scn.as_ref() else {
        set_error("null scenario handle");
        return GridcoalStatus::NullArgument;
    };
    if out.is_null() {
        set_error("null output pointer");
        return GridcoalStatus::NullArgument;
    }
    let run = || -> gridcoal::Result<String> {
        let report = sim::analyze(&scn.inner, rounds)?;
        Ok(serde_json::to_string_pretty(&report)?)
    };
    match run() {
        Ok(json) => {
            *out = CString::new(json).unwrap_or_default().into_raw();
            GridcoalStatus::Ok
        }
        Err(e) => {
            set_error(e);
            GridcoalStatus::RuntimeError
        }
    }
}

/// Export all cost networks as CSV; free the string with
/// `gridcoal_string_free`.
///
/// # Safety
/// `scn` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gridcoal_export_costnet(
    scn: *const GridcoalScenario,
    out: *mut *mut c_char,
) -> GridcoalStatus {
    let Some(scn) = scn.as_ref() else {
        set_error("null scenario handle");
        return GridcoalStatus::NullArgument;
    };
    if out.is_null() {
        set_error("null output pointer");
        return GridcoalStatus::NullArgument;
    }
    *out = CString::new(sim::costnet_csv(&scn.inner))
        .unwrap_or_default()
        .into_raw();
    GridcoalStatus::Ok
}

/// Free a string returned by this library. Passing NULL is a no-op.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gridcoal_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::ptr;

    fn scenario_path() -> CString {
        let p = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../core/scenarios/single_retailer.json");
        CString::new(p.to_str().unwrap()).unwrap()
    }

    #[test]
    fn load_run_analyze_roundtrip() {
        unsafe {
            let mut handle: *mut GridcoalScenario = ptr::null_mut();
            let status = gridcoal_scenario_load(scenario_path().as_ptr(), &mut handle);
            assert_eq!(status, GridcoalStatus::Ok);
            assert!(!handle.is_null());

            let dir = std::env::temp_dir().join("gridcoal_ffi_test");
            let dir_c = CString::new(dir.to_str().unwrap()).unwrap();
            let mut settled = 0;
            let status = gridcoal_run_market(handle, 50, dir_c.as_ptr(), &mut settled);
            assert_eq!(status, GridcoalStatus::Ok);
            assert_eq!(settled, 1);
            assert!(dir.join("market_trace.csv").exists());

            let mut json: *mut c_char = ptr::null_mut();
            let status = gridcoal_analyze(handle, 50, &mut json);
            assert_eq!(status, GridcoalStatus::Ok);
            let text = CStr::from_ptr(json).to_str().unwrap();
            assert!(text.contains("\"settled\": true"));
            gridcoal_string_free(json);

            let mut csv: *mut c_char = ptr::null_mut();
            assert_eq!(
                gridcoal_export_costnet(handle, &mut csv),
                GridcoalStatus::Ok
            );
            assert!(CStr::from_ptr(csv).to_str().unwrap().starts_with("retailer,"));
            gridcoal_string_free(csv);

            gridcoal_scenario_free(handle);
            let _ = std::fs::remove_dir_all(dir);
        }
    }

    #[test]
    fn missing_file_reports_error() {
        unsafe {
            let mut handle: *mut GridcoalScenario = ptr::null_mut();
            let path = CString::new("/nonexistent/scenario.json").unwrap();
            let status = gridcoal_scenario_load(path.as_ptr(), &mut handle);
            assert_eq!(status, GridcoalStatus::ScenarioError);
            assert!(handle.is_null());
            let msg = CStr::from_ptr(gridcoal_last_error()).to_str().unwrap();
            assert!(!msg.is_empty());
        }
    }

    #[test]
    fn null_arguments_rejected() {
        unsafe {
            let mut handle: *mut GridcoalScenario = ptr::null_mut();
            assert_eq!(
                gridcoal_scenario_load(ptr::null(), &mut handle),
                GridcoalStatus::NullArgument
            );
            assert_eq!(
                gridcoal_run_coupled(ptr::null(), ptr::null()),
                GridcoalStatus::NullArgument
            );
            gridcoal_scenario_free(ptr::null_mut());
            gridcoal_string_free(ptr::null_mut());
        }
    }
}

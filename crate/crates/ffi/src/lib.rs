//! C ABI for the instruction-hierarchy resolution engine.
//!
//! Conventions:
//! - Every fallible entry point returns a [`HierStatus`]; `HIER_STATUS_OK`
//!   (0) means success.
//! - Strings cross the boundary as NUL-terminated UTF-8. Strings returned
//!   through `out` parameters are owned by the caller and must be released
//!   with [`hier_string_free`]; `hier_version` and
//!   [`hier_last_error_message`] return borrowed pointers that must NOT be
//!   freed.
//! - [`hier_last_error_message`] describes the most recent failure on the
//!   current thread; it is cleared by the next successful call and
//!   invalidated by the next failing one.
//! - Engines are opaque handles: create with [`hier_engine_new`] /
//!   [`hier_engine_new_with_config`], release with [`hier_engine_free`].
//!   An engine is immutable after construction and safe to share across
//!   threads.
//! - Panics never unwind across the boundary; they surface as
//!   `HIER_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hier_core::atomizer::AtomizerRules;
use hier_core::conflict::{BackendKind, DetectorSpec, RuleBasedDetector};
use hier_core::config::AppConfig;
use hier_core::context::{Context, HierarchyConfig};
use hier_core::loss::{hcal, LossParams, ScoreInput};
use hier_core::pipeline::{resolve_context, ResolveBundle};
use hier_core::verifier::{evaluate, CompilationTable};

/// Result code of a C-ABI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HierStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The input parsed but was rejected (bad JSON, domain error).
    BadInput = 3,
    /// The requested configuration needs facilities this ABI does not
    /// expose (e.g. an external network detector).
    Unsupported = 4,
    /// An internal invariant failed; the library caught a panic.
    Internal = 5,
}

/// Opaque resolution engine: atomizer rules, hierarchy shape, and the
/// offline detector configuration.
pub struct HierEngine {
    rules: AtomizerRules,
    hierarchy: HierarchyConfig,
    detector_spec: DetectorSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = Some(CString::new(sanitized).expect("NUL bytes stripped"));
    });
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| slot.borrow_mut().take());
}

/// Borrowed message for the current thread's most recent failure, or null
/// if the last call succeeded. Valid until the next call into this library
/// on the same thread. Do not free.
#[unsafe(no_mangle)]
pub extern "C" fn hier_last_error_message() -> *const c_char {
    LAST_ERROR
        .with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Borrowed, static library version string. Do not free.
#[unsafe(no_mangle)]
pub extern "C" fn hier_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Runs `body` with panic containment, routing any panic to
/// `HIER_STATUS_INTERNAL`.
fn guarded<F: FnOnce() -> HierStatus>(body: F) -> HierStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            HierStatus::Internal
        }
    }
}

/// Reads a required C string argument.
///
/// # Safety
/// `ptr` must be null or a valid NUL-terminated string.
unsafe fn required_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, HierStatus> {
    if ptr.is_null() {
        set_last_error(&format!("{name} must not be null"));
        return Err(HierStatus::NullArgument);
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        set_last_error(&format!("{name} is not valid UTF-8"));
        HierStatus::InvalidUtf8
    })
}

fn write_out_string(out: *mut *mut c_char, value: String) -> HierStatus {
    let sanitized = value.replace('\0', " ");
    let cstring = CString::new(sanitized).expect("NUL bytes stripped");
    unsafe { *out = cstring.into_raw() };
    clear_last_error();
    HierStatus::Ok
}

fn engine_from_config(config: AppConfig) -> Result<Box<HierEngine>, (HierStatus, String)> {
    if config.detector.backend == BackendKind::External {
        return Err((
            HierStatus::Unsupported,
            "the C ABI only exposes the offline rule-based detector".to_string(),
        ));
    }
    let rules = match config.load_atomizer_rules() {
        Ok(rules) => rules,
        Err(e) => return Err((HierStatus::BadInput, e.to_string())),
    };
    Ok(Box::new(HierEngine {
        rules,
        hierarchy: config.hierarchy,
        detector_spec: config.detector,
    }))
}

/// Creates an engine with the built-in defaults (rule-based detector,
/// standard three-level hierarchy). Returns null only on internal failure.
#[unsafe(no_mangle)]
pub extern "C" fn hier_engine_new() -> *mut HierEngine {
    match catch_unwind(|| engine_from_config(AppConfig::default())) {
        Ok(Ok(engine)) => {
            clear_last_error();
            Box::into_raw(engine)
        }
        Ok(Err((_, message))) => {
            set_last_error(&message);
            std::ptr::null_mut()
        }
        Err(_) => {
            set_last_error("internal panic");
            std::ptr::null_mut()
        }
    }
}

/// Creates an engine from a configuration JSON document (the same format
/// the CLI's `--config` accepts). Returns null on failure; consult
/// [`hier_last_error_message`].
///
/// # Safety
/// `config_json` must be null or a valid NUL-terminated string.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn hier_engine_new_with_config(
    config_json: *const c_char,
) -> *mut HierEngine {
    let body = || -> Result<Box<HierEngine>, (HierStatus, String)> {
        let text = unsafe { required_str(config_json, "config_json") }
            .map_err(|status| (status, String::new()))?;
        let config =
            AppConfig::from_json_str(text).map_err(|e| (HierStatus::BadInput, e.to_string()))?;
        engine_from_config(config)
    };
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(engine)) => {
            clear_last_error();
            Box::into_raw(engine)
        }
        Ok(Err((_, message))) => {
            if !message.is_empty() {
                set_last_error(&message);
            }
            std::ptr::null_mut()
        }
        Err(_) => {
            set_last_error("internal panic");
            std::ptr::null_mut()
        }
    }
}

/// Releases an engine. Null is ignored.
///
/// # Safety
/// `engine` must be null or a pointer previously returned by an engine
/// constructor, not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn hier_engine_free(engine: *mut HierEngine) {
    if !engine.is_null() {
        drop(unsafe { Box::from_raw(engine) });
    }
}

/// Releases a string returned through an `out` parameter. Null is ignored.
///
/// # Safety
/// `string` must be null or a pointer previously written by this library,
/// not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn hier_string_free(string: *mut c_char) {
    if !string.is_null() {
        drop(unsafe { CString::from_raw(string) });
    }
}

/// Resolves a context document (`{"messages": [...]}`) through the full
/// pipeline. On success writes a JSON bundle (atoms, conflict matrix,
/// resolution, refined context) to `out_json`.
///
/// # Safety
/// `engine` must be a live engine pointer; `context_json` must be null or
/// a valid NUL-terminated string; `out_json` must be null or a valid
/// destination for one pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn hier_engine_resolve_json(
    engine: *const HierEngine,
    context_json: *const c_char,
    out_json: *mut *mut c_char,
) -> HierStatus {
    guarded(|| {
        if engine.is_null() || out_json.is_null() {
            set_last_error("engine and out_json must not be null");
            return HierStatus::NullArgument;
        }
        let text = match unsafe { required_str(context_json, "context_json") } {
            Ok(text) => text,
            Err(status) => return status,
        };
        let engine = unsafe { &*engine };
        let result = Context::from_json(text).and_then(|context| {
            resolve_context(
                &context,
                &engine.rules,
                &engine.hierarchy,
                &RuleBasedDetector,
                &engine.detector_spec,
            )
        });
        match result.and_then(|bundle| Ok(serde_json::to_string(&bundle)?)) {
            Ok(json) => write_out_string(out_json, json),
            Err(e) => {
                set_last_error(&e.to_string());
                HierStatus::BadInput
            }
        }
    })
}

/// Checks a candidate output against a previously resolved bundle. On
/// success writes a compliance report JSON (`all_pass`, per-constraint
/// results, refusal/hybrid flags) to `out_json`. A failing candidate is
/// still `HIER_STATUS_OK`; the verdict lives in the report.
///
/// # Safety
/// `engine` must be a live engine pointer; `bundle_json` and `candidate`
/// must be null or valid NUL-terminated strings; `out_json` must be null
/// or a valid destination for one pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn hier_engine_verify_json(
    engine: *const HierEngine,
    bundle_json: *const c_char,
    candidate: *const c_char,
    out_json: *mut *mut c_char,
) -> HierStatus {
    guarded(|| {
        if engine.is_null() || out_json.is_null() {
            set_last_error("engine and out_json must not be null");
            return HierStatus::NullArgument;
        }
        let bundle_text = match unsafe { required_str(bundle_json, "bundle_json") } {
            Ok(text) => text,
            Err(status) => return status,
        };
        let candidate = match unsafe { required_str(candidate, "candidate") } {
            Ok(text) => text,
            Err(status) => return status,
        };
        let bundle: ResolveBundle = match serde_json::from_str(bundle_text) {
            Ok(bundle) => bundle,
            Err(e) => {
                set_last_error(&format!("bundle_json: {e}"));
                return HierStatus::BadInput;
            }
        };
        let report = evaluate(
            candidate,
            &bundle.resolution,
            &bundle.atoms,
            &CompilationTable::builtin(),
        );
        match serde_json::to_string(&report) {
            Ok(json) => write_out_string(out_json, json),
            Err(e) => {
                set_last_error(&e.to_string());
                HierStatus::BadInput
            }
        }
    })
}

/// Evaluates the alignment loss for one score record. `scores_json`
/// accepts the same shapes as the CLI's `loss` input: scalar scores
/// (`{"s_w": ..., "s_l": ...}`, optionally with `_ref` fields) or token
/// log-probability arrays (`{"logp_w": [...], "logp_l": [...]}`).
/// `params_json` is an optional `{"tau", "gamma", "beta"}` document; null
/// selects the defaults. Writes the loss breakdown JSON to `out_json`.
///
/// # Safety
/// `scores_json` must be null or a valid NUL-terminated string;
/// `params_json` may be null; `out_json` must be null or a valid
/// destination for one pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn hier_loss_json(
    scores_json: *const c_char,
    params_json: *const c_char,
    out_json: *mut *mut c_char,
) -> HierStatus {
    guarded(|| {
        if out_json.is_null() {
            set_last_error("out_json must not be null");
            return HierStatus::NullArgument;
        }
        let scores_text = match unsafe { required_str(scores_json, "scores_json") } {
            Ok(text) => text,
            Err(status) => return status,
        };
        let params = if params_json.is_null() {
            LossParams::default()
        } else {
            let params_text = match unsafe { required_str(params_json, "params_json") } {
                Ok(text) => text,
                Err(status) => return status,
            };
            match serde_json::from_str(params_text) {
                Ok(params) => params,
                Err(e) => {
                    set_last_error(&format!("params_json: {e}"));
                    return HierStatus::BadInput;
                }
            }
        };
        let result = serde_json::from_str::<ScoreInput>(scores_text)
            .map_err(|e| hier_core::Error::InvalidInput(format!("scores_json: {e}")))
            .and_then(|input| input.into_scores())
            .and_then(|scores| hcal(&scores, &params))
            .and_then(|breakdown| Ok(serde_json::to_string(&breakdown)?));
        match result {
            Ok(json) => write_out_string(out_json, json),
            Err(e) => {
                set_last_error(&e.to_string());
                HierStatus::BadInput
            }
        }
    })
}

//! C ABI for moldream.
//!
//! Molecules and models cross the boundary as opaque handles created and
//! released by this library. Every fallible call returns an [`MdStatus`];
//! on failure a description is available from [`md_last_error`] on the
//! same thread. Strings returned through `char **` out-parameters are owned
//! by the caller and must be released with [`md_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use moldream::dream::{dream, DreamConfig};
use moldream::molgraph::{canonical_key, parse_smiles, write_smiles, MolecularGraph};
use moldream::net::{read_model, Model};
use moldream::oracle::{surrogate_logp, PropertyTable};
use moldream::selfies::{decode, encode, to_onehot, TokenSequence};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    EncodeError = 4,
    IoError = 5,
    InvalidArgument = 6,
    DreamError = 7,
    Panic = 8,
}

/// Opaque molecular graph.
pub struct MdGraph {
    graph: MolecularGraph,
}

/// Opaque trained property model.
pub struct MdModel {
    model: Model,
}

/// Dreaming parameters; obtain defaults from [`md_dream_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdDreamParams {
    /// Target property value in raw units.
    pub target: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub grad_tolerance: f64,
    /// In `[0, 1)`.
    pub noise_upper_bound: f64,
    pub seed: u64,
}

/// Summary of a finished dream.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdDreamSummary {
    /// Network prediction for the final input, raw units.
    pub predicted: f64,
    /// Distinct molecules visited, including the start.
    pub steps: usize,
    pub epochs_run: usize,
    /// 1 if the gradient vanished, 0 if the epoch budget ran out.
    pub converged: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: MdStatus, message: impl Into<String>) -> MdStatus {
    set_error(message.into());
    status
}

/// Runs `f`, turning panics into [`MdStatus::Panic`].
fn guard(f: impl FnOnce() -> MdStatus) -> MdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(MdStatus::Panic, "internal panic"),
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, MdStatus> {
    if s.is_null() {
        return Err(fail(MdStatus::NullPointer, "null string argument"));
    }
    // SAFETY: the caller promises a NUL-terminated string.
    unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|_| fail(MdStatus::InvalidUtf8, "string argument is not UTF-8"))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> MdStatus {
    if out.is_null() {
        return fail(MdStatus::NullPointer, "null output pointer");
    }
    match CString::new(s) {
        Ok(c) => {
            // SAFETY: `out` is non-null and the caller promises it is writable.
            unsafe { *out = c.into_raw() };
            MdStatus::Ok
        }
        Err(_) => fail(MdStatus::InvalidArgument, "string contains NUL"),
    }
}

unsafe fn write_graph(out: *mut *mut MdGraph, graph: MolecularGraph) -> MdStatus {
    if out.is_null() {
        return fail(MdStatus::NullPointer, "null output pointer");
    }
    // SAFETY: `out` is non-null and the caller promises it is writable.
    unsafe { *out = Box::into_raw(Box::new(MdGraph { graph })) };
    MdStatus::Ok
}

unsafe fn graph_ref<'a>(g: *const MdGraph) -> Result<&'a MolecularGraph, MdStatus> {
    // SAFETY: the caller passes null or a live handle from this library.
    unsafe { g.as_ref() }
        .map(|h| &h.graph)
        .ok_or_else(|| fail(MdStatus::NullPointer, "null graph handle"))
}

unsafe fn model_ref<'a>(m: *const MdModel) -> Result<&'a Model, MdStatus> {
    // SAFETY: the caller passes null or a live handle from this library.
    unsafe { m.as_ref() }
        .map(|h| &h.model)
        .ok_or_else(|| fail(MdStatus::NullPointer, "null model handle"))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Description of the last failure on this thread, or NULL if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn md_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn md_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn md_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: `s` came from `CString::into_raw` in this library.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Parses a SMILES string into a new graph handle.
///
/// # Safety
/// `smiles` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_graph_from_smiles(smiles: *const c_char, out: *mut *mut MdGraph) -> MdStatus {
    guard(|| {
        let text = tri!(unsafe { read_str(smiles) });
        match parse_smiles(text) {
            Ok(g) => unsafe { write_graph(out, g) },
            Err(e) => fail(MdStatus::ParseError, e.to_string()),
        }
    })
}

/// Decodes a bracketed token string such as `[C][=O]` into a new graph.
/// Every sequence of known tokens decodes to a valid molecule.
///
/// # Safety
/// `tokens` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_graph_from_tokens(tokens: *const c_char, out: *mut *mut MdGraph) -> MdStatus {
    guard(|| {
        let text = tri!(unsafe { read_str(tokens) });
        match text.parse::<TokenSequence>() {
            Ok(seq) => unsafe { write_graph(out, decode(&seq)) },
            Err(e) => fail(MdStatus::ParseError, e.to_string()),
        }
    })
}

/// Releases a graph handle. NULL is ignored.
///
/// # Safety
/// `g` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn md_graph_free(g: *mut MdGraph) {
    if !g.is_null() {
        // SAFETY: `g` came from `Box::into_raw` in this library.
        drop(unsafe { Box::from_raw(g) });
    }
}

/// Heavy-atom count, or 0 for NULL.
///
/// # Safety
/// `g` must be NULL or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn md_graph_atom_count(g: *const MdGraph) -> usize {
    // SAFETY: forwarded caller contract.
    unsafe { g.as_ref() }.map_or(0, |h| h.graph.atom_count())
}

/// Writes the graph as SMILES into a new string.
///
/// # Safety
/// `g` must be a live graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_graph_to_smiles(g: *const MdGraph, out: *mut *mut c_char) -> MdStatus {
    guard(|| {
        let graph = tri!(unsafe { graph_ref(g) });
        unsafe { write_string(out, write_smiles(graph)) }
    })
}

/// Writes the isomorphism-invariant key of the graph into a new string.
///
/// # Safety
/// `g` must be a live graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_graph_canonical_key(g: *const MdGraph, out: *mut *mut c_char) -> MdStatus {
    guard(|| {
        let graph = tri!(unsafe { graph_ref(g) });
        unsafe { write_string(out, canonical_key(graph).to_string()) }
    })
}

/// Encodes the graph as a token string of at most `max_len` tokens.
///
/// # Safety
/// `g` must be a live graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_graph_encode(g: *const MdGraph, max_len: usize, out: *mut *mut c_char) -> MdStatus {
    guard(|| {
        let graph = tri!(unsafe { graph_ref(g) });
        match encode(graph, max_len) {
            Ok(seq) => unsafe { write_string(out, seq.to_string()) },
            Err(e) => fail(MdStatus::EncodeError, e.to_string()),
        }
    })
}

/// Surrogate lipophilicity of the graph under the default table.
///
/// # Safety
/// `g` must be a live graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_surrogate_logp(g: *const MdGraph, out: *mut f64) -> MdStatus {
    guard(|| {
        let graph = tri!(unsafe { graph_ref(g) });
        if out.is_null() {
            return fail(MdStatus::NullPointer, "null output pointer");
        }
        // SAFETY: checked non-null; caller promises it is writable.
        unsafe { *out = surrogate_logp(graph, &PropertyTable::default()) };
        MdStatus::Ok
    })
}

/// Loads a model file written by `moldream train`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_model_load(path: *const c_char, out: *mut *mut MdModel) -> MdStatus {
    guard(|| {
        let p = tri!(unsafe { read_str(path) });
        if out.is_null() {
            return fail(MdStatus::NullPointer, "null output pointer");
        }
        match read_model(Path::new(p)) {
            Ok(model) => {
                // SAFETY: checked non-null; caller promises it is writable.
                unsafe { *out = Box::into_raw(Box::new(MdModel { model })) };
                MdStatus::Ok
            }
            Err(e) => fail(MdStatus::IoError, format!("{p}: {e}")),
        }
    })
}

/// Releases a model handle. NULL is ignored.
///
/// # Safety
/// `m` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn md_model_free(m: *mut MdModel) {
    if !m.is_null() {
        // SAFETY: `m` came from `Box::into_raw` in this library.
        drop(unsafe { Box::from_raw(m) });
    }
}

/// Network prediction for a molecule, raw property units.
///
/// # Safety
/// `m` and `g` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_model_predict(m: *const MdModel, g: *const MdGraph, out: *mut f64) -> MdStatus {
    guard(|| {
        let model = tri!(unsafe { model_ref(m) });
        let graph = tri!(unsafe { graph_ref(g) });
        if out.is_null() {
            return fail(MdStatus::NullPointer, "null output pointer");
        }
        let x = match encode(graph, model.max_len).map(|t| to_onehot(&t, model.max_len)) {
            Ok(Ok(x)) => x,
            Ok(Err(e)) => return fail(MdStatus::EncodeError, e.to_string()),
            Err(e) => return fail(MdStatus::EncodeError, e.to_string()),
        };
        match model.predict_raw(x.values()) {
            Ok(v) => {
                // SAFETY: checked non-null; caller promises it is writable.
                unsafe { *out = v };
                MdStatus::Ok
            }
            Err(e) => fail(MdStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Default dreaming parameters with the given target.
#[no_mangle]
pub extern "C" fn md_dream_params_default(target: f64) -> MdDreamParams {
    let d = DreamConfig::default();
    MdDreamParams {
        target,
        learning_rate: d.learning_rate,
        max_epochs: d.max_epochs,
        grad_tolerance: d.grad_tolerance,
        noise_upper_bound: d.noise_upper_bound,
        seed: d.seed,
    }
}

/// Dreams `start` toward `params->target`. On success `*out_final` receives
/// a new handle to the final molecule and `*out_summary` (if not NULL) the
/// run summary.
///
/// # Safety
/// `m`, `start` and `params` must be valid; `out_final` must be writable;
/// `out_summary` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn md_dream(
    m: *const MdModel,
    start: *const MdGraph,
    params: *const MdDreamParams,
    out_final: *mut *mut MdGraph,
    out_summary: *mut MdDreamSummary,
) -> MdStatus {
    guard(|| {
        let model = tri!(unsafe { model_ref(m) });
        let graph = tri!(unsafe { graph_ref(start) });
        // SAFETY: the caller passes null or a readable struct.
        let p = tri!(unsafe { params.as_ref() }.ok_or_else(|| fail(MdStatus::NullPointer, "null params")));
        if out_final.is_null() {
            return fail(MdStatus::NullPointer, "null output pointer");
        }
        let cfg = DreamConfig {
            target: p.target,
            learning_rate: p.learning_rate,
            max_epochs: p.max_epochs,
            grad_tolerance: p.grad_tolerance,
            noise_upper_bound: p.noise_upper_bound,
            seed: p.seed,
            renoise_each_epoch: false,
        };
        if let Err(e) = cfg.validate() {
            return fail(MdStatus::InvalidArgument, e.to_string());
        }
        match dream(model, graph, &cfg) {
            Ok(t) => {
                let summary = MdDreamSummary {
                    predicted: t.final_predicted,
                    steps: t.steps.len(),
                    epochs_run: t.epochs_run,
                    converged: i32::from(t.termination == moldream::dream::Termination::GradientVanished),
                };
                // SAFETY: out_summary is null or writable per contract.
                if let Some(s) = unsafe { out_summary.as_mut() } {
                    *s = summary;
                }
                unsafe { write_graph(out_final, t.last().graph.clone()) }
            }
            Err(e) => fail(MdStatus::DreamError, e.to_string()),
        }
    })
}

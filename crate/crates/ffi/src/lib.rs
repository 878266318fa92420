//! C ABI over the protoperf library.
//!
//! Registries and corpora are opaque handles owned by the caller and released
//! with their `_free` function. Every fallible call returns a [`PpStatus`];
//! on failure the message is available from [`pp_last_error`] on the same
//! thread. Strings handed out by the library must go back to
//! [`pp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use protoperf::category::Category;
use protoperf::estimator::{compare_protocols, estimate_protocol, Faster};
use protoperf::generator::{generate_corpus, GenConfig};
use protoperf::model::{fit_cubic_points, ModelRegistry, RegistryError, TimeUnit};
use protoperf::protocol::{parse_corpus, serialize_corpus, Protocol};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Parse = 5,
    Registry = 6,
    Estimate = 7,
    Fit = 8,
    NotFound = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpCategory {
    SymmetricEncrypt = 0,
    SymmetricDecrypt = 1,
    Hash = 2,
    AsymmetricEncrypt = 3,
    AsymmetricDecrypt = 4,
}

impl From<PpCategory> for Category {
    fn from(c: PpCategory) -> Category {
        Category::ALL[c as usize]
    }
}

/// Which side a comparison predicts to be cheaper.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum PpFaster {
    P = 0,
    Q = 1,
    #[default]
    Tie = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PpVerdict {
    pub est_p: f64,
    pub est_q: f64,
    /// NaN when `est_q` is zero.
    pub est_ratio: f64,
    pub faster: PpFaster,
}

pub struct PpRegistry(ModelRegistry);

pub struct PpCorpus(Vec<Protocol>);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

type Failure = (PpStatus, String);

fn fail(status: PpStatus, e: impl std::fmt::Display) -> Failure {
    (status, e.to_string())
}

/// Runs `f`, records any failure, and turns panics into [`PpStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            PpStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            PpStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(PpStatus::NullArgument, format!("`{name}` is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(PpStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(PpStatus::NullArgument, format!("`{name}` is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(PpStatus::NullArgument, format!("`{name}` is null")))
}

fn find<'a>(corpus: &'a [Protocol], id: &str) -> Result<&'a Protocol, Failure> {
    corpus
        .iter()
        .find(|p| p.id == id)
        .ok_or_else(|| fail(PpStatus::NotFound, format!("no protocol `{id}` in corpus")))
}

/// Message of the last failed call on this thread, or "" after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn pp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` is null or a string returned by this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn pp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pp_registry_load(path: *const c_char, out: *mut *mut PpRegistry) -> PpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let reg = ModelRegistry::load(path).map_err(|e| match e {
            RegistryError::Io { .. } => fail(PpStatus::Io, e),
            _ => fail(PpStatus::Registry, e),
        })?;
        *out = Box::into_raw(Box::new(PpRegistry(reg)));
        Ok(())
    })
}

/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pp_registry_from_json(json: *const c_char, out: *mut *mut PpRegistry) -> PpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let reg = ModelRegistry::from_json_str(str_arg(json, "json")?).map_err(|e| fail(PpStatus::Registry, e))?;
        *out = Box::into_raw(Box::new(PpRegistry(reg)));
        Ok(())
    })
}

/// The bundled reference coefficients.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pp_registry_table1(out: *mut *mut PpRegistry) -> PpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(PpRegistry(ModelRegistry::table1())));
        Ok(())
    })
}

/// Serializes the registry to its JSON file format. Free with [`pp_string_free`].
///
/// # Safety
/// `reg` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pp_registry_to_json(reg: *const PpRegistry, out: *mut *mut c_char) -> PpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let reg = ref_arg(reg, "reg")?;
        *out = CString::new(reg.0.to_json_string()).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// Evaluates one category's model at `x`.
///
/// # Safety
/// `reg` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pp_registry_eval(
    reg: *const PpRegistry,
    category: PpCategory,
    x: f64,
    out: *mut f64,
) -> PpStatus {
    guard(|| {
        let reg = ref_arg(reg, "reg")?;
        let out = out_arg(out, "out")?;
        *out = reg.0.get(category.into()).eval(x).map_err(|e| fail(PpStatus::InvalidArgument, e))?;
        Ok(())
    })
}

/// # Safety
/// `reg` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pp_registry_free(reg: *mut PpRegistry) {
    if !reg.is_null() {
        drop(Box::from_raw(reg));
    }
}

/// # Safety
/// `text` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pp_corpus_parse(text: *const c_char, out: *mut *mut PpCorpus) -> PpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let corpus = parse_corpus(str_arg(text, "text")?).map_err(|e| fail(PpStatus::Parse, e))?;
        *out = Box::into_raw(Box::new(PpCorpus(corpus)));
        Ok(())
    })
}

/// Generates `n` protocols from `seed` with the default generator settings.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pp_generate(seed: u64, n: usize, out: *mut *mut PpCorpus) -> PpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let corpus = generate_corpus(seed, n, &GenConfig::default()).map_err(|e| fail(PpStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(PpCorpus(corpus)));
        Ok(())
    })
}

/// Canonical text of the corpus. Free with [`pp_string_free`].
///
/// # Safety
/// `corpus` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pp_corpus_serialize(corpus: *const PpCorpus, out: *mut *mut c_char) -> PpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let corpus = ref_arg(corpus, "corpus")?;
        *out = CString::new(serialize_corpus(&corpus.0)).expect("DSL text has no NUL").into_raw();
        Ok(())
    })
}

/// Number of protocols, 0 for a null handle.
///
/// # Safety
/// `corpus` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pp_corpus_len(corpus: *const PpCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.len())
}

/// # Safety
/// `corpus` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pp_corpus_free(corpus: *mut PpCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Estimated cost of protocol `id`, in the registry's unit.
///
/// # Safety
/// Handles are live; `id` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pp_estimate(
    reg: *const PpRegistry,
    corpus: *const PpCorpus,
    id: *const c_char,
    out: *mut f64,
) -> PpStatus {
    guard(|| {
        let reg = ref_arg(reg, "reg")?;
        let corpus = ref_arg(corpus, "corpus")?;
        let out = out_arg(out, "out")?;
        let p = find(&corpus.0, str_arg(id, "id")?)?;
        *out = estimate_protocol(p, &reg.0).map_err(|e| fail(PpStatus::Estimate, e))?;
        Ok(())
    })
}

/// Compares protocols `p_id` and `q_id`. Relative gaps up to `tie_epsilon`
/// count as a tie.
///
/// # Safety
/// Handles are live; ids are NUL-terminated strings; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pp_compare(
    reg: *const PpRegistry,
    corpus: *const PpCorpus,
    p_id: *const c_char,
    q_id: *const c_char,
    tie_epsilon: f64,
    out: *mut PpVerdict,
) -> PpStatus {
    guard(|| {
        let reg = ref_arg(reg, "reg")?;
        let corpus = ref_arg(corpus, "corpus")?;
        let out = out_arg(out, "out")?;
        let p = find(&corpus.0, str_arg(p_id, "p_id")?)?;
        let q = find(&corpus.0, str_arg(q_id, "q_id")?)?;
        let v = compare_protocols(p, q, &reg.0, tie_epsilon).map_err(|e| fail(PpStatus::Estimate, e))?;
        *out = PpVerdict {
            est_p: v.est_p,
            est_q: v.est_q,
            est_ratio: v.est_ratio.unwrap_or(f64::NAN),
            faster: match v.predicted_faster {
                Faster::P => PpFaster::P,
                Faster::Q => PpFaster::Q,
                Faster::Tie => PpFaster::Tie,
            },
        };
        Ok(())
    })
}

/// Least-squares cubic through `n` points. Writes `[α₁, α₂, α₃, α₄]`
/// (constant term first) to `coeffs_out` and the RMSE to `rmse_out` if it is
/// not null.
///
/// # Safety
/// `xs` and `ys` point to `n` readable doubles; `coeffs_out` to 4 writable
/// ones.
#[no_mangle]
pub unsafe extern "C" fn pp_fit_cubic(
    xs: *const f64,
    ys: *const f64,
    n: usize,
    coeffs_out: *mut f64,
    rmse_out: *mut f64,
) -> PpStatus {
    guard(|| {
        if xs.is_null() || ys.is_null() || coeffs_out.is_null() {
            return Err(fail(PpStatus::NullArgument, "`xs`, `ys` and `coeffs_out` must not be null"));
        }
        let xs = std::slice::from_raw_parts(xs, n);
        let ys = std::slice::from_raw_parts(ys, n);
        let (model, stats) = fit_cubic_points(xs, ys, TimeUnit::Ns).map_err(|e| fail(PpStatus::Fit, e))?;
        std::slice::from_raw_parts_mut(coeffs_out, 4).copy_from_slice(&model.coefficients());
        if let Some(r) = rmse_out.as_mut() {
            *r = stats.rmse;
        }
        Ok(())
    })
}

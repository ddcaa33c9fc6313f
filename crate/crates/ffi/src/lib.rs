//! C ABI over `relbelief`.
//!
//! Models and evidence tables are opaque handles created and destroyed by
//! this library. Every entry point returns an [`RbStatus`]; on failure the
//! message is kept per thread and read with [`rb_last_error_message`].
//! Arrays are caller-allocated and passed with their length.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use relbelief::classify::risk_table;
use relbelief::decision::{decide, LossKind};
use relbelief::evidence::{credible_region, rb_estimate, rb_table, strength, Convention, EvidenceTable};
use relbelief::model::{psi_posterior, psi_prior, FiniteModel, ModelDoc, PsiMap};
use relbelief::regress::{functional_inference, RegressionSpec};
use relbelief::Error;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Numerical = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// A validated finite model with its psi map.
pub struct RbModel {
    model: FiniteModel,
    psi: PsiMap,
}

/// Relative belief table for one observation, indexed by psi.
pub struct RbEvidence {
    table: EvidenceTable,
    n_psi: usize,
}

/// One row of the simulated misclassification table.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RbRiskRow {
    pub beta: f64,
    pub map_err0: f64,
    pub map_err1: f64,
    pub map_sum: f64,
    pub rb_err0: f64,
    pub rb_err1: f64,
    pub rb_sum: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RbStatus {
    match e {
        Error::Parse(_) | Error::Io(_) => RbStatus::Parse,
        e if e.is_numerical_guard() => RbStatus::Numerical,
        _ => RbStatus::Validation,
    }
}

fn fail(status: RbStatus, msg: impl Into<String>) -> RbStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, turning panics into [`RbStatus::Panic`].
fn guard(f: impl FnOnce() -> RbStatus) -> RbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(RbStatus::Panic, "internal panic"),
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, RbStatus> {
    if p.is_null() {
        return Err(fail(RbStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(RbStatus::InvalidUtf8, "argument is not valid UTF-8"))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, needed: usize) -> Result<&'a mut [T], RbStatus> {
    if p.is_null() {
        return Err(fail(RbStatus::NullPointer, "null output buffer"));
    }
    if len < needed {
        return Err(fail(
            RbStatus::BufferTooSmall,
            format!("buffer holds {len} values, {needed} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

unsafe fn in_slice<'a, T>(p: *const T, len: usize) -> Result<&'a [T], RbStatus> {
    if p.is_null() && len > 0 {
        return Err(fail(RbStatus::NullPointer, "null input array"));
    }
    if len == 0 {
        return Ok(&[]);
    }
    Ok(std::slice::from_raw_parts(p, len))
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! try_rb {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return fail(status_of(&e), e.to_string()),
        }
    };
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to fit). Returns the full message length without the NUL, or 0
/// when no error has been recorded.
#[no_mangle]
pub unsafe extern "C" fn rb_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Parses and validates a model document.
#[no_mangle]
pub unsafe extern "C" fn rb_model_from_json(json: *const c_char, out: *mut *mut RbModel) -> RbStatus {
    guard(|| {
        if out.is_null() {
            return fail(RbStatus::NullPointer, "null output handle");
        }
        let text = try_ffi!(read_str(json));
        let doc = try_rb!(ModelDoc::from_json(text));
        let (model, psi) = try_rb!(doc.build());
        *out = Box::into_raw(Box::new(RbModel { model, psi }));
        RbStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn rb_model_free(model: *mut RbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of observation values, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn rb_model_n_x(model: *const RbModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.n_x())
}

/// Number of psi values, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn rb_model_n_psi(model: *const RbModel) -> usize {
    model.as_ref().map_or(0, |m| m.psi.n_psi())
}

/// Posterior of psi at observation `x`, written to `out[0..n_psi]`.
#[no_mangle]
pub unsafe extern "C" fn rb_model_posterior(model: *const RbModel, x: usize, out: *mut f64, len: usize) -> RbStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(RbStatus::NullPointer, "null model");
        };
        let post = try_rb!(psi_posterior(&m.model, &m.psi, x));
        try_ffi!(out_slice(out, len, post.len())).copy_from_slice(&post);
        RbStatus::Ok
    })
}

/// Builds the relative belief table of psi at observation `x`.
#[no_mangle]
pub unsafe extern "C" fn rb_evidence_new(model: *const RbModel, x: usize, out: *mut *mut RbEvidence) -> RbStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(RbStatus::NullPointer, "null model");
        };
        if out.is_null() {
            return fail(RbStatus::NullPointer, "null output handle");
        }
        let prior = try_rb!(psi_prior(&m.model, &m.psi));
        let post = try_rb!(psi_posterior(&m.model, &m.psi, x));
        let table = try_rb!(rb_table(&prior, &post, Some(m.psi.labels())));
        *out = Box::into_raw(Box::new(RbEvidence {
            table,
            n_psi: m.psi.n_psi(),
        }));
        RbStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn rb_evidence_free(ev: *mut RbEvidence) {
    if !ev.is_null() {
        drop(Box::from_raw(ev));
    }
}

/// Number of psi values covered by the table, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn rb_evidence_len(ev: *const RbEvidence) -> usize {
    ev.as_ref().map_or(0, |e| e.n_psi)
}

/// Relative belief ratios by psi index; NaN where prior and posterior are both 0.
#[no_mangle]
pub unsafe extern "C" fn rb_evidence_rb(ev: *const RbEvidence, out: *mut f64, len: usize) -> RbStatus {
    guard(|| {
        let Some(e) = ev.as_ref() else {
            return fail(RbStatus::NullPointer, "null evidence");
        };
        let out = try_ffi!(out_slice(out, len, e.n_psi));
        out.fill(f64::NAN);
        for (i, &src) in e.table.source.iter().enumerate() {
            out[src] = e.table.rb[i];
        }
        RbStatus::Ok
    })
}

/// The RB estimate as a psi index; `tie` is set when the maximum is shared.
#[no_mangle]
pub unsafe extern "C" fn rb_evidence_estimate(ev: *const RbEvidence, index: *mut usize, tie: *mut bool) -> RbStatus {
    guard(|| {
        let Some(e) = ev.as_ref() else {
            return fail(RbStatus::NullPointer, "null evidence");
        };
        if index.is_null() || tie.is_null() {
            return fail(RbStatus::NullPointer, "null output");
        }
        let est = rb_estimate(&e.table);
        *index = e.table.source[est.index];
        *tie = est.tie;
        RbStatus::Ok
    })
}

/// Strength of the evidence at psi index `psi0`.
#[no_mangle]
pub unsafe extern "C" fn rb_evidence_strength(ev: *const RbEvidence, psi0: usize, out: *mut f64) -> RbStatus {
    guard(|| {
        let Some(e) = ev.as_ref() else {
            return fail(RbStatus::NullPointer, "null evidence");
        };
        if out.is_null() {
            return fail(RbStatus::NullPointer, "null output");
        }
        let Some(pos) = e.table.position_of_source(psi0) else {
            return fail(RbStatus::Validation, format!("psi index {psi0} is not in the table"));
        };
        *out = try_rb!(strength(&e.table, pos));
        RbStatus::Ok
    })
}

/// Membership (0/1) of each psi index in the gamma-credible region.
#[no_mangle]
pub unsafe extern "C" fn rb_evidence_credible(
    ev: *const RbEvidence,
    gamma: f64,
    mask: *mut u8,
    len: usize,
) -> RbStatus {
    guard(|| {
        let Some(e) = ev.as_ref() else {
            return fail(RbStatus::NullPointer, "null evidence");
        };
        let mask = try_ffi!(out_slice(mask, len, e.n_psi));
        let region = try_rb!(credible_region(&e.table, gamma, Convention::SupGeq));
        mask.fill(0);
        for i in region.members {
            mask[e.table.source[i]] = 1;
        }
        RbStatus::Ok
    })
}

/// Bayes rule and risks as a JSON string. `loss` is "rb", "map" or "rb-eta";
/// `eta` is ignored unless the loss needs it. Free the result with
/// [`rb_string_free`].
#[no_mangle]
pub unsafe extern "C" fn rb_decide_json(
    model: *const RbModel,
    loss: *const c_char,
    eta: f64,
    out: *mut *mut c_char,
) -> RbStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(RbStatus::NullPointer, "null model");
        };
        if out.is_null() {
            return fail(RbStatus::NullPointer, "null output");
        }
        let kind: LossKind = try_rb!(try_ffi!(read_str(loss)).parse());
        let eta = matches!(kind, LossKind::RbEta | LossKind::RbLambdaEta).then_some(eta);
        let report = try_rb!(decide(&m.model, &m.psi, kind, eta));
        let json = try_rb!(serde_json::to_string(&report).map_err(|e| Error::Parse(e.to_string())));
        *out = CString::new(json).expect("JSON has no NUL").into_raw();
        RbStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn rb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Simulated misclassification rates for each beta, written to `out[0..n_betas]`.
#[no_mangle]
pub unsafe extern "C" fn rb_classify_table1(
    alpha: f64,
    betas: *const f64,
    n_betas: usize,
    mu: f64,
    n: u64,
    reps: u64,
    seed: u64,
    out: *mut RbRiskRow,
    out_len: usize,
) -> RbStatus {
    guard(|| {
        let betas = try_ffi!(in_slice(betas, n_betas));
        let out = try_ffi!(out_slice(out, out_len, n_betas));
        let rows = try_rb!(risk_table(alpha, betas, mu, n, reps, seed));
        for (o, r) in out.iter_mut().zip(rows) {
            *o = RbRiskRow {
                beta: r.beta,
                map_err0: r.map_err0,
                map_err1: r.map_err1,
                map_sum: r.map_sum,
                rb_err0: r.rb_err0,
                rb_err1: r.rb_err1,
                rb_sum: r.rb_sum,
            };
        }
        RbStatus::Ok
    })
}

/// RB estimate and RB prediction of `w' beta` in normal regression.
/// `design` is row-major `n x k`.
#[no_mangle]
pub unsafe extern "C" fn rb_regress_functional(
    design: *const f64,
    n: usize,
    k: usize,
    response: *const f64,
    sigma2: f64,
    tau2: f64,
    w: *const f64,
    psi_rb: *mut f64,
    z_rb: *mut f64,
) -> RbStatus {
    guard(|| {
        if psi_rb.is_null() || z_rb.is_null() {
            return fail(RbStatus::NullPointer, "null output");
        }
        let x = try_ffi!(in_slice(design, n * k));
        let y = try_ffi!(in_slice(response, n));
        let w = try_ffi!(in_slice(w, k));
        let spec = try_rb!(RegressionSpec::new(
            relbelief_matrix(n, k, x),
            relbelief_vector(y),
            sigma2,
            tau2
        ));
        let f = try_rb!(functional_inference(&spec, &relbelief_vector(w)));
        *psi_rb = f.psi_rb;
        *z_rb = f.z_rb;
        RbStatus::Ok
    })
}

fn relbelief_matrix(n: usize, k: usize, row_major: &[f64]) -> relbelief::regress::Matrix {
    relbelief::regress::Matrix::from_row_slice(n, k, row_major)
}

fn relbelief_vector(v: &[f64]) -> relbelief::regress::Vector {
    relbelief::regress::Vector::from_column_slice(v)
}

//! C ABI for the `parafac2` crate.
//!
//! Every function returns a [`Pf2Status`]; on failure the message is kept
//! per thread and read with [`pf2_last_error_message`]. Matrices cross the
//! boundary as column-major `double` buffers. Handles are opaque and are
//! released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use parafac2::runner::{fit_multi, FitMethod, MultiFitOptions, MultiFitReport};
use parafac2::simulate::simulate;
use parafac2::{
    fms, relative_sse, AlsConfig, Error, FmsOptions, Matrix, Pf2Factors, Regularizer, Setup, SimSpec, SliceStack,
    SolverConfig,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pf2Status {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Numerical = 4,
    Io = 5,
    Format = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pf2RegKind {
    None = 0,
    NonNeg = 1,
    Ridge = 2,
    TotalVariation = 3,
    GraphLaplacian = 4,
}

/// Regularizer of one mode; `strength` is ignored for `None` and `NonNeg`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct Pf2Reg {
    pub kind: Pf2RegKind,
    pub strength: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct Pf2AoAdmmOptions {
    pub rank: usize,
    pub reg_a: Pf2Reg,
    pub reg_b: Pf2Reg,
    pub reg_d: Pf2Reg,
    pub n_inits: usize,
    pub seed: u64,
    pub max_iter: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct Pf2AlsOptions {
    pub rank: usize,
    pub nonneg_a: bool,
    pub nonneg_d: bool,
    pub n_inits: usize,
    pub seed: u64,
    pub max_iter: usize,
}

/// Ragged stack of data slices.
pub struct Pf2Stack {
    inner: SliceStack,
}

/// Fitted or true factors, with the fit summary when produced by a fit.
pub struct Pf2Model {
    factors: Pf2Factors,
    report: Option<MultiFitReport>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> Pf2Status {
    match e {
        Error::Io { .. } => Pf2Status::Io,
        Error::Format { .. } => Pf2Status::Format,
        Error::Shape(_) | Error::IndexOutOfRange { .. } => Pf2Status::Shape,
        e if e.is_numerical() => Pf2Status::Numerical,
        _ => Pf2Status::InvalidArgument,
    }
}

struct Failure(Pf2Status, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(Pf2Status::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(Pf2Status::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> Pf2Status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            clear_last_error();
            Pf2Status::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            Pf2Status::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn copy_matrix(m: &Matrix, buf: *mut f64, len: usize) -> Result<(), Failure> {
    if buf.is_null() {
        return Err(null("buf"));
    }
    let src = m.as_slice();
    if len != src.len() {
        return Err(Failure(
            Pf2Status::Shape,
            format!("buffer holds {len} values, matrix has {}", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, len);
    Ok(())
}

fn regularizer(r: Pf2Reg) -> Regularizer {
    match r.kind {
        Pf2RegKind::None => Regularizer::None,
        Pf2RegKind::NonNeg => Regularizer::NonNeg,
        Pf2RegKind::Ridge => Regularizer::Ridge(r.strength),
        Pf2RegKind::TotalVariation => Regularizer::TotalVariation(r.strength),
        Pf2RegKind::GraphLaplacian => Regularizer::GraphLaplacian(r.strength),
    }
}

/// Null-terminated library version; static storage.
#[no_mangle]
pub extern "C" fn pf2_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn pf2_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Build a stack from `n_slices` column-major slices of `n_rows` rows stored
/// back to back in `data`; slice `k` has `cols[k]` columns.
///
/// # Safety
/// `cols` must point to `n_slices` values and `data` to `data_len` values.
#[no_mangle]
pub unsafe extern "C" fn pf2_stack_new(
    n_rows: usize,
    n_slices: usize,
    cols: *const usize,
    data: *const f64,
    data_len: usize,
    out: *mut *mut Pf2Stack,
) -> Pf2Status {
    guard(|| {
        if cols.is_null() || data.is_null() || out.is_null() {
            return Err(null("cols, data or out"));
        }
        let cols = std::slice::from_raw_parts(cols, n_slices);
        let data = std::slice::from_raw_parts(data, data_len);
        let needed = cols
            .iter()
            .try_fold(0usize, |acc, &c| acc.checked_add(n_rows.checked_mul(c)?));
        if needed != Some(data_len) {
            return Err(Failure(
                Pf2Status::Shape,
                format!("data holds {data_len} values, slices need {needed:?}"),
            ));
        }
        let mut offset = 0;
        let slices = cols
            .iter()
            .map(|&c| {
                let m = Matrix::from_column_slice(n_rows, c, &data[offset..offset + n_rows * c]);
                offset += n_rows * c;
                m
            })
            .collect();
        let stack = SliceStack::new(slices)?;
        write_out(out, Box::into_raw(Box::new(Pf2Stack { inner: stack })), "out")
    })
}

/// Load the slices of a dataset directory.
///
/// # Safety
/// `dir` must be a null-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pf2_stack_load_dir(dir: *const c_char, out: *mut *mut Pf2Stack) -> Pf2Status {
    guard(|| {
        if dir.is_null() || out.is_null() {
            return Err(null("dir or out"));
        }
        let dir = CStr::from_ptr(dir).to_str().map_err(|_| invalid("dir is not UTF-8"))?;
        let data = parafac2::io::load_dataset(Path::new(dir))?;
        write_out(out, Box::into_raw(Box::new(Pf2Stack { inner: data.stack })), "out")
    })
}

/// # Safety
/// `stack` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pf2_stack_free(stack: *mut Pf2Stack) {
    if !stack.is_null() {
        drop(Box::from_raw(stack));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pf2_stack_dims(stack: *const Pf2Stack, n_rows: *mut usize, n_slices: *mut usize) -> Pf2Status {
    guard(|| {
        let s = &deref(stack, "stack")?.inner;
        write_out(n_rows, s.n_rows(), "n_rows")?;
        write_out(n_slices, s.n_slices(), "n_slices")
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pf2_stack_slice_cols(stack: *const Pf2Stack, k: usize, cols: *mut usize) -> Pf2Status {
    guard(|| {
        let s = &deref(stack, "stack")?.inner;
        write_out(cols, s.slice(k)?.ncols(), "cols")
    })
}

/// Defaults: no regularization, 5 initializations, seed 0, 1000 iterations.
#[no_mangle]
pub extern "C" fn pf2_aoadmm_options_default(rank: usize) -> Pf2AoAdmmOptions {
    let none = Pf2Reg {
        kind: Pf2RegKind::None,
        strength: 0.0,
    };
    Pf2AoAdmmOptions {
        rank,
        reg_a: none,
        reg_b: none,
        reg_d: none,
        n_inits: 5,
        seed: 0,
        max_iter: SolverConfig::new(rank).outer_max_iter,
    }
}

/// Defaults: nonnegative `D`, unconstrained `A`, 5 initializations, seed 0.
#[no_mangle]
pub extern "C" fn pf2_als_options_default(rank: usize) -> Pf2AlsOptions {
    let cfg = AlsConfig::new(rank);
    Pf2AlsOptions {
        rank,
        nonneg_a: cfg.nonneg_a,
        nonneg_d: cfg.nonneg_d,
        n_inits: 5,
        seed: 0,
        max_iter: cfg.outer_max_iter,
    }
}

unsafe fn run_fit(
    stack: *const Pf2Stack,
    method: FitMethod,
    n_inits: usize,
    seed: u64,
    out: *mut *mut Pf2Model,
) -> Result<(), Failure> {
    let s = &deref(stack, "stack")?.inner;
    if out.is_null() {
        return Err(null("out"));
    }
    let options = MultiFitOptions {
        n_inits,
        base_seed: seed,
        keep_traces: false,
    };
    let (factors, report) = fit_multi(s, &method, options)?;
    let model = Pf2Model {
        factors,
        report: Some(report),
    };
    write_out(out, Box::into_raw(Box::new(model)), "out")
}

/// Fit with AO-ADMM, keeping the initialization with the lowest objective.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pf2_fit_aoadmm(
    stack: *const Pf2Stack,
    options: *const Pf2AoAdmmOptions,
    out: *mut *mut Pf2Model,
) -> Pf2Status {
    guard(|| {
        let o = *deref(options, "options")?;
        let mut cfg = SolverConfig::new(o.rank).with_regularizers(
            regularizer(o.reg_a),
            regularizer(o.reg_b),
            regularizer(o.reg_d),
        );
        cfg.outer_max_iter = o.max_iter;
        run_fit(stack, FitMethod::AoAdmm(cfg), o.n_inits, o.seed, out)
    })
}

/// Fit with the ALS baseline, keeping the initialization with the lowest
/// objective.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pf2_fit_als(
    stack: *const Pf2Stack,
    options: *const Pf2AlsOptions,
    out: *mut *mut Pf2Model,
) -> Pf2Status {
    guard(|| {
        let o = *deref(options, "options")?;
        let mut cfg = AlsConfig::new(o.rank);
        cfg.nonneg_a = o.nonneg_a;
        cfg.nonneg_d = o.nonneg_d;
        cfg.outer_max_iter = o.max_iter;
        run_fit(stack, FitMethod::Als(cfg), o.n_inits, o.seed, out)
    })
}

/// Simulate a dataset; writes the noisy stack and the true factors.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pf2_simulate(
    setup: u32,
    eta: f64,
    n_rows: usize,
    n_cols: usize,
    n_slices: usize,
    rank: usize,
    seed: u64,
    stack_out: *mut *mut Pf2Stack,
    truth_out: *mut *mut Pf2Model,
) -> Pf2Status {
    guard(|| {
        if stack_out.is_null() || truth_out.is_null() {
            return Err(null("stack_out or truth_out"));
        }
        let setup = u8::try_from(setup).map_err(|_| invalid(format!("unknown setup {setup}")))?;
        let spec = SimSpec::new(Setup::try_from(setup)?, eta, seed).with_dims(n_rows, n_cols, n_slices, rank);
        let sim = simulate(&spec)?;
        stack_out.write(Box::into_raw(Box::new(Pf2Stack { inner: sim.noisy })));
        truth_out.write(Box::into_raw(Box::new(Pf2Model {
            factors: sim.truth,
            report: None,
        })));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pf2_model_free(model: *mut Pf2Model) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pf2_model_dims(
    model: *const Pf2Model,
    rank: *mut usize,
    n_rows: *mut usize,
    n_slices: *mut usize,
) -> Pf2Status {
    guard(|| {
        let f = &deref(model, "model")?.factors;
        write_out(rank, f.rank(), "rank")?;
        write_out(n_rows, f.a.nrows(), "n_rows")?;
        write_out(n_slices, f.n_slices(), "n_slices")
    })
}

/// Copy `A` (`n_rows × rank`, column-major) into `buf`.
///
/// # Safety
/// `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn pf2_model_copy_a(model: *const Pf2Model, buf: *mut f64, len: usize) -> Pf2Status {
    guard(|| copy_matrix(&deref(model, "model")?.factors.a, buf, len))
}

/// Copy `D` (`n_slices × rank`, column-major; row `k` is `d_k`) into `buf`.
///
/// # Safety
/// `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn pf2_model_copy_d(model: *const Pf2Model, buf: *mut f64, len: usize) -> Pf2Status {
    guard(|| copy_matrix(&deref(model, "model")?.factors.d, buf, len))
}

/// Copy `B_k` (`cols_k × rank`, column-major) into `buf`.
///
/// # Safety
/// `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn pf2_model_copy_b(model: *const Pf2Model, k: usize, buf: *mut f64, len: usize) -> Pf2Status {
    guard(|| {
        let f = &deref(model, "model")?.factors;
        let b = f.b.get(k).ok_or_else(|| {
            Failure::from(Error::IndexOutOfRange {
                index: k,
                len: f.n_slices(),
            })
        })?;
        copy_matrix(b, buf, len)
    })
}

unsafe fn report_of<'a>(model: *const Pf2Model) -> Result<&'a MultiFitReport, Failure> {
    deref(model, "model")?
        .report
        .as_ref()
        .ok_or_else(|| invalid("model was not produced by a fit"))
}

/// Final objective, relative SSE, outer iterations and seed of the chosen
/// initialization. Any output pointer may be null.
///
/// # Safety
/// Non-null pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pf2_model_summary(
    model: *const Pf2Model,
    objective: *mut f64,
    relative_sse: *mut f64,
    iterations: *mut usize,
    chosen_seed: *mut u64,
) -> Pf2Status {
    guard(|| {
        let r = report_of(model)?;
        if !objective.is_null() {
            objective.write(r.final_objective);
        }
        if !relative_sse.is_null() {
            relative_sse.write(r.final_relative_sse);
        }
        if !iterations.is_null() {
            iterations.write(r.iterations());
        }
        if !chosen_seed.is_null() {
            chosen_seed.write(r.chosen_seed);
        }
        Ok(())
    })
}

/// `‖X − X̂‖² / ‖X‖²` of `model` on `stack`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pf2_relative_sse(stack: *const Pf2Stack, model: *const Pf2Model, out: *mut f64) -> Pf2Status {
    guard(|| {
        let s = &deref(stack, "stack")?.inner;
        let f = &deref(model, "model")?.factors;
        write_out(out, relative_sse(s, f)?, "out")
    })
}

/// Factor match score of `estimate` against `truth`, in [0, 1].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pf2_fms(truth: *const Pf2Model, estimate: *const Pf2Model, out: *mut f64) -> Pf2Status {
    guard(|| {
        let t = &deref(truth, "truth")?.factors;
        let e = &deref(estimate, "estimate")?.factors;
        write_out(out, fms(t, e, FmsOptions::default())?.fms, "out")
    })
}

//! C ABI over `qdivide`.
//!
//! Every fallible function returns a [`QdStatus`]. On failure a description
//! is available from [`qd_last_error_message`] on the same thread. Models are
//! opaque handles created by the `qd_model_*` constructors and released with
//! [`qd_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use qdivide::bfi;
use qdivide::divisibility::{self, DivisibilityVerdict, VerdictLabel};
use qdivide::dynamics::RateModel;
use qdivide::linalg::{self, HermitianMatrix, C64};
use qdivide::mixtures::{self, MixtureWeights};
use qdivide::Error;

/// Opaque rate model.
pub struct QdRateModel(RateModel);

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QdStatus {
    Ok = 0,
    InvalidInput = 1,
    OutOfRange = 2,
    NonInvertible = 3,
    Domain = 4,
    Precondition = 5,
    Numerical = 6,
    NullPointer = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QdVerdict {
    CpDivisible = 0,
    PDivisibleOnly = 1,
    NotPDivisible = 2,
    Undetermined = 3,
}

/// Divisibility verdict. `witness_time` is NaN when there is no witness and
/// `+inf` when the deciding value is the asymptotic one.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct QdVerdictResult {
    pub label: QdVerdict,
    pub margin: f64,
    pub witness_time: f64,
}

/// Witness search result. Matrices are 4x4, row-major.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct QdWitnessResult {
    pub found: bool,
    pub max_derivative: f64,
    pub t_a: f64,
    pub t_b: f64,
    pub mu: f64,
    pub evaluations: usize,
    pub rho_re: [f64; 16],
    pub rho_im: [f64; 16],
    pub sigma_re: [f64; 16],
    pub sigma_im: [f64; 16],
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> QdStatus {
    match e {
        Error::InvalidInput(_) | Error::DimensionMismatch { .. } | Error::InvalidRange { .. } => QdStatus::InvalidInput,
        Error::OutOfRange { .. } => QdStatus::OutOfRange,
        Error::NonInvertible(_) => QdStatus::NonInvertible,
        Error::Domain(_) | Error::BoundaryWeights(_) => QdStatus::Domain,
        Error::Precondition(_) | Error::NoAsymptote(_) => QdStatus::Precondition,
        Error::Numerical(_) => QdStatus::Numerical,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QdStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(name))) => {
            set_error(&format!("null pointer argument `{name}`"));
            QdStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic");
            QdStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn deref_mut<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn slice<'a, T>(p: *const T, n: usize, name: &'static str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn emit_model(model: RateModel, out: *mut *mut QdRateModel) -> Result<(), Failure> {
    let out = deref_mut(out, "out")?;
    *out = Box::into_raw(Box::new(QdRateModel(model)));
    Ok(())
}

/// Message of the last failure on this thread. Valid until the next failing
/// call on the same thread; never null.
#[no_mangle]
pub extern "C" fn qd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version string (static).
#[no_mangle]
pub extern "C" fn qd_version() -> *const c_char {
    static VERSION: std::sync::OnceLock<CString> = std::sync::OnceLock::new();
    VERSION.get_or_init(|| CString::new(qdivide::VERSION).unwrap_or_default()).as_ptr()
}

/// Mixture of the three dephasing semigroups with weights `p1, p2, p3`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qd_model_mixture(p1: f64, p2: f64, p3: f64, out: *mut *mut QdRateModel) -> QdStatus {
    guard(|| emit_model(RateModel::mixture(MixtureWeights::new(p1, p2, p3)?), out))
}

/// Constant rates.
///
/// # Safety
/// `rates` must point to three doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qd_model_constants(rates: *const f64, coupling: f64, out: *mut *mut QdRateModel) -> QdStatus {
    guard(|| {
        let r = slice(rates, 3, "rates")?;
        emit_model(RateModel::constants([r[0], r[1], r[2]], coupling)?, out)
    })
}

/// Rates `(1, 1, sin(omega t))`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qd_model_sinusoid(omega: f64, coupling: f64, out: *mut *mut QdRateModel) -> QdStatus {
    guard(|| emit_model(RateModel::sinusoid3(omega, coupling)?, out))
}

/// Rates sampled at `n` times starting at 0; `rates` holds `3 n` values,
/// one triple per time.
///
/// # Safety
/// `times` must hold `n` doubles, `rates` `3 n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qd_model_tabulated(
    times: *const f64,
    rates: *const f64,
    n: usize,
    coupling: f64,
    out: *mut *mut QdRateModel,
) -> QdStatus {
    guard(|| {
        let t = slice(times, n, "times")?.to_vec();
        let r = slice(rates, 3 * n, "rates")?;
        let triples = r.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        emit_model(RateModel::tabulated(t, triples, coupling)?, out)
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from a `qd_model_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn qd_model_free(model: *mut QdRateModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Rates `(gamma_1, gamma_2, gamma_3)` at time `t`, without the coupling.
///
/// # Safety
/// `model` must be valid; `out` must hold three doubles.
#[no_mangle]
pub unsafe extern "C" fn qd_model_rates(model: *const QdRateModel, t: f64, out: *mut f64) -> QdStatus {
    guard(|| {
        let r = deref(model, "model")?.0.rates_at(t)?;
        let out = deref_mut(out as *mut [f64; 3], "out")?;
        *out = r;
        Ok(())
    })
}

/// Decay factors `(lambda_1, lambda_2, lambda_3)` at time `t`.
///
/// # Safety
/// `model` must be valid; `out` must hold three doubles.
#[no_mangle]
pub unsafe extern "C" fn qd_model_decay_factors(model: *const QdRateModel, t: f64, out: *mut f64) -> QdStatus {
    guard(|| {
        let f = deref(model, "model")?.0.decay_factors(t)?;
        let out = deref_mut(out as *mut [f64; 3], "out")?;
        *out = f.lambdas();
        Ok(())
    })
}

fn verdict(v: DivisibilityVerdict) -> QdVerdictResult {
    QdVerdictResult {
        label: match v.label {
            VerdictLabel::CpDivisible => QdVerdict::CpDivisible,
            VerdictLabel::PDivisibleOnly => QdVerdict::PDivisibleOnly,
            VerdictLabel::NotPDivisible => QdVerdict::NotPDivisible,
            VerdictLabel::Undetermined => QdVerdict::Undetermined,
        },
        margin: v.margin,
        witness_time: v.witness_time.unwrap_or(f64::NAN),
    }
}

unsafe fn grid_or_default(grid: *const f64, n: usize, models: &[&RateModel]) -> Result<Vec<f64>, Failure> {
    if grid.is_null() {
        Ok(divisibility::default_grid(models))
    } else {
        Ok(slice(grid, n, "grid")?.to_vec())
    }
}

type SingleVerdict = fn(&RateModel, &[f64], f64) -> qdivide::Result<DivisibilityVerdict>;

unsafe fn single(
    f: SingleVerdict,
    model: *const QdRateModel,
    grid: *const f64,
    n: usize,
    tol: f64,
    out: *mut QdVerdictResult,
) -> QdStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        let g = grid_or_default(grid, n, &[m])?;
        let v = f(m, &g, tol)?;
        *deref_mut(out, "out")? = verdict(v);
        Ok(())
    })
}

/// CP-divisibility on `grid` (`n` times; null for the default grid).
///
/// # Safety
/// Pointers must be valid; `grid` may be null.
#[no_mangle]
pub unsafe extern "C" fn qd_cp_divisible(
    model: *const QdRateModel,
    grid: *const f64,
    n: usize,
    tol: f64,
    out: *mut QdVerdictResult,
) -> QdStatus {
    single(divisibility::cp_divisible, model, grid, n, tol, out)
}

/// P-divisibility on `grid` (`n` times; null for the default grid).
///
/// # Safety
/// Pointers must be valid; `grid` may be null.
#[no_mangle]
pub unsafe extern "C" fn qd_p_divisible(
    model: *const QdRateModel,
    grid: *const f64,
    n: usize,
    tol: f64,
    out: *mut QdVerdictResult,
) -> QdStatus {
    single(divisibility::p_divisible, model, grid, n, tol, out)
}

/// P-divisibility of the product dynamics.
///
/// # Safety
/// Pointers must be valid; `grid` may be null.
#[no_mangle]
pub unsafe extern "C" fn qd_tensor_p_divisible(
    model1: *const QdRateModel,
    model2: *const QdRateModel,
    grid: *const f64,
    n: usize,
    tol: f64,
    out: *mut QdVerdictResult,
) -> QdStatus {
    guard(|| {
        let (a, b) = (&deref(model1, "model1")?.0, &deref(model2, "model2")?.0);
        let g = grid_or_default(grid, n, &[a, b])?;
        *deref_mut(out, "out")? = verdict(divisibility::tensor_p_divisible(a, b, &g, tol)?);
        Ok(())
    })
}

unsafe fn weights(p: *const f64, name: &'static str) -> Result<MixtureWeights, Failure> {
    let p = slice(p, 3, name)?;
    Ok(MixtureWeights::new(p[0], p[1], p[2])?)
}

/// CP-divisibility of a mixture from its region inequalities.
///
/// # Safety
/// `p` and `margins` must hold three doubles; `inside` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qd_cp_region_test(p: *const f64, inside: *mut bool, margins: *mut f64) -> QdStatus {
    guard(|| {
        let (ok, m) = mixtures::cp_region_test(&weights(p, "p")?);
        *deref_mut(inside, "inside")? = ok;
        *deref_mut(margins as *mut [f64; 3], "margins")? = m;
        Ok(())
    })
}

/// Membership of `q` in the tensor region of a P-only `p` at time `t`
/// (`INFINITY` for the asymptotic region).
///
/// # Safety
/// `p`, `q` and `margins` must hold three doubles; `inside` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qd_tensor_region_test(
    p: *const f64,
    q: *const f64,
    t: f64,
    inside: *mut bool,
    margins: *mut f64,
) -> QdStatus {
    guard(|| {
        let (ok, m) = mixtures::tensor_region_test(&weights(p, "p")?, &weights(q, "q")?, t)?;
        *deref_mut(inside, "inside")? = ok;
        *deref_mut(margins as *mut [f64; 3], "margins")? = m;
        Ok(())
    })
}

/// Seeded witness search for the product of two models on the default grid.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qd_witness_search(
    model1: *const QdRateModel,
    model2: *const QdRateModel,
    budget: usize,
    seed: u64,
    out: *mut QdWitnessResult,
) -> QdStatus {
    guard(|| {
        let (a, b) = (&deref(model1, "model1")?.0, &deref(model2, "model2")?.0);
        let out = deref_mut(out, "out")?;
        let r = bfi::witness_search(a, b, budget, seed, None)?;
        let split = |m: &HermitianMatrix| {
            let e = m.entries();
            (std::array::from_fn(|i| e[i].re), std::array::from_fn(|i| e[i].im))
        };
        let (rho_re, rho_im) = split(r.spec.rho());
        let (sigma_re, sigma_im) = split(r.spec.sigma());
        *out = QdWitnessResult {
            found: r.found,
            max_derivative: r.max_derivative,
            t_a: r.time_interval.0,
            t_b: r.time_interval.1,
            mu: r.spec.mu(),
            evaluations: r.evaluations,
            rho_re,
            rho_im,
            sigma_re,
            sigma_im,
        };
        Ok(())
    })
}

/// Trace norm of a Hermitian `dim x dim` matrix (`dim` 2 or 4), row-major.
///
/// # Safety
/// `re` and `im` must hold `dim * dim` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qd_trace_norm(dim: usize, re: *const f64, im: *const f64, out: *mut f64) -> QdStatus {
    guard(|| {
        if dim != 2 && dim != 4 {
            return Err(Error::DimensionMismatch { expected: 4, found: dim }.into());
        }
        let (re, im) = (slice(re, dim * dim, "re")?, slice(im, dim * dim, "im")?);
        let entries: Vec<C64> = re.iter().zip(im).map(|(&a, &b)| C64::new(a, b)).collect();
        *deref_mut(out, "out")? = linalg::trace_norm(&HermitianMatrix::new(dim, &entries)?);
        Ok(())
    })
}

//! C ABI for `shaploc`.
//!
//! Every entry point returns a [`ShaplocStatus`] and writes results through
//! out-pointers. Models live behind the opaque [`ShaplocModel`] handle,
//! created by `shaploc_model_new` and released by `shaploc_model_free`. The
//! message for the most recent failure on the calling thread is available
//! from `shaploc_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::slice;

use shaploc::{
    all_shapley, analytic_pe_gaussian, binomial_ci, run_experiment, shapley_weight, AttackKind,
    AttackSpec, Coalition, Error, ErrorRateReport, ExperimentConfig, GaussianModel, Observation,
    ThresholdMode,
};

/// Constant offset `AM`.
pub const SHAPLOC_ATTACK_A: u32 = 0;
/// Gaussian offset with mean `AM` and standard deviation `sigma_a`.
pub const SHAPLOC_ATTACK_B: u32 = 1;
/// `AM` plus a Uniform(0, `um`) offset.
pub const SHAPLOC_ATTACK_C: u32 = 2;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShaplocStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotSymmetric = 4,
    NotPositiveDefinite = 5,
    NonFinite = 6,
    EmptyCoalition = 7,
    UniverseTooLarge = 8,
    SensorOutOfRange = 9,
    DegenerateLabels = 10,
    Panic = 11,
}

impl From<&Error> for ShaplocStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DimensionMismatch { .. } => Self::DimensionMismatch,
            Error::NotSymmetric => Self::NotSymmetric,
            Error::NotPositiveDefinite => Self::NotPositiveDefinite,
            Error::NonFinite(_) => Self::NonFinite,
            Error::EmptyCoalition => Self::EmptyCoalition,
            Error::UniverseTooLarge { .. } => Self::UniverseTooLarge,
            Error::SensorOutOfRange { .. } => Self::SensorOutOfRange,
            Error::DegenerateLabels => Self::DegenerateLabels,
            Error::CardinalityOutOfRange { .. }
            | Error::EmptyKeptSet
            | Error::InvalidAttack(_)
            | Error::InvalidExperiment(_) => Self::InvalidArgument,
        }
    }
}

/// Opaque multivariate Gaussian sensor model.
pub struct ShaplocModel {
    inner: GaussianModel,
}

/// Attack injected into a trial.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ShaplocAttack {
    /// One of `SHAPLOC_ATTACK_A`, `SHAPLOC_ATTACK_B`, `SHAPLOC_ATTACK_C`.
    pub kind: u32,
    pub am: f64,
    /// Read only for type B.
    pub sigma_a: f64,
    /// Read only for type C.
    pub um: f64,
    /// Bit `i` set when sensor `i` (0-based) is attacked.
    pub target_mask: u32,
}

/// Monte Carlo settings.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ShaplocRunParams {
    /// 0-based index of the sensor whose statistics are tested.
    pub sensor_under_test: u32,
    pub trials: u64,
    /// Probability that a trial is attacked, strictly between 0 and 1.
    pub attack_prior: f64,
    pub seed: u64,
    /// 0 selects the exact sorted-score search; otherwise the number of
    /// equally spaced thresholds on `[grid_lo, grid_hi]`.
    pub grid_steps: u64,
    pub grid_lo: f64,
    pub grid_hi: f64,
}

/// Optimized test for one statistic.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ShaplocErrorRate {
    pub threshold: f64,
    pub pe: f64,
    pub ci_halfwidth: f64,
    pub rate_sum: f64,
    pub trials: u64,
}

/// Paired results of one experiment.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ShaplocOutcome {
    pub shapley: ShaplocErrorRate,
    pub single_term: ShaplocErrorRate,
}

impl From<ErrorRateReport> for ShaplocErrorRate {
    fn from(r: ErrorRateReport) -> Self {
        Self {
            threshold: r.threshold,
            pe: r.pe,
            ci_halfwidth: r.ci_halfwidth,
            rate_sum: r.rate_sum,
            trials: r.trials,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(ShaplocStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure((&e).into(), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(ShaplocStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(ShaplocStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> ShaplocStatus {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            ShaplocStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&msg);
            ShaplocStatus::Panic
        }
    }
}

unsafe fn input<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or_else(|| null(what))
}

unsafe fn model_ref<'a>(model: *const ShaplocModel) -> Result<&'a GaussianModel, Failure> {
    model
        .as_ref()
        .map(|m| &m.inner)
        .ok_or_else(|| null("model"))
}

unsafe fn observation(
    model: &GaussianModel,
    x: *const f64,
    n: usize,
) -> Result<Observation, Failure> {
    if n != model.n() {
        return Err(Error::DimensionMismatch {
            expected: model.n(),
            actual: n,
        }
        .into());
    }
    Ok(Observation::new(input(x, n, "x")?.to_vec())?)
}

/// Creates a model from a mean vector of length `n` and an `n * n`
/// row-major covariance matrix. On success `*out` owns a new handle.
///
/// # Safety
/// `mean` must point to `n` doubles, `cov` to `n * n` doubles and `out` to
/// writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn shaploc_model_new(
    mean: *const f64,
    cov: *const f64,
    n: usize,
    out: *mut *mut ShaplocModel,
) -> ShaplocStatus {
    guard(|| {
        let out = output(out, "out")?;
        let len = n.checked_mul(n).ok_or_else(|| invalid("n is too large"))?;
        let mean = input(mean, n, "mean")?.to_vec();
        let cov = input(cov, len, "cov")?;
        let rows: Vec<Vec<f64>> = cov.chunks(n.max(1)).map(<[f64]>::to_vec).collect();
        let inner = GaussianModel::from_rows(mean, &rows)?;
        *out = Box::into_raw(Box::new(ShaplocModel { inner }));
        Ok(())
    })
}

/// Creates a two-sensor model from means, standard deviations and the
/// correlation coefficient.
///
/// # Safety
/// `out` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn shaploc_model_bivariate(
    mu1: f64,
    mu2: f64,
    sigma1: f64,
    sigma2: f64,
    rho: f64,
    out: *mut *mut ShaplocModel,
) -> ShaplocStatus {
    guard(|| {
        let out = output(out, "out")?;
        let inner = GaussianModel::bivariate(mu1, mu2, sigma1, sigma2, rho)?;
        *out = Box::into_raw(Box::new(ShaplocModel { inner }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn shaploc_model_free(model: *mut ShaplocModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of sensors, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn shaploc_model_sensors(model: *const ShaplocModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.n())
}

/// `v(S) = -ln f_S(x_S)`, with `v` of the empty coalition equal to 0.
/// `coalition` is a bit mask over sensor indices.
///
/// # Safety
/// `model` must be a live handle, `x` must point to `n` doubles and `out`
/// to one writable double.
#[no_mangle]
pub unsafe extern "C" fn shaploc_model_value(
    model: *const ShaplocModel,
    coalition: u32,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> ShaplocStatus {
    guard(|| {
        let model = model_ref(model)?;
        let out = output(out, "out")?;
        let x = observation(model, x, n)?;
        let s = Coalition::from_bits(coalition, model.n())?;
        *out = if s.is_empty() {
            0.0
        } else {
            -model.marginal_log_density(s, &x)?
        };
        Ok(())
    })
}

/// `ln f_S(x_S)` for a nonempty coalition mask.
///
/// # Safety
/// As for `shaploc_model_value`.
#[no_mangle]
pub unsafe extern "C" fn shaploc_model_marginal_log_density(
    model: *const ShaplocModel,
    coalition: u32,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> ShaplocStatus {
    guard(|| {
        let model = model_ref(model)?;
        let out = output(out, "out")?;
        let x = observation(model, x, n)?;
        *out = model.marginal_log_density(Coalition::from_bits(coalition, model.n())?, &x)?;
        Ok(())
    })
}

/// Exact Shapley values of every sensor under the model's value function.
///
/// # Safety
/// `model` must be a live handle; `x` and `phi` must each point to `n`
/// doubles, `phi` writable.
#[no_mangle]
pub unsafe extern "C" fn shaploc_all_shapley(
    model: *const ShaplocModel,
    x: *const f64,
    n: usize,
    phi: *mut f64,
) -> ShaplocStatus {
    guard(|| {
        let model = model_ref(model)?;
        let x = observation(model, x, n)?;
        if phi.is_null() {
            return Err(null("phi"));
        }
        let result = all_shapley(model, &x)?;
        slice::from_raw_parts_mut(phi, n).copy_from_slice(&result.phi);
        Ok(())
    })
}

/// Weight of a coalition of size `s_card` in an `n`-player Shapley sum.
///
/// # Safety
/// `out` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn shaploc_shapley_weight(
    s_card: usize,
    n: usize,
    out: *mut f64,
) -> ShaplocStatus {
    guard(|| {
        *output(out, "out")? = shapley_weight(s_card, n)?;
        Ok(())
    })
}

/// Minimum error probability of a threshold test on `|x|` for
/// `x ~ N(0, sigma^2)` against `x ~ N(am, sigma^2)` with the given prior.
///
/// # Safety
/// `out` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn shaploc_analytic_pe_gaussian(
    sigma: f64,
    am: f64,
    attack_prior: f64,
    out: *mut f64,
) -> ShaplocStatus {
    guard(|| {
        let out = output(out, "out")?;
        if !(sigma > 0.0
            && sigma.is_finite()
            && am.is_finite()
            && (0.0..=1.0).contains(&attack_prior))
        {
            return Err(invalid("need sigma > 0, finite am and a prior in [0, 1]"));
        }
        *out = analytic_pe_gaussian(sigma, am, attack_prior);
        Ok(())
    })
}

/// 95% normal-approximation half-width for an error rate over `trials`.
#[no_mangle]
pub extern "C" fn shaploc_binomial_ci(pe: f64, trials: u64) -> f64 {
    binomial_ci(pe, trials)
}

fn attack_spec(a: &ShaplocAttack, n: usize) -> Result<AttackSpec, Failure> {
    let targets = Coalition::from_bits(a.target_mask, n)?;
    let kind = match a.kind {
        SHAPLOC_ATTACK_A => AttackKind::A,
        SHAPLOC_ATTACK_B => AttackKind::B,
        SHAPLOC_ATTACK_C => AttackKind::C,
        other => return Err(invalid(format!("unknown attack kind {other}"))),
    };
    let sigma_a = (kind == AttackKind::B).then_some(a.sigma_a);
    let um = (kind == AttackKind::C).then_some(a.um);
    Ok(AttackSpec::new(kind, a.am, sigma_a, um, targets)?)
}

/// Runs a paired Monte Carlo experiment and reports the optimized
/// Shapley-value and single-term tests.
///
/// # Safety
/// `model` must be a live handle; `attack`, `params` and `out` must point
/// to valid structs, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn shaploc_run_experiment(
    model: *const ShaplocModel,
    attack: *const ShaplocAttack,
    params: *const ShaplocRunParams,
    out: *mut ShaplocOutcome,
) -> ShaplocStatus {
    guard(|| {
        let model = model_ref(model)?;
        let attack = attack.as_ref().ok_or_else(|| null("attack"))?;
        let params = params.as_ref().ok_or_else(|| null("params"))?;
        let out = output(out, "out")?;
        let steps =
            usize::try_from(params.grid_steps).map_err(|_| invalid("grid_steps is too large"))?;
        let config = ExperimentConfig {
            model: model.clone(),
            attack: attack_spec(attack, model.n())?,
            sensor_under_test: params.sensor_under_test as usize,
            trials: params.trials,
            attack_prior: params.attack_prior,
            seed: params.seed,
            threshold_mode: match steps {
                0 => ThresholdMode::ExactSort,
                steps => ThresholdMode::Grid {
                    lo: params.grid_lo,
                    hi: params.grid_hi,
                    steps,
                },
            },
        };
        let result = run_experiment(&config)?;
        *out = ShaplocOutcome {
            shapley: result.shapley.into(),
            single_term: result.single_term.into(),
        };
        Ok(())
    })
}

/// Static description of a status code. Never null.
#[no_mangle]
pub extern "C" fn shaploc_status_message(status: i32) -> *const c_char {
    let msg: &'static CStr = match status {
        0 => c"ok",
        1 => c"null pointer argument",
        2 => c"invalid argument",
        3 => c"dimension mismatch",
        4 => c"covariance matrix is not symmetric",
        5 => c"covariance matrix is not positive definite",
        6 => c"non-finite value",
        7 => c"empty coalition",
        8 => c"too many sensors",
        9 => c"sensor index out of range",
        10 => c"threshold optimization needs both attacked and unattacked trials",
        11 => c"internal panic",
        _ => c"unknown status",
    };
    msg.as_ptr()
}

/// Detail of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn shaploc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a NUL-terminated string.
#[no_mangle]
pub extern "C" fn shaploc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

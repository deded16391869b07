//! C ABI for `mindiss`.
//!
//! Models and geodesics live behind opaque handles created and released by
//! the library. Every fallible call returns an [`MdStatus`]; on failure the
//! message is available from [`md_last_error`] on the same thread until the
//! next failing call. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mindiss::analytic::{fundamental_wdiss, hellinger_angle};
use mindiss::geometry::{shoot_geodesic, GeodesicSolution, ShootOptions, Target};
use mindiss::models::{Model, ModelSpec, PyramidSpec};
use mindiss::steps::pyramid_bound;
use mindiss::{ControlPoint, Error, UnitsContext};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    NonConvergence = 4,
    Numerical = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Opaque model handle.
pub struct MdModel {
    model: Box<dyn Model>,
}

/// Opaque geodesic handle.
pub struct MdGeodesic {
    solution: GeodesicSolution,
}

/// Dissipation summary of a geodesic. `landauer_reference` is NaN for
/// models without a spin count.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdReport {
    pub length: f64,
    pub w_diss: f64,
    pub delta_f: f64,
    pub work_total: f64,
    pub work_variance: f64,
    pub landauer_reference: f64,
    pub converged: bool,
    pub samples: usize,
    pub n_params: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdPyramidBound {
    pub length_bound: f64,
    pub w_diss_bound: f64,
    pub n_total: u64,
    pub w_diss_asymptotic: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MdStatus {
    match e {
        Error::TargetUnreachable(_) | Error::DegenerateMetric { .. } => MdStatus::NonConvergence,
        Error::Domain(_) | Error::UndefinedGeodesic | Error::EndpointDivergence => MdStatus::Domain,
        Error::MetricNotPsd { .. } => MdStatus::Numerical,
        _ => MdStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), (MdStatus, String)>) -> MdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MdStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            MdStatus::Panic
        }
    }
}

fn lib<T>(r: mindiss::Result<T>) -> Result<T, (MdStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (MdStatus, String) {
    (MdStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `ptr` must be null or point to `len` readable doubles.
unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], (MdStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn md_version() -> *const c_char {
    VERSION.as_ptr().cast()
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn md_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a model from a JSON description such as
/// `{"model": "all_to_all", "N": 10}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn md_model_from_json(json: *const c_char, out: *mut *mut MdModel) -> MdStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| (MdStatus::InvalidArgument, "json is not valid UTF-8".to_string()))?;
        let model = lib(ModelSpec::from_json(text).and_then(|s| s.build()))?;
        *out = Box::into_raw(Box::new(MdModel { model }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`md_model_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn md_model_free(model: *mut MdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of control parameters, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_model_n_params(model: *const MdModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.n_params())
}

/// # Safety
/// `model` must be a live handle, `point` must hold `len` doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_model_ln_z(
    model: *const MdModel,
    point: *const f64,
    len: usize,
    beta: f64,
    out: *mut f64,
) -> MdStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let x = slice(point, len, "point")?;
        *out = lib(m.model.ln_z(x, beta))?;
        Ok(())
    })
}

/// Writes the `n x n` metric in row-major order into `out`, which must hold
/// `out_len >= n * n` doubles.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn md_model_metric(
    model: *const MdModel,
    point: *const f64,
    len: usize,
    beta: f64,
    out: *mut f64,
    out_len: usize,
) -> MdStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let x = slice(point, len, "point")?;
        let g = lib(m.model.metric(x, beta))?;
        let n = g.nrows();
        if out_len < n * n {
            return Err((MdStatus::BufferTooSmall, format!("metric needs {} doubles, got {out_len}", n * n)));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let dst = std::slice::from_raw_parts_mut(out, n * n);
        for i in 0..n {
            for j in 0..n {
                dst[i * n + j] = g[(i, j)];
            }
        }
        Ok(())
    })
}

/// Shoots the optimal protocol from the origin to field `eps_final` (and
/// zero coupling for two-parameter models). `steps = 0` keeps the default
/// resolution. A non-converged solution is still returned, with status
/// `MD_STATUS_NON_CONVERGENCE`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn md_shoot(
    model: *const MdModel,
    eps_final: f64,
    beta: f64,
    tau: f64,
    steps: usize,
    out: *mut *mut MdGeodesic,
) -> MdStatus {
    let mut converged = true;
    let status = guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let units = lib(UnitsContext::new(beta, tau))?;
        let mut opts = ShootOptions::default();
        if steps > 0 {
            opts.steps = steps;
        }
        let origin = lib(ControlPoint::new(vec![0.0; m.model.n_params()]))?;
        let (solution, _) = lib(shoot_geodesic(m.model.as_ref(), &origin, Target { eps_final }, &units, &opts))?;
        converged = solution.converged;
        *out = Box::into_raw(Box::new(MdGeodesic { solution }));
        Ok(())
    });
    if status == MdStatus::Ok && !converged {
        set_error("geodesic did not meet the constant-speed tolerance".into());
        return MdStatus::NonConvergence;
    }
    status
}

/// # Safety
/// `geodesic` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn md_geodesic_report(geodesic: *const MdGeodesic, out: *mut MdReport) -> MdStatus {
    guard(|| {
        let g = geodesic.as_ref().ok_or_else(|| null("geodesic"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = &g.solution.report;
        *out = MdReport {
            length: r.length,
            w_diss: r.w_diss,
            delta_f: r.delta_f,
            work_total: r.work_total,
            work_variance: r.work_variance,
            landauer_reference: r.landauer_reference.unwrap_or(f64::NAN),
            converged: g.solution.converged,
            samples: g.solution.trajectory.len(),
            n_params: g.solution.trajectory.dim(),
        };
        Ok(())
    })
}

/// Copies sample times into `times` (`capacity` doubles) and parameters,
/// row-major, into `params` (`capacity * n_params` doubles). Fails with
/// `MD_STATUS_BUFFER_TOO_SMALL` when `capacity` is below the sample count.
///
/// # Safety
/// Buffers must be writable for the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn md_geodesic_copy(
    geodesic: *const MdGeodesic,
    times: *mut f64,
    params: *mut f64,
    capacity: usize,
) -> MdStatus {
    guard(|| {
        let g = geodesic.as_ref().ok_or_else(|| null("geodesic"))?;
        let traj = &g.solution.trajectory;
        let (len, dim) = (traj.len(), traj.dim());
        if capacity < len {
            return Err((MdStatus::BufferTooSmall, format!("trajectory has {len} samples, capacity {capacity}")));
        }
        if times.is_null() || params.is_null() {
            return Err(null("output buffer"));
        }
        std::slice::from_raw_parts_mut(times, len).copy_from_slice(traj.times());
        let dst = std::slice::from_raw_parts_mut(params, len * dim);
        for (row, p) in dst.chunks_mut(dim.max(1)).zip(traj.points()) {
            row.copy_from_slice(p.params());
        }
        Ok(())
    })
}

/// # Safety
/// `geodesic` must be null or a handle from [`md_shoot`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn md_geodesic_free(geodesic: *mut MdGeodesic) {
    if !geodesic.is_null() {
        drop(Box::from_raw(geodesic));
    }
}

/// Hellinger angle `2 arccos sum sqrt(p_i q_i)` between two distributions.
///
/// # Safety
/// `p` and `q` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_hellinger_angle(p: *const f64, q: *const f64, len: usize, out: *mut f64) -> MdStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = lib(hellinger_angle(slice(p, len, "p")?, slice(q, len, "q")?))?;
        Ok(())
    })
}

/// Minimal dissipation over all protocols with full control of the levels.
///
/// # Safety
/// `p` and `q` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_fundamental_wdiss(
    p: *const f64,
    q: *const f64,
    len: usize,
    tau: f64,
    beta: f64,
    out: *mut f64,
) -> MdStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = lib(fundamental_wdiss(slice(p, len, "p")?, slice(q, len, "q")?, tau, beta))?;
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_pyramid_bound(
    layers: usize,
    aperture: usize,
    base: usize,
    dimension: usize,
    tau: f64,
    beta: f64,
    out: *mut MdPyramidBound,
) -> MdStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let spec = lib(PyramidSpec::new(layers, aperture, base, dimension))?;
        let b = lib(pyramid_bound(&spec, tau, beta))?;
        *out = MdPyramidBound {
            length_bound: b.length_bound,
            w_diss_bound: b.w_diss_bound,
            n_total: b.n_total,
            w_diss_asymptotic: b.w_diss_asymptotic,
        };
        Ok(())
    })
}

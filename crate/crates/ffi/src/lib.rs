//! C ABI for the adaptive ROF solver.
//!
//! Every function returns a [`RofStatus`]; on failure a message is
//! available through [`rof_last_error_message`] on the calling thread.
//! Handles are opaque and must be released with the matching `*_free`
//! function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rof_afem::afem::{afem_run, AfemConfig, AfemRun, EpsStrategy};
use rof_afem::bench::{benchmark, image_problem_benchmark, rasterize, Benchmark, ImageData};
use rof_afem::fem::p0_project_cr;
use rof_afem::rof::FlowConfig;
use rof_afem::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RofStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownBenchmark = 3,
    NotConverged = 4,
    Io = 5,
    Parse = 6,
    Numerical = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Regularization strategy of the adaptive loop.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RofEpsStrategy {
    Global = 0,
    Local = 1,
}

/// Per-element quantities exported by [`rof_run_element_values`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RofField {
    /// Element means of the post-processed solution.
    Solution = 0,
    /// Local refinement indicators.
    Indicator = 1,
    /// Regularization parameter.
    Epsilon = 2,
    /// Projected data.
    Data = 3,
}

/// Parameters of an adaptive run. Obtain defaults from [`rof_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RofConfig {
    pub theta: f64,
    pub eps_strategy: RofEpsStrategy,
    pub max_levels: usize,
    /// Zero means unlimited.
    pub max_vertices: usize,
    pub uniform: bool,
    pub tau: f64,
    pub max_flow_steps: usize,
}

/// Summary of one level.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RofLevelStats {
    pub n_vertices: usize,
    pub n_elements: usize,
    pub h: f64,
    pub eta_sq: f64,
    /// NaN when no exact solution is known.
    pub rho_tilde_sq: f64,
    pub linf_zbar: f64,
    pub flow_steps: usize,
    pub wall_time: f64,
}

/// A problem definition: a named benchmark or an image.
pub struct RofProblem {
    bench: Benchmark,
}

/// The levels of a finished (or aborted) adaptive run.
pub struct RofRun {
    run: AfemRun,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> RofStatus {
    match err {
        Error::UnknownBenchmark(_) => RofStatus::UnknownBenchmark,
        Error::FlowNotConverged { .. } | Error::CgNotConverged { .. } => RofStatus::NotConverged,
        Error::Io { .. } => RofStatus::Io,
        Error::Pgm { .. } | Error::Csv { .. } => RofStatus::Parse,
        Error::Factorization(_) | Error::NegativeWeight { .. } => RofStatus::Numerical,
        _ => RofStatus::InvalidArgument,
    }
}

fn fail(err: Error) -> RofStatus {
    set_error(err.to_string());
    status_of(&err)
}

fn guard(f: impl FnOnce() -> RofStatus) -> RofStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            RofStatus::Panic
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            set_error(concat!("`", stringify!($p), "` is null"));
            return RofStatus::NullPointer;
        })+
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rof_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes of the last error message on this thread, excluding NUL.
#[no_mangle]
pub extern "C" fn rof_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message (NUL-terminated, truncated to fit) into
/// `buf` and returns the number of bytes written excluding the NUL.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null.
#[no_mangle]
pub unsafe extern "C" fn rof_last_error_message(buf: *mut c_char, len: usize) -> usize {
    if buf.is_null() || len == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let n = msg.len().min(len - 1);
        ptr::copy_nonoverlapping(msg.as_ptr().cast(), buf, n);
        *buf.add(n) = 0;
        n
    })
}

#[no_mangle]
pub extern "C" fn rof_config_default() -> RofConfig {
    let d = AfemConfig::default();
    RofConfig {
        theta: d.theta,
        eps_strategy: RofEpsStrategy::Global,
        max_levels: d.max_levels,
        max_vertices: 0,
        uniform: d.uniform,
        tau: d.flow.tau,
        max_flow_steps: d.flow.max_steps,
    }
}

fn to_afem_config(c: &RofConfig) -> AfemConfig {
    AfemConfig {
        theta: c.theta,
        eps_strategy: match c.eps_strategy {
            RofEpsStrategy::Global => EpsStrategy::Global,
            RofEpsStrategy::Local => EpsStrategy::Local,
        },
        max_levels: c.max_levels,
        max_vertices: (c.max_vertices > 0).then_some(c.max_vertices),
        uniform: c.uniform,
        flow: FlowConfig { tau: c.tau, max_steps: c.max_flow_steps, ..FlowConfig::default() },
        ..AfemConfig::default()
    }
}

/// Creates one of the built-in benchmarks by name, e.g. `"one_disk_2d"`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rof_problem_from_benchmark(
    name: *const c_char,
    out: *mut *mut RofProblem,
) -> RofStatus {
    non_null!(name, out);
    guard(|| {
        let Ok(name) = CStr::from_ptr(name).to_str() else {
            set_error("benchmark name is not UTF-8");
            return RofStatus::InvalidArgument;
        };
        match benchmark(name) {
            Ok(bench) => {
                *out = Box::into_raw(Box::new(RofProblem { bench }));
                RofStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Creates a Neumann denoising problem on the unit square from a row-major
/// gray image in `[0, 1]` (top row first).
///
/// # Safety
/// `pixels` must hold `width * height` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rof_problem_from_image(
    width: usize,
    height: usize,
    pixels: *const f64,
    alpha: f64,
    initial_subdivisions: usize,
    out: *mut *mut RofProblem,
) -> RofStatus {
    non_null!(pixels, out);
    guard(|| {
        let Some(n) = width.checked_mul(height) else {
            set_error("image size overflows");
            return RofStatus::InvalidArgument;
        };
        if !(alpha > 0.0) || initial_subdivisions == 0 {
            set_error("alpha and initial_subdivisions must be positive");
            return RofStatus::InvalidArgument;
        }
        let data = std::slice::from_raw_parts(pixels, n).to_vec();
        match ImageData::new(width, height, data) {
            Ok(img) => {
                let bench = image_problem_benchmark("image", img, alpha, initial_subdivisions);
                *out = Box::into_raw(Box::new(RofProblem { bench }));
                RofStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `problem` must come from a `rof_problem_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn rof_problem_free(problem: *mut RofProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Runs the adaptive loop. When a level fails after earlier levels
/// succeeded, `*out` still receives the partial run and the failure status
/// is returned; otherwise `*out` is set to null on failure.
///
/// # Safety
/// `problem`, `config` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rof_run(
    problem: *const RofProblem,
    config: *const RofConfig,
    out: *mut *mut RofRun,
) -> RofStatus {
    non_null!(problem, config, out);
    *out = ptr::null_mut();
    guard(|| {
        let run = afem_run(&(&*problem).bench, &to_afem_config(&*config));
        let status = match &run.failure {
            Some(e) => {
                set_error(e.to_string());
                status_of(e)
            }
            None => RofStatus::Ok,
        };
        if !run.levels.is_empty() {
            *out = Box::into_raw(Box::new(RofRun { run }));
        }
        status
    })
}

/// # Safety
/// `run` must come from [`rof_run`] or be null.
#[no_mangle]
pub unsafe extern "C" fn rof_run_free(run: *mut RofRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `run` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rof_run_level_count(run: *const RofRun, out: *mut usize) -> RofStatus {
    non_null!(run, out);
    *out = (&*run).run.levels.len();
    RofStatus::Ok
}

fn level(run: &RofRun, level: usize) -> Result<&rof_afem::afem::AfemLevel, RofStatus> {
    match run.run.levels.get(level) {
        Some(l) => Ok(l),
        None => {
            set_error(format!("level {level} out of range"));
            Err(RofStatus::InvalidArgument)
        }
    }
}

/// # Safety
/// `run` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rof_run_level_stats(
    run: *const RofRun,
    index: usize,
    out: *mut RofLevelStats,
) -> RofStatus {
    non_null!(run, out);
    let l = match level(&*run, index) {
        Ok(l) => l,
        Err(s) => return s,
    };
    *out = RofLevelStats {
        n_vertices: l.n_vertices,
        n_elements: l.mesh().n_elements(),
        h: l.h,
        eta_sq: l.eta_sq,
        rho_tilde_sq: l.rho_tilde_sq.unwrap_or(f64::NAN),
        linf_zbar: l.linf_zbar,
        flow_steps: l.flow_steps,
        wall_time: l.wall_time,
    };
    RofStatus::Ok
}

/// Copies one value per element into `buf`. Call with `buf = NULL` to
/// query the element count through `written`.
///
/// # Safety
/// `run` and `written` must be valid; `buf` must hold `len` values or be null.
#[no_mangle]
pub unsafe extern "C" fn rof_run_element_values(
    run: *const RofRun,
    index: usize,
    field: RofField,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> RofStatus {
    non_null!(run, written);
    guard(|| {
        let l = match level(&*run, index) {
            Ok(l) => l,
            Err(s) => return s,
        };
        let n = l.mesh().n_elements();
        *written = n;
        if buf.is_null() {
            return RofStatus::Ok;
        }
        if len < n {
            set_error(format!("buffer holds {len} values, {n} needed"));
            return RofStatus::BufferTooSmall;
        }
        let values = match field {
            RofField::Solution => p0_project_cr(l.mesh(), &l.u_bar).values,
            RofField::Indicator => l.eta_sq_local.clone(),
            RofField::Epsilon => l.eps().values.clone(),
            RofField::Data => l.problem.g_h.values.clone(),
        };
        ptr::copy_nonoverlapping(values.as_ptr(), buf, n);
        RofStatus::Ok
    })
}

/// Samples the post-processed solution of a two-dimensional level at the
/// pixel centers of a `width × height` grid on the bounding box, row-major
/// with the top row first.
///
/// # Safety
/// `run` must be valid; `buf` must hold `width * height` values.
#[no_mangle]
pub unsafe extern "C" fn rof_run_rasterize(
    run: *const RofRun,
    index: usize,
    width: usize,
    height: usize,
    buf: *mut f64,
) -> RofStatus {
    non_null!(run, buf);
    guard(|| {
        let l = match level(&*run, index) {
            Ok(l) => l,
            Err(s) => return s,
        };
        if l.mesh().dim() != 2 || width == 0 || height == 0 {
            set_error("rasterization needs a two-dimensional mesh and a non-empty grid");
            return RofStatus::InvalidArgument;
        }
        let img = rasterize(l.mesh(), &l.u_bar, width, height);
        ptr::copy_nonoverlapping(img.as_ptr(), buf, img.len());
        RofStatus::Ok
    })
}

//! C interface to centerout.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `_free` function. Every fallible call returns a
//! [`CenteroutStatus`]; on failure, [`centerout_last_error`] describes the
//! error on the calling thread. Point arrays are row-major `n * d` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use centerout::generators::{Generator, GeneratorSpec};
use centerout::ot::{solve_assignment, Dataset};
use centerout::points::Points;
use centerout::potential::{build_potentials, Potentials};
use centerout::quantiles::{contour, ranks_signs};
use centerout::reference::{GridShape, SphericalGrid};
use centerout::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenteroutStatus {
    Ok = 0,
    InvalidArgument = 1,
    Numeric = 2,
    ConvergenceFailure = 3,
    OutOfDomain = 4,
    Parse = 5,
    Unsupported = 6,
    Io = 7,
    NullPointer = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Sample and fitted center-outward maps.
pub struct CenteroutModel {
    data: Dataset,
    pot: Potentials,
}

/// Synthetic data generator.
pub struct CenteroutGenerator {
    inner: Generator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CenteroutStatus {
    match e {
        Error::InvalidArgument(_) => CenteroutStatus::InvalidArgument,
        Error::Numeric(_) => CenteroutStatus::Numeric,
        Error::ConvergenceFailure { .. } => CenteroutStatus::ConvergenceFailure,
        Error::OutOfDomain { .. } => CenteroutStatus::OutOfDomain,
        Error::Parse { .. } | Error::Json(_) => CenteroutStatus::Parse,
        Error::UnsupportedPlanKind(_) | Error::Unsupported(_) => CenteroutStatus::Unsupported,
        Error::Io(_) => CenteroutStatus::Io,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
    Small { needed: usize },
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CenteroutStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CenteroutStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer: {name}"));
            CenteroutStatus::NullPointer
        }
        Ok(Err(Failure::Small { needed })) => {
            set_error(format!("output buffer too small: {needed} doubles needed"));
            CenteroutStatus::BufferTooSmall
        }
        Err(_) => {
            set_error("internal panic".into());
            CenteroutStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn input<'a>(p: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, name: &'static str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn centerout_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn centerout_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Fits the maps of `n` points in dimension `d` by exact transport to the
/// spherical uniform grid. Pass `n_radii = n_directions = 0` for the default
/// grid shape.
///
/// # Safety
/// `points` must hold `n * d` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn centerout_model_fit(
    points: *const f64,
    n: usize,
    d: usize,
    n_radii: usize,
    n_directions: usize,
    seed: u64,
    out: *mut *mut CenteroutModel,
) -> CenteroutStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let len = n.checked_mul(d).ok_or_else(|| Error::InvalidArgument("n * d overflows".into()))?;
        let coords = input(points, len, "points")?.to_vec();
        let data = Dataset::new(Points::new(d, coords)?)?;
        let shape = if n_radii == 0 && n_directions == 0 { GridShape::auto(n, d) } else { GridShape { n_radii, n_directions } };
        let grid = SphericalGrid::with_shape(n, d, shape, seed)?;
        let plan = solve_assignment(&data, &grid)?;
        let pot = build_potentials(&plan, &data, &grid)?;
        *out = Box::into_raw(Box::new(CenteroutModel { data, pot }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`centerout_model_fit`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn centerout_model_free(model: *mut CenteroutModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Dimension of the model, 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn centerout_model_dim(model: *const CenteroutModel) -> usize {
    model.as_ref().map_or(0, |m| m.pot.dim())
}

/// Number of sample points, 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn centerout_model_len(model: *const CenteroutModel) -> usize {
    model.as_ref().map_or(0, |m| m.pot.len())
}

/// Grid shape: shells, directions per shell and origin copies. Any output
/// pointer may be NULL.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn centerout_model_grid_shape(
    model: *const CenteroutModel,
    n_radii: *mut usize,
    n_directions: *mut usize,
    origin_copies: *mut usize,
) -> CenteroutStatus {
    guard(|| {
        let grid = as_ref(model, "model")?.pot.grid();
        for (p, v) in [(n_radii, grid.n_radii()), (n_directions, grid.n_directions()), (origin_copies, grid.origin_copies())] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Empirical distribution function at `x` (`d` doubles) into `out` (`d`
/// doubles). `achievers`, if not NULL, receives the number of active atoms;
/// more than one means the value is an average.
///
/// # Safety
/// Buffers must have `d` doubles; `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn centerout_model_forward(model: *const CenteroutModel, x: *const f64, out: *mut f64, achievers: *mut usize) -> CenteroutStatus {
    guard(|| {
        let m = as_ref(model, "model")?;
        let d = m.pot.dim();
        let v = m.pot.forward(input(x, d, "x")?);
        output(out, d, "out")?.copy_from_slice(&v.point);
        if let Some(a) = achievers.as_mut() {
            *a = v.achievers.len();
        }
        Ok(())
    })
}

/// Empirical quantile function at `u`, `|u| < 1`.
///
/// # Safety
/// Buffers must have `d` doubles; `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn centerout_model_quantile(model: *const CenteroutModel, u: *const f64, out: *mut f64, achievers: *mut usize) -> CenteroutStatus {
    guard(|| {
        let m = as_ref(model, "model")?;
        let d = m.pot.dim();
        let v = m.pot.quantile(input(u, d, "u")?)?;
        output(out, d, "out")?.copy_from_slice(&v.point);
        if let Some(a) = achievers.as_mut() {
            *a = v.achievers.len();
        }
        Ok(())
    })
}

/// Ranks (`n` doubles) and signs (`n * d` doubles) of the sample points in
/// input order. Points sent to the origin get rank 0 and a zero sign.
///
/// # Safety
/// `ranks` must hold `n` doubles and `signs` `n * d`; either may be NULL.
#[no_mangle]
pub unsafe extern "C" fn centerout_model_ranks_signs(model: *const CenteroutModel, ranks: *mut f64, signs: *mut f64) -> CenteroutStatus {
    guard(|| {
        let m = as_ref(model, "model")?;
        let (n, d) = (m.pot.len(), m.pot.dim());
        let table = ranks_signs(&m.pot, &m.data)?;
        if !ranks.is_null() {
            let r = output(ranks, n, "ranks")?;
            for (slot, e) in r.iter_mut().zip(&table.entries) {
                *slot = e.rank;
            }
        }
        if !signs.is_null() {
            let s = output(signs, n * d, "signs")?;
            for (row, e) in s.chunks_mut(d).zip(&table.entries) {
                match &e.sign {
                    Some(v) => row.copy_from_slice(v),
                    None => row.fill(0.0),
                }
            }
        }
        Ok(())
    })
}

/// Quantile contour of level `r` along `n_dirs` directions. Writes the
/// number of points to `count` and the points to `out`, which holds
/// `capacity` doubles. In dimension 1 the contour has two points.
///
/// # Safety
/// `out` must hold `capacity` doubles; `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn centerout_model_contour(
    model: *const CenteroutModel,
    r: f64,
    n_dirs: usize,
    out: *mut f64,
    capacity: usize,
    count: *mut usize,
) -> CenteroutStatus {
    guard(|| {
        let m = as_ref(model, "model")?;
        if count.is_null() {
            return Err(Failure::Null("count"));
        }
        let c = contour(&m.pot, r, n_dirs)?;
        let coords = c.points.coords();
        *count = c.points.len();
        if coords.len() > capacity {
            return Err(Failure::Small { needed: coords.len() });
        }
        output(out, coords.len(), "out")?.copy_from_slice(coords);
        Ok(())
    })
}

/// Builds a generator from its JSON spec, e.g.
/// `{"kind": "uniform-box", "lower": [0, 0], "upper": [1, 1]}`.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn centerout_generator_new(spec_json: *const c_char, out: *mut *mut CenteroutGenerator) -> CenteroutStatus {
    guard(|| {
        if spec_json.is_null() {
            return Err(Failure::Null("spec_json"));
        }
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let text = CStr::from_ptr(spec_json).to_str().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let spec: GeneratorSpec = serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
        *out = Box::into_raw(Box::new(CenteroutGenerator { inner: Generator::new(spec)? }));
        Ok(())
    })
}

/// # Safety
/// `generator` must come from [`centerout_generator_new`] and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn centerout_generator_free(generator: *mut CenteroutGenerator) {
    if !generator.is_null() {
        drop(Box::from_raw(generator));
    }
}

/// Dimension of the generated points, 0 for NULL.
///
/// # Safety
/// `generator` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn centerout_generator_dim(generator: *const CenteroutGenerator) -> usize {
    generator.as_ref().map_or(0, |g| g.inner.dim())
}

/// Draws `n` points into `out` (`n * d` doubles), deterministically in `seed`.
///
/// # Safety
/// `out` must hold `n * d` doubles; `generator` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn centerout_generator_sample(generator: *const CenteroutGenerator, n: usize, seed: u64, out: *mut f64) -> CenteroutStatus {
    guard(|| {
        let g = as_ref(generator, "generator")?;
        let data = g.inner.sample(n, seed)?;
        let coords = data.points().coords();
        output(out, coords.len(), "out")?.copy_from_slice(coords);
        Ok(())
    })
}

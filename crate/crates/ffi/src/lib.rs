//! C ABI over the `hcalc` toolkit.
//!
//! Points cross the boundary as `2n + 1` doubles `(a_1..a_n, b_1..b_n, c)`.
//! Every fallible call returns an [`HcalcStatus`]; on failure the message is
//! available from [`hcalc_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hcalc::maximizer::MaximizeSpec;
use hcalc::metric;
use hcalc::uds::NCover;
use hcalc::{Error, HorizontalPath, Point};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HcalcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Undefined = 4,
    Hypothesis = 5,
    Config = 6,
    Numerical = 7,
    Panic = 8,
}

/// Horizontal path owned by the library.
pub struct HcalcPath {
    inner: HorizontalPath,
}

/// Tube cover of rational lines owned by the library.
pub struct HcalcCover {
    inner: NCover,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn status_of(err: &Error) -> HcalcStatus {
    match err {
        Error::DimensionMismatch { .. } | Error::ZeroDimension => HcalcStatus::DimensionMismatch,
        Error::NonFinite(_)
        | Error::InvalidDilation(_)
        | Error::NonUnitDirection(_)
        | Error::InvalidArgument(_)
        | Error::LevelOutOfRange { .. }
        | Error::UnknownSuite(_) => HcalcStatus::InvalidArgument,
        Error::Undefined(_) => HcalcStatus::Undefined,
        Error::Hypothesis(_) => HcalcStatus::Hypothesis,
        Error::Config(_) | Error::Io(_) => HcalcStatus::Config,
        Error::Diverging(..) | Error::SearchResolution { .. } => HcalcStatus::Numerical,
    }
}

/// Runs `body`, recording any error or panic as the thread's last error.
fn guard(body: impl FnOnce() -> Result<(), (HcalcStatus, String)>) -> HcalcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => HcalcStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HcalcStatus::Panic
        }
    }
}

fn lift(err: Error) -> (HcalcStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(name: &str) -> (HcalcStatus, String) {
    (HcalcStatus::NullPointer, format!("{name} is null"))
}

/// Reads a point of `H^n` from `2n + 1` doubles.
unsafe fn read_point(n: usize, coords: *const f64, name: &str) -> Result<Point, (HcalcStatus, String)> {
    if coords.is_null() {
        return Err(null(name));
    }
    if n == 0 {
        return Err(lift(Error::ZeroDimension));
    }
    let slice = std::slice::from_raw_parts(coords, 2 * n + 1);
    Point::from_coords(slice).map_err(lift)
}

unsafe fn write_point(p: &Point, out: *mut f64) {
    let coords = p.coords();
    ptr::copy_nonoverlapping(coords.as_ptr(), out, coords.len());
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hcalc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hcalc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Group product `x * y` in `H^n`, written to `out` (`2n + 1` doubles).
///
/// # Safety
/// `x`, `y` and `out` must point to `2n + 1` doubles.
#[no_mangle]
pub unsafe extern "C" fn hcalc_group_mul(n: usize, x: *const f64, y: *const f64, out: *mut f64) -> HcalcStatus {
    guard(|| {
        let x = read_point(n, x, "x")?;
        let y = read_point(n, y, "y")?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_point(&x.mul(&y).map_err(lift)?, out);
        Ok(())
    })
}

/// Certified bracket `lower <= d(x, y) <= upper` of the Carnot-Caratheodory
/// distance.
///
/// # Safety
/// `x` and `y` must point to `2n + 1` doubles; `lower` and `upper` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn hcalc_distance_bracket(n: usize, x: *const f64, y: *const f64, lower: *mut f64, upper: *mut f64) -> HcalcStatus {
    guard(|| {
        let x = read_point(n, x, "x")?;
        let y = read_point(n, y, "y")?;
        if lower.is_null() || upper.is_null() {
            return Err(null("lower/upper"));
        }
        let (lo, hi) = metric::cc_bracket(&x, &y).map_err(lift)?;
        *lower = lo;
        *upper = hi;
        Ok(())
    })
}

/// Builds the curve `gamma_y` from the origin to `y` on `[0, 1]`.
///
/// # Safety
/// `y` must point to `2n + 1` doubles and `out` must be writable. The
/// returned handle is released with [`hcalc_path_free`].
#[no_mangle]
pub unsafe extern "C" fn hcalc_gamma_y(n: usize, y: *const f64, out: *mut *mut HcalcPath) -> HcalcStatus {
    guard(|| {
        let y = read_point(n, y, "y")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let path = hcalc::gamma_y(&y).map_err(lift)?;
        *out = Box::into_raw(Box::new(HcalcPath { inner: path }));
        Ok(())
    })
}

/// Group dimension `n` of the path, or 0 for a null handle.
///
/// # Safety
/// `path` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hcalc_path_dim(path: *const HcalcPath) -> usize {
    path.as_ref().map_or(0, |p| p.inner.start().n())
}

/// Parameter domain `[start, end]` of the path.
///
/// # Safety
/// `path` must be a live handle; `start` and `end` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hcalc_path_domain(path: *const HcalcPath, start: *mut f64, end: *mut f64) -> HcalcStatus {
    guard(|| {
        let path = path.as_ref().ok_or_else(|| null("path"))?;
        if start.is_null() || end.is_null() {
            return Err(null("start/end"));
        }
        let (a, b) = path.inner.domain();
        *start = a;
        *end = b;
        Ok(())
    })
}

/// Point of the path at parameter `t`, clamped to the domain.
///
/// # Safety
/// `path` must be a live handle and `out` must hold `2n + 1` doubles.
#[no_mangle]
pub unsafe extern "C" fn hcalc_path_eval(path: *const HcalcPath, t: f64, out: *mut f64) -> HcalcStatus {
    guard(|| {
        let path = path.as_ref().ok_or_else(|| null("path"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if !t.is_finite() {
            return Err(lift(Error::NonFinite("t")));
        }
        write_point(&path.inner.eval(t), out);
        Ok(())
    })
}

/// Lipschitz constant of the path for the Carnot-Caratheodory distance.
///
/// # Safety
/// `path` must be a live handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hcalc_path_lipschitz(path: *const HcalcPath, out: *mut f64) -> HcalcStatus {
    guard(|| {
        let path = path.as_ref().ok_or_else(|| null("path"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = path.inner.lipschitz_constant();
        Ok(())
    })
}

/// Releases a path handle; null is ignored.
///
/// # Safety
/// `path` must be null or a handle not yet released.
#[no_mangle]
pub unsafe extern "C" fn hcalc_path_free(path: *mut HcalcPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Builds the nested tube cover of rational lines up to `height`.
///
/// # Safety
/// `out` must be writable. The returned handle is released with
/// [`hcalc_cover_free`].
#[no_mangle]
pub unsafe extern "C" fn hcalc_cover_build(n: usize, height: u64, depth: usize, clip: f64, out: *mut *mut HcalcCover) -> HcalcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cover = NCover::build(n, height, depth, clip).map_err(lift)?;
        *out = Box::into_raw(Box::new(HcalcCover { inner: cover }));
        Ok(())
    })
}

/// Number of enumerated lines in the cover, or 0 for a null handle.
///
/// # Safety
/// `cover` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hcalc_cover_line_count(cover: *const HcalcCover) -> usize {
    cover.as_ref().map_or(0, |c| c.inner.lines().len())
}

/// Tube radius of line `index` at `level` (levels start at 1).
///
/// # Safety
/// `cover` must be a live handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hcalc_cover_radius(cover: *const HcalcCover, level: usize, index: usize, out: *mut f64) -> HcalcStatus {
    guard(|| {
        let cover = cover.as_ref().ok_or_else(|| null("cover"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = cover.inner.radius(level, index).map_err(lift)?;
        Ok(())
    })
}

/// Analytic volume bound of the level-`level` open set.
///
/// # Safety
/// `cover` must be a live handle and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hcalc_cover_volume_bound(cover: *const HcalcCover, level: usize, out: *mut f64) -> HcalcStatus {
    guard(|| {
        let cover = cover.as_ref().ok_or_else(|| null("cover"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = cover.inner.volume_bound(level).map_err(lift)?;
        Ok(())
    })
}

/// Conservative membership of `x` in the level-`level` open set: writes 1
/// when the point is certified inside and 0 otherwise.
///
/// # Safety
/// `cover` must be a live handle, `x` must point to `2n + 1` doubles and
/// `inside` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hcalc_cover_contains(cover: *const HcalcCover, x: *const f64, level: usize, inside: *mut i32) -> HcalcStatus {
    guard(|| {
        let cover = cover.as_ref().ok_or_else(|| null("cover"))?;
        let x = read_point(cover.inner.n(), x, "x")?;
        if inside.is_null() {
            return Err(null("inside"));
        }
        *inside = i32::from(cover.inner.contains(&x, level).map_err(lift)?);
        Ok(())
    })
}

/// Releases a cover handle; null is ignored.
///
/// # Safety
/// `cover` must be null or a handle not yet released.
#[no_mangle]
pub unsafe extern "C" fn hcalc_cover_free(cover: *mut HcalcCover) {
    if !cover.is_null() {
        drop(Box::from_raw(cover));
    }
}

/// Runs the maximizer on a JSON configuration and returns the trajectory
/// as JSON lines, one iteration per line.
///
/// # Safety
/// `config_json` must be a NUL-terminated UTF-8 string and `out` must be
/// writable. The returned string is released with [`hcalc_string_free`].
#[no_mangle]
pub unsafe extern "C" fn hcalc_maximize_json(config_json: *const c_char, out: *mut *mut c_char) -> HcalcStatus {
    guard(|| {
        if config_json.is_null() {
            return Err(null("config_json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(config_json)
            .to_str()
            .map_err(|e| (HcalcStatus::InvalidArgument, e.to_string()))?;
        let spec = MaximizeSpec::from_json(text).map_err(lift)?;
        let lines = spec.run().and_then(|t| t.to_jsonl()).map_err(lift)?;
        let lines = CString::new(lines).map_err(|e| (HcalcStatus::Config, e.to_string()))?;
        *out = lines.into_raw();
        Ok(())
    })
}

/// Releases a string returned by the library; null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet released.
#[no_mangle]
pub unsafe extern "C" fn hcalc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

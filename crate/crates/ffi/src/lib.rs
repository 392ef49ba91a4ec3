//! C ABI over `triprism`.
//!
//! Images and KL models are opaque handles. Create them with
//! `tp_image_from_gray8`, `tp_image_from_f64`, `tp_image_load` or
//! `tp_kl_fit` and release them with the matching `*_free`. Every fallible
//! function returns a [`TpStatus`] and writes results through out-pointers.
//! On failure, `tp_last_error_message` describes the most recent error on the
//! calling thread. Panics never cross the boundary; they surface as
//! `TP_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use triprism::image::load_image;
use triprism::prism::{
    cell_geometry, default_schedule, descriptor_vector, dimension_schedule, fractal_dimension,
    weighted_area_sum, ExponentRange, ScaleSchedule,
};
use triprism::stats::{kl_apply, kl_fit, FeatureMatrix, KlModel};
use triprism::{Error, GrayImage};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidImage = 3,
    Io = 4,
    Format = 5,
    Scale = 6,
    Index = 7,
    Numeric = 8,
    BufferTooSmall = 9,
    Panic = 10,
    Other = 11,
}

/// Grayscale image handle.
pub struct TpImage {
    inner: GrayImage,
}

/// Fitted Karhunen-Loève model handle.
pub struct TpKlModel {
    inner: KlModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> TpStatus {
    match err {
        Error::Io { .. } => TpStatus::Io,
        Error::Format(_) | Error::Parse { .. } => TpStatus::Format,
        Error::InvalidImage(_) => TpStatus::InvalidImage,
        Error::Scale(_) => TpStatus::Scale,
        Error::Index(_) => TpStatus::Index,
        Error::Numeric(_) | Error::Fit(_) => TpStatus::Numeric,
        Error::Argument(_) | Error::Dimension(_) | Error::Degenerate(_) | Error::Label(_) => {
            TpStatus::InvalidArgument
        }
        _ => TpStatus::Other,
    }
}

/// Failure carried out of a guarded body.
enum Fail {
    Status(TpStatus, String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn null(what: &str) -> Fail {
    Fail::Status(TpStatus::NullPointer, format!("{what} is NULL"))
}

/// Runs `body`, translating errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Fail>) -> TpStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => TpStatus::Ok,
        Ok(Err(Fail::Status(s, msg))) => {
            set_last_error(msg);
            s
        }
        Ok(Err(Fail::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            TpStatus::Panic
        }
    }
}

unsafe fn image_ref<'a>(img: *const TpImage) -> Result<&'a GrayImage, Fail> {
    img.as_ref().map(|h| &h.inner).ok_or_else(|| null("image"))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn input_slice<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(data, len))
}

unsafe fn output_slice<'a>(data: *mut f64, cap: usize, need: usize) -> Result<&'a mut [f64], Fail> {
    if cap < need {
        return Err(Fail::Status(
            TpStatus::BufferTooSmall,
            format!("buffer holds {cap} values, {need} required"),
        ));
    }
    if data.is_null() {
        return Err(null("output buffer"));
    }
    Ok(slice::from_raw_parts_mut(data, need))
}

/// Boxes `value` into `out` only once `out` is known to be writable.
unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle pointer"));
    }
    out.write(Box::into_raw(Box::new(value)));
    Ok(())
}

fn checked_area(width: usize, height: usize) -> Result<usize, Fail> {
    width.checked_mul(height).ok_or_else(|| {
        Fail::Status(
            TpStatus::InvalidArgument,
            format!("{width}x{height} overflows"),
        )
    })
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next `tp_*` call on the same thread.
#[no_mangle]
pub extern "C" fn tp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates an image from row-major 8-bit gray levels.
///
/// # Safety
/// `pixels` must point to `width * height` readable bytes; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn tp_image_from_gray8(
    pixels: *const u8,
    width: usize,
    height: usize,
    out: *mut *mut TpImage,
) -> TpStatus {
    guard(|| {
        let n = checked_area(width, height)?;
        let px = input_slice(pixels, n, "pixels")?;
        let inner = GrayImage::new(width, height, px.iter().map(|&v| f64::from(v)).collect())?;
        emit(out, TpImage { inner })
    })
}

/// Creates an image from row-major intensities in `[0, 255]`.
///
/// # Safety
/// `pixels` must point to `width * height` readable doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn tp_image_from_f64(
    pixels: *const f64,
    width: usize,
    height: usize,
    out: *mut *mut TpImage,
) -> TpStatus {
    guard(|| {
        let n = checked_area(width, height)?;
        let px = input_slice(pixels, n, "pixels")?;
        let inner = GrayImage::new(width, height, px.to_vec())?;
        emit(out, TpImage { inner })
    })
}

/// Loads a PGM or PNG file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_image_load(path: *const c_char, out: *mut *mut TpImage) -> TpStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let p = CStr::from_ptr(path).to_str().map_err(|_| {
            Fail::Status(TpStatus::InvalidArgument, "path is not valid UTF-8".into())
        })?;
        let inner = load_image(p)?;
        emit(out, TpImage { inner })
    })
}

/// Releases an image. NULL is ignored.
///
/// # Safety
/// `img` must come from a `tp_image_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tp_image_free(img: *mut TpImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// # Safety
/// `img` must be a live handle and `width`/`height` writable.
#[no_mangle]
pub unsafe extern "C" fn tp_image_size(
    img: *const TpImage,
    width: *mut usize,
    height: *mut usize,
) -> TpStatus {
    guard(|| {
        let i = image_ref(img)?;
        write_out(width, i.width())?;
        write_out(height, i.height())
    })
}

/// Prism area of the cell whose top-left corner is at row `i`, column `j`.
///
/// # Safety
/// `img` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tp_cell_area(
    img: *const TpImage,
    i: usize,
    j: usize,
    eps: usize,
    out: *mut f64,
) -> TpStatus {
    guard(|| {
        let g = cell_geometry(image_ref(img)?, i, j, eps)?;
        write_out(out, g.area())
    })
}

/// `S^α(ε)`: the sum of cell areas raised to `alpha` over the grid.
///
/// # Safety
/// `img` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tp_weighted_area_sum(
    img: *const TpImage,
    eps: usize,
    alpha: f64,
    out: *mut f64,
) -> TpStatus {
    guard(|| write_out(out, weighted_area_sum(image_ref(img)?, eps, alpha)?))
}

/// Writes the default power-of-two scales into `scales`. `count` receives
/// the number of scales even when `cap` is too small.
///
/// # Safety
/// `img` must be a live handle; `scales` must hold `cap` entries; `count`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_default_scales(
    img: *const TpImage,
    scales: *mut usize,
    cap: usize,
    count: *mut usize,
) -> TpStatus {
    guard(|| {
        let s = default_schedule(image_ref(img)?)?;
        write_out(count, s.len())?;
        if cap < s.len() {
            return Err(Fail::Status(
                TpStatus::BufferTooSmall,
                format!("{} scales, buffer holds {cap}", s.len()),
            ));
        }
        if scales.is_null() {
            return Err(null("scales"));
        }
        slice::from_raw_parts_mut(scales, s.len()).copy_from_slice(s.scales());
        Ok(())
    })
}

fn schedule_from(img: &GrayImage, scales: &[usize]) -> Result<ScaleSchedule, Fail> {
    let s = if scales.is_empty() {
        default_schedule(img)?
    } else {
        ScaleSchedule::new(scales.to_vec())?
    };
    s.validate_for(img)?;
    Ok(s)
}

/// Descriptor vector `ln S^α(ε)`, α-major then ε, into `out`
/// (`n_alphas * n_scales` values). An empty scale list selects the default
/// schedule; query its length with `tp_default_scales`.
///
/// # Safety
/// Array arguments must hold the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn tp_descriptors(
    img: *const TpImage,
    scales: *const usize,
    n_scales: usize,
    alphas: *const f64,
    n_alphas: usize,
    out: *mut f64,
    out_len: usize,
) -> TpStatus {
    guard(|| {
        let image = image_ref(img)?;
        let schedule = schedule_from(image, input_slice(scales, n_scales, "scales")?)?;
        let range = ExponentRange::new(input_slice(alphas, n_alphas, "alphas")?.to_vec())?;
        let d = descriptor_vector(image, &schedule, &range)?;
        output_slice(out, out_len, d.values.len())?.copy_from_slice(&d.values);
        Ok(())
    })
}

/// Triangular prism fractal dimension. An empty scale list selects the
/// powers of two leaving at least 8 cells per axis.
///
/// # Safety
/// `scales` must hold `n_scales` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_fractal_dimension(
    img: *const TpImage,
    scales: *const usize,
    n_scales: usize,
    out: *mut f64,
) -> TpStatus {
    guard(|| {
        let image = image_ref(img)?;
        let given = input_slice(scales, n_scales, "scales")?;
        let schedule = if given.is_empty() {
            dimension_schedule(image)?
        } else {
            schedule_from(image, given)?
        };
        write_out(out, fractal_dimension(image, &schedule)?)
    })
}

/// Fits a KL model to `rows × cols` row-major samples.
///
/// # Safety
/// `data` must hold `rows * cols` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_kl_fit(
    data: *const f64,
    rows: usize,
    cols: usize,
    out: *mut *mut TpKlModel,
) -> TpStatus {
    guard(|| {
        let n = checked_area(rows, cols)?;
        let values = input_slice(data, n, "data")?.to_vec();
        let m = matrix(rows, cols, values)?;
        let inner = kl_fit(&m)?;
        emit(out, TpKlModel { inner })
    })
}

fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Result<FeatureMatrix, Fail> {
    Ok(FeatureMatrix::new(
        rows,
        cols,
        values,
        (0..rows).map(|i| i.to_string()).collect(),
        (0..cols).map(|j| format!("f{j}")).collect(),
    )?)
}

/// Releases a KL model. NULL is ignored.
///
/// # Safety
/// `model` must come from `tp_kl_fit` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tp_kl_free(model: *mut TpKlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Eigenvalues in descending order (`dim` values).
///
/// # Safety
/// `model` must be live; `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tp_kl_eigenvalues(
    model: *const TpKlModel,
    out: *mut f64,
    out_len: usize,
) -> TpStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.inner;
        output_slice(out, out_len, m.eigenvalues.len())?.copy_from_slice(&m.eigenvalues);
        Ok(())
    })
}

/// Centers and projects `rows × cols` samples onto the first `k` components,
/// writing `rows × k` row-major values.
///
/// # Safety
/// `data` must hold `rows * cols` doubles and `out` `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tp_kl_project(
    model: *const TpKlModel,
    data: *const f64,
    rows: usize,
    cols: usize,
    k: usize,
    out: *mut f64,
    out_len: usize,
) -> TpStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.inner;
        let n = checked_area(rows, cols)?;
        let input = matrix(rows, cols, input_slice(data, n, "data")?.to_vec())?;
        let z = kl_apply(m, &input, k)?;
        output_slice(out, out_len, z.data().len())?.copy_from_slice(z.data());
        Ok(())
    })
}
